#include "svgp/data/dataset.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace svgp::data {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error(what);
}

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) fail(where + ": trailing characters in number '" + s + "'");
    return v;
  } catch (const std::invalid_argument&) {
    fail(where + ": not a number: '" + s + "'");
  } catch (const std::out_of_range&) {
    fail(where + ": number out of range: '" + s + "'");
  }
}

uint32_t read_be32(std::istream& in, const std::string& path, long offset) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) {
    fail(path + ": truncated at byte " + std::to_string(offset));
  }
  return (uint32_t(buf[0]) << 24) | (uint32_t(buf[1]) << 16) |
         (uint32_t(buf[2]) << 8) | uint32_t(buf[3]);
}

void finalize_labels(Dataset& d, std::vector<long>& raw_labels,
                     const Schema& schema, const std::string& path) {
  const Index n = static_cast<Index>(raw_labels.size());
  // integer labels must cover 0..C-1; remap (with a report) otherwise
  std::vector<long> uniq(raw_labels);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  const Index c = schema.task == Task::Binary
                      ? 2
                      : std::max<Index>(schema.num_classes,
                                        static_cast<Index>(uniq.size()));
  bool needs_remap = false;
  for (long v : raw_labels) {
    if (v < 0 || v >= c) {
      needs_remap = true;
      break;
    }
  }
  std::map<long, int> remap;
  if (needs_remap) {
    if (static_cast<Index>(uniq.size()) > c) {
      fail(path + ": " + std::to_string(uniq.size()) +
           " distinct labels exceed the configured class count " +
           std::to_string(c));
    }
    for (size_t i = 0; i < uniq.size(); ++i) remap[uniq[i]] = static_cast<int>(i);
    std::string report = "label remapping:";
    for (const auto& [from, to] : remap) {
      report += " " + std::to_string(from) + "->" + std::to_string(to);
    }
    d.notes.push_back(report);
  }
  d.y_label.resize(n);
  for (Index i = 0; i < n; ++i) {
    const long v = raw_labels[i];
    d.y_label[i] = needs_remap ? remap[v] : static_cast<int>(v);
  }
  d.num_classes = c;
}

}  // namespace

Task task_from_string(const std::string& s) {
  if (s == "regression") return Task::Regression;
  if (s == "binary") return Task::Binary;
  if (s == "multiclass") return Task::Multiclass;
  throw std::invalid_argument("unknown task: " + s);
}

std::string task_to_string(Task t) {
  switch (t) {
    case Task::Regression: return "regression";
    case Task::Binary: return "binary";
    case Task::Multiclass: return "multiclass";
  }
  return "?";
}

Format format_from_string(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "idx") return Format::Idx;
  if (s == "sparse") return Format::Sparse;
  throw std::invalid_argument("unknown dataset format: " + s);
}

NormalizeMode normalize_mode_from_string(const std::string& s) {
  if (s == "none") return NormalizeMode::None;
  if (s == "standardize_inputs") return NormalizeMode::StandardizeInputs;
  if (s == "standardize_both") return NormalizeMode::StandardizeBoth;
  throw std::invalid_argument("unknown normalize mode: " + s);
}

std::string normalize_mode_to_string(NormalizeMode m) {
  switch (m) {
    case NormalizeMode::None: return "none";
    case NormalizeMode::StandardizeInputs: return "standardize_inputs";
    case NormalizeMode::StandardizeBoth: return "standardize_both";
  }
  return "?";
}

Matrix Transform::apply_features(const Matrix& x) const {
  if (!has_features) return x;
  Matrix out = x;
  out.rowwise() -= feature_means.transpose();
  out *= feature_scales.cwiseInverse().asDiagonal();
  return out;
}

Matrix Transform::apply_targets(const Matrix& y) const {
  if (!has_targets) return y;
  Matrix out = y;
  out.rowwise() -= target_means.transpose();
  out *= target_scales.cwiseInverse().asDiagonal();
  return out;
}

lik::Observation Dataset::observation(Index i) const {
  if (task == Task::Regression) {
    return lik::Observation::of(Vector(y_real.row(i).transpose()));
  }
  return lik::Observation::of(y_label[i]);
}

Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) fail(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) fail(path + ": missing header row (line 1)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line, ',');

  std::vector<Index> target_idx;
  if (schema.features_only) {
    // all columns are features
  } else if (schema.task == Task::Regression) {
    std::vector<std::string> wanted = schema.target_cols;
    if (wanted.empty()) wanted.push_back(header.back());
    for (const auto& name : wanted) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) fail(path + ": target column '" + name + "' not in header");
      target_idx.push_back(it - header.begin());
    }
  } else {
    const std::string name = schema.label_col.empty() ? header.back() : schema.label_col;
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(path + ": label column '" + name + "' not in header");
    target_idx.push_back(it - header.begin());
  }

  std::vector<std::vector<double>> rows;
  std::vector<Vector> targets;
  std::vector<long> labels;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line, ',');
    if (fields.size() != header.size()) {
      fail(path + ": line " + std::to_string(line_no) + " has " +
           std::to_string(fields.size()) + " fields, header has " +
           std::to_string(header.size()));
    }
    const std::string where = path + ": line " + std::to_string(line_no);
    std::vector<double> feats;
    Vector tgt(target_idx.size());
    for (size_t c = 0; c < fields.size(); ++c) {
      auto it = std::find(target_idx.begin(), target_idx.end(),
                          static_cast<Index>(c));
      const double v = parse_double(fields[c], where);
      if (!std::isfinite(v)) fail(where + ": non-finite value");
      if (it == target_idx.end()) {
        feats.push_back(v);
      } else {
        tgt[it - target_idx.begin()] = v;
      }
    }
    rows.push_back(std::move(feats));
    if (!schema.features_only) {
      if (schema.task == Task::Regression) {
        targets.push_back(tgt);
      } else {
        const double lv = tgt[0];
        if (lv != std::floor(lv)) fail(where + ": label is not an integer");
        labels.push_back(static_cast<long>(lv));
      }
    }
  }
  if (rows.empty()) fail(path + ": no data rows");

  Dataset d;
  d.task = schema.task;
  d.name = path;
  const Index n = static_cast<Index>(rows.size());
  const Index dim = static_cast<Index>(rows[0].size());
  d.x.resize(n, dim);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[i].size()) != dim) {
      fail(path + ": ragged feature row at line " + std::to_string(i + 2));
    }
    for (Index j = 0; j < dim; ++j) d.x(i, j) = rows[i][j];
  }
  if (!schema.features_only) {
    if (schema.task == Task::Regression) {
      d.y_real.resize(n, static_cast<Index>(target_idx.size()));
      for (Index i = 0; i < n; ++i) d.y_real.row(i) = targets[i].transpose();
    } else {
      finalize_labels(d, labels, schema, path);
    }
  }
  return d;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const Schema& schema) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) fail(images_path + ": cannot open");
  const uint32_t magic = read_be32(in, images_path, 0);
  if (magic != 0x00000803) {
    fail(images_path + ": bad image magic at byte 0 (got 0x" +
         [&] { std::ostringstream o; o << std::hex << magic; return o.str(); }() +
         ", want 0x803)");
  }
  const uint32_t n = read_be32(in, images_path, 4);
  const uint32_t rows = read_be32(in, images_path, 8);
  const uint32_t cols = read_be32(in, images_path, 12);
  const Index dim = static_cast<Index>(rows) * static_cast<Index>(cols);
  std::vector<unsigned char> buf(static_cast<size_t>(n) * dim);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) {
    fail(images_path + ": truncated pixel data at byte " +
         std::to_string(16 + in.gcount()));
  }

  Dataset d;
  d.task = schema.task;
  d.name = images_path;
  d.x.resize(n, dim);
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    for (Index j = 0; j < dim; ++j) {
      d.x(i, j) = buf[static_cast<size_t>(i) * dim + j] / 255.0;
    }
  }

  if (!labels_path.empty() && !schema.features_only) {
    std::ifstream lin(labels_path, std::ios::binary);
    if (!lin) fail(labels_path + ": cannot open");
    const uint32_t lmagic = read_be32(lin, labels_path, 0);
    if (lmagic != 0x00000801) {
      fail(labels_path + ": bad label magic at byte 0");
    }
    const uint32_t ln = read_be32(lin, labels_path, 4);
    if (ln != n) {
      fail(labels_path + ": label count " + std::to_string(ln) +
           " does not match image count " + std::to_string(n));
    }
    std::vector<unsigned char> lbuf(ln);
    lin.read(reinterpret_cast<char*>(lbuf.data()), ln);
    if (!lin) fail(labels_path + ": truncated label data");
    std::vector<long> labels(lbuf.begin(), lbuf.end());
    finalize_labels(d, labels, schema, labels_path);
  }
  return d;
}

Dataset load_sparse(const std::string& path, const Schema& schema) {
  if (schema.dim < 1) fail(path + ": sparse format needs schema.dim");
  std::ifstream in(path);
  if (!in) fail(path + ": cannot open");

  std::vector<Vector> rows;
  std::vector<long> labels;
  std::vector<Vector> targets;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    ss >> tok;
    const std::string where = path + ": line " + std::to_string(line_no);
    bool has_label = tok.find(':') == std::string::npos;
    Vector row = Vector::Zero(schema.dim);
    if (has_label) {
      const double lv = parse_double(tok, where);
      if (schema.task == Task::Regression) {
        targets.push_back(Vector::Constant(1, lv));
      } else {
        if (lv != std::floor(lv)) fail(where + ": label is not an integer");
        labels.push_back(static_cast<long>(lv));
      }
    } else if (!schema.features_only) {
      fail(where + ": missing label");
    } else {
      // first token is already a feature
      const auto colon = tok.find(':');
      const long idx = static_cast<long>(parse_double(tok.substr(0, colon), where));
      if (idx < 1 || idx > schema.dim) fail(where + ": index out of range");
      row[idx - 1] = parse_double(tok.substr(colon + 1), where);
    }
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) fail(where + ": expected idx:val, got '" + tok + "'");
      const long idx = static_cast<long>(parse_double(tok.substr(0, colon), where));
      if (idx < 1 || idx > schema.dim) {
        fail(where + ": index " + std::to_string(idx) + " out of range 1.." +
             std::to_string(schema.dim));
      }
      row[idx - 1] = parse_double(tok.substr(colon + 1), where);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(path + ": no data lines");

  Dataset d;
  d.task = schema.task;
  d.name = path;
  d.x.resize(static_cast<Index>(rows.size()), schema.dim);
  for (size_t i = 0; i < rows.size(); ++i) d.x.row(static_cast<Index>(i)) = rows[i].transpose();
  if (!schema.features_only) {
    if (schema.task == Task::Regression) {
      d.y_real.resize(static_cast<Index>(targets.size()), 1);
      for (size_t i = 0; i < targets.size(); ++i) d.y_real(static_cast<Index>(i), 0) = targets[i][0];
    } else {
      finalize_labels(d, labels, schema, path);
    }
  }
  return d;
}

void normalize(Dataset& d, NormalizeMode mode) {
  if (mode == NormalizeMode::None) return;
  if (d.n() < 2) fail("normalize: need at least 2 points");

  const Index dim = d.d();
  Vector means = d.x.colwise().mean();
  Vector scales(dim);
  long degenerate = 0;
  for (Index j = 0; j < dim; ++j) {
    const double var = (d.x.col(j).array() - means[j]).square().sum() / (d.n() - 1);
    if (var <= 0.0) {
      scales[j] = 1.0;
      ++degenerate;
    } else {
      scales[j] = std::sqrt(var);
    }
  }
  if (degenerate > 0) {
    d.notes.push_back("normalize: " + std::to_string(degenerate) +
                      " zero-variance feature dimension(s), scale forced to 1");
  }
  d.x.rowwise() -= means.transpose();
  d.x *= scales.cwiseInverse().asDiagonal();
  d.transform.feature_means = means;
  d.transform.feature_scales = scales;
  d.transform.has_features = true;

  if (mode == NormalizeMode::StandardizeBoth && d.task == Task::Regression) {
    const Index p = d.y_real.cols();
    Vector tmeans = d.y_real.colwise().mean();
    Vector tscales(p);
    for (Index j = 0; j < p; ++j) {
      const double var =
          (d.y_real.col(j).array() - tmeans[j]).square().sum() / (d.n() - 1);
      tscales[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    d.y_real.rowwise() -= tmeans.transpose();
    d.y_real *= tscales.cwiseInverse().asDiagonal();
    d.transform.target_means = tmeans;
    d.transform.target_scales = tscales;
    d.transform.has_targets = true;
  }
}

void apply_transform(Dataset& d, const Transform& t) {
  d.x = t.apply_features(d.x);
  if (t.has_targets && d.task == Task::Regression && d.y_real.size() > 0) {
    d.y_real = t.apply_targets(d.y_real);
  }
  d.transform = t;
}

std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction,
                                  math::RandomStream stream) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("split: test_fraction must be in (0, 1)");
  }
  const Index n = d.n();
  const Index n_test = std::max<Index>(1, static_cast<Index>(n * test_fraction));

  std::vector<Index> test_idx;
  if (d.task == Task::Regression) {
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (Index i = n - 1; i > 0; --i) {
      const Index j = static_cast<Index>(stream.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }
    test_idx.assign(order.begin(), order.begin() + n_test);
  } else {
    // stratified: per-class quota by largest remainder
    std::vector<std::vector<Index>> by_class(d.num_classes);
    for (Index i = 0; i < n; ++i) by_class[d.y_label[i]].push_back(i);
    for (auto& cls : by_class) {
      for (size_t i = cls.size(); i > 1; --i) {
        const size_t j = stream.next_u64() % i;
        std::swap(cls[i - 1], cls[j]);
      }
    }
    std::vector<Index> quota(d.num_classes);
    std::vector<std::pair<double, Index>> remainders;
    Index assigned = 0;
    for (Index c = 0; c < d.num_classes; ++c) {
      const double exact = by_class[c].size() * test_fraction;
      quota[c] = static_cast<Index>(exact);
      assigned += quota[c];
      remainders.push_back({exact - quota[c], c});
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) {
                return a.first > b.first || (a.first == b.first && a.second < b.second);
              });
    for (size_t i = 0; assigned < n_test && i < remainders.size(); ++i) {
      const Index c = remainders[i].second;
      if (quota[c] < static_cast<Index>(by_class[c].size())) {
        ++quota[c];
        ++assigned;
      }
    }
    for (Index c = 0; c < d.num_classes; ++c) {
      for (Index i = 0; i < quota[c]; ++i) test_idx.push_back(by_class[c][i]);
    }
  }

  std::vector<bool> in_test(n, false);
  for (Index i : test_idx) in_test[i] = true;

  auto take = [&](bool test_part) {
    Dataset out;
    out.task = d.task;
    out.num_classes = d.num_classes;
    out.name = d.name + (test_part ? "#test" : "#train");
    out.transform = d.transform;
    std::vector<Index> rows;
    for (Index i = 0; i < n; ++i) {
      if (in_test[i] == test_part) rows.push_back(i);
    }
    out.x.resize(static_cast<Index>(rows.size()), d.d());
    if (d.task == Task::Regression) out.y_real.resize(static_cast<Index>(rows.size()), d.y_real.cols());
    else out.y_label.resize(static_cast<Index>(rows.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      out.x.row(static_cast<Index>(r)) = d.x.row(rows[r]);
      if (d.task == Task::Regression) out.y_real.row(static_cast<Index>(r)) = d.y_real.row(rows[r]);
      else out.y_label[static_cast<Index>(r)] = d.y_label[rows[r]];
    }
    return out;
  };
  return {take(false), take(true)};
}

void save_cache(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path + ": cannot open for writing");
  const char magic[8] = {'S', 'V', 'G', 'P', 'D', 'S', '0', '1'};
  out.write(magic, 8);
  const int64_t task = static_cast<int64_t>(d.task);
  const int64_t n = d.n(), dim = d.d(), p = d.y_real.cols(),
                classes = d.num_classes;
  for (int64_t v : {task, n, dim, p, classes}) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  }
  out.write(reinterpret_cast<const char*>(d.x.data()),
            static_cast<std::streamsize>(sizeof(double)) * d.x.size());
  if (d.task == Task::Regression) {
    out.write(reinterpret_cast<const char*>(d.y_real.data()),
              static_cast<std::streamsize>(sizeof(double)) * d.y_real.size());
  } else {
    out.write(reinterpret_cast<const char*>(d.y_label.data()),
              static_cast<std::streamsize>(sizeof(int)) * d.y_label.size());
  }
  if (!out) fail(path + ": write failed");
}

Dataset load_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path + ": cannot open");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "SVGPDS01", 8) != 0) {
    fail(path + ": bad dataset cache magic at byte 0");
  }
  int64_t task, n, dim, p, classes;
  for (int64_t* v : {&task, &n, &dim, &p, &classes}) {
    in.read(reinterpret_cast<char*>(v), 8);
  }
  if (!in) fail(path + ": truncated header");
  Dataset d;
  d.task = static_cast<Task>(task);
  d.num_classes = static_cast<Index>(classes);
  d.name = path;
  d.x.resize(n, dim);
  in.read(reinterpret_cast<char*>(d.x.data()),
          static_cast<std::streamsize>(sizeof(double)) * d.x.size());
  if (d.task == Task::Regression) {
    d.y_real.resize(n, p);
    in.read(reinterpret_cast<char*>(d.y_real.data()),
            static_cast<std::streamsize>(sizeof(double)) * d.y_real.size());
  } else {
    d.y_label.resize(n);
    in.read(reinterpret_cast<char*>(d.y_label.data()),
            static_cast<std::streamsize>(sizeof(int)) * d.y_label.size());
  }
  if (!in) fail(path + ": truncated data");
  return d;
}

BatchIterator::BatchIterator(Index n, Index batch_size, math::RandomStream stream)
    : n_(n), batch_size_(std::min(batch_size, n)), stream_(stream) {
  if (n_ < 1 || batch_size < 1) {
    throw std::invalid_argument("BatchIterator: need n >= 1 and batch >= 1");
  }
  order_.resize(n_);
  std::iota(order_.begin(), order_.end(), 0);
}

void BatchIterator::start_epoch(long epoch) {
  auto rs = stream_.fork(static_cast<uint64_t>(epoch));
  std::iota(order_.begin(), order_.end(), 0);
  for (Index i = n_ - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rs.next_u64() % (i + 1));
    std::swap(order_[i], order_[j]);
  }
  cursor_ = 0;
}

std::vector<Index> BatchIterator::next() {
  if (cursor_ >= n_) return {};
  const Index end = std::min(n_, cursor_ + batch_size_);
  std::vector<Index> out(order_.begin() + cursor_, order_.begin() + end);
  cursor_ = end;
  return out;
}

Index BatchIterator::batches_per_epoch() const {
  return (n_ + batch_size_ - 1) / batch_size_;
}

}  // namespace svgp::data
