#include "svgp/io/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "svgp/train/kmeans.hpp"

namespace svgp::io {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "field '" + key + "' has the wrong type");
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what, std::string("JSON parse error: ") + e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  const json j = parse_json(json_text, "config");
  RunConfig cfg;
  cfg.raw_json = j.dump();

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    auto& dc = cfg.dataset;
    dc.format = get_or<std::string>(d, "format", dc.format);
    dc.train_path = get_or<std::string>(d, "train_path", "");
    dc.test_path = get_or<std::string>(d, "test_path", "");
    dc.train_images = get_or<std::string>(d, "train_images", "");
    dc.train_labels = get_or<std::string>(d, "train_labels", "");
    dc.test_images = get_or<std::string>(d, "test_images", "");
    dc.test_labels = get_or<std::string>(d, "test_labels", "");
    dc.normalize = get_or<std::string>(d, "normalize", dc.normalize);
    if (d.contains("test_fraction") && !d.at("test_fraction").is_null()) {
      dc.test_fraction = d.at("test_fraction").get<double>();
    }
    if (d.contains("schema")) {
      const json& s = d.at("schema");
      dc.schema.task = data::task_from_string(
          get_or<std::string>(s, "task", "regression"));
      dc.schema.label_col = get_or<std::string>(s, "label_col", "");
      if (s.contains("target_cols")) {
        dc.schema.target_cols =
            s.at("target_cols").get<std::vector<std::string>>();
      }
      dc.schema.num_classes =
          get_or<Index>(s, "num_classes", dc.schema.num_classes);
      dc.schema.dim = get_or<Index>(s, "dim", dc.schema.dim);
    }
    if (d.contains("synthetic")) {
      const json& s = d.at("synthetic");
      dc.synth.kind = get_or<std::string>(s, "kind", "regression_1d");
      dc.synth.n = get_or<Index>(s, "n", dc.synth.n);
      dc.synth.d = get_or<Index>(s, "d", dc.synth.d);
      dc.synth.outputs = get_or<Index>(s, "outputs", dc.synth.outputs);
      dc.synth.node_functions =
          get_or<Index>(s, "node_functions", dc.synth.node_functions);
      dc.synth.classes = get_or<Index>(s, "classes", dc.synth.classes);
      dc.synth.noise_variance =
          get_or<double>(s, "noise_variance", dc.synth.noise_variance);
      dc.synth.lengthscale = get_or<double>(s, "lengthscale", dc.synth.lengthscale);
      dc.synth.class_separation =
          get_or<double>(s, "class_separation", dc.synth.class_separation);
      dc.synth.seed = get_or<std::uint64_t>(s, "seed", dc.synth.seed);
      if (s.contains("test_fraction") && !s.at("test_fraction").is_null()) {
        dc.synth_test_fraction = s.at("test_fraction").get<double>();
      }
    }
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.contains("kernel")) {
      const json& k = m.at("kernel");
      cfg.kernel.kind = get_or<std::string>(k, "kind", cfg.kernel.kind);
      cfg.kernel.degree = get_or<int>(k, "degree", cfg.kernel.degree);
      cfg.kernel.depth = get_or<int>(k, "depth", cfg.kernel.depth);
      cfg.kernel.log_variance =
          get_or<double>(k, "log_variance", cfg.kernel.log_variance);
      if (k.contains("log_lengthscale") && !k.at("log_lengthscale").is_null()) {
        cfg.kernel.log_lengthscale = k.at("log_lengthscale").get<double>();
      }
    }
    if (m.contains("likelihood")) {
      const json& l = m.at("likelihood");
      cfg.likelihood.kind = get_or<std::string>(l, "kind", cfg.likelihood.kind);
      cfg.likelihood.outputs = get_or<Index>(l, "outputs", cfg.likelihood.outputs);
      cfg.likelihood.classes = get_or<Index>(l, "classes", cfg.likelihood.classes);
      cfg.likelihood.node_functions =
          get_or<Index>(l, "node_functions", cfg.likelihood.node_functions);
      cfg.likelihood.log_noise =
          get_or<double>(l, "log_noise", cfg.likelihood.log_noise);
    }
    cfg.num_inducing = get_or<Index>(m, "num_inducing", cfg.num_inducing);
    cfg.mixture_components =
        get_or<Index>(m, "mixture_components", cfg.mixture_components);
    cfg.shared_inducing = get_or<bool>(m, "shared_inducing", cfg.shared_inducing);
  }

  if (j.contains("training")) {
    const json& t = j.at("training");
    auto& tr = cfg.training;
    tr.mode = train::mode_from_string(
        get_or<std::string>(t, "mode", "elbo_only"));
    tr.learning_rate = get_or<double>(t, "learning_rate", tr.learning_rate);
    tr.batch_size = get_or<Index>(t, "batch_size", tr.batch_size);
    tr.mc_samples = get_or<Index>(t, "mc_samples", tr.mc_samples);
    tr.epochs_per_phase = get_or<long>(t, "epochs_per_phase", tr.epochs_per_phase);
    tr.max_outer_rounds = get_or<long>(t, "max_outer_rounds", tr.max_outer_rounds);
    tr.eval_every = get_or<long>(t, "eval_every", tr.eval_every);
    tr.convergence_tol = get_or<double>(t, "convergence_tol", tr.convergence_tol);
    tr.seed = get_or<std::uint64_t>(t, "seed", tr.seed);
    tr.workers = get_or<int>(t, "workers", tr.workers);
    tr.loo_update_inducing =
        get_or<bool>(t, "loo_update_inducing", tr.loo_update_inducing);
    if (tr.batch_size < 1) throw ConfigError("training.batch_size", "must be >= 1");
    if (tr.mc_samples < 1) throw ConfigError("training.mc_samples", "must be >= 1");
    if (tr.epochs_per_phase < 1) throw ConfigError("training.epochs_per_phase", "must be >= 1");
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    cfg.checkpoint_path = get_or<std::string>(o, "checkpoint", cfg.checkpoint_path);
    cfg.metrics_path = get_or<std::string>(o, "metrics", cfg.metrics_path);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

data::Dataset load_one(const DatasetConfig& dc, bool test_part) {
  const auto format = data::format_from_string(dc.format == "synthetic" ? "csv" : dc.format);
  if (dc.format == "csv") {
    const std::string& path = test_part ? dc.test_path : dc.train_path;
    if (path.empty()) {
      throw ConfigError(test_part ? "dataset.test_path" : "dataset.train_path",
                        "missing dataset path");
    }
    return data::load_csv(path, dc.schema);
  }
  if (dc.format == "sparse") {
    const std::string& path = test_part ? dc.test_path : dc.train_path;
    if (path.empty()) {
      throw ConfigError(test_part ? "dataset.test_path" : "dataset.train_path",
                        "missing dataset path");
    }
    return data::load_sparse(path, dc.schema);
  }
  if (dc.format == "idx") {
    const std::string& images = test_part ? dc.test_images : dc.train_images;
    const std::string& labels = test_part ? dc.test_labels : dc.train_labels;
    if (images.empty()) {
      throw ConfigError(test_part ? "dataset.test_images" : "dataset.train_images",
                        "missing IDX image path");
    }
    return data::load_idx(images, labels, dc.schema);
  }
  (void)format;
  throw ConfigError("dataset.format", "unknown format: " + dc.format);
}

}  // namespace

LoadedData load_data(const RunConfig& cfg) {
  LoadedData out;
  const auto& dc = cfg.dataset;
  try {
    if (dc.format == "synthetic") {
      data::Dataset all = data::synthesize(dc.synth);
      if (dc.synth_test_fraction) {
        auto [tr, te] = data::split(all, *dc.synth_test_fraction,
                                    math::RandomStream(dc.synth.seed, 0x5B17));
        out.train = std::move(tr);
        out.test = std::move(te);
      } else {
        out.train = std::move(all);
      }
    } else {
      out.train = load_one(dc, false);
      const bool has_test = !(dc.test_path.empty() && dc.test_images.empty());
      if (has_test) {
        out.test = load_one(dc, true);
      } else if (dc.test_fraction) {
        auto [tr, te] = data::split(out.train, *dc.test_fraction,
                                    math::RandomStream(cfg.training.seed, 77));
        out.train = std::move(tr);
        out.test = std::move(te);
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("dataset", e.what());
  }

  const auto mode = data::normalize_mode_from_string(dc.normalize);
  data::normalize(out.train, mode);
  if (out.test) data::apply_transform(*out.test, out.train.transform);
  return out;
}

model::ModelState build_initial_state(const RunConfig& cfg,
                                      const data::Dataset& train) {
  const Index d = train.d();
  lik::Likelihood likelihood;
  if (cfg.likelihood.kind == "gaussian") {
    const Index p = train.task == data::Task::Regression
                        ? train.y_real.cols()
                        : cfg.likelihood.outputs;
    likelihood = lik::Likelihood::gaussian(p, cfg.likelihood.log_noise);
  } else if (cfg.likelihood.kind == "logistic") {
    likelihood = lik::Likelihood::logistic();
  } else if (cfg.likelihood.kind == "softmax") {
    const Index c = std::max<Index>(cfg.likelihood.classes, train.num_classes);
    likelihood = lik::Likelihood::softmax(c);
  } else if (cfg.likelihood.kind == "gprn") {
    const Index p = train.task == data::Task::Regression
                        ? train.y_real.cols()
                        : cfg.likelihood.outputs;
    likelihood =
        lik::Likelihood::gprn(p, cfg.likelihood.node_functions,
                              cfg.likelihood.log_noise);
  } else {
    throw ConfigError("model.likelihood.kind",
                      "unknown likelihood: " + cfg.likelihood.kind);
  }

  const Index q = likelihood.latent_dim();
  double log_ls = 0.0;
  if (cfg.kernel.kind != "arc_cosine") {
    if (cfg.kernel.log_lengthscale) {
      log_ls = *cfg.kernel.log_lengthscale;
    } else {
      // median pairwise distance heuristic
      const double med =
          train::median_sq_distance(train.x, math::RandomStream(cfg.training.seed, 13));
      log_ls = 0.5 * std::log(med);
    }
  }
  std::vector<kernels::Kernel> kerns;
  kerns.reserve(q);
  for (Index j = 0; j < q; ++j) {
    if (cfg.kernel.kind == "rbf_ard") {
      kerns.push_back(kernels::Kernel::rbf_ard(d, cfg.kernel.log_variance, log_ls));
    } else if (cfg.kernel.kind == "rbf_iso") {
      kerns.push_back(kernels::Kernel::rbf_iso(d, cfg.kernel.log_variance, log_ls));
    } else if (cfg.kernel.kind == "arc_cosine") {
      kerns.push_back(kernels::Kernel::arc_cosine(
          d, cfg.kernel.degree, cfg.kernel.depth, cfg.kernel.log_variance));
    } else {
      throw ConfigError("model.kernel.kind", "unknown kernel: " + cfg.kernel.kind);
    }
  }

  if (cfg.num_inducing > train.n()) {
    throw ConfigError("model.num_inducing",
                      "more inducing points than training points");
  }
  const Matrix z = train::kmeans_init(train.x, cfg.num_inducing,
                                      math::RandomStream(cfg.training.seed, 17));
  model::InducingSet inducing;
  inducing.shared = cfg.shared_inducing;
  if (cfg.shared_inducing) {
    inducing.z = {z};
  } else {
    inducing.z.assign(q, z);
  }

  return model::ModelState::init(std::move(kerns), std::move(inducing),
                                 cfg.mixture_components, std::move(likelihood));
}

}  // namespace svgp::io
