#include "svgp/io/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace svgp::io {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json vec_to_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from_json(const ordered_json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

std::string Checkpoint::to_json() const {
  ordered_json j;
  j["format_version"] = format_version;
  j["config"] =
      config_json.empty() ? ordered_json::object() : ordered_json::parse(config_json);

  ordered_json dims;
  dims["q"] = state.q();
  dims["m"] = state.m();
  dims["d"] = state.d();
  dims["k"] = state.k();
  j["dims"] = dims;

  ordered_json kerns = ordered_json::array();
  for (const auto& kern : state.kernels) {
    ordered_json k;
    k["kind"] = kernels::kind_to_string(kern.kind());
    k["degree"] = kern.degree();
    k["depth"] = kern.depth();
    kerns.push_back(k);
  }
  j["kernels"] = kerns;

  ordered_json likj;
  likj["kind"] = lik::kind_to_string(state.likelihood.kind());
  likj["outputs"] = state.likelihood.output_dim();
  likj["classes"] = state.likelihood.num_classes();
  likj["node_functions"] = state.likelihood.q_node();
  j["likelihood"] = likj;

  j["shared_inducing"] = state.inducing.shared;
  j["jitter_scale"] = state.jitter_scale;

  ordered_json params;
  for (const auto& group : state.group_names()) {
    params[group] = vec_to_json(state.get_group(group));
  }
  j["params"] = params;

  ordered_json tr;
  tr["has_features"] = transform.has_features;
  tr["has_targets"] = transform.has_targets;
  if (transform.has_features) {
    tr["feature_means"] = vec_to_json(transform.feature_means);
    tr["feature_scales"] = vec_to_json(transform.feature_scales);
  }
  if (transform.has_targets) {
    tr["target_means"] = vec_to_json(transform.target_means);
    tr["target_scales"] = vec_to_json(transform.target_scales);
  }
  j["transform"] = tr;

  ordered_json opt;
  opt["learning_rate"] = optimizer.learning_rate;
  opt["step_count"] = optimizer.step_count;
  opt["skipped_updates"] = optimizer.skipped_updates;
  ordered_json accs;
  for (const auto& [group, acc] : optimizer.accumulators) {
    accs[group] = vec_to_json(acc);
  }
  opt["accumulators"] = accs;
  j["optimizer"] = opt;

  ordered_json prog;
  prog["next_epoch"] = progress.next_epoch;
  prog["global_step"] = progress.global_step;
  prog["outer_round"] = progress.outer_round;
  prog["phase_index"] = progress.phase_index;
  prog["epoch_in_phase"] = progress.epoch_in_phase;
  j["progress"] = prog;

  ordered_json stream;
  stream["seed"] = stream_seed;
  stream["stream_id"] = stream_id;
  stream["counter"] = stream_counter;
  j["stream"] = stream;

  return j.dump(2) + "\n";
}

Checkpoint Checkpoint::from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("checkpoint: JSON parse error: ") + e.what());
  }
  Checkpoint c;
  c.format_version = j.at("format_version").get<int>();
  if (c.format_version != kCheckpointVersion) {
    throw std::runtime_error(
        "checkpoint: format_version " + std::to_string(c.format_version) +
        " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  c.config_json = j.at("config").dump();

  const Index q = j.at("dims").at("q").get<Index>();
  const Index m = j.at("dims").at("m").get<Index>();
  const Index d = j.at("dims").at("d").get<Index>();
  const Index k = j.at("dims").at("k").get<Index>();

  std::vector<kernels::Kernel> kerns;
  for (const auto& kj : j.at("kernels")) {
    const auto kind = kernels::kind_from_string(kj.at("kind").get<std::string>());
    switch (kind) {
      case kernels::Kind::RbfArd:
        kerns.push_back(kernels::Kernel::rbf_ard(d));
        break;
      case kernels::Kind::RbfIso:
        kerns.push_back(kernels::Kernel::rbf_iso(d));
        break;
      case kernels::Kind::ArcCosine:
        kerns.push_back(kernels::Kernel::arc_cosine(
            d, kj.at("degree").get<int>(), kj.at("depth").get<int>()));
        break;
    }
  }
  if (static_cast<Index>(kerns.size()) != q) {
    throw std::runtime_error("checkpoint: kernel count does not match dims.q");
  }

  const auto& lj = j.at("likelihood");
  const auto lkind = lik::kind_from_string(lj.at("kind").get<std::string>());
  lik::Likelihood likelihood;
  switch (lkind) {
    case lik::Kind::Gaussian:
      likelihood = lik::Likelihood::gaussian(lj.at("outputs").get<Index>(), 0.0);
      break;
    case lik::Kind::Logistic:
      likelihood = lik::Likelihood::logistic();
      break;
    case lik::Kind::Softmax:
      likelihood = lik::Likelihood::softmax(lj.at("classes").get<Index>());
      break;
    case lik::Kind::Gprn:
      likelihood = lik::Likelihood::gprn(lj.at("outputs").get<Index>(),
                                         lj.at("node_functions").get<Index>(), 0.0);
      break;
  }

  model::InducingSet inducing;
  inducing.shared = j.at("shared_inducing").get<bool>();
  const Index n_z = inducing.shared ? 1 : q;
  inducing.z.assign(n_z, Matrix::Zero(m, d));

  c.state = model::ModelState::init(std::move(kerns), std::move(inducing), k,
                                    std::move(likelihood));
  c.state.jitter_scale = j.value("jitter_scale", 1e-6);
  for (const auto& group : c.state.group_names()) {
    c.state.set_group(group, vec_from_json(j.at("params").at(group)));
  }
  c.state.validate();

  const auto& tr = j.at("transform");
  c.transform.has_features = tr.at("has_features").get<bool>();
  c.transform.has_targets = tr.at("has_targets").get<bool>();
  if (c.transform.has_features) {
    c.transform.feature_means = vec_from_json(tr.at("feature_means"));
    c.transform.feature_scales = vec_from_json(tr.at("feature_scales"));
  }
  if (c.transform.has_targets) {
    c.transform.target_means = vec_from_json(tr.at("target_means"));
    c.transform.target_scales = vec_from_json(tr.at("target_scales"));
  }

  const auto& opt = j.at("optimizer");
  c.optimizer.learning_rate = opt.at("learning_rate").get<double>();
  c.optimizer.step_count = opt.at("step_count").get<long>();
  c.optimizer.skipped_updates = opt.at("skipped_updates").get<long>();
  for (const auto& [group, acc] : opt.at("accumulators").items()) {
    c.optimizer.accumulators[group] = vec_from_json(acc);
  }

  const auto& prog = j.at("progress");
  c.progress.next_epoch = prog.at("next_epoch").get<long>();
  c.progress.global_step = prog.at("global_step").get<long>();
  c.progress.outer_round = prog.at("outer_round").get<long>();
  c.progress.phase_index = prog.at("phase_index").get<int>();
  c.progress.epoch_in_phase = prog.at("epoch_in_phase").get<long>();

  const auto& stream = j.at("stream");
  c.stream_seed = stream.at("seed").get<std::uint64_t>();
  c.stream_id = stream.at("stream_id").get<std::uint64_t>();
  c.stream_counter = stream.at("counter").get<std::uint64_t>();
  return c;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  out << to_json();
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace svgp::io
