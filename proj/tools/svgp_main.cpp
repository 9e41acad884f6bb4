#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "svgp/io/checkpoint.hpp"
#include "svgp/io/config.hpp"
#include "svgp/model/marginals.hpp"
#include "svgp/train/gradcheck.hpp"
#include "svgp/train/variance_study.hpp"

namespace {

using namespace svgp;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void error_line(int code, const std::string& field, const std::string& message) {
  std::cerr << "ERROR " << code << " " << field << ": " << message << std::endl;
}

struct CommonFlags {
  std::string config_path;
  std::string checkpoint_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<Index> mc_samples;
  std::string out_path;
};

io::RunConfig load_config_with_overrides(const CommonFlags& flags) {
  io::RunConfig cfg = io::load_config(flags.config_path);
  if (flags.seed) cfg.training.seed = *flags.seed;
  if (flags.workers) cfg.training.workers = *flags.workers;
  if (flags.mc_samples) cfg.training.mc_samples = *flags.mc_samples;
  return cfg;
}

io::Checkpoint make_checkpoint(const io::RunConfig& cfg,
                               const train::TrainResult& res,
                               const data::Transform& transform) {
  io::Checkpoint ck;
  ck.config_json = cfg.raw_json;
  ck.state = res.state;
  ck.transform = transform;
  ck.optimizer = res.optimizer;
  ck.progress = res.progress;
  ck.stream_seed = cfg.training.seed;
  ck.stream_id = 0;
  ck.stream_counter = 0;
  return ck;
}

int cmd_train(const CommonFlags& flags) {
  io::RunConfig cfg = load_config_with_overrides(flags);
  const std::string checkpoint_out =
      flags.out_path.empty() ? cfg.checkpoint_path : flags.out_path;

  io::LoadedData data = io::load_data(cfg);
  for (const auto& note : data.train.notes) std::cerr << "NOTE " << note << "\n";

  model::ModelState state;
  train::RmsPropState optimizer;
  train::TrainProgress progress;
  bool resuming = false;
  if (!flags.checkpoint_path.empty()) {
    io::Checkpoint ck = io::Checkpoint::load(flags.checkpoint_path);
    state = std::move(ck.state);
    optimizer = std::move(ck.optimizer);
    progress = ck.progress;
    resuming = true;
  } else {
    state = io::build_initial_state(cfg, data.train);
  }

  std::ofstream metrics(cfg.metrics_path,
                        resuming ? std::ios::app : std::ios::trunc);
  if (!metrics) {
    throw io::ConfigError("output.metrics",
                          "cannot open metrics path: " + cfg.metrics_path);
  }
  if (!resuming) metrics << train::Metrics::header() << "\n";

  train::TrainHooks hooks;
  hooks.on_metrics = [&](const train::Metrics& m) {
    metrics << m.line() << "\n";
    metrics.flush();
  };
  hooks.on_phase_end = [&](const train::TrainResult& snapshot) {
    make_checkpoint(cfg, snapshot, data.train.transform).save(checkpoint_out);
  };

  train::TrainResult res =
      train::train(data.train, data.test ? &*data.test : nullptr, state,
                   cfg.training, hooks, std::move(optimizer), progress);

  make_checkpoint(cfg, res, data.train.transform).save(checkpoint_out);
  if (res.aborted) {
    error_line(kExitNumerical, "train", res.abort_reason);
    return kExitNumerical;
  }
  std::cout << "trained " << res.progress.next_epoch << " epochs; checkpoint "
            << checkpoint_out << "; metrics " << cfg.metrics_path << std::endl;
  return kExitOk;
}

/// Loads the evaluation dataset with the checkpoint's transform applied
/// (never recomputing statistics).
data::Dataset load_eval_data(io::RunConfig cfg, const io::Checkpoint& ck) {
  cfg.dataset.normalize = "none";
  io::LoadedData data = io::load_data(cfg);
  data::Dataset d = data.test ? std::move(*data.test) : std::move(data.train);
  data::apply_transform(d, ck.transform);
  return d;
}

int cmd_evaluate(const CommonFlags& flags) {
  io::RunConfig cfg = load_config_with_overrides(flags);
  io::Checkpoint ck = io::Checkpoint::load(flags.checkpoint_path);
  data::Dataset d = load_eval_data(cfg, ck);

  obj::McConfig mc{cfg.training.mc_samples,
                   math::RandomStream(cfg.training.seed, 0xEA1)};
  train::Metrics m = train::evaluate(ck.state, d, mc, cfg.training.workers);

  nlohmann::ordered_json out;
  out["n"] = d.n();
  out["mc_samples"] = mc.num_samples;
  out["error_rate"] = m.error_rate;
  out["mean_nlp"] = m.mean_nlp;
  out["msse"] = m.msse;
  std::cout << out.dump() << std::endl;
  return kExitOk;
}

int cmd_predict(const CommonFlags& flags, const std::string& in_path,
                const std::string& format, Index sparse_dim) {
  io::Checkpoint ck = io::Checkpoint::load(flags.checkpoint_path);
  const Index model_d = ck.state.d();

  data::Schema schema;
  schema.features_only = true;
  schema.dim = sparse_dim;
  data::Dataset d;
  if (format == "csv") {
    d = data::load_csv(in_path, schema);
    if (d.d() == model_d + 1) {
      // trailing label column present; ignore it
      d.x = d.x.leftCols(model_d).eval();
    }
  } else if (format == "idx") {
    d = data::load_idx(in_path, "", schema);
  } else if (format == "sparse") {
    schema.dim = sparse_dim > 0 ? sparse_dim : model_d;
    d = data::load_sparse(in_path, schema);
  } else {
    throw io::ConfigError("format", "unknown input format: " + format);
  }

  std::ofstream out(flags.out_path);
  if (!out) throw io::ConfigError("out", "cannot open output: " + flags.out_path);
  if (d.n() == 0) return kExitOk;
  if (d.d() != model_d) {
    throw DimensionMismatch("predict: input has " + std::to_string(d.d()) +
                            " features, model expects " + std::to_string(model_d));
  }
  data::apply_transform(d, ck.transform);

  const Index s = flags.mc_samples.value_or(100);
  math::RandomStream base(flags.seed.value_or(0), 0x9ED);
  out.precision(17);

  const Index chunk = 512;
  const Vector pi = ck.state.posterior.weights();
  for (Index begin = 0; begin < d.n(); begin += chunk) {
    const Index end = std::min(d.n(), begin + chunk);
    Matrix xb = d.x.middleRows(begin, end - begin);
    auto marg = model::conditional_marginals(xb, ck.state);
    for (Index i = 0; i < end - begin; ++i) {
      auto stream_n = base.fork(static_cast<uint64_t>(begin + i));
      auto comp_stream = stream_n.fork(0x10000);
      auto eps_stream = stream_n.fork(0x10001);
      Vector cum = pi;
      for (Index c = 1; c < ck.state.k(); ++c) cum[c] += cum[c - 1];
      Matrix f(s, ck.state.q());
      for (Index si = 0; si < s; ++si) {
        const double u = comp_stream.next_uniform();
        int comp = 0;
        while (comp < ck.state.k() - 1 && u > cum[comp]) ++comp;
        for (Index j = 0; j < ck.state.q(); ++j) {
          f(si, j) = marg.means[comp](i, j) +
                     std::sqrt(marg.vars[comp](i, j)) * eps_stream.next_normal();
        }
      }
      auto summary = ck.state.likelihood.predict(f);
      if (ck.state.likelihood.is_classification()) {
        for (Index c = 0; c < summary.class_probs.size(); ++c) {
          out << summary.class_probs[c] << '\t';
        }
        out << summary.label << '\n';
      } else {
        Vector mean = summary.mean, var = summary.variance;
        if (ck.transform.has_targets) {
          mean = mean.array() * ck.transform.target_scales.array() +
                 ck.transform.target_means.array();
          var = var.array() * ck.transform.target_scales.array().square();
        }
        for (Index p = 0; p < mean.size(); ++p) {
          out << mean[p] << '\t' << var[p] << (p + 1 < mean.size() ? '\t' : '\n');
        }
      }
    }
  }
  return kExitOk;
}

int cmd_gradcheck(const CommonFlags& flags, const std::string& corrupt_group) {
  io::RunConfig cfg = load_config_with_overrides(flags);
  io::LoadedData data = io::load_data(cfg);
  if (data.train.n() > 50 || cfg.num_inducing > 10) {
    throw io::ConfigError("gradcheck",
                          "needs a small instance (N <= 50, M <= 10)");
  }
  model::ModelState state = io::build_initial_state(cfg, data.train);

  // randomize the posterior so every gradient path is exercised
  math::RandomStream rng(cfg.training.seed, 0x6F);
  for (const auto& group : state.group_names()) {
    Vector v = state.get_group(group);
    for (Index i = 0; i < v.size(); ++i) v[i] += 0.2 * rng.next_normal();
    state.set_group(group, v);
  }

  obj::Batch batch;
  batch.x = data.train.x;
  for (Index i = 0; i < data.train.n(); ++i) {
    batch.y.push_back(data.train.observation(i));
    batch.indices.push_back(i);
  }

  auto report = train::run_gradcheck(state, batch, data.train.n(),
                                     cfg.training.mc_samples, cfg.training.seed,
                                     1e-4, 1e-6, corrupt_group);
  for (const auto& g : report.groups) {
    std::cout << (g.pass ? "PASS" : "FAIL") << '\t' << g.objective << '/'
              << g.group << "\tworst_rel_err=" << g.worst_rel_err
              << "\tparams=" << g.params_checked << '\n';
  }
  std::cout << (report.pass ? "gradcheck: all groups pass"
                            : "gradcheck: FAILURES above")
            << std::endl;
  return report.pass ? kExitOk : 1;
}

int cmd_variance_study(const CommonFlags& flags, std::vector<Index> sample_counts,
                       Index redraws) {
  io::RunConfig cfg = load_config_with_overrides(flags);
  io::LoadedData data = io::load_data(cfg);
  model::ModelState state = io::build_initial_state(cfg, data.train);

  const Index b = std::min<Index>(cfg.training.batch_size, data.train.n());
  obj::Batch batch;
  batch.x = data.train.x.topRows(b);
  for (Index i = 0; i < b; ++i) {
    batch.y.push_back(data.train.observation(i));
    batch.indices.push_back(i);
  }

  if (sample_counts.empty()) sample_counts = {10, 100, 1000, 10000};
  auto res = train::run_variance_study(state, batch, data.train.n(),
                                       sample_counts, redraws,
                                       cfg.training.seed, cfg.training.workers);
  const std::string table = res.table();
  if (!flags.out_path.empty()) {
    std::ofstream out(flags.out_path);
    if (!out) throw io::ConfigError("out", "cannot open output: " + flags.out_path);
    out << table;
  } else {
    std::cout << table;
  }
  std::cout << "variance-study: slope_reparam=" << res.slope_reparam
            << " slope_score=" << res.slope_score
            << " min_ratio=" << res.min_ratio
            << " frac_means_within_3se=" << res.frac_means_within_3se
            << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse variational Gaussian process training and inference"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string predict_in, predict_format = "csv", corrupt_group;
  Index sparse_dim = 0, redraws = 1000;
  std::vector<Index> sample_counts;

  auto add_common = [&](CLI::App* sub, bool with_config, bool with_checkpoint) {
    if (with_config) {
      sub->add_option("--config", flags.config_path, "run configuration (JSON)")
          ->required();
    }
    if (with_checkpoint) {
      sub->add_option("--checkpoint", flags.checkpoint_path, "checkpoint path");
    }
    sub->add_option("--seed", flags.seed, "seed override");
    sub->add_option("--workers", flags.workers, "worker threads");
    sub->add_option("--mc-samples", flags.mc_samples, "Monte Carlo samples");
    sub->add_option("--out", flags.out_path, "output path");
  };

  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, true, true);

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
  add_common(eval_cmd, true, true);

  auto* predict_cmd = app.add_subcommand("predict", "per-point predictions");
  add_common(predict_cmd, false, true);
  predict_cmd->add_option("--in", predict_in, "input file")->required();
  predict_cmd->add_option("--format", predict_format, "csv | idx | sparse");
  predict_cmd->add_option("--dim", sparse_dim, "sparse input width");

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference suite");
  add_common(gradcheck_cmd, true, false);
  gradcheck_cmd->add_option("--corrupt-group", corrupt_group,
                            "fault-injection hook (testing)");

  auto* vs_cmd = app.add_subcommand("variance-study",
                                    "gradient-estimator variance comparison");
  add_common(vs_cmd, true, false);
  vs_cmd->add_option("--samples", sample_counts, "sample counts to test");
  vs_cmd->add_option("--redraws", redraws, "redraws per cell");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(flags);
    if (eval_cmd->parsed()) {
      if (flags.checkpoint_path.empty()) {
        throw io::ConfigError("checkpoint", "evaluate needs --checkpoint");
      }
      return cmd_evaluate(flags);
    }
    if (predict_cmd->parsed()) {
      if (flags.checkpoint_path.empty()) {
        throw io::ConfigError("checkpoint", "predict needs --checkpoint");
      }
      if (flags.out_path.empty()) {
        throw io::ConfigError("out", "predict needs --out");
      }
      return cmd_predict(flags, predict_in, predict_format, sparse_dim);
    }
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(flags, corrupt_group);
    if (vs_cmd->parsed()) return cmd_variance_study(flags, sample_counts, redraws);
  } catch (const io::ConfigError& e) {
    error_line(kExitConfig, e.field, e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    error_line(kExitNumerical, "numerical", e.what());
    return kExitNumerical;
  } catch (const NotPositiveDefinite& e) {
    error_line(kExitNumerical, "factorization", e.what());
    return kExitNumerical;
  } catch (const DimensionMismatch& e) {
    error_line(kExitConfig, "shape", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    error_line(kExitConfig, "run", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
