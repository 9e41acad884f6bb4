#pragma once

#include <functional>
#include <string>
#include <vector>

#include "svgp/data/dataset.hpp"
#include "svgp/model/state.hpp"
#include "svgp/objectives/objectives.hpp"
#include "svgp/train/rmsprop.hpp"

namespace svgp::train {

enum class TrainMode { ElboOnly, Alternating };
TrainMode mode_from_string(const std::string& s);
std::string mode_to_string(TrainMode m);

struct TrainSchedule {
  TrainMode mode = TrainMode::ElboOnly;
  double learning_rate = 0.003;
  Index batch_size = 1000;       // capped at N
  Index mc_samples = 100;
  long epochs_per_phase = 100;
  long max_outer_rounds = 1;
  long eval_every = 10;          // epochs between metric rows; 0 = end only
  double convergence_tol = 1e-4; // relative change of the phase-mean objective
  std::uint64_t seed = 0;
  int workers = 1;
  bool loo_update_inducing = false;
};

struct Metrics {
  long epoch = 0;
  double wall_time_s = 0.0;
  double objective = 0.0;
  double error_rate = std::numeric_limits<double>::quiet_NaN();
  double mean_nlp = std::numeric_limits<double>::quiet_NaN();
  double msse = std::numeric_limits<double>::quiet_NaN();

  std::string line() const;  // tab-separated log row
  static std::string header();
};

/// One entry per completed phase, for the alternating-mode bookkeeping.
struct PhaseLogEntry {
  long outer_round = 0;
  char phase = 'E';  // 'E' = ELBO updates, 'L' = LOO updates
  double mean_objective = 0.0;
};

/// Counters that make interrupted training resumable and bit-exact.
struct TrainProgress {
  long next_epoch = 0;    // global epoch number
  long global_step = 0;   // optimizer steps taken
  long outer_round = 0;
  int phase_index = 0;    // 0 = ELBO phase, 1 = LOO phase
  long epoch_in_phase = 0;
};

struct TrainResult {
  model::ModelState state;
  RmsPropState optimizer;
  TrainProgress progress;
  std::vector<Metrics> history;
  std::vector<PhaseLogEntry> phases;
  bool aborted = false;
  std::string abort_reason;
  long loo_clamp_events = 0;
};

struct TrainHooks {
  std::function<void(const TrainResult&)> on_phase_end;
  std::function<void(const Metrics&)> on_metrics;
};

/// Runs the configured schedule: elbo_only updates (lambda, theta, Z,
/// likelihood) every step; alternating mode interleaves an ELBO phase
/// with a LOO phase that updates the hyperparameters only. Returns the
/// final state plus metric history. Objective failures abort, retaining
/// the last state reached.
TrainResult train(const data::Dataset& train_data,
                  const data::Dataset* test_data, model::ModelState state,
                  const TrainSchedule& schedule, const TrainHooks& hooks = {},
                  RmsPropState optimizer = {}, TrainProgress progress = {});

/// Test-set metrics via Monte Carlo prediction.
Metrics evaluate(const model::ModelState& state, const data::Dataset& test,
                 const obj::McConfig& mc, int workers = 1);

/// Median-distance lengthscale heuristic used for kernel initialization
/// when the configuration does not pin one.
double median_sq_distance(const Matrix& x, math::RandomStream stream);

}  // namespace svgp::train
