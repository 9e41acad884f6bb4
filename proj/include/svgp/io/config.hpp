#pragma once

#include <optional>
#include <string>

#include "svgp/data/dataset.hpp"
#include "svgp/data/synth.hpp"
#include "svgp/model/state.hpp"
#include "svgp/train/trainer.hpp"

namespace svgp::io {

/// A configuration problem: bad field, missing file, inconsistent shapes.
/// Carries the offending field for machine-parsable error lines.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(message), field(std::move(field)) {}
  std::string field;
};

struct KernelConfig {
  std::string kind = "rbf_ard";
  int degree = 1;
  int depth = 3;
  double log_variance = 0.0;
  std::optional<double> log_lengthscale;  // median heuristic when unset
};

struct LikelihoodConfig {
  std::string kind = "gaussian";
  Index outputs = 1;
  Index classes = 2;
  Index node_functions = 1;
  double log_noise = std::log(0.1);
};

struct DatasetConfig {
  std::string format = "csv";  // csv | idx | sparse | synthetic
  std::string train_path, test_path;
  std::string train_images, train_labels, test_images, test_labels;
  data::Schema schema;
  std::string normalize = "none";
  std::optional<double> test_fraction;  // split when no test file given
  data::SynthSpec synth;                // format == synthetic
  std::optional<double> synth_test_fraction;
};

struct RunConfig {
  DatasetConfig dataset;
  KernelConfig kernel;
  LikelihoodConfig likelihood;
  Index num_inducing = 100;
  Index mixture_components = 1;
  bool shared_inducing = true;
  train::TrainSchedule training;
  std::string checkpoint_path = "checkpoint.json";
  std::string metrics_path = "metrics.tsv";

  std::string raw_json;  // the parsed document, echoed into checkpoints
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);

struct LoadedData {
  data::Dataset train;
  std::optional<data::Dataset> test;
};

/// Loads (or synthesizes) the configured datasets, applies normalization
/// to the training set and its transform to the test set.
LoadedData load_data(const RunConfig& cfg);

/// Builds the initial model for a dataset: k-means inducing points, zero
/// posterior means, identity factors, heuristic lengthscales when the
/// config leaves them unset.
model::ModelState build_initial_state(const RunConfig& cfg,
                                      const data::Dataset& train);

}  // namespace svgp::io
