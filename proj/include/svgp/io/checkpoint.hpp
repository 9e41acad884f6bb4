#pragma once

#include <string>

#include "svgp/data/dataset.hpp"
#include "svgp/model/state.hpp"
#include "svgp/train/trainer.hpp"

namespace svgp::io {

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to resume a run bit-exactly: the model in
/// unconstrained parameter space, optimizer accumulators, progress
/// counters, the stream state and the data transform.
struct Checkpoint {
  int format_version = kCheckpointVersion;
  std::string config_json;  // RunConfig echo
  model::ModelState state;
  data::Transform transform;
  train::RmsPropState optimizer;
  train::TrainProgress progress;
  std::uint64_t stream_seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t stream_counter = 0;

  std::string to_json() const;
  static Checkpoint from_json(const std::string& text);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace svgp::io
