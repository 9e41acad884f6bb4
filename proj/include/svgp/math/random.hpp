#pragma once

#include <cstdint>
#include <vector>

#include "svgp/common.hpp"

namespace svgp::math {

/// Counter-based splittable random stream. A stream is a value: copies
/// advance independently, and fork(i) derives a statistically independent
/// child stream, so parallel workers can replay identical draws from
/// (seed, stream_id, counter) alone.
class RandomStream {
 public:
  RandomStream() = default;
  RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0,
               std::uint64_t counter = 0);

  /// Independent child stream; deterministic in (this stream, i).
  RandomStream fork(std::uint64_t i) const;

  std::uint64_t next_u64();
  double next_uniform();  // (0, 1]
  double next_normal();   // N(0, 1), Box-Muller

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t key_ = 0;   // mixed from (seed, stream_id)
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// n i.i.d. standard-normal draws, advancing the stream in place.
Vector draw_standard_normals(RandomStream& stream, Index n);

}  // namespace svgp::math
