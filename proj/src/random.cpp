#include "svgp/math/random.hpp"

#include <cmath>
#include <numbers>

namespace svgp::math {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id,
                           std::uint64_t counter)
    : seed_(seed), stream_id_(stream_id), counter_(counter) {
  key_ = mix64(seed_ + kGolden) ^ mix64(stream_id_ * 0xD1B54A32D192ED03ULL + 1);
}

RandomStream RandomStream::fork(std::uint64_t i) const {
  return RandomStream(seed_, mix64(stream_id_ + kGolden * (i + 1)));
}

std::uint64_t RandomStream::next_u64() {
  return mix64(key_ + kGolden * ++counter_);
}

double RandomStream::next_uniform() {
  // 53-bit mantissa in (0, 1]; never returns 0 so log() is safe.
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RandomStream::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

Vector draw_standard_normals(RandomStream& stream, Index n) {
  if (n < 0) throw std::invalid_argument("draw_standard_normals: n < 0");
  Vector out(n);
  for (Index i = 0; i < n; ++i) out[i] = stream.next_normal();
  return out;
}

}  // namespace svgp::math
