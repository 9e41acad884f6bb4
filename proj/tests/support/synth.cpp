#include "support/synth.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace synth {

namespace {

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

using Point = std::pair<double, double>;
using Stroke = std::vector<Point>;

// digit shapes as polylines on a [0,1]^2 canvas, y growing downward
std::vector<Stroke> digit_strokes(int digit) {
  auto arc = [](double cx, double cy, double rx, double ry, double a0,
                double a1, int steps = 12) {
    Stroke s;
    for (int i = 0; i <= steps; ++i) {
      const double a = a0 + (a1 - a0) * i / steps;
      s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
    return s;
  };
  const double pi = 3.14159265358979;
  switch (digit) {
    case 0: return {arc(0.5, 0.5, 0.28, 0.38, 0, 2 * pi, 24)};
    case 1: return {{{0.35, 0.3}, {0.55, 0.12}, {0.55, 0.88}}};
    case 2:
      return {arc(0.5, 0.3, 0.25, 0.18, -pi, 0.25 * pi, 14),
              {{0.68, 0.44}, {0.3, 0.85}, {0.72, 0.85}}};
    case 3:
      return {arc(0.45, 0.3, 0.24, 0.18, -0.75 * pi, 0.5 * pi, 14),
              arc(0.45, 0.68, 0.26, 0.2, -0.5 * pi, 0.75 * pi, 14)};
    case 4: return {{{0.62, 0.88}, {0.62, 0.12}, {0.25, 0.62}, {0.78, 0.62}}};
    case 5:
      return {{{0.68, 0.14}, {0.34, 0.14}, {0.32, 0.48}},
              arc(0.48, 0.65, 0.24, 0.21, -0.55 * pi, 0.75 * pi, 16)};
    case 6:
      return {{{0.62, 0.12}, {0.38, 0.45}},
              arc(0.5, 0.65, 0.2, 0.21, -pi, pi, 20)};
    case 7: return {{{0.28, 0.14}, {0.72, 0.14}, {0.42, 0.88}}};
    case 8:
      return {arc(0.5, 0.3, 0.19, 0.17, 0, 2 * pi, 18),
              arc(0.5, 0.68, 0.23, 0.21, 0, 2 * pi, 18)};
    case 9:
      return {arc(0.5, 0.33, 0.2, 0.2, 0, 2 * pi, 18),
              {{0.7, 0.36}, {0.62, 0.88}}};
    default:
      throw std::invalid_argument("digit_strokes: digit out of range");
  }
}

}  // namespace

void write_idx_pair(const Matrix& images, const std::vector<int>& labels,
                    Index rows, Index cols, const std::string& images_path,
                    const std::string& labels_path) {
  const Index n = images.rows();
  if (images.cols() != rows * cols) {
    throw std::invalid_argument("write_idx_pair: pixel count mismatch");
  }
  std::ofstream img(images_path, std::ios::binary);
  write_be32(img, 0x00000803);
  write_be32(img, static_cast<std::uint32_t>(n));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < rows * cols; ++j) {
      const double v = std::min(1.0, std::max(0.0, images(i, j)));
      img.put(static_cast<char>(std::lround(v * 255.0)));
    }
  }
  std::ofstream lab(labels_path, std::ios::binary);
  write_be32(lab, 0x00000801);
  write_be32(lab, static_cast<std::uint32_t>(n));
  for (int l : labels) lab.put(static_cast<char>(l));
}

GlyphData render_glyphs(const GlyphSpec& spec) {
  svgp::math::RandomStream rng(spec.seed, 0x61F);
  const Index side = 28;
  GlyphData out;
  out.images = Matrix::Zero(spec.n, side * side);
  out.labels.resize(spec.n);

  for (Index img = 0; img < spec.n; ++img) {
    const int digit = static_cast<int>(rng.next_u64() % spec.classes);
    out.labels[img] = digit;

    const double angle = (rng.next_uniform() - 0.5) * 0.5;  // +- ~14 deg
    const double scale = 0.85 + 0.3 * rng.next_uniform();
    const double dx = (rng.next_uniform() - 0.5) * 0.18;
    const double dy = (rng.next_uniform() - 0.5) * 0.18;
    const double width = 0.035 + 0.02 * rng.next_uniform();
    const double ca = std::cos(angle), sa = std::sin(angle);

    auto transform = [&](Point p) {
      const double x = (p.first - 0.5) * scale;
      const double y = (p.second - 0.5) * scale;
      return Point{0.5 + ca * x - sa * y + dx, 0.5 + sa * x + ca * y + dy};
    };

    // splat Gaussian ink along each stroke
    for (const auto& stroke : digit_strokes(digit)) {
      for (size_t s = 0; s + 1 < stroke.size(); ++s) {
        const Point a = transform(stroke[s]);
        const Point b = transform(stroke[s + 1]);
        const double len = std::hypot(b.first - a.first, b.second - a.second);
        const int steps = std::max(2, static_cast<int>(len * 2.0 * side));
        for (int t = 0; t <= steps; ++t) {
          const double u = static_cast<double>(t) / steps;
          const double px = (a.first + u * (b.first - a.first)) * side;
          const double py = (a.second + u * (b.second - a.second)) * side;
          const double w = width * side;
          const int x0 = std::max(0, static_cast<int>(px - 3 * w));
          const int x1 = std::min<int>(side - 1, static_cast<int>(px + 3 * w));
          const int y0 = std::max(0, static_cast<int>(py - 3 * w));
          const int y1 = std::min<int>(side - 1, static_cast<int>(py + 3 * w));
          for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
              const double d2 = (x + 0.5 - px) * (x + 0.5 - px) +
                                (y + 0.5 - py) * (y + 0.5 - py);
              const double ink = std::exp(-d2 / (2.0 * w * w));
              double& px_val = out.images(img, y * side + x);
              px_val = std::max(px_val, ink);
            }
          }
        }
      }
    }

    for (Index j = 0; j < side * side; ++j) {
      double v = out.images(img, j) + spec.noise * rng.next_normal();
      out.images(img, j) = std::min(1.0, std::max(0.0, v));
    }
  }
  return out;
}

std::array<std::string, 4> make_glyph_idx_files(const std::string& dir,
                                                Index n_train, Index n_test,
                                                Index classes, double noise,
                                                std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  GlyphSpec spec;
  spec.n = n_train + n_test;
  spec.classes = classes;
  spec.noise = noise;
  spec.seed = seed;
  GlyphData all = render_glyphs(spec);

  std::array<std::string, 4> paths = {
      dir + "/train-images.idx", dir + "/train-labels.idx",
      dir + "/test-images.idx", dir + "/test-labels.idx"};
  write_idx_pair(all.images.topRows(n_train),
                 {all.labels.begin(), all.labels.begin() + n_train}, 28, 28,
                 paths[0], paths[1]);
  write_idx_pair(all.images.bottomRows(n_test),
                 {all.labels.begin() + n_train, all.labels.end()}, 28, 28,
                 paths[2], paths[3]);
  return paths;
}

}  // namespace synth
