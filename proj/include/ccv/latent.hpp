#pragma once

// Hierarchical latent representation: 7 two-dimensional planes at dyadic
// resolutions, from full frame size down to 1/64 in each dimension. The
// planes are real-valued during training and integer symbols once coded.

#include <array>
#include <cstdint>
#include <random>

#include "ccv/graph.hpp"

namespace ccv {

inline constexpr int kLatentLevels = 7;
inline constexpr int kSymbolBound = 255;  // quantized symbols live in [-255, 255]
inline constexpr int kUpsampleKernelSize = 8;

struct LevelShape {
  int h = 0;
  int w = 0;
};

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

inline std::array<LevelShape, kLatentLevels> pyramid_shapes(int height, int width) {
  std::array<LevelShape, kLatentLevels> s;
  for (int i = 0; i < kLatentLevels; ++i)
    s[i] = {ceil_div(height, 1 << i), ceil_div(width, 1 << i)};
  return s;
}

template <typename T>
struct Pyramid {
  std::array<Tensor<T>, kLatentLevels> level;

  static Pyramid zeros(int height, int width) {
    Pyramid p;
    const auto shapes = pyramid_shapes(height, width);
    for (int i = 0; i < kLatentLevels; ++i)
      p.level[i] = Tensor<T>(shapes[i].h, shapes[i].w, T(0));
    return p;
  }
};

using PyramidF = Pyramid<float>;

enum class QuantMode : uint8_t { kNoise, kSte, kHard };

// Rounds a trained plane to integer symbols; values outside [-255, 255] are
// clamped. Returns the number of clamped elements so callers can warn.
template <typename T>
inline int hard_symbols(const Tensor<T>& plane, Tensor<float>& out) {
  out = Tensor<float>(plane.rows, plane.cols);
  int clamped = 0;
  for (size_t i = 0; i < plane.v.size(); ++i) {
    double s = std::round(static_cast<double>(plane.v[i]));
    if (s > kSymbolBound) { s = kSymbolBound; ++clamped; }
    if (s < -kSymbolBound) { s = -kSymbolBound; ++clamped; }
    out.v[i] = static_cast<float>(s);
  }
  return clamped;
}

// Training-time quantization proxy for one latent plane, recorded on the
// tape. kNoise adds fresh Uniform(-0.5, 0.5) per element (identity
// gradient), kSte rounds forward with a straight-through gradient, kHard
// rounds with no gradient path.
template <typename T, typename Rng>
inline int quantize_proxy(Tape<T>& tape, int plane, QuantMode mode, Rng& rng) {
  switch (mode) {
    case QuantMode::kNoise: {
      const auto& p = tape.value(plane);
      Tensor<T> noise(p.rows, p.cols);
      for (auto& x : noise.v)
        x = static_cast<T>(static_cast<double>(rng()) / 4294967296.0 - 0.5);
      return tape.add(plane, tape.leaf(std::move(noise)));
    }
    case QuantMode::kSte:
      return tape.ste_round(plane);
    case QuantMode::kHard: {
      Tensor<T> r = tape.value(plane);
      for (auto& x : r.v) x = std::round(x);
      return tape.leaf(std::move(r));
    }
  }
  throw std::invalid_argument("quantize_proxy: bad mode");
}

// Upsamples level `index` to full resolution by repeated stride-2 transposed
// convolution with the shared 8x8 kernel, cropping to the exact dyadic shape
// after each doubling. Level 0 passes through unchanged.
template <typename T>
inline int upsample_level(Tape<T>& tape, int plane, int index, int kernel, int height, int width) {
  const auto shapes = pyramid_shapes(height, width);
  int cur = plane;
  for (int j = index - 1; j >= 0; --j) {
    cur = tape.tconv_up2(cur, kernel);
    cur = tape.crop(cur, shapes[j].h, shapes[j].w);
  }
  return cur;
}

// Fixed separable kernel the per-frame optimization starts from: a
// Catmull-Rom interpolator sampled at half-pel offsets, normalized so each
// of the four stride-2 phases sums to 1 (constants are preserved exactly).
inline Tensor<float> bicubic_init_kernel() {
  auto cubic = [](double x) {
    x = std::abs(x);
    if (x <= 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
    if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
    return 0.0;
  };
  std::array<double, kUpsampleKernelSize> t;
  for (int i = 0; i < kUpsampleKernelSize; ++i) t[i] = cubic((i - 3.5) / 2.0);
  // per-phase normalization of the 1-D tap vector
  for (int phase = 0; phase < 2; ++phase) {
    double s = 0.0;
    for (int i = phase; i < kUpsampleKernelSize; i += 2) s += t[i];
    for (int i = phase; i < kUpsampleKernelSize; i += 2) t[i] /= s;
  }
  Tensor<float> k(kUpsampleKernelSize, kUpsampleKernelSize);
  for (int r = 0; r < kUpsampleKernelSize; ++r)
    for (int c = 0; c < kUpsampleKernelSize; ++c)
      k.at(r, c) = static_cast<float>(t[r] * t[c]);
  return k;
}

// Total latent element count across the pyramid (~ 4/3 * H * W).
inline uint64_t latent_element_count(int height, int width) {
  uint64_t n = 0;
  for (const auto& s : pyramid_shapes(height, width))
    n += static_cast<uint64_t>(s.h) * s.w;
  return n;
}

// Exact multiplication count of the full upsampling pass: each transposed
// convolution computes a 2h x 2w output at 16 taps per sample before the
// crop to the next dyadic shape.
inline uint64_t upsample_mac_count(int height, int width) {
  const auto shapes = pyramid_shapes(height, width);
  uint64_t n = 0;
  for (int i = 1; i < kLatentLevels; ++i)
    for (int j = i - 1; j >= 0; --j)
      n += 16ull * (2 * shapes[j + 1].h) * (2 * shapes[j + 1].w);
  return n;
}

}  // namespace ccv
