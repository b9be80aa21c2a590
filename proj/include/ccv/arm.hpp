#pragma once

// Autoregressive probability model: a 12/12/12/2 MLP maps the causal
// neighborhood of each latent element to the location and scale of a
// discretized Laplace distribution. Drives both the training-time rate
// estimate and the range coder.

#include <cmath>
#include <cstdint>

#include "ccv/graph.hpp"

namespace ccv {

inline constexpr int kArmWidth = 12;
inline constexpr int kArmMacsPerElement = 12 * 12 + 12 * 12 + 12 * 2;  // 312

template <typename T>
struct ArmParams {
  Tensor<T> w1{kArmWidth, kArmWidth}, b1{kArmWidth, 1};
  Tensor<T> w2{kArmWidth, kArmWidth}, b2{kArmWidth, 1};
  Tensor<T> w3{2, kArmWidth}, b3{2, 1};

  static constexpr int parameter_count() {
    return kArmWidth * kArmWidth + kArmWidth + kArmWidth * kArmWidth + kArmWidth +
           kArmWidth * 2 + 2;  // 338
  }
};

using ArmParamsF = ArmParams<float>;

struct Laplace {
  double mu = 0.0;
  double b = 1.0;  // > 0
};

// The 12 causal neighbors of (row, col) in the fixed pattern; positions
// outside the plane contribute 0.
template <typename T>
inline void extract_context(const Tensor<T>& plane, int row, int col, T out[kArmContextSize]) {
  for (int k = 0; k < kArmContextSize; ++k) {
    const int r = row + kArmContextOffsets[k].first;
    const int c = col + kArmContextOffsets[k].second;
    out[k] = (r >= 0 && r < plane.rows && c >= 0 && c < plane.cols) ? plane.at(r, c) : T(0);
  }
}

// Single-element forward pass. mu is the raw first output; the scale is
// exp of the second output clamped to [-8, 8]. Float arithmetic in the
// same accumulation order as the batched tape path.
inline Laplace arm_forward_single(const float ctx[kArmContextSize], const ArmParamsF& p,
                                  MacBreakdown* macs = nullptr) {
  float h1[kArmWidth], h2[kArmWidth];
  for (int o = 0; o < kArmWidth; ++o) {
    float acc = p.b1.v[o];
    const float* w = &p.w1.v[static_cast<size_t>(o) * kArmWidth];
    for (int i = 0; i < kArmContextSize; ++i) acc += ctx[i] * w[i];
    h1[o] = acc > 0.f ? acc : 0.f;
  }
  for (int o = 0; o < kArmWidth; ++o) {
    float acc = p.b2.v[o];
    const float* w = &p.w2.v[static_cast<size_t>(o) * kArmWidth];
    for (int i = 0; i < kArmWidth; ++i) acc += h1[i] * w[i];
    h2[o] = acc > 0.f ? acc : 0.f;
  }
  float out[2];
  for (int o = 0; o < 2; ++o) {
    float acc = p.b3.v[o];
    const float* w = &p.w3.v[static_cast<size_t>(o) * kArmWidth];
    for (int i = 0; i < kArmWidth; ++i) acc += h2[i] * w[i];
    out[o] = acc;
  }
  if (macs) macs->arm += kArmMacsPerElement;
  float lb = out[1];
  if (lb < -static_cast<float>(kLogScaleClamp)) lb = -static_cast<float>(kLogScaleClamp);
  if (lb > static_cast<float>(kLogScaleClamp)) lb = static_cast<float>(kLogScaleClamp);
  return Laplace{static_cast<double>(out[0]), std::exp(static_cast<double>(lb))};
}

// -log2 of the discretized Laplace probability of an integer symbol,
// floored at 2^-16. Never negative.
inline double rate_bits(double symbol, const Laplace& d) {
  const double p = laplace_cdf(symbol + 0.5, d.mu, d.b) - laplace_cdf(symbol - 0.5, d.mu, d.b);
  const double pf = p > kRateProbFloor ? p : kRateProbFloor;
  return -std::log2(pf);
}

template <typename T>
struct ArmParamNodes {
  int w1, b1, w2, b2, w3, b3;
};

template <typename T>
inline ArmParamNodes<T> arm_leaves(Tape<T>& tape, const ArmParams<T>& p) {
  return {tape.leaf(p.w1), tape.leaf(p.b1), tape.leaf(p.w2), tape.leaf(p.b2),
          tape.leaf(p.w3), tape.leaf(p.b3)};
}

// Rate of one latent plane in bits, as a differentiable [N x 1] node vector.
// Contexts are gathered from the plane itself, so gradients flow into the
// coded values both directly and through the neighborhoods they condition.
template <typename T>
inline int plane_rate_bits(Tape<T>& tape, int values, const ArmParamNodes<T>& p) {
  const auto& plane = tape.value(values);
  const int h = plane.rows, w = plane.cols;
  int ctx = tape.gather_contexts(values);
  int a1 = tape.relu(tape.linear(ctx, p.w1, p.b1));
  int a2 = tape.relu(tape.linear(a1, p.w2, p.b2));
  int out = tape.linear(a2, p.w3, p.b3);
  int mu = tape.col(out, 0, h * w, 1);
  int raw = tape.col(out, 1, h * w, 1);
  return tape.laplace_rate(mu, raw, values);
}

// Total ARM multiplications for a frame: 312 per latent element.
inline uint64_t arm_mac_count(uint64_t n_elements) {
  return static_cast<uint64_t>(kArmMacsPerElement) * n_elements;
}

}  // namespace ccv
