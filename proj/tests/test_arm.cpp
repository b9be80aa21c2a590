#include <doctest.h>

#include "ccv/frame.hpp"
#include "test_util.hpp"

using namespace ccv;
using ccv_test::random_tensor;

namespace {

ArmParamsF random_arm(uint32_t seed) {
  ArmParamsF p;
  p.w1 = random_tensor<float>(12, 12, -0.4, 0.4, seed);
  p.b1 = random_tensor<float>(12, 1, -0.2, 0.2, seed + 1);
  p.w2 = random_tensor<float>(12, 12, -0.4, 0.4, seed + 2);
  p.b2 = random_tensor<float>(12, 1, -0.2, 0.2, seed + 3);
  p.w3 = random_tensor<float>(2, 12, -0.4, 0.4, seed + 4);
  p.b3 = random_tensor<float>(2, 1, -0.2, 0.2, seed + 5);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("arm");

TEST_CASE("parameter count is 338") {
  CHECK(ArmParamsF::parameter_count() == 338);
  ArmParamsF p;
  size_t n = 0;
  for (auto* t : module_tensors(p)) n += t->v.size();
  CHECK(n == 338);
}

TEST_CASE("context at the origin is all zeros") {
  auto plane = random_tensor<float>(6, 6, 1.0, 2.0, 41);
  float ctx[kArmContextSize];
  extract_context(plane, 0, 0, ctx);
  for (float v : ctx) CHECK(v == 0.f);
}

TEST_CASE("context on an all-ones plane is all ones in the interior") {
  Tensor<float> plane(8, 8, 1.f);
  float ctx[kArmContextSize];
  extract_context(plane, 4, 4, ctx);
  for (float v : ctx) CHECK(v == 1.f);
}

TEST_CASE("context on row 0 only sees same-row causal neighbors") {
  // enumerate the pattern: on row 0 the only valid offsets are the
  // same-row entries (0,-1), (0,-2), (0,-3)
  int same_row = 0;
  for (auto [dr, dc] : kArmContextOffsets)
    if (dr == 0) ++same_row;
  CHECK(same_row == 3);

  auto plane = random_tensor<float>(6, 8, 1.0, 2.0, 42);
  float ctx[kArmContextSize];
  extract_context(plane, 0, 5, ctx);
  int populated = 0;
  for (int k = 0; k < kArmContextSize; ++k) {
    const auto [dr, dc] = kArmContextOffsets[k];
    if (dr == 0) {
      CHECK(ctx[k] == plane.at(0, 5 + dc));
      ++populated;
    } else {
      CHECK(ctx[k] == 0.f);
    }
  }
  CHECK(populated == 3);
}

TEST_CASE("every context offset is causal in raster order") {
  for (auto [dr, dc] : kArmContextOffsets) {
    CHECK((dr < 0 || (dr == 0 && dc < 0)));
  }
}

TEST_CASE("zero context with zero weights gives Laplace(0, 1)") {
  ArmParamsF p;  // zero-initialized tensors
  float ctx[kArmContextSize] = {};
  const Laplace d = arm_forward_single(ctx, p);
  CHECK(d.mu == 0.0);
  CHECK(d.b == 1.0);
}

TEST_CASE("log-scale output is clamped at -8") {
  ArmParamsF p;
  p.b3.v[1] = -20.f;
  float ctx[kArmContextSize] = {};
  const Laplace d = arm_forward_single(ctx, p);
  CHECK(d.b == doctest::Approx(std::exp(-8.0)).epsilon(1e-9));
}

TEST_CASE("arm multiplication budget per pixel at 1080p") {
  const double per_pixel =
      static_cast<double>(arm_mac_count(latent_element_count(1080, 1920))) / (1920.0 * 1080.0);
  CHECK(per_pixel >= 405.0);
  CHECK(per_pixel <= 425.0);
}

TEST_CASE("rate_bits closed-form value at mu=0 b=1") {
  const double r = rate_bits(0, Laplace{0.0, 1.0});
  // p = 1 - e^{-1/2} ~= 0.3935, rate ~= 1.346 bits
  CHECK(r == doctest::Approx(1.3457).epsilon(1e-3));
}

TEST_CASE("rate_bits is nonnegative and near zero for a certain symbol") {
  CHECK(rate_bits(0, Laplace{0.0, 1e-6}) >= 0.0);
  CHECK(rate_bits(0, Laplace{0.0, 1e-6}) < 1e-4);
  std::mt19937 gen(43);
  std::uniform_real_distribution<double> mu(-10, 10), lb(-8, 3);
  std::uniform_int_distribution<int> sym(-255, 255);
  for (int i = 0; i < 2000; ++i) {
    const double r = rate_bits(sym(gen), Laplace{mu(gen), std::exp(lb(gen))});
    CHECK(r >= 0.0);
    CHECK(r <= 16.0 + 1e-9);  // floored at 2^-16
  }
}

TEST_CASE("arm forward is deterministic") {
  auto p = random_arm(44);
  float ctx[kArmContextSize];
  for (int k = 0; k < kArmContextSize; ++k) ctx[k] = static_cast<float>(k) - 5.5f;
  const Laplace a = arm_forward_single(ctx, p);
  const Laplace b = arm_forward_single(ctx, p);
  CHECK(a.mu == b.mu);
  CHECK(a.b == b.b);
}

TEST_CASE("batched rate graph agrees with the sequential path") {
  auto p = random_arm(45);
  auto plane = random_tensor<float>(9, 11, -3.0, 3.0, 46);
  for (auto& v : plane.v) v = std::round(v);

  Tape<float> t;
  auto nodes = arm_leaves(t, p);
  int rate_vec = plane_rate_bits(t, t.leaf(plane), nodes);
  const auto& rates = t.value(rate_vec);

  float ctx[kArmContextSize];
  size_t idx = 0;
  for (int r = 0; r < plane.rows; ++r) {
    for (int c = 0; c < plane.cols; ++c, ++idx) {
      extract_context(plane, r, c, ctx);
      const double want = rate_bits(plane.at(r, c), arm_forward_single(ctx, p));
      CHECK(rates.v[idx] == doctest::Approx(want).epsilon(1e-3));
    }
  }
}

TEST_CASE("causality: perturbing an element leaves earlier rates unchanged") {
  auto p = random_arm(47);
  auto plane = random_tensor<float>(8, 8, -2.0, 2.0, 48);
  const int pr = 4, pc = 5;
  const size_t pidx = 4 * 8 + 5;

  auto rates_of = [&](const Tensor<float>& pl) {
    Tape<float> t;
    auto nodes = arm_leaves(t, p);
    return t.value(plane_rate_bits(t, t.leaf(pl), nodes));
  };
  const auto base = rates_of(plane);
  Tensor<float> perturbed = plane;
  perturbed.at(pr, pc) += 50.f;
  const auto after = rates_of(perturbed);

  for (size_t i = 0; i < pidx; ++i) CHECK(after.v[i] == base.v[i]);
  CHECK(after.v[pidx] != base.v[pidx]);
}

TEST_CASE("folded discretized Laplace masses cover the alphabet") {
  // tail folding makes the alphabet exhaustive: sum == 1 up to rounding,
  // and never above 1 + eps
  for (double b : {0.05, 1.0, 13.0}) {
    for (int bound : {4, 64, 255}) {
      const Laplace d{0.7, b};
      double sum = 0.0;
      for (int s = -bound; s <= bound; ++s) {
        double m;
        if (s == -bound)
          m = laplace_cdf(s + 0.5, d.mu, d.b);
        else if (s == bound)
          m = 1.0 - laplace_cdf(s - 0.5, d.mu, d.b);
        else
          m = laplace_cdf(s + 0.5, d.mu, d.b) - laplace_cdf(s - 0.5, d.mu, d.b);
        sum += m;
      }
      CHECK(sum <= 1.0 + 1e-12);
      CHECK(sum >= 1.0 - 1.0 / 4096.0);
    }
  }
}

TEST_CASE("contexts never cross level boundaries") {
  // structural: the rate of each level is built from that level's plane only
  auto p = random_arm(49);
  auto a = random_tensor<float>(6, 6, -2, 2, 50);
  auto rates_of = [&](const Tensor<float>& pl) {
    Tape<float> t;
    auto nodes = arm_leaves(t, p);
    return t.value(plane_rate_bits(t, t.leaf(pl), nodes));
  };
  // same plane rates regardless of any other plane contents: implicit in
  // the signature; check stability across calls
  const auto r1 = rates_of(a);
  const auto r2 = rates_of(a);
  for (size_t i = 0; i < r1.v.size(); ++i) CHECK(r1.v[i] == r2.v[i]);
}

TEST_SUITE_END();
