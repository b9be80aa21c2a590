#include <doctest.h>

#include "ccv/latent.hpp"
#include "test_util.hpp"

using namespace ccv;
using ccv_test::random_tensor;

TEST_SUITE_BEGIN("latent");

TEST_CASE("pyramid has 7 dyadic levels down to 1/64 resolution") {
  auto s = pyramid_shapes(1080, 1920);
  CHECK(s[0].h == 1080);
  CHECK(s[0].w == 1920);
  CHECK(s[1].h == 540);
  CHECK(s[6].h == 17);  // ceil(1080/64)
  CHECK(s[6].w == 30);
  auto s2 = pyramid_shapes(96, 96);
  CHECK(s2[5].h == 3);
  CHECK(s2[6].h == 2);  // ceil(96/64)
  auto p = PyramidF::zeros(48, 48);
  CHECK(p.level[6].rows == 1);
  CHECK(p.level[6].cols == 1);
}

TEST_CASE("hard rounding and clamping") {
  Tensor<float> plane = Tensor<float>::from(1, 4, {2.4f, -1.6f, 300.f, -400.f});
  Tensor<float> out;
  const int clamped = hard_symbols(plane, out);
  CHECK(out.v[0] == 2.f);
  CHECK(out.v[1] == -2.f);
  CHECK(out.v[2] == 255.f);
  CHECK(out.v[3] == -255.f);
  CHECK(clamped == 2);
}

TEST_CASE("ste proxy rounds forward with identity gradient") {
  Tape<float> t;
  int x = t.leaf(Tensor<float>::from(1, 2, {1.7f, -0.4f}));
  std::mt19937 rng(1);
  int y = quantize_proxy(t, x, QuantMode::kSte, rng);
  CHECK(t.value(y).v[0] == 2.f);
  CHECK(t.value(y).v[1] == -0.f);
  t.backward(t.sum(y));
  CHECK(t.grad(x).v[0] == 1.f);
  CHECK(t.grad(x).v[1] == 1.f);
}

TEST_CASE("noise proxy stays within half a step and is centered") {
  Tape<float> t;
  Tensor<float> plane(100, 1000, 3.25f);
  int x = t.leaf(plane);
  std::mt19937 rng(7);
  int y = quantize_proxy(t, x, QuantMode::kNoise, rng);
  const auto& out = t.value(y);
  double mean_err = 0.0;
  for (size_t i = 0; i < out.v.size(); ++i) {
    const double e = out.v[i] - 3.25;
    CHECK(std::abs(e) <= 0.5);
    mean_err += e;
  }
  mean_err /= static_cast<double>(out.v.size());  // 1e5 draws
  CHECK(std::abs(mean_err) < 5e-3);
}

TEST_CASE("upsample level 0 passes through unchanged") {
  auto plane = random_tensor<float>(24, 16, -2, 2, 31);
  Tape<float> t;
  int kernel = t.leaf(bicubic_init_kernel());
  int up = upsample_level(t, t.leaf(plane), 0, kernel, 24, 16);
  const auto& out = t.value(up);
  for (size_t i = 0; i < plane.v.size(); ++i) CHECK(out.v[i] == plane.v[i]);
}

TEST_CASE("all-zero pyramid upsamples to an all-zero dense grid") {
  auto p = PyramidF::zeros(32, 16);
  Tape<float> t;
  int kernel = t.leaf(bicubic_init_kernel());
  for (int i = 0; i < kLatentLevels; ++i) {
    int up = upsample_level(t, t.leaf(p.level[i]), i, kernel, 32, 16);
    const auto& out = t.value(up);
    CHECK(out.rows == 32);
    CHECK(out.cols == 16);
    for (float v : out.v) CHECK(v == 0.f);
  }
}

TEST_CASE("upsampling is linear in the pyramid values") {
  const int h = 16, w = 16;
  auto a = random_tensor<float>(4, 4, -1, 1, 32);  // level 2
  auto b = random_tensor<float>(4, 4, -1, 1, 33);
  Tensor<float> mix(4, 4);
  const float ca = 0.7f, cb = -1.3f;
  for (size_t i = 0; i < mix.v.size(); ++i) mix.v[i] = ca * a.v[i] + cb * b.v[i];
  Tape<float> t;
  int kernel = t.leaf(bicubic_init_kernel());
  const auto ua = t.value(upsample_level(t, t.leaf(a), 2, kernel, h, w));
  const auto ub = t.value(upsample_level(t, t.leaf(b), 2, kernel, h, w));
  const auto um = t.value(upsample_level(t, t.leaf(mix), 2, kernel, h, w));
  for (size_t i = 0; i < um.v.size(); ++i)
    CHECK(um.v[i] == doctest::Approx(ca * ua.v[i] + cb * ub.v[i]).epsilon(1e-4));
}

TEST_CASE("upsample multiplication budget at 1080p") {
  const double per_pixel =
      static_cast<double>(upsample_mac_count(1080, 1920)) / (1920.0 * 1080.0);
  CHECK(per_pixel >= 120.0);
  CHECK(per_pixel <= 135.0);
}

TEST_CASE("latent element count is about 4/3 of the pixel count") {
  const uint64_t n = latent_element_count(1080, 1920);
  uint64_t want = 0;
  for (int i = 0; i < kLatentLevels; ++i)
    want += static_cast<uint64_t>(ceil_div(1080, 1 << i)) * ceil_div(1920, 1 << i);
  CHECK(n == want);
  const double ratio = static_cast<double>(n) / (1920.0 * 1080.0);
  CHECK(ratio > 1.33);
  CHECK(ratio < 1.34);
}

TEST_CASE("bicubic init kernel preserves constants per phase") {
  auto k = bicubic_init_kernel();
  // each of the four stride-2 phases of the 2-D kernel sums to 1
  for (int pr = 0; pr < 2; ++pr) {
    for (int pc = 0; pc < 2; ++pc) {
      double s = 0.0;
      for (int r = pr; r < 8; r += 2)
        for (int c = pc; c < 8; c += 2) s += k.at(r, c);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_SUITE_END();
