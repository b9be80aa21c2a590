#include <doctest.h>

#include "ccv/frame.hpp"
#include "test_util.hpp"

using namespace ccv;
using ccv_test::random_tensor;

namespace {

RefPlanes<float> random_ref(int h, int w, uint32_t seed) {
  return {random_tensor<float>(h, w, 0.0, 1.0, seed),
          random_tensor<float>(h / 2, w / 2, 0.0, 1.0, seed + 1),
          random_tensor<float>(h / 2, w / 2, 0.0, 1.0, seed + 2)};
}

struct ReconFixture {
  Tape<float> tape;
  ReconNodes rec;
};

// zero latents and zero synthesis; only the frame-type wiring remains
ReconNodes zero_synthesis_recon(Tape<float>& t, FrameType type, const RefPlanes<float>* r1,
                                const RefPlanes<float>* r2, int h, int w) {
  const ChannelLayout lay = make_layout(type, false, false);
  SynthesisParams<float> sp(lay.x);
  std::vector<int> proxies;
  const auto shapes = pyramid_shapes(h, w);
  for (int i = 0; i < kLatentLevels; ++i)
    proxies.push_back(t.leaf(Tensor<float>(shapes[i].h, shapes[i].w, 0.f)));
  int kernel = t.leaf(bicubic_init_kernel());
  auto sn = synthesis_leaves(t, sp);
  std::optional<RefNodes<float>> n1, n2;
  if (r1) n1 = RefNodes<float>{t.leaf(r1->y), t.leaf(r1->u), t.leaf(r1->v)};
  if (r2) n2 = RefNodes<float>{t.leaf(r2->y), t.leaf(r2->u), t.leaf(r2->v)};
  return build_reconstruction(t, proxies, kernel, sn, lay, type, n1, n2, h, w);
}

}  // namespace

TEST_SUITE_BEGIN("frame");

TEST_CASE("channel layouts per frame type and ablation") {
  auto b = make_layout(FrameType::kBidir, false, false);
  CHECK(b.x == 9);
  CHECK(b.v1x == 0);
  CHECK(b.v1y == 1);
  CHECK(b.v2x == 2);
  CHECK(b.v2y == 3);
  CHECK(b.ry == 4);
  CHECK(b.ru == 5);
  CHECK(b.rv == 6);
  CHECK(b.alpha == 7);
  CHECK(b.beta == 8);

  CHECK(make_layout(FrameType::kPred, false, false).x == 6);
  CHECK(make_layout(FrameType::kIntra, false, false).x == 3);
  CHECK(make_layout(FrameType::kBidir, true, false).x == 8);   // no alpha channel
  CHECK(make_layout(FrameType::kBidir, false, true).x == 8);   // no beta channel
  CHECK(make_layout(FrameType::kBidir, true, true).x == 7);
  CHECK(make_layout(FrameType::kPred, true, false).x == 5);
  CHECK(make_layout(FrameType::kPred, false, true).x == 6);    // beta unused for P
  CHECK(make_layout(FrameType::kIntra, true, true).x == 3);
}

TEST_CASE("synthesis parameter counts") {
  CHECK(SynthesisParams<float>(9).parameter_count() == 405);
  CHECK(SynthesisParams<float>(6).parameter_count() == 300);
  CHECK(SynthesisParams<float>(3).parameter_count() == 213);
  CHECK(SynthesisParams<float>(9).macs_per_pixel() == 369);
  CHECK(SynthesisParams<float>(3).macs_per_pixel() == 7 * 18 + 18 * 3 + 3 * 3);  // 189
}

TEST_CASE("decoder parameter census") {
  DecoderParamsF p(9);
  CHECK(p.parameter_count() == 807);
  CHECK(ArmParamsF::parameter_count() == 338);
  CHECK(p.up_kernel.v.size() == 64);
  CHECK(p.synth.parameter_count() == 405);
}

TEST_CASE("zero network synthesis yields neutral signals") {
  const int h = 16, w = 16;
  Tape<float> t;
  const ChannelLayout lay = make_layout(FrameType::kBidir, false, false);
  SynthesisParams<float> sp(lay.x);
  std::vector<int> dense;
  for (int i = 0; i < kLatentLevels; ++i) dense.push_back(t.leaf(Tensor<float>(h, w, 0.f)));
  auto sn = synthesis_leaves(t, sp);
  auto out = build_synthesis(t, dense, sn, lay, h, w);
  for (float v : t.value(out.v1x).v) CHECK(v == 0.f);
  for (float v : t.value(out.v2y).v) CHECK(v == 0.f);
  for (float v : t.value(out.ry).v) CHECK(v == 0.f);
  for (float v : t.value(out.alpha).v) CHECK(v == 0.5f);
  for (float v : t.value(out.beta).v) CHECK(v == 0.5f);
}

TEST_CASE("prediction blend: full weight on the first reference") {
  const int h = 6, w = 6;
  Tape<float> t;
  auto w1 = random_tensor<float>(h, w, 0.0, 1.0, 61);
  auto w2 = random_tensor<float>(h, w, 0.0, 1.0, 62);
  int beta = t.leaf(Tensor<float>(h, w, 1.f));
  int pred = blend_prediction(t, t.leaf(w1), t.leaf(w2), beta);
  const auto& out = t.value(pred);
  for (size_t i = 0; i < out.v.size(); ++i)
    CHECK(out.v[i] == doctest::Approx(w1.v[i]).epsilon(1e-6));
}

TEST_CASE("prediction blend: equal weights average the references") {
  const int h = 4, w = 8;
  Tape<float> t;
  auto a = random_tensor<float>(h, w, 0.0, 1.0, 63);
  auto b = random_tensor<float>(h, w, 0.0, 1.0, 64);
  int beta = t.leaf(Tensor<float>(h, w, 0.5f));
  int pred = blend_prediction(t, t.leaf(a), t.leaf(b), beta);
  const auto& out = t.value(pred);
  for (size_t i = 0; i < out.v.size(); ++i)
    CHECK(out.v[i] == doctest::Approx(0.5 * (a.v[i] + b.v[i])).epsilon(1e-6));
}

TEST_CASE("shifted reference with compensating flow recovers the first reference") {
  const int h = 6, w = 10;
  auto ref1 = random_tensor<float>(h, w, 0.0, 1.0, 65);
  Tensor<float> ref2(h, w, 0.f);  // ref1 shifted: ref2(x) = ref1(x+1)
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) ref2.at(r, c) = ref1.at(r, std::min(c + 1, w - 1));
  Tape<float> t;
  int zero = t.leaf(Tensor<float>(h, w, 0.f));
  int w1 = t.warp(t.leaf(ref1), zero, zero);
  int minus1 = t.leaf(Tensor<float>(h, w, -1.f));
  int w2 = t.warp(t.leaf(ref2), minus1, zero);
  auto beta = random_tensor<float>(h, w, 0.1, 0.9, 66);
  int pred = blend_prediction(t, w1, w2, t.leaf(beta));
  const auto& out = t.value(pred);
  for (int r = 0; r < h; ++r)
    for (int c = 1; c < w; ++c)  // interior: warp of ref2 is defined from col 1
      CHECK(out.at(r, c) == doctest::Approx(ref1.at(r, c)).epsilon(1e-6));
}

TEST_CASE("reconstruct: gate 0 keeps the residue, gate 1 keeps the prediction") {
  const int h = 4, w = 4;
  Tape<float> t;
  auto r = random_tensor<float>(h, w, -0.5, 0.5, 67);
  auto pred = random_tensor<float>(h, w, 0.0, 1.0, 68);
  int rn = t.leaf(r), pn = t.leaf(pred);

  int gated0 = t.mul(t.leaf(Tensor<float>(h, w, 0.f)), pn);
  const auto& rec0 = t.value(t.add(rn, gated0));
  for (size_t i = 0; i < rec0.v.size(); ++i) CHECK(rec0.v[i] == r.v[i]);

  int gated1 = t.mul(t.leaf(Tensor<float>(h, w, 1.f)), pn);
  const auto& rec1 = t.value(t.add(t.leaf(Tensor<float>(h, w, 0.f)), gated1));
  for (size_t i = 0; i < rec1.v.size(); ++i) CHECK(rec1.v[i] == pred.v[i]);
}

TEST_CASE("residue equal to the prediction error reconstructs exactly") {
  const int h = 8, w = 8;
  Tape<float> t;
  auto x = random_tensor<float>(h, w, 0.0, 1.0, 69);
  auto pred = random_tensor<float>(h, w, 0.0, 1.0, 70);
  int resid = t.sub(t.leaf(x), t.leaf(pred));
  int recon = t.add(resid, t.leaf(pred));
  const double mse = t.value(t.mse(recon, t.leaf(x))).v[0];
  CHECK(mse < 1e-13);
}

TEST_CASE("intra reconstruction ignores any references supplied") {
  const int h = 16, w = 16;
  auto ref_a = random_ref(h, w, 71);
  auto ref_b = random_ref(h, w, 74);
  Tape<float> t1, t2, t3;
  auto rec_none = zero_synthesis_recon(t1, FrameType::kIntra, nullptr, nullptr, h, w);
  auto rec_a = zero_synthesis_recon(t2, FrameType::kIntra, &ref_a, nullptr, h, w);
  auto rec_b = zero_synthesis_recon(t3, FrameType::kIntra, &ref_b, nullptr, h, w);
  for (size_t i = 0; i < t1.value(rec_none.y).v.size(); ++i) {
    CHECK(t1.value(rec_none.y).v[i] == t2.value(rec_a.y).v[i]);
    CHECK(t2.value(rec_a.y).v[i] == t3.value(rec_b.y).v[i]);
  }
  // zero synthesis: intra frame decodes to zero planes
  for (float v : t1.value(rec_none.y).v) CHECK(v == 0.f);
  for (float v : t1.value(rec_none.u).v) CHECK(v == 0.f);
}

TEST_CASE("neutral B-frame reconstruction blends both references at half gate") {
  const int h = 16, w = 16;
  auto r1 = random_ref(h, w, 75);
  auto r2 = random_ref(h, w, 78);
  Tape<float> t;
  auto rec = zero_synthesis_recon(t, FrameType::kBidir, &r1, &r2, h, w);
  // alpha = beta = 0.5, flows 0, residue 0: y = 0.5 * (0.5 r1 + 0.5 r2)
  const auto& y = t.value(rec.y);
  for (int i = 0; i < h * w; ++i) {
    const double want = 0.5 * (r2.y.v[i] + 0.5 * (r1.y.v[i] - r2.y.v[i]));
    CHECK(y.v[i] == doctest::Approx(want).epsilon(1e-6));
  }
  // chroma path: pooled gate/weighting on the chroma planes
  const auto& u = t.value(rec.u);
  for (int i = 0; i < h * w / 4; ++i) {
    const double want = 0.5 * (r2.u.v[i] + 0.5 * (r1.u.v[i] - r2.u.v[i]));
    CHECK(u.v[i] == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("P-frame with neutral synthesis predicts the clamped reference at half gate") {
  const int h = 16, w = 16;
  auto r1 = random_ref(h, w, 81);
  Tape<float> t;
  auto rec = zero_synthesis_recon(t, FrameType::kPred, &r1, nullptr, h, w);
  const auto& y = t.value(rec.y);
  for (int i = 0; i < h * w; ++i) CHECK(y.v[i] == doctest::Approx(0.5 * r1.y.v[i]).epsilon(1e-6));
}

TEST_CASE("missing references are configuration errors") {
  const int h = 16, w = 16;
  Tape<float> t;
  CHECK_THROWS_AS(zero_synthesis_recon(t, FrameType::kPred, nullptr, nullptr, h, w), ConfigError);
  auto r1 = random_ref(h, w, 82);
  Tape<float> t2;
  CHECK_THROWS_AS(zero_synthesis_recon(t2, FrameType::kBidir, &r1, nullptr, h, w), ConfigError);
}

TEST_CASE("inter and chroma multiplication counts match the runtime counter") {
  const int h = 32, w = 48;
  for (FrameType type : {FrameType::kIntra, FrameType::kPred, FrameType::kBidir}) {
    Tape<float> t;
    auto r1 = random_ref(h, w, 83);
    auto r2 = random_ref(h, w, 86);
    zero_synthesis_recon(t, type, type == FrameType::kIntra ? nullptr : &r1,
                         type == FrameType::kBidir ? &r2 : nullptr, h, w);
    CHECK(t.macs().inter == inter_mac_count(type, false, false, h, w));
    CHECK(t.macs().chroma == chroma_mac_count(type, false, false, h, w));
    CHECK(t.macs().upsampling == upsample_mac_count(h, w));
    const ChannelLayout lay = make_layout(type, false, false);
    CHECK(t.macs().synthesis ==
          static_cast<uint64_t>(h) * w * SynthesisParams<float>(lay.x).macs_per_pixel());
  }
}

TEST_SUITE_END();
