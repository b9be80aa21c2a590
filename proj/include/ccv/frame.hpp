#pragma once

// Synthesis network and the parameter-free inter coding stage: the dense
// latent grid becomes optical flows, a residue, a prediction gate and a
// reference weighting, which are combined with warped references into the
// decoded frame. One graph builder serves training, the encoder's closed
// loop and the decoder, so all three agree bit for bit.

#include <cstdint>
#include <optional>
#include <vector>

#include "ccv/arm.hpp"
#include "ccv/graph.hpp"
#include "ccv/latent.hpp"

namespace ccv {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FrameType : uint8_t { kIntra = 0, kPred = 1, kBidir = 2 };

inline const char* frame_type_name(FrameType t) {
  switch (t) {
    case FrameType::kIntra: return "I";
    case FrameType::kPred: return "P";
    case FrameType::kBidir: return "B";
  }
  return "?";
}

// Which synthesis output channel carries which signal. -1 = absent.
// Full B-frame order: v1x v1y v2x v2y rY rU rV alpha beta.
struct ChannelLayout {
  int x = 0;  // synthesis output width
  int v1x = -1, v1y = -1;
  int v2x = -1, v2y = -1;
  int ry = -1, ru = -1, rv = -1;
  int alpha = -1;  // -1 when the gate is disabled (forced to 1)
  int beta = -1;   // -1 when the weighting is disabled
};

// disable_alpha forces the prediction gate to 1 and drops its channel;
// disable_beta forces the reference weighting to 1/2 and drops its channel.
inline ChannelLayout make_layout(FrameType type, bool disable_alpha, bool disable_beta) {
  ChannelLayout l;
  int c = 0;
  if (type != FrameType::kIntra) {
    l.v1x = c++;
    l.v1y = c++;
  }
  if (type == FrameType::kBidir) {
    l.v2x = c++;
    l.v2y = c++;
  }
  l.ry = c++;
  l.ru = c++;
  l.rv = c++;
  if (type != FrameType::kIntra && !disable_alpha) l.alpha = c++;
  if (type == FrameType::kBidir && !disable_beta) l.beta = c++;
  l.x = c;
  return l;
}

template <typename T>
struct SynthesisParams {
  int x = 0;
  Tensor<T> w1, b1, w2, b2, w3, b3;

  explicit SynthesisParams(int out_channels = 3)
      : x(out_channels),
        w1(18, kLatentLevels), b1(18, 1),
        w2(out_channels, 18), b2(out_channels, 1),
        w3(out_channels, out_channels), b3(out_channels, 1) {}

  int parameter_count() const {
    return 18 * kLatentLevels + 18 + x * 18 + x + x * x + x;
  }
  uint64_t macs_per_pixel() const {
    return static_cast<uint64_t>(kLatentLevels) * 18 + 18ull * x + static_cast<uint64_t>(x) * x;
  }
};

using SynthesisParamsF = SynthesisParams<float>;

// Everything the decoder needs for one frame: arm weights, the shared
// upsampling kernel, and the synthesis layers.
template <typename T>
struct DecoderParams {
  ArmParams<T> arm;
  Tensor<T> up_kernel{kUpsampleKernelSize, kUpsampleKernelSize};
  SynthesisParams<T> synth;

  explicit DecoderParams(int synth_channels = 3) : synth(synth_channels) {}

  int parameter_count() const {
    return ArmParams<T>::parameter_count() + kUpsampleKernelSize * kUpsampleKernelSize +
           synth.parameter_count();
  }
};

using DecoderParamsF = DecoderParams<float>;

// Fixed flattening order of each module's tensors; serialization, Adam and
// quantization all iterate parameters in this order.
template <typename T>
inline std::vector<Tensor<T>*> module_tensors(ArmParams<T>& p) {
  return {&p.w1, &p.b1, &p.w2, &p.b2, &p.w3, &p.b3};
}
template <typename T>
inline std::vector<Tensor<T>*> module_tensors(SynthesisParams<T>& p) {
  return {&p.w1, &p.b1, &p.w2, &p.b2, &p.w3, &p.b3};
}

template <typename T>
inline std::vector<float> flatten_module(const std::vector<Tensor<T>*>& tensors) {
  std::vector<float> flat;
  for (const auto* t : tensors)
    for (const auto x : t->v) flat.push_back(static_cast<float>(x));
  return flat;
}

template <typename T>
inline void unflatten_module(const std::vector<float>& flat, std::vector<Tensor<T>*> tensors) {
  size_t i = 0;
  for (auto* t : tensors) {
    for (auto& x : t->v) x = static_cast<T>(flat[i++]);
  }
  if (i != flat.size()) throw std::invalid_argument("unflatten_module: size mismatch");
}

// One decoded reference: YUV 4:2:0 planes on [0, 1], luma h x w.
template <typename T>
struct RefPlanes {
  Tensor<T> y, u, v;
};

template <typename T>
struct RefNodes {
  int y, u, v;
};

template <typename T>
struct SynthParamNodes {
  int w1, b1, w2, b2, w3, b3;
};

template <typename T>
inline SynthParamNodes<T> synthesis_leaves(Tape<T>& tape, const SynthesisParams<T>& p) {
  return {tape.leaf(p.w1), tape.leaf(p.b1), tape.leaf(p.w2), tape.leaf(p.b2),
          tape.leaf(p.w3), tape.leaf(p.b3)};
}

// Node ids of the synthesis signals, full resolution.
struct SynthesisOutNodes {
  int v1x = -1, v1y = -1, v2x = -1, v2y = -1;
  int ry = -1, ru = -1, rv = -1;
  int alpha = -1, beta = -1;  // after the +0.5 shift and [0,1] clamp
};

// Per-pixel MLP over the 7 dense channels; channels are split per the
// layout and the gate/weighting are squashed with clamp(raw + 0.5, 0, 1).
template <typename T>
inline SynthesisOutNodes build_synthesis(Tape<T>& tape, const std::vector<int>& dense,
                                         const SynthParamNodes<T>& p, const ChannelLayout& lay,
                                         int h, int w) {
  tape.set_mac_stage(MacStage::kSynthesis);
  int x0 = tape.stack_cols(dense);
  int a1 = tape.relu(tape.linear(x0, p.w1, p.b1));
  int a2 = tape.relu(tape.linear(a1, p.w2, p.b2));
  int out = tape.linear(a2, p.w3, p.b3);
  tape.set_mac_stage(MacStage::kNone);

  auto plane = [&](int idx) { return idx < 0 ? -1 : tape.col(out, idx, h, w); };
  SynthesisOutNodes s;
  s.v1x = plane(lay.v1x);
  s.v1y = plane(lay.v1y);
  s.v2x = plane(lay.v2x);
  s.v2y = plane(lay.v2y);
  s.ry = plane(lay.ry);
  s.ru = plane(lay.ru);
  s.rv = plane(lay.rv);
  if (lay.alpha >= 0) s.alpha = tape.clamp01(tape.affine(plane(lay.alpha), T(1), T(0.5)));
  if (lay.beta >= 0) s.beta = tape.clamp01(tape.affine(plane(lay.beta), T(1), T(0.5)));
  return s;
}

// Decoded YUV planes (unclamped) for one frame.
struct ReconNodes {
  int y = -1, u = -1, v = -1;
};

// Warps both references by their flows and blends them with the per-pixel
// weighting: pred = warp2 + beta * (warp1 - warp2). With one reference the
// weighting is fixed to 1 and the blend disappears.
template <typename T>
inline int blend_prediction(Tape<T>& tape, int warp1, int warp2, int beta) {
  if (warp2 < 0) return warp1;
  if (beta < 0) {
    // weighting disabled: plain average
    return tape.affine(tape.add(warp1, warp2), T(0.5), T(0));
  }
  return tape.add(warp2, tape.mul(beta, tape.sub(warp1, warp2)));
}

// Full reconstruction, luma resolution synthesis with average-pooled flows,
// gate and residue on the half-resolution chroma planes. Flow displacements
// are halved for chroma to stay in its own pixel units.
template <typename T>
inline ReconNodes build_reconstruction(Tape<T>& tape, const std::vector<int>& proxies,
                                       int kernel_node, const SynthParamNodes<T>& synth_nodes,
                                       const ChannelLayout& lay, FrameType type,
                                       const std::optional<RefNodes<T>>& ref1,
                                       const std::optional<RefNodes<T>>& ref2, int h, int w) {
  if (type != FrameType::kIntra && !ref1)
    throw ConfigError("reconstruction: missing reference for inter frame");
  if (type == FrameType::kBidir && !ref2)
    throw ConfigError("reconstruction: B-frame needs two references");

  tape.set_mac_stage(MacStage::kUpsampling);
  std::vector<int> dense(kLatentLevels);
  for (int i = 0; i < kLatentLevels; ++i)
    dense[static_cast<size_t>(i)] = upsample_level(tape, proxies[static_cast<size_t>(i)], i, kernel_node, h, w);
  tape.set_mac_stage(MacStage::kNone);

  SynthesisOutNodes s = build_synthesis(tape, dense, synth_nodes, lay, h, w);

  ReconNodes r;
  if (type == FrameType::kIntra) {
    // residue only; chroma residue pooled to half resolution
    r.y = s.ry;
    tape.set_mac_stage(MacStage::kChroma);
    r.u = tape.avgpool2(s.ru);
    r.v = tape.avgpool2(s.rv);
    tape.set_mac_stage(MacStage::kNone);
    return r;
  }

  // luma prediction
  tape.set_mac_stage(MacStage::kInter);
  int wy1 = tape.warp(ref1->y, s.v1x, s.v1y);
  int wy2 = type == FrameType::kBidir ? tape.warp(ref2->y, s.v2x, s.v2y) : -1;
  int pred_y = blend_prediction(tape, wy1, wy2, s.beta);
  int gated_y = s.alpha >= 0 ? tape.mul(s.alpha, pred_y) : pred_y;
  r.y = tape.add(s.ry, gated_y);
  tape.set_mac_stage(MacStage::kNone);

  // chroma prediction: pooled flows (halved), pooled gate/weighting,
  // pooled residue
  tape.set_mac_stage(MacStage::kChroma);
  int f1x = tape.avgpool2(s.v1x, T(0.5));
  int f1y = tape.avgpool2(s.v1y, T(0.5));
  int f2x = -1, f2y = -1;
  if (type == FrameType::kBidir) {
    f2x = tape.avgpool2(s.v2x, T(0.5));
    f2y = tape.avgpool2(s.v2y, T(0.5));
  }
  int alpha_c = s.alpha >= 0 ? tape.avgpool2(s.alpha) : -1;
  int beta_c = s.beta >= 0 ? tape.avgpool2(s.beta) : -1;
  int ru_c = tape.avgpool2(s.ru);
  int rv_c = tape.avgpool2(s.rv);
  for (int plane = 0; plane < 2; ++plane) {
    const int ref1_c = plane == 0 ? ref1->u : ref1->v;
    int w1 = tape.warp(ref1_c, f1x, f1y);
    int w2 = -1;
    if (type == FrameType::kBidir) {
      const int ref2_c = plane == 0 ? ref2->u : ref2->v;
      w2 = tape.warp(ref2_c, f2x, f2y);
    }
    int pred = blend_prediction(tape, w1, w2, beta_c);
    int gated = alpha_c >= 0 ? tape.mul(alpha_c, pred) : pred;
    int rec = tape.add(plane == 0 ? ru_c : rv_c, gated);
    (plane == 0 ? r.u : r.v) = rec;
  }
  tape.set_mac_stage(MacStage::kNone);
  return r;
}

// Exact multiplication count of the inter stage (luma path) per frame.
inline uint64_t inter_mac_count(FrameType type, bool disable_alpha, bool disable_beta, int h,
                                int w) {
  const uint64_t n = static_cast<uint64_t>(h) * w;
  switch (type) {
    case FrameType::kIntra:
      return 0;
    case FrameType::kPred:
      return n * (4 + (disable_alpha ? 0 : 1));
    case FrameType::kBidir:
      return n * (8 + 1 /* blend or average */ + (disable_alpha ? 0 : 1));
  }
  return 0;
}

// Exact multiplication count of the chroma path (pools + chroma warps).
inline uint64_t chroma_mac_count(FrameType type, bool disable_alpha, bool disable_beta, int h,
                                 int w) {
  const uint64_t nc = static_cast<uint64_t>(h / 2) * (w / 2);
  uint64_t per = 2;  // residue pools
  if (type == FrameType::kIntra) return nc * per;
  const int refs = type == FrameType::kBidir ? 2 : 1;
  per += 2ull * refs;            // flow pools
  per += disable_alpha ? 0 : 1;  // gate pool
  if (type == FrameType::kBidir && !disable_beta) per += 1;  // weighting pool
  per += 2ull * refs * 4;        // warps, two chroma planes
  if (type == FrameType::kBidir) per += 2;  // blend (or average), two planes
  per += disable_alpha ? 0 : 2;  // gate, two planes
  return nc * per;
}

}  // namespace ccv
