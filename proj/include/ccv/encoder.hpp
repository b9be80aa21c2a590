#pragma once

// Per-frame overfitting: latents and decoder parameters are optimized
// against the rate-distortion objective, the network is quantized, latents
// get a short fine-tune against the frozen quantized network, and the frame
// payload is emitted. The reported reconstruction is produced by decoding
// that payload, so encoder and decoder cannot drift.

#include <functional>
#include <optional>

#include "ccv/bitstream.hpp"

namespace ccv {

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EncodeConfig {
  double lambda = 0.002;  // rate weight, > 0
  int iters_main = 20000;
  int iters_ste = 2000;
  int iters_net = 1000;
  double lr_main = 1e-2;
  double lr_main_end = 1e-4;
  double lr_ste = 1e-4;
  double lr_net = 1e-4;
  bool disable_alpha = false;
  bool disable_beta = false;
  uint64_t seed = 0;
  int log_every = 100;

  void validate() const {
    if (!(lambda > 0.0)) throw ConfigError("encode config: lambda must be positive");
    if (iters_main < 1 || iters_ste < 0 || iters_net < 0)
      throw ConfigError("encode config: bad iteration counts");
  }
};

struct TracePoint {
  std::string phase;
  int iter = 0;
  double loss = 0.0;
  double mse = 0.0;
  double rate_bpp = 0.0;
  double psnr_db = 0.0;
};

struct FrameReport {
  int display_index = 0;
  FrameType type = FrameType::kIntra;
  size_t payload_bytes = 0;
  size_t network_bytes = 0;
  size_t latent_bytes = 0;
  double est_latent_bits = 0.0;
  double est_network_bits = 0.0;
  double latent_share_pct = 0.0;   // of latent + network payload bytes
  double network_share_pct = 0.0;
  double psnr_db = 0.0;            // 8-bit domain, matches the metrics tool
  double bpp = 0.0;
  int clamped_latents = 0;
  int restarts = 0;
  std::vector<TracePoint> trace;
};

struct EncodedFrame {
  std::vector<uint8_t> payload;
  FloatFrame recon;  // decode of `payload`, unclamped
  FrameReport report;
};

// ---- training graph ----------------------------------------------------------

// Loss = 4/6 mse_Y + 1/6 mse_U + 1/6 mse_V + lambda * latent_bits / (H*W).
// Templated on the scalar type so gradient checks can run in double.
template <typename T>
struct LossGraph {
  Tape<T> tape;
  std::vector<int> latent_leaves;
  ArmParamNodes<T> arm_nodes{};
  int kernel_leaf = -1;
  SynthParamNodes<T> synth_nodes{};
  ReconNodes recon{};
  int wmse = -1;
  int rate_bits_total = -1;
  int loss = -1;
};

template <typename T, typename Rng>
inline LossGraph<T> build_loss_graph(const Pyramid<T>& latents, const DecoderParams<T>& params,
                                     FrameType type, const ChannelLayout& lay,
                                     const RefPlanes<T>* ref1, const RefPlanes<T>* ref2,
                                     const RefPlanes<T>& original, double lambda, QuantMode mode,
                                     Rng& rng) {
  LossGraph<T> g;
  Tape<T>& tape = g.tape;
  const int h = original.y.rows, w = original.y.cols;

  std::vector<int> proxies(kLatentLevels);
  for (int i = 0; i < kLatentLevels; ++i) {
    g.latent_leaves.push_back(tape.leaf(latents.level[static_cast<size_t>(i)]));
    proxies[static_cast<size_t>(i)] = quantize_proxy(tape, g.latent_leaves.back(), mode, rng);
  }
  g.arm_nodes = arm_leaves(tape, params.arm);
  g.kernel_leaf = tape.leaf(params.up_kernel);
  g.synth_nodes = synthesis_leaves(tape, params.synth);

  // rate: per-level causal Laplace cost of the proxy values
  int rate = -1;
  for (int i = 0; i < kLatentLevels; ++i) {
    int r = tape.sum(plane_rate_bits(tape, proxies[static_cast<size_t>(i)], g.arm_nodes));
    rate = rate < 0 ? r : tape.add(rate, r);
  }
  g.rate_bits_total = rate;

  std::optional<RefNodes<T>> r1, r2;
  if (ref1) r1 = RefNodes<T>{tape.leaf(ref1->y), tape.leaf(ref1->u), tape.leaf(ref1->v)};
  if (ref2) r2 = RefNodes<T>{tape.leaf(ref2->y), tape.leaf(ref2->u), tape.leaf(ref2->v)};
  g.recon = build_reconstruction(tape, proxies, g.kernel_leaf, g.synth_nodes, lay, type, r1, r2,
                                 h, w);

  const int oy = tape.leaf(original.y);
  const int ou = tape.leaf(original.u);
  const int ov = tape.leaf(original.v);
  int wmse = tape.affine(tape.mse(g.recon.y, oy), T(4.0 / 6.0), T(0));
  wmse = tape.add(wmse, tape.affine(tape.mse(g.recon.u, ou), T(1.0 / 6.0), T(0)));
  wmse = tape.add(wmse, tape.affine(tape.mse(g.recon.v, ov), T(1.0 / 6.0), T(0)));
  g.wmse = wmse;
  g.loss = tape.add(wmse, tape.affine(rate, T(lambda / (static_cast<double>(h) * w)), T(0)));
  return g;
}

// ---- per-frame and per-video encoding -------------------------------------------

EncodedFrame encode_frame(const FloatFrame& original, const std::optional<FloatFrame>& ref1,
                          const std::optional<FloatFrame>& ref2, const FramePlan& plan,
                          const EncodeConfig& cfg);

// Network quantization: greedy per-module search over power-of-two steps
// minimizing distortion + lambda * (latent + network bits), evaluated with
// hard latents.
QuantizedNetwork quantize_network(const DecoderParamsF& params, const PyramidF& latents,
                                  const FloatFrame& original,
                                  const std::optional<FloatFrame>& ref1,
                                  const std::optional<FloatFrame>& ref2, FrameType type,
                                  const ChannelLayout& lay, double lambda);

struct VideoEncodeResult {
  StreamHeader header;
  std::vector<uint8_t> stream;
  std::vector<FramePlan> plans;              // coding order
  std::vector<FrameReport> reports;          // coding order
  std::vector<FloatFrame> recons;            // display order, unclamped
  double psnr_db = 0.0;                      // 8-bit sequence PSNR
  double rate_mbps = 0.0;
};

VideoEncodeResult encode_video(const std::vector<YuvFrame>& frames, GopMode mode,
                               int intra_period, uint16_t fps_num, uint16_t fps_den,
                               const EncodeConfig& cfg, int workers = 1,
                               const std::function<void(const FrameReport&)>& on_frame = {});

}  // namespace ccv
