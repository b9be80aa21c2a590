#include "ccv/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "ccv/optim.hpp"

namespace ccv {

namespace {

// splitmix64; stable across platforms, used for all seeding
uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed) {}
  uint32_t operator()() {
    state = mix64(state);
    return static_cast<uint32_t>(state >> 32);
  }
  // uniform in [-a, a]
  float uniform(float a) {
    return (static_cast<float>((*this)()) / 4294967296.0f * 2.0f - 1.0f) * a;
  }
};

void xavier_init(Tensor<float>& w, Rng& rng, float gain = 0.5f) {
  const float a = gain * std::sqrt(6.0f / static_cast<float>(w.rows + w.cols));
  for (auto& x : w.v) x = rng.uniform(a);
}

struct ParamSet {
  PyramidF latents;
  DecoderParamsF params;

  explicit ParamSet(int channels) : params(channels) {}

  std::vector<Tensor<float>*> all_tensors() {
    std::vector<Tensor<float>*> t;
    for (auto& l : latents.level) t.push_back(&l);
    for (auto* m : module_tensors(params.arm)) t.push_back(m);
    t.push_back(&params.up_kernel);
    for (auto* m : module_tensors(params.synth)) t.push_back(m);
    return t;
  }
  std::vector<Tensor<float>*> latent_tensors() {
    std::vector<Tensor<float>*> t;
    for (auto& l : latents.level) t.push_back(&l);
    return t;
  }
};

RefPlanes<float> to_ref_planes(const FloatFrame& f) { return {f.y, f.u, f.v}; }

}  // namespace

QuantizedNetwork quantize_network(const DecoderParamsF& params, const PyramidF& latents,
                                  const FloatFrame& original,
                                  const std::optional<FloatFrame>& ref1,
                                  const std::optional<FloatFrame>& ref2, FrameType type,
                                  const ChannelLayout& lay, double lambda) {
  const int h = original.y.rows, w = original.y.cols;
  const double pixels = static_cast<double>(h) * w;

  const std::vector<float> flat_arm =
      flatten_module(module_tensors(const_cast<ArmParamsF&>(params.arm)));
  std::vector<float> flat_up(params.up_kernel.v.begin(), params.up_kernel.v.end());
  const std::vector<float> flat_synth =
      flatten_module(module_tensors(const_cast<SynthesisParamsF&>(params.synth)));

  RefPlanes<float> orig{original.y, original.u, original.v};
  std::optional<RefPlanes<float>> r1, r2;
  if (ref1) r1 = to_ref_planes(*ref1);
  if (ref2) r2 = to_ref_planes(*ref2);

  // distortion + lambda*(latent rate + network rate), hard latents
  auto eval = [&](const DecoderParamsF& cand, double net_bits) {
    Rng dummy(0);
    auto g = build_loss_graph<float>(latents, cand, type, lay, r1 ? &*r1 : nullptr,
                                     r2 ? &*r2 : nullptr, orig, lambda, QuantMode::kHard, dummy);
    return static_cast<double>(g.tape.value(g.loss).v[0]) + lambda * net_bits / pixels;
  };

  auto apply = [&](DecoderParamsF& target, int module, const ModuleQuant& q) {
    const auto deq = dequantize_module(q);
    if (module == 0) {
      unflatten_module(deq, module_tensors(target.arm));
    } else if (module == 1) {
      std::copy(deq.begin(), deq.end(), target.up_kernel.v.begin());
    } else {
      unflatten_module(deq, module_tensors(target.synth));
    }
  };

  QuantizedNetwork net;
  DecoderParamsF current = params;
  const std::vector<float>* flats[3] = {&flat_arm, &flat_up, &flat_synth};
  ModuleQuant* slots[3] = {&net.arm, &net.upsampling, &net.synthesis};
  for (int module = 0; module < 3; ++module) {
    double best = 0.0;
    bool have = false;
    for (int exp = 4; exp <= 12; ++exp) {
      const ModuleQuant q = quantize_module(*flats[module], exp);
      if (q.bound > 32000) continue;
      DecoderParamsF cand = current;
      apply(cand, module, q);
      const double score = eval(cand, q.est_bits);
      if (!have || score < best) {
        best = score;
        *slots[module] = q;
        have = true;
      }
    }
    apply(current, module, *slots[module]);  // freeze the chosen module
  }
  return net;
}

namespace {

struct PhaseResult {
  double last_loss = 0.0;
  bool diverged = false;
};

struct FrameContext {
  const FloatFrame& original;
  RefPlanes<float> orig_planes;
  std::optional<RefPlanes<float>> ref1, ref2;
  FrameType type;
  ChannelLayout lay;
  const EncodeConfig& cfg;
  int h, w;
  FrameReport* report;
};

double eval_psnr_8bit(const FloatFrame& recon, const FloatFrame& original) {
  return psnr_from_mse(mse_420(FloatFrame{recon.y, recon.u, recon.v}.to_yuv(),
                               original.to_yuv()));
}

// One optimization phase over the given parameter subset.
PhaseResult run_phase(const char* name, FrameContext& ctx, ParamSet& ps,
                      std::vector<Tensor<float>*> trainable, QuantMode mode, int iters,
                      double lr0, double lr_end, bool cosine, Rng& noise_rng) {
  PhaseResult res;
  if (iters <= 0) return res;
  AdamOptimizer adam(trainable);
  double initial_loss = 0.0;
  int high_loss_streak = 0;

  for (int it = 0; it < iters; ++it) {
    auto g = build_loss_graph<float>(ps.latents, ps.params, ctx.type, ctx.lay,
                                     ctx.ref1 ? &*ctx.ref1 : nullptr,
                                     ctx.ref2 ? &*ctx.ref2 : nullptr, ctx.orig_planes,
                                     ctx.cfg.lambda, mode, noise_rng);
    const double loss = g.tape.value(g.loss).v[0];
    if (!std::isfinite(loss))
      throw EncodeError(std::string("non-finite loss in phase ") + name + " at iteration " +
                        std::to_string(it));
    if (it == 0) initial_loss = loss;
    if (loss > 10.0 * initial_loss && it > 0) {
      if (++high_loss_streak >= 500) {
        res.diverged = true;
        res.last_loss = loss;
        return res;
      }
    } else {
      high_loss_streak = 0;
    }

    g.tape.backward(g.loss);

    // leaf ids follow ParamSet::all_tensors() order
    std::vector<const Tensor<float>*> grads;
    std::vector<int> leaf_ids;
    for (int id : g.latent_leaves) leaf_ids.push_back(id);
    leaf_ids.push_back(g.arm_nodes.w1);
    leaf_ids.push_back(g.arm_nodes.b1);
    leaf_ids.push_back(g.arm_nodes.w2);
    leaf_ids.push_back(g.arm_nodes.b2);
    leaf_ids.push_back(g.arm_nodes.w3);
    leaf_ids.push_back(g.arm_nodes.b3);
    leaf_ids.push_back(g.kernel_leaf);
    leaf_ids.push_back(g.synth_nodes.w1);
    leaf_ids.push_back(g.synth_nodes.b1);
    leaf_ids.push_back(g.synth_nodes.w2);
    leaf_ids.push_back(g.synth_nodes.b2);
    leaf_ids.push_back(g.synth_nodes.w3);
    leaf_ids.push_back(g.synth_nodes.b3);
    // match trainable subset: latents-only phases use the first 7 ids
    grads.reserve(trainable.size());
    for (size_t i = 0; i < trainable.size(); ++i)
      grads.push_back(&g.tape.grad(leaf_ids[i]));

    const double lr = cosine ? cosine_lr(lr0, lr_end, it, iters) : lr0;
    adam.step(grads, lr);
    res.last_loss = loss;

    if (ctx.report && (it % ctx.cfg.log_every == 0 || it == iters - 1)) {
      TracePoint tp;
      tp.phase = name;
      tp.iter = it;
      tp.loss = loss;
      tp.mse = g.tape.value(g.wmse).v[0];
      tp.rate_bpp = g.tape.value(g.rate_bits_total).v[0] / (static_cast<double>(ctx.h) * ctx.w);
      tp.psnr_db = psnr_from_mse(tp.mse);
      ctx.report->trace.push_back(std::move(tp));
    }
  }
  return res;
}

void init_decoder_params(DecoderParamsF& p, const ChannelLayout& lay, Rng& rng) {
  xavier_init(p.arm.w1, rng);
  xavier_init(p.arm.w2, rng);
  std::fill(p.arm.b1.v.begin(), p.arm.b1.v.end(), 0.f);
  std::fill(p.arm.b2.v.begin(), p.arm.b2.v.end(), 0.f);
  std::fill(p.arm.w3.v.begin(), p.arm.w3.v.end(), 0.f);
  std::fill(p.arm.b3.v.begin(), p.arm.b3.v.end(), 0.f);
  p.up_kernel = bicubic_init_kernel();
  xavier_init(p.synth.w1, rng);
  xavier_init(p.synth.w2, rng);
  std::fill(p.synth.b1.v.begin(), p.synth.b1.v.end(), 0.f);
  std::fill(p.synth.b2.v.begin(), p.synth.b2.v.end(), 0.f);
  std::fill(p.synth.w3.v.begin(), p.synth.w3.v.end(), 0.f);
  std::fill(p.synth.b3.v.begin(), p.synth.b3.v.end(), 0.f);
  // the prediction gate starts near 1 (prediction on, still inside the
  // clamp so its gradient is alive); the reference weighting starts at 1/2
  if (lay.alpha >= 0) p.synth.b3.v[static_cast<size_t>(lay.alpha)] = 0.45f;
}

}  // namespace

EncodedFrame encode_frame(const FloatFrame& original, const std::optional<FloatFrame>& ref1,
                          const std::optional<FloatFrame>& ref2, const FramePlan& plan,
                          const EncodeConfig& cfg) {
  cfg.validate();
  const int h = original.y.rows, w = original.y.cols;
  if (plan.type != FrameType::kIntra && !ref1)
    throw ConfigError("encode_frame: inter frame without reference");
  if (plan.type == FrameType::kBidir && !ref2)
    throw ConfigError("encode_frame: B-frame needs two references");

  EncodedFrame out;
  FrameReport& report = out.report;
  report.display_index = plan.display_index;
  report.type = plan.type;

  const ChannelLayout lay = make_layout(plan.type, cfg.disable_alpha, cfg.disable_beta);
  FrameContext ctx{original, {original.y, original.u, original.v},
                   ref1 ? std::optional<RefPlanes<float>>(to_ref_planes(*ref1)) : std::nullopt,
                   ref2 ? std::optional<RefPlanes<float>>(to_ref_planes(*ref2)) : std::nullopt,
                   plan.type, lay, cfg, h, w, &report};

  const uint64_t frame_seed =
      mix64(cfg.seed) ^ mix64(static_cast<uint64_t>(plan.display_index) + 0x9E37);

  ParamSet ps(lay.x);
  double lr_main = cfg.lr_main;
  for (int attempt = 0;; ++attempt) {
    Rng init_rng(mix64(frame_seed ^ 0xA11CE));
    ps.latents = PyramidF::zeros(h, w);
    init_decoder_params(ps.params, lay, init_rng);

    Rng noise_rng(mix64(frame_seed ^ (0xB0B0 + static_cast<uint64_t>(attempt))));
    PhaseResult main_res = run_phase("noise", ctx, ps, ps.all_tensors(), QuantMode::kNoise,
                                     cfg.iters_main, lr_main, cfg.lr_main_end, true, noise_rng);
    if (main_res.diverged && attempt == 0) {
      lr_main /= 10.0;
      report.restarts += 1;
      continue;
    }
    Rng ste_rng(mix64(frame_seed ^ 0x57E));
    run_phase("ste", ctx, ps, ps.all_tensors(), QuantMode::kSte, cfg.iters_ste, cfg.lr_ste,
              cfg.lr_ste, false, ste_rng);
    break;
  }

  // network quantization with hard latents, then a latent-only fine-tune
  // against the frozen dequantized weights
  QuantizedNetwork net = quantize_network(ps.params, ps.latents, original, ref1, ref2,
                                          plan.type, lay, cfg.lambda);
  unflatten_module(dequantize_module(net.arm), module_tensors(ps.params.arm));
  {
    const auto k = dequantize_module(net.upsampling);
    std::copy(k.begin(), k.end(), ps.params.up_kernel.v.begin());
  }
  unflatten_module(dequantize_module(net.synthesis), module_tensors(ps.params.synth));

  Rng net_rng(mix64(frame_seed ^ 0xFE77));
  run_phase("net_quant", ctx, ps, ps.latent_tensors(), QuantMode::kSte, cfg.iters_net,
            cfg.lr_net, cfg.lr_net, false, net_rng);

  // final symbols and payload
  std::vector<Tensor<float>> symbols(kLatentLevels);
  for (int i = 0; i < kLatentLevels; ++i)
    report.clamped_latents += hard_symbols(ps.latents.level[static_cast<size_t>(i)],
                                           symbols[static_cast<size_t>(i)]);

  FramePayloadParts parts;
  parts.header.type = plan.type;
  parts.header.disable_alpha = cfg.disable_alpha;
  parts.header.disable_beta = cfg.disable_beta;
  parts.header.display_index = static_cast<uint16_t>(plan.display_index);
  parts.header.ref1 = plan.ref1 < 0 ? kNoRef : static_cast<uint16_t>(plan.ref1);
  parts.header.ref2 = plan.ref2 < 0 ? kNoRef : static_cast<uint16_t>(plan.ref2);
  parts.network = encode_network(net);
  parts.latents = encode_latents(symbols, ps.params.arm, &report.est_latent_bits);
  out.payload = assemble_frame_payload(parts);

  report.est_network_bits = net.est_bits();
  report.network_bytes = parts.network.size();
  report.latent_bytes = parts.latents.size();
  report.payload_bytes = out.payload.size();
  const double coded = static_cast<double>(report.network_bytes + report.latent_bytes);
  report.network_share_pct = 100.0 * static_cast<double>(report.network_bytes) / coded;
  report.latent_share_pct = 100.0 * static_cast<double>(report.latent_bytes) / coded;
  report.bpp = static_cast<double>(report.payload_bytes) * 8.0 / (static_cast<double>(h) * w);

  // closed loop: the reported reconstruction is the decode of the payload
  std::map<int, FloatFrame> refs;
  if (plan.ref1 >= 0) refs[plan.ref1] = clamp01_frame(*ref1);
  if (plan.ref2 >= 0) refs[plan.ref2] = clamp01_frame(*ref2);
  ParsedFrame parsed = parse_frame_payload(out.payload, w, h, nullptr, "encoded frame");
  out.recon = reconstruct_frame(parsed, refs, w, h, nullptr);
  report.psnr_db = eval_psnr_8bit(out.recon, original);
  return out;
}

VideoEncodeResult encode_video(const std::vector<YuvFrame>& frames, GopMode mode,
                               int intra_period, uint16_t fps_num, uint16_t fps_den,
                               const EncodeConfig& cfg, int workers,
                               const std::function<void(const FrameReport&)>& on_frame) {
  if (frames.empty()) throw ConfigError("encode_video: no frames");
  cfg.validate();
  const int w = frames[0].width, h = frames[0].height;
  if (w < 8 || h < 8) throw ConfigError("encode_video: dimensions must be at least 8");

  std::vector<FramePlan> plans = build_gop(static_cast<int>(frames.size()), mode, intra_period);

  std::vector<FloatFrame> originals;
  originals.reserve(frames.size());
  for (const auto& f : frames) originals.push_back(FloatFrame::from_yuv(f));

  VideoEncodeResult result;
  result.plans = plans;
  result.recons.assign(frames.size(), FloatFrame{});
  result.reports.resize(plans.size());
  std::vector<std::vector<uint8_t>> payloads(plans.size());
  std::map<int, FloatFrame> refs;  // display index -> clamped recon

  auto encode_one = [&](const FramePlan& plan) {
    std::optional<FloatFrame> r1, r2;
    if (plan.ref1 >= 0) r1 = refs.at(plan.ref1);
    if (plan.ref2 >= 0) r2 = refs.at(plan.ref2);
    return encode_frame(originals[static_cast<size_t>(plan.display_index)], r1, r2, plan, cfg);
  };

  // frames grouped by dependency level; frames within a group share no
  // references and may run concurrently
  size_t next = 0;
  while (next < plans.size()) {
    size_t end = next + 1;
    while (end < plans.size() && plans[end].level == plans[next].level) ++end;
    std::vector<EncodedFrame> batch(end - next);
    if (workers > 1 && end - next > 1) {
      std::vector<std::future<EncodedFrame>> futs;
      size_t launched = next;
      while (launched < end) {
        const size_t stop = std::min(end, launched + static_cast<size_t>(workers));
        futs.clear();
        for (size_t i = launched; i < stop; ++i)
          futs.push_back(std::async(std::launch::async, encode_one, plans[i]));
        for (size_t i = launched; i < stop; ++i)
          batch[i - next] = futs[i - launched].get();
        launched = stop;
      }
    } else {
      for (size_t i = next; i < end; ++i) batch[i - next] = encode_one(plans[i]);
    }
    for (size_t i = next; i < end; ++i) {
      EncodedFrame& ef = batch[i - next];
      const FramePlan& plan = plans[i];
      refs[plan.display_index] = clamp01_frame(ef.recon);
      result.recons[static_cast<size_t>(plan.display_index)] = std::move(ef.recon);
      payloads[i] = std::move(ef.payload);
      result.reports[i] = std::move(ef.report);
      if (on_frame) on_frame(result.reports[i]);
    }
    next = end;
  }

  result.header.width = static_cast<uint16_t>(w);
  result.header.height = static_cast<uint16_t>(h);
  result.header.frame_count = static_cast<uint16_t>(frames.size());
  result.header.fps_num = fps_num;
  result.header.fps_den = fps_den;
  result.header.gop_mode = mode;
  result.stream = write_stream(result.header, payloads);

  std::vector<YuvFrame> dec;
  dec.reserve(frames.size());
  for (const auto& r : result.recons) dec.push_back(r.to_yuv());
  result.psnr_db = sequence_psnr(frames, dec);
  result.rate_mbps = sequence_rate_mbps(result.stream.size(), fps_num, fps_den,
                                        static_cast<int>(frames.size()));
  return result;
}

}  // namespace ccv
