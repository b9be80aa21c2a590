#include "ccv/bitstream.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ccv {

namespace {

void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }
void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>(v >> 8));
}
void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

struct Reader {
  std::span<const uint8_t> bytes;
  size_t pos = 0;
  std::string what;

  void need(size_t n) const {
    if (pos + n > bytes.size()) throw DecodeError(what + ": truncated");
  }
  uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::span<const uint8_t> take(size_t n) {
    need(n);
    auto s = bytes.subspan(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::vector<uint8_t> serialize_header(const StreamHeader& h) {
  if (h.width < 8 || h.height < 8)
    throw ConfigError("stream header: dimensions must be at least 8");
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u8(out, h.version);
  put_u16(out, h.width);
  put_u16(out, h.height);
  put_u16(out, h.frame_count);
  put_u16(out, h.fps_num);
  put_u16(out, h.fps_den);
  put_u8(out, static_cast<uint8_t>(h.gop_mode));
  return out;
}

StreamHeader parse_header(std::span<const uint8_t> bytes) {
  Reader r{bytes, 0, "stream header"};
  r.need(kStreamHeaderBytes);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw DecodeError("stream header: bad magic");
  r.pos = 4;
  StreamHeader h;
  h.version = r.u8();
  if (h.version != kFormatVersion)
    throw DecodeError("stream header: unsupported version " + std::to_string(h.version));
  h.width = r.u16();
  h.height = r.u16();
  h.frame_count = r.u16();
  h.fps_num = r.u16();
  h.fps_den = r.u16();
  const uint8_t gm = r.u8();
  if (gm > 2) throw DecodeError("stream header: bad gop mode");
  h.gop_mode = static_cast<GopMode>(gm);
  if (h.width < 8 || h.height < 8) throw DecodeError("stream header: dimensions below 8");
  return h;
}

std::vector<uint8_t> write_stream(const StreamHeader& h,
                                  const std::vector<std::vector<uint8_t>>& payloads) {
  if (payloads.size() != h.frame_count)
    throw ConfigError("write_stream: payload count does not match header");
  std::vector<uint8_t> out = serialize_header(h);
  for (const auto& p : payloads) {
    put_u32(out, static_cast<uint32_t>(p.size()));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::pair<StreamHeader, std::vector<std::vector<uint8_t>>> read_stream(
    std::span<const uint8_t> bytes) {
  StreamHeader h = parse_header(bytes);
  Reader r{bytes, kStreamHeaderBytes, "stream"};
  std::vector<std::vector<uint8_t>> payloads;
  for (int i = 0; i < h.frame_count; ++i) {
    r.what = "frame " + std::to_string(i);
    const uint32_t len = r.u32();
    if (r.pos + len > bytes.size())
      throw DecodeError("frame " + std::to_string(i) + ": payload length exceeds stream");
    auto s = r.take(len);
    payloads.emplace_back(s.begin(), s.end());
  }
  if (r.pos != bytes.size())
    throw DecodeError("stream: trailing bytes after last frame");
  return {h, std::move(payloads)};
}

// ---- network weight coding ----------------------------------------------------

ModuleQuant quantize_module(const std::vector<float>& flat, int step_exp) {
  if (step_exp < 4 || step_exp > 12)
    throw std::invalid_argument("quantize_module: step exponent out of range");
  ModuleQuant m;
  m.step_exp = step_exp;
  const double inv_step = std::ldexp(1.0, step_exp);
  m.symbols.reserve(flat.size());
  double abs_sum = 0.0;
  for (float w : flat) {
    const int s = static_cast<int>(std::lround(static_cast<double>(w) * inv_step));
    m.symbols.push_back(s);
    m.bound = std::max(m.bound, std::abs(s));
    abs_sum += std::abs(s);
  }
  const double mean_abs = flat.empty() ? 0.0 : abs_sum / static_cast<double>(flat.size());
  m.scale_fp = static_cast<uint16_t>(std::clamp(std::lround(mean_abs * 256.0), 1l, 65535l));
  const Laplace dist{0.0, m.scale_symbols()};
  m.est_bits = 0.0;
  for (int s : m.symbols) m.est_bits += rate_bits(s, dist);
  return m;
}

std::vector<float> dequantize_module(const ModuleQuant& m) {
  std::vector<float> out;
  out.reserve(m.symbols.size());
  const float step = static_cast<float>(m.step());
  for (int s : m.symbols) out.push_back(static_cast<float>(s) * step);
  return out;
}

namespace {

void put_module_meta(std::vector<uint8_t>& out, const ModuleQuant& m) {
  put_u8(out, static_cast<uint8_t>(m.step_exp));
  put_u16(out, m.scale_fp);
  if (m.bound > 0xFFFF) throw ConfigError("network module: symbol bound too large");
  put_u16(out, static_cast<uint16_t>(m.bound));
}

ModuleQuant read_module_meta(Reader& r) {
  ModuleQuant m;
  m.step_exp = r.u8();
  if (m.step_exp < 4 || m.step_exp > 12)
    throw DecodeError(r.what + ": bad weight step exponent");
  m.scale_fp = r.u16();
  if (m.scale_fp == 0) throw DecodeError(r.what + ": zero weight scale");
  m.bound = r.u16();
  if (m.bound > 32000) throw DecodeError(r.what + ": weight symbol bound too large");
  return m;
}

}  // namespace

std::vector<uint8_t> encode_network(const QuantizedNetwork& net) {
  std::vector<uint8_t> out;
  put_module_meta(out, net.arm);
  put_module_meta(out, net.upsampling);
  put_module_meta(out, net.synthesis);
  RangeEncoder enc;
  for (const ModuleQuant* m : {&net.arm, &net.upsampling, &net.synthesis}) {
    if (m->bound == 0) continue;  // all-zero module: nothing to code
    const QuantizedCdf cdf = build_cdf(Laplace{0.0, m->scale_symbols()}, m->bound);
    for (int s : m->symbols) enc.encode(cdf, s);
  }
  const auto coded = enc.finish();
  out.insert(out.end(), coded.begin(), coded.end());
  return out;
}

QuantizedNetwork decode_network(std::span<const uint8_t> bytes, int synth_channels) {
  Reader r{bytes, 0, "network section"};
  QuantizedNetwork net;
  net.arm = read_module_meta(r);
  net.upsampling = read_module_meta(r);
  net.synthesis = read_module_meta(r);

  const int x = synth_channels;
  const size_t n_arm = ArmParamsF::parameter_count();
  const size_t n_up = kUpsampleKernelSize * kUpsampleKernelSize;
  const size_t n_synth = static_cast<size_t>(18 * kLatentLevels + 18 + x * 18 + x + x * x + x);

  RangeDecoder dec(bytes.subspan(r.pos));
  auto read_symbols = [&](ModuleQuant& m, size_t count) {
    m.symbols.assign(count, 0);
    if (m.bound == 0) return;
    const QuantizedCdf cdf = build_cdf(Laplace{0.0, m.scale_symbols()}, m.bound);
    for (size_t i = 0; i < count; ++i) m.symbols[i] = dec.decode(cdf);
  };
  read_symbols(net.arm, n_arm);
  read_symbols(net.upsampling, n_up);
  read_symbols(net.synthesis, n_synth);
  if (r.pos + dec.consumed() != bytes.size())
    throw DecodeError("network section: length mismatch");
  return net;
}

// ---- latent coding --------------------------------------------------------------

std::vector<uint8_t> encode_latents(const std::vector<Tensor<float>>& symbols,
                                    const ArmParamsF& arm, double* est_bits) {
  if (symbols.size() != kLatentLevels)
    throw std::invalid_argument("encode_latents: need 7 levels");
  std::vector<uint8_t> out;
  std::vector<int> bounds(kLatentLevels, 0);
  for (int i = 0; i < kLatentLevels; ++i) {
    int b = 0;
    for (float s : symbols[static_cast<size_t>(i)].v)
      b = std::max(b, std::abs(static_cast<int>(s)));
    if (b > kSymbolBound) throw std::invalid_argument("encode_latents: symbol out of range");
    bounds[static_cast<size_t>(i)] = b;
    put_u8(out, static_cast<uint8_t>(b));
  }
  double bits = 0.0;
  RangeEncoder enc;
  float ctx[kArmContextSize];
  for (int level = kLatentLevels - 1; level >= 0; --level) {
    const auto& plane = symbols[static_cast<size_t>(level)];
    const int bound = bounds[static_cast<size_t>(level)];
    for (int row = 0; row < plane.rows; ++row) {
      for (int col = 0; col < plane.cols; ++col) {
        extract_context(plane, row, col, ctx);
        const Laplace dist = arm_forward_single(ctx, arm);
        const int s = static_cast<int>(plane.at(row, col));
        bits += rate_bits(s, dist);
        if (bound == 0) continue;  // single-symbol alphabet, nothing to code
        enc.encode(build_cdf(dist, bound), s);
      }
    }
  }
  const auto coded = enc.finish();
  out.insert(out.end(), coded.begin(), coded.end());
  if (est_bits) *est_bits = bits;
  return out;
}

std::vector<Tensor<float>> decode_latents(std::span<const uint8_t> bytes, const ArmParamsF& arm,
                                          int width, int height, MacBreakdown* macs) {
  Reader r{bytes, 0, "latent section"};
  std::vector<int> bounds(kLatentLevels, 0);
  for (int i = 0; i < kLatentLevels; ++i) {
    bounds[static_cast<size_t>(i)] = r.u8();
    if (bounds[static_cast<size_t>(i)] > kSymbolBound)
      throw DecodeError("latent section: bad symbol bound");
  }
  const auto shapes = pyramid_shapes(height, width);
  std::vector<Tensor<float>> symbols;
  for (int i = 0; i < kLatentLevels; ++i)
    symbols.emplace_back(shapes[static_cast<size_t>(i)].h, shapes[static_cast<size_t>(i)].w, 0.f);

  RangeDecoder dec(bytes.subspan(r.pos));
  float ctx[kArmContextSize];
  for (int level = kLatentLevels - 1; level >= 0; --level) {
    auto& plane = symbols[static_cast<size_t>(level)];
    const int bound = bounds[static_cast<size_t>(level)];
    for (int row = 0; row < plane.rows; ++row) {
      for (int col = 0; col < plane.cols; ++col) {
        extract_context(plane, row, col, ctx);
        const Laplace dist = arm_forward_single(ctx, arm, macs);
        if (bound == 0) continue;  // value stays 0
        plane.at(row, col) = static_cast<float>(dec.decode(build_cdf(dist, bound)));
      }
    }
  }
  if (r.pos + dec.consumed() != bytes.size())
    throw DecodeError("latent section: length mismatch");
  return symbols;
}

// ---- frame payloads ---------------------------------------------------------------

std::vector<uint8_t> assemble_frame_payload(const FramePayloadParts& parts) {
  std::vector<uint8_t> out;
  put_u8(out, static_cast<uint8_t>(parts.header.type));
  uint8_t flags = 0;
  if (parts.header.disable_alpha) flags |= 1;
  if (parts.header.disable_beta) flags |= 2;
  put_u8(out, flags);
  put_u16(out, parts.header.display_index);
  put_u16(out, parts.header.ref1);
  put_u16(out, parts.header.ref2);
  put_u32(out, static_cast<uint32_t>(parts.network.size()));
  put_u32(out, static_cast<uint32_t>(parts.latents.size()));
  out.insert(out.end(), parts.network.begin(), parts.network.end());
  out.insert(out.end(), parts.latents.begin(), parts.latents.end());
  return out;
}

ParsedFrame parse_frame_payload(std::span<const uint8_t> payload, int width, int height,
                                MacBreakdown* macs, const std::string& what) {
  Reader r{payload, 0, what};
  ParsedFrame f;
  const uint8_t type = r.u8();
  if (type > 2) throw DecodeError(what + ": bad frame type");
  f.header.type = static_cast<FrameType>(type);
  const uint8_t flags = r.u8();
  if (flags > 3) throw DecodeError(what + ": bad frame flags");
  f.header.disable_alpha = flags & 1;
  f.header.disable_beta = flags & 2;
  f.header.display_index = r.u16();
  f.header.ref1 = r.u16();
  f.header.ref2 = r.u16();
  const uint32_t net_len = r.u32();
  const uint32_t lat_len = r.u32();
  if (r.pos + net_len + lat_len != payload.size())
    throw DecodeError(what + ": section lengths do not match payload size");

  const ChannelLayout lay =
      make_layout(f.header.type, f.header.disable_alpha, f.header.disable_beta);
  auto net_bytes = r.take(net_len);
  auto lat_bytes = r.take(lat_len);
  try {
    f.net = decode_network(net_bytes, lay.x);
  } catch (const DecodeError& e) {
    throw DecodeError(what + ": " + e.what());
  }

  f.params = DecoderParamsF(lay.x);
  unflatten_module(dequantize_module(f.net.arm), module_tensors(f.params.arm));
  {
    const auto kernel = dequantize_module(f.net.upsampling);
    std::copy(kernel.begin(), kernel.end(), f.params.up_kernel.v.begin());
  }
  unflatten_module(dequantize_module(f.net.synthesis), module_tensors(f.params.synth));

  try {
    f.symbols = decode_latents(lat_bytes, f.params.arm, width, height, macs);
  } catch (const DecodeError& e) {
    throw DecodeError(what + ": " + e.what());
  }
  f.network_bytes = net_len;
  f.latent_bytes = lat_len;
  return f;
}

FloatFrame clamp01_frame(const FloatFrame& f) {
  FloatFrame out = f;
  auto clamp = [](Tensor<float>& t) {
    for (auto& x : t.v) x = x < 0.f ? 0.f : (x > 1.f ? 1.f : x);
  };
  clamp(out.y);
  clamp(out.u);
  clamp(out.v);
  return out;
}

FloatFrame reconstruct_frame(const ParsedFrame& frame, const std::map<int, FloatFrame>& refs,
                             int width, int height, MacBreakdown* macs) {
  Tape<float> tape;
  std::vector<int> proxies(kLatentLevels);
  for (int i = 0; i < kLatentLevels; ++i)
    proxies[static_cast<size_t>(i)] = tape.leaf(frame.symbols[static_cast<size_t>(i)]);
  const int kernel = tape.leaf(frame.params.up_kernel);
  DecoderParamsF params = frame.params;  // local copy for leaf creation
  SynthParamNodes<float> synth = synthesis_leaves(tape, params.synth);
  const ChannelLayout lay =
      make_layout(frame.header.type, frame.header.disable_alpha, frame.header.disable_beta);

  auto ref_nodes = [&](uint16_t idx) -> std::optional<RefNodes<float>> {
    if (idx == kNoRef) return std::nullopt;
    auto it = refs.find(idx);
    if (it == refs.end())
      throw DecodeError("frame " + std::to_string(frame.header.display_index) +
                        ": reference " + std::to_string(idx) + " not decoded");
    return RefNodes<float>{tape.leaf(it->second.y), tape.leaf(it->second.u),
                           tape.leaf(it->second.v)};
  };
  std::optional<RefNodes<float>> r1, r2;
  if (frame.header.type != FrameType::kIntra) r1 = ref_nodes(frame.header.ref1);
  if (frame.header.type == FrameType::kBidir) r2 = ref_nodes(frame.header.ref2);

  ReconNodes rec = build_reconstruction(tape, proxies, kernel, synth, lay, frame.header.type,
                                        r1, r2, height, width);
  FloatFrame out;
  out.y = tape.value(rec.y);
  out.u = tape.value(rec.u);
  out.v = tape.value(rec.v);
  if (macs) *macs += tape.macs();
  return out;
}

DecodeResult decode_video(std::span<const uint8_t> stream) {
  auto [header, payloads] = read_stream(stream);
  DecodeResult result;
  result.header = header;
  result.frames.assign(header.frame_count, FloatFrame{});
  std::map<int, FloatFrame> refs;
  for (size_t i = 0; i < payloads.size(); ++i) {
    const std::string what = "frame " + std::to_string(i);
    DecodedFrameInfo info;
    ParsedFrame parsed = parse_frame_payload(payloads[i], header.width, header.height,
                                             &info.macs, what);
    FloatFrame recon =
        reconstruct_frame(parsed, refs, header.width, header.height, &info.macs);
    info.header = parsed.header;
    info.payload_bytes = payloads[i].size();
    info.network_bytes = parsed.network_bytes;
    info.latent_bytes = parsed.latent_bytes;
    if (parsed.header.display_index >= header.frame_count)
      throw DecodeError(what + ": display index out of range");
    refs[parsed.header.display_index] = clamp01_frame(recon);
    result.frames[parsed.header.display_index] = std::move(recon);
    result.total_macs += info.macs;
    result.info.push_back(std::move(info));
  }
  return result;
}

}  // namespace ccv
