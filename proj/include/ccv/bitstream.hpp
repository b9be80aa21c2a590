#pragma once

// On-disk format and the decode orchestrator. A stream is a fixed header
// followed by length-prefixed frame payloads in coding order; each payload
// carries the entropy-coded network weights and then the latent planes.
// See docs/format.md for the byte-level layout.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccv/coder.hpp"
#include "ccv/gop.hpp"
#include "ccv/video_io.hpp"

namespace ccv {

inline constexpr char kMagic[4] = {'C', 'C', 'V', '1'};
inline constexpr uint8_t kFormatVersion = 1;
inline constexpr uint16_t kNoRef = 0xFFFF;

struct StreamHeader {
  uint8_t version = kFormatVersion;
  uint16_t width = 0;
  uint16_t height = 0;
  uint16_t frame_count = 0;
  uint16_t fps_num = 30;
  uint16_t fps_den = 1;
  GopMode gop_mode = GopMode::kRa;
};

inline constexpr size_t kStreamHeaderBytes = 16;

std::vector<uint8_t> serialize_header(const StreamHeader& h);
StreamHeader parse_header(std::span<const uint8_t> bytes);

// Container round-trip: header then u32-length-prefixed payloads.
std::vector<uint8_t> write_stream(const StreamHeader& h,
                                  const std::vector<std::vector<uint8_t>>& payloads);
std::pair<StreamHeader, std::vector<std::vector<uint8_t>>> read_stream(
    std::span<const uint8_t> bytes);

// ---- network weight coding -------------------------------------------------

// One quantized module: power-of-two step, zero-mean Laplace scale in symbol
// units (u16 fixed point, /256), symbol bound and the integer symbols.
struct ModuleQuant {
  int step_exp = 8;     // step = 2^-step_exp, step_exp in [4, 12]
  uint16_t scale_fp = 256;
  int bound = 0;
  std::vector<int> symbols;
  double est_bits = 0.0;

  double step() const { return std::ldexp(1.0, -step_exp); }
  double scale_symbols() const { return scale_fp / 256.0; }
};

struct QuantizedNetwork {
  ModuleQuant arm, upsampling, synthesis;
  double est_bits() const { return arm.est_bits + upsampling.est_bits + synthesis.est_bits; }
};

// Quantizes a flat weight vector with the given step; scale is the mean
// absolute symbol (fixed-point, at least 1/256).
ModuleQuant quantize_module(const std::vector<float>& flat, int step_exp);

// Exact dequantized values: symbol * 2^-step_exp.
std::vector<float> dequantize_module(const ModuleQuant& m);

std::vector<uint8_t> encode_network(const QuantizedNetwork& net);
// Needs the synthesis width to know the symbol counts.
QuantizedNetwork decode_network(std::span<const uint8_t> bytes, int synth_channels);

// ---- latent coding -----------------------------------------------------------

// Symbols are coded level 6 -> 0, raster order within a level, each element
// under the Laplace distribution predicted from its causal context. Returns
// the payload and accumulates the model's estimated bits.
std::vector<uint8_t> encode_latents(const std::vector<Tensor<float>>& symbols,
                                    const ArmParamsF& arm, double* est_bits);
std::vector<Tensor<float>> decode_latents(std::span<const uint8_t> bytes, const ArmParamsF& arm,
                                          int width, int height, MacBreakdown* macs);

// ---- frame payloads ----------------------------------------------------------

struct FrameHeader {
  FrameType type = FrameType::kIntra;
  bool disable_alpha = false;
  bool disable_beta = false;
  uint16_t display_index = 0;
  uint16_t ref1 = kNoRef;
  uint16_t ref2 = kNoRef;
};

struct FramePayloadParts {
  FrameHeader header;
  std::vector<uint8_t> network;
  std::vector<uint8_t> latents;
};

std::vector<uint8_t> assemble_frame_payload(const FramePayloadParts& parts);

struct ParsedFrame {
  FrameHeader header;
  QuantizedNetwork net;
  DecoderParamsF params;                // dequantized
  std::vector<Tensor<float>> symbols;   // 7 integer planes
  size_t network_bytes = 0;
  size_t latent_bytes = 0;
};

ParsedFrame parse_frame_payload(std::span<const uint8_t> payload, int width, int height,
                                MacBreakdown* macs, const std::string& what);

// Runs the decoder graph for a parsed frame. refs maps display index to the
// clamped [0,1] reconstruction of an already-decoded frame.
FloatFrame reconstruct_frame(const ParsedFrame& frame, const std::map<int, FloatFrame>& refs,
                             int width, int height, MacBreakdown* macs);

FloatFrame clamp01_frame(const FloatFrame& f);

// ---- whole-stream decode -------------------------------------------------------

struct DecodedFrameInfo {
  FrameHeader header;
  size_t payload_bytes = 0;
  size_t network_bytes = 0;
  size_t latent_bytes = 0;
  MacBreakdown macs;
};

struct DecodeResult {
  StreamHeader header;
  std::vector<FloatFrame> frames;           // display order, unclamped
  std::vector<DecodedFrameInfo> info;       // coding order
  MacBreakdown total_macs;
};

DecodeResult decode_video(std::span<const uint8_t> stream);

}  // namespace ccv
