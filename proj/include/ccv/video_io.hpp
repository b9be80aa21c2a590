#pragma once

// Raw YUV 4:2:0 file I/O and evaluation metrics: the 4/6-1/6-1/6 weighted
// MSE, PSNR, sequence rate, Bjontegaard delta rate and the decoder
// complexity census.

#include <cstdint>
#include <string>
#include <vector>

#include "ccv/frame.hpp"

namespace ccv {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPsnrCap = 99.0;

// 8-bit planar 4:2:0 frame. Luma dims must be even.
struct YuvFrame {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> y, u, v;

  YuvFrame() = default;
  YuvFrame(int w, int h);
};

// Float planes on [0, 1].
struct FloatFrame {
  Tensor<float> y, u, v;

  static FloatFrame from_yuv(const YuvFrame& f);
  // clamp to [0, 1] and round to 8 bits
  YuvFrame to_yuv() const;
};

std::vector<YuvFrame> read_yuv(const std::string& path, int width, int height, int n_frames);
void write_yuv(const std::string& path, const std::vector<YuvFrame>& frames);

// (4/6) MSE_Y + (1/6) MSE_U + (1/6) MSE_V, each plane over its own sample
// count, samples on [0, 1].
double mse_420(const YuvFrame& a, const YuvFrame& b);
double mse_420(const FloatFrame& a, const FloatFrame& b);

// 10 log10(1 / mse), capped at 99 dB for identical content.
double psnr_from_mse(double mse);

// Mean frame MSE -> PSNR across a sequence.
double sequence_psnr(const std::vector<YuvFrame>& ref, const std::vector<YuvFrame>& dec);

// Mbits/s for a payload covering n_frames at the given framerate.
double sequence_rate_mbps(uint64_t payload_bytes, double fps_num, double fps_den, int n_frames);

struct RdPoint {
  double rate_mbps = 0.0;  // > 0
  double psnr_db = 0.0;
};

// Average rate difference of curve_b vs curve_a at equal quality, percent.
// Piecewise-cubic-hermite interpolation of log10(rate) over PSNR, averaged
// over the overlapping PSNR range. Needs >= 4 points per curve.
double bd_rate_percent(std::vector<RdPoint> curve_a, std::vector<RdPoint> curve_b);

// Analytic decoder census for one frame configuration. `macs` must equal
// the runtime counters of an actual decode of the same configuration.
struct ComplexityReport {
  FrameType type = FrameType::kIntra;
  int width = 0, height = 0;
  int params_arm = 0, params_upsampling = 0, params_synthesis = 0, params_inter = 0;
  int params_total = 0;
  MacBreakdown macs;  // exact totals for these dims
  double per_pixel_arm = 0, per_pixel_upsampling = 0, per_pixel_synthesis = 0;
  double per_pixel_inter = 0, per_pixel_chroma = 0, per_pixel_total = 0;
};

ComplexityReport complexity_report(FrameType type, int width, int height,
                                   bool disable_alpha = false, bool disable_beta = false);

}  // namespace ccv
