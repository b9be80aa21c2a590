#include "ccv/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace ccv {

YuvFrame::YuvFrame(int w, int h) : width(w), height(h) {
  if (w < 2 || h < 2 || w % 2 || h % 2)
    throw std::invalid_argument("YuvFrame: luma dims must be even and >= 2");
  y.assign(static_cast<size_t>(w) * h, 0);
  u.assign(static_cast<size_t>(w / 2) * (h / 2), 0);
  v.assign(static_cast<size_t>(w / 2) * (h / 2), 0);
}

FloatFrame FloatFrame::from_yuv(const YuvFrame& f) {
  FloatFrame out;
  out.y = Tensor<float>(f.height, f.width);
  out.u = Tensor<float>(f.height / 2, f.width / 2);
  out.v = Tensor<float>(f.height / 2, f.width / 2);
  for (size_t i = 0; i < f.y.size(); ++i) out.y.v[i] = f.y[i] / 255.0f;
  for (size_t i = 0; i < f.u.size(); ++i) out.u.v[i] = f.u[i] / 255.0f;
  for (size_t i = 0; i < f.v.size(); ++i) out.v.v[i] = f.v[i] / 255.0f;
  return out;
}

YuvFrame FloatFrame::to_yuv() const {
  YuvFrame out(y.cols, y.rows);
  auto quant = [](float x) {
    float s = x < 0.f ? 0.f : (x > 1.f ? 1.f : x);
    return static_cast<uint8_t>(std::lround(s * 255.0f));
  };
  for (size_t i = 0; i < y.v.size(); ++i) out.y[i] = quant(y.v[i]);
  for (size_t i = 0; i < u.v.size(); ++i) out.u[i] = quant(u.v[i]);
  for (size_t i = 0; i < v.v.size(); ++i) out.v[i] = quant(v.v[i]);
  return out;
}

std::vector<YuvFrame> read_yuv(const std::string& path, int width, int height, int n_frames) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const size_t frame_bytes = static_cast<size_t>(width) * height * 3 / 2;
  in.seekg(0, std::ios::end);
  const size_t file_size = static_cast<size_t>(in.tellg());
  if (n_frames <= 0) n_frames = static_cast<int>(file_size / frame_bytes);
  if (file_size < frame_bytes * static_cast<size_t>(n_frames))
    throw IoError(path + ": file too short for " + std::to_string(n_frames) + " frames of " +
                  std::to_string(width) + "x" + std::to_string(height));
  in.seekg(0, std::ios::beg);
  std::vector<YuvFrame> frames;
  frames.reserve(static_cast<size_t>(n_frames));
  for (int i = 0; i < n_frames; ++i) {
    YuvFrame f(width, height);
    in.read(reinterpret_cast<char*>(f.y.data()), static_cast<std::streamsize>(f.y.size()));
    in.read(reinterpret_cast<char*>(f.u.data()), static_cast<std::streamsize>(f.u.size()));
    in.read(reinterpret_cast<char*>(f.v.data()), static_cast<std::streamsize>(f.v.size()));
    if (!in) throw IoError(path + ": short read at frame " + std::to_string(i));
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_yuv(const std::string& path, const std::vector<YuvFrame>& frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& f : frames) {
    out.write(reinterpret_cast<const char*>(f.y.data()), static_cast<std::streamsize>(f.y.size()));
    out.write(reinterpret_cast<const char*>(f.u.data()), static_cast<std::streamsize>(f.u.size()));
    out.write(reinterpret_cast<const char*>(f.v.data()), static_cast<std::streamsize>(f.v.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

namespace {

double plane_mse_u8(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) / 255.0;
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double plane_mse_f(const Tensor<float>& a, const Tensor<float>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    const double d = static_cast<double>(a.v[i]) - b.v[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.v.size());
}

}  // namespace

double mse_420(const YuvFrame& a, const YuvFrame& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("mse_420: dimension mismatch");
  return 4.0 / 6.0 * plane_mse_u8(a.y, b.y) + 1.0 / 6.0 * plane_mse_u8(a.u, b.u) +
         1.0 / 6.0 * plane_mse_u8(a.v, b.v);
}

double mse_420(const FloatFrame& a, const FloatFrame& b) {
  return 4.0 / 6.0 * plane_mse_f(a.y, b.y) + 1.0 / 6.0 * plane_mse_f(a.u, b.u) +
         1.0 / 6.0 * plane_mse_f(a.v, b.v);
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double sequence_psnr(const std::vector<YuvFrame>& ref, const std::vector<YuvFrame>& dec) {
  if (ref.size() != dec.size() || ref.empty())
    throw std::invalid_argument("sequence_psnr: frame count mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) acc += mse_420(ref[i], dec[i]);
  return psnr_from_mse(acc / static_cast<double>(ref.size()));
}

double sequence_rate_mbps(uint64_t payload_bytes, double fps_num, double fps_den, int n_frames) {
  if (n_frames <= 0 || fps_num <= 0 || fps_den <= 0)
    throw std::invalid_argument("sequence_rate_mbps: bad arguments");
  return static_cast<double>(payload_bytes) * 8.0 * (fps_num / fps_den) / n_frames / 1e6;
}

namespace {

// Fritsch-Carlson monotone cubic hermite slopes.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  std::vector<double> h(n - 1), delta(n - 1), d(n);
  for (size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  d[0] = delta[0];
  d[n - 1] = delta[n - 2];
  for (size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      d[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  return d;
}

// Integral of the hermite piece on [x0+a, x0+b] (a, b within [0, h]).
double hermite_integral(double y0, double y1, double d0, double d1, double h, double a, double b) {
  auto antideriv = [&](double t) {
    // t in [0, 1]; integral of the cubic hermite basis form, scaled by h
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    const double hi00 = t - t3 + t4 / 2.0;          // int of 2t^3-3t^2+1
    const double hi10 = t2 / 2.0 - 2.0 * t3 / 3.0 + t4 / 4.0;  // int of t^3-2t^2+t
    const double hi01 = t3 - t4 / 2.0;               // int of -2t^3+3t^2
    const double hi11 = t4 / 4.0 - t3 / 3.0;         // int of t^3-t^2
    return h * (y0 * hi00 + h * d0 * hi10 + y1 * hi01 + h * d1 * hi11);
  };
  return antideriv(b / h) - antideriv(a / h);
}

double pchip_integrate(const std::vector<double>& x, const std::vector<double>& y, double lo,
                       double hi) {
  const std::vector<double> d = pchip_slopes(x, y);
  double acc = 0.0;
  for (size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = std::max(lo, x[i]);
    const double b = std::min(hi, x[i + 1]);
    if (b <= a) continue;
    acc += hermite_integral(y[i], y[i + 1], d[i], d[i + 1], x[i + 1] - x[i], a - x[i], b - x[i]);
  }
  return acc;
}

void validate_curve(std::vector<RdPoint>& c, const char* name) {
  if (c.size() < 4)
    throw std::invalid_argument(std::string("bd_rate: ") + name + " needs at least 4 points");
  std::sort(c.begin(), c.end(), [](const RdPoint& a, const RdPoint& b) { return a.psnr_db < b.psnr_db; });
  for (size_t i = 0; i < c.size(); ++i) {
    if (c[i].rate_mbps <= 0.0) throw std::invalid_argument("bd_rate: rates must be positive");
    if (i > 0 && c[i].psnr_db <= c[i - 1].psnr_db)
      throw std::invalid_argument("bd_rate: PSNR values must be distinct");
  }
}

}  // namespace

double bd_rate_percent(std::vector<RdPoint> curve_a, std::vector<RdPoint> curve_b) {
  validate_curve(curve_a, "curve_a");
  validate_curve(curve_b, "curve_b");
  const double lo = std::max(curve_a.front().psnr_db, curve_b.front().psnr_db);
  const double hi = std::min(curve_a.back().psnr_db, curve_b.back().psnr_db);
  if (hi <= lo) throw std::invalid_argument("bd_rate: PSNR ranges do not overlap");
  auto log_curve = [](const std::vector<RdPoint>& c, std::vector<double>& x, std::vector<double>& y) {
    for (const auto& p : c) {
      x.push_back(p.psnr_db);
      y.push_back(std::log10(p.rate_mbps));
    }
  };
  std::vector<double> xa, ya, xb, yb;
  log_curve(curve_a, xa, ya);
  log_curve(curve_b, xb, yb);
  const double avg_a = pchip_integrate(xa, ya, lo, hi) / (hi - lo);
  const double avg_b = pchip_integrate(xb, yb, lo, hi) / (hi - lo);
  return (std::pow(10.0, avg_b - avg_a) - 1.0) * 100.0;
}

ComplexityReport complexity_report(FrameType type, int width, int height, bool disable_alpha,
                                   bool disable_beta) {
  if (width < 2 || height < 2 || width % 2 || height % 2)
    throw std::invalid_argument("complexity_report: dims must be even and >= 2");
  ComplexityReport r;
  r.type = type;
  r.width = width;
  r.height = height;

  const ChannelLayout lay = make_layout(type, disable_alpha, disable_beta);
  SynthesisParams<float> synth(lay.x);
  r.params_arm = ArmParams<float>::parameter_count();
  r.params_upsampling = kUpsampleKernelSize * kUpsampleKernelSize;
  r.params_synthesis = synth.parameter_count();
  r.params_inter = 0;
  r.params_total = r.params_arm + r.params_upsampling + r.params_synthesis + r.params_inter;

  const uint64_t pixels = static_cast<uint64_t>(width) * height;
  r.macs.arm = arm_mac_count(latent_element_count(height, width));
  r.macs.upsampling = upsample_mac_count(height, width);
  r.macs.synthesis = pixels * synth.macs_per_pixel();
  r.macs.inter = inter_mac_count(type, disable_alpha, disable_beta, height, width);
  r.macs.chroma = chroma_mac_count(type, disable_alpha, disable_beta, height, width);

  const double p = static_cast<double>(pixels);
  r.per_pixel_arm = static_cast<double>(r.macs.arm) / p;
  r.per_pixel_upsampling = static_cast<double>(r.macs.upsampling) / p;
  r.per_pixel_synthesis = static_cast<double>(r.macs.synthesis) / p;
  r.per_pixel_inter = static_cast<double>(r.macs.inter) / p;
  r.per_pixel_chroma = static_cast<double>(r.macs.chroma) / p;
  r.per_pixel_total = static_cast<double>(r.macs.total()) / p;
  return r;
}

}  // namespace ccv
