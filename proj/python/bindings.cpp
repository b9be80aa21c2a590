// Python bindings for the main codec operations.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ccv/encoder.hpp"

namespace py = pybind11;
using namespace ccv;

namespace {

using U8Array = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

std::vector<YuvFrame> frames_from_arrays(const U8Array& y, const U8Array& u, const U8Array& v) {
  if (y.ndim() != 3 || u.ndim() != 3 || v.ndim() != 3)
    throw std::invalid_argument("expected arrays of shape (frames, rows, cols)");
  const int n = static_cast<int>(y.shape(0));
  const int h = static_cast<int>(y.shape(1));
  const int w = static_cast<int>(y.shape(2));
  if (u.shape(0) != n || u.shape(1) != h / 2 || u.shape(2) != w / 2 || v.shape(0) != n ||
      v.shape(1) != h / 2 || v.shape(2) != w / 2)
    throw std::invalid_argument("chroma arrays must be (frames, rows/2, cols/2)");
  std::vector<YuvFrame> frames;
  for (int i = 0; i < n; ++i) {
    YuvFrame f(w, h);
    std::memcpy(f.y.data(), y.data(i, 0, 0), f.y.size());
    std::memcpy(f.u.data(), u.data(i, 0, 0), f.u.size());
    std::memcpy(f.v.data(), v.data(i, 0, 0), f.v.size());
    frames.push_back(std::move(f));
  }
  return frames;
}

py::tuple frames_to_arrays(const std::vector<YuvFrame>& frames) {
  const int n = static_cast<int>(frames.size());
  const int h = frames.at(0).height, w = frames.at(0).width;
  py::array_t<uint8_t> y({n, h, w});
  py::array_t<uint8_t> u({n, h / 2, w / 2});
  py::array_t<uint8_t> v({n, h / 2, w / 2});
  for (int i = 0; i < n; ++i) {
    std::memcpy(y.mutable_data(i, 0, 0), frames[i].y.data(), frames[i].y.size());
    std::memcpy(u.mutable_data(i, 0, 0), frames[i].u.data(), frames[i].u.size());
    std::memcpy(v.mutable_data(i, 0, 0), frames[i].v.data(), frames[i].v.size());
  }
  return py::make_tuple(y, u, v);
}

GopMode gop_from_string(const std::string& s) {
  if (s == "ra") return GopMode::kRa;
  if (s == "ldp") return GopMode::kLdp;
  if (s == "intra") return GopMode::kIntra;
  throw std::invalid_argument("gop must be 'ra', 'ldp' or 'intra'");
}

py::dict report_dict(const FrameReport& r) {
  py::dict d;
  d["display_index"] = r.display_index;
  d["type"] = frame_type_name(r.type);
  d["payload_bytes"] = r.payload_bytes;
  d["network_bytes"] = r.network_bytes;
  d["latent_bytes"] = r.latent_bytes;
  d["latent_share_pct"] = r.latent_share_pct;
  d["network_share_pct"] = r.network_share_pct;
  d["psnr_db"] = r.psnr_db;
  d["bpp"] = r.bpp;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "overfitted video codec: encode, decode, metrics";

  m.def(
      "encode",
      [](const U8Array& y, const U8Array& u, const U8Array& v, double lam, const std::string& gop,
         int intra_period, uint64_t seed, int iters_main, int iters_ste, int iters_net,
         int fps_num, int fps_den, bool disable_alpha, bool disable_beta, int workers) {
        EncodeConfig cfg;
        cfg.lambda = lam;
        cfg.seed = seed;
        cfg.iters_main = iters_main;
        cfg.iters_ste = iters_ste;
        cfg.iters_net = iters_net;
        cfg.disable_alpha = disable_alpha;
        cfg.disable_beta = disable_beta;
        auto frames = frames_from_arrays(y, u, v);
        auto result = encode_video(frames, gop_from_string(gop), intra_period,
                                   static_cast<uint16_t>(fps_num),
                                   static_cast<uint16_t>(fps_den), cfg, workers);
        py::dict summary;
        summary["rate_mbps"] = result.rate_mbps;
        summary["psnr_db"] = result.psnr_db;
        summary["stream_bytes"] = result.stream.size();
        py::list reports;
        for (const auto& r : result.reports) reports.append(report_dict(r));
        summary["frames"] = reports;
        return py::make_tuple(py::bytes(reinterpret_cast<const char*>(result.stream.data()),
                                        result.stream.size()),
                              summary);
      },
      py::arg("y"), py::arg("u"), py::arg("v"), py::arg("lam") = 0.002, py::arg("gop") = "ldp",
      py::arg("intra_period") = 32, py::arg("seed") = 0, py::arg("iters_main") = 20000,
      py::arg("iters_ste") = 2000, py::arg("iters_net") = 1000, py::arg("fps_num") = 30,
      py::arg("fps_den") = 1, py::arg("disable_alpha") = false, py::arg("disable_beta") = false,
      py::arg("workers") = 1,
      "Encode planar YUV 4:2:0 frames; returns (stream bytes, summary dict).");

  m.def(
      "decode",
      [](const py::bytes& stream) {
        const std::string_view bytes = stream;
        auto result = decode_video(std::span<const uint8_t>(
            reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size()));
        std::vector<YuvFrame> frames;
        frames.reserve(result.frames.size());
        for (const auto& f : result.frames) frames.push_back(f.to_yuv());
        py::dict info;
        info["width"] = result.header.width;
        info["height"] = result.header.height;
        info["frames"] = result.frames.size();
        const double pixels = static_cast<double>(result.header.width) * result.header.height *
                              static_cast<double>(result.frames.size());
        info["macs_per_pixel_mean"] = static_cast<double>(result.total_macs.total()) / pixels;
        auto arrays = frames_to_arrays(frames);
        return py::make_tuple(arrays[0], arrays[1], arrays[2], info);
      },
      py::arg("stream"), "Decode a stream; returns (y, u, v, info dict).");

  m.def(
      "psnr_420",
      [](const U8Array& y1, const U8Array& u1, const U8Array& v1, const U8Array& y2,
         const U8Array& u2, const U8Array& v2) {
        return sequence_psnr(frames_from_arrays(y1, u1, v1), frames_from_arrays(y2, u2, v2));
      },
      "Sequence PSNR (dB) between two planar YUV 4:2:0 arrays.");

  m.def(
      "complexity",
      [](const std::string& frame_type, int width, int height) {
        FrameType t = frame_type == "I"   ? FrameType::kIntra
                      : frame_type == "P" ? FrameType::kPred
                                          : FrameType::kBidir;
        const auto r = complexity_report(t, width, height);
        py::dict d;
        d["params_arm"] = r.params_arm;
        d["params_upsampling"] = r.params_upsampling;
        d["params_synthesis"] = r.params_synthesis;
        d["params_inter"] = r.params_inter;
        d["params_total"] = r.params_total;
        d["per_pixel_arm"] = r.per_pixel_arm;
        d["per_pixel_upsampling"] = r.per_pixel_upsampling;
        d["per_pixel_synthesis"] = r.per_pixel_synthesis;
        d["per_pixel_inter"] = r.per_pixel_inter;
        d["per_pixel_chroma"] = r.per_pixel_chroma;
        d["per_pixel_total"] = r.per_pixel_total;
        return d;
      },
      py::arg("frame_type"), py::arg("width"), py::arg("height"),
      "Analytic decoder census for one frame configuration.");

  m.def(
      "plan_gop",
      [](int n_frames, const std::string& mode, int intra_period) {
        py::list out;
        for (const auto& p : build_gop(n_frames, gop_from_string(mode), intra_period)) {
          py::dict d;
          d["type"] = frame_type_name(p.type);
          d["display_index"] = p.display_index;
          d["coding_index"] = p.coding_index;
          d["ref1"] = p.ref1;
          d["ref2"] = p.ref2;
          out.append(d);
        }
        return out;
      },
      py::arg("n_frames"), py::arg("mode"), py::arg("intra_period") = 32,
      "Frame plans in coding order.");

  m.def("bd_rate",
        [](const std::vector<std::pair<double, double>>& a,
           const std::vector<std::pair<double, double>>& b) {
          auto conv = [](const std::vector<std::pair<double, double>>& c) {
            std::vector<RdPoint> points;
            for (auto [r, p] : c) points.push_back({r, p});
            return points;
          };
          return bd_rate_percent(conv(a), conv(b));
        },
        "BD-rate (%) of curve b vs curve a; points are (rate_mbps, psnr_db).");
}
