// ccv command line: encode / decode / metrics / sweep.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ccv/encoder.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct EncodeArgs {
  std::string input, output, workdir = ".";
  int width = 0, height = 0, frames = 0;
  std::string gop = "ra";
  int intra_period = 32;
  std::vector<double> lambdas = {0.002};
  uint64_t seed = 0;
  int workers = 1;
  int fps_num = 30, fps_den = 1;
  bool disable_alpha = false, disable_beta = false;
  int iters_main = 20000, iters_ste = 2000, iters_net = 1000;
  int log_every = 100;
};

ccv::GopMode parse_gop(const std::string& s) {
  if (s == "ra") return ccv::GopMode::kRa;
  if (s == "ldp") return ccv::GopMode::kLdp;
  if (s == "intra") return ccv::GopMode::kIntra;
  throw ccv::ConfigError("unknown gop mode: " + s);
}

ccv::EncodeConfig make_config(const EncodeArgs& a, double lambda) {
  ccv::EncodeConfig cfg;
  cfg.lambda = lambda;
  cfg.iters_main = a.iters_main;
  cfg.iters_ste = a.iters_ste;
  cfg.iters_net = a.iters_net;
  cfg.disable_alpha = a.disable_alpha;
  cfg.disable_beta = a.disable_beta;
  cfg.seed = a.seed;
  cfg.log_every = a.log_every;
  cfg.validate();
  return cfg;
}

json frame_report_json(const ccv::FrameReport& r) {
  return json{{"display_index", r.display_index},
              {"type", ccv::frame_type_name(r.type)},
              {"payload_bytes", r.payload_bytes},
              {"network_bytes", r.network_bytes},
              {"latent_bytes", r.latent_bytes},
              {"est_latent_bits", r.est_latent_bits},
              {"est_network_bits", r.est_network_bits},
              {"latent_share_pct", r.latent_share_pct},
              {"network_share_pct", r.network_share_pct},
              {"psnr_db", r.psnr_db},
              {"bpp", r.bpp},
              {"clamped_latents", r.clamped_latents},
              {"restarts", r.restarts}};
}

void write_frame_log(const fs::path& dir, const ccv::FrameReport& r, double lambda) {
  std::ofstream log(dir / ("enc_frame_" + std::to_string(r.display_index) + ".jsonl"));
  for (const auto& t : r.trace) {
    log << json{{"lambda", lambda},        {"phase", t.phase},   {"iter", t.iter},
                {"loss", t.loss},          {"mse", t.mse},       {"rate_bpp", t.rate_bpp},
                {"psnr_db", t.psnr_db}}
               .dump()
        << "\n";
  }
}

json encode_once(const EncodeArgs& a, double lambda, const std::string& out_path) {
  const auto frames = ccv::read_yuv(a.input, a.width, a.height, a.frames);
  const ccv::GopMode mode = parse_gop(a.gop);
  const ccv::EncodeConfig cfg = make_config(a, lambda);
  fs::create_directories(a.workdir);

  auto result = ccv::encode_video(frames, mode, a.intra_period,
                                  static_cast<uint16_t>(a.fps_num),
                                  static_cast<uint16_t>(a.fps_den), cfg, a.workers);
  {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(result.stream.data()),
              static_cast<std::streamsize>(result.stream.size()));
    if (!out) throw ccv::IoError("cannot write " + out_path);
  }

  uint64_t latent_bytes = 0, network_bytes = 0;
  json frame_list = json::array();
  for (const auto& r : result.reports) {
    latent_bytes += r.latent_bytes;
    network_bytes += r.network_bytes;
    write_frame_log(a.workdir, r, lambda);
    frame_list.push_back(frame_report_json(r));
  }
  const double coded = static_cast<double>(latent_bytes + network_bytes);
  const auto macs = ccv::complexity_report(
      mode == ccv::GopMode::kIntra ? ccv::FrameType::kIntra
      : mode == ccv::GopMode::kLdp ? ccv::FrameType::kPred
                                   : ccv::FrameType::kBidir,
      a.width, a.height, a.disable_alpha, a.disable_beta);

  json summary{{"input", a.input},
               {"output", out_path},
               {"width", a.width},
               {"height", a.height},
               {"frames", frames.size()},
               {"gop", a.gop},
               {"intra_period", a.intra_period},
               {"lambda", lambda},
               {"seed", a.seed},
               {"stream_bytes", result.stream.size()},
               {"rate_mbps", result.rate_mbps},
               {"psnr_db", result.psnr_db},
               {"latent_share_pct", coded > 0 ? 100.0 * latent_bytes / coded : 0.0},
               {"network_share_pct", coded > 0 ? 100.0 * network_bytes / coded : 0.0},
               {"worst_case_macs_per_pixel", macs.per_pixel_total},
               {"frames_detail", frame_list}};
  return summary;
}

int cmd_encode(const EncodeArgs& a) {
  json summary = encode_once(a, a.lambdas.at(0), a.output);
  std::ofstream sf(fs::path(a.workdir) / "summary.json");
  sf << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int cmd_decode(const std::string& input, const std::string& output) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw ccv::IoError("cannot open " + input);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  auto result = ccv::decode_video(bytes);
  std::vector<ccv::YuvFrame> frames;
  frames.reserve(result.frames.size());
  for (const auto& f : result.frames) frames.push_back(f.to_yuv());
  ccv::write_yuv(output, frames);

  const double pixels =
      static_cast<double>(result.header.width) * result.header.height * frames.size();
  json per_frame = json::array();
  for (const auto& i : result.info) {
    per_frame.push_back(json{{"display_index", i.header.display_index},
                             {"type", ccv::frame_type_name(i.header.type)},
                             {"payload_bytes", i.payload_bytes},
                             {"macs_per_pixel",
                              static_cast<double>(i.macs.total()) /
                                  (static_cast<double>(result.header.width) * result.header.height)}});
  }
  json summary{{"input", input},
               {"output", output},
               {"width", result.header.width},
               {"height", result.header.height},
               {"frames", frames.size()},
               {"fps_num", result.header.fps_num},
               {"fps_den", result.header.fps_den},
               {"gop", ccv::gop_mode_name(result.header.gop_mode)},
               {"stream_bytes", bytes.size()},
               {"macs_per_pixel_mean", static_cast<double>(result.total_macs.total()) / pixels},
               {"frames_detail", per_frame}};
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int cmd_metrics(const std::string& ref_path, const std::string& dec_path, int width, int height,
                int n_frames) {
  const auto ref = ccv::read_yuv(ref_path, width, height, n_frames);
  const auto dec = ccv::read_yuv(dec_path, width, height, static_cast<int>(ref.size()));
  json per_frame = json::array();
  for (size_t i = 0; i < ref.size(); ++i) {
    const double mse = ccv::mse_420(ref[i], dec[i]);
    per_frame.push_back(
        json{{"frame", i}, {"mse", mse}, {"psnr_db", ccv::psnr_from_mse(mse)}});
  }
  const double psnr = ccv::sequence_psnr(ref, dec);
  json summary{{"ref", ref_path},
               {"dec", dec_path},
               {"frames", ref.size()},
               {"psnr_db", psnr},
               {"frames_detail", per_frame}};
  std::cout << summary.dump(2) << std::endl;
  std::fprintf(stderr, "\nframe    mse          psnr_db\n");
  for (size_t i = 0; i < ref.size(); ++i) {
    std::fprintf(stderr, "%5zu    %.3e    %8.4f\n", i, per_frame[i]["mse"].get<double>(),
                 per_frame[i]["psnr_db"].get<double>());
  }
  std::fprintf(stderr, "sequence psnr: %.4f dB\n", psnr);
  return 0;
}

std::vector<ccv::RdPoint> read_anchor_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ccv::IoError("cannot open " + path);
  std::vector<ccv::RdPoint> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    double rate, psnr;
    if (std::sscanf(line.c_str(), "%lf,%lf", &rate, &psnr) == 2)
      points.push_back({rate, psnr});
  }
  if (points.empty()) throw ccv::IoError(path + ": no rate,psnr rows found");
  return points;
}

int cmd_sweep(const EncodeArgs& a, const std::string& anchor_csv) {
  if (a.lambdas.size() < 2) throw ccv::ConfigError("sweep: need at least two lambdas");
  fs::create_directories(a.workdir);
  json points = json::array();
  std::vector<ccv::RdPoint> curve;
  for (double lambda : a.lambdas) {
    char name[64];
    std::snprintf(name, sizeof(name), "sweep_lambda_%g.ccv", lambda);
    const std::string out_path = (fs::path(a.workdir) / name).string();
    json s = encode_once(a, lambda, out_path);
    curve.push_back({s["rate_mbps"].get<double>(), s["psnr_db"].get<double>()});
    points.push_back(json{{"lambda", lambda},
                          {"rate_mbps", s["rate_mbps"]},
                          {"psnr_db", s["psnr_db"]},
                          {"stream", out_path},
                          {"latent_share_pct", s["latent_share_pct"]},
                          {"network_share_pct", s["network_share_pct"]}});
  }
  json summary{{"points", points}};
  if (!anchor_csv.empty()) {
    summary["anchor_csv"] = anchor_csv;
    summary["bd_rate_vs_anchor_pct"] = ccv::bd_rate_percent(read_anchor_csv(anchor_csv), curve);
  }
  std::ofstream sf(fs::path(a.workdir) / "sweep.json");
  sf << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << std::endl;
  std::fprintf(stderr, "\nlambda      rate_mbps    psnr_db\n");
  for (const auto& p : points)
    std::fprintf(stderr, "%-10g  %9.4f    %8.4f\n", p["lambda"].get<double>(),
                 p["rate_mbps"].get<double>(), p["psnr_db"].get<double>());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ccv: an overfitted video codec with a ~800 parameter decoder"};
  app.require_subcommand(1);

  EncodeArgs ea;
  std::string dec_in, dec_out, met_ref, met_dec, anchor_csv;
  int met_w = 0, met_h = 0, met_frames = 0;

  auto add_encode_opts = [&](CLI::App* c, bool multi_lambda) {
    c->add_option("--input", ea.input, "raw YUV 4:2:0 input file")->required();
    c->add_option("--width", ea.width, "luma width")->required();
    c->add_option("--height", ea.height, "luma height")->required();
    c->add_option("--frames", ea.frames, "frame count (0 = all)");
    c->add_option("--gop", ea.gop, "gop mode: ra | ldp | intra")
        ->check(CLI::IsMember({"ra", "ldp", "intra"}));
    c->add_option("--intra-period", ea.intra_period, "random-access intra period");
    if (multi_lambda)
      c->add_option("--lambdas", ea.lambdas, "rate weights")->delimiter(',')->required();
    else
      c->add_option("--lambda", ea.lambdas.at(0), "rate weight");
    c->add_option("--seed", ea.seed, "rng seed");
    c->add_option("--workers", ea.workers, "parallel encodes of dependency-free frames");
    c->add_option("--fps-num", ea.fps_num, "framerate numerator");
    c->add_option("--fps-den", ea.fps_den, "framerate denominator");
    c->add_flag("--disable-alpha", ea.disable_alpha, "force the prediction gate to 1");
    c->add_flag("--disable-beta", ea.disable_beta, "force the reference weighting to 1/2");
    c->add_option("--iters-main", ea.iters_main, "noise-proxy iterations");
    c->add_option("--iters-ste", ea.iters_ste, "straight-through iterations");
    c->add_option("--iters-net", ea.iters_net, "post-quantization latent iterations");
    c->add_option("--log-every", ea.log_every, "trace interval");
    c->add_option("--workdir", ea.workdir, "directory for logs and summaries");
  };

  CLI::App* enc = app.add_subcommand("encode", "encode a raw video");
  add_encode_opts(enc, false);
  enc->add_option("--output", ea.output, "output stream path")->required();

  CLI::App* dec = app.add_subcommand("decode", "decode a stream to raw YUV");
  dec->add_option("--input", dec_in, "input stream")->required();
  dec->add_option("--output", dec_out, "output YUV path")->required();

  CLI::App* met = app.add_subcommand("metrics", "compare two raw YUV files");
  met->add_option("--ref", met_ref, "reference YUV")->required();
  met->add_option("--dec", met_dec, "decoded YUV")->required();
  met->add_option("--width", met_w, "luma width")->required();
  met->add_option("--height", met_h, "luma height")->required();
  met->add_option("--frames", met_frames, "frame count (0 = all)");

  CLI::App* swp = app.add_subcommand("sweep", "encode at several lambdas, report an RD curve");
  add_encode_opts(swp, true);
  swp->add_option("--anchor-csv", anchor_csv, "anchor RD points (rate_mbps,psnr_db per line)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (enc->parsed()) return cmd_encode(ea);
    if (dec->parsed()) return cmd_decode(dec_in, dec_out);
    if (met->parsed()) return cmd_metrics(met_ref, met_dec, met_w, met_h, met_frames);
    if (swp->parsed()) return cmd_sweep(ea, anchor_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
