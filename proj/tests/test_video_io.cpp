#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "ccv/video_io.hpp"

using namespace ccv;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / (std::string("ccv_test_") + name);
}

YuvFrame random_frame(int w, int h, uint32_t seed) {
  std::mt19937 gen(seed);
  YuvFrame f(w, h);
  for (auto& x : f.y) x = static_cast<uint8_t>(gen() & 0xFF);
  for (auto& x : f.u) x = static_cast<uint8_t>(gen() & 0xFF);
  for (auto& x : f.v) x = static_cast<uint8_t>(gen() & 0xFF);
  return f;
}

}  // namespace

TEST_SUITE_BEGIN("video_io");

TEST_CASE("yuv write/read round-trip and size formula") {
  const auto path = temp_file("roundtrip.yuv");
  std::vector<YuvFrame> frames = {random_frame(16, 12, 201), random_frame(16, 12, 202),
                                  random_frame(16, 12, 203)};
  write_yuv(path.string(), frames);
  CHECK(fs::file_size(path) == 3u * (16 * 12 * 3 / 2));

  const auto back = read_yuv(path.string(), 16, 12, 3);
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back[i].y == frames[i].y);
    CHECK(back[i].u == frames[i].u);
    CHECK(back[i].v == frames[i].v);
  }
  fs::remove(path);
}

TEST_CASE("short file is an explicit error") {
  const auto path = temp_file("short.yuv");
  {
    std::ofstream out(path, std::ios::binary);
    std::vector<char> junk(100, 7);
    out.write(junk.data(), static_cast<std::streamsize>(junk.size()));
  }
  CHECK_THROWS_AS(read_yuv(path.string(), 16, 12, 2), IoError);
  fs::remove(path);
}

TEST_CASE("weighted 4:2:0 mse") {
  YuvFrame a = random_frame(8, 8, 204);
  CHECK(mse_420(a, a) == 0.0);

  // error only in Y with plane mse m -> total 4/6 m
  YuvFrame b = a;
  for (auto& x : b.y) x = static_cast<uint8_t>(x ^ 0x04);
  double m = 0.0;
  for (size_t i = 0; i < a.y.size(); ++i) {
    const double d = (a.y[i] - b.y[i]) / 255.0;
    m += d * d;
  }
  m /= static_cast<double>(a.y.size());
  CHECK(mse_420(a, b) == doctest::Approx(4.0 / 6.0 * m).epsilon(1e-12));

  // uniform offset d on all planes -> d^2 (weights sum to 1)
  YuvFrame c(8, 8);
  YuvFrame d(8, 8);
  for (auto* p : {&c.y, &c.u, &c.v})
    for (auto& x : *p) x = 100;
  for (auto* p : {&d.y, &d.u, &d.v})
    for (auto& x : *p) x = 110;
  const double off = 10.0 / 255.0;
  CHECK(mse_420(c, d) == doctest::Approx(off * off).epsilon(1e-12));

  // symmetry
  CHECK(mse_420(a, b) == mse_420(b, a));
}

TEST_CASE("psnr values") {
  CHECK(psnr_from_mse(0.0) == 99.0);  // identical content is capped
  const double mse = 1.0 / (255.0 * 255.0);
  CHECK(psnr_from_mse(mse) == doctest::Approx(48.1308).epsilon(1e-4));
}

TEST_CASE("sequence rate in Mbits per second") {
  // 33 frames, 1 Mbit total, 30 fps -> 30/33 Mbit/s
  CHECK(sequence_rate_mbps(125000, 30, 1, 33) == doctest::Approx(30.0 / 33.0).epsilon(1e-12));
}

TEST_CASE("bd-rate of identical curves is zero") {
  std::vector<RdPoint> a = {{0.5, 30}, {1.0, 33}, {2.0, 36}, {4.0, 39}};
  CHECK(bd_rate_percent(a, a) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("bd-rate of a doubled-rate curve is +100 percent") {
  std::vector<RdPoint> a = {{0.5, 30}, {1.0, 33}, {2.0, 36}, {4.0, 39}};
  std::vector<RdPoint> b;
  for (auto p : a) b.push_back({2.0 * p.rate_mbps, p.psnr_db});
  CHECK(bd_rate_percent(a, b) == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(bd_rate_percent(b, a) == doctest::Approx(-50.0).epsilon(1e-6));
}

TEST_CASE("bd-rate input validation") {
  std::vector<RdPoint> a = {{0.5, 30}, {1.0, 33}, {2.0, 36}, {4.0, 39}};
  std::vector<RdPoint> three = {{0.5, 30}, {1.0, 33}, {2.0, 36}};
  CHECK_THROWS_AS(bd_rate_percent(a, three), std::invalid_argument);
  std::vector<RdPoint> disjoint = {{0.5, 50}, {1.0, 53}, {2.0, 56}, {4.0, 59}};
  CHECK_THROWS_AS(bd_rate_percent(a, disjoint), std::invalid_argument);
}

TEST_CASE("complexity census: B-frame parameters are 807") {
  const auto r = complexity_report(FrameType::kBidir, 1920, 1080);
  CHECK(r.params_arm == 338);
  CHECK(r.params_upsampling == 64);
  CHECK(r.params_synthesis == 405);
  CHECK(r.params_inter == 0);
  CHECK(r.params_total == 807);
}

TEST_CASE("complexity census: 1080p B-frame multiplication budget") {
  const auto r = complexity_report(FrameType::kBidir, 1920, 1080);
  CHECK(r.per_pixel_total >= 880.0);
  CHECK(r.per_pixel_total <= 960.0);
  CHECK(r.per_pixel_arm == doctest::Approx(415.0).epsilon(0.10));
  CHECK(r.per_pixel_upsampling == doctest::Approx(130.0).epsilon(0.10));
  CHECK(r.per_pixel_synthesis == doctest::Approx(369.0).epsilon(0.10));
  CHECK(r.per_pixel_inter == doctest::Approx(10.0).epsilon(0.10));
}

TEST_CASE("complexity census: I-frame synthesis is 189 per pixel") {
  const auto r = complexity_report(FrameType::kIntra, 1920, 1080);
  CHECK(r.params_synthesis == 213);
  CHECK(r.per_pixel_synthesis == doctest::Approx(189.0).epsilon(1e-9));
  CHECK(r.per_pixel_inter == 0.0);
}

TEST_SUITE_END();
