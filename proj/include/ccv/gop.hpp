#pragma once

// Reference structures: low-delay P (a chain of P-frames), random access
// (dyadic B hierarchy between anchor frames), and all-intra.

#include <algorithm>
#include <string>
#include <vector>

#include "ccv/frame.hpp"

namespace ccv {

enum class GopMode : uint8_t { kRa = 0, kLdp = 1, kIntra = 2 };

inline const char* gop_mode_name(GopMode m) {
  switch (m) {
    case GopMode::kRa: return "ra";
    case GopMode::kLdp: return "ldp";
    case GopMode::kIntra: return "intra";
  }
  return "?";
}

struct FramePlan {
  FrameType type = FrameType::kIntra;
  int display_index = 0;
  int coding_index = 0;
  int ref1 = -1;  // display index of the first reference
  int ref2 = -1;  // display index of the second reference (B only)
  int level = 0;  // dependency depth; frames at one level are independent
};

// Frame plans in coding order. For random access, intra_period must be a
// power of two: each segment gets a P endpoint referencing the previous
// anchor and a breadth-first dyadic B hierarchy in between.
inline std::vector<FramePlan> build_gop(int n_frames, GopMode mode, int intra_period) {
  if (n_frames < 1) throw ConfigError("build_gop: need at least one frame");
  std::vector<FramePlan> plans;

  if (mode == GopMode::kIntra) {
    for (int i = 0; i < n_frames; ++i)
      plans.push_back({FrameType::kIntra, i, i, -1, -1, 0});
    return plans;
  }

  if (mode == GopMode::kLdp) {
    plans.push_back({FrameType::kIntra, 0, 0, -1, -1, 0});
    for (int i = 1; i < n_frames; ++i)
      plans.push_back({FrameType::kPred, i, i, i - 1, -1, i});
    return plans;
  }

  if (intra_period < 1 || (intra_period & (intra_period - 1)) != 0)
    throw ConfigError("build_gop: random access intra period must be a power of two, got " +
                      std::to_string(intra_period));

  plans.push_back({FrameType::kIntra, 0, 0, -1, -1, 0});
  std::vector<int> depth(static_cast<size_t>(n_frames), 0);
  int coding = 1;
  for (int a = 0; a < n_frames - 1; a += intra_period) {
    const int b = std::min(a + intra_period, n_frames - 1);
    if (b <= a) break;
    depth[static_cast<size_t>(b)] = depth[static_cast<size_t>(a)] + 1;
    plans.push_back({FrameType::kPred, b, coding++, a, -1, depth[static_cast<size_t>(b)]});
    // breadth-first midpoints
    std::vector<std::pair<int, int>> spans = {{a, b}};
    while (!spans.empty()) {
      std::vector<std::pair<int, int>> next;
      for (auto [lo, hi] : spans) {
        if (hi - lo < 2) continue;
        const int mid = (lo + hi) / 2;
        depth[static_cast<size_t>(mid)] =
            std::max(depth[static_cast<size_t>(lo)], depth[static_cast<size_t>(hi)]) + 1;
        plans.push_back({FrameType::kBidir, mid, coding++, lo, hi, depth[static_cast<size_t>(mid)]});
        next.emplace_back(lo, mid);
        next.emplace_back(mid, hi);
      }
      spans = std::move(next);
    }
  }
  return plans;
}

}  // namespace ccv
