#pragma once

// Bit-exact range coder over quantized cumulative distributions. 32-bit
// range, 16-bit probability scale, big-endian renormalization bytes, 4-byte
// flush. Integer arithmetic only, so identical inputs produce identical
// bytes on every platform.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ccv/arm.hpp"

namespace ccv {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr uint32_t kCdfTotal = 1u << 16;

// Cumulative counts for the symbol alphabet [-bound, bound] on a 16-bit
// total scale. cum has 2*bound + 2 entries, cum.front() == 0,
// cum.back() == 65536, strictly increasing (every symbol has count >= 1).
struct QuantizedCdf {
  int bound = 0;
  std::vector<uint32_t> cum;

  int symbol_count() const { return 2 * bound + 1; }
  uint32_t start(int symbol) const { return cum[static_cast<size_t>(symbol + bound)]; }
  uint32_t freq(int symbol) const {
    return cum[static_cast<size_t>(symbol + bound) + 1] - cum[static_cast<size_t>(symbol + bound)];
  }
};

// Quantizes the discretized Laplace to integer counts: tails beyond ±bound
// fold into the edge symbols, every symbol keeps at least one count, and
// the remaining scale is split by largest remainder (ties to the lower
// symbol) so the result is deterministic.
QuantizedCdf build_cdf(const Laplace& dist, int bound);

class RangeEncoder {
 public:
  void encode(const QuantizedCdf& cdf, int symbol);
  // Terminates the stream with 4 bytes of coder state and returns the payload.
  std::vector<uint8_t> finish();

 private:
  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  std::vector<uint8_t> out_;

  void shift_out();
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> bytes);
  int decode(const QuantizedCdf& cdf);
  size_t consumed() const { return pos_; }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;

  uint8_t next_byte();
};

}  // namespace ccv
