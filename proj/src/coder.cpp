#include "ccv/coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ccv {

QuantizedCdf build_cdf(const Laplace& dist, int bound) {
  if (dist.b <= 0.0) throw std::invalid_argument("build_cdf: scale must be positive");
  if (bound < 0 || 2 * bound + 1 >= static_cast<int>(kCdfTotal))
    throw std::invalid_argument("build_cdf: bad symbol bound");
  const int n = 2 * bound + 1;

  QuantizedCdf cdf;
  cdf.bound = bound;
  cdf.cum.assign(static_cast<size_t>(n) + 1, 0);

  if (n == 1) {
    cdf.cum[1] = kCdfTotal;
    return cdf;
  }

  // Discretized Laplace masses with the tails folded into ±bound.
  std::vector<double> mass(static_cast<size_t>(n));
  double total = 0.0;
  for (int s = -bound; s <= bound; ++s) {
    double m;
    if (s == -bound)
      m = laplace_cdf(static_cast<double>(s) + 0.5, dist.mu, dist.b);
    else if (s == bound)
      m = 1.0 - laplace_cdf(static_cast<double>(s) - 0.5, dist.mu, dist.b);
    else
      m = laplace_cdf(static_cast<double>(s) + 0.5, dist.mu, dist.b) -
          laplace_cdf(static_cast<double>(s) - 0.5, dist.mu, dist.b);
    if (m < 0.0) m = 0.0;
    mass[static_cast<size_t>(s + bound)] = m;
    total += m;
  }
  if (total <= 0.0) {
    total = 1.0;
    mass[static_cast<size_t>(bound)] = 1.0;  // all on symbol 0
  }

  // One guaranteed count per symbol; the rest by largest remainder.
  const uint32_t scale = kCdfTotal - static_cast<uint32_t>(n);
  std::vector<uint32_t> counts(static_cast<size_t>(n), 1);
  std::vector<std::pair<double, int>> rem(static_cast<size_t>(n));
  uint32_t assigned = 0;
  for (int i = 0; i < n; ++i) {
    const double exact = mass[static_cast<size_t>(i)] / total * scale;
    const uint32_t base = static_cast<uint32_t>(exact);
    counts[static_cast<size_t>(i)] += base;
    assigned += base;
    rem[static_cast<size_t>(i)] = {exact - base, i};
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (uint32_t left = scale - assigned, i = 0; left > 0; --left, ++i)
    counts[static_cast<size_t>(rem[i % n].second)] += 1;

  for (int i = 0; i < n; ++i) cdf.cum[static_cast<size_t>(i) + 1] = cdf.cum[static_cast<size_t>(i)] + counts[static_cast<size_t>(i)];
  return cdf;
}

void RangeEncoder::shift_out() {
  out_.push_back(static_cast<uint8_t>(low_ >> 24));
  low_ = (low_ << 8) & 0xFFFFFFFFull;
  range_ <<= 8;
}

void RangeEncoder::encode(const QuantizedCdf& cdf, int symbol) {
  if (symbol < -cdf.bound || symbol > cdf.bound)
    throw std::invalid_argument("encode: symbol outside cdf range");
  const uint32_t r = range_ >> 16;
  low_ += static_cast<uint64_t>(r) * cdf.start(symbol);
  if (low_ >> 32) {
    // carry: propagate through previously emitted bytes
    for (size_t i = out_.size(); i-- > 0;) {
      if (out_[i] != 0xFF) {
        ++out_[i];
        break;
      }
      out_[i] = 0;
    }
    low_ &= 0xFFFFFFFFull;
  }
  range_ = r * cdf.freq(symbol);
  while (range_ < (1u << 24)) shift_out();
}

std::vector<uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 4; ++i) {
    out_.push_back(static_cast<uint8_t>(low_ >> 24));
    low_ = (low_ << 8) & 0xFFFFFFFFull;
  }
  std::vector<uint8_t> bytes = std::move(out_);
  out_.clear();
  low_ = 0;
  range_ = 0xFFFFFFFFu;
  return bytes;
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes) : bytes_(bytes) {
  if (bytes_.size() < 4) throw DecodeError("range decoder: truncated stream");
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | bytes_[pos_++];
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size()) throw DecodeError("range decoder: truncated stream");
  return bytes_[pos_++];
}

int RangeDecoder::decode(const QuantizedCdf& cdf) {
  const uint32_t r = range_ >> 16;
  uint32_t f = code_ / r;
  if (f > kCdfTotal - 1) f = kCdfTotal - 1;
  // largest symbol index with cum[idx] <= f
  const auto it = std::upper_bound(cdf.cum.begin(), cdf.cum.end(), f);
  const int idx = static_cast<int>(it - cdf.cum.begin()) - 1;
  const int symbol = idx - cdf.bound;
  code_ -= r * cdf.start(symbol);
  range_ = r * cdf.freq(symbol);
  while (range_ < (1u << 24)) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return symbol;
}

}  // namespace ccv
