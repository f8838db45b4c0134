#include "mmsched/qam.hpp"

#include <cmath>

#include "mmsched/types.hpp"

namespace mmsched {

namespace qam16 {

namespace {

// Gray pair (high bit, low bit) -> amplitude level.
constexpr int kLevel[4] = {-3, -1, +3, +1};  // index = 2*hi + lo: 00, 01, 10, 11

const double kScale = 1.0 / std::sqrt(10.0);

// Hard decision on one axis. Decision thresholds at -2, 0, +2 (unscaled);
// on a threshold the smaller Gray label wins: -2 -> 00, 0 -> 01, +2 -> 10.
unsigned axis_label(double x) {
  const double v = x / kScale;
  if (v <= -2.0) return 0b00;
  if (v <= 0.0) return 0b01;
  if (v < 2.0) return 0b11;
  return 0b10;
}

}  // namespace

std::complex<double> map_label(unsigned label) {
  const int i_level = kLevel[(label >> 2) & 0b11];
  const int q_level = kLevel[label & 0b11];
  return {i_level * kScale, q_level * kScale};
}

unsigned demap_label(std::complex<double> symbol) {
  return (axis_label(symbol.real()) << 2) | axis_label(symbol.imag());
}

}  // namespace qam16

std::vector<std::complex<double>> qam16_modulate(std::span<const std::uint8_t> bits) {
  if (bits.size() % qam16::kBitsPerSymbol != 0) {
    throw InvalidArgument("qam16_modulate: bit count must be a multiple of 4");
  }
  std::vector<std::complex<double>> symbols(bits.size() / qam16::kBitsPerSymbol);
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    unsigned label = 0;
    for (int b = 0; b < qam16::kBitsPerSymbol; ++b) {
      const std::uint8_t bit = bits[s * qam16::kBitsPerSymbol + b];
      if (bit > 1) throw InvalidArgument("qam16_modulate: bits must be 0 or 1");
      label = (label << 1) | bit;
    }
    symbols[s] = qam16::map_label(label);
  }
  return symbols;
}

std::vector<std::uint8_t> qam16_demodulate(std::span<const std::complex<double>> symbols) {
  std::vector<std::uint8_t> bits(symbols.size() * qam16::kBitsPerSymbol);
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    const unsigned label = qam16::demap_label(symbols[s]);
    for (int b = 0; b < qam16::kBitsPerSymbol; ++b) {
      bits[s * qam16::kBitsPerSymbol + b] =
          static_cast<std::uint8_t>((label >> (qam16::kBitsPerSymbol - 1 - b)) & 1U);
    }
  }
  return bits;
}

}  // namespace mmsched
