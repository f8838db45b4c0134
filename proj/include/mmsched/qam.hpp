#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace mmsched {

/// Gray-mapped 16-QAM with unit average energy. Bits b3 b2 b1 b0 (in stream
/// order) select I from (b3 b2) and Q from (b1 b0) with
///   00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3,
/// scaled by 1/sqrt(10).
namespace qam16 {

inline constexpr int kBitsPerSymbol = 4;

/// Symbol for the 4-bit label (b3 b2 b1 b0) packed as an integer 0..15.
std::complex<double> map_label(unsigned label);

/// Nearest constellation point; ties go to the lexicographically smaller
/// label.
unsigned demap_label(std::complex<double> symbol);

}  // namespace qam16

/// Bits are 0/1 bytes; the length must be a multiple of 4.
std::vector<std::complex<double>> qam16_modulate(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> qam16_demodulate(std::span<const std::complex<double>> symbols);

}  // namespace mmsched
