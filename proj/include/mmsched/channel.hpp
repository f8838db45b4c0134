#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mmsched/types.hpp"

namespace mmsched {

/// Complex B x U uplink channel (B receive antennas, U single-antenna UEs).
/// Construction rejects non-finite entries and all-zero columns.
class ChannelMatrix {
 public:
  explicit ChannelMatrix(CMatrix entries);

  const CMatrix& entries() const { return entries_; }
  Eigen::Index antennas() const { return entries_.rows(); }
  Eigen::Index ues() const { return entries_.cols(); }

  /// Squared Euclidean norm of every column.
  RVector column_energies() const { return entries_.colwise().squaredNorm().transpose(); }

  bool operator==(const ChannelMatrix& other) const {
    return entries_.rows() == other.entries_.rows() &&
           entries_.cols() == other.entries_.cols() && entries_ == other.entries_;
  }

 private:
  CMatrix entries_;
};

/// Effective channel H = H_raw * diag(delta) after receive-power control.
struct PowerControlledChannel {
  CMatrix effective;
  RVector coefficients;
  double eta_db = 6.0;
};

struct GeometricChannelParams {
  int num_paths = 4;
  double angle_spread_deg = 10.0;
  double antenna_spacing_wavelengths = 0.5;
  /// Power decay between consecutive paths in dB; path l carries
  /// 10^(-l * decay / 10) before normalization to unit total power.
  double path_decay_db = 6.0;
  /// Per-UE nominal angles in degrees. Empty: drawn uniformly in
  /// [-max_nominal_angle_deg, max_nominal_angle_deg].
  std::vector<double> nominal_angles_deg;
  double max_nominal_angle_deg = 60.0;
  /// Unit-gain deterministic paths instead of Rayleigh-faded path gains.
  bool deterministic_gains = false;
  std::uint64_t seed = 0;

  void validate() const;
};

ChannelMatrix generate_rayleigh(Eigen::Index antennas, Eigen::Index ues, std::uint64_t seed);

/// ULA response exp(j 2 pi d b sin(theta)), b = 0..B-1.
CVector steering_vector(Eigen::Index antennas, double spacing_wavelengths, double angle_deg);

ChannelMatrix generate_geometric(Eigen::Index antennas, Eigen::Index ues,
                                 const GeometricChannelParams& params);

/// Per-UE gains delta_u with
///   delta_u^2 = min(||h_u||^2, 10^(eta/10) min_u' ||h_u'||^2) / ||h_u||^2
/// so the strongest receive power is at most eta dB above the weakest.
PowerControlledChannel apply_power_control(const ChannelMatrix& channel, double eta_db);

// ---------------------------------------------------------------------------
// CSV ingestion: header `B,U`, then B*U lines `row,col,real,imag` (row-major).

class ChannelParseError : public std::runtime_error {
 public:
  enum class Kind { MissingFile, Empty, MalformedRow, DimensionMismatch, InvalidChannel };

  ChannelParseError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

ChannelMatrix load_channel_csv(const std::filesystem::path& path);
void write_channel_csv(const ChannelMatrix& channel, const std::filesystem::path& path);

}  // namespace mmsched
