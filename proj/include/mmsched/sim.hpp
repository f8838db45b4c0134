#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmsched/baselines.hpp"
#include "mmsched/channel.hpp"
#include "mmsched/random.hpp"

namespace mmsched {

struct SlotOutcome {
  std::uint64_t bit_errors = 0;
  std::uint64_t bits_sent = 0;
  /// log2(1 + SINR_u) for every UE; 0 for idle UEs.
  RVector rates;
  int active_ues = 0;
};

/// n_tx channel uses of y = H_t s + n in one slot. Active UEs send 16-QAM
/// symbols of energy Es, idle UEs nothing; the receiver applies the LMMSE
/// equalizer, removes its per-UE bias w_u^H h_u and makes hard decisions.
/// Bit errors are counted over active UEs only.
SlotOutcome run_slot(const CMatrix& h_eff, const RVector& c_t, const LinkParams& link,
                     std::uint64_t n_tx, Rng& rng);

enum class SchedulerKind { Optimization, Exhaustive, Greedy, Sus, Random, None, Unavailable };

struct SchedulerSpec {
  std::string name;
  SchedulerKind kind = SchedulerKind::None;
  CostKind cost = CostKind::PostLmmseMse;

  /// Schedule depends on N0 and is recomputed per SNR point.
  bool noise_aware() const {
    return kind == SchedulerKind::Optimization || kind == SchedulerKind::Exhaustive ||
           kind == SchedulerKind::Greedy;
  }
};

/// Parses identifiers such as "opt-mse", "es-rate", "greedy", "sus",
/// "random", "none". "css" and "chordal" parse to Unavailable.
SchedulerSpec parse_scheduler(const std::string& name);

struct ChannelSource {
  enum class Kind { Rayleigh, Geometric, File };
  Kind kind = Kind::Rayleigh;
  GeometricChannelParams geometric;
  /// Kind::File: channel CSVs, used round-robin over realizations.
  std::vector<std::filesystem::path> files;
};

struct CampaignConfig {
  ScenarioSpec scenario;
  ChannelSource channel_source;
  double eta_db = 6.0;
  std::vector<double> snr_grid_db;
  int num_channel_realizations = 100;
  std::uint64_t num_transmissions = 100000;
  std::vector<SchedulerSpec> schedulers;
  FbsConfig fbs;
  std::uint64_t es_budget = 1'000'000;
  double sus_eps = 0.4;
  std::uint64_t master_seed = 0;
  int workers = 1;

  void validate() const;
};

struct CellResult {
  std::uint64_t bit_errors = 0;
  std::uint64_t bits_sent = 0;
  double rate_sum = 0.0;
  std::uint64_t rate_count = 0;
  int repaired = 0;
  int failures = 0;

  double ber() const {
    return bits_sent == 0 ? 0.0 : static_cast<double>(bit_errors) / static_cast<double>(bits_sent);
  }
  double avg_rate() const {
    return rate_count == 0 ? 0.0 : rate_sum / static_cast<double>(rate_count);
  }
};

struct CampaignResult {
  CampaignConfig config;
  /// cells[scheduler][snr]
  std::vector<std::vector<CellResult>> cells;
  double wall_seconds = 0.0;

  const CellResult& cell(const std::string& scheduler, std::size_t snr_index) const;
};

/// Per realization: draw or load a channel, apply power control, compute each
/// scheduler's schedule (once, or per SNR point for noise-aware schedulers),
/// and transmit. Deterministic in master_seed regardless of `workers`.
CampaignResult run_campaign(const CampaignConfig& cfg);

/// ber.csv and rate.csv (rows: SNR, columns: schedulers), manifest.json and
/// timing.json. Everything except timing.json is a pure function of the
/// result.
void emit_results(const CampaignResult& result, const std::filesystem::path& dir);

CampaignConfig parse_campaign_config(const nlohmann::json& j);
CampaignConfig load_campaign_config(const std::filesystem::path& path);
nlohmann::json to_json(const CampaignConfig& cfg);

}  // namespace mmsched
