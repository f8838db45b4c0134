#include "mmsched/sim.hpp"

#include <bit>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include "mmsched/parallel.hpp"
#include "mmsched/qam.hpp"

namespace mmsched {

namespace {

constexpr std::uint64_t kChannelTag = 0x10;
constexpr std::uint64_t kTransmitTag = 0x11;
constexpr std::uint64_t kRandomTag = 0x12;
constexpr std::uint64_t kOptTag = 0x13;

constexpr std::size_t kBlock = 2048;

}  // namespace

SlotOutcome run_slot(const CMatrix& h_eff, const RVector& c_t, const LinkParams& link,
                     std::uint64_t n_tx, Rng& rng) {
  link.validate();
  if (c_t.size() != h_eff.cols()) throw InvalidArgument("run_slot: mask length must equal U");
  if (!(c_t.array() == 0.0 || c_t.array() == 1.0).all()) {
    throw InvalidArgument("run_slot: slot mask must be binary");
  }
  const Eigen::Index antennas = h_eff.rows();
  const Eigen::Index ues = h_eff.cols();

  const CMatrix h_t = mask_channel(h_eff, c_t);
  const CMatrix w = lmmse_matrix(h_t, link);

  SlotOutcome out;
  out.rates = RVector::Zero(ues);
  std::vector<Eigen::Index> active;
  for (Eigen::Index u = 0; u < ues; ++u) {
    if (c_t(u) == 1.0) {
      active.push_back(u);
      out.rates(u) = std::log2(1.0 + sinr_per_ue(w, h_t, u, link));
    }
  }
  out.active_ues = static_cast<int>(active.size());
  if (active.empty() || n_tx == 0) return out;

  const auto n_active = static_cast<Eigen::Index>(active.size());
  CMatrix h_a(antennas, n_active);
  CMatrix w_a(antennas, n_active);
  for (Eigen::Index a = 0; a < n_active; ++a) {
    h_a.col(a) = h_t.col(active[a]);
    w_a.col(a) = w.col(active[a]);
  }
  // Unbiased estimates: divide row a of W^H H by its diagonal entry.
  const CMatrix w_h_a = w_a.adjoint();
  CVector bias(n_active);
  for (Eigen::Index a = 0; a < n_active; ++a) bias(a) = w_h_a.row(a) * h_a.col(a);

  const double amplitude = std::sqrt(link.es);
  std::vector<unsigned> labels;
  CMatrix tx;
  CMatrix rx;
  for (std::uint64_t done = 0; done < n_tx;) {
    const auto block = static_cast<Eigen::Index>(std::min<std::uint64_t>(kBlock, n_tx - done));
    labels.resize(static_cast<std::size_t>(block * n_active));
    tx.resize(n_active, block);
    for (Eigen::Index n = 0; n < block; ++n) {
      std::uint64_t word = 0;
      int left = 0;
      for (Eigen::Index a = 0; a < n_active; ++a) {
        if (left == 0) {
          word = rng.next_u64();
          left = 16;
        }
        const auto label = static_cast<unsigned>(word & 0xF);
        word >>= 4;
        --left;
        labels[static_cast<std::size_t>(n * n_active + a)] = label;
        tx(a, n) = amplitude * qam16::map_label(label);
      }
    }
    rx = h_a * tx;
    const double noise_var = link.n0;
    for (Eigen::Index n = 0; n < block; ++n) {
      for (Eigen::Index b = 0; b < antennas; ++b) rx(b, n) += rng.complex_normal(noise_var);
    }
    const CMatrix estimates = w_h_a * rx;
    for (Eigen::Index n = 0; n < block; ++n) {
      for (Eigen::Index a = 0; a < n_active; ++a) {
        const std::complex<double> s = estimates(a, n) / (bias(a) * amplitude);
        const unsigned decided = qam16::demap_label(s);
        const unsigned sent = labels[static_cast<std::size_t>(n * n_active + a)];
        out.bit_errors += static_cast<std::uint64_t>(std::popcount(decided ^ sent));
      }
    }
    out.bits_sent += static_cast<std::uint64_t>(block) * static_cast<std::uint64_t>(n_active) *
                     qam16::kBitsPerSymbol;
    done += static_cast<std::uint64_t>(block);
  }
  return out;
}

SchedulerSpec parse_scheduler(const std::string& name) {
  auto cost_suffix = [&](const std::string& prefix) {
    return parse_cost_kind(name.substr(prefix.size()));
  };
  if (name.rfind("opt-", 0) == 0) return {name, SchedulerKind::Optimization, cost_suffix("opt-")};
  if (name.rfind("es-", 0) == 0) return {name, SchedulerKind::Exhaustive, cost_suffix("es-")};
  if (name == "greedy") return {name, SchedulerKind::Greedy, CostKind::PostLmmseSumRate};
  if (name == "sus") return {name, SchedulerKind::Sus, CostKind::PostLmmseMse};
  if (name == "random") return {name, SchedulerKind::Random, CostKind::PostLmmseMse};
  if (name == "none" || name == "no-scheduling") {
    return {"none", SchedulerKind::None, CostKind::PostLmmseMse};
  }
  if (name == "css" || name == "chordal") {
    return {name, SchedulerKind::Unavailable, CostKind::PostLmmseMse};
  }
  throw InvalidArgument("unknown scheduler: " + name);
}

void CampaignConfig::validate() const {
  scenario.validate();
  if (snr_grid_db.empty()) throw InvalidArgument("campaign: snr_grid_db must not be empty");
  if (num_channel_realizations < 1) {
    throw InvalidArgument("campaign: num_channel_realizations must be >= 1");
  }
  if (num_transmissions < 1) throw InvalidArgument("campaign: num_transmissions must be >= 1");
  if (schedulers.empty()) throw InvalidArgument("campaign: no schedulers configured");
  if (!(eta_db >= 0.0)) throw InvalidArgument("campaign: eta_db must be >= 0");
  if (channel_source.kind == ChannelSource::Kind::File && channel_source.files.empty()) {
    throw InvalidArgument("campaign: file channel source needs at least one path");
  }
  if (channel_source.kind == ChannelSource::Kind::Geometric) channel_source.geometric.validate();
  fbs.validate();
  for (const auto& s : schedulers) {
    if ((s.kind == SchedulerKind::Greedy || s.kind == SchedulerKind::Sus ||
         s.kind == SchedulerKind::Random) &&
        scenario.t_s != 1) {
      throw InvalidArgument("campaign: scheduler " + s.name + " requires t_s = 1");
    }
  }
}

const CellResult& CampaignResult::cell(const std::string& scheduler, std::size_t snr_index) const {
  for (std::size_t s = 0; s < config.schedulers.size(); ++s) {
    if (config.schedulers[s].name == scheduler) return cells.at(s).at(snr_index);
  }
  throw InvalidArgument("no scheduler named " + scheduler + " in the campaign");
}

namespace {

ChannelMatrix realization_channel(const CampaignConfig& cfg, int r) {
  const auto& src = cfg.channel_source;
  const std::uint64_t seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(r), kChannelTag);
  switch (src.kind) {
    case ChannelSource::Kind::Rayleigh:
      return generate_rayleigh(cfg.scenario.antennas, cfg.scenario.ues, seed);
    case ChannelSource::Kind::Geometric: {
      GeometricChannelParams p = src.geometric;
      p.seed = seed;
      return generate_geometric(cfg.scenario.antennas, cfg.scenario.ues, p);
    }
    case ChannelSource::Kind::File: {
      ChannelMatrix h = load_channel_csv(src.files[static_cast<std::size_t>(r) % src.files.size()]);
      if (h.antennas() != cfg.scenario.antennas || h.ues() != cfg.scenario.ues) {
        throw InvalidArgument("campaign: channel file shape does not match the scenario");
      }
      return h;
    }
  }
  throw InvalidArgument("campaign: unknown channel source");
}

ScheduleMatrix compute_schedule(const CampaignConfig& cfg, const SchedulerSpec& s,
                                const CMatrix& h, const LinkParams& link, int r, bool& repaired) {
  const auto& scen = cfg.scenario;
  repaired = false;
  switch (s.kind) {
    case SchedulerKind::Optimization: {
      FbsConfig fbs = cfg.fbs;
      fbs.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(r), kOptTag);
      fbs.workers = 1;
      const CostFunctionSpec spec{s.cost, link, 0.0};
      ScheduleSolution sol = solve(h, spec, scen.constraints(), fbs);
      repaired = sol.feasibility_repaired;
      return sol.schedule;
    }
    case SchedulerKind::Exhaustive: {
      const CostFunctionSpec spec{s.cost, link, 0.0};
      return exhaustive_search(h, spec, scen, cfg.es_budget).schedule;
    }
    case SchedulerKind::Greedy:
      return greedy_sumrate(h, link, scen);
    case SchedulerKind::Sus:
      return sus(h, scen, cfg.sus_eps);
    case SchedulerKind::Random:
      return random_schedule(scen, derive_seed(cfg.master_seed, static_cast<std::uint64_t>(r),
                                               kRandomTag));
    case SchedulerKind::None:
      return no_scheduling(scen.ues, scen.slots);
    case SchedulerKind::Unavailable:
      break;
  }
  throw InvalidArgument("scheduler " + s.name + " is not available");
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_sched = cfg.schedulers.size();
  const std::size_t n_snr = cfg.snr_grid_db.size();
  const auto n_real = static_cast<std::size_t>(cfg.num_channel_realizations);

  using Grid = std::vector<std::vector<CellResult>>;
  std::vector<Grid> per_realization(n_real, Grid(n_sched, std::vector<CellResult>(n_snr)));

  parallel_for(n_real, cfg.workers, [&](std::size_t r) {
    Grid& grid = per_realization[r];
    const ChannelMatrix raw = realization_channel(cfg, static_cast<int>(r));
    const CMatrix h = apply_power_control(raw, cfg.eta_db).effective;

    for (std::size_t s = 0; s < n_sched; ++s) {
      const SchedulerSpec& sched = cfg.schedulers[s];
      if (sched.kind == SchedulerKind::Unavailable) continue;
      std::optional<ScheduleMatrix> fixed;
      bool fixed_repaired = false;
      bool failed = false;
      for (std::size_t i = 0; i < n_snr && !failed; ++i) {
        const LinkParams link = LinkParams::from_snr_db(cfg.snr_grid_db[i]);
        std::optional<ScheduleMatrix> schedule;
        bool repaired = false;
        try {
          if (sched.noise_aware()) {
            schedule = compute_schedule(cfg, sched, h, link, static_cast<int>(r), repaired);
          } else {
            if (!fixed) fixed = compute_schedule(cfg, sched, h, link, static_cast<int>(r),
                                                 fixed_repaired);
            schedule = fixed;
            repaired = fixed_repaired;
          }
        } catch (const std::exception&) {
          // The realization is dropped for this scheduler only.
          for (auto& cell : grid[s]) cell = CellResult{};
          grid[s][0].failures = 1;
          failed = true;
          break;
        }
        CellResult& cell = grid[s][i];
        cell.repaired += repaired ? 1 : 0;
        for (int t = 0; t < cfg.scenario.slots; ++t) {
          // Common random numbers: every scheduler sees the same bits and
          // noise for a given (realization, SNR, slot).
          Rng rng(derive_seed(derive_seed(cfg.master_seed, r, kTransmitTag), i * 4096 + t));
          const RVector c_t = schedule->entries().col(t);
          const SlotOutcome o = run_slot(h, c_t, link, cfg.num_transmissions, rng);
          cell.bit_errors += o.bit_errors;
          cell.bits_sent += o.bits_sent;
          for (Eigen::Index u = 0; u < c_t.size(); ++u) {
            if (c_t(u) == 1.0) {
              cell.rate_sum += o.rates(u);
              ++cell.rate_count;
            }
          }
        }
      }
    }
  });

  CampaignResult result;
  result.config = cfg;
  result.cells.assign(n_sched, std::vector<CellResult>(n_snr));
  for (std::size_t r = 0; r < n_real; ++r) {
    for (std::size_t s = 0; s < n_sched; ++s) {
      for (std::size_t i = 0; i < n_snr; ++i) {
        CellResult& acc = result.cells[s][i];
        const CellResult& part = per_realization[r][s][i];
        acc.bit_errors += part.bit_errors;
        acc.bits_sent += part.bits_sent;
        acc.rate_sum += part.rate_sum;
        acc.rate_count += part.rate_count;
        acc.repaired += part.repaired;
        acc.failures += part.failures;
      }
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------
// Configuration and result files.

namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

CampaignConfig parse_campaign_config(const json& j) {
  CampaignConfig cfg;
  try {
    const json& scen = j.at("scenario");
    cfg.scenario.antennas = scen.at("B").get<int>();
    cfg.scenario.ues = scen.at("U").get<int>();
    cfg.scenario.slots = scen.at("T").get<int>();
    cfg.scenario.t_s = get_or(scen, "t_s", 1);
    cfg.scenario.u_s = scen.at("u_s").get<int>();

    if (j.contains("channel_source")) {
      const json& src = j.at("channel_source");
      const std::string kind = src.is_string() ? src.get<std::string>() : src.at("kind").get<std::string>();
      if (kind == "rayleigh") {
        cfg.channel_source.kind = ChannelSource::Kind::Rayleigh;
      } else if (kind == "geometric") {
        cfg.channel_source.kind = ChannelSource::Kind::Geometric;
        if (src.is_object()) {
          auto& g = cfg.channel_source.geometric;
          g.num_paths = get_or(src, "num_paths", g.num_paths);
          g.angle_spread_deg = get_or(src, "angle_spread_deg", g.angle_spread_deg);
          g.antenna_spacing_wavelengths =
              get_or(src, "antenna_spacing_wavelengths", g.antenna_spacing_wavelengths);
          g.path_decay_db = get_or(src, "path_decay_db", g.path_decay_db);
          g.max_nominal_angle_deg = get_or(src, "max_nominal_angle_deg", g.max_nominal_angle_deg);
        }
      } else if (kind == "file") {
        cfg.channel_source.kind = ChannelSource::Kind::File;
        for (const auto& p : src.at("paths")) cfg.channel_source.files.emplace_back(p.get<std::string>());
      } else {
        throw InvalidArgument("unknown channel_source kind: " + kind);
      }
    }
    cfg.eta_db = get_or(j, "eta_db", cfg.eta_db);
    cfg.snr_grid_db = j.at("snr_grid_db").get<std::vector<double>>();
    cfg.num_channel_realizations = j.at("num_channel_realizations").get<int>();
    cfg.num_transmissions = j.at("num_transmissions").get<std::uint64_t>();
    cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", 0);
    cfg.workers = get_or(j, "workers", 1);
    cfg.es_budget = get_or<std::uint64_t>(j, "es_budget", cfg.es_budget);
    cfg.sus_eps = get_or(j, "sus_eps", cfg.sus_eps);

    const auto cost_kinds =
        get_or<std::vector<std::string>>(j, "cost_kinds", {"mse", "rate"});
    for (const auto& name : j.at("schedulers").get<std::vector<std::string>>()) {
      if (name == "opt" || name == "es") {
        for (const auto& ck : cost_kinds) {
          cfg.schedulers.push_back(parse_scheduler(name + "-" + std::string(to_string(parse_cost_kind(ck)))));
        }
      } else {
        cfg.schedulers.push_back(parse_scheduler(name));
      }
    }

    if (j.contains("fbs")) {
      const json& f = j.at("fbs");
      if (f.contains("tau")) cfg.fbs.tau = f.at("tau").get<double>();
      if (f.contains("alpha")) cfg.fbs.alpha = f.at("alpha").get<double>();
      cfg.fbs.i_max = get_or(f, "i_max", cfg.fbs.i_max);
      cfg.fbs.restarts = get_or(f, "restarts", cfg.fbs.restarts);
      cfg.fbs.drs.beta = get_or(f, "beta", cfg.fbs.drs.beta);
      cfg.fbs.drs.k_max = get_or(f, "drs_k_max", cfg.fbs.drs.k_max);
      cfg.fbs.drs.tol = get_or(f, "drs_tol", cfg.fbs.drs.tol);
      cfg.fbs.local_search = get_or(f, "local_search", cfg.fbs.local_search);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("campaign config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
  return parse_campaign_config(j);
}

json to_json(const CampaignConfig& cfg) {
  json j;
  j["scenario"] = {{"B", cfg.scenario.antennas}, {"U", cfg.scenario.ues}, {"T", cfg.scenario.slots},
                   {"t_s", cfg.scenario.t_s},    {"u_s", cfg.scenario.u_s}};
  switch (cfg.channel_source.kind) {
    case ChannelSource::Kind::Rayleigh:
      j["channel_source"] = {{"kind", "rayleigh"}};
      break;
    case ChannelSource::Kind::Geometric: {
      const auto& g = cfg.channel_source.geometric;
      j["channel_source"] = {{"kind", "geometric"},
                             {"num_paths", g.num_paths},
                             {"angle_spread_deg", g.angle_spread_deg},
                             {"antenna_spacing_wavelengths", g.antenna_spacing_wavelengths},
                             {"path_decay_db", g.path_decay_db},
                             {"max_nominal_angle_deg", g.max_nominal_angle_deg}};
      break;
    }
    case ChannelSource::Kind::File: {
      json paths = json::array();
      for (const auto& p : cfg.channel_source.files) paths.push_back(p.string());
      j["channel_source"] = {{"kind", "file"}, {"paths", paths}};
      break;
    }
  }
  j["eta_db"] = cfg.eta_db;
  j["snr_grid_db"] = cfg.snr_grid_db;
  j["num_channel_realizations"] = cfg.num_channel_realizations;
  j["num_transmissions"] = cfg.num_transmissions;
  json names = json::array();
  for (const auto& s : cfg.schedulers) names.push_back(s.name);
  j["schedulers"] = names;
  json fbs = {{"i_max", cfg.fbs.i_max},
              {"restarts", cfg.fbs.restarts},
              {"beta", cfg.fbs.drs.beta},
              {"drs_k_max", cfg.fbs.drs.k_max},
              {"drs_tol", cfg.fbs.drs.tol},
              {"local_search", cfg.fbs.local_search}};
  if (cfg.fbs.tau) fbs["tau"] = *cfg.fbs.tau;
  if (cfg.fbs.alpha) fbs["alpha"] = *cfg.fbs.alpha;
  j["fbs"] = fbs;
  j["es_budget"] = cfg.es_budget;
  j["sus_eps"] = cfg.sus_eps;
  j["master_seed"] = cfg.master_seed;
  j["workers"] = cfg.workers;
  return j;
}

void emit_results(const CampaignResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());

  const auto& cfg = result.config;
  auto write_metric = [&](const char* file, auto&& metric) {
    const auto path = dir / file;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "snr_db";
    for (const auto& s : cfg.schedulers) out << ',' << s.name;
    out << '\n';
    for (std::size_t i = 0; i < cfg.snr_grid_db.size(); ++i) {
      out << format_double(cfg.snr_grid_db[i]);
      for (std::size_t s = 0; s < cfg.schedulers.size(); ++s) {
        const bool available = cfg.schedulers[s].kind != SchedulerKind::Unavailable;
        out << ',' << (available ? format_double(metric(result.cells[s][i]))
                                 : std::string("NA"));
      }
      out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
  };
  write_metric("ber.csv", [](const CellResult& c) { return c.ber(); });
  write_metric("rate.csv", [](const CellResult& c) { return c.avg_rate(); });

  json manifest;
  manifest["config"] = to_json(cfg);
  manifest["master_seed"] = cfg.master_seed;
  manifest["seed_derivation"] =
      "splitmix64(master_seed, realization_index, stream tag); channel, transmission, random "
      "scheduler and optimizer restarts use separate tags";
  manifest["snr_definition"] = "Es/N0 per receive antenna, Es = 1";
  manifest["modulation"] = "16-QAM Gray, unit average energy";
  manifest["equalizer"] = "LMMSE with per-UE bias removal, hard decision";
  manifest["version"] = "0.1.0";
  manifest["overloaded_regime"] = cfg.scenario.u_s >= cfg.scenario.antennas;

  json cells = json::array();
  json qos_flags = json::array();
  json unavailable = json::array();
  for (std::size_t s = 0; s < cfg.schedulers.size(); ++s) {
    const auto& sched = cfg.schedulers[s];
    if (sched.kind == SchedulerKind::Unavailable) {
      unavailable.push_back(sched.name);
      continue;
    }
    for (std::size_t i = 0; i < cfg.snr_grid_db.size(); ++i) {
      const CellResult& c = result.cells[s][i];
      cells.push_back({{"scheduler", sched.name},
                       {"snr_db", cfg.snr_grid_db[i]},
                       {"bit_errors", c.bit_errors},
                       {"bits_sent", c.bits_sent},
                       {"ber", c.ber()},
                       {"avg_per_ue_rate_bps_hz", c.avg_rate()},
                       {"rate_samples", c.rate_count},
                       {"repaired_schedules", c.repaired},
                       {"failed_realizations", c.failures}});
      if (c.ber() > 0.01) qos_flags.push_back({{"scheduler", sched.name}, {"snr_db", cfg.snr_grid_db[i]}});
    }
  }
  manifest["cells"] = cells;
  manifest["ber_above_1_percent"] = qos_flags;
  manifest["unavailable_schedulers"] = unavailable;

  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest.json");
    out << manifest.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "timing.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write timing.json");
    out << json{{"wall_seconds", result.wall_seconds}}.dump(2) << '\n';
  }
}

}  // namespace mmsched
