#include <doctest.h>

#include <cmath>

#include "mmsched/baselines.hpp"
#include "mmsched/channel.hpp"
#include "mmsched/optimizer.hpp"
#include "mmsched/random.hpp"

using namespace mmsched;

namespace {

RMatrix random_relaxed(int ues, int slots, std::uint64_t seed) {
  Rng rng(seed);
  RMatrix c(ues, slots);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.uniform();
  return c;
}

CMatrix controlled_rayleigh(int antennas, int ues, std::uint64_t seed) {
  return apply_power_control(generate_rayleigh(antennas, ues, seed), 6.0).effective;
}

bool within(double candidate, double optimum, double fraction) {
  return candidate <= optimum + fraction * std::abs(optimum) + 1e-12;
}

}  // namespace

TEST_CASE("FbsConfig validation") {
  FbsConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.i_max = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.tau = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.alpha = -0.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("fbs_once") {
  const CMatrix h = controlled_rayleigh(4, 4, 1);
  const CostFunctionSpec spec{CostKind::PostLmmseMse, LinkParams::from_snr_db(10.0), 0.5};
  SUBCASE("singleton feasible set") {
    FbsConfig cfg;
    cfg.tau = 0.1;
    cfg.i_max = 10;
    const SchedulingConstraints k = SchedulingConstraints::exact(4, 2, 4, 2);
    const RMatrix out = fbs_once(h, spec, k, cfg, random_relaxed(4, 2, 3));
    CHECK((out.array() - 1.0).abs().maxCoeff() < 1e-9);
  }
  SUBCASE("zero step only projects") {
    FbsConfig cfg;
    cfg.tau = 0.0;
    cfg.i_max = 5;
    const SchedulingConstraints k = SchedulingConstraints::exact(4, 2, 2, 1);
    const RMatrix init = random_relaxed(4, 2, 4);
    const RMatrix projected = drs_project(init, k, cfg.drs).v;
    CHECK((fbs_once(h, spec, k, cfg, init) - projected).norm() < 1e-5);
  }
  SUBCASE("tau must be set") {
    const SchedulingConstraints k = SchedulingConstraints::exact(4, 2, 2, 1);
    CHECK_THROWS_AS(fbs_once(h, spec, k, FbsConfig{}, random_relaxed(4, 2, 1)), InvalidArgument);
  }
  SUBCASE("shape mismatch") {
    FbsConfig cfg;
    cfg.tau = 0.1;
    const SchedulingConstraints k = SchedulingConstraints::exact(4, 2, 2, 1);
    CHECK_THROWS_AS(fbs_once(h, spec, k, cfg, random_relaxed(3, 2, 1)), InvalidArgument);
  }
}

TEST_CASE("quantize_repair") {
  SUBCASE("top-k per column") {
    RMatrix c(4, 1);
    c << 0.9, 0.8, 0.1, 0.2;
    const auto q = quantize_repair(c, SchedulingConstraints{4, 1, 2, 2, 0, 1});
    RMatrix expected(4, 1);
    expected << 1, 1, 0, 0;
    CHECK(q.schedule.entries() == expected);
    CHECK_FALSE(q.repaired);
  }
  SUBCASE("binary feasible input is unchanged") {
    RMatrix c(4, 2);
    c << 0, 1, 1, 0, 1, 0, 0, 1;
    const auto q = quantize_repair(c, SchedulingConstraints::exact(4, 2, 2, 1));
    CHECK(q.schedule.entries() == c);
    CHECK_FALSE(q.repaired);
  }
  SUBCASE("row violation repaired by a swap") {
    RMatrix c(2, 2);
    c << 0.9, 0.8, 0.6, 0.2;
    const SchedulingConstraints k = SchedulingConstraints::exact(2, 2, 1, 1);
    const auto q = quantize_repair(c, k);
    RMatrix expected(2, 2);
    expected << 1, 0, 0, 1;
    CHECK(q.schedule.entries() == expected);
    CHECK(q.repaired);
    // Only two binary matrices are feasible here; the result is one of them.
    RMatrix other(2, 2);
    other << 0, 1, 1, 0;
    CHECK(validate_schedule(ScheduleMatrix::binary(expected), k));
    CHECK(validate_schedule(ScheduleMatrix::binary(other), k));
  }
  SUBCASE("always feasible on random relaxed input") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
      const int slots = 2 + static_cast<int>(rng.below(3));
      const int u_s = 1 + static_cast<int>(rng.below(4));
      const int ues = slots * u_s;
      const SchedulingConstraints k = SchedulingConstraints::exact(ues, slots, u_s, 1);
      const auto q = quantize_repair(random_relaxed(ues, slots, rng.next_u64()), k);
      CHECK(validate_schedule(q.schedule, k));
    }
  }
  SUBCASE("infeasible constraints") {
    CHECK_THROWS_AS(quantize_repair(RMatrix::Zero(4, 2), SchedulingConstraints::exact(4, 2, 3, 1)),
                    InvalidArgument);
  }
}

TEST_CASE("polish_schedule") {
  SUBCASE("never worse, always feasible, locally optimal") {
    Rng rng(31);
    for (int trial = 0; trial < 40; ++trial) {
      const int slots = 2 + static_cast<int>(rng.below(2));
      const int ues = 3 + static_cast<int>(rng.below(4));
      // Alternate exact and loose bounds so every move kind is exercised.
      const SchedulingConstraints k = trial % 2 == 0
                                          ? SchedulingConstraints{ues, slots, 1, ues - 1, 0, slots}
                                          : SchedulingConstraints{ues, slots, 1, ues, 1, 1};
      const CMatrix h = controlled_rayleigh(4, ues, 700 + trial);
      const CostKind kind = trial % 3 == 0 ? CostKind::PostLmmseSumRate : CostKind::PostLmmseMse;
      const CostFunctionSpec spec{kind, LinkParams::from_snr_db(12.0), 0.0};
      RMatrix b = quantize_repair(random_relaxed(ues, slots, rng.next_u64()), k).schedule.entries();
      const double before = base_cost(kind, b, h, spec.link);
      polish_schedule(b, h, spec, k);
      const double after = base_cost(kind, b, h, spec.link);
      CHECK(after <= before + 1e-12);
      CHECK(validate_schedule(ScheduleMatrix::binary(b), k));
      RMatrix again = b;
      CHECK(polish_schedule(again, h, spec, k) == 0);
      CHECK(again == b);
    }
  }
  SUBCASE("exhaustive optimum is a fixed point") {
    const ScenarioSpec scen{6, 6, 2, 1, 3};
    const CMatrix h = controlled_rayleigh(6, 6, 17);
    const CostFunctionSpec spec{CostKind::PostLmmseMse, LinkParams::from_snr_db(10.0), 0.0};
    RMatrix b = exhaustive_search(h, spec, scen, 1000).schedule.entries();
    const RMatrix es = b;
    CHECK(polish_schedule(b, h, spec, scen.constraints()) == 0);
    CHECK(b == es);
  }
  SUBCASE("single exchange away from the optimum") {
    const ScenarioSpec scen{6, 6, 2, 1, 3};
    const CMatrix h = controlled_rayleigh(6, 6, 18);
    const CostFunctionSpec spec{CostKind::PostLmmseSumRate, LinkParams::from_snr_db(10.0), 0.0};
    const auto es = exhaustive_search(h, spec, scen, 1000);
    RMatrix b = es.schedule.entries();
    int u = 0;
    while (b(u, 0) != 1.0) ++u;
    int v = 0;
    while (b(v, 1) != 1.0) ++v;
    std::swap(b(u, 0), b(u, 1));
    std::swap(b(v, 0), b(v, 1));
    const double perturbed = base_cost(spec.kind, b, h, spec.link);
    REQUIRE(perturbed > es.objective);
    CHECK(polish_schedule(b, h, spec, scen.constraints()) >= 1);
    const double polished = base_cost(spec.kind, b, h, spec.link);
    CHECK(polished < perturbed);
    CHECK(polished >= es.objective - 1e-12);
  }
  SUBCASE("errors") {
    const CMatrix h = controlled_rayleigh(4, 4, 1);
    const CostFunctionSpec spec{CostKind::PostLmmseMse, LinkParams::from_snr_db(10.0), 0.0};
    const SchedulingConstraints k = SchedulingConstraints::exact(4, 2, 2, 1);
    RMatrix infeasible = RMatrix::Ones(4, 2);
    CHECK_THROWS_AS(polish_schedule(infeasible, h, spec, k), InvalidArgument);
    RMatrix wrong = RMatrix::Zero(3, 2);
    CHECK_THROWS_AS(polish_schedule(wrong, h, spec, k), InvalidArgument);
  }
}

TEST_CASE("solve basics") {
  const CMatrix h = controlled_rayleigh(4, 4, 2);
  const CostFunctionSpec spec{CostKind::PostLmmseMse, LinkParams::from_snr_db(10.0), 0.0};
  SUBCASE("deterministic") {
    FbsConfig cfg;
    cfg.seed = 42;
    const SchedulingConstraints k = SchedulingConstraints::exact(4, 2, 2, 1);
    const auto a = solve(h, spec, k, cfg);
    const auto b = solve(h, spec, k, cfg);
    CHECK(a.schedule == b.schedule);
    CHECK(a.objective == b.objective);
    CHECK(a.tau == b.tau);
    CHECK(a.alpha == b.alpha);
  }
  SUBCASE("worker count does not change the result") {
    FbsConfig cfg;
    cfg.seed = 3;
    cfg.restarts = 6;
    const SchedulingConstraints k = SchedulingConstraints::exact(4, 2, 2, 1);
    const auto serial = solve(h, spec, k, cfg);
    cfg.workers = 3;
    const auto threaded = solve(h, spec, k, cfg);
    CHECK(serial.schedule == threaded.schedule);
    CHECK(serial.restart_objectives == threaded.restart_objectives);
  }
  SUBCASE("singleton feasible set") {
    const SchedulingConstraints k = SchedulingConstraints::exact(4, 2, 4, 2);
    const auto sol = solve(h, spec, k, FbsConfig{});
    CHECK(sol.schedule == ScheduleMatrix::ones(4, 2));
    CHECK(sol.objective == mse_cost(ScheduleMatrix::ones(4, 2), h, spec.link));
  }
  SUBCASE("channel and constraints disagree") {
    CHECK_THROWS_AS(solve(h, spec, SchedulingConstraints::exact(6, 2, 3, 1), FbsConfig{}),
                    InvalidArgument);
  }
}

TEST_CASE("solve returns feasible, best-of-restarts schedules") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CMatrix h = controlled_rayleigh(6, 6, seed);
    const SchedulingConstraints k = SchedulingConstraints::exact(6, 3, 2, 1);
    for (CostKind kind : {CostKind::PostLmmseMse, CostKind::PostLmmseSumRate}) {
      const CostFunctionSpec spec{kind, LinkParams::from_snr_db(8.0), 0.0};
      FbsConfig cfg;
      cfg.seed = seed;
      cfg.restarts = 5;
      const auto sol = solve(h, spec, k, cfg);
      CHECK(validate_schedule(sol.schedule, k));
      CHECK(sol.objective == base_cost(kind, sol.schedule.entries(), h, spec.link));
      REQUIRE(sol.restart_objectives.size() == 5);
      CHECK(sol.restart_objectives[static_cast<std::size_t>(sol.restart_index)] == sol.objective);
      for (double r : sol.restart_objectives) {
        if (!std::isnan(r)) CHECK(sol.objective <= r);
      }
      CHECK(sol.iterations_used == cfg.i_max);
      CHECK(sol.tau > 0.0);
      CHECK(sol.alpha >= 0.0);
    }
  }
}

TEST_CASE("small instances land near the exhaustive optimum") {
  const ScenarioSpec scen{4, 4, 2, 1, 2};
  for (CostKind kind : {CostKind::PostLmmseMse, CostKind::PostLmmseSumRate}) {
    int close = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const CMatrix h = controlled_rayleigh(4, 4, 1000 + seed);
      const CostFunctionSpec spec{kind, LinkParams::from_snr_db(10.0), 0.0};
      FbsConfig cfg;
      cfg.restarts = 20;
      cfg.seed = seed;
      const auto opt = solve(h, spec, scen.constraints(), cfg);
      const auto es = exhaustive_search(h, spec, scen, 1000);
      CHECK(es.objective <= opt.objective + 1e-12);
      close += within(opt.objective, es.objective, 0.05) ? 1 : 0;
    }
    INFO("cost " << to_string(kind) << ": " << close << "/50 within 5%");
    CHECK(close >= 45);
  }
}

TEST_CASE("desk-scale S1 shape lands near the exhaustive optimum") {
  const ScenarioSpec scen{16, 16, 2, 1, 8};
  for (CostKind kind : {CostKind::PostLmmseMse, CostKind::PostLmmseSumRate}) {
    int close = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const CMatrix h = controlled_rayleigh(16, 16, 5000 + seed);
      const CostFunctionSpec spec{kind, LinkParams::from_snr_db(10.0), 0.0};
      FbsConfig cfg;
      cfg.restarts = 80;
      cfg.seed = seed;
      const auto opt = solve(h, spec, scen.constraints(), cfg);
      const auto es = exhaustive_search(h, spec, scen, 100000);
      close += within(opt.objective, es.objective, 0.02) ? 1 : 0;
    }
    INFO("cost " << to_string(kind) << ": " << close << "/20 within 2%");
    CHECK(close >= 16);
  }
}

TEST_CASE("gradient steps beat projected random starts") {
  const ScenarioSpec scen{8, 8, 2, 1, 4};
  const CostFunctionSpec spec{CostKind::PostLmmseMse, LinkParams::from_snr_db(10.0), 0.0};
  double opt_sum = 0.0;
  double lazy_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const CMatrix h = controlled_rayleigh(8, 8, 300 + seed);
    FbsConfig cfg;
    cfg.restarts = 4;
    cfg.seed = seed;
    cfg.local_search = false;
    opt_sum += solve(h, spec, scen.constraints(), cfg).objective;
    FbsConfig lazy = cfg;
    lazy.tau = 0.0;
    lazy.alpha = 0.0;
    lazy_sum += solve(h, spec, scen.constraints(), lazy).objective;
  }
  INFO("mean opt " << opt_sum / 50 << " vs projected random " << lazy_sum / 50);
  CHECK(opt_sum < lazy_sum);
}
