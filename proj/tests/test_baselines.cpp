#include <doctest.h>

#include <algorithm>
#include <vector>

#include "mmsched/baselines.hpp"
#include "mmsched/channel.hpp"
#include "oracles.hpp"

using namespace mmsched;

namespace {

CMatrix controlled_rayleigh(int antennas, int ues, std::uint64_t seed) {
  return apply_power_control(generate_rayleigh(antennas, ues, seed), 6.0).effective;
}

std::vector<int> active_in_slot(const ScheduleMatrix& c, int t) {
  std::vector<int> out;
  for (int u = 0; u < c.ues(); ++u) {
    if (c(u, t) == 1.0) out.push_back(u);
  }
  return out;
}

}  // namespace

TEST_CASE("ScenarioSpec validation") {
  CHECK_NOTHROW((ScenarioSpec{8, 8, 2, 1, 4}).validate());
  CHECK_THROWS_AS((ScenarioSpec{8, 8, 2, 1, 3}).validate(), InvalidArgument);
  CHECK_THROWS_AS((ScenarioSpec{0, 8, 2, 1, 4}).validate(), InvalidArgument);
  CHECK_THROWS_AS((ScenarioSpec{8, 8, 2, 3, 12}).validate(), InvalidArgument);
}

TEST_CASE("count_feasible") {
  CHECK(count_feasible({1, 32, 2, 1, 16}) == BigCount(601080390));
  CHECK(count_feasible({1, 2, 2, 1, 1}) == 2);
  CHECK(count_feasible({1, 4, 2, 1, 2}) == 6);
  // Large counts do not overflow: 64 UEs over 4 slots is 64! / (16!)^4.
  BigCount expected = 1;
  for (int i = 2; i <= 64; ++i) expected *= i;
  BigCount f16 = 1;
  for (int i = 2; i <= 16; ++i) f16 *= i;
  CHECK(count_feasible({1, 64, 4, 1, 16}) == expected / (f16 * f16 * f16 * f16));
  CHECK_THROWS_AS(count_feasible({1, 4, 2, 1, 3}), InvalidArgument);
}

TEST_CASE("count_feasible agrees with brute force enumeration") {
  const std::vector<ScenarioSpec> cases = {
      {1, 2, 2, 1, 1}, {1, 4, 2, 1, 2}, {1, 6, 2, 1, 3}, {1, 6, 3, 1, 2}, {1, 4, 4, 1, 1},
      {1, 4, 4, 2, 2}, {1, 4, 2, 2, 4},
      {1, 6, 3, 2, 4}, {1, 3, 3, 2, 2}, {1, 8, 2, 1, 4}, {1, 5, 4, 4, 5}};
  for (const auto& s : cases) {
    const long long brute = oracle::brute_force_count(s.ues, s.slots, s.u_s, s.t_s);
    CHECK(brute <= 10000);
    CHECK(count_feasible(s) == BigCount(brute));
  }
}

TEST_CASE("exhaustive_search") {
  SUBCASE("strong and weak UE tie; lexicographic first returned") {
    CMatrix h = CMatrix::Zero(2, 2);
    h(0, 0) = 3.0;
    h(1, 1) = 1.0;
    const CostFunctionSpec spec{CostKind::PostLmmseSumRate, LinkParams::from_snr_db(10.0), 0.0};
    const auto es = exhaustive_search(h, spec, {2, 2, 2, 1, 1}, 10);
    RMatrix first(2, 2);
    first << 1, 0, 0, 1;
    RMatrix second(2, 2);
    second << 0, 1, 1, 0;
    CHECK(es.schedule.entries() == first);
    CHECK(base_cost(spec.kind, first, h, spec.link) == base_cost(spec.kind, second, h, spec.link));
    CHECK(es.objective == base_cost(spec.kind, first, h, spec.link));
  }
  SUBCASE("singleton feasible set") {
    const CMatrix h = controlled_rayleigh(4, 3, 1);
    const CostFunctionSpec spec{CostKind::PostLmmseMse, LinkParams::from_snr_db(10.0), 0.0};
    const auto es = exhaustive_search(h, spec, {4, 3, 1, 1, 3}, 10);
    CHECK(es.schedule == ScheduleMatrix::ones(3, 1));
  }
  SUBCASE("matches a brute-force minimum over every feasible matrix") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const CMatrix h = controlled_rayleigh(4, 4, seed);
      const ScenarioSpec scen{4, 4, 2, 1, 2};
      for (CostKind kind : {CostKind::PostLmmseMse, CostKind::PostLmmseSumRate}) {
        const CostFunctionSpec spec{kind, LinkParams::from_snr_db(5.0), 0.0};
        double best = std::numeric_limits<double>::infinity();
        for (int bits = 0; bits < 256; ++bits) {
          RMatrix c(4, 2);
          for (int i = 0; i < 8; ++i) c(i % 4, i / 4) = (bits >> i) & 1;
          const auto cand = ScheduleMatrix::binary(c);
          if (!validate_schedule(cand, scen.constraints())) continue;
          best = std::min(best, base_cost(kind, c, h, spec.link));
        }
        CHECK(exhaustive_search(h, spec, scen, 100).objective == doctest::Approx(best).epsilon(1e-12));
      }
    }
  }
  SUBCASE("budget") {
    const CMatrix h = controlled_rayleigh(16, 16, 1);
    const CostFunctionSpec spec{CostKind::PostLmmseMse, LinkParams{}, 0.0};
    try {
      exhaustive_search(h, spec, {16, 16, 2, 1, 8}, 100);
      FAIL("expected the budget to be exceeded");
    } catch (const SearchBudgetExceeded& e) {
      CHECK(e.count() == 12870);
    }
  }
}

TEST_CASE("exhaustive search lower-bounds every other scheduler") {
  const ScenarioSpec scen{6, 6, 2, 1, 3};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CMatrix h = controlled_rayleigh(6, 6, 40 + seed);
    const LinkParams link = LinkParams::from_snr_db(10.0);
    for (CostKind kind : {CostKind::PostLmmseMse, CostKind::PostLmmseSumRate}) {
      const CostFunctionSpec spec{kind, link, 0.0};
      const double es = exhaustive_search(h, spec, scen, 1000).objective;
      FbsConfig cfg;
      cfg.seed = seed;
      cfg.restarts = 3;
      for (const ScheduleMatrix& other :
           {solve(h, spec, scen.constraints(), cfg).schedule, greedy_sumrate(h, link, scen),
            sus(h, scen), random_schedule(scen, seed)}) {
        CHECK(es <= base_cost(kind, other.entries(), h, link) + 1e-12);
      }
    }
  }
}

TEST_CASE("greedy_sumrate") {
  SUBCASE("strong UE first") {
    CMatrix h = CMatrix::Zero(2, 2);
    h(0, 0) = 1.0;
    h(1, 1) = 10.0;
    const auto c = greedy_sumrate(h, LinkParams::from_snr_db(10.0), {2, 2, 2, 1, 1});
    CHECK(active_in_slot(c, 0) == std::vector<int>{1});
    CHECK(active_in_slot(c, 1) == std::vector<int>{0});
  }
  SUBCASE("everyone when u_s = U") {
    const auto c = greedy_sumrate(CMatrix::Identity(3, 3), LinkParams{}, {3, 3, 1, 1, 3});
    CHECK(c == ScheduleMatrix::ones(3, 1));
  }
  SUBCASE("matches an independent trace") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const CMatrix h = controlled_rayleigh(4, 4, seed);
      const LinkParams link = LinkParams::from_snr_db(10.0);
      const ScenarioSpec scen{4, 4, 2, 1, 2};
      const auto c = greedy_sumrate(h, link, scen);
      const auto slot1 = oracle::greedy_slot_trace(h, {0, 1, 2, 3}, 2, link.noise_to_signal());
      CHECK(active_in_slot(c, 0) == slot1);
      std::vector<int> rest;
      for (int u = 0; u < 4; ++u) {
        if (std::find(slot1.begin(), slot1.end(), u) == slot1.end()) rest.push_back(u);
      }
      CHECK(active_in_slot(c, 1) == rest);
      CHECK(validate_schedule(c, scen.constraints()));
    }
  }
  SUBCASE("t_s other than 1 unsupported") {
    CHECK_THROWS_AS(greedy_sumrate(controlled_rayleigh(4, 4, 1), LinkParams{}, {4, 4, 4, 2, 2}),
                    InvalidArgument);
  }
}

TEST_CASE("sus") {
  SUBCASE("orthogonal columns: largest norm first") {
    CMatrix h = CMatrix::Zero(4, 4);
    h(0, 0) = 1.0;
    h(1, 1) = 3.0;
    h(2, 2) = 2.0;
    h(3, 3) = 0.5;
    const auto c = sus(h, {4, 4, 4, 1, 1});
    CHECK(active_in_slot(c, 0) == std::vector<int>{1});
    CHECK(active_in_slot(c, 1) == std::vector<int>{2});
  }
  SUBCASE("identical columns are filled in") {
    CMatrix h(2, 2);
    h << 1.0, 1.0, 0.5, 0.5;
    const auto c = sus(h, {2, 2, 1, 1, 2}, 0.3);
    CHECK(c == ScheduleMatrix::ones(2, 1));
  }
  SUBCASE("matches an independent selection loop") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const CMatrix h = controlled_rayleigh(4, 4, 70 + seed);
      const ScenarioSpec scen{4, 4, 2, 1, 2};
      const auto c = sus(h, scen, 0.4);
      auto slot1 = oracle::sus_slot_trace(h, {0, 1, 2, 3}, 2, 0.4);
      std::vector<int> rest;
      for (int u = 0; u < 4; ++u) {
        if (std::find(slot1.begin(), slot1.end(), u) == slot1.end()) rest.push_back(u);
      }
      auto slot2 = oracle::sus_slot_trace(h, rest, 2, 0.4);
      std::sort(slot1.begin(), slot1.end());
      std::sort(slot2.begin(), slot2.end());
      CHECK(active_in_slot(c, 0) == slot1);
      CHECK(active_in_slot(c, 1) == slot2);
    }
  }
  SUBCASE("invalid eps") {
    const CMatrix h = controlled_rayleigh(4, 4, 1);
    CHECK_THROWS_AS(sus(h, {4, 4, 2, 1, 2}, 0.0), InvalidArgument);
    CHECK_THROWS_AS(sus(h, {4, 4, 2, 1, 2}, 1.0), InvalidArgument);
  }
}

TEST_CASE("random_schedule") {
  const ScenarioSpec pair{1, 2, 2, 1, 1};
  int first_in_slot_one = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto c = random_schedule(pair, seed);
    first_in_slot_one += c(0, 0) == 1.0 ? 1 : 0;
  }
  CHECK(std::abs(first_in_slot_one / 10000.0 - 0.5) <= 0.02);

  const ScenarioSpec scen{8, 12, 3, 1, 4};
  CHECK(random_schedule(scen, 9) == random_schedule(scen, 9));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CHECK(validate_schedule(random_schedule(scen, seed), scen.constraints()));
  }
  CHECK_THROWS_AS(random_schedule({1, 4, 2, 1, 3}, 1), InvalidArgument);
}

TEST_CASE("every baseline except no-scheduling is feasible") {
  const ScenarioSpec scen{8, 12, 3, 1, 4};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CMatrix h = controlled_rayleigh(8, 12, seed);
    const LinkParams link = LinkParams::from_snr_db(15.0);
    CHECK(validate_schedule(greedy_sumrate(h, link, scen), scen.constraints()));
    CHECK(validate_schedule(sus(h, scen), scen.constraints()));
    CHECK(validate_schedule(random_schedule(scen, seed), scen.constraints()));
  }
}

TEST_CASE("no_scheduling") {
  CHECK(no_scheduling(4, 2) == ScheduleMatrix::ones(4, 2));
  CHECK_FALSE(validate_schedule(no_scheduling(4, 2), SchedulingConstraints::exact(4, 2, 2, 1)));
  CHECK_THROWS_AS(no_scheduling(0, 2), InvalidArgument);
}
