#include "mmsched/baselines.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "mmsched/random.hpp"

namespace mmsched {

void ScenarioSpec::validate() const {
  if (antennas < 1 || ues < 1 || slots < 1) {
    throw InvalidArgument("scenario: B, U and T must be >= 1");
  }
  if (u_s < 0 || u_s > ues || t_s < 0 || t_s > slots) {
    throw InvalidArgument("scenario: need 0 <= u_s <= U and 0 <= t_s <= T");
  }
  if (static_cast<long long>(ues) * t_s != static_cast<long long>(slots) * u_s) {
    throw InvalidArgument("scenario: U * t_s must equal T * u_s");
  }
}

namespace {

void require_single_slot_per_ue(const ScenarioSpec& scen, const char* who) {
  scen.validate();
  if (scen.t_s != 1) {
    throw InvalidArgument(std::string(who) + ": only t_s = 1 is supported");
  }
}

BigCount binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  BigCount r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

// need[j] = number of UEs that still have to be scheduled in j more slots.
using NeedProfile = std::vector<int>;

class FeasibleCounter {
 public:
  explicit FeasibleCounter(const ScenarioSpec& scen) : scen_(scen) {}

  BigCount count(int slot, const NeedProfile& need) {
    const int remaining = scen_.slots - slot;
    for (int j = remaining + 1; j < static_cast<int>(need.size()); ++j) {
      if (need[j] > 0) return 0;
    }
    if (remaining == 0) return 1;
    auto key = std::make_pair(slot, need);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    BigCount total = 0;
    NeedProfile take(need.size(), 0);
    distribute(slot, need, take, 1, scen_.u_s, 1, total);
    memo_.emplace(std::move(key), total);
    return total;
  }

 private:
  // Chooses take[j] UEs from each need class j >= 1 with sum u_s.
  void distribute(int slot, const NeedProfile& need, NeedProfile& take, int j, int left,
                  const BigCount& ways, BigCount& total) {
    if (j == static_cast<int>(need.size())) {
      if (left != 0) return;
      NeedProfile next = need;
      for (std::size_t c = 1; c < need.size(); ++c) {
        next[c] -= take[c];
        next[c - 1] += take[c];
      }
      total += ways * count(slot + 1, next);
      return;
    }
    for (int x = 0; x <= std::min(left, need[j]); ++x) {
      take[j] = x;
      distribute(slot, need, take, j + 1, left - x, ways * binomial(need[j], x), total);
    }
    take[j] = 0;
  }

  const ScenarioSpec& scen_;
  std::map<std::pair<int, NeedProfile>, BigCount> memo_;
};

}  // namespace

BigCount count_feasible(const ScenarioSpec& scen) {
  scen.validate();
  NeedProfile need(static_cast<std::size_t>(scen.t_s + 1), 0);
  need[scen.t_s] = scen.ues;
  FeasibleCounter counter(scen);
  return counter.count(0, need);
}

ScheduleSolution exhaustive_search(const CMatrix& h, const CostFunctionSpec& spec,
                                   const ScenarioSpec& scen, std::uint64_t budget) {
  scen.validate();
  spec.validate();
  if (h.cols() != scen.ues) throw InvalidArgument("exhaustive_search: channel has wrong U");
  if (scen.ues > 64) throw InvalidArgument("exhaustive_search: at most 64 UEs supported");
  const BigCount feasible = count_feasible(scen);
  if (feasible > budget) {
    throw SearchBudgetExceeded(feasible, "exhaustive_search: " + feasible.str() +
                                             " feasible schedules exceed the budget of " +
                                             std::to_string(budget));
  }

  const int ues = scen.ues;
  const int slots = scen.slots;
  std::unordered_map<std::uint64_t, double> slot_cache;
  auto slot_value = [&](std::uint64_t mask) {
    if (auto it = slot_cache.find(mask); it != slot_cache.end()) return it->second;
    RVector c = RVector::Zero(ues);
    for (int u = 0; u < ues; ++u) {
      if ((mask >> u) & 1U) c(u) = 1.0;
    }
    const double value = slot_cost(spec.kind, h, c, spec.link);
    slot_cache.emplace(mask, value);
    return value;
  };

  std::vector<int> need(static_cast<std::size_t>(ues), scen.t_s);
  std::vector<std::uint64_t> chosen(static_cast<std::size_t>(slots), 0);
  std::vector<std::uint64_t> best_masks;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> combo;

  // Recursion over slots; within a slot, lexicographic u_s-subsets of the UEs
  // that still need slots.
  auto recurse = [&](auto&& self, int slot, double partial) -> void {
    if (slot == slots) {
      if (partial < best) {
        best = partial;
        best_masks = chosen;
      }
      return;
    }
    const int remaining_after = slots - slot - 1;
    std::vector<int> candidates;
    for (int u = 0; u < ues; ++u) {
      if (need[u] > 0) candidates.push_back(u);
    }
    const int n = static_cast<int>(candidates.size());
    if (n < scen.u_s) return;
    std::vector<int> idx(static_cast<std::size_t>(scen.u_s));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      std::uint64_t mask = 0;
      for (int i : idx) mask |= std::uint64_t{1} << candidates[i];
      bool viable = true;
      for (int u = 0; u < ues && viable; ++u) {
        const int left = need[u] - static_cast<int>((mask >> u) & 1U);
        viable = left <= remaining_after;
      }
      if (viable) {
        for (int i : idx) --need[candidates[i]];
        chosen[slot] = mask;
        self(self, slot + 1, partial + slot_value(mask));
        for (int i : idx) ++need[candidates[i]];
      }
      // Next combination in lexicographic order.
      int pos = scen.u_s - 1;
      while (pos >= 0 && idx[pos] == n - scen.u_s + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int q = pos + 1; q < scen.u_s; ++q) idx[q] = idx[q - 1] + 1;
    }
  };
  recurse(recurse, 0, 0.0);
  if (best_masks.empty()) throw InvalidArgument("exhaustive_search: no feasible schedule");

  RMatrix c = RMatrix::Zero(ues, slots);
  for (int t = 0; t < slots; ++t) {
    for (int u = 0; u < ues; ++u) {
      if ((best_masks[t] >> u) & 1U) c(u, t) = 1.0;
    }
  }
  ScheduleSolution out;
  out.schedule = ScheduleMatrix::binary(std::move(c));
  // Re-evaluate in slot order so the objective matches base_cost bit for bit.
  out.objective = base_cost(spec.kind, out.schedule.entries(), h, spec.link);
  out.alpha = spec.alpha;
  return out;
}

ScheduleMatrix greedy_sumrate(const CMatrix& h, const LinkParams& link,
                              const ScenarioSpec& scen) {
  require_single_slot_per_ue(scen, "greedy_sumrate");
  link.validate();
  if (h.cols() != scen.ues) throw InvalidArgument("greedy_sumrate: channel has wrong U");
  RMatrix c = RMatrix::Zero(scen.ues, scen.slots);
  std::vector<bool> scheduled(static_cast<std::size_t>(scen.ues), false);
  for (int t = 0; t < scen.slots; ++t) {
    RVector mask = RVector::Zero(scen.ues);
    for (int pick = 0; pick < scen.u_s; ++pick) {
      int best = -1;
      double best_rate = -std::numeric_limits<double>::infinity();
      for (int u = 0; u < scen.ues; ++u) {
        if (scheduled[u]) continue;
        mask(u) = 1.0;
        const double rate = -sumrate_slot_cost(h, mask, link);
        mask(u) = 0.0;
        if (rate > best_rate) {
          best_rate = rate;
          best = u;
        }
      }
      mask(best) = 1.0;
      scheduled[best] = true;
    }
    c.col(t) = mask;
  }
  return ScheduleMatrix::binary(std::move(c));
}

ScheduleMatrix sus(const CMatrix& h, const ScenarioSpec& scen, double eps) {
  require_single_slot_per_ue(scen, "sus");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("sus: eps must lie in (0, 1)");
  if (h.cols() != scen.ues) throw InvalidArgument("sus: channel has wrong U");
  const Eigen::Index antennas = h.rows();
  RMatrix c = RMatrix::Zero(scen.ues, scen.slots);
  std::vector<bool> scheduled(static_cast<std::size_t>(scen.ues), false);

  for (int t = 0; t < scen.slots; ++t) {
    // Orthonormal basis of the span of the UEs picked in this slot.
    CMatrix basis(antennas, 0);
    for (int pick = 0; pick < scen.u_s; ++pick) {
      int best = -1;
      double best_norm = -1.0;
      int fallback = -1;
      double fallback_corr = std::numeric_limits<double>::infinity();
      for (int u = 0; u < scen.ues; ++u) {
        if (scheduled[u]) continue;
        const CVector hu = h.col(u);
        const CVector coeff = basis.adjoint() * hu;
        const CVector orth = hu - basis * coeff;
        const double hn = hu.norm();
        const double corr = hn > 0.0 ? coeff.norm() / hn : 1.0;
        if (corr < eps && orth.norm() > best_norm) {
          best_norm = orth.norm();
          best = u;
        }
        if (corr < fallback_corr) {
          fallback_corr = corr;
          fallback = u;
        }
      }
      const int chosen = best >= 0 ? best : fallback;
      scheduled[chosen] = true;
      c(chosen, t) = 1.0;
      CVector orth = h.col(chosen) - basis * (basis.adjoint() * h.col(chosen));
      const double on = orth.norm();
      if (on > 1e-12 * std::max(1.0, h.col(chosen).norm())) {
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.col(basis.cols() - 1) = orth / on;
      }
    }
  }
  return ScheduleMatrix::binary(std::move(c));
}

ScheduleMatrix random_schedule(const ScenarioSpec& scen, std::uint64_t seed) {
  require_single_slot_per_ue(scen, "random_schedule");
  std::vector<int> perm(static_cast<std::size_t>(scen.ues));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  RMatrix c = RMatrix::Zero(scen.ues, scen.slots);
  for (int t = 0; t < scen.slots; ++t) {
    for (int j = 0; j < scen.u_s; ++j) c(perm[t * scen.u_s + j], t) = 1.0;
  }
  return ScheduleMatrix::binary(std::move(c));
}

ScheduleMatrix no_scheduling(int ues, int slots) {
  if (ues < 1 || slots < 1) throw InvalidArgument("no_scheduling: U and T must be >= 1");
  return ScheduleMatrix::ones(ues, slots);
}

}  // namespace mmsched
