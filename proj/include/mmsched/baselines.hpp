#pragma once

#include <cstdint>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

#include "mmsched/optimizer.hpp"

namespace mmsched {

using BigCount = boost::multiprecision::cpp_int;

/// B antennas, U UEs, T slots; every slot serves exactly u_s UEs and every UE
/// transmits in exactly t_s slots.
struct ScenarioSpec {
  int antennas = 0;
  int ues = 0;
  int slots = 0;
  int t_s = 1;
  int u_s = 0;

  void validate() const;
  SchedulingConstraints constraints() const {
    return SchedulingConstraints::exact(ues, slots, u_s, t_s);
  }
};

/// Number of binary U x T matrices with column sums u_s and row sums t_s.
BigCount count_feasible(const ScenarioSpec& scen);

class SearchBudgetExceeded : public std::runtime_error {
 public:
  SearchBudgetExceeded(BigCount count, const std::string& what)
      : std::runtime_error(what), count_(std::move(count)) {}
  const BigCount& count() const { return count_; }

 private:
  BigCount count_;
};

/// Global minimizer of the base cost over all feasible binary schedules.
/// Enumeration is lexicographic over the slot-1 UE set, then recursively;
/// the first minimizer found is kept. Refuses when the feasible count exceeds
/// `budget`.
ScheduleSolution exhaustive_search(const CMatrix& h, const CostFunctionSpec& spec,
                                   const ScenarioSpec& scen, std::uint64_t budget);

/// Slot by slot, repeatedly add the unscheduled UE that maximizes the
/// post-LMMSE sum rate of the slot. Requires t_s = 1.
ScheduleMatrix greedy_sumrate(const CMatrix& h, const LinkParams& link, const ScenarioSpec& scen);

/// Semiorthogonal user selection. Candidates are restricted to UEs whose
/// channel has normalized correlation below eps with the span of the UEs
/// already picked in the slot; among them, the largest orthogonal component
/// wins. When no candidate qualifies, the least-correlated remaining UE is
/// admitted so every slot is filled to exactly u_s. Requires t_s = 1.
ScheduleMatrix sus(const CMatrix& h, const ScenarioSpec& scen, double eps = 0.4);

/// Uniformly random partition of the UEs into T groups of u_s. Requires t_s = 1.
ScheduleMatrix random_schedule(const ScenarioSpec& scen, std::uint64_t seed);

/// Every UE in every slot.
ScheduleMatrix no_scheduling(int ues, int slots);

}  // namespace mmsched
