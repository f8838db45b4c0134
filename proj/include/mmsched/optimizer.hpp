#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mmsched/costs.hpp"
#include "mmsched/projection.hpp"

namespace mmsched {

/// Forward-backward splitting settings. Unset tau / alpha are derived from
/// the problem instance (see solve()).
struct FbsConfig {
  std::optional<double> tau;
  int i_max = 100;
  int restarts = 1;
  std::optional<double> alpha;
  DrsConfig drs;
  std::uint64_t seed = 0;
  /// Restarts run concurrently on this many threads; results do not depend
  /// on it.
  int workers = 1;
  /// Descend on the base cost from each quantized candidate (polish_schedule).
  bool local_search = true;

  void validate() const;
};

struct ScheduleSolution {
  ScheduleMatrix schedule = ScheduleMatrix::ones(0, 0);
  /// Base cost F(C*) of the returned binary schedule (no regularizer).
  double objective = 0.0;
  int restart_index = 0;
  int iterations_used = 0;
  bool feasibility_repaired = false;
  /// Step size and regularizer weight actually used.
  double tau = 0.0;
  double alpha = 0.0;
  /// Quantized objective of every restart, NaN for aborted restarts.
  std::vector<double> restart_objectives;
};

/// i_max iterations of C <- prox_{C_U ∩ C_T}(C - tau grad F~(C)) from init.
/// Throws NumericalError if a gradient turns non-finite.
RMatrix fbs_once(const CMatrix& h, const CostFunctionSpec& spec, const SchedulingConstraints& k,
                 const FbsConfig& cfg, const RMatrix& init, double tau);

inline RMatrix fbs_once(const CMatrix& h, const CostFunctionSpec& spec,
                        const SchedulingConstraints& k, const FbsConfig& cfg,
                        const RMatrix& init) {
  if (!cfg.tau) throw InvalidArgument("fbs_once: tau must be set");
  return fbs_once(h, spec, k, cfg, init, *cfg.tau);
}

struct QuantizedSchedule {
  ScheduleMatrix schedule;
  bool repaired = false;
};

/// Rounds a relaxed schedule to a feasible binary one: per slot the
/// clamp(round(column sum), u_min, u_max) largest entries are activated (ties
/// to the lower UE index), then row-sum violations are removed by swapping
/// activations within a slot, from the over-scheduled UE's weakest entry to
/// the strongest eligible idle UE.
QuantizedSchedule quantize_repair(const RMatrix& relaxed, const SchedulingConstraints& k);

/// Best-improvement descent on the base cost over feasible single flips,
/// moves within a row or column, and 2x2 exchanges between two UEs and two
/// slots. Stops at a schedule no such move improves. b must be feasible and
/// stays feasible; returns the number of moves taken.
int polish_schedule(RMatrix& b, const CMatrix& h, const CostFunctionSpec& spec,
                    const SchedulingConstraints& k);

/// Instance-derived defaults.
double estimate_step_size(const CMatrix& h, const CostFunctionSpec& spec,
                          const SchedulingConstraints& k, std::uint64_t seed);
double balance_regularizer(const CMatrix& h, const CostFunctionSpec& spec,
                           const SchedulingConstraints& k, std::uint64_t seed);

/// Multi-restart FBS: uniform random initializations, each run through
/// fbs_once and quantize_repair (then polish_schedule when local_search is
/// set), scored by the base cost F; the lowest wins (ties to the lower
/// restart index).
ScheduleSolution solve(const CMatrix& h, const CostFunctionSpec& spec,
                       const SchedulingConstraints& k, const FbsConfig& cfg);

}  // namespace mmsched
