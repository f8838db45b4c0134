#include "mmsched/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <deque>

#include "mmsched/parallel.hpp"
#include "mmsched/random.hpp"

namespace mmsched {

namespace {

constexpr std::uint64_t kInitTag = 0x1;
constexpr std::uint64_t kTuneTag = 0x2;

RMatrix uniform_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  RMatrix m(rows, cols);
  for (int t = 0; t < cols; ++t) {
    for (int u = 0; u < rows; ++u) m(u, t) = rng.uniform();
  }
  return m;
}

// Min-cost flow with successive shortest paths (Bellman-Ford); graphs here
// have at most U*T + U + T + 4 nodes.
class FlowNetwork {
 public:
  explicit FlowNetwork(int nodes) : adj_(static_cast<std::size_t>(nodes)) {}

  int add_edge(int from, int to, int cap, double cost) {
    adj_[from].push_back(static_cast<int>(edges_.size()));
    edges_.push_back({to, cap, cost});
    adj_[to].push_back(static_cast<int>(edges_.size()));
    edges_.push_back({from, 0, -cost});
    return static_cast<int>(edges_.size()) - 2;
  }

  int flow_on(int edge) const { return edges_[edge ^ 1].cap; }

  int min_cost_flow(int source, int sink, int demand) {
    int sent = 0;
    const auto n = adj_.size();
    while (sent < demand) {
      std::vector<double> dist(n, std::numeric_limits<double>::infinity());
      std::vector<int> via(n, -1);
      std::vector<bool> queued(n, false);
      std::deque<int> queue{source};
      dist[source] = 0.0;
      while (!queue.empty()) {
        const int a = queue.front();
        queue.pop_front();
        queued[a] = false;
        for (int id : adj_[a]) {
          const Edge& e = edges_[id];
          if (e.cap > 0 && dist[a] + e.cost < dist[e.to] - 1e-12) {
            dist[e.to] = dist[a] + e.cost;
            via[e.to] = id;
            if (!queued[e.to]) {
              queued[e.to] = true;
              queue.push_back(e.to);
            }
          }
        }
      }
      if (via[sink] < 0) break;
      int push = demand - sent;
      for (int v = sink; v != source; v = edges_[via[v] ^ 1].to) {
        push = std::min(push, edges_[via[v]].cap);
      }
      for (int v = sink; v != source; v = edges_[via[v] ^ 1].to) {
        edges_[via[v]].cap -= push;
        edges_[via[v] ^ 1].cap += push;
      }
      sent += push;
    }
    return sent;
  }

 private:
  struct Edge {
    int to;
    int cap;
    double cost;
  };
  std::vector<std::vector<int>> adj_;
  std::vector<Edge> edges_;
};

// Feasible binary schedule preferring large relaxed entries. Lower bounds are
// removed with the usual excess/deficit transformation on a circulation.
RMatrix flow_quantize(const RMatrix& relaxed, const SchedulingConstraints& k) {
  const int ues = k.ues;
  const int slots = k.slots;
  const int source = 0;
  const int slot0 = 1;
  const int ue0 = slot0 + slots;
  const int sink = ue0 + ues;
  const int super_source = sink + 1;
  const int super_sink = sink + 2;
  FlowNetwork net(sink + 3);
  std::vector<int> excess(static_cast<std::size_t>(sink + 1), 0);

  auto bounded_edge = [&](int from, int to, int lower, int upper, double cost) {
    excess[from] -= lower;
    excess[to] += lower;
    return net.add_edge(from, to, upper - lower, cost);
  };
  for (int t = 0; t < slots; ++t) bounded_edge(source, slot0 + t, k.u_min, k.u_max, 0.0);
  std::vector<int> assignment(static_cast<std::size_t>(ues * slots));
  for (int t = 0; t < slots; ++t) {
    for (int u = 0; u < ues; ++u) {
      assignment[t * ues + u] = net.add_edge(slot0 + t, ue0 + u, 1, 1.0 - relaxed(u, t));
    }
  }
  for (int u = 0; u < ues; ++u) bounded_edge(ue0 + u, sink, k.t_min, k.t_max, 0.0);
  net.add_edge(sink, source, ues * slots, 0.0);

  int demand = 0;
  for (int v = 0; v <= sink; ++v) {
    if (excess[v] > 0) {
      net.add_edge(super_source, v, excess[v], 0.0);
      demand += excess[v];
    } else if (excess[v] < 0) {
      net.add_edge(v, super_sink, -excess[v], 0.0);
    }
  }
  if (net.min_cost_flow(super_source, super_sink, demand) != demand) {
    throw InvalidArgument("quantize_repair: constraints admit no binary schedule");
  }
  RMatrix out = RMatrix::Zero(ues, slots);
  for (int t = 0; t < slots; ++t) {
    for (int u = 0; u < ues; ++u) out(u, t) = net.flow_on(assignment[t * ues + u]);
  }
  return out;
}

// One greedy repair move; returns false when no move applies.
bool repair_step(RMatrix& b, const RMatrix& relaxed, const SchedulingConstraints& k) {
  const int ues = k.ues;
  const int slots = k.slots;
  const RVector rows = b.rowwise().sum();
  const RVector cols = b.colwise().sum().transpose();

  std::vector<int> slot_order(static_cast<std::size_t>(slots));
  for (int u = 0; u < ues; ++u) {
    if (rows(u) > k.t_max) {
      // Weakest activations of u first.
      std::iota(slot_order.begin(), slot_order.end(), 0);
      std::stable_sort(slot_order.begin(), slot_order.end(),
                       [&](int a, int c) { return relaxed(u, a) < relaxed(u, c); });
      for (int t : slot_order) {
        if (b(u, t) != 1.0) continue;
        int best = -1;
        for (int v = 0; v < ues; ++v) {
          if (b(v, t) == 0.0 && rows(v) < k.t_max &&
              (best < 0 || relaxed(v, t) > relaxed(best, t))) {
            best = v;
          }
        }
        if (best >= 0) {
          b(u, t) = 0.0;
          b(best, t) = 1.0;
          return true;
        }
      }
      for (int t : slot_order) {
        if (b(u, t) == 1.0 && cols(t) > k.u_min) {
          b(u, t) = 0.0;
          return true;
        }
      }
      return false;
    }
  }
  for (int u = 0; u < ues; ++u) {
    if (rows(u) < k.t_min) {
      // Strongest idle slots of u first.
      std::iota(slot_order.begin(), slot_order.end(), 0);
      std::stable_sort(slot_order.begin(), slot_order.end(),
                       [&](int a, int c) { return relaxed(u, a) > relaxed(u, c); });
      for (int t : slot_order) {
        if (b(u, t) != 0.0) continue;
        int worst = -1;
        for (int v = 0; v < ues; ++v) {
          if (b(v, t) == 1.0 && rows(v) > k.t_min &&
              (worst < 0 || relaxed(v, t) < relaxed(worst, t))) {
            worst = v;
          }
        }
        if (worst >= 0) {
          b(worst, t) = 0.0;
          b(u, t) = 1.0;
          return true;
        }
      }
      for (int t : slot_order) {
        if (b(u, t) == 0.0 && cols(t) < k.u_max) {
          b(u, t) = 1.0;
          return true;
        }
      }
      return false;
    }
  }
  return false;
}

}  // namespace

void FbsConfig::validate() const {
  if (tau && !(*tau >= 0.0 && std::isfinite(*tau))) {
    throw InvalidArgument("FbsConfig: tau must be finite and >= 0");
  }
  if (i_max < 1) throw InvalidArgument("FbsConfig: i_max must be >= 1");
  if (restarts < 1) throw InvalidArgument("FbsConfig: restarts must be >= 1");
  if (alpha && !(*alpha >= 0.0 && std::isfinite(*alpha))) {
    throw InvalidArgument("FbsConfig: alpha must be finite and >= 0");
  }
  drs.validate();
}

RMatrix fbs_once(const CMatrix& h, const CostFunctionSpec& spec, const SchedulingConstraints& k,
                 const FbsConfig& cfg, const RMatrix& init, double tau) {
  if (init.rows() != k.ues || init.cols() != k.slots) {
    throw InvalidArgument("fbs_once: init shape does not match the constraints");
  }
  RMatrix c = init;
  for (int i = 0; i < cfg.i_max; ++i) {
    const RMatrix grad = gradient(c, spec, h);
    c = drs_project(c - tau * grad, k, cfg.drs).v;
  }
  return c;
}

QuantizedSchedule quantize_repair(const RMatrix& relaxed, const SchedulingConstraints& k) {
  k.validate();
  if (relaxed.rows() != k.ues || relaxed.cols() != k.slots) {
    throw InvalidArgument("quantize_repair: shape does not match the constraints");
  }
  if (!relaxed.allFinite()) throw InvalidArgument("quantize_repair: non-finite input");

  RMatrix b = RMatrix::Zero(k.ues, k.slots);
  std::vector<int> order(static_cast<std::size_t>(k.ues));
  for (int t = 0; t < k.slots; ++t) {
    const auto active = std::clamp(static_cast<int>(std::lround(relaxed.col(t).sum())), k.u_min,
                                   k.u_max);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int c) { return relaxed(a, t) > relaxed(c, t); });
    for (int j = 0; j < active; ++j) b(order[j], t) = 1.0;
  }

  bool repaired = false;
  const int max_moves = 4 * k.ues * k.slots + 16;
  for (int move = 0; move < max_moves; ++move) {
    if (!repair_step(b, relaxed, k)) break;
    repaired = true;
  }
  ScheduleMatrix schedule = ScheduleMatrix::binary(b);
  if (!validate_schedule(schedule, k)) {
    // Swap repair stalled (only possible with loose inequality bounds).
    schedule = ScheduleMatrix::binary(flow_quantize(relaxed, k));
    repaired = true;
  }
  return {std::move(schedule), repaired};
}

int polish_schedule(RMatrix& b, const CMatrix& h, const CostFunctionSpec& spec,
                    const SchedulingConstraints& k) {
  k.validate();
  if (b.rows() != k.ues || b.cols() != k.slots || h.cols() != k.ues) {
    throw InvalidArgument("polish_schedule: shape does not match the constraints");
  }
  if (!validate_schedule(ScheduleMatrix::binary(b), k)) {
    throw InvalidArgument("polish_schedule: schedule must be feasible");
  }
  const int ues = k.ues;
  const int slots = k.slots;
  auto slot = [&](int t) { return slot_cost(spec.kind, h, b.col(t), spec.link); };
  std::vector<double> cost(static_cast<std::size_t>(slots));
  for (int t = 0; t < slots; ++t) cost[t] = slot(t);
  RVector rows = b.rowwise().sum();
  RVector cols = b.colwise().sum().transpose();

  struct Entry {
    int u;
    int t;
  };
  struct Move {
    std::array<Entry, 4> flips;
    int size = 0;
    int t = 0;
    int s = -1;  // second touched slot, if any
  };
  auto apply = [&](const Move& m) {
    for (int i = 0; i < m.size; ++i) b(m.flips[i].u, m.flips[i].t) = 1.0 - b(m.flips[i].u, m.flips[i].t);
  };

  int moves = 0;
  for (;;) {
    double total = std::accumulate(cost.begin(), cost.end(), 0.0);
    double best_gain = 1e-12 * std::max(1.0, std::abs(total));
    std::optional<Move> best;
    auto consider = [&](const Move& m) {
      apply(m);
      double before = cost[m.t];
      double after = slot(m.t);
      if (m.s >= 0) {
        before += cost[m.s];
        after += slot(m.s);
      }
      apply(m);
      if (before - after > best_gain) {
        best_gain = before - after;
        best = m;
      }
    };

    for (int t = 0; t < slots; ++t) {
      for (int u = 0; u < ues; ++u) {
        const bool on = b(u, t) == 1.0;
        const bool can_flip = on ? rows(u) > k.t_min && cols(t) > k.u_min
                                 : rows(u) < k.t_max && cols(t) < k.u_max;
        if (can_flip) consider(Move{{{{u, t}}}, 1, t});
        if (!on || rows(u) <= k.t_min) continue;
        // u hands slot t to an idle v.
        for (int v = 0; v < ues; ++v) {
          if (b(v, t) == 0.0 && rows(v) < k.t_max) consider(Move{{{{u, t}, {v, t}}}, 2, t});
        }
      }
    }
    for (int u = 0; u < ues; ++u) {
      for (int t = 0; t < slots; ++t) {
        if (b(u, t) != 1.0 || cols(t) <= k.u_min) continue;
        // u moves from slot t to an idle slot s.
        for (int s = 0; s < slots; ++s) {
          if (b(u, s) == 0.0 && cols(s) < k.u_max) consider(Move{{{{u, t}, {u, s}}}, 2, t, s});
        }
      }
    }
    for (int t = 0; t < slots; ++t) {
      for (int s = t + 1; s < slots; ++s) {
        for (int u = 0; u < ues; ++u) {
          if (b(u, t) != 1.0 || b(u, s) != 0.0) continue;
          for (int v = 0; v < ues; ++v) {
            if (b(v, s) != 1.0 || b(v, t) != 0.0) continue;
            consider(Move{{{{u, t}, {u, s}, {v, s}, {v, t}}}, 4, t, s});
          }
        }
      }
    }

    if (!best) return moves;
    apply(*best);
    cost[best->t] = slot(best->t);
    if (best->s >= 0) cost[best->s] = slot(best->s);
    rows = b.rowwise().sum();
    cols = b.colwise().sum().transpose();
    ++moves;
  }
}

double estimate_step_size(const CMatrix& h, const CostFunctionSpec& spec,
                          const SchedulingConstraints& k, std::uint64_t seed) {
  CostFunctionSpec base = spec;
  base.alpha = 0.0;
  const RMatrix c1 = uniform_matrix(k.ues, k.slots, derive_seed(seed, 0, kTuneTag));
  const RMatrix c2 = uniform_matrix(k.ues, k.slots, derive_seed(seed, 1, kTuneTag));
  const double lipschitz =
      (gradient(c1, base, h) - gradient(c2, base, h)).norm() / (c1 - c2).norm();
  // Curvature of the regularizer is -2 alpha; it only adds concavity.
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) return 1.0;
  return 0.05 / lipschitz;
}

double balance_regularizer(const CMatrix& h, const CostFunctionSpec& spec,
                           const SchedulingConstraints& k, std::uint64_t seed) {
  CostFunctionSpec base = spec;
  base.alpha = 0.0;
  const RMatrix c = uniform_matrix(k.ues, k.slots, derive_seed(seed, 0, kTuneTag));
  const double grad_scale = gradient(c, base, h).cwiseAbs().mean();
  const double offset = (c.array() - 0.5).abs().mean();
  if (!(offset > 0.0) || !std::isfinite(grad_scale)) return 0.0;
  // |dR/dC| = 2 alpha |C - 1/2|
  return grad_scale / (2.0 * offset);
}

ScheduleSolution solve(const CMatrix& h, const CostFunctionSpec& spec,
                       const SchedulingConstraints& k, const FbsConfig& cfg) {
  spec.validate();
  k.validate();
  cfg.validate();
  if (h.cols() != k.ues) throw InvalidArgument("solve: channel and constraints disagree on U");

  CostFunctionSpec augmented = spec;
  augmented.alpha = cfg.alpha ? *cfg.alpha : balance_regularizer(h, spec, k, cfg.seed);
  const double tau = cfg.tau ? *cfg.tau : estimate_step_size(h, spec, k, cfg.seed);

  struct Candidate {
    std::optional<QuantizedSchedule> quantized;
    double objective = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Candidate> candidates(static_cast<std::size_t>(cfg.restarts));
  parallel_for(candidates.size(), cfg.workers, [&](std::size_t r) {
    const RMatrix init = uniform_matrix(k.ues, k.slots, derive_seed(cfg.seed, r, kInitTag));
    try {
      const RMatrix relaxed = fbs_once(h, augmented, k, cfg, init, tau);
      auto quantized = quantize_repair(relaxed.cwiseMax(0.0).cwiseMin(1.0), k);
      if (cfg.local_search) {
        RMatrix b = quantized.schedule.entries();
        polish_schedule(b, h, spec, k);
        quantized.schedule = ScheduleMatrix::binary(b);
      }
      candidates[r].objective = base_cost(spec.kind, quantized.schedule.entries(), h, spec.link);
      candidates[r].quantized = std::move(quantized);
    } catch (const NumericalError&) {
      // Aborted restart; left empty.
    }
  });

  int best = -1;
  for (int r = 0; r < cfg.restarts; ++r) {
    if (!candidates[r].quantized) continue;
    if (best < 0 || candidates[r].objective < candidates[best].objective) best = r;
  }
  if (best < 0) throw NumericalError("solve: every restart aborted");

  ScheduleSolution out;
  out.schedule = candidates[best].quantized->schedule;
  out.feasibility_repaired = candidates[best].quantized->repaired;
  out.objective = candidates[best].objective;
  out.restart_index = best;
  out.iterations_used = cfg.i_max;
  out.tau = tau;
  out.alpha = augmented.alpha;
  out.restart_objectives.reserve(candidates.size());
  for (const auto& cand : candidates) out.restart_objectives.push_back(cand.objective);
  return out;
}

}  // namespace mmsched
