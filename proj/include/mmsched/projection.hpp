#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mmsched/model.hpp"

namespace mmsched {

/// Sum bounds for { p in [0,1]^M : l_min <= sum p <= l_max }.
struct BoxSimplexSpec {
  double l_min = 0.0;
  double l_max = 0.0;

  void validate(Eigen::Index dimension) const {
    if (!(0.0 <= l_min && l_min <= l_max && l_min <= static_cast<double>(dimension))) {
      throw InvalidArgument("BoxSimplexSpec: need 0 <= l_min <= l_max and l_min <= M (got l_min=" +
                            std::to_string(l_min) + ", l_max=" + std::to_string(l_max) +
                            ", M=" + std::to_string(dimension) + ")");
    }
  }
};

/// Euclidean projection of q onto { 0 <= p_i <= 1, l_min <= sum p <= l_max }.
///
/// The minimizer has the form p = clamp(q - mu, 0, 1). If the plain clamp
/// already satisfies the sum bounds mu = 0; otherwise mu is located on the
/// piecewise-linear, nonincreasing map mu -> sum clamp(q_i - mu, 0, 1) by
/// scanning its sorted breakpoints {q_i - 1, q_i}, taking the smallest mu
/// that attains the violated bound. O(M log M).
template <typename Derived>
RVectorX<typename Derived::Scalar> project_box_simplex(const Eigen::MatrixBase<Derived>& q,
                                                       const BoxSimplexSpec& spec) {
  using Real = typename Derived::Scalar;
  const Eigen::Index m = q.size();
  spec.validate(m);
  if (!q.allFinite()) throw InvalidArgument("project_box_simplex: non-finite input");

  auto clamp_shift = [&](Real mu) -> RVectorX<Real> {
    return (q.array() - mu).cwiseMax(Real(0)).cwiseMin(Real(1)).matrix();
  };

  RVectorX<Real> p = clamp_shift(Real(0));
  const Real clamped_sum = p.sum();
  Real target;
  if (clamped_sum > static_cast<Real>(spec.l_max)) {
    target = static_cast<Real>(spec.l_max);
  } else if (clamped_sum < static_cast<Real>(spec.l_min)) {
    target = static_cast<Real>(spec.l_min);
  } else {
    return p;
  }

  // Breakpoints: at q_i - 1 coordinate i leaves the upper bound (becomes
  // free), at q_i it reaches the lower bound.
  struct Breakpoint {
    Real mu;
    int kind;  // +1: becomes free, -1: becomes zero
  };
  std::vector<Breakpoint> points;
  points.reserve(static_cast<std::size_t>(2 * m));
  for (Eigen::Index i = 0; i < m; ++i) {
    points.push_back({q(i) - Real(1), +1});
    points.push_back({q(i), -1});
  }
  std::sort(points.begin(), points.end(), [](const Breakpoint& a, const Breakpoint& b) {
    return a.mu < b.mu || (a.mu == b.mu && a.kind > b.kind);
  });

  // Walk right from the leftmost breakpoint where every coordinate sits at 1.
  Real sum_at = static_cast<Real>(m);
  int free_count = 0;
  Real mu = points.front().mu;
  bool found = false;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const Real here = points[j].mu;
    const Real sum_here = sum_at - static_cast<Real>(free_count) * (here - mu);
    if (sum_here <= target) {
      // Target reached inside (mu, here]; the segment slope is -free_count.
      mu = free_count > 0 ? mu + (sum_at - target) / static_cast<Real>(free_count) : mu;
      found = true;
      break;
    }
    sum_at = sum_here;
    mu = here;
    free_count += points[j].kind;
  }
  if (!found) {
    // Only reachable for target 0: past the last breakpoint everything is 0.
    mu = points.back().mu;
  }

  // Re-derive mu from the identified active set to remove accumulated
  // rounding from the incremental walk.
  Real at_one = 0;
  Real free_sum = 0;
  int n_free = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Real shifted = q(i) - mu;
    if (shifted >= Real(1)) {
      at_one += 1;
    } else if (shifted > Real(0)) {
      free_sum += q(i);
      ++n_free;
    }
  }
  RVectorX<Real> best = clamp_shift(mu);
  if (n_free > 0) {
    // Keep the refinement if it meets the bound at least as closely. The
    // sum map is monotone in mu, so this cannot move away from the optimum.
    const Real refined = (at_one + free_sum - target) / static_cast<Real>(n_free);
    RVectorX<Real> candidate = clamp_shift(refined);
    if (std::abs(candidate.sum() - target) <= std::abs(best.sum() - target)) best = std::move(candidate);
  }
  return best;
}

/// DRS parameters for the projection onto C_U ∩ C_T.
struct DrsConfig {
  double beta = 1.0;
  int k_max = 50;
  double tol = 1e-6;

  void validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("DRS: beta must be >= 0");
    if (k_max < 1) throw InvalidArgument("DRS: k_max must be >= 1");
    if (!(tol > 0.0)) throw InvalidArgument("DRS: tol must be > 0");
  }
};

struct DrsResult {
  RMatrix v;
  /// Largest violation of the per-UE (row-sum) bounds by v.
  double ct_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// argmin_{X in C_U} ||X - (beta Z + G) / (beta + 1)||_F: column-wise
/// projection onto the per-slot sum bounds [u_min, u_max].
template <typename DerivedG, typename DerivedZ>
RMatrixX<typename DerivedG::Scalar> prox_psi(const Eigen::MatrixBase<DerivedG>& g,
                                             const Eigen::MatrixBase<DerivedZ>& z, double beta,
                                             const SchedulingConstraints& k) {
  using Real = typename DerivedG::Scalar;
  if (!(beta >= 0.0)) throw InvalidArgument("prox_psi: beta must be >= 0");
  const RMatrixX<Real> blend = (static_cast<Real>(beta) * z + g) / static_cast<Real>(beta + 1.0);
  const BoxSimplexSpec spec{static_cast<double>(k.u_min), static_cast<double>(k.u_max)};
  RMatrixX<Real> out(blend.rows(), blend.cols());
  for (Eigen::Index t = 0; t < blend.cols(); ++t) out.col(t) = project_box_simplex(blend.col(t), spec);
  return out;
}

/// Row-wise counterpart of prox_psi for C_T with bounds [t_min, t_max].
template <typename DerivedX, typename DerivedZ>
RMatrixX<typename DerivedX::Scalar> prox_xi(const Eigen::MatrixBase<DerivedX>& x,
                                            const Eigen::MatrixBase<DerivedZ>& z, double beta,
                                            const SchedulingConstraints& k) {
  using Real = typename DerivedX::Scalar;
  if (!(beta >= 0.0)) throw InvalidArgument("prox_xi: beta must be >= 0");
  const RMatrixX<Real> blend = (static_cast<Real>(beta) * z + x) / static_cast<Real>(beta + 1.0);
  const BoxSimplexSpec spec{static_cast<double>(k.t_min), static_cast<double>(k.t_max)};
  RMatrixX<Real> out(blend.rows(), blend.cols());
  for (Eigen::Index u = 0; u < blend.rows(); ++u) {
    out.row(u) = project_box_simplex(blend.row(u).transpose(), spec).transpose();
  }
  return out;
}

inline double row_sum_violation(const RMatrix& v, const SchedulingConstraints& k) {
  const RVector sums = v.rowwise().sum();
  double worst = 0.0;
  for (Eigen::Index u = 0; u < sums.size(); ++u) {
    worst = std::max({worst, k.t_min - sums(u), sums(u) - k.t_max});
  }
  return worst;
}

/// Projection of z onto C_U ∩ C_T by Douglas-Rachford splitting:
///   V <- prox_psi(G)
///   G <- prox_xi(2V - G) + G - V
/// from G = 0, until ||V_new - V_old||_F <= tol or k_max iterations. The
/// returned V lies in C_U exactly; its C_T violation is reported.
inline DrsResult drs_project(const RMatrix& z, const SchedulingConstraints& k,
                             const DrsConfig& cfg = {}) {
  k.validate();
  cfg.validate();
  if (z.rows() != k.ues || z.cols() != k.slots) {
    throw InvalidArgument("drs_project: input shape does not match the constraints");
  }
  DrsResult result;
  RMatrix g = RMatrix::Zero(z.rows(), z.cols());
  RMatrix v_prev;
  for (int iter = 1; iter <= cfg.k_max; ++iter) {
    RMatrix v = prox_psi(g, z, cfg.beta, k);
    const RMatrix reflected = prox_xi(2.0 * v - g, z, cfg.beta, k);
    g += reflected - v;
    result.iterations = iter;
    const bool settled = iter > 1 && (v - v_prev).norm() <= cfg.tol;
    v_prev = std::move(v);
    if (settled) {
      result.converged = true;
      break;
    }
  }
  result.v = std::move(v_prev);
  result.ct_residual = row_sum_violation(result.v, k);
  return result;
}

}  // namespace mmsched
