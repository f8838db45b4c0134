#pragma once

// Scheduling objectives on (relaxed or binary) U x T schedules and their
// gradients with respect to the schedule entries.
//
// Cost evaluation goes through the equalizer W_t explicitly. The gradients
// use closed forms in K_t = (D_t A D_t + rho I)^{-1}, A = H^H H, rho = N0/Es:
//
//   MSE per slot:      F_t = N0 * sum_u c_u^2 [K_t]_uu
//   sum rate per slot: F_t = sum_u log2(rho [K_t]_uu)      (1 + SINR_u = 1 / (rho K_uu))
//
// with dK = -K dG K and dG/dc_v = E_v A D + D A E_v. The two routes are kept
// separate so the finite-difference check compares independent code paths.

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "mmsched/model.hpp"

namespace mmsched {

enum class CostKind { PostLmmseMse, PostLmmseSumRate };

inline std::string_view to_string(CostKind kind) {
  return kind == CostKind::PostLmmseMse ? "mse" : "rate";
}

inline CostKind parse_cost_kind(std::string_view text) {
  if (text == "mse" || text == "post_lmmse_mse") return CostKind::PostLmmseMse;
  if (text == "rate" || text == "sumrate" || text == "post_lmmse_sumrate") {
    return CostKind::PostLmmseSumRate;
  }
  throw InvalidArgument("unknown cost kind: " + std::string(text));
}

struct CostFunctionSpec {
  CostKind kind = CostKind::PostLmmseMse;
  LinkParams link;
  double alpha = 0.0;

  void validate() const {
    link.validate();
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
      throw InvalidArgument("CostFunctionSpec: alpha must be finite and >= 0");
    }
  }
};

namespace detail {

template <typename DerivedH, typename DerivedC>
void check_shapes(const Eigen::MatrixBase<DerivedH>& h, const Eigen::MatrixBase<DerivedC>& c) {
  if (c.rows() != h.cols()) {
    throw InvalidArgument("cost: schedule has " + std::to_string(c.rows()) +
                          " rows but the channel has " + std::to_string(h.cols()) + " UEs");
  }
}

}  // namespace detail

/// E||D s - D W^H y||^2 for one slot in closed form:
///   Es ||D (I - W^H H_t)||_F^2 + N0 ||D W^H||_F^2,  H_t = H D, D = diag(c_t).
template <typename DerivedH, typename DerivedC>
typename DerivedH::RealScalar mse_slot_cost(const Eigen::MatrixBase<DerivedH>& h,
                                            const Eigen::MatrixBase<DerivedC>& c_t,
                                            const LinkParams& link) {
  using Real = typename DerivedH::RealScalar;
  using Complex = std::complex<Real>;
  const CMatrixX<Real> h_t = mask_channel(h, c_t);
  const CMatrixX<Real> w = lmmse_matrix(h_t, link);
  const auto d = c_t.template cast<Complex>().asDiagonal();
  const Eigen::Index ues = h.cols();
  const CMatrixX<Real> residual =
      d * (CMatrixX<Real>::Identity(ues, ues) - w.adjoint() * h_t);
  const CMatrixX<Real> noise_gain = d * w.adjoint();
  return static_cast<Real>(link.es) * residual.squaredNorm() +
         static_cast<Real>(link.n0) * noise_gain.squaredNorm();
}

/// -sum_u log2(1 + SINR_u) for one slot; idle UEs contribute 0.
template <typename DerivedH, typename DerivedC>
typename DerivedH::RealScalar sumrate_slot_cost(const Eigen::MatrixBase<DerivedH>& h,
                                                const Eigen::MatrixBase<DerivedC>& c_t,
                                                const LinkParams& link) {
  using Real = typename DerivedH::RealScalar;
  const CMatrixX<Real> h_t = mask_channel(h, c_t);
  const CMatrixX<Real> w = lmmse_matrix(h_t, link);
  Real rate = 0;
  for (Eigen::Index u = 0; u < h.cols(); ++u) {
    rate += std::log2(Real(1) + sinr_per_ue(w, h_t, u, link));
  }
  return -rate;
}

template <typename DerivedH, typename DerivedC>
typename DerivedH::RealScalar slot_cost(CostKind kind, const Eigen::MatrixBase<DerivedH>& h,
                                        const Eigen::MatrixBase<DerivedC>& c_t,
                                        const LinkParams& link) {
  return kind == CostKind::PostLmmseMse ? mse_slot_cost(h, c_t, link)
                                        : sumrate_slot_cost(h, c_t, link);
}

/// Base objective F(C): sum of per-slot costs, accumulated in slot order.
template <typename DerivedH, typename DerivedC>
typename DerivedH::RealScalar base_cost(CostKind kind, const Eigen::MatrixBase<DerivedC>& c,
                                        const Eigen::MatrixBase<DerivedH>& h,
                                        const LinkParams& link) {
  detail::check_shapes(h, c);
  typename DerivedH::RealScalar total = 0;
  for (Eigen::Index t = 0; t < c.cols(); ++t) total += slot_cost(kind, h, c.col(t), link);
  return total;
}

template <typename DerivedH>
double mse_cost(const ScheduleMatrix& c, const Eigen::MatrixBase<DerivedH>& h,
                const LinkParams& link) {
  return base_cost(CostKind::PostLmmseMse, c.entries(), h, link);
}

template <typename DerivedH>
double sumrate_cost(const ScheduleMatrix& c, const Eigen::MatrixBase<DerivedH>& h,
                    const LinkParams& link) {
  return base_cost(CostKind::PostLmmseSumRate, c.entries(), h, link);
}

/// -alpha * sum (C_ut - 1/2)^2; pushes relaxed entries towards {0, 1}.
template <typename DerivedC>
typename DerivedC::Scalar regularizer(const Eigen::MatrixBase<DerivedC>& c, double alpha) {
  using Real = typename DerivedC::Scalar;
  return -static_cast<Real>(alpha) * (c.array() - Real(0.5)).square().sum();
}

inline double regularizer(const ScheduleMatrix& c, double alpha) {
  return regularizer(c.entries(), alpha);
}

template <typename DerivedC, typename DerivedH>
typename DerivedH::RealScalar augmented_cost(const Eigen::MatrixBase<DerivedC>& c,
                                             const CostFunctionSpec& spec,
                                             const Eigen::MatrixBase<DerivedH>& h) {
  return base_cost(spec.kind, c, h, spec.link) + regularizer(c, spec.alpha);
}

template <typename DerivedH>
double augmented_cost(const ScheduleMatrix& c, const CostFunctionSpec& spec,
                      const Eigen::MatrixBase<DerivedH>& h) {
  return augmented_cost(c.entries(), spec, h);
}

/// Gradient of the base cost of one slot with respect to c_t, given the
/// channel Gram matrix A = H^H H.
template <typename DerivedA, typename DerivedC>
RVectorX<typename DerivedA::RealScalar> slot_gradient(CostKind kind,
                                                      const Eigen::MatrixBase<DerivedA>& gram,
                                                      const Eigen::MatrixBase<DerivedC>& c_t,
                                                      const LinkParams& link) {
  using Real = typename DerivedA::RealScalar;
  using Complex = std::complex<Real>;
  const Eigen::Index ues = gram.rows();
  const Real rho = static_cast<Real>(link.noise_to_signal());
  const RVectorX<Real> c = c_t;

  // G = D A D + rho I, K = G^{-1}
  CMatrixX<Real> g = c.template cast<Complex>().asDiagonal() * gram *
                     c.template cast<Complex>().asDiagonal();
  g.diagonal().array() += rho;
  const CMatrixX<Real> k = g.ldlt().solve(CMatrixX<Real>::Identity(ues, ues));
  const RVectorX<Real> k_diag = k.diagonal().real();

  // Weighting P such that the cost is tr(P K) (MSE) or sum log K_uu (rate).
  RVectorX<Real> weight(ues);
  if (kind == CostKind::PostLmmseMse) {
    weight = c.cwiseAbs2();
  } else {
    weight = k_diag.cwiseInverse();
  }
  const CMatrixX<Real> m = k * weight.template cast<Complex>().asDiagonal() * k;
  // (M D A)_vv
  const CMatrixX<Real> da = c.template cast<Complex>().asDiagonal() * gram;
  RVectorX<Real> cross(ues);
  for (Eigen::Index v = 0; v < ues; ++v) {
    cross(v) = (m.row(v) * da.col(v)).value().real();
  }

  RVectorX<Real> grad(ues);
  if (kind == CostKind::PostLmmseMse) {
    grad = static_cast<Real>(2.0 * link.n0) * (c.cwiseProduct(k_diag) - cross);
  } else {
    grad = -(Real(2) / std::numbers::ln2_v<Real>)*cross;
  }
  if (!grad.allFinite()) throw NumericalError("gradient: non-finite intermediate");
  return grad;
}

/// Gradient of F(C) + R(C) with respect to the real entries of C.
template <typename DerivedC, typename DerivedH>
RMatrixX<typename DerivedH::RealScalar> gradient(const Eigen::MatrixBase<DerivedC>& c,
                                                 const CostFunctionSpec& spec,
                                                 const Eigen::MatrixBase<DerivedH>& h) {
  using Real = typename DerivedH::RealScalar;
  detail::check_shapes(h, c);
  spec.validate();
  const CMatrixX<Real> gram = h.adjoint() * h;
  RMatrixX<Real> grad(c.rows(), c.cols());
  for (Eigen::Index t = 0; t < c.cols(); ++t) {
    grad.col(t) = slot_gradient(spec.kind, gram, c.col(t), spec.link);
  }
  grad.array() -= Real(2) * static_cast<Real>(spec.alpha) * (c.array() - Real(0.5));
  return grad;
}

template <typename DerivedH>
RMatrix gradient(const ScheduleMatrix& c, const CostFunctionSpec& spec,
                 const Eigen::MatrixBase<DerivedH>& h) {
  return gradient(c.entries(), spec, h);
}

/// Entrywise central differences (f(C + s E_ut) - f(C - s E_ut)) / 2s of an
/// arbitrary scalar functional of the schedule.
template <typename Functional>
RMatrix finite_difference_gradient(const RMatrix& c, Functional&& f, double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_difference_gradient: step must be > 0");
  RMatrix grad(c.rows(), c.cols());
  RMatrix probe = c;
  for (Eigen::Index t = 0; t < c.cols(); ++t) {
    for (Eigen::Index u = 0; u < c.rows(); ++u) {
      const double saved = probe(u, t);
      probe(u, t) = saved + step;
      const double forward = f(probe);
      probe(u, t) = saved - step;
      const double backward = f(probe);
      probe(u, t) = saved;
      grad(u, t) = (forward - backward) / (2.0 * step);
    }
  }
  return grad;
}

template <typename DerivedH>
RMatrix finite_difference_gradient(const RMatrix& c, const CostFunctionSpec& spec,
                                   const Eigen::MatrixBase<DerivedH>& h, double step) {
  return finite_difference_gradient(
      c, [&](const RMatrix& probe) { return static_cast<double>(augmented_cost(probe, spec, h)); },
      step);
}

}  // namespace mmsched
