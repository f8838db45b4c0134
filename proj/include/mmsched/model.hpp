#pragma once

#include <cmath>
#include <string>

#include "mmsched/types.hpp"

namespace mmsched {

/// Noise variance N0 and per-UE transmit symbol energy Es.
struct LinkParams {
  double n0 = 1.0;
  double es = 1.0;

  void validate() const {
    if (!(n0 > 0.0) || !std::isfinite(n0) || !(es > 0.0) || !std::isfinite(es)) {
      throw InvalidArgument("LinkParams: n0 and es must be finite and > 0");
    }
  }

  /// N0 / Es, the diagonal loading of the LMMSE Gram matrix.
  double noise_to_signal() const { return n0 / es; }

  /// Es = 1 and N0 set from an Es/N0 ratio in dB.
  static LinkParams from_snr_db(double snr_db) {
    return LinkParams{std::pow(10.0, -snr_db / 10.0), 1.0};
  }
};

/// Per-slot active-UE bounds [u_min, u_max] and per-UE active-slot bounds
/// [t_min, t_max] for a U x T schedule.
struct SchedulingConstraints {
  int ues = 0;
  int slots = 0;
  int u_min = 0;
  int u_max = 0;
  int t_min = 0;
  int t_max = 0;

  /// U_min = U_max = u_s and T_min = T_max = t_s.
  static SchedulingConstraints exact(int ues, int slots, int u_s, int t_s) {
    return {ues, slots, u_s, u_s, t_s, t_s};
  }

  /// Throws InvalidArgument unless the bounds are ordered and the set of
  /// binary matrices meeting them is non-empty.
  void validate() const {
    if (ues < 1 || slots < 1) throw InvalidArgument("constraints: U and T must be >= 1");
    if (!(0 <= u_min && u_min <= u_max && u_max <= ues)) {
      throw InvalidArgument("constraints: need 0 <= u_min <= u_max <= U");
    }
    if (!(0 <= t_min && t_min <= t_max && t_max <= slots)) {
      throw InvalidArgument("constraints: need 0 <= t_min <= t_max <= T");
    }
    // Row and column sums must be able to agree on the total number of ones.
    if (static_cast<long long>(u_min) * slots > static_cast<long long>(t_max) * ues ||
        static_cast<long long>(t_min) * ues > static_cast<long long>(u_max) * slots) {
      throw InvalidArgument("constraints: row and column sum bounds are inconsistent");
    }
  }
};

/// U x T scheduling matrix C. Binary mode holds {0,1}; relaxed mode [0,1].
class ScheduleMatrix {
 public:
  enum class Mode { Relaxed, Binary };

  static ScheduleMatrix relaxed(RMatrix entries) {
    if (!entries.allFinite() || (entries.array() < 0.0).any() || (entries.array() > 1.0).any()) {
      throw InvalidArgument("relaxed schedule entries must lie in [0, 1]");
    }
    return ScheduleMatrix(std::move(entries), Mode::Relaxed);
  }

  static ScheduleMatrix binary(RMatrix entries) {
    if (!(entries.array() == 0.0 || entries.array() == 1.0).all()) {
      throw InvalidArgument("binary schedule entries must be exactly 0 or 1");
    }
    return ScheduleMatrix(std::move(entries), Mode::Binary);
  }

  static ScheduleMatrix ones(int ues, int slots) {
    return ScheduleMatrix(RMatrix::Ones(ues, slots), Mode::Binary);
  }

  const RMatrix& entries() const { return entries_; }
  Mode mode() const { return mode_; }
  bool is_binary() const { return mode_ == Mode::Binary; }
  int ues() const { return static_cast<int>(entries_.rows()); }
  int slots() const { return static_cast<int>(entries_.cols()); }
  double operator()(int u, int t) const { return entries_(u, t); }

  bool operator==(const ScheduleMatrix& other) const {
    return mode_ == other.mode_ && entries_.rows() == other.entries_.rows() &&
           entries_.cols() == other.entries_.cols() && entries_ == other.entries_;
  }

 private:
  ScheduleMatrix(RMatrix entries, Mode mode) : entries_(std::move(entries)), mode_(mode) {}

  RMatrix entries_;
  Mode mode_;
};

/// H diag(c): scales column u of the channel by c[u].
template <typename DerivedH, typename DerivedC>
CMatrixX<typename DerivedH::RealScalar> mask_channel(const Eigen::MatrixBase<DerivedH>& h,
                                                     const Eigen::MatrixBase<DerivedC>& c) {
  if (c.size() != h.cols()) throw InvalidArgument("mask_channel: mask length must equal U");
  using Real = typename DerivedH::RealScalar;
  return h * c.template cast<std::complex<Real>>().asDiagonal();
}

/// LMMSE equalizer W = H (H^H H + rho I)^{-1}, rho = N0/Es > 0.
///
/// The Gram matrix is Hermitian positive definite for rho > 0, so an LDL^T
/// factorization is used instead of a general inverse. Masked (zero) columns
/// of H produce zero columns of W.
template <typename Derived>
CMatrixX<typename Derived::RealScalar> lmmse_matrix(const Eigen::MatrixBase<Derived>& h,
                                                    typename Derived::RealScalar rho) {
  using Real = typename Derived::RealScalar;
  if (!(rho > Real(0)) || !std::isfinite(static_cast<double>(rho))) {
    throw InvalidArgument("lmmse_matrix: N0/Es must be finite and > 0");
  }
  if (!h.allFinite()) throw NumericalError("lmmse_matrix: non-finite channel");
  CMatrixX<Real> gram = h.adjoint() * h;
  gram.diagonal().array() += rho;
  // W^H = G^{-1} H^H
  CMatrixX<Real> w_h = gram.ldlt().solve(h.adjoint());
  if (!w_h.allFinite()) throw NumericalError("lmmse_matrix: non-finite equalizer");
  return w_h.adjoint();
}

template <typename Derived>
CMatrixX<typename Derived::RealScalar> lmmse_matrix(const Eigen::MatrixBase<Derived>& h,
                                                    const LinkParams& link) {
  link.validate();
  return lmmse_matrix(h, static_cast<typename Derived::RealScalar>(link.noise_to_signal()));
}

/// Post-equalization SINR of UE u:
///   |w_u^H h_u|^2 / (sum_{u' != u} |w_u^H h_u'|^2 + (N0/Es) ||w_u||^2).
/// An idle UE (zero equalizer column and zero channel column) has SINR 0.
template <typename DerivedW, typename DerivedH>
typename DerivedH::RealScalar sinr_per_ue(const Eigen::MatrixBase<DerivedW>& w,
                                          const Eigen::MatrixBase<DerivedH>& h, Eigen::Index u,
                                          const LinkParams& link) {
  using Real = typename DerivedH::RealScalar;
  if (w.rows() != h.rows() || w.cols() != h.cols()) {
    throw InvalidArgument("sinr_per_ue: W and H must have the same shape");
  }
  if (u < 0 || u >= h.cols()) throw InvalidArgument("sinr_per_ue: UE index out of range");
  const auto w_u = w.col(u);
  // Row u of W^H H.
  auto powers = (w_u.adjoint() * h).cwiseAbs2().eval();
  const Real signal = powers(u);
  powers(u) = Real(0);
  const Real interference = powers.sum();
  const Real noise = static_cast<Real>(link.noise_to_signal()) * w_u.squaredNorm();
  const Real denominator = interference + noise;
  if (denominator == Real(0)) {
    if (signal == Real(0)) return Real(0);
    throw NumericalError("sinr_per_ue: zero denominator with nonzero signal");
  }
  return signal / denominator;
}

/// True iff every column sum lies in [u_min, u_max] and every row sum in
/// [t_min, t_max]. Only defined for binary schedules.
inline bool validate_schedule(const ScheduleMatrix& c, const SchedulingConstraints& k) {
  if (!c.is_binary()) throw InvalidArgument("validate_schedule: schedule must be binary");
  if (c.ues() != k.ues || c.slots() != k.slots) return false;
  const RVector col_sums = c.entries().colwise().sum().transpose();
  const RVector row_sums = c.entries().rowwise().sum();
  return (col_sums.array() >= k.u_min).all() && (col_sums.array() <= k.u_max).all() &&
         (row_sums.array() >= k.t_min).all() && (row_sums.array() <= k.t_max).all();
}

}  // namespace mmsched
