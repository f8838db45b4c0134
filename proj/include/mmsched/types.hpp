#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mmsched {

template <typename Real>
using CMatrixX = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using CVectorX = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using RMatrixX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using RVectorX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using CMatrix = CMatrixX<double>;
using CVector = CVectorX<double>;
using RMatrix = RMatrixX<double>;
using RVector = RVectorX<double>;

/// Raised on violated preconditions: bad dimensions, out-of-range parameters,
/// infeasible constraint sets.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine produces a non-finite intermediate.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mmsched
