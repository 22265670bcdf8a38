#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tomo {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A Gram matrix A_Ω^H A_Ω was numerically singular (collinear steering columns).
class SingularGram : public Error {
public:
    using Error::Error;
};

/// The matrix handed to a Hermitian routine was not Hermitian within tolerance.
class NotHermitian : public Error {
public:
    using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tomo

namespace tomo {

/// Provenance of a covariance matrix.
enum class CovMethod { exact, scm, corrsub_optimal, corrsub_suboptimal, corrsub_simplified };

std::string to_string(CovMethod method);
CovMethod cov_method_from_string(const std::string& name);

/// An N×N Hermitian covariance matrix together with how it was produced.
struct CovarianceEstimate {
    CMatrix R;
    CovMethod method = CovMethod::scm;

    Eigen::Index dim() const { return R.rows(); }
};

}  // namespace tomo
