#ifndef CELLFREE_COMMON_HPP
#define CELLFREE_COMMON_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

/// Conjugation convention used throughout the library: for a channel vector h
/// and a beamformer v (both column vectors of the same length) the effective
/// scalar channel is h^H v, computed as `h.adjoint() * v` (equivalently
/// `h.dot(v)` in Eigen, which conjugates its left operand). Channel matrices
/// H = [h_1 ... h_K] are stored with one UE per column, so H^H V yields the
/// K x K matrix of cross gains with entry (j, k) = h_j^H v_k.
namespace cellfree {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using ServingMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Invalid configuration or precondition violated by user input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A beamformer with E[h_k^H v_k] = 0 or E[||v_k||^2] = 0; its SINR is undefined.
class DegenerateBeamformerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerically singular linear system. Carries the reciprocal condition estimate.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, double rcond)
      : std::runtime_error(what + " (rcond estimate " + std::to_string(rcond) + ")"),
        rcond_(rcond) {}
  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

/// An invariant that the algorithms guarantee was found broken.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace cellfree

#endif  // CELLFREE_COMMON_HPP
