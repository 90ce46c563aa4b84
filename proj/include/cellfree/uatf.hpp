#ifndef CELLFREE_UATF_HPP
#define CELLFREE_UATF_HPP

#include <cmath>
#include <concepts>
#include <string>

#include "cellfree/channel.hpp"
#include "cellfree/common.hpp"

namespace cellfree {

/// Anything that maps ensemble sample s to the (N L) x K matrix of
/// beamformers [v_1 ... v_K] realized on that sample.
template <typename T>
concept BeamformerRealizer = requires(const T& bf, const ChannelEnsemble& e, std::size_t s) {
  { bf.realize(e, s) } -> std::convertible_to<CMatrix>;
};

/// Long-term moments of a beamformer set under the use-and-then-forget bound:
///   a_k    = E[h_k^H v_k]
///   B(j,k) = E[|h_j^H v_k|^2]
///   n_k    = E[||v_k||^2]
/// For fixed beamformers they determine SINR_k(p) for every power vector.
struct UatFStatistics {
  CVector a;
  RMatrix B;
  RVector n;

  static constexpr double kDegenerateThreshold = 1e-30;

  std::size_t size() const { return static_cast<std::size_t>(a.size()); }
  double signal(std::size_t k) const { return std::norm(a(static_cast<Eigen::Index>(k))); }
  bool degenerate(std::size_t k) const {
    const auto i = static_cast<Eigen::Index>(k);
    return !(n(i) > 0.0) || std::norm(a(i)) < kDegenerateThreshold;
  }
  bool any_degenerate() const {
    for (std::size_t k = 0; k < size(); ++k)
      if (degenerate(k)) return true;
    return false;
  }
};

/// Empirical moments over the ensemble, reduced in sample order.
template <BeamformerRealizer Beamformers>
UatFStatistics estimate_statistics(const ChannelEnsemble& e, const Beamformers& bf) {
  const auto K = static_cast<Eigen::Index>(e.K);
  UatFStatistics st{CVector::Zero(K), RMatrix::Zero(K, K), RVector::Zero(K)};
  for (std::size_t s = 0; s < e.size(); ++s) {
    const double w = e.weight(s);
    const CMatrix v = bf.realize(e, s);
    const CMatrix g = e.realizations[s].adjoint() * v;
    st.a += w * g.diagonal();
    st.B += w * g.cwiseAbs2();
    st.n += w * v.colwise().squaredNorm().transpose();
  }
  return st;
}

namespace detail {
inline void require_valid(const UatFStatistics& st, std::size_t k) {
  if (k >= st.size()) throw ConfigError("UE index out of range");
  if (st.degenerate(k))
    throw DegenerateBeamformerError("UatF-degenerate beamformer for UE " + std::to_string(k));
}
}  // namespace detail

/// Interference-plus-noise term p_k Var(h_k^H v_k) + sum_{j != k} p_j B(j,k) + n_k.
inline double interference_plus_noise(const UatFStatistics& st, const RVector& p, std::size_t k) {
  const auto i = static_cast<Eigen::Index>(k);
  double total = st.n(i) + p(i) * (st.B(i, i) - st.signal(k));
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (j != i) total += p(j) * st.B(j, i);
  return total;
}

inline double sinr(const UatFStatistics& st, const RVector& p, std::size_t k) {
  detail::require_valid(st, k);
  const auto i = static_cast<Eigen::Index>(k);
  if (p(i) == 0.0) return 0.0;
  return p(i) * st.signal(k) / interference_plus_noise(st, p, k);
}

inline double rate(const UatFStatistics& st, const RVector& p, std::size_t k) {
  return std::log2(1.0 + sinr(st, p, k));
}

inline RVector sinrs(const UatFStatistics& st, const RVector& p) {
  RVector out(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) out(k) = sinr(st, p, static_cast<std::size_t>(k));
  return out;
}

inline RVector rates(const UatFStatistics& st, const RVector& p) {
  return sinrs(st, p).unaryExpr([](double x) { return std::log2(1.0 + x); });
}

/// MSE_k from the moments: sum_j p_j B(j,k) - 2 sqrt(p_k) Re(a_k) + 1 + n_k.
inline double mse_from_statistics(const UatFStatistics& st, const RVector& p, std::size_t k) {
  const auto i = static_cast<Eigen::Index>(k);
  return p.dot(st.B.col(i)) - 2.0 * std::sqrt(p(i)) * st.a(i).real() + 1.0 + st.n(i);
}

/// MSE_k = E[||diag(p)^{1/2} H^H v_k - e_k||^2] + E[||v_k||^2], evaluated
/// sample by sample.
template <BeamformerRealizer Beamformers>
double mse(const ChannelEnsemble& e, const Beamformers& bf, const RVector& p, std::size_t k) {
  const auto i = static_cast<Eigen::Index>(k);
  const RVector sqrt_p = p.cwiseSqrt();
  double total = 0.0;
  for (std::size_t s = 0; s < e.size(); ++s) {
    const CVector v = bf.realize(e, s).col(i);
    CVector err = sqrt_p.cast<cdouble>().cwiseProduct(e.realizations[s].adjoint() * v);
    err(i) -= 1.0;
    total += e.weight(s) * (err.squaredNorm() + v.squaredNorm());
  }
  return total;
}

}  // namespace cellfree

#endif  // CELLFREE_UATF_HPP
