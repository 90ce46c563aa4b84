#ifndef CELLFREE_TEAMMSE_HPP
#define CELLFREE_TEAMMSE_HPP

#include <string>
#include <vector>

#include <Eigen/LU>

#include "cellfree/channel.hpp"
#include "cellfree/common.hpp"
#include "cellfree/scenario.hpp"

namespace cellfree {

enum class BeamformingRule { team_mmse, matched_filter };

inline std::string to_string(BeamformingRule r) {
  return r == BeamformingRule::team_mmse ? "team_mmse" : "matched_filter";
}

/// Local MMSE stage of one AP on one sample:
///   V_l = (H_l diag(p) H_l^H + psi_l I_N)^{-1} H_l diag(p)^{1/2}
/// where H_l is the masked local CSI (N x K). Only the `served` columns of
/// H_l can be nonzero, so the computation is restricted to them; the other
/// columns of the result are zero.
inline CMatrix local_stage(const CMatrix& local_csi, const std::vector<std::size_t>& served,
                           const RVector& p, double psi) {
  const Eigen::Index N = local_csi.rows();
  CMatrix out = CMatrix::Zero(N, local_csi.cols());
  if (served.empty()) return out;
  const auto S = static_cast<Eigen::Index>(served.size());
  CMatrix hs(N, S);
  RVector sqrt_p(S);
  for (Eigen::Index i = 0; i < S; ++i) {
    const auto k = static_cast<Eigen::Index>(served[static_cast<std::size_t>(i)]);
    hs.col(i) = local_csi.col(k);
    sqrt_p(i) = std::sqrt(p(k));
  }
  const CMatrix scaled = hs * sqrt_p.asDiagonal();
  CMatrix gram = scaled * scaled.adjoint();
  gram.diagonal().array() += psi;
  const CMatrix v = gram.llt().solve(scaled);
  for (Eigen::Index i = 0; i < S; ++i) out.col(static_cast<Eigen::Index>(served[static_cast<std::size_t>(i)])) = v.col(i);
  return out;
}

/// psi_l = 1 + sum over UEs not served by AP l of p_k gamma_{l,k}: the
/// interference from unknown channels, folded into the noise level.
inline RVector augmented_noise(const NetworkScenario& scenario, const RVector& p) {
  const std::size_t L = scenario.num_aps();
  RVector psi = RVector::Ones(static_cast<Eigen::Index>(L));
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 0; k < scenario.num_ues(); ++k)
      if (!scenario.serves(l, k)) psi(static_cast<Eigen::Index>(l)) += p(static_cast<Eigen::Index>(k)) * scenario.gain(l, k);
  return psi;
}

/// Distributed beamformers stored through their long-term parameters.
/// Realized on a sample, AP l's part of v_k is V_l c_{l,k} (team MMSE) or the
/// local channel itself (matched filter); both depend on AP l's local CSI only.
struct BeamformerSet {
  BeamformingRule rule = BeamformingRule::team_mmse;
  std::size_t N = 0;
  RVector power;
  RVector psi;                 // per AP, team MMSE only
  std::vector<CMatrix> c;      // per AP, K x K, column k = c_{l,k}; team MMSE only
  std::vector<std::vector<std::size_t>> served;  // per AP

  std::size_t num_aps() const { return served.size(); }

  /// AP l's beamforming block (N x K, column k = v_{l,k}) from its local CSI.
  CMatrix realize_ap(std::size_t l, const CMatrix& local_csi) const {
    if (rule == BeamformingRule::matched_filter) return local_csi;
    const auto& sl = served[l];
    const CMatrix vl = local_stage(local_csi, sl, power, psi(static_cast<Eigen::Index>(l)));
    CMatrix out = CMatrix::Zero(vl.rows(), vl.cols());
    for (std::size_t k : sl)
      out.noalias() += vl.col(static_cast<Eigen::Index>(k)) * c[l].row(static_cast<Eigen::Index>(k));
    return out;
  }

  /// All beamformers on sample s, (N L) x K.
  CMatrix realize(const ChannelEnsemble& e, std::size_t s) const {
    CMatrix v(static_cast<Eigen::Index>(e.N * e.L), static_cast<Eigen::Index>(e.K));
    for (std::size_t l = 0; l < e.L; ++l)
      v.middleRows(static_cast<Eigen::Index>(l * e.N), static_cast<Eigen::Index>(e.N)) =
          realize_ap(l, mask_local(e.ap_block(s, l), served[l]));
    return v;
  }
};

/// Pi_l = E[diag(p)^{1/2} H_l^H V_l] for every AP, K x K each.
using PiMatrices = std::vector<CMatrix>;

inline PiMatrices estimate_pi(const ChannelEnsemble& e, const RVector& p, const RVector& psi) {
  const auto K = static_cast<Eigen::Index>(e.K);
  PiMatrices pi(e.L, CMatrix::Zero(K, K));
  std::vector<std::vector<std::size_t>> served(e.L);
  for (std::size_t l = 0; l < e.L; ++l) served[l] = served_ues(e.serving, l);
  const RVector sqrt_p = p.cwiseSqrt();
  for (std::size_t s = 0; s < e.size(); ++s) {
    const double w = e.weight(s);
    for (std::size_t l = 0; l < e.L; ++l) {
      const auto& sl = served[l];
      if (sl.empty()) continue;
      const CMatrix hl = mask_local(e.ap_block(s, l), sl);
      const CMatrix vl = local_stage(hl, sl, p, psi(static_cast<Eigen::Index>(l)));
      for (std::size_t j : sl) {
        const auto jj = static_cast<Eigen::Index>(j);
        const cdouble lhs = w * sqrt_p(jj);
        for (std::size_t k : sl) {
          const auto kk = static_cast<Eigen::Index>(k);
          pi[l](jj, kk) += lhs * hl.col(jj).dot(vl.col(kk));
        }
      }
    }
  }
  return pi;
}

/// Solves c_{l,k} + sum_{j in L_k, j != l} Pi_j c_{j,k} = e_k for all l in
/// the cluster of UE k as one stacked (QK) x (QK) system. Column q of the
/// result is c_{cluster[q], k}.
inline CMatrix solve_statistical_stage(const PiMatrices& pi, const Cluster& cluster, std::size_t k,
                                       double min_rcond = 1e-12) {
  const auto Q = static_cast<Eigen::Index>(cluster.size());
  const Eigen::Index K = pi.front().rows();
  CMatrix a = CMatrix::Identity(Q * K, Q * K);
  for (Eigen::Index q = 0; q < Q; ++q)
    for (Eigen::Index r = 0; r < Q; ++r)
      if (q != r) a.block(q * K, r * K, K, K) = pi[cluster[static_cast<std::size_t>(r)]];
  CVector rhs = CVector::Zero(Q * K);
  for (Eigen::Index q = 0; q < Q; ++q) rhs(q * K + static_cast<Eigen::Index>(k)) = 1.0;
  Eigen::PartialPivLU<CMatrix> lu(a);
  const double rc = lu.rcond();
  if (!(rc > min_rcond))
    throw SingularSystemError("statistical beamforming stage is singular for UE " + std::to_string(k), rc);
  const CVector x = lu.solve(rhs);
  return x.reshaped(K, Q);
}

/// Team MMSE beamformers for power vector p under local CSI and user-centric
/// clustering; the long-term parameters are fitted on the ensemble.
inline BeamformerSet build_team_mmse(const ChannelEnsemble& e, const NetworkScenario& scenario,
                                     const RVector& p) {
  BeamformerSet bf;
  bf.rule = BeamformingRule::team_mmse;
  bf.N = e.N;
  bf.power = p;
  bf.psi = augmented_noise(scenario, p);
  bf.served.resize(e.L);
  for (std::size_t l = 0; l < e.L; ++l) bf.served[l] = served_ues(e.serving, l);
  const auto K = static_cast<Eigen::Index>(e.K);
  bf.c.assign(e.L, CMatrix::Zero(K, K));
  const PiMatrices pi = estimate_pi(e, p, bf.psi);
  for (std::size_t k = 0; k < e.K; ++k) {
    const Cluster& cluster = scenario.clusters[k];
    const CMatrix ck = solve_statistical_stage(pi, cluster, k);
    for (std::size_t q = 0; q < cluster.size(); ++q)
      bf.c[cluster[q]].col(static_cast<Eigen::Index>(k)) = ck.col(static_cast<Eigen::Index>(q));
  }
  return bf;
}

/// Conjugate beamforming on local CSI: v_{l,k} = h_{l,k} if l serves k, else 0.
inline BeamformerSet build_matched_filter(const ChannelEnsemble& e, const NetworkScenario& scenario) {
  BeamformerSet bf;
  bf.rule = BeamformingRule::matched_filter;
  bf.N = e.N;
  bf.power = RVector::Zero(static_cast<Eigen::Index>(scenario.num_ues()));
  bf.served.resize(e.L);
  for (std::size_t l = 0; l < e.L; ++l) bf.served[l] = served_ues(e.serving, l);
  return bf;
}

}  // namespace cellfree

#endif  // CELLFREE_TEAMMSE_HPP
