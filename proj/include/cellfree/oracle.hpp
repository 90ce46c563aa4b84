#ifndef CELLFREE_ORACLE_HPP
#define CELLFREE_ORACLE_HPP

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "cellfree/channel.hpp"
#include "cellfree/common.hpp"
#include "cellfree/scenario.hpp"
#include "cellfree/uatf.hpp"

// Brute-force ground truth on tiny problems with an explicit finite sample
// space. Everything here uses exact expectations (probability-weighted sums
// over atoms) and shares no code path with the team MMSE closed form.
namespace cellfree::oracle {

/// Finite probability space with per-AP information partitions. Two atoms lie
/// in the same cell of AP l's partition iff AP l's masked local CSI is
/// identical on them.
struct FiniteWorld {
  std::size_t N = 0;
  std::size_t L = 0;
  std::size_t K = 0;
  ServingMask serving;
  std::vector<double> probability;
  std::vector<CMatrix> channel;              // (N L) x K per atom
  std::vector<std::vector<std::size_t>> cell;  // cell[l][atom]
  std::vector<std::size_t> cell_count;         // per AP

  std::size_t size() const { return probability.size(); }
};

inline FiniteWorld make_world(std::size_t N, const ServingMask& serving, std::vector<CMatrix> channels,
                              std::vector<double> probabilities) {
  FiniteWorld w;
  w.N = N;
  w.L = static_cast<std::size_t>(serving.rows());
  w.K = static_cast<std::size_t>(serving.cols());
  w.serving = serving;
  if (channels.empty() || channels.size() != probabilities.size())
    throw ConfigError("finite world needs one probability per atom");
  double total = 0.0;
  for (double q : probabilities) {
    if (!(q > 0.0)) throw ConfigError("atom probabilities must be positive");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("atom probabilities must sum to one");
  for (const CMatrix& h : channels)
    if (static_cast<std::size_t>(h.rows()) != N * w.L || static_cast<std::size_t>(h.cols()) != w.K)
      throw ConfigError("atom channel has the wrong shape");
  w.channel = std::move(channels);
  w.probability = std::move(probabilities);

  w.cell.assign(w.L, std::vector<std::size_t>(w.size()));
  w.cell_count.assign(w.L, 0);
  for (std::size_t l = 0; l < w.L; ++l) {
    const auto served = served_ues(serving, l);
    std::vector<CMatrix> representatives;
    for (std::size_t m = 0; m < w.size(); ++m) {
      const CMatrix local = mask_local(
          w.channel[m].middleRows(static_cast<Eigen::Index>(l * N), static_cast<Eigen::Index>(N)), served);
      std::size_t c = 0;
      while (c < representatives.size() && representatives[c] != local) ++c;
      if (c == representatives.size()) representatives.push_back(local);
      w.cell[l][m] = c;
    }
    w.cell_count[l] = representatives.size();
  }
  return w;
}

/// Finite distribution of one link vector h_{l,k}.
struct LinkDistribution {
  std::vector<CVector> atoms;
  std::vector<double> probability;
};

/// World whose links are mutually independent: the atom set is the Cartesian
/// product of the per-link atom sets. links[l * K + k] describes h_{l,k}.
inline FiniteWorld make_product_world(std::size_t N, const ServingMask& serving,
                                      const std::vector<LinkDistribution>& links) {
  const auto L = static_cast<std::size_t>(serving.rows());
  const auto K = static_cast<std::size_t>(serving.cols());
  if (links.size() != L * K) throw ConfigError("one link distribution per (AP, UE) pair required");
  std::vector<CMatrix> channels{CMatrix::Zero(static_cast<Eigen::Index>(N * L), static_cast<Eigen::Index>(K))};
  std::vector<double> probs{1.0};
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t k = 0; k < K; ++k) {
      const LinkDistribution& d = links[l * K + k];
      std::vector<CMatrix> next_channels;
      std::vector<double> next_probs;
      for (std::size_t m = 0; m < channels.size(); ++m) {
        for (std::size_t a = 0; a < d.atoms.size(); ++a) {
          CMatrix h = channels[m];
          h.block(static_cast<Eigen::Index>(l * N), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(N), 1) =
              d.atoms[a];
          next_channels.push_back(std::move(h));
          next_probs.push_back(probs[m] * d.probability[a]);
        }
      }
      channels = std::move(next_channels);
      probs = std::move(next_probs);
    }
  }
  return make_world(N, serving, std::move(channels), std::move(probs));
}

/// The atoms as a weighted ensemble, so library code sees the exact distribution.
inline ChannelEnsemble as_ensemble(const FiniteWorld& w) {
  ChannelEnsemble e;
  e.N = w.N;
  e.L = w.L;
  e.K = w.K;
  e.serving = w.serving;
  e.realizations = w.channel;
  e.weights = w.probability;
  return e;
}

/// One beamformer per atom, each an (N L)-vector.
using AtomBeamformer = std::vector<CVector>;

inline double exact_mse(const FiniteWorld& w, const AtomBeamformer& v, const RVector& p, std::size_t k) {
  double total = 0.0;
  for (std::size_t m = 0; m < w.size(); ++m) {
    CVector err(static_cast<Eigen::Index>(w.K));
    for (std::size_t j = 0; j < w.K; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      err(jj) = std::sqrt(p(jj)) * w.channel[m].col(jj).dot(v[m]);
    }
    err(static_cast<Eigen::Index>(k)) -= 1.0;
    total += w.probability[m] * (err.squaredNorm() + v[m].squaredNorm());
  }
  return total;
}

inline UatFStatistics exact_statistics_column(const FiniteWorld& w, const AtomBeamformer& v, std::size_t k) {
  const auto K = static_cast<Eigen::Index>(w.K);
  UatFStatistics st{CVector::Zero(K), RMatrix::Zero(K, K), RVector::Zero(K)};
  const auto kk = static_cast<Eigen::Index>(k);
  for (std::size_t m = 0; m < w.size(); ++m) {
    const double q = w.probability[m];
    for (Eigen::Index j = 0; j < K; ++j) {
      const cdouble g = w.channel[m].col(j).dot(v[m]);
      st.B(j, kk) += q * std::norm(g);
      if (j == kk) st.a(kk) += q * g;
    }
    st.n(kk) += q * v[m].squaredNorm();
  }
  return st;
}

/// SINR_k with exact expectations.
inline double exact_sinr(const FiniteWorld& w, const AtomBeamformer& v, const RVector& p, std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  const UatFStatistics st = exact_statistics_column(w, v, k);
  if (!(st.n(kk) > 0.0) || std::norm(st.a(kk)) < UatFStatistics::kDegenerateThreshold)
    throw DegenerateBeamformerError("oracle: degenerate beamformer for UE " + std::to_string(k));
  double denom = st.n(kk) + p(kk) * (st.B(kk, kk) - std::norm(st.a(kk)));
  for (Eigen::Index j = 0; j < p.size(); ++j)
    if (j != kk) denom += p(j) * st.B(j, kk);
  return p(kk) * std::norm(st.a(kk)) / denom;
}

/// Variable layout of the constrained beamformer of UE k: one N-vector per
/// (serving AP, cell of that AP's partition).
class FeasibleSet {
 public:
  FeasibleSet(const FiniteWorld& w, std::size_t k) : world_(&w), offset_(w.L, -1) {
    Eigen::Index next = 0;
    for (std::size_t l = 0; l < w.L; ++l) {
      if (!w.serving(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k))) continue;
      offset_[l] = next;
      next += static_cast<Eigen::Index>(w.cell_count[l] * w.N);
    }
    dim_ = next;
  }
  Eigen::Index dim() const { return dim_; }
  bool active(std::size_t l) const { return offset_[l] >= 0; }
  Eigen::Index index(std::size_t l, std::size_t atom) const {
    return offset_[l] + static_cast<Eigen::Index>(world_->cell[l][atom] * world_->N);
  }
  AtomBeamformer expand(const CVector& x) const {
    const FiniteWorld& w = *world_;
    const auto N = static_cast<Eigen::Index>(w.N);
    AtomBeamformer v(w.size(), CVector::Zero(static_cast<Eigen::Index>(w.N * w.L)));
    for (std::size_t m = 0; m < w.size(); ++m)
      for (std::size_t l = 0; l < w.L; ++l)
        if (active(l)) v[m].segment(static_cast<Eigen::Index>(l) * N, N) = x.segment(index(l, m), N);
    return v;
  }

 private:
  const FiniteWorld* world_;
  std::vector<Eigen::Index> offset_;
  Eigen::Index dim_ = 0;
};

struct TeamSolution {
  AtomBeamformer beamformer;
  double mse = 0.0;
};

/// Exact minimizer of MSE_k over all beamformers whose AP-l block is constant
/// on the cells of AP l's partition and zero off the cluster. The objective
/// is x^H A x - 2 Re(b^H x) + 1 in the stacked free variables x; A is
/// positive definite, so the normal equations have a unique solution.
inline TeamSolution exact_team_mmse(const FiniteWorld& w, const RVector& p, std::size_t k) {
  const FeasibleSet fs(w, k);
  const auto N = static_cast<Eigen::Index>(w.N);
  const auto NL = static_cast<Eigen::Index>(w.N * w.L);
  CMatrix a = CMatrix::Zero(fs.dim(), fs.dim());
  CVector b = CVector::Zero(fs.dim());
  const auto kk = static_cast<Eigen::Index>(k);
  for (std::size_t m = 0; m < w.size(); ++m) {
    const double q = w.probability[m];
    const CMatrix& h = w.channel[m];
    CMatrix gram = h * p.cast<cdouble>().asDiagonal() * h.adjoint() + CMatrix::Identity(NL, NL);
    for (std::size_t l = 0; l < w.L; ++l) {
      if (!fs.active(l)) continue;
      const auto ll = static_cast<Eigen::Index>(l);
      b.segment(fs.index(l, m), N) += q * std::sqrt(p(kk)) * h.block(ll * N, kk, N, 1);
      for (std::size_t j = 0; j < w.L; ++j) {
        if (!fs.active(j)) continue;
        a.block(fs.index(l, m), fs.index(j, m), N, N) += q * gram.block(ll * N, static_cast<Eigen::Index>(j) * N, N, N);
      }
    }
  }
  const CVector x = a.llt().solve(b);
  TeamSolution sol{fs.expand(x), 0.0};
  sol.mse = exact_mse(w, sol.beamformer, p, k);
  return sol;
}

/// Random element of the constrained set (measurable per AP, zero off-cluster).
inline AtomBeamformer random_feasible_beamformer(const FiniteWorld& w, std::size_t k, std::mt19937_64& rng,
                                                 double scale = 1.0) {
  const FeasibleSet fs(w, k);
  std::normal_distribution<double> normal(0.0, scale);
  CVector x(fs.dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = {normal(rng), normal(rng)};
  return fs.expand(x);
}

struct GridResult {
  RVector power;
  double objective = 0.0;
  std::vector<RVector> near_optimal;  // grid points within `keep_within` of the best
};

/// Exhaustive search of max_p min_k weighted_utility(p)_k over the grid
/// {0, r P, 2 r P, ..., P}^K, K <= 3. `utility` returns the K weighted
/// utilities at p.
template <typename Utility>
GridResult grid_maxmin_power(const Utility& utility, std::size_t K, double budget, double resolution,
                             double keep_within = -1.0) {
  if (K < 1 || K > 3) throw ConfigError("grid search supports 1 <= K <= 3");
  if (!(resolution > 0.0) || resolution > 1.0) throw ConfigError("resolution must lie in (0, 1]");
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / resolution));
  std::size_t total = 1;
  for (std::size_t i = 0; i < K; ++i) total *= steps + 1;
  std::vector<double> values(total);
  GridResult best;
  best.objective = -1.0;
  RVector p(static_cast<Eigen::Index>(K));
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (std::size_t i = 0; i < K; ++i) {
      p(static_cast<Eigen::Index>(i)) = budget * static_cast<double>(rem % (steps + 1)) / static_cast<double>(steps);
      rem /= steps + 1;
    }
    const double obj = RVector(utility(p)).minCoeff();
    values[idx] = obj;
    if (obj > best.objective) {
      best.objective = obj;
      best.power = p;
    }
  }
  if (keep_within >= 0.0) {
    for (std::size_t idx = 0; idx < total; ++idx) {
      if (values[idx] < best.objective - keep_within) continue;
      std::size_t rem = idx;
      for (std::size_t i = 0; i < K; ++i) {
        p(static_cast<Eigen::Index>(i)) = budget * static_cast<double>(rem % (steps + 1)) / static_cast<double>(steps);
        rem /= steps + 1;
      }
      best.near_optimal.push_back(p);
    }
  }
  return best;
}

inline GridResult grid_maxmin_power(const UatFStatistics& st, const RVector& weights, double budget,
                                    double resolution, double keep_within = -1.0) {
  return grid_maxmin_power([&](const RVector& p) { return RVector(sinrs(st, p).cwiseQuotient(weights)); },
                           st.size(), budget, resolution, keep_within);
}

/// Tiny instance whose links are independent, with every unknown (non-served)
/// link zero-mean with covariance gamma_{l,k} I_N exactly. These are the
/// conditions under which the local-CSI team MMSE closed form is exact.
struct TeamInstance {
  FiniteWorld world;
  NetworkScenario scenario;
  RVector power;
};

namespace detail {

inline CMatrix random_unitary(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CMatrix g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = {normal(rng), normal(rng)};
  Eigen::HouseholderQR<CMatrix> qr(g);
  return qr.householderQ();
}

/// Zero-mean atoms with covariance gamma I_N: N = 1 uses {+-x}, N = 2 a
/// rotated triangle, larger N the 2N points +-sqrt(N gamma) U e_i.
inline LinkDistribution isotropic_link(std::size_t N, double gamma, std::mt19937_64& rng) {
  LinkDistribution d;
  const CMatrix u = random_unitary(N, rng);
  if (N == 1) {
    const CVector x = std::sqrt(gamma) * u.col(0);
    d.atoms = {x, -x};
    d.probability = {0.5, 0.5};
  } else if (N == 2) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double phi = angle(rng);
    for (int i = 0; i < 3; ++i) {
      const double th = phi + 2.0 * std::numbers::pi * i / 3.0;
      CVector x(2);
      x << std::cos(th), std::sin(th);
      d.atoms.push_back(std::sqrt(2.0 * gamma) * (u * x));
      d.probability.push_back(1.0 / 3.0);
    }
  } else {
    for (std::size_t i = 0; i < N; ++i) {
      const CVector x = std::sqrt(static_cast<double>(N) * gamma) * u.col(static_cast<Eigen::Index>(i));
      d.atoms.push_back(x);
      d.atoms.push_back(-x);
      d.probability.push_back(0.5 / static_cast<double>(N));
      d.probability.push_back(0.5 / static_cast<double>(N));
    }
  }
  return d;
}

}  // namespace detail

/// Random instance with L APs, K UEs and cluster size Q. Known links get one
/// or two arbitrary atoms while the product stays within max_atoms.
inline TeamInstance random_team_instance(std::mt19937_64& rng, std::size_t N, std::size_t L, std::size_t K,
                                         std::size_t Q, std::size_t max_atoms = 16) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ServingMask serving = ServingMask::Constant(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(K), false);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> aps(L);
    for (std::size_t l = 0; l < L; ++l) aps[l] = l;
    std::shuffle(aps.begin(), aps.end(), rng);
    for (std::size_t q = 0; q < Q; ++q) serving(static_cast<Eigen::Index>(aps[q]), static_cast<Eigen::Index>(k)) = true;
  }

  RMatrix gains(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(K));
  std::vector<LinkDistribution> links(L * K);
  std::size_t atoms = 1;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t k = 0; k < K; ++k) {
      if (serving(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k))) continue;
      const double gamma = 0.05 + 0.45 * unit(rng);
      gains(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = gamma;
      links[l * K + k] = detail::isotropic_link(N, gamma, rng);
      atoms *= links[l * K + k].atoms.size();
    }
  }
  if (atoms > max_atoms) throw ConfigError("unknown links alone exceed the atom budget");
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t k = 0; k < K; ++k) {
      if (!serving(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k))) continue;
      const std::size_t count = (atoms * 2 <= max_atoms && unit(rng) < 0.8) ? 2 : 1;
      atoms *= count;
      LinkDistribution d;
      for (std::size_t a = 0; a < count; ++a) {
        CVector x(static_cast<Eigen::Index>(N));
        for (Eigen::Index n = 0; n < x.size(); ++n) x(n) = {normal(rng), normal(rng)};
        d.atoms.push_back(x);
      }
      if (count == 2) {
        const double q = 0.2 + 0.6 * unit(rng);
        d.probability = {q, 1.0 - q};
      } else {
        d.probability = {1.0};
      }
      double second = 0.0;
      for (std::size_t a = 0; a < count; ++a) second += d.probability[a] * d.atoms[a].squaredNorm();
      const double target = 1.0 + unit(rng);
      const double scale = std::sqrt(target * static_cast<double>(N) / second);
      for (auto& x : d.atoms) x *= scale;
      gains(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = target;
      links[l * K + k] = std::move(d);
    }
  }

  TeamInstance inst;
  inst.scenario = make_scenario(N, gains, Q, 10.0);
  if (inst.scenario.serving != serving) throw InternalError("oracle instance clustering mismatch");
  inst.world = make_product_world(N, serving, links);
  inst.power = RVector(static_cast<Eigen::Index>(K));
  for (Eigen::Index k = 0; k < inst.power.size(); ++k) inst.power(k) = 0.1 + 9.9 * unit(rng);
  return inst;
}

}  // namespace cellfree::oracle

#endif  // CELLFREE_ORACLE_HPP
