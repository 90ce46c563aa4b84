#ifndef CELLFREE_SCENARIO_HPP
#define CELLFREE_SCENARIO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cellfree/common.hpp"

namespace cellfree {

using Positions = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using Cluster = std::vector<std::size_t>;

/// Independent random streams derived from one user seed.
enum class RngStream : std::uint32_t { ue_drop = 1, shadowing = 2, channel = 3 };

inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

/// All inputs of a simulated deployment. Defaults reproduce the reference
/// 1 km^2, 16-AP, 64-UE setup.
struct NetworkConfig {
  std::size_t L = 16;
  std::size_t N = 8;
  std::size_t K = 64;
  std::size_t Q = 4;
  double area_side_m = 1000.0;
  double ap_height_delta_m = 10.0;
  double pathloss_exponent_coeff = 36.7;
  double pathloss_intercept_db = 30.5;
  double shadow_std_db = 4.0;
  double shadow_corr_dist_m = 9.0;
  double bandwidth_hz = 20e6;
  double noise_figure_db = 7.0;
  double power_budget_dbm = 20.0;
  std::vector<double> weights;  // empty means uniform
  std::size_t n_sim = 1000;
  std::uint64_t seed = 1;
  std::optional<Positions> ap_positions;  // overrides the grid layout
};

inline void validate(const NetworkConfig& c) {
  if (c.L < 1 || c.N < 1 || c.K < 1 || c.n_sim < 1)
    throw ConfigError("L, N, K and n_sim must all be at least 1");
  if (c.Q < 1 || c.Q > c.L) throw ConfigError("cluster size Q must satisfy 1 <= Q <= L");
  for (double v : {c.area_side_m, c.ap_height_delta_m, c.pathloss_exponent_coeff,
                   c.pathloss_intercept_db, c.shadow_std_db, c.shadow_corr_dist_m,
                   c.bandwidth_hz, c.noise_figure_db, c.power_budget_dbm}) {
    if (!std::isfinite(v)) throw ConfigError("configuration contains a non-finite value");
  }
  if (c.area_side_m <= 0.0) throw ConfigError("area_side_m must be positive");
  if (c.bandwidth_hz <= 0.0) throw ConfigError("bandwidth_hz must be positive");
  if (c.shadow_std_db < 0.0) throw ConfigError("shadow_std_db must be nonnegative");
  if (c.shadow_corr_dist_m <= 0.0) throw ConfigError("shadow_corr_dist_m must be positive");
  if (!c.weights.empty()) {
    if (c.weights.size() != c.K) throw ConfigError("weights must have exactly K entries");
    for (double w : c.weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("weights must be strictly positive");
  }
  if (c.ap_positions) {
    if (static_cast<std::size_t>(c.ap_positions->rows()) != c.L)
      throw ConfigError("ap_positions must list exactly L points");
    if (!c.ap_positions->allFinite()) throw ConfigError("ap_positions must be finite");
  }
}

/// Square grid of APs at the cell centres of a uniform sqrt(L) x sqrt(L)
/// partition of the service area, unless explicit positions are configured.
inline Positions build_ap_grid(const NetworkConfig& c) {
  if (c.ap_positions) return *c.ap_positions;
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(c.L))));
  if (side * side != c.L)
    throw ConfigError("L = " + std::to_string(c.L) +
                      " is not a perfect square; supply ap_positions explicitly");
  Positions pos(static_cast<Eigen::Index>(c.L), 2);
  const double step = c.area_side_m / static_cast<double>(side);
  for (std::size_t iy = 0; iy < side; ++iy) {
    for (std::size_t ix = 0; ix < side; ++ix) {
      const auto row = static_cast<Eigen::Index>(iy * side + ix);
      pos(row, 0) = (2.0 * static_cast<double>(ix) + 1.0) * step / 2.0;
      pos(row, 1) = (2.0 * static_cast<double>(iy) + 1.0) * step / 2.0;
    }
  }
  return pos;
}

/// UEs uniformly i.i.d. over the square [0, side]^2.
inline Positions drop_ues(const NetworkConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coord(0.0, c.area_side_m);
  Positions pos(static_cast<Eigen::Index>(c.K), 2);
  for (Eigen::Index k = 0; k < pos.rows(); ++k) {
    pos(k, 0) = coord(rng);
    pos(k, 1) = coord(rng);
  }
  return pos;
}

/// C_{ki} = std^2 * 2^(-dist(k, i) / corr_dist).
inline RMatrix shadow_covariance(const Positions& ue_positions, double std_db, double corr_dist_m) {
  const Eigen::Index K = ue_positions.rows();
  RMatrix cov(K, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index i = 0; i < K; ++i) {
      const double dist = (ue_positions.row(k) - ue_positions.row(i)).norm();
      cov(k, i) = std_db * std_db * std::exp2(-dist / corr_dist_m);
    }
  }
  return cov;
}

/// Symmetric square root of a PSD matrix; tolerates singular inputs.
inline RMatrix symmetric_sqrt(const RMatrix& cov) {
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(cov);
  if (eig.info() != Eigen::Success) throw InternalError("eigendecomposition of shadow covariance failed");
  const RVector& lambda = eig.eigenvalues();
  const double jitter = 1e-9 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -jitter) throw InternalError("shadow covariance is not positive semidefinite");
  const RVector root = lambda.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

/// Real Gaussian shadowing in dB, L x K. Rows (APs) are independent; within a
/// row the UEs are correlated through shadow_covariance.
inline RMatrix sample_shadow_fading(const NetworkConfig& c, const Positions& ue_positions,
                                    std::mt19937_64& rng) {
  const auto L = static_cast<Eigen::Index>(c.L);
  const Eigen::Index K = ue_positions.rows();
  RMatrix z = RMatrix::Zero(L, K);
  if (c.shadow_std_db == 0.0) return z;
  const RMatrix factor =
      symmetric_sqrt(shadow_covariance(ue_positions, c.shadow_std_db, c.shadow_corr_dist_m));
  std::normal_distribution<double> normal(0.0, 1.0);
  RVector x(K);
  for (Eigen::Index l = 0; l < L; ++l) {
    for (Eigen::Index k = 0; k < K; ++k) x(k) = normal(rng);
    z.row(l) = (factor * x).transpose();
  }
  return z;
}

/// Thermal noise power over the configured bandwidth, in dBm.
inline double noise_power_dbm(const NetworkConfig& c) {
  return -174.0 + 10.0 * std::log10(c.bandwidth_hz) + c.noise_figure_db;
}

/// Noise-normalized large-scale gains in dB (L x K).
inline RMatrix compute_gains_db(const NetworkConfig& c, const Positions& ap_positions,
                                const Positions& ue_positions, const RMatrix& shadow_db) {
  const Eigen::Index L = ap_positions.rows();
  const Eigen::Index K = ue_positions.rows();
  const double noise_dbm = noise_power_dbm(c);
  RMatrix g(L, K);
  for (Eigen::Index l = 0; l < L; ++l) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const double planar2 = (ap_positions.row(l) - ue_positions.row(k)).squaredNorm();
      const double dist = std::sqrt(planar2 + c.ap_height_delta_m * c.ap_height_delta_m);
      g(l, k) = -c.pathloss_exponent_coeff * std::log10(dist) - c.pathloss_intercept_db +
                shadow_db(l, k) - noise_dbm;
    }
  }
  return g;
}

inline RMatrix compute_gains(const NetworkConfig& c, const Positions& ap_positions,
                             const Positions& ue_positions, const RMatrix& shadow_db) {
  return compute_gains_db(c, ap_positions, ue_positions, shadow_db)
      .unaryExpr([](double db) { return db_to_linear(db); });
}

/// For each UE, the Q APs with the largest gain, strongest first. Equal gains
/// are ordered by AP index.
inline std::vector<Cluster> cluster_users(const RMatrix& gains, std::size_t Q) {
  const auto L = static_cast<std::size_t>(gains.rows());
  if (Q < 1 || Q > L) throw ConfigError("cluster size Q must satisfy 1 <= Q <= L");
  std::vector<Cluster> clusters(static_cast<std::size_t>(gains.cols()));
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    Cluster order(L);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto col = static_cast<Eigen::Index>(k);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return gains(static_cast<Eigen::Index>(a), col) > gains(static_cast<Eigen::Index>(b), col);
    });
    order.resize(Q);
    clusters[k] = std::move(order);
  }
  return clusters;
}

inline ServingMask serving_mask(const std::vector<Cluster>& clusters, std::size_t L) {
  ServingMask mask = ServingMask::Constant(static_cast<Eigen::Index>(L),
                                           static_cast<Eigen::Index>(clusters.size()), false);
  for (std::size_t k = 0; k < clusters.size(); ++k)
    for (std::size_t l : clusters[k])
      mask(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = true;
  return mask;
}

/// A realized deployment. Gains are linear and noise-normalized, so every
/// downstream SINR expression uses unit noise power and powers in mW.
struct NetworkScenario {
  std::size_t N = 1;
  Positions ap_positions;
  Positions ue_positions;
  RMatrix gains;
  std::vector<Cluster> clusters;
  ServingMask serving;
  double power_budget = 1.0;
  RVector weights;
  double noise_dbm = 0.0;

  std::size_t num_aps() const { return static_cast<std::size_t>(gains.rows()); }
  std::size_t num_ues() const { return static_cast<std::size_t>(gains.cols()); }
  bool serves(std::size_t l, std::size_t k) const {
    return serving(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
  }
  double gain(std::size_t l, std::size_t k) const {
    return gains(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
  }
};

inline void validate(const NetworkScenario& s) {
  const std::size_t L = s.num_aps();
  const std::size_t K = s.num_ues();
  if (L == 0 || K == 0 || s.N == 0) throw ConfigError("scenario has an empty dimension");
  if (!s.gains.allFinite() || (s.gains.array() <= 0.0).any())
    throw ConfigError("gains must be strictly positive and finite");
  if (s.clusters.size() != K) throw ConfigError("one cluster per UE required");
  if (!(s.power_budget > 0.0)) throw ConfigError("power budget must be positive");
  if (static_cast<std::size_t>(s.weights.size()) != K || (s.weights.array() <= 0.0).any())
    throw ConfigError("weights must be K strictly positive values");
  for (std::size_t k = 0; k < K; ++k) {
    const Cluster& ck = s.clusters[k];
    Cluster sorted = ck;
    std::sort(sorted.begin(), sorted.end());
    if (ck.empty() || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
        sorted.back() >= L)
      throw ConfigError("cluster of UE " + std::to_string(k) + " is not a set of valid AP indices");
    double weakest_served = s.gain(ck.front(), k);
    for (std::size_t l : ck) weakest_served = std::min(weakest_served, s.gain(l, k));
    for (std::size_t l = 0; l < L; ++l) {
      if (s.serves(l, k) != (std::find(ck.begin(), ck.end(), l) != ck.end()))
        throw ConfigError("serving mask disagrees with clusters");
      if (!s.serves(l, k) && s.gain(l, k) > weakest_served)
        throw ConfigError("cluster of UE " + std::to_string(k) + " misses a stronger AP");
    }
  }
}

/// Scenario from given geometry and gains (used for toy and test deployments).
inline NetworkScenario make_scenario(std::size_t N, const RMatrix& gains, std::size_t Q,
                                     double power_budget, RVector weights = {},
                                     Positions ap_positions = {}, Positions ue_positions = {}) {
  NetworkScenario s;
  s.N = N;
  s.gains = gains;
  s.clusters = cluster_users(gains, Q);
  s.serving = serving_mask(s.clusters, static_cast<std::size_t>(gains.rows()));
  s.power_budget = power_budget;
  s.weights = weights.size() == 0 ? RVector::Ones(gains.cols()) : std::move(weights);
  s.ap_positions = std::move(ap_positions);
  s.ue_positions = std::move(ue_positions);
  validate(s);
  return s;
}

/// Full construction from a configuration; deterministic in config.seed.
inline NetworkScenario build_scenario(const NetworkConfig& c) {
  validate(c);
  Positions aps = build_ap_grid(c);
  auto drop_rng = make_rng(c.seed, RngStream::ue_drop);
  Positions ues = drop_ues(c, drop_rng);
  auto shadow_rng = make_rng(c.seed, RngStream::shadowing);
  const RMatrix z = sample_shadow_fading(c, ues, shadow_rng);
  const RMatrix gains = compute_gains(c, aps, ues, z);
  RVector w = c.weights.empty()
                  ? RVector::Ones(static_cast<Eigen::Index>(c.K))
                  : RVector(Eigen::Map<const RVector>(c.weights.data(),
                                                      static_cast<Eigen::Index>(c.weights.size())));
  NetworkScenario s = make_scenario(c.N, gains, c.Q, db_to_linear(c.power_budget_dbm), std::move(w),
                                    std::move(aps), std::move(ues));
  s.noise_dbm = noise_power_dbm(c);
  return s;
}

}  // namespace cellfree

#endif  // CELLFREE_SCENARIO_HPP
