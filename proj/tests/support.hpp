#ifndef CELLFREE_TESTS_SUPPORT_HPP
#define CELLFREE_TESTS_SUPPORT_HPP

#include <random>
#include <vector>

#include "cellfree/channel.hpp"
#include "cellfree/uatf.hpp"

namespace testing {

using namespace cellfree;

// Beamformers given explicitly per sample.
struct FixedRealizer {
  std::vector<CMatrix> v;
  CMatrix realize(const ChannelEnsemble&, std::size_t s) const { return v[s]; }
};

inline CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = {normal(rng), normal(rng)};
  return m;
}

// Weighted ensemble with everything served (serving mask all true).
inline ChannelEnsemble explicit_ensemble(std::size_t N, std::size_t L, std::size_t K,
                                         std::vector<CMatrix> h, std::vector<double> weights = {}) {
  ChannelEnsemble e;
  e.N = N;
  e.L = L;
  e.K = K;
  e.serving = ServingMask::Constant(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(K), true);
  e.realizations = std::move(h);
  e.weights = std::move(weights);
  return e;
}

inline ChannelEnsemble random_ensemble(std::size_t N, std::size_t L, std::size_t K, std::size_t n,
                                       std::mt19937_64& rng) {
  std::vector<CMatrix> h;
  for (std::size_t s = 0; s < n; ++s)
    h.push_back(random_complex(static_cast<Eigen::Index>(N * L), static_cast<Eigen::Index>(K), rng));
  return explicit_ensemble(N, L, K, std::move(h));
}

inline FixedRealizer random_beamformers(const ChannelEnsemble& e, std::mt19937_64& rng) {
  FixedRealizer bf;
  for (std::size_t s = 0; s < e.size(); ++s)
    bf.v.push_back(random_complex(static_cast<Eigen::Index>(e.N * e.L), static_cast<Eigen::Index>(e.K), rng));
  return bf;
}

inline UatFStatistics random_statistics(std::size_t K, std::mt19937_64& rng) {
  const ChannelEnsemble e = random_ensemble(2, 2, K, 8, rng);
  return estimate_statistics(e, random_beamformers(e, rng));
}

inline RVector random_power(std::size_t K, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  RVector p(static_cast<Eigen::Index>(K));
  for (Eigen::Index k = 0; k < p.size(); ++k) p(k) = u(rng);
  return p;
}

}  // namespace testing

#endif  // CELLFREE_TESTS_SUPPORT_HPP
