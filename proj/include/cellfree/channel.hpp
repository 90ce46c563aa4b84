#ifndef CELLFREE_CHANNEL_HPP
#define CELLFREE_CHANNEL_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cellfree/common.hpp"
#include "cellfree/scenario.hpp"

namespace cellfree {

/// Fixed training set of channel realizations. Each realization is an
/// (N L) x K matrix whose rows l*N .. l*N+N-1 hold AP l's block h_{l,k}.
/// Samples are weighted uniformly unless `weights` is non-empty (used to
/// enumerate the atoms of an exact finite distribution).
struct ChannelEnsemble {
  std::size_t N = 0;
  std::size_t L = 0;
  std::size_t K = 0;
  std::uint64_t seed = 0;
  ServingMask serving;
  std::vector<CMatrix> realizations;
  std::vector<double> weights;

  std::size_t size() const { return realizations.size(); }
  double weight(std::size_t s) const {
    return weights.empty() ? 1.0 / static_cast<double>(realizations.size()) : weights[s];
  }
  auto ap_block(std::size_t s, std::size_t l) const {
    return realizations[s].middleRows(static_cast<Eigen::Index>(l * N), static_cast<Eigen::Index>(N));
  }
  bool serves(std::size_t l, std::size_t k) const {
    return serving(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
  }
};

/// Draws n_sim i.i.d. realizations with h_{l,k} ~ CN(0, gamma_{l,k} I_N).
inline ChannelEnsemble sample_ensemble(const NetworkScenario& scenario, std::size_t n_sim,
                                       std::uint64_t seed) {
  if (n_sim < 1) throw ConfigError("n_sim must be at least 1");
  ChannelEnsemble e;
  e.N = scenario.N;
  e.L = scenario.num_aps();
  e.K = scenario.num_ues();
  e.seed = seed;
  e.serving = scenario.serving;
  e.realizations.reserve(n_sim);
  auto rng = make_rng(seed, RngStream::channel);
  std::normal_distribution<double> normal(0.0, 1.0);
  RMatrix scale = (scenario.gains / 2.0).cwiseSqrt();
  for (std::size_t s = 0; s < n_sim; ++s) {
    CMatrix h(static_cast<Eigen::Index>(e.N * e.L), static_cast<Eigen::Index>(e.K));
    for (std::size_t l = 0; l < e.L; ++l) {
      for (std::size_t k = 0; k < e.K; ++k) {
        const double sd = scale(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
        for (std::size_t n = 0; n < e.N; ++n) {
          const double re = normal(rng);
          const double im = normal(rng);
          h(static_cast<Eigen::Index>(l * e.N + n), static_cast<Eigen::Index>(k)) = {sd * re, sd * im};
        }
      }
    }
    e.realizations.push_back(std::move(h));
  }
  return e;
}

/// Local CSI of one AP: column k is h_{l,k} when l serves k and zero otherwise
/// (the zero-mean channel's expectation).
struct LocalCSIView {
  std::size_t ap_index = 0;
  std::vector<std::size_t> served;  // UEs whose channel this AP knows
  std::vector<CMatrix> samples;     // one N x K matrix per realization
};

inline std::vector<std::size_t> served_ues(const ServingMask& serving, std::size_t l) {
  std::vector<std::size_t> out;
  for (Eigen::Index k = 0; k < serving.cols(); ++k)
    if (serving(static_cast<Eigen::Index>(l), k)) out.push_back(static_cast<std::size_t>(k));
  return out;
}

/// Masked copy of AP l's block for one sample.
template <typename Block>
CMatrix mask_local(const Block& block, const std::vector<std::size_t>& served) {
  CMatrix out = CMatrix::Zero(block.rows(), block.cols());
  for (std::size_t k : served) out.col(static_cast<Eigen::Index>(k)) = block.col(static_cast<Eigen::Index>(k));
  return out;
}

inline LocalCSIView local_view(const ChannelEnsemble& e, std::size_t l) {
  if (l >= e.L) throw ConfigError("AP index out of range");
  LocalCSIView v;
  v.ap_index = l;
  v.served = served_ues(e.serving, l);
  v.samples.reserve(e.size());
  for (std::size_t s = 0; s < e.size(); ++s) v.samples.push_back(mask_local(e.ap_block(s, l), v.served));
  return v;
}

/// Re-applies the masking rule to an existing view.
inline LocalCSIView local_view(const LocalCSIView& view) {
  LocalCSIView v;
  v.ap_index = view.ap_index;
  v.served = view.served;
  v.samples.reserve(view.samples.size());
  for (const CMatrix& m : view.samples) v.samples.push_back(mask_local(m, v.served));
  return v;
}

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("truncated ensemble file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& os, double d) { write_u64(os, std::bit_cast<std::uint64_t>(d)); }
inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_u64(is)); }

}  // namespace detail

/// Binary layout, all little-endian: five u64 {n_sim, N, L, K, seed}, then for
/// each sample the (N L) x K matrix in row-major order as (re, im) f64 pairs.
/// Sample weights are not stored; dumps are for uniformly weighted ensembles.
inline void dump_ensemble(const ChannelEnsemble& e, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  for (std::uint64_t v : {static_cast<std::uint64_t>(e.size()), static_cast<std::uint64_t>(e.N),
                          static_cast<std::uint64_t>(e.L), static_cast<std::uint64_t>(e.K), e.seed})
    detail::write_u64(os, v);
  for (const CMatrix& h : e.realizations)
    for (Eigen::Index r = 0; r < h.rows(); ++r)
      for (Eigen::Index c = 0; c < h.cols(); ++c) {
        detail::write_f64(os, h(r, c).real());
        detail::write_f64(os, h(r, c).imag());
      }
  if (!os) throw ConfigError("failed writing " + path);
}

/// Loads a dump; the serving mask comes from the scenario it belongs to.
inline ChannelEnsemble load_ensemble(const std::string& path, const NetworkScenario& scenario) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  ChannelEnsemble e;
  const std::uint64_t n_sim = detail::read_u64(is);
  e.N = detail::read_u64(is);
  e.L = detail::read_u64(is);
  e.K = detail::read_u64(is);
  e.seed = detail::read_u64(is);
  if (e.N != scenario.N || e.L != scenario.num_aps() || e.K != scenario.num_ues())
    throw ConfigError("ensemble dimensions do not match the scenario");
  e.serving = scenario.serving;
  e.realizations.reserve(n_sim);
  for (std::uint64_t s = 0; s < n_sim; ++s) {
    CMatrix h(static_cast<Eigen::Index>(e.N * e.L), static_cast<Eigen::Index>(e.K));
    for (Eigen::Index r = 0; r < h.rows(); ++r)
      for (Eigen::Index c = 0; c < h.cols(); ++c) {
        const double re = detail::read_f64(is);
        h(r, c) = {re, detail::read_f64(is)};
      }
    e.realizations.push_back(std::move(h));
  }
  return e;
}

}  // namespace cellfree

#endif  // CELLFREE_CHANNEL_HPP
