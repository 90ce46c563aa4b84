#ifndef CELLFREE_POWERCTL_HPP
#define CELLFREE_POWERCTL_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cellfree/channel.hpp"
#include "cellfree/common.hpp"
#include "cellfree/scenario.hpp"
#include "cellfree/teammse.hpp"
#include "cellfree/uatf.hpp"

namespace cellfree {

/// A power-to-interference mapping T: R_+^K -> R_++^K with T_k = w_k f_k(p).
template <typename T>
concept InterferenceMapping = requires(const T& map, const RVector& p) {
  { map(p) } -> std::convertible_to<RVector>;
  { map.weights() } -> std::convertible_to<RVector>;
};

/// f_k(p) = (p_k Var(h_k^H v_k) + sum_{j != k} p_j B(j,k) + n_k) / |a_k|^2
/// for every UE: the interference function of a fixed beamformer set.
inline RVector interference_functions(const UatFStatistics& st, const RVector& p) {
  RVector f(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    detail::require_valid(st, kk);
    f(k) = interference_plus_noise(st, p, kk) / st.signal(kk);
  }
  return f;
}

/// Affine map of fixed beamformers.
class FixedBeamformerMap {
 public:
  FixedBeamformerMap(UatFStatistics stats, RVector weights)
      : stats_(std::move(stats)), weights_(std::move(weights)) {
    for (std::size_t k = 0; k < stats_.size(); ++k)
      if (stats_.degenerate(k))
        throw DegenerateBeamformerError("UatF-degenerate beamformer for UE " + std::to_string(k));
  }
  RVector operator()(const RVector& p) const {
    return weights_.cwiseProduct(interference_functions(stats_, p));
  }
  const RVector& weights() const { return weights_; }
  const UatFStatistics& statistics() const { return stats_; }

 private:
  UatFStatistics stats_;
  RVector weights_;
};

inline FixedBeamformerMap fixed_beamformer_map(const UatFStatistics& stats, const RVector& weights) {
  return FixedBeamformerMap(stats, weights);
}

/// Rebuilds beamformers for a power vector.
template <typename R>
concept BeamformerRule = requires(const R& rule, const ChannelEnsemble& e, const NetworkScenario& s,
                                  const RVector& p) {
  { rule(e, s, p) } -> std::convertible_to<BeamformerSet>;
};

struct TeamMmseRule {
  BeamformerSet operator()(const ChannelEnsemble& e, const NetworkScenario& s, const RVector& p) const {
    return build_team_mmse(e, s, p);
  }
};

struct MatchedFilterRule {
  BeamformerSet operator()(const ChannelEnsemble& e, const NetworkScenario& s, const RVector&) const {
    return build_matched_filter(e, s);
  }
};

/// Map with the beamformers re-optimized at every evaluation point:
/// T_k(p) = w_k p_k / u_k(p), u_k(p) the SINR of the team MMSE beamformer
/// built at p. Requires p > 0.
template <BeamformerRule Rule = TeamMmseRule>
class TeamOptimalMap {
 public:
  struct Evaluation {
    BeamformerSet beamformers;
    UatFStatistics stats;
    RVector value;
  };

  TeamOptimalMap(const ChannelEnsemble& e, const NetworkScenario& s, RVector weights, Rule rule = {})
      : ensemble_(&e), scenario_(&s), weights_(std::move(weights)), rule_(std::move(rule)) {}

  Evaluation evaluate(const RVector& p) const {
    if ((p.array() <= 0.0).any()) throw ConfigError("team-optimal map is defined for strictly positive powers");
    Evaluation ev{rule_(*ensemble_, *scenario_, p), {}, {}};
    ev.stats = estimate_statistics(*ensemble_, ev.beamformers);
    ev.value = weights_.cwiseProduct(interference_functions(ev.stats, p));
    return ev;
  }
  RVector operator()(const RVector& p) const { return evaluate(p).value; }
  const RVector& weights() const { return weights_; }

 private:
  const ChannelEnsemble* ensemble_;
  const NetworkScenario* scenario_;
  RVector weights_;
  Rule rule_;
};

inline TeamOptimalMap<> team_optimal_map(const ChannelEnsemble& e, const NetworkScenario& s,
                                         const RVector& weights) {
  return TeamOptimalMap<>(e, s, weights);
}

/// Beamformers assembled per UE from one or more sets: v_k comes from
/// sets[owner[k]]. Every set depends on local CSI only, so the assembly does too.
struct BeamformerSelection {
  std::vector<BeamformerSet> sets;
  std::vector<std::size_t> owner;

  static BeamformerSelection single(BeamformerSet bf, std::size_t K) {
    BeamformerSelection out;
    out.sets.push_back(std::move(bf));
    out.owner.assign(K, 0);
    return out;
  }

  BeamformingRule rule() const { return sets.front().rule; }

  CMatrix realize(const ChannelEnsemble& e, std::size_t s) const {
    if (sets.size() == 1) return sets.front().realize(e, s);
    CMatrix v(static_cast<Eigen::Index>(e.N * e.L), static_cast<Eigen::Index>(e.K));
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const CMatrix vi = sets[i].realize(e, s);
      for (std::size_t k = 0; k < owner.size(); ++k)
        if (owner[k] == i) v.col(static_cast<Eigen::Index>(k)) = vi.col(static_cast<Eigen::Index>(k));
    }
    return v;
  }

  /// Drops sets no UE refers to.
  void prune() {
    std::vector<std::size_t> remap(sets.size(), sets.size());
    std::vector<BeamformerSet> kept;
    for (std::size_t& o : owner) {
      if (remap[o] == sets.size()) {
        remap[o] = kept.size();
        kept.push_back(std::move(sets[o]));
      }
      o = remap[o];
    }
    sets = std::move(kept);
  }
};

/// P t / ||t||_inf, with the largest entry pinned to exactly P.
inline RVector normalize_to_budget(const RVector& t, double budget) {
  Eigen::Index imax = 0;
  const double peak = t.maxCoeff(&imax);
  if (!(peak > 0.0) || !std::isfinite(peak)) throw InternalError("interference map returned a non-positive vector");
  RVector p = t * (budget / peak);
  p(imax) = budget;
  return p;
}

enum class StepType { beamforming, power };

inline std::string to_string(StepType s) { return s == StepType::beamforming ? "beamforming" : "power"; }

struct TraceRecord {
  std::size_t iteration = 0;
  StepType step = StepType::power;
  RVector power;
  RVector weighted_sinr;  // w_k^{-1} SINR_k
  double min_weighted_sinr = std::numeric_limits<double>::quiet_NaN();
  double min_rate = std::numeric_limits<double>::quiet_NaN();
  double residual = 0.0;  // ||p_new - p_old||_inf / P
};

using ConvergenceTrace = std::vector<TraceRecord>;

inline TraceRecord make_record(std::size_t iteration, StepType step, const RVector& p,
                               const RVector& weighted_sinr, const RVector& weights, double residual) {
  TraceRecord r{iteration, step, p, weighted_sinr};
  r.min_weighted_sinr = weighted_sinr.minCoeff();
  r.min_rate = weighted_sinr.cwiseProduct(weights)
                   .unaryExpr([](double x) { return std::log2(1.0 + x); })
                   .minCoeff();
  r.residual = residual;
  return r;
}

inline RVector weighted_sinrs(const UatFStatistics& st, const RVector& p, const RVector& weights) {
  return sinrs(st, p).cwiseQuotient(weights);
}

inline double relative_spread(const RVector& x) { return (x.maxCoeff() - x.minCoeff()) / x.minCoeff(); }

struct FixedPointResult {
  RVector power;
  ConvergenceTrace trace;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Normalized fixed-point iteration p <- P T(p) / ||T(p)||_inf. Stops once
/// the relative step ||p_{i+1} - p_i||_inf / P is at most tol. Running out of
/// iterations is reported through `converged`, not an exception.
template <InterferenceMapping Map>
FixedPointResult fixed_point_solve(const Map& map, double budget, double tol, std::size_t max_iter,
                                   const RVector& p0) {
  if (!(budget > 0.0) || !(tol > 0.0)) throw ConfigError("budget and tolerance must be positive");
  if ((p0.array() < 0.0).any()) throw ConfigError("initial power vector must be nonnegative");
  const RVector w = map.weights();
  FixedPointResult out;
  RVector p = p0;
  for (std::size_t i = 0; i < max_iter; ++i) {
    const RVector t = map(p);
    const RVector next = normalize_to_budget(t, budget);
    const double residual = (next - p).cwiseAbs().maxCoeff() / budget;
    out.trace.push_back(make_record(i, StepType::power, p, p.cwiseQuotient(t), w, residual));
    p = next;
    out.iterations = i + 1;
    if (residual <= tol) {
      out.converged = true;
      break;
    }
  }
  out.power = p;
  return out;
}

template <InterferenceMapping Map>
FixedPointResult fixed_point_solve(const Map& map, double budget, double tol, std::size_t max_iter) {
  return fixed_point_solve(map, budget, tol, max_iter, RVector::Constant(map.weights().size(), budget));
}

struct JointOptions {
  double tol = 1e-6;
  std::size_t max_iter = 100;
  double inner_tol = 1e-9;
  std::size_t inner_max_iter = 100000;
  std::optional<RVector> p0;  // default P * 1
  double monotonicity_slack = 1e-9;
  // The first round's beamformers are built at the arbitrary initial power,
  // so convergence is only declared from this round on.
  std::size_t min_iter = 2;
};

struct JointResult {
  RVector power;
  BeamformerSelection beamformers;
  UatFStatistics stats;
  ConvergenceTrace trace;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t retained = 0;  // AO only: UE beamformers kept over a worse rebuild
};

namespace detail {

inline RVector initial_power(const NetworkScenario& s, const JointOptions& opt) {
  RVector p0 = opt.p0 ? *opt.p0 : RVector::Constant(static_cast<Eigen::Index>(s.num_ues()), s.power_budget);
  if (p0.size() != static_cast<Eigen::Index>(s.num_ues()) || (p0.array() <= 0.0).any() ||
      p0.maxCoeff() > s.power_budget)
    throw ConfigError("initial power vector must be positive, of length K and within the budget");
  return p0;
}

inline TraceRecord initial_record(const RVector& p0) {
  TraceRecord r;
  r.iteration = 0;
  r.step = StepType::power;
  r.power = p0;
  r.weighted_sinr = RVector::Constant(p0.size(), std::numeric_limits<double>::quiet_NaN());
  return r;
}

inline bool stalled(const TraceRecord& now, const std::optional<double>& previous_objective, double tol) {
  if (now.residual <= tol) return true;
  return previous_objective &&
         std::abs(now.min_weighted_sinr - *previous_objective) <= tol * std::abs(now.min_weighted_sinr);
}

/// UE-wise safeguard of the alternating scheme: the rebuild at p is optimal
/// for the channel distribution but only approximately so on a finite
/// ensemble. A UE whose SINR at p would drop keeps its previous beamformer.
/// Column k of the statistics depends on v_k alone, so columns can be swapped.
inline void keep_better(BeamformerSelection& fresh, UatFStatistics& st, const BeamformerSelection& previous,
                        const UatFStatistics& previous_st, const RVector& p, std::size_t& retained) {
  std::vector<std::size_t> slot(previous.sets.size(), 0);  // 0: not copied yet
  for (std::size_t k = 0; k < fresh.owner.size(); ++k) {
    if (!(sinr(previous_st, p, k) > sinr(st, p, k))) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    st.a(kk) = previous_st.a(kk);
    st.B.col(kk) = previous_st.B.col(kk);
    st.n(kk) = previous_st.n(kk);
    const std::size_t src = previous.owner[k];
    if (slot[src] == 0) {
      slot[src] = fresh.sets.size();
      fresh.sets.push_back(previous.sets[src]);
    }
    fresh.owner[k] = slot[src];
    ++retained;
  }
  fresh.prune();
}

}  // namespace detail

/// Joint optimization by plain fixed-point iterations on the beamformer-
/// optimal interference map. Each round rebuilds the beamformers at the
/// current powers (beamforming step) and applies one normalized map
/// evaluation (power step).
template <BeamformerRule Rule>
JointResult algorithm_fp(const ChannelEnsemble& e, const NetworkScenario& s, const Rule& rule,
                         const JointOptions& opt = {}) {
  const double budget = s.power_budget;
  const RVector& w = s.weights;
  TeamOptimalMap<Rule> map(e, s, w, rule);
  JointResult out;
  RVector p = detail::initial_power(s, opt);
  out.trace.push_back(detail::initial_record(p));
  std::optional<double> previous;
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    auto ev = map.evaluate(p);
    out.trace.push_back(make_record(it, StepType::beamforming, p, weighted_sinrs(ev.stats, p, w), w, 0.0));
    const RVector next = normalize_to_budget(ev.value, budget);
    const double residual = (next - p).cwiseAbs().maxCoeff() / budget;
    p = next;
    out.trace.push_back(make_record(it, StepType::power, p, weighted_sinrs(ev.stats, p, w), w, residual));
    out.beamformers = BeamformerSelection::single(std::move(ev.beamformers), s.num_ues());
    out.stats = std::move(ev.stats);
    out.iterations = it;
    if (it >= opt.min_iter && detail::stalled(out.trace.back(), previous, opt.tol)) {
      out.converged = true;
      break;
    }
    previous = out.trace.back().min_weighted_sinr;
  }
  out.power = p;
  return out;
}

template <BeamformerRule Rule>
JointResult algorithm_ao(const ChannelEnsemble& e, const NetworkScenario& s, const Rule& rule,
                         const JointOptions& opt = {}) {
  const double budget = s.power_budget;
  const RVector& w = s.weights;
  JointResult out;
  RVector p = detail::initial_power(s, opt);
  out.trace.push_back(detail::initial_record(p));
  std::optional<double> previous;
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    BeamformerSelection bf = BeamformerSelection::single(rule(e, s, p), s.num_ues());
    UatFStatistics st = estimate_statistics(e, bf.sets.front());
    if (it > 1) detail::keep_better(bf, st, out.beamformers, out.stats, p, out.retained);
    out.trace.push_back(make_record(it, StepType::beamforming, p, weighted_sinrs(st, p, w), w, 0.0));
    const FixedBeamformerMap inner(st, w);
    const FixedPointResult solved = fixed_point_solve(inner, budget, opt.inner_tol, opt.inner_max_iter, p);
    const double residual = (solved.power - p).cwiseAbs().maxCoeff() / budget;
    p = solved.power;
    out.trace.push_back(make_record(it, StepType::power, p, weighted_sinrs(st, p, w), w, residual));
    const double objective = out.trace.back().min_weighted_sinr;
    if (previous && objective < *previous - opt.monotonicity_slack * std::abs(*previous))
      throw InternalError("alternating optimization decreased the max-min objective from " +
                          std::to_string(*previous) + " to " + std::to_string(objective));
    out.beamformers = std::move(bf);
    out.stats = std::move(st);
    out.iterations = it;
    if (it >= opt.min_iter && detail::stalled(out.trace.back(), previous, opt.tol)) {
      out.converged = true;
      break;
    }
    previous = objective;
  }
  out.power = p;
  return out;
}

inline JointResult algorithm_fp(const ChannelEnsemble& e, const NetworkScenario& s,
                                const JointOptions& opt = {}) {
  return algorithm_fp(e, s, TeamMmseRule{}, opt);
}

inline JointResult algorithm_ao(const ChannelEnsemble& e, const NetworkScenario& s,
                                const JointOptions& opt = {}) {
  return algorithm_ao(e, s, TeamMmseRule{}, opt);
}

}  // namespace cellfree

#endif  // CELLFREE_POWERCTL_HPP
