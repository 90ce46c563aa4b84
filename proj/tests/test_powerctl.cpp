#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "cellfree/oracle.hpp"
#include "cellfree/powerctl.hpp"
#include "support.hpp"

using namespace cellfree;
using namespace testing;
using Catch::Approx;

namespace {

// Fixed-beamformer statistics whose map is T(p) = (0.5 p_2 + 1, p_1 + 1).
UatFStatistics coupled_pair() {
  UatFStatistics st{CVector::Ones(2), RMatrix(2, 2), RVector::Ones(2)};
  st.B << 1.0, 1.0, 0.5, 1.0;
  return st;
}

NetworkScenario small_scenario(std::uint64_t seed, RVector weights = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 50.0);
  RMatrix g(4, 5);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = u(rng);
  return make_scenario(2, g, 2, 10.0, std::move(weights));
}

template <typename Map>
void check_axioms(const Map& map, std::size_t K, int pairs, std::mt19937_64& rng, double rel_tol) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  for (int i = 0; i < pairs; ++i) {
    const RVector p = random_power(K, 0.05, 10.0, rng);
    RVector q = p;
    for (Eigen::Index k = 0; k < q.size(); ++k)
      if (u(rng) < 0.7) q(k) += 5.0 * u(rng);
    const double alpha = 1.0 + 3.0 * u(rng);
    const RVector tp = map(p);
    const RVector tq = map(q);
    const RVector tap = map(RVector(alpha * p));
    if ((tp.array() <= 0.0).any()) ++violations;
    if (((tp - tq).array() > rel_tol * tq.array()).any()) ++violations;
    if ((tap.array() >= alpha * tp.array()).any()) ++violations;
  }
  CHECK(violations == 0);
}

}  // namespace

TEST_CASE("interference function of a scalar link", "[powerctl]") {
  const UatFStatistics st{CVector::Constant(1, 2.0), RMatrix::Constant(1, 1, 5.0), RVector::Ones(1)};
  for (double p : {0.0, 0.5, 3.0}) {
    CHECK(interference_functions(st, RVector::Constant(1, p))(0) == Approx((p + 1.0) / 4.0).epsilon(1e-15));
  }
  const UatFStatistics zero{CVector::Zero(1), RMatrix::Zero(1, 1), RVector::Zero(1)};
  CHECK_THROWS_AS(fixed_beamformer_map(zero, RVector::Ones(1)), DegenerateBeamformerError);
}

TEST_CASE("normalization pins the peak to the budget", "[powerctl]") {
  RVector t(3);
  t << 0.3, 7.1, 2.0;
  const RVector p = normalize_to_budget(t, 100.0);
  CHECK(p(1) == 100.0);
  CHECK(p.maxCoeff() == 100.0);
  CHECK(p(0) == Approx(0.3 * 100.0 / 7.1));
  CHECK_THROWS_AS(normalize_to_budget(RVector::Zero(3), 1.0), InternalError);
  CHECK_THROWS_AS(normalize_to_budget(RVector::Constant(2, std::nan("")), 1.0), InternalError);
}

TEST_CASE("two-user fixed point is the closed-form solution", "[powerctl]") {
  const FixedBeamformerMap map(coupled_pair(), RVector::Ones(2));
  const FixedPointResult r = fixed_point_solve(map, 1.0, 1e-12, 1000);
  REQUIRE(r.converged);
  CHECK(r.power(0) == Approx((std::sqrt(7.0) - 1.0) / 2.0).epsilon(1e-10));
  CHECK(r.power(1) == 1.0);
  const RVector ratio = r.power.cwiseQuotient(map(r.power));
  CHECK(ratio.minCoeff() == Approx(0.5485837703548635).epsilon(1e-10));
  CHECK(relative_spread(ratio) <= 1e-10);
  for (const auto& rec : r.trace) CHECK(rec.power.maxCoeff() == 1.0);

  const oracle::GridResult grid = oracle::grid_maxmin_power(coupled_pair(), RVector::Ones(2), 1.0, 1e-3);
  CHECK(grid.power(0) == Approx(0.823));
  CHECK(grid.power(1) == 1.0);
  CHECK(grid.objective == Approx(0.54854635).epsilon(1e-7));
  CHECK((grid.power - r.power).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("fixed point is below every near-optimal grid point", "[powerctl][property]") {
  const FixedBeamformerMap map(coupled_pair(), RVector::Ones(2));
  const FixedPointResult r = fixed_point_solve(map, 1.0, 1e-12, 1000);
  const double resolution = 1e-3;
  // the objective moves by ~5e-4 per cell here; keep points tied with the best
  const oracle::GridResult grid = oracle::grid_maxmin_power(coupled_pair(), RVector::Ones(2), 1.0, resolution, 2e-4);
  REQUIRE(!grid.near_optimal.empty());
  for (const RVector& q : grid.near_optimal) CHECK((r.power.array() <= q.array() + resolution).all());
}

TEST_CASE("fixed-point solver bookkeeping", "[powerctl]") {
  const FixedBeamformerMap map(coupled_pair(), RVector::Ones(2));
  const FixedPointResult capped = fixed_point_solve(map, 1.0, 1e-14, 3);
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations == 3);
  CHECK(capped.trace.size() == 3);
  CHECK_THROWS_AS(fixed_point_solve(map, 0.0, 1e-6, 10), ConfigError);
  CHECK_THROWS_AS(fixed_point_solve(map, 1.0, 1e-6, 10, RVector::Constant(2, -1.0)), ConfigError);

  const UatFStatistics single{CVector::Constant(1, 2.0), RMatrix::Constant(1, 1, 5.0), RVector::Ones(1)};
  const FixedPointResult one = fixed_point_solve(FixedBeamformerMap(single, RVector::Ones(1)), 3.0, 1e-9, 10);
  CHECK(one.converged);
  CHECK(one.iterations == 1);
  CHECK(one.power(0) == 3.0);
}

TEST_CASE("fixed-beamformer map is a standard interference mapping", "[powerctl][property]") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const UatFStatistics st = random_statistics(3, rng);
    const FixedBeamformerMap map(st, random_power(3, 0.5, 2.0, rng));
    check_axioms(map, 3, 100, rng, 0.0);
  }
}

TEST_CASE("team-optimal map is a standard interference mapping on exact worlds", "[powerctl][property]") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 4; ++trial) {
    const oracle::TeamInstance inst = oracle::random_team_instance(rng, 1 + trial % 2, 2, 2, 1 + (trial / 2) % 2);
    const ChannelEnsemble e = oracle::as_ensemble(inst.world);
    const auto map = team_optimal_map(e, inst.scenario, RVector::Ones(2));
    check_axioms(map, 2, 50, rng, 1e-9);
  }
  std::mt19937_64 rng2(43);
  const oracle::TeamInstance inst = oracle::random_team_instance(rng2, 1, 2, 2, 1);
  const ChannelEnsemble e = oracle::as_ensemble(inst.world);
  const auto map = team_optimal_map(e, inst.scenario, RVector::Ones(2));
  CHECK_THROWS_AS(map(RVector::Zero(2)), ConfigError);
}

TEST_CASE("small-gain fixed point is the least element of the feasible set", "[powerctl][property]") {
  std::mt19937_64 rng(44);
  const UatFStatistics st = random_statistics(3, rng);
  // T(p) = w (D p + n / |a|^2); weights scaled so that w D has spectral radius 1/2
  RMatrix d(3, 3);
  for (Eigen::Index k = 0; k < 3; ++k)
    for (Eigen::Index j = 0; j < 3; ++j)
      d(k, j) = (st.B(j, k) - (j == k ? st.signal(static_cast<std::size_t>(k)) : 0.0)) /
                st.signal(static_cast<std::size_t>(k));
  const double radius = d.eigenvalues().cwiseAbs().maxCoeff();
  const FixedBeamformerMap map(st, RVector::Constant(3, 0.5 / radius));
  RVector p = RVector::Zero(3);
  for (int i = 0; i < 2000; ++i) p = map(p);
  REQUIRE((map(p) - p).norm() <= 1e-12 * p.norm());
  int feasible = 0;
  for (int i = 0; i < 20000; ++i) {
    const RVector q = random_power(3, 0.0, 5.0 * p.maxCoeff(), rng);
    if ((q.array() >= map(q).array()).all()) {
      ++feasible;
      CHECK((q.array() >= p.array() * (1.0 - 1e-12)).all());
    }
  }
  CHECK(feasible > 0);
}

TEST_CASE("joint algorithms on a small deployment", "[powerctl]") {
  const NetworkScenario s = small_scenario(7);
  const ChannelEnsemble e = sample_ensemble(s, 100, 3);
  const JointResult fp = algorithm_fp(e, s);
  const JointResult ao = algorithm_ao(e, s);
  REQUIRE(fp.converged);
  REQUIRE(ao.converged);
  CHECK(fp.trace.size() == 2 * fp.iterations + 1);
  CHECK(ao.trace.size() == 2 * ao.iterations + 1);
  CHECK(std::isnan(fp.trace[0].min_weighted_sinr));
  CHECK(fp.trace[0].step == StepType::power);
  for (std::size_t i = 1; i < fp.trace.size(); ++i) {
    CHECK(fp.trace[i].step == (i % 2 == 1 ? StepType::beamforming : StepType::power));
    CHECK(fp.trace[i].power.maxCoeff() == s.power_budget);
    if (i < ao.trace.size()) CHECK(ao.trace[i].power.maxCoeff() == s.power_budget);
  }
  const double fp_min = weighted_sinrs(fp.stats, fp.power, s.weights).minCoeff();
  const double ao_min = weighted_sinrs(ao.stats, ao.power, s.weights).minCoeff();
  CHECK(ao_min == Approx(fp_min).epsilon(1e-3));

  // power steps of the alternating scheme never decrease the objective
  for (std::size_t i = 4; i < ao.trace.size(); i += 2)
    CHECK(ao.trace[i].min_weighted_sinr >= ao.trace[i - 2].min_weighted_sinr * (1.0 - 1e-9));
}

TEST_CASE("alternating scheme is monotone and its beamformers reproduce its statistics", "[powerctl]") {
  std::size_t retained = 0;
  for (std::uint64_t seed : {7u, 12u, 13u}) {
    const NetworkScenario s = small_scenario(seed);
    const ChannelEnsemble e = sample_ensemble(s, 100, 3);
    JointOptions opt;
    opt.tol = 1e-12;
    opt.max_iter = 15;
    const JointResult ao = algorithm_ao(e, s, opt);
    for (std::size_t i = 2; i < ao.trace.size(); ++i)
      CHECK(ao.trace[i].min_weighted_sinr >= ao.trace[i - 1].min_weighted_sinr * (1.0 - 1e-9));
    const UatFStatistics again = estimate_statistics(e, ao.beamformers);
    CHECK((again.a - ao.stats.a).norm() <= 1e-12 * ao.stats.a.norm());
    CHECK((again.B - ao.stats.B).norm() <= 1e-12 * ao.stats.B.norm());
    CHECK((again.n - ao.stats.n).norm() <= 1e-12 * ao.stats.n.norm());
    CHECK(ao.beamformers.owner.size() == 5);
    for (std::size_t o : ao.beamformers.owner) CHECK(o < ao.beamformers.sets.size());
    retained += ao.retained;
  }
  CHECK(retained > 0);  // the mixed-set path is exercised
}

TEST_CASE("first round equals one map evaluation at full power", "[powerctl]") {
  const NetworkScenario s = small_scenario(8);
  const ChannelEnsemble e = sample_ensemble(s, 50, 4);
  JointOptions opt;
  opt.max_iter = 1;
  const JointResult fp = algorithm_fp(e, s, opt);
  CHECK_FALSE(fp.converged);
  const RVector full = RVector::Constant(5, s.power_budget);
  const RVector expected = normalize_to_budget(team_optimal_map(e, s, s.weights)(full), s.power_budget);
  CHECK(fp.trace.back().power == expected);
}

TEST_CASE("rescaling all weights leaves the solution unchanged", "[powerctl][property]") {
  const RVector w = (RVector(5) << 1.0, 2.0, 0.5, 1.0, 3.0).finished();
  const NetworkScenario s1 = small_scenario(9, w);
  const NetworkScenario s2 = small_scenario(9, RVector(7.5 * w));
  const ChannelEnsemble e = sample_ensemble(s1, 60, 5);
  const JointResult a = algorithm_fp(e, s1);
  const JointResult b = algorithm_fp(e, s2);
  CHECK(a.iterations == b.iterations);
  CHECK((a.power - b.power).cwiseAbs().maxCoeff() <= 1e-10 * s1.power_budget);
}

TEST_CASE("single user transmits at full power", "[powerctl]") {
  RMatrix g(2, 1);
  g << 3.0, 1.0;
  const NetworkScenario s = make_scenario(2, g, 1, 5.0);
  const ChannelEnsemble e = sample_ensemble(s, 20, 1);
  for (const JointResult& r : {algorithm_fp(e, s), algorithm_ao(e, s)}) {
    CHECK(r.converged);
    CHECK(r.power(0) == 5.0);
  }
}

TEST_CASE("invalid initial powers are rejected", "[powerctl]") {
  const NetworkScenario s = small_scenario(10);
  const ChannelEnsemble e = sample_ensemble(s, 10, 6);
  JointOptions opt;
  opt.p0 = RVector::Constant(5, 2.0 * s.power_budget);
  CHECK_THROWS_AS(algorithm_fp(e, s, opt), ConfigError);
  opt.p0 = RVector::Zero(5);
  CHECK_THROWS_AS(algorithm_ao(e, s, opt), ConfigError);
  opt.p0 = RVector::Ones(3);
  CHECK_THROWS_AS(algorithm_ao(e, s, opt), ConfigError);
}

TEST_CASE("matched-filter joint run keeps its beamformers", "[powerctl]") {
  const NetworkScenario s = small_scenario(11);
  const ChannelEnsemble e = sample_ensemble(s, 50, 7);
  const JointResult mf = algorithm_ao(e, s, MatchedFilterRule{});
  CHECK(mf.converged);
  CHECK(mf.beamformers.rule() == BeamformingRule::matched_filter);
  CHECK(mf.retained == 0);
  CHECK(relative_spread(weighted_sinrs(mf.stats, mf.power, s.weights)) <= 1e-6);
}
