#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cellfree/uatf.hpp"
#include "support.hpp"

using namespace cellfree;
using namespace testing;
using Catch::Approx;

namespace {

ChannelEnsemble two_point_scalar() {
  std::vector<CMatrix> h{CMatrix::Constant(1, 1, 1.0), CMatrix::Constant(1, 1, 3.0)};
  return explicit_ensemble(1, 1, 1, std::move(h));
}

FixedRealizer constant_scalar(std::size_t n, cdouble v) {
  return FixedRealizer{std::vector<CMatrix>(n, CMatrix::Constant(1, 1, v))};
}

}  // namespace

TEST_CASE("two-point scalar statistics", "[uatf]") {
  const ChannelEnsemble e = two_point_scalar();
  const UatFStatistics st = estimate_statistics(e, constant_scalar(2, 1.0));
  CHECK(st.a(0) == cdouble(2.0, 0.0));
  CHECK(st.B(0, 0) == 5.0);
  CHECK(st.n(0) == 1.0);
  const RVector p = RVector::Ones(1);
  CHECK(sinr(st, p, 0) == Approx(2.0).epsilon(1e-15));
  CHECK(rate(st, p, 0) == Approx(std::log2(3.0)).epsilon(1e-15));
}

TEST_CASE("scalar MSE", "[uatf]") {
  const auto e = explicit_ensemble(1, 1, 1, {CMatrix::Constant(1, 1, 1.0)});
  const auto bf = constant_scalar(1, 0.5);
  const RVector p = RVector::Ones(1);
  CHECK(mse(e, bf, p, 0) == Approx(0.5).epsilon(1e-15));
  CHECK(mse_from_statistics(estimate_statistics(e, bf), p, 0) == Approx(0.5).epsilon(1e-15));
}

TEST_CASE("zero power and degenerate beamformers", "[uatf]") {
  const ChannelEnsemble e = two_point_scalar();
  CHECK(sinr(estimate_statistics(e, constant_scalar(2, 1.0)), RVector::Zero(1), 0) == 0.0);
  const UatFStatistics zero = estimate_statistics(e, constant_scalar(2, 0.0));
  CHECK(zero.degenerate(0));
  CHECK_THROWS_AS(sinr(zero, RVector::Ones(1), 0), DegenerateBeamformerError);

  // zero-mean effective channel: h in {1, -1} with v = h gives a = 1, but v = 1 gives a = 0
  const auto sym = explicit_ensemble(1, 1, 1, {CMatrix::Constant(1, 1, 1.0), CMatrix::Constant(1, 1, -1.0)});
  CHECK(estimate_statistics(sym, constant_scalar(2, 1.0)).degenerate(0));
  CHECK_THROWS_AS(sinr(zero, RVector::Ones(1), 1), ConfigError);
}

TEST_CASE("variance of the effective channel is nonnegative", "[uatf][property]") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const UatFStatistics st = random_statistics(3, rng);
    for (std::size_t k = 0; k < 3; ++k) CHECK(st.B(k, k) - st.signal(k) >= -1e-12 * st.B(k, k));
  }
}

TEST_CASE("SINR is invariant to rescaling a beamformer", "[uatf][property]") {
  std::mt19937_64 rng(22);
  const ChannelEnsemble e = random_ensemble(2, 2, 3, 10, rng);
  const FixedRealizer bf = random_beamformers(e, rng);
  FixedRealizer scaled = bf;
  const cdouble c(-0.3, 2.1);
  for (auto& v : scaled.v) v.col(1) *= c;
  const RVector p = random_power(3, 0.1, 5.0, rng);
  const UatFStatistics a = estimate_statistics(e, bf);
  const UatFStatistics b = estimate_statistics(e, scaled);
  for (std::size_t k = 0; k < 3; ++k) CHECK(sinr(b, p, k) == Approx(sinr(a, p, k)).epsilon(1e-12));
}

TEST_CASE("SINR grows with own power and drops with others'", "[uatf][property]") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const UatFStatistics st = random_statistics(3, rng);
    const RVector p = random_power(3, 0.1, 5.0, rng);
    RVector own = p;
    own(0) *= 1.5;
    RVector other = p;
    other(2) *= 1.5;
    CHECK(sinr(st, own, 0) >= sinr(st, p, 0));
    CHECK(sinr(st, other, 0) <= sinr(st, p, 0));
  }
}

TEST_CASE("MSE from statistics matches the per-sample evaluation", "[uatf][property]") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelEnsemble e = random_ensemble(2, 3, 4, 12, rng);
    const FixedRealizer bf = random_beamformers(e, rng);
    const UatFStatistics st = estimate_statistics(e, bf);
    const RVector p = random_power(4, 0.1, 10.0, rng);
    for (std::size_t k = 0; k < 4; ++k) {
      const double direct = mse(e, bf, p, k);
      CHECK(std::abs(mse_from_statistics(st, p, k) - direct) <= 1e-10 * direct);
    }
  }
}

TEST_CASE("weighted ensembles match repeated samples", "[uatf]") {
  std::mt19937_64 rng(25);
  const CMatrix h0 = random_complex(2, 2, rng), h1 = random_complex(2, 2, rng);
  const CMatrix v0 = random_complex(2, 2, rng), v1 = random_complex(2, 2, rng);
  const auto weighted = explicit_ensemble(2, 1, 2, {h0, h1}, {0.75, 0.25});
  const auto repeated = explicit_ensemble(2, 1, 2, {h0, h0, h0, h1});
  const UatFStatistics a = estimate_statistics(weighted, FixedRealizer{{v0, v1}});
  const UatFStatistics b = estimate_statistics(repeated, FixedRealizer{{v0, v0, v0, v1}});
  CHECK((a.a - b.a).norm() <= 1e-12);
  CHECK((a.B - b.B).norm() <= 1e-12);
  CHECK((a.n - b.n).norm() <= 1e-12);
}
