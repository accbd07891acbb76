#include <cmath>

#include "catch_amalgamated.hpp"
#include "lininf/oracle.hpp"

using namespace lininf;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

EvidenceSpec binom(long n, long s) { return {Binomial{n, s, std::nullopt, std::nullopt}, false, {}}; }
EvidenceSpec known(long n, double m, double s2) { return {NormalKnownVar{n, m, s2}, false, {}}; }

Diagram beta_binomial() {
  return Diagram({Node::basic("p", PriorSpec::beta(1, 1)), Node::observation("e", "p", binom(10, 7))});
}

template <class Draw>
std::pair<double, double> sample_moments(Draw&& draw, int n) {
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = draw();
    s += x;
    s2 += x * x;
  }
  const double m = s / n;
  return {m, s2 / n - m * m};
}

}  // namespace

TEST_CASE("splitmix64 reference output", "[oracle]") {
  CHECK(rng::splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(rng::splitmix64(1) != rng::splitmix64(2));
}

TEST_CASE("samplers reproduce their moments", "[oracle]") {
  auto g = rng::substream(42, 0);
  const int n = 200000;
  auto [um, uv] = sample_moments([&] { return rng::uniform(g); }, n);
  CHECK_THAT(um, WithinAbs(0.5, 0.005));
  CHECK_THAT(uv, WithinAbs(1.0 / 12.0, 0.002));
  auto [nm, nv] = sample_moments([&] { return rng::normal(g); }, n);
  CHECK_THAT(nm, WithinAbs(0.0, 0.01));
  CHECK_THAT(nv, WithinAbs(1.0, 0.02));
  for (double k : {0.3, 1.0, 4.5}) {
    auto [gm, gv] = sample_moments([&] { return rng::gamma(g, k); }, n);
    CHECK_THAT(gm, WithinAbs(k, 0.03 * std::max(1.0, k)));
    CHECK_THAT(gv, WithinAbs(k, 0.06 * std::max(1.0, k)));
  }
  auto [bm, bv] = sample_moments([&] { return rng::beta(g, 2.0, 5.0); }, n);
  CHECK_THAT(bm, WithinAbs(2.0 / 7.0, 0.003));
  CHECK_THAT(bv, WithinAbs(10.0 / (49.0 * 8.0), 0.001));
}

TEST_CASE("beta-binomial oracle matches the exact posterior", "[oracle]") {
  const McEstimate e = mc_posterior(beta_binomial(), 300000, 1);
  const auto& p = e.estimates.at("p");
  CHECK(std::abs(p.mean - 2.0 / 3.0) < 4.0 * p.mean_se);
  CHECK(std::abs(p.variance - 0.017094017094017094) < 4.0 * p.variance_se);
  CHECK(p.mean_se > 0.0);
  CHECK(p.mean_se < 1e-3);
  CHECK(e.effective_sample_size > 10000.0);
  CHECK_FALSE(e.warning);
  CHECK(e.parameters == std::vector<std::string>{"p"});
}

TEST_CASE("oracle matches the conjugate normal posterior", "[oracle]") {
  const Diagram d({Node::basic("m", PriorSpec::normal(0, 4)), Node::observation("e", "m", known(4, 1.0, 4.0))});
  const McEstimate e = mc_posterior(d, 200000, 5);
  const auto& m = e.estimates.at("m");
  // Prior precision 1/4, data precision 1; posterior N(0.8, 0.8).
  CHECK(std::abs(m.mean - 0.8) < 4.0 * m.mean_se);
  CHECK(std::abs(m.variance - 0.8) < 4.0 * m.variance_se);
}

TEST_CASE("results are deterministic and independent of worker count", "[oracle]") {
  const Diagram d = beta_binomial();
  const std::size_t n = 3 * kOracleBlockSize + 123;
  const McEstimate a = mc_posterior(d, n, 9, 1);
  const McEstimate b = mc_posterior(d, n, 9, 4);
  const McEstimate c = mc_posterior(d, n, 9, 1);
  CHECK(a.estimates.at("p").mean == b.estimates.at("p").mean);
  CHECK(a.estimates.at("p").variance == b.estimates.at("p").variance);
  CHECK(a.effective_sample_size == b.effective_sample_size);
  CHECK(a.estimates.at("p").mean_se == c.estimates.at("p").mean_se);
  const McEstimate other = mc_posterior(d, n, 10, 1);
  CHECK(other.estimates.at("p").mean != a.estimates.at("p").mean);
}

TEST_CASE("sharp likelihoods with few draws raise the degeneracy warning", "[oracle]") {
  const Diagram d({Node::basic("m", PriorSpec::normal(0, 1)), Node::observation("e", "m", known(1000, 3.0, 1.0))});
  const McEstimate e = mc_posterior(d, 500, 3);
  CHECK(e.effective_sample_size < kMinEffectiveSampleSize);
  REQUIRE(e.warning);
  CHECK_THAT(*e.warning, ContainsSubstring("effective sample size"));
}

TEST_CASE("unevaluable draws get zero weight", "[oracle]") {
  const Diagram d({Node::basic("a", PriorSpec::normal(-10, 1)),
                   Node::deterministic("c", Transform::scaled(), parse_expression("ln(a)")),
                   Node::observation("e", "a", known(1, -10.0, 1.0))});
  const McEstimate e = mc_posterior(d, 1000, 3);
  CHECK(e.zero_weight == 1000);
  REQUIRE(e.warning);
  CHECK(std::isnan(e.estimates.at("a").mean));
}

TEST_CASE("oracle input checks", "[oracle]") {
  CHECK_THROWS_AS(mc_posterior(beta_binomial(), 0, 1), DomainError);
  const Diagram bad({Node::basic("a", PriorSpec::normal(0, 1)), Node::observation("e", "a", binom(5, 2))});
  CHECK_THROWS_AS(mc_posterior(bad, 10, 1), StructureError);
}
