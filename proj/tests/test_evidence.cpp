#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "lininf/evidence.hpp"

using namespace lininf;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("binomial pseudo-observation reference values", "[evidence]") {
  const auto a = binomial(10, 7, 1.0, 1.0);
  CHECK_THAT(a.d, WithinAbs(0.86975741504249519, 1e-9));
  CHECK_THAT(a.v, WithinAbs(0.47747552020226821, 1e-9));

  const auto b = binomial(2, 1, 1.0, 1.0);
  CHECK_THAT(b.d, WithinAbs(0.0, 1e-9));
  CHECK_THAT(b.v, WithinAbs(2.1217480348592381, 1e-9));

  const auto c = binomial(10, 5, 1.0, 1.0);
  CHECK_THAT(c.d, WithinAbs(0.0, 1e-9));
  CHECK_THAT(c.v, WithinAbs(0.40757316575325057, 1e-9));

  const auto d = binomial(50, 30, 1.0, 1.0);
  CHECK_THAT(d.d, WithinAbs(0.40734543603073699, 1e-9));
  CHECK_THAT(d.v, WithinAbs(0.083627880421636352, 1e-9));
}

TEST_CASE("binomial update reproduces the conjugate posterior in logit space", "[evidence]") {
  for (auto [n, s, a, b] : {std::tuple{10L, 7L, 1.0, 1.0}, {50L, 3L, 0.5, 2.0}, {4L, 4L, 3.0, 1.0}}) {
    const auto like = binomial(n, s, a, b);
    const auto [x1, v1] = beta_to_moments({a, b});
    const double v = 1.0 / (1.0 / v1 + 1.0 / like.v);
    const double x = v * (x1 / v1 + like.d / like.v);
    const auto [x2, v2] = beta_to_moments({a + s, b + n - s});
    CHECK_THAT(x, WithinAbs(x2, 1e-12));
    CHECK_THAT(v, WithinRel(v2, 1e-12));
  }
}

TEST_CASE("normal evidence", "[evidence]") {
  const auto k = normal_known_var(4, 1.5, 2.0);
  CHECK(k.d == 1.5);
  CHECK(k.v == 0.5);
  const auto u = normal_unknown_var(5, 1.5, 2.0);
  CHECK(u.v == 1.0);
  CHECK_THROWS_AS(normal_unknown_var(3, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(normal_known_var(0, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(normal_known_var(1, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(binomial(5, 6, 1.0, 1.0), DomainError);
}

TEST_CASE("pooling is the precision-weighted combination", "[evidence]") {
  const std::vector<LikelihoodApprox> items{{1.0, 1.0}, {3.0, 0.5}, {-1.0, 2.0}};
  const auto p = pool(items);
  const double prec = 1.0 + 2.0 + 0.5;
  CHECK_THAT(p.v, WithinRel(1.0 / prec, 1e-15));
  CHECK_THAT(p.d, WithinRel((1.0 + 6.0 - 0.5) / prec, 1e-15));
  CHECK_THROWS_AS(pool(std::vector<LikelihoodApprox>{}), DomainError);
}

TEST_CASE("lognormal sample adapter", "[evidence]") {
  const std::vector<double> ys{std::exp(1.0), std::exp(2.0), std::exp(3.0), std::exp(6.0)};
  const auto s = lognormal_sample_adapter(ys, Transform::log_scaled());
  CHECK(s.n == 4);
  CHECK_THAT(s.mean, WithinAbs(3.0, 1e-14));
  CHECK_THAT(s.variance, WithinAbs(3.5, 1e-13));
  CHECK_THROWS_AS(lognormal_sample_adapter(ys, Transform::scaled()), DomainError);
  CHECK_THROWS_AS(lognormal_sample_adapter(std::vector<double>{1.0, -1.0}, Transform::log_scaled()), DomainError);

  EvidenceSpec e;
  e.data = NormalUnknownVar{};
  e.lognormal_samples = true;
  e.samples = ys;
  const auto like = approximate(e, Transform::log_scaled(), std::nullopt);
  CHECK_THAT(like.d, WithinAbs(3.0, 1e-14));
  CHECK_THAT(like.v, WithinAbs(3.5, 1e-13));
}

TEST_CASE("binomial shape defaults", "[evidence]") {
  Binomial b{10, 7, std::nullopt, std::nullopt};
  CHECK(binomial_shape(b, std::nullopt).alpha == 0.5);
  CHECK(binomial_shape(b, BetaParams{2.0, 3.0}).beta == 3.0);
  b.alpha = 4.0;
  CHECK(binomial_shape(b, BetaParams{2.0, 3.0}).alpha == 4.0);
  CHECK(binomial_shape(b, BetaParams{2.0, 3.0}).beta == 3.0);
}
