#include <algorithm>
#include <string>

#include "catch_amalgamated.hpp"
#include "lininf/model.hpp"

using namespace lininf;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace {

EvidenceSpec binom(long n, long s) { return {Binomial{n, s, std::nullopt, std::nullopt}, false, {}}; }
EvidenceSpec known(long n, double m, double s2) { return {NormalKnownVar{n, m, s2}, false, {}}; }

bool has_rule(const ValidationReport& r, const std::string& rule) {
  return std::any_of(r.begin(), r.end(), [&](const Violation& v) { return v.rule == rule; });
}

Diagram risk_difference() {
  return Diagram({Node::basic("p1", PriorSpec::beta(1, 1)), Node::basic("p2", PriorSpec::beta(1, 1)),
                  Node::deterministic("rd", Transform::scaled(-1, 1), parse_expression("p1 - p2")),
                  Node::observation("e1", "p1", binom(50, 30)), Node::observation("e2", "p2", binom(50, 20))});
}

}  // namespace

TEST_CASE("a valid diagram passes validation", "[model]") {
  const Diagram d = risk_difference();
  CHECK(validate(d).empty());
  CHECK(d.size() == 5);
  CHECK(d.at("rd").parents == std::vector<std::string>{"p1", "p2"});
  CHECK_THROWS_AS(d.at("zz"), StructureError);
}

TEST_CASE("topological order respects parents and declaration order", "[model]") {
  const Diagram d({Node::observation("e", "c", known(1, 0.5, 1)),
                   Node::deterministic("c", Transform::scaled(), parse_expression("a + b")),
                   Node::basic("b", PriorSpec::normal(0, 1)), Node::basic("a", PriorSpec::normal(0, 1))});
  CHECK(topological_order(d) == std::vector<std::string>{"b", "a", "c", "e"});
}

TEST_CASE("cycles and unknown parents are structural errors", "[model]") {
  Node x = Node::deterministic("x", Transform::scaled(), parse_expression("y + 1"));
  Node y = Node::deterministic("y", Transform::scaled(), parse_expression("x * 2"));
  const Diagram cyclic({x, y});
  CHECK_THROWS_WITH(topological_order(cyclic), ContainsSubstring("cycle"));
  CHECK(has_rule(validate(cyclic), "acyclic"));

  const Diagram dangling({Node::observation("e", "ghost", known(1, 0, 1))});
  CHECK_THROWS_WITH(topological_order(dangling), ContainsSubstring("ghost"));
  CHECK(has_rule(validate(dangling), "unknown-parent"));
}

TEST_CASE("validation rules", "[model]") {
  SECTION("duplicate ids") {
    const Diagram d({Node::basic("a", PriorSpec::normal(0, 1)), Node::basic("a", PriorSpec::normal(0, 1))});
    CHECK(has_rule(validate(d), "unique-id"));
  }
  SECTION("prior and transform mismatch") {
    const Diagram d({Node::basic("a", PriorSpec::beta(1, 1, Transform::scaled()))});
    CHECK(has_rule(validate(d), "prior"));
  }
  SECTION("binomial evidence needs a logistic parent") {
    const Diagram d({Node::basic("a", PriorSpec::normal(0, 1)), Node::observation("e", "a", binom(5, 2))});
    CHECK(has_rule(validate(d), "binomial-parent"));
  }
  SECTION("evidence may not observe evidence") {
    const Diagram d({Node::basic("a", PriorSpec::normal(0, 1)), Node::observation("e", "a", known(1, 0, 1)),
                     Node::observation("f", "e", known(1, 0, 1))});
    CHECK(has_rule(validate(d), "evidence-parent"));
  }
  SECTION("expressions may not read evidence") {
    const Diagram d({Node::basic("a", PriorSpec::normal(0, 1)), Node::observation("e", "a", known(1, 0, 1)),
                     Node::deterministic("c", Transform::scaled(), parse_expression("a + e"))});
    CHECK(has_rule(validate(d), "expr-reference"));
  }
  SECTION("invalid evidence payload") {
    const Diagram d({Node::basic("a", PriorSpec::normal(0, 1)),
                     Node::observation("e", "a", {NormalUnknownVar{3, 0.0, 1.0}, false, {}})});
    CHECK(has_rule(validate(d), "evidence-spec"));
  }
  SECTION("lognormal samples outside the support") {
    const Diagram d({Node::basic("a", PriorSpec::lognormal(1, 1)),
                     Node::observation("e", "a", {NormalKnownVar{0, 0.0, 1.0}, true, {1.0, -2.0}})});
    CHECK(has_rule(validate(d), "lognormal-samples"));
  }
  SECTION("parents must match the expression") {
    Node c = Node::deterministic("c", Transform::scaled(), parse_expression("a * 2"));
    c.parents.push_back("b");
    const Diagram d({Node::basic("a", PriorSpec::normal(0, 1)), Node::basic("b", PriorSpec::normal(0, 1)), c});
    CHECK(has_rule(validate(d), "deterministic-parents"));
  }
  SECTION("describe lists every violation") {
    const Diagram d({Node::basic("a", PriorSpec::normal(0, 0)), Node::observation("e", "a", binom(5, 2))});
    const std::string text = describe(validate(d));
    CHECK_THAT(text, ContainsSubstring("[prior]"));
    CHECK_THAT(text, ContainsSubstring("[binomial-parent]"));
  }
}

TEST_CASE("affine expressions of scaled parents are recognized", "[model]") {
  const Diagram d({Node::basic("a", PriorSpec::normal(1, 1, Transform::scaled(0, 2))),
                   Node::basic("b", PriorSpec::normal(1, 1, Transform::scaled(-1, 3))),
                   Node::deterministic("c", Transform::scaled(0, 4), parse_expression("3 * a - (b - 1) / 2 + 5"))});
  const auto m = recognize_linear(d.at("c"), d);
  REQUIRE(m);
  CHECK_THAT(m->at("a"), WithinRel(3.0 * 2.0 / 4.0, 1e-15));
  CHECK_THAT(m->at("b"), WithinRel(-0.5 * 4.0 / 4.0, 1e-15));
  CHECK(recognize_linear(d.at("a"), d) == std::nullopt);
}

TEST_CASE("nonlinear expressions are not recognized", "[model]") {
  const Diagram d({Node::basic("a", PriorSpec::normal(1, 1)), Node::basic("b", PriorSpec::normal(1, 1)),
                   Node::deterministic("c", Transform::scaled(), parse_expression("a * b"))});
  CHECK_FALSE(recognize_linear(d.at("c"), d));
}

TEST_CASE("power products of log-scaled parents are recognized", "[model]") {
  const Diagram d({Node::basic("a", PriorSpec::lognormal(2, 1)), Node::basic("b", PriorSpec::lognormal(3, 1)),
                   Node::deterministic("c", Transform::log_scaled(), parse_expression("2 * a^2 / b^0.5")),
                   Node::deterministic("s", Transform::log_scaled(), parse_expression("a + b"))});
  const auto m = recognize_linear(d.at("c"), d);
  REQUIRE(m);
  CHECK(m->at("a") == 2.0);
  CHECK(m->at("b") == -0.5);
  CHECK_FALSE(recognize_linear(d.at("s"), d));
}

TEST_CASE("odds products into a logistic node are recognized", "[model]") {
  const Diagram d(
      {Node::basic("p", PriorSpec::beta(2, 2)), Node::basic("q", PriorSpec::beta(3, 1)),
       Node::deterministic("r", Transform::logistic_scaled(),
                           parse_expression("(p / (1 - p)) * (q / (1 - q))^2 / (1 + (p / (1 - p)) * (q / (1 - q))^2)")),
       Node::deterministic("u", Transform::logistic_scaled(), parse_expression("p * q"))});
  const auto m = recognize_linear(d.at("r"), d);
  REQUIRE(m);
  CHECK(m->at("p") == 1.0);
  CHECK(m->at("q") == 2.0);
  CHECK_FALSE(recognize_linear(d.at("u"), d));
}
