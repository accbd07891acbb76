#include <string>

#include "catch_amalgamated.hpp"
#include "lininf/model_io.hpp"

using namespace lininf;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::StartsWith;

namespace {

const std::string kModels = LININF_MODELS_DIR;

const char* kMinimal = R"js({
  "schema_version": "1.0",
  "nodes": [
    {"id": "p", "kind": "basic", "prior": {"family": "beta", "alpha": 1, "beta": 1}},
    {"id": "e", "kind": "evidence", "parent": "p", "evidence": {"variant": "binomial", "n": 10, "s": 7}}
  ]
})js";

std::string with_node(const std::string& node) {
  return R"js({"schema_version": "1.0", "nodes": [
    {"id": "p", "kind": "basic", "prior": {"family": "beta", "alpha": 1, "beta": 1}}, )js" +
         node + "]}";
}

void check_error(const std::string& text, const std::string& prefix) {
  try {
    parse_model(text);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK_THAT(e.what(), StartsWith(prefix));
  }
}

}  // namespace

TEST_CASE("minimal document", "[model_io]") {
  const ModelDocument doc = parse_model(kMinimal);
  CHECK(doc.diagram.size() == 2);
  CHECK(doc.diagram.at("p").transform == Transform::logistic_scaled());
  CHECK(doc.solver.epsilon == 1e-6);
  CHECK(doc.solver.divergence_window == 3);
  CHECK(doc.solver.max_iterations == 50);
  CHECK(doc.solver.pool_evidence);
}

TEST_CASE("golden models load", "[model_io]") {
  for (const char* name : {"beta_binomial", "risk_difference", "conjugate_normal", "flat_prior"}) {
    CAPTURE(name);
    const ModelDocument doc = load_model(kModels + "/" + name + ".json");
    CHECK(validate(doc.diagram).empty());
  }
  const auto rd = load_model(kModels + "/risk_difference.json");
  CHECK(rd.diagram.at("risk_difference").parents == std::vector<std::string>{"p_treat", "p_control"});
}

TEST_CASE("expressions compile from strings", "[model_io]") {
  const auto doc = parse_model(with_node(R"js(
    {"id": "q", "kind": "basic", "prior": {"family": "beta", "alpha": 2, "beta": 2}},
    {"id": "odds", "kind": "deterministic", "transform": {"kind": "log_scaled", "a": 0, "b": 1},
     "expr": "p * q / (1 - q)"})js"));
  const Expression& e = *doc.diagram.at("odds").expr;
  CHECK(e.op() == Op::divide);
  CHECK(e.lhs().op() == Op::multiply);
  CHECK(e.rhs().op() == Op::subtract);
}

TEST_CASE("schema violations are path-qualified", "[model_io]") {
  check_error("{", "$: JSON syntax error");
  check_error(R"js({"nodes": []})js", "$.schema_version");
  check_error(R"js({"schema_version": "2.0", "nodes": []})js", "$.schema_version");
  check_error(R"js({"schema_version": "1.0", "nodes": [], "extra": 1})js", "$.extra: unknown field");
  check_error(with_node(R"js({"id": "q", "kind": "basic", "prior": {"family": "beta", "alpha": "x", "beta": 1}})js"),
              "$.nodes[1].prior.alpha: expected a number");
  check_error(with_node(R"js({"id": "q", "kind": "basic", "prior": {"family": "beta", "alpha": 1, "beta": 1, "mu": 0}})js"),
              "$.nodes[1].prior.mu: unknown field");
  check_error(with_node(R"js({"id": "q", "kind": "basic", "prior": {"family": "gamma", "mean": 1, "variance": 1}})js"),
              "$.nodes[1].prior.family");
  check_error(with_node(R"js({"id": "q", "kind": "deterministic", "transform": {"kind": "scaled", "a": 0, "b": 1}, "expr": "p +"})js"),
              "$.nodes[1].expr");
  check_error(with_node(R"js({"id": "e", "kind": "evidence", "parent": "p", "evidence": {"variant": "binomial", "n": 1.5, "s": 1}})js"),
              "$.nodes[1].evidence.n: expected an integer");
  check_error(R"js({"schema_version": "1.0", "solver": {"epsilon": -1}, "nodes": []})js", "$.solver");
  check_error(with_node(R"js({"id": "p", "kind": "basic", "prior": {"family": "normal", "mean": 0, "variance": 1}})js"),
              "$.nodes[1].id: duplicate");
}

TEST_CASE("unknown parent ids are named", "[model_io]") {
  try {
    parse_model(with_node(R"js({"id": "e", "kind": "evidence", "parent": "ghost",
                              "evidence": {"variant": "binomial", "n": 5, "s": 1}})js"));
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK_THAT(e.what(), ContainsSubstring("ghost"));
    CHECK_THAT(e.what(), StartsWith("$.nodes[1].parent"));
  }
}

TEST_CASE("semantic validation failures are schema errors", "[model_io]") {
  try {
    parse_model(R"js({"schema_version": "1.0", "nodes": [
      {"id": "m", "kind": "basic", "prior": {"family": "normal", "mean": 0, "variance": 1}},
      {"id": "e", "kind": "evidence", "parent": "m", "evidence": {"variant": "binomial", "n": 5, "s": 1}}]})js");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK_THAT(e.what(), StartsWith("$.nodes[1]"));
    CHECK_THAT(e.what(), ContainsSubstring("binomial-parent"));
  }
}

TEST_CASE("serialize then parse reproduces the diagram", "[model_io]") {
  for (const char* name : {"beta_binomial", "risk_difference", "conjugate_normal", "flat_prior"}) {
    CAPTURE(name);
    const ModelDocument a = load_model(kModels + "/" + name + ".json");
    const ModelDocument b = parse_model(serialize_model(a));
    REQUIRE(a.diagram.size() == b.diagram.size());
    for (std::size_t i = 0; i < a.diagram.size(); ++i) {
      const Node& x = a.diagram[i];
      const Node& y = b.diagram[i];
      CHECK(x.id == y.id);
      CHECK(x.kind == y.kind);
      CHECK(x.parents == y.parents);
      CHECK(x.transform == y.transform);
      CHECK(x.prior == y.prior);
      CHECK(x.expr == y.expr);
      CHECK(x.evidence.has_value() == y.evidence.has_value());
      if (x.evidence) CHECK(to_json(*x.evidence) == to_json(*y.evidence));
    }
    CHECK(serialize_model(a) == serialize_model(b));
  }
}

TEST_CASE("lognormal samples round-trip", "[model_io]") {
  const auto doc = parse_model(R"js({"schema_version": "1.0", "nodes": [
    {"id": "r", "kind": "basic", "prior": {"family": "lognormal", "mean": 2, "variance": 1}},
    {"id": "e", "kind": "evidence", "parent": "r",
     "evidence": {"variant": "normal_unknown_var", "lognormal_samples": true, "samples": [1.5, 2.0, 2.5, 3.0]}}]})js");
  const auto& e = *doc.diagram.at("e").evidence;
  CHECK(e.lognormal_samples);
  CHECK(e.samples.size() == 4);
  CHECK(to_json(*parse_model(serialize_model(doc)).diagram.at("e").evidence) == to_json(e));
}
