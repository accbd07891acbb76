#pragma once

// JSON model documents. See docs/model_schema.md for the format.

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "lininf/error.hpp"
#include "lininf/evidence.hpp"
#include "lininf/expression.hpp"
#include "lininf/model.hpp"
#include "lininf/solver.hpp"
#include "lininf/transforms.hpp"

namespace lininf {

inline constexpr std::string_view kSchemaVersion = "1.0";

struct ModelDocument {
  std::string schema_version{kSchemaVersion};
  Diagram diagram;
  SolverConfig solver;
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void schema_fail(const std::string& path, const std::string& what) {
  throw SchemaError(path + ": " + what);
}

inline void only_fields(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) schema_fail(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) schema_fail(path + "." + key, "unknown field");
  }
}

inline const json& field(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(path + "." + key, "required field missing");
  return *it;
}

inline double number_at(const json& v, const std::string& path) {
  if (!v.is_number()) schema_fail(path, "expected a number");
  return v.get<double>();
}

inline double number(const json& obj, const std::string& path, const char* key) {
  return number_at(field(obj, path, key), path + "." + key);
}

inline long integer(const json& obj, const std::string& path, const char* key) {
  const json& v = field(obj, path, key);
  if (!v.is_number_integer()) schema_fail(path + "." + key, "expected an integer");
  return v.get<long>();
}

inline std::string text(const json& obj, const std::string& path, const char* key) {
  const json& v = field(obj, path, key);
  if (!v.is_string()) schema_fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline Transform parse_transform(const json& j, const std::string& path) {
  only_fields(j, path, {"kind", "a", "b"});
  const std::string kind = text(j, path, "kind");
  auto k = transform_kind_from(kind);
  if (!k) schema_fail(path + ".kind", "unknown transform kind '" + kind + "'");
  try {
    return Transform(*k, number(j, path, "a"), number(j, path, "b"));
  } catch (const DomainError& e) {
    schema_fail(path, e.what());
  }
}

inline PriorSpec parse_prior(const json& j, const std::string& path, std::optional<Transform> t) {
  if (!j.is_object()) schema_fail(path, "expected an object");
  const std::string fam = text(j, path, "family");
  auto f = prior_family_from(fam);
  if (!f) schema_fail(path + ".family", "unknown prior family '" + fam + "'");
  const Transform tr = t.value_or(Transform(kind_for(*f), 0.0, 1.0));
  if (*f == PriorFamily::beta) {
    only_fields(j, path, {"family", "alpha", "beta"});
    return PriorSpec::beta(number(j, path, "alpha"), number(j, path, "beta"), tr);
  }
  only_fields(j, path, {"family", "mean", "variance"});
  PriorSpec p = PriorSpec::normal(number(j, path, "mean"), number(j, path, "variance"), tr);
  p.family = *f;
  return p;
}

inline std::vector<double> parse_samples(const json& j, const std::string& path) {
  const json& arr = field(j, path, "samples");
  if (!arr.is_array()) schema_fail(path + ".samples", "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(number_at(arr[i], path + ".samples[" + std::to_string(i) + "]"));
  }
  return out;
}

inline EvidenceSpec parse_evidence(const json& j, const std::string& path) {
  if (!j.is_object()) schema_fail(path, "expected an object");
  const std::string variant = text(j, path, "variant");
  EvidenceSpec e;
  bool samples = false;
  if (auto it = j.find("lognormal_samples"); it != j.end()) {
    if (!it->is_boolean()) schema_fail(path + ".lognormal_samples", "expected a boolean");
    samples = it->get<bool>();
  }
  e.lognormal_samples = samples;
  if (variant == "normal_known_var") {
    NormalKnownVar k;
    k.sigma2 = number(j, path, "sigma2");
    if (samples) {
      only_fields(j, path, {"variant", "lognormal_samples", "samples", "sigma2"});
      e.samples = parse_samples(j, path);
      k.n = static_cast<long>(e.samples.size());
    } else {
      only_fields(j, path, {"variant", "lognormal_samples", "n", "mean", "sigma2"});
      k.n = integer(j, path, "n");
      k.mean = number(j, path, "mean");
    }
    e.data = k;
  } else if (variant == "normal_unknown_var") {
    NormalUnknownVar u;
    if (samples) {
      only_fields(j, path, {"variant", "lognormal_samples", "samples"});
      e.samples = parse_samples(j, path);
      u.n = static_cast<long>(e.samples.size());
    } else {
      only_fields(j, path, {"variant", "lognormal_samples", "n", "mean", "s"});
      u.n = integer(j, path, "n");
      u.mean = number(j, path, "mean");
      u.s = number(j, path, "s");
    }
    e.data = u;
  } else if (variant == "binomial") {
    only_fields(j, path, {"variant", "lognormal_samples", "n", "s", "alpha", "beta"});
    Binomial b;
    b.n = integer(j, path, "n");
    b.s = integer(j, path, "s");
    if (j.contains("alpha")) b.alpha = number(j, path, "alpha");
    if (j.contains("beta")) b.beta = number(j, path, "beta");
    e.data = b;
  } else {
    schema_fail(path + ".variant", "unknown evidence variant '" + variant + "'");
  }
  return e;
}

inline std::vector<std::string> parse_id_list(const json& arr, const std::string& path) {
  if (!arr.is_array()) schema_fail(path, "expected an array of node ids");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) schema_fail(path + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

inline Node parse_node(const json& j, const std::string& path) {
  if (!j.is_object()) schema_fail(path, "expected an object");
  const std::string kind = text(j, path, "kind");
  Node n;
  n.id = text(j, path, "id");
  if (kind == "basic") {
    only_fields(j, path, {"id", "kind", "transform", "prior"});
    std::optional<Transform> t;
    if (j.contains("transform")) t = parse_transform(j["transform"], path + ".transform");
    n = Node::basic(n.id, parse_prior(field(j, path, "prior"), path + ".prior", t));
  } else if (kind == "deterministic") {
    only_fields(j, path, {"id", "kind", "transform", "expr", "parents"});
    const Transform t = parse_transform(field(j, path, "transform"), path + ".transform");
    Expression e;
    try {
      e = parse_expression(text(j, path, "expr"));
    } catch (const SchemaError& err) {
      schema_fail(path + ".expr", err.what());
    }
    n = Node::deterministic(n.id, t, e);
    if (j.contains("parents")) n.parents = parse_id_list(j["parents"], path + ".parents");
  } else if (kind == "evidence") {
    only_fields(j, path, {"id", "kind", "parent", "parents", "evidence"});
    if (j.contains("parent") == j.contains("parents")) {
      schema_fail(path, "evidence needs exactly one of 'parent' or 'parents'");
    }
    if (j.contains("parent")) {
      n.parents = {text(j, path, "parent")};
    } else {
      n.parents = parse_id_list(j["parents"], path + ".parents");
    }
    n.kind = NodeKind::evidence;
    n.evidence = parse_evidence(field(j, path, "evidence"), path + ".evidence");
  } else {
    schema_fail(path + ".kind", "unknown node kind '" + kind + "'");
  }
  return n;
}

inline SolverConfig parse_solver(const json& j, const std::string& path) {
  only_fields(j, path, {"epsilon", "divergence_window", "max_iterations", "pool_evidence"});
  SolverConfig cfg;
  if (j.contains("epsilon")) cfg.epsilon = number(j, path, "epsilon");
  if (j.contains("divergence_window")) cfg.divergence_window = static_cast<int>(integer(j, path, "divergence_window"));
  if (j.contains("max_iterations")) cfg.max_iterations = static_cast<int>(integer(j, path, "max_iterations"));
  if (j.contains("pool_evidence")) {
    if (!j["pool_evidence"].is_boolean()) schema_fail(path + ".pool_evidence", "expected a boolean");
    cfg.pool_evidence = j["pool_evidence"].get<bool>();
  }
  try {
    cfg.check();
  } catch (const DomainError& e) {
    schema_fail(path, e.what());
  }
  return cfg;
}

}  // namespace detail

/// Parses and validates a model document. Every failure is a SchemaError
/// whose message starts with a JSON path ("$.nodes[1].prior.alpha: ...").
inline ModelDocument parse_model(std::string_view text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("$: JSON syntax error: ") + e.what());
  }
  const std::string path = "$";
  detail::only_fields(root, path, {"schema_version", "solver", "nodes"});
  ModelDocument doc;
  doc.schema_version = detail::text(root, path, "schema_version");
  if (doc.schema_version != kSchemaVersion) {
    detail::schema_fail("$.schema_version", "unsupported version '" + doc.schema_version + "'");
  }
  if (root.contains("solver")) doc.solver = detail::parse_solver(root["solver"], "$.solver");

  const json& nodes = detail::field(root, path, "nodes");
  if (!nodes.is_array()) detail::schema_fail("$.nodes", "expected an array");
  std::vector<Node> parsed;
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string np = "$.nodes[" + std::to_string(i) + "]";
    parsed.push_back(detail::parse_node(nodes[i], np));
    if (!where.emplace(parsed.back().id, i).second) {
      detail::schema_fail(np + ".id", "duplicate node id '" + parsed.back().id + "'");
    }
  }
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    for (const auto& p : parsed[i].parents) {
      if (!where.count(p)) {
        const char* key = parsed[i].kind == NodeKind::evidence ? "parent" : "expr";
        detail::schema_fail("$.nodes[" + std::to_string(i) + "]." + key, "unknown node id '" + p + "'");
      }
    }
  }
  doc.diagram = Diagram(std::move(parsed));
  const auto report = validate(doc.diagram);
  if (!report.empty()) {
    std::ostringstream os;
    for (const auto& v : report) {
      auto it = where.find(v.node);
      os << (it == where.end() ? std::string("$.nodes") : "$.nodes[" + std::to_string(it->second) + "]")
         << ": [" << v.rule << "] " << v.message << "\n";
    }
    std::string msg = os.str();
    msg.pop_back();
    throw SchemaError(msg);
  }
  return doc;
}

inline ModelDocument load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

inline nlohmann::json to_json(const Transform& t) {
  return {{"kind", std::string(to_string(t.kind()))}, {"a", t.a()}, {"b", t.b()}};
}

inline nlohmann::json to_json(const EvidenceSpec& e) {
  nlohmann::json j;
  if (const auto* k = std::get_if<NormalKnownVar>(&e.data)) {
    j["variant"] = "normal_known_var";
    j["sigma2"] = k->sigma2;
    if (!e.lognormal_samples) {
      j["n"] = k->n;
      j["mean"] = k->mean;
    }
  } else if (const auto* u = std::get_if<NormalUnknownVar>(&e.data)) {
    j["variant"] = "normal_unknown_var";
    if (!e.lognormal_samples) {
      j["n"] = u->n;
      j["mean"] = u->mean;
      j["s"] = u->s;
    }
  } else {
    const auto& b = std::get<Binomial>(e.data);
    j["variant"] = "binomial";
    j["n"] = b.n;
    j["s"] = b.s;
    if (b.alpha) j["alpha"] = *b.alpha;
    if (b.beta) j["beta"] = *b.beta;
  }
  if (e.lognormal_samples) {
    j["lognormal_samples"] = true;
    j["samples"] = e.samples;
  }
  return j;
}

inline nlohmann::json to_json(const ModelDocument& doc) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : doc.diagram.nodes()) {
    nlohmann::json j;
    j["id"] = n.id;
    j["kind"] = std::string(to_string(n.kind));
    switch (n.kind) {
      case NodeKind::basic: {
        j["transform"] = to_json(n.prior->transform);
        nlohmann::json p;
        p["family"] = std::string(to_string(n.prior->family));
        if (n.prior->family == PriorFamily::beta) {
          p["alpha"] = n.prior->shape.alpha;
          p["beta"] = n.prior->shape.beta;
        } else {
          p["mean"] = n.prior->mean_y;
          p["variance"] = n.prior->var_y;
        }
        j["prior"] = p;
        break;
      }
      case NodeKind::deterministic:
        j["transform"] = to_json(*n.transform);
        j["expr"] = to_string(*n.expr);
        j["parents"] = n.parents;
        break;
      case NodeKind::evidence:
        if (n.parents.size() == 1) {
          j["parent"] = n.parents.front();
        } else {
          j["parents"] = n.parents;
        }
        j["evidence"] = to_json(*n.evidence);
        break;
    }
    nodes.push_back(std::move(j));
  }
  return {{"schema_version", doc.schema_version},
          {"solver",
           {{"epsilon", doc.solver.epsilon},
            {"divergence_window", doc.solver.divergence_window},
            {"max_iterations", doc.solver.max_iterations},
            {"pool_evidence", doc.solver.pool_evidence}}},
          {"nodes", nodes}};
}

inline std::string serialize_model(const ModelDocument& doc, int indent = 2) {
  return to_json(doc).dump(indent);
}

}  // namespace lininf
