#pragma once

// The influence diagram over original variables Y: typed nodes, structural
// validation, topological ordering, and symbolic recognition of
// deterministic nodes that are exactly linear in transformed space.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lininf/error.hpp"
#include "lininf/evidence.hpp"
#include "lininf/expression.hpp"
#include "lininf/transforms.hpp"

namespace lininf {

enum class NodeKind { basic, deterministic, evidence };

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::basic: return "basic";
    case NodeKind::deterministic: return "deterministic";
    case NodeKind::evidence: return "evidence";
  }
  return "?";
}

struct Node {
  std::string id;
  NodeKind kind = NodeKind::basic;
  std::optional<Transform> transform;   // basic, deterministic
  std::optional<PriorSpec> prior;       // basic
  std::optional<Expression> expr;       // deterministic
  std::optional<EvidenceSpec> evidence; // evidence
  std::vector<std::string> parents;

  static Node basic(std::string id, PriorSpec prior) {
    Node n;
    n.id = std::move(id);
    n.kind = NodeKind::basic;
    n.transform = prior.transform;
    n.prior = std::move(prior);
    return n;
  }

  /// Parents are the expression's variables in order of first appearance.
  static Node deterministic(std::string id, Transform t, Expression expr) {
    Node n;
    n.id = std::move(id);
    n.kind = NodeKind::deterministic;
    n.transform = t;
    n.parents = variables(expr);
    n.expr = std::move(expr);
    return n;
  }

  static Node observation(std::string id, std::string parent, EvidenceSpec spec) {
    Node n;
    n.id = std::move(id);
    n.kind = NodeKind::evidence;
    n.parents = {std::move(parent)};
    n.evidence = std::move(spec);
    return n;
  }

  bool is_parameter() const noexcept { return kind != NodeKind::evidence; }
};

/// Nodes in declaration order.
class Diagram {
 public:
  Diagram() = default;
  explicit Diagram(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].id, i);
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& operator[](std::size_t i) const { return nodes_[i]; }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const Node& at(std::string_view id) const {
    auto i = index_of(id);
    if (!i) throw StructureError("unknown node '" + std::string(id) + "'");
    return nodes_[*i];
  }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Ordering

namespace detail {

struct Ordering {
  std::vector<std::string> order;
  std::vector<std::string> cycle;
  std::string unknown_parent;  // "child -> parent" when a parent id is undeclared
};

inline Ordering order_nodes(const Diagram& d) {
  Ordering out;
  const std::size_t n = d.size();
  std::vector<std::vector<std::size_t>> parents(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& p : d[i].parents) {
      auto pi = d.index_of(p);
      if (!pi) {
        out.unknown_parent = d[i].id + " -> " + p;
        return out;
      }
      parents[i].push_back(*pi);
    }
  }
  std::vector<bool> placed(n, false);
  out.order.reserve(n);
  while (out.order.size() < n) {
    bool progressed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (placed[i]) continue;
      const bool ready = std::all_of(parents[i].begin(), parents[i].end(),
                                     [&](std::size_t p) { return placed[p]; });
      if (ready) {
        placed[i] = true;
        out.order.push_back(d[i].id);
        progressed = true;
        break;
      }
    }
    if (progressed) continue;

    // Every unplaced node has an unplaced parent; follow those links until
    // a node repeats.
    std::size_t cur = 0;
    while (placed[cur]) ++cur;
    std::vector<int> pos(n, -1);
    std::vector<std::size_t> path;
    while (pos[cur] < 0) {
      pos[cur] = static_cast<int>(path.size());
      path.push_back(cur);
      for (std::size_t p : parents[cur]) {
        if (!placed[p]) {
          cur = p;
          break;
        }
      }
    }
    for (std::size_t k = static_cast<std::size_t>(pos[cur]); k < path.size(); ++k) {
      out.cycle.push_back(d[path[k]].id);
    }
    std::reverse(out.cycle.begin(), out.cycle.end());
    out.order.clear();
    return out;
  }
  return out;
}

}  // namespace detail

/// Parents-first ordering; ties go to the earlier-declared node.
inline std::vector<std::string> topological_order(const Diagram& d) {
  auto res = detail::order_nodes(d);
  if (!res.unknown_parent.empty()) throw StructureError("unknown parent: " + res.unknown_parent);
  if (!res.cycle.empty()) {
    std::string msg = "cycle:";
    for (const auto& id : res.cycle) msg += " " + id;
    throw StructureError(msg);
  }
  return res.order;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string node;
  std::string rule;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

inline ValidationReport validate(const Diagram& d) {
  ValidationReport report;
  auto add = [&](const std::string& node, const char* rule, std::string msg) {
    report.push_back({node, rule, std::move(msg)});
  };

  std::set<std::string> seen;
  for (const auto& n : d.nodes()) {
    if (n.id.empty()) add(n.id, "id", "node id must be non-empty");
    if (!seen.insert(n.id).second) add(n.id, "unique-id", "duplicate node id");
  }

  for (const auto& n : d.nodes()) {
    for (const auto& p : n.parents) {
      if (!d.index_of(p)) add(n.id, "unknown-parent", "unknown parent '" + p + "'");
    }
    switch (n.kind) {
      case NodeKind::basic: {
        if (!n.parents.empty()) add(n.id, "basic-no-parents", "basic parameters have no parents");
        if (!n.prior) {
          add(n.id, "basic-prior", "basic parameter requires a prior");
        } else {
          if (auto v = n.prior->violation()) add(n.id, "prior", *v);
          if (!n.transform || !(*n.transform == n.prior->transform)) {
            add(n.id, "basic-transform", "node transform must match the prior's transform");
          }
        }
        break;
      }
      case NodeKind::deterministic: {
        if (!n.transform) add(n.id, "deterministic-transform", "deterministic parameter requires a transform");
        if (!n.expr) {
          add(n.id, "deterministic-expr", "deterministic parameter requires an expression");
          break;
        }
        const auto vars = variables(*n.expr);
        if (vars.empty()) add(n.id, "deterministic-parents", "expression references no parameters");
        const std::set<std::string> want(vars.begin(), vars.end());
        const std::set<std::string> have(n.parents.begin(), n.parents.end());
        if (want != have || have.size() != n.parents.size()) {
          add(n.id, "deterministic-parents", "parents must be exactly the expression's variables");
        }
        for (const auto& v : vars) {
          auto vi = d.index_of(v);
          if (vi && !d[*vi].is_parameter()) {
            add(n.id, "expr-reference", "expression references evidence node '" + v + "'");
          } else if (!vi && !have.count(v)) {
            add(n.id, "expr-reference", "expression references unknown node '" + v + "'");
          }
        }
        break;
      }
      case NodeKind::evidence: {
        if (n.parents.size() != 1) {
          add(n.id, "evidence-single-parent", "evidence must have exactly one parent");
        }
        if (!n.evidence) {
          add(n.id, "evidence-spec", "evidence node requires an evidence description");
          break;
        }
        if (auto v = n.evidence->violation()) add(n.id, "evidence-spec", *v);
        if (n.parents.size() == 1) {
          auto pi = d.index_of(n.parents.front());
          if (pi) {
            const Node& parent = d[*pi];
            if (!parent.is_parameter()) {
              add(n.id, "evidence-parent", "evidence parent must be a basic or deterministic parameter");
            } else if (parent.transform) {
              const auto kind = parent.transform->kind();
              if (n.evidence->is_binomial() && kind != TransformKind::logistic_scaled) {
                add(n.id, "binomial-parent", "binomial evidence requires a logistic_scaled parent");
              }
              if (n.evidence->lognormal_samples) {
                if (kind != TransformKind::log_scaled) {
                  add(n.id, "lognormal-samples", "lognormal samples require a log_scaled parent");
                } else {
                  for (std::size_t k = 0; k < n.evidence->samples.size(); ++k) {
                    if (!parent.transform->in_support(n.evidence->samples[k])) {
                      add(n.id, "lognormal-samples",
                          "sample " + std::to_string(k) + " outside the parent's support");
                    }
                  }
                }
              }
            }
          }
        }
        break;
      }
    }
  }

  const auto ordering = detail::order_nodes(d);
  if (!ordering.cycle.empty()) {
    std::string msg = "graph contains a cycle:";
    for (const auto& id : ordering.cycle) msg += " " + id;
    add(ordering.cycle.front(), "acyclic", msg);
  }
  return report;
}

inline std::string describe(const ValidationReport& report) {
  std::ostringstream os;
  for (const auto& v : report) os << v.node << ": [" << v.rule << "] " << v.message << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Symbolic linearity

using CoefficientMap = std::map<std::string, double>;

namespace detail {

struct AffineForm {
  double offset = 0.0;
  CoefficientMap coeffs;
  bool constant() const { return coeffs.empty(); }
};

inline std::optional<AffineForm> affine_form(const Expression& e) {
  auto scale = [](AffineForm f, double k) {
    f.offset *= k;
    for (auto& [_, c] : f.coeffs) c *= k;
    return f;
  };
  auto combine = [](AffineForm l, const AffineForm& r, double sign) {
    l.offset += sign * r.offset;
    for (const auto& [n, c] : r.coeffs) l.coeffs[n] += sign * c;
    return l;
  };
  switch (e.op()) {
    case Op::constant: return AffineForm{e.value(), {}};
    case Op::variable: return AffineForm{0.0, {{e.name(), 1.0}}};
    case Op::negate: {
      auto a = affine_form(e.lhs());
      if (!a) return std::nullopt;
      return scale(*a, -1.0);
    }
    case Op::add:
    case Op::subtract: {
      auto l = affine_form(e.lhs());
      auto r = affine_form(e.rhs());
      if (!l || !r) return std::nullopt;
      return combine(*l, *r, e.op() == Op::add ? 1.0 : -1.0);
    }
    case Op::multiply: {
      auto l = affine_form(e.lhs());
      auto r = affine_form(e.rhs());
      if (!l || !r) return std::nullopt;
      if (l->constant()) return scale(*r, l->offset);
      if (r->constant()) return scale(*l, r->offset);
      return std::nullopt;
    }
    case Op::divide: {
      auto l = affine_form(e.lhs());
      auto r = affine_form(e.rhs());
      if (!l || !r || !r->constant() || r->offset == 0.0) return std::nullopt;
      return scale(*l, 1.0 / r->offset);
    }
    case Op::power: {
      auto b = affine_form(e.lhs());
      if (!b) return std::nullopt;
      if (e.value() == 1.0) return b;
      if (b->constant() && (b->offset > 0.0 || e.value() == std::floor(e.value()))) {
        return AffineForm{std::pow(b->offset, e.value()), {}};
      }
      return std::nullopt;
    }
    case Op::exp:
    case Op::ln: {
      auto a = affine_form(e.lhs());
      if (!a || !a->constant()) return std::nullopt;
      if (e.op() == Op::ln && !(a->offset > 0.0)) return std::nullopt;
      return AffineForm{e.op() == Op::exp ? std::exp(a->offset) : std::log(a->offset), {}};
    }
  }
  return std::nullopt;
}

// factor * prod atom_i ^ exponent_i, where atoms are recognized by `atom_of`.
struct MonomialForm {
  double factor = 1.0;
  CoefficientMap exponents;
};

template <class AtomOf>
std::optional<MonomialForm> monomial_form(const Expression& e, const AtomOf& atom_of) {
  if (auto name = atom_of(e)) return MonomialForm{1.0, {{*name, 1.0}}};
  switch (e.op()) {
    case Op::constant: return MonomialForm{e.value(), {}};
    case Op::negate: {
      auto m = monomial_form(e.lhs(), atom_of);
      if (!m) return std::nullopt;
      m->factor = -m->factor;
      return m;
    }
    case Op::multiply:
    case Op::divide: {
      auto l = monomial_form(e.lhs(), atom_of);
      auto r = monomial_form(e.rhs(), atom_of);
      if (!l || !r) return std::nullopt;
      const double sign = e.op() == Op::multiply ? 1.0 : -1.0;
      if (e.op() == Op::divide && r->factor == 0.0) return std::nullopt;
      l->factor = e.op() == Op::multiply ? l->factor * r->factor : l->factor / r->factor;
      for (const auto& [n, k] : r->exponents) l->exponents[n] += sign * k;
      return l;
    }
    case Op::power: {
      auto b = monomial_form(e.lhs(), atom_of);
      if (!b || !(b->factor > 0.0)) return std::nullopt;
      b->factor = std::pow(b->factor, e.value());
      for (auto& [_, k] : b->exponents) k *= e.value();
      return b;
    }
    case Op::add:
    case Op::subtract:
    case Op::exp:
    case Op::ln: {
      auto a = affine_form(e);
      if (a && a->constant()) return MonomialForm{a->offset, {}};
      return std::nullopt;
    }
    default: return std::nullopt;
  }
}

// Matches (y - a) / (b - y), or y / (1 - y) style odds of a logistic parent.
inline std::optional<std::string> odds_atom(const Expression& e, const Diagram& d) {
  if (e.op() != Op::divide) return std::nullopt;
  const Expression num = e.lhs();
  const Expression den = e.rhs();
  if (den.op() != Op::subtract || !den.lhs().is_constant() || den.rhs().op() != Op::variable) {
    return std::nullopt;
  }
  const std::string& name = den.rhs().name();
  auto idx = d.index_of(name);
  if (!idx || !d[*idx].transform) return std::nullopt;
  const Transform& t = *d[*idx].transform;
  if (t.kind() != TransformKind::logistic_scaled || den.lhs().value() != t.b()) return std::nullopt;
  if (num.op() == Op::variable && num.name() == name && t.a() == 0.0) return name;
  if (num.op() == Op::subtract && num.lhs().op() == Op::variable && num.lhs().name() == name &&
      num.rhs().is_constant(t.a())) {
    return name;
  }
  return std::nullopt;
}

inline bool all_parents(const Node& n, const Diagram& d, TransformKind kind, bool zero_origin) {
  for (const auto& p : n.parents) {
    auto pi = d.index_of(p);
    if (!pi || !d[*pi].transform || d[*pi].transform->kind() != kind) return false;
    if (zero_origin && !(d[*pi].transform->a() == 0.0 && d[*pi].transform->b() > 0.0)) return false;
  }
  return true;
}

inline CoefficientMap complete(const Node& n, const CoefficientMap& found) {
  CoefficientMap out;
  for (const auto& p : n.parents) {
    auto it = found.find(p);
    out[p] = it == found.end() ? 0.0 : it->second;
  }
  return out;
}

}  // namespace detail

/// Constant X-space regression coefficients of a deterministic node, when
/// its relationship to its parents is exactly linear after transformation:
/// affine functions of scaled parents into a scaled node, power products of
/// log-scaled parents (a = 0) into a log-scaled node (a = 0), and odds
/// products of logistic parents into a logistic node on (0, 1) written as
/// Q / (1 + Q).
inline std::optional<CoefficientMap> recognize_linear(const Node& n, const Diagram& d) {
  if (n.kind != NodeKind::deterministic || !n.expr || !n.transform) return std::nullopt;
  const Transform& t = *n.transform;
  const Expression& e = *n.expr;

  switch (t.kind()) {
    case TransformKind::scaled: {
      if (!detail::all_parents(n, d, TransformKind::scaled, false)) return std::nullopt;
      auto form = detail::affine_form(e);
      if (!form) return std::nullopt;
      CoefficientMap out;
      for (const auto& p : n.parents) {
        const Transform& pt = *d.at(p).transform;
        auto it = form->coeffs.find(p);
        const double c = it == form->coeffs.end() ? 0.0 : it->second;
        out[p] = c * (pt.b() - pt.a()) / (t.b() - t.a());
      }
      return out;
    }
    case TransformKind::log_scaled: {
      if (!(t.a() == 0.0 && t.b() > 0.0)) return std::nullopt;
      if (!detail::all_parents(n, d, TransformKind::log_scaled, true)) return std::nullopt;
      auto atom = [](const Expression& x) -> std::optional<std::string> {
        if (x.op() == Op::variable) return x.name();
        return std::nullopt;
      };
      auto form = detail::monomial_form(e, atom);
      if (!form || !(form->factor > 0.0)) return std::nullopt;
      return detail::complete(n, form->exponents);
    }
    case TransformKind::logistic_scaled: {
      if (!(t.a() == 0.0 && t.b() == 1.0)) return std::nullopt;
      if (!detail::all_parents(n, d, TransformKind::logistic_scaled, false)) return std::nullopt;
      if (e.op() != Op::divide || e.rhs().op() != Op::add) return std::nullopt;
      const Expression q = e.lhs();
      const Expression den = e.rhs();
      const bool shape = (den.lhs().is_constant(1.0) && den.rhs() == q) ||
                         (den.rhs().is_constant(1.0) && den.lhs() == q);
      if (!shape) return std::nullopt;
      auto atom = [&](const Expression& x) { return detail::odds_atom(x, d); };
      auto form = detail::monomial_form(q, atom);
      if (!form || !(form->factor > 0.0)) return std::nullopt;
      // Every parent must enter through its odds.
      for (const auto& v : variables(q)) {
        if (!form->exponents.count(v)) return std::nullopt;
      }
      return detail::complete(n, form->exponents);
    }
  }
  return std::nullopt;
}

}  // namespace lininf
