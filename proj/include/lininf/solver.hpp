#pragma once

// Iterative linear approximation: every parameter is mapped to a Gaussian
// surrogate X = T(Y), the deterministic relationships are linearized at the
// previous posterior point, the resulting Gaussian model is conditioned on
// the evidence, and the posterior is mapped back to the original families.
// The loop repeats until the posterior X means stop moving.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "lininf/error.hpp"
#include "lininf/evidence.hpp"
#include "lininf/expression.hpp"
#include "lininf/gaussian.hpp"
#include "lininf/model.hpp"
#include "lininf/transforms.hpp"

namespace lininf {

struct SolverConfig {
  double epsilon = 1e-6;
  /// Divergence is declared after this many consecutive increases of r_max.
  int divergence_window = 3;
  int max_iterations = 50;
  bool pool_evidence = true;

  void check() const {
    if (!(epsilon > 0.0)) throw DomainError("solver: epsilon must be positive");
    if (divergence_window < 1) throw DomainError("solver: divergence window must be >= 1");
    if (max_iterations < 1) throw DomainError("solver: max_iterations must be >= 1");
  }
};

enum class SolveStatus { converged, diverged, max_iterations };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::max_iterations: return "max_iterations";
  }
  return "?";
}

/// Vectors are indexed like SolverResult::parameters.
struct IterationRecord {
  int t = 0;
  Eigen::VectorXd prior_mean_x;
  Eigen::VectorXd posterior_mean_x;
  Eigen::VectorXd posterior_var_x;
  Eigen::VectorXd r;
  double r_max = 0.0;
};

struct SolverResult {
  SolveStatus status = SolveStatus::max_iterations;
  std::vector<IterationRecord> iterations;
  /// Parameter ids in solve order.
  std::vector<std::string> parameters;
  std::map<std::string, MomentPair> posterior_y;
  Eigen::MatrixXd posterior_correlations;
  Eigen::MatrixXd posterior_cov_x;
  /// 1-based iteration whose posterior is reported: the last one, or the
  /// one with the smallest r_max after divergence.
  int reported_iteration = 0;
};

/// Failure inside a solve. Carries the iterations completed so far.
class SolveError : public Error {
 public:
  SolveError(const std::string& what, std::string node, std::vector<IterationRecord> trace)
      : Error(what), node_(std::move(node)), trace_(std::move(trace)) {}

  const std::string& node() const noexcept { return node_; }
  const std::vector<IterationRecord>& trace() const noexcept { return trace_; }

 private:
  std::string node_;
  std::vector<IterationRecord> trace_;
};

/// Relative change with the exact-equality branch first.
inline double relative_change(double now, double before) {
  if (now == before) return 0.0;
  return std::abs(now - before) / std::max(std::abs(now), std::abs(before));
}

/// True when the last window + 1 values are strictly increasing.
inline bool is_diverging(const std::vector<double>& r_max, int window) {
  const std::size_t need = static_cast<std::size_t>(window) + 1;
  if (r_max.size() < need) return false;
  for (std::size_t k = r_max.size() - need + 1; k < r_max.size(); ++k) {
    if (!(r_max[k] > r_max[k - 1])) return false;
  }
  return true;
}

/// X-space regression coefficients of a deterministic node on its parents
/// by the chain rule, evaluated at the original-space point `y`:
/// B_ij = T_j'(f_j(y)) * df_j/dy_i(y) / T_i'(y_i).
inline CoefficientMap linear_coefficients(const Diagram& d, const Node& n, const Environment& y) {
  if (n.kind != NodeKind::deterministic) throw DomainError("linear_coefficients: node is not deterministic");
  const double f = eval_expr(*n.expr, y);
  const double dt = n.transform->derivative(f);
  CoefficientMap out;
  for (const auto& p : n.parents) {
    const double df = eval_expr(diff_expr(*n.expr, p), y);
    out[p] = dt * df / d.at(p).transform->derivative(y.at(p));
  }
  return out;
}

/// Iteration state for one diagram. Construction performs initialization.
class LinearApproximation {
 public:
  /// One Gaussian observation slot: a pooled group, or a single evidence node.
  struct EvidenceSlot {
    std::size_t parent;  // parameter position
    LikelihoodApprox likelihood;
    std::vector<std::string> sources;
  };

  LinearApproximation(Diagram d, SolverConfig cfg = {}) : diagram_(std::move(d)), cfg_(cfg) {
    cfg_.check();
    const auto report = validate(diagram_);
    if (!report.empty()) throw StructureError("invalid diagram:\n" + describe(report));
    build_layout();
    initialize();
  }

  // Parameters point into the owned diagram.
  LinearApproximation(const LinearApproximation&) = delete;
  LinearApproximation& operator=(const LinearApproximation&) = delete;

  const Diagram& diagram() const noexcept { return diagram_; }
  const SolverConfig& config() const noexcept { return cfg_; }
  const std::vector<std::string>& parameters() const noexcept { return param_ids_; }
  const std::vector<EvidenceSlot>& slots() const noexcept { return slots_; }
  std::size_t dimension() const noexcept { return params_.size() + slots_.size(); }

  std::size_t position(std::string_view id) const {
    for (std::size_t k = 0; k < param_ids_.size(); ++k) {
      if (param_ids_[k] == id) return k;
    }
    throw StructureError("unknown parameter '" + std::string(id) + "'");
  }

  /// E^0 X and the conditional variances of basic parameters.
  const Eigen::VectorXd& prior_mean_x() const noexcept { return prior_x_; }
  const Eigen::VectorXd& prior_var_x() const noexcept { return prior_v_; }
  /// Current linearization point E^{t-1}[X|D] and E^{t-1}[Y|D].
  const Eigen::VectorXd& point_x() const noexcept { return point_x_; }
  const std::vector<double>& point_y() const noexcept { return point_y_; }
  int iteration() const noexcept { return static_cast<int>(trace_.size()); }
  const std::vector<IterationRecord>& trace() const noexcept { return trace_; }

  /// Recognized constant coefficients, keyed by parameter position.
  const std::map<std::size_t, CoefficientMap>& fixed_coefficients() const noexcept { return fixed_; }

  /// B at the current linearization point, over parameters then slots.
  Eigen::MatrixXd linearize() const {
    const std::size_t n = dimension();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j < params_.size(); ++j) {
      const Param& p = params_[j];
      if (p.node->kind != NodeKind::deterministic) continue;
      if (auto it = fixed_.find(j); it != fixed_.end()) {
        for (std::size_t k = 0; k < p.parents.size(); ++k) {
          B(p.parents[k], j) = it->second.at(p.node->parents[k]);
        }
        continue;
      }
      const double f = eval_at(j);
      const double dt = guarded([&] { return p.node->transform->derivative(f); }, j);
      for (std::size_t k = 0; k < p.parents.size(); ++k) {
        const std::size_t i = p.parents[k];
        const double df = guarded([&] { return p.partials[k](point_y_); }, j);
        const double di = guarded([&] { return params_[i].node->transform->derivative(point_y_[i]); }, i);
        B(i, j) = dt * df / di;
      }
    }
    for (std::size_t s = 0; s < slots_.size(); ++s) B(slots_[s].parent, params_.size() + s) = 1.0;
    return B;
  }

  /// First-order prior means E^t X for the current point and coefficients.
  Eigen::VectorXd update_means(const Eigen::MatrixXd& B) const {
    const std::size_t np = params_.size();
    Eigen::VectorXd mean(dimension());
    for (std::size_t j = 0; j < np; ++j) {
      const Param& p = params_[j];
      if (p.node->kind == NodeKind::basic) {
        mean(j) = prior_x_(j);
        continue;
      }
      const double f = eval_at(j);
      double m = guarded([&] { return p.node->transform->forward(f); }, j);
      for (std::size_t i : p.parents) m += B(i, j) * (mean(i) - point_x_(i));
      mean(j) = m;
    }
    for (std::size_t s = 0; s < slots_.size(); ++s) mean(np + s) = mean(slots_[s].parent);
    return mean;
  }

  /// One full relinearize / propagate / condition / map-back cycle.
  IterationRecord step() {
    const std::size_t np = params_.size();
    const Eigen::MatrixXd B = linearize();

    GaussianState st;
    st.mean = update_means(B);
    st.coeffs = B;
    st.cond_var = Eigen::VectorXd::Zero(dimension());
    for (std::size_t j = 0; j < np; ++j) {
      if (params_[j].node->kind == NodeKind::basic) st.cond_var(j) = prior_v_(j);
    }
    Observations obs;
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      st.cond_var(np + s) = slots_[s].likelihood.v;
      obs[static_cast<Eigen::Index>(np + s)] = slots_[s].likelihood.d;
    }
    st = propagate_covariance(std::move(st));

    ConditionedGaussian post;
    try {
      post = condition(st, obs);
    } catch (const NumericalError& e) {
      throw SolveError(e.what(), "", trace_);
    }

    Snapshot snap;
    snap.cov_x = post.cov;
    snap.y.resize(np);
    for (std::size_t j = 0; j < np; ++j) {
      const MomentPair mx{post.mean(j), std::max(0.0, post.cov(j, j))};
      snap.y[j] = guarded([&] { return inverse_moments(*params_[j].node->transform, mx); }, j);
    }

    IterationRecord rec;
    rec.t = iteration() + 1;
    rec.prior_mean_x = st.mean.head(np);
    rec.posterior_mean_x = post.mean.head(np);
    rec.posterior_var_x = post.cov.diagonal().head(np);
    rec.r.resize(np);
    for (std::size_t j = 0; j < np; ++j) rec.r(j) = relative_change(post.mean(j), point_x_(j));
    rec.r_max = np ? rec.r.maxCoeff() : 0.0;

    point_x_ = rec.posterior_mean_x;
    for (std::size_t j = 0; j < np; ++j) point_y_[j] = snap.y[j].mean;
    trace_.push_back(rec);
    snapshots_.push_back(std::move(snap));
    return rec;
  }

  SolverResult run() {
    SolverResult res;
    res.parameters = param_ids_;
    std::vector<double> history;
    while (iteration() < cfg_.max_iterations) {
      const auto rec = step();
      history.push_back(rec.r_max);
      if (rec.r_max < cfg_.epsilon) {
        res.status = SolveStatus::converged;
        break;
      }
      if (is_diverging(history, cfg_.divergence_window)) {
        res.status = SolveStatus::diverged;
        break;
      }
      res.status = SolveStatus::max_iterations;
    }
    res.iterations = trace_;

    std::size_t pick = trace_.size() - 1;
    if (res.status == SolveStatus::diverged) {
      pick = static_cast<std::size_t>(std::min_element(history.begin(), history.end()) - history.begin());
    }
    res.reported_iteration = static_cast<int>(pick) + 1;
    const Snapshot& snap = snapshots_[pick];
    for (std::size_t j = 0; j < params_.size(); ++j) res.posterior_y[param_ids_[j]] = snap.y[j];
    res.posterior_cov_x = snap.cov_x.topLeftCorner(params_.size(), params_.size());
    res.posterior_correlations = correlation_matrix(res.posterior_cov_x);
    return res;
  }

 private:
  struct Param {
    const Node* node;
    std::vector<std::size_t> parents;  // positions, aligned with node->parents
    CompiledExpression f;
    std::vector<CompiledExpression> partials;
  };

  struct Snapshot {
    std::vector<MomentPair> y;
    Eigen::MatrixXd cov_x;
  };

  template <class Fn>
  std::invoke_result_t<Fn> guarded(Fn&& fn, std::size_t j) const {
    try {
      return fn();
    } catch (const SolveError&) {
      throw;
    } catch (const Error& e) {
      throw SolveError("iteration " + std::to_string(iteration() + 1) + ", node '" + param_ids_[j] +
                           "': " + e.what(),
                       param_ids_[j], trace_);
    }
  }

  double eval_at(std::size_t j) const {
    return guarded([&] { return params_[j].f(point_y_); }, j);
  }

  void build_layout() {
    std::unordered_map<std::string, std::size_t> pos;
    for (const auto& id : topological_order(diagram_)) {
      const Node& n = diagram_.at(id);
      if (!n.is_parameter()) continue;
      pos[id] = params_.size();
      params_.push_back({&n, {}, {}, {}});
      param_ids_.push_back(id);
    }
    auto slot_of = [&](const std::string& name) { return pos.at(name); };
    for (std::size_t j = 0; j < params_.size(); ++j) {
      Param& p = params_[j];
      if (p.node->kind != NodeKind::deterministic) continue;
      for (const auto& parent : p.node->parents) {
        p.parents.push_back(pos.at(parent));
        p.partials.emplace_back(diff_expr(*p.node->expr, parent), slot_of);
      }
      p.f = CompiledExpression(*p.node->expr, slot_of);
      if (auto c = recognize_linear(*p.node, diagram_)) fixed_[j] = *c;
    }

    std::map<std::size_t, std::size_t> pooled;  // parent -> slot
    std::vector<std::vector<LikelihoodApprox>> parts;
    for (const auto& id : topological_order(diagram_)) {
      const Node& n = diagram_.at(id);
      if (n.is_parameter()) continue;
      const std::size_t parent = pos.at(n.parents.front());
      const Node& pn = *params_[parent].node;
      std::optional<BetaParams> beta_prior;
      if (pn.kind == NodeKind::basic && pn.prior->family == PriorFamily::beta) beta_prior = pn.prior->shape;
      LikelihoodApprox lik;
      try {
        lik = approximate(*n.evidence, *pn.transform, beta_prior);
      } catch (const Error& e) {
        throw SolveError("evidence '" + n.id + "': " + e.what(), n.id, {});
      }
      if (cfg_.pool_evidence) {
        auto [it, fresh] = pooled.emplace(parent, slots_.size());
        if (fresh) {
          slots_.push_back({parent, lik, {n.id}});
          parts.push_back({lik});
        } else {
          slots_[it->second].sources.push_back(n.id);
          parts[it->second].push_back(lik);
        }
      } else {
        slots_.push_back({parent, lik, {n.id}});
        parts.push_back({lik});
      }
    }
    for (std::size_t s = 0; s < slots_.size(); ++s) slots_[s].likelihood = pool(parts[s]);
  }

  void initialize() {
    const std::size_t np = params_.size();
    prior_x_ = Eigen::VectorXd::Zero(np);
    prior_v_ = Eigen::VectorXd::Zero(np);
    point_y_.assign(np, 0.0);
    for (std::size_t j = 0; j < np; ++j) {
      const Param& p = params_[j];
      try {
        if (p.node->kind == NodeKind::basic) {
          const MomentPair m = forward_moments(*p.node->prior);
          prior_x_(j) = m.mean;
          prior_v_(j) = m.variance;
          point_y_[j] = p.node->prior->mean();
        } else {
          point_y_[j] = p.f(point_y_);
          prior_x_(j) = p.node->transform->forward(point_y_[j]);
        }
      } catch (const Error& e) {
        throw SolveError("initialization, node '" + param_ids_[j] + "': " + e.what(), param_ids_[j], {});
      }
    }
    point_x_ = prior_x_;
  }

  Diagram diagram_;
  SolverConfig cfg_;
  std::vector<Param> params_;
  std::vector<std::string> param_ids_;
  std::vector<EvidenceSlot> slots_;
  std::map<std::size_t, CoefficientMap> fixed_;

  Eigen::VectorXd prior_x_;
  Eigen::VectorXd prior_v_;
  Eigen::VectorXd point_x_;
  std::vector<double> point_y_;
  std::vector<IterationRecord> trace_;
  std::vector<Snapshot> snapshots_;
};

inline SolverResult solve(const Diagram& d, const SolverConfig& cfg = {}) {
  LinearApproximation engine(d, cfg);
  return engine.run();
}

}  // namespace lininf
