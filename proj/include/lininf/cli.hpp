#pragma once

// Command implementations behind the `infer` tool. Each command writes its
// report to `out`, diagnostics to `err`, and returns the process exit code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "lininf/error.hpp"
#include "lininf/model_io.hpp"
#include "lininf/oracle.hpp"
#include "lininf/solver.hpp"

namespace lininf::cli {

/// Stable exit-code contract.
enum ExitCode : int {
  kOk = 0,
  kDiverged = 2,
  kMaxIterations = 3,
  kInputError = 4,
  kNumericalError = 5,
};

inline int exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return kOk;
    case SolveStatus::diverged: return kDiverged;
    case SolveStatus::max_iterations: return kMaxIterations;
  }
  return kNumericalError;
}

struct OutputOptions {
  bool json = false;
  /// Significant digits for every printed number: 6 by default, 17 for
  /// full precision.
  int digits = 6;
};

struct SolveFlags {
  std::optional<double> epsilon;
  std::optional<int> max_iterations;
  bool no_pool = false;
};

struct SampleFlags {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 1;
  /// 0 means hardware concurrency.
  unsigned workers = 0;
};

/// A parameter is flagged when the approximation mean is farther from the
/// Monte Carlo mean than this.
inline double discrepancy_tolerance(double mc_mean, double mc_se) {
  return std::max(3.0 * mc_se, 0.02 * std::abs(mc_mean));
}

namespace detail {

using nlohmann::json;

inline std::string fmt(double x, int digits) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

/// JSON value of the printed number, so table and JSON agree exactly.
inline json num(double x, int digits) {
  if (!std::isfinite(x)) return nullptr;
  return std::stod(fmt(x, digits));
}

inline std::size_t id_width(const std::vector<std::string>& ids) {
  std::size_t w = 0;
  for (const auto& id : ids) w = std::max(w, id.size());
  return w;
}

inline std::string pad(const std::string& s, std::size_t w) {
  return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
}

inline SolverConfig apply(SolverConfig cfg, const SolveFlags& f) {
  if (f.epsilon) cfg.epsilon = *f.epsilon;
  if (f.max_iterations) cfg.max_iterations = *f.max_iterations;
  if (f.no_pool) cfg.pool_evidence = false;
  cfg.check();
  return cfg;
}

inline void write_trace(std::ostream& out, const std::vector<IterationRecord>& trace, int digits) {
  for (const auto& it : trace) out << "  iter " << it.t << "  r_max " << fmt(it.r_max, digits) << "\n";
}

inline json trace_json(const std::vector<IterationRecord>& trace, int digits) {
  json arr = json::array();
  for (const auto& it : trace) arr.push_back({{"t", it.t}, {"r_max", num(it.r_max, digits)}});
  return arr;
}

inline void write_solve_table(std::ostream& out, const SolverResult& r, int digits) {
  out << "status      " << to_string(r.status) << "\n";
  out << "iterations  " << r.iterations.size() << "\n";
  out << "r_max trace\n";
  write_trace(out, r.iterations, digits);
  out << "posterior (iteration " << r.reported_iteration;
  if (r.status == SolveStatus::diverged) out << ", best iterate, diverged";
  out << ")\n";
  const std::size_t w = id_width(r.parameters);
  for (const auto& id : r.parameters) {
    const auto& m = r.posterior_y.at(id);
    out << pad(id, w) << "  mean " << fmt(m.mean, digits) << "  var " << fmt(m.variance, digits) << "\n";
  }
  if (r.parameters.size() > 1) {
    out << "correlation\n" << pad("", w);
    for (const auto& id : r.parameters) out << "  " << id;
    out << "\n";
    for (std::size_t i = 0; i < r.parameters.size(); ++i) {
      out << pad(r.parameters[i], w);
      for (std::size_t j = 0; j < r.parameters.size(); ++j) {
        out << "  "
            << fmt(r.posterior_correlations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                   digits);
      }
      out << "\n";
    }
  }
}

inline json solve_json(const SolverResult& r, int digits) {
  json params = json::array();
  for (const auto& id : r.parameters) {
    const auto& m = r.posterior_y.at(id);
    params.push_back({{"id", id}, {"mean", num(m.mean, digits)}, {"variance", num(m.variance, digits)}});
  }
  json corr = json::array();
  for (Eigen::Index i = 0; i < r.posterior_correlations.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < r.posterior_correlations.cols(); ++j) {
      row.push_back(num(r.posterior_correlations(i, j), digits));
    }
    corr.push_back(row);
  }
  return {{"status", std::string(to_string(r.status))},
          {"iterations", r.iterations.size()},
          {"reported_iteration", r.reported_iteration},
          {"trace", trace_json(r.iterations, digits)},
          {"parameters", params},
          {"correlation", {{"ids", r.parameters}, {"matrix", corr}}}};
}

inline void write_oracle_table(std::ostream& out, const McEstimate& e, int digits) {
  out << "samples     " << e.samples << "\n";
  out << "seed        " << e.seed << "\n";
  out << "ess         " << fmt(e.effective_sample_size, digits) << "\n";
  out << "zero weight " << e.zero_weight << "\n";
  const std::size_t w = id_width(e.parameters);
  for (const auto& id : e.parameters) {
    const auto& p = e.estimates.at(id);
    out << pad(id, w) << "  mean " << fmt(p.mean, digits) << "  se " << fmt(p.mean_se, digits) << "  var "
        << fmt(p.variance, digits) << "  se " << fmt(p.variance_se, digits) << "\n";
  }
  if (e.warning) out << "warning: " << *e.warning << "\n";
}

inline json oracle_json(const McEstimate& e, int digits) {
  json params = json::array();
  for (const auto& id : e.parameters) {
    const auto& p = e.estimates.at(id);
    params.push_back({{"id", id},
                      {"mean", num(p.mean, digits)},
                      {"mean_se", num(p.mean_se, digits)},
                      {"variance", num(p.variance, digits)},
                      {"variance_se", num(p.variance_se, digits)}});
  }
  json j = {{"samples", e.samples},
            {"seed", e.seed},
            {"effective_sample_size", num(e.effective_sample_size, digits)},
            {"zero_weight", e.zero_weight},
            {"parameters", params}};
  j["warning"] = e.warning ? json(*e.warning) : json(nullptr);
  return j;
}

inline void report_solve_error(std::ostream& err, const SolveError& e, int digits) {
  err << "error: " << e.what() << "\n";
  if (!e.trace().empty()) {
    err << "r_max trace before failure\n";
    write_trace(err, e.trace(), digits);
  }
}

/// Maps library exceptions onto exit codes.
template <class Fn>
int guarded(std::ostream& err, int digits, Fn&& fn) {
  try {
    return fn();
  } catch (const SolveError& e) {
    report_solve_error(err, e, digits);
    return kNumericalError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace detail

/// Loads `path` and runs `fn(doc)`; load failures exit with kInputError.
template <class Fn>
int with_model(const std::string& path, std::ostream& err, Fn&& fn) {
  ModelDocument doc;
  try {
    doc = load_model(path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return fn(doc);
}

inline int cmd_validate(const ModelDocument& doc, std::ostream& out) {
  std::size_t basic = 0, deterministic = 0, evidence = 0;
  for (const auto& n : doc.diagram.nodes()) {
    (n.kind == NodeKind::basic ? basic : n.kind == NodeKind::deterministic ? deterministic : evidence) += 1;
  }
  out << "ok: " << doc.diagram.size() << " nodes (" << basic << " basic, " << deterministic
      << " deterministic, " << evidence << " evidence)\n";
  return kOk;
}

inline int cmd_solve(const ModelDocument& doc, const SolveFlags& flags, const OutputOptions& opt,
                     std::ostream& out, std::ostream& err) {
  return detail::guarded(err, opt.digits, [&] {
    const SolverResult r = solve(doc.diagram, detail::apply(doc.solver, flags));
    if (opt.json) {
      out << detail::solve_json(r, opt.digits).dump(2) << "\n";
    } else {
      detail::write_solve_table(out, r, opt.digits);
    }
    return exit_code(r.status);
  });
}

inline int cmd_oracle(const ModelDocument& doc, const SampleFlags& flags, const OutputOptions& opt,
                      std::ostream& out, std::ostream& err) {
  return detail::guarded(err, opt.digits, [&] {
    const McEstimate e = mc_posterior(doc.diagram, flags.samples, flags.seed, flags.workers);
    if (opt.json) {
      out << detail::oracle_json(e, opt.digits).dump(2) << "\n";
    } else {
      detail::write_oracle_table(out, e, opt.digits);
    }
    return kOk;
  });
}

/// Exit code follows the solver status; discrepancies are reported, not
/// turned into failures.
inline int cmd_compare(const ModelDocument& doc, const SampleFlags& flags, const OutputOptions& opt,
                       std::ostream& out, std::ostream& err) {
  return detail::guarded(err, opt.digits, [&] {
    using detail::fmt;
    using detail::num;
    const SolverResult r = solve(doc.diagram, doc.solver);
    const McEstimate e = mc_posterior(doc.diagram, flags.samples, flags.seed, flags.workers);
    const int d = opt.digits;

    nlohmann::json rows = nlohmann::json::array();
    std::vector<std::string> flagged;
    const std::size_t w = detail::id_width(r.parameters);
    if (!opt.json) {
      out << "solver status " << to_string(r.status) << " after " << r.iterations.size()
          << " iterations; oracle " << e.samples << " samples, seed " << e.seed << ", ess "
          << fmt(e.effective_sample_size, d) << "\n";
    }
    for (const auto& id : r.parameters) {
      const auto& a = r.posterior_y.at(id);
      const auto& m = e.estimates.at(id);
      const double diff = std::abs(a.mean - m.mean);
      const double rel_se = m.mean_se > 0.0 ? diff / m.mean_se : (diff == 0.0 ? 0.0 : INFINITY);
      const bool flag = !(diff <= discrepancy_tolerance(m.mean, m.mean_se));
      if (flag) flagged.push_back(id);
      if (opt.json) {
        rows.push_back({{"id", id},
                        {"approx_mean", num(a.mean, d)},
                        {"approx_variance", num(a.variance, d)},
                        {"mc_mean", num(m.mean, d)},
                        {"mc_variance", num(m.variance, d)},
                        {"mc_mean_se", num(m.mean_se, d)},
                        {"mc_variance_se", num(m.variance_se, d)},
                        {"abs_discrepancy", num(diff, d)},
                        {"se_discrepancy", num(rel_se, d)},
                        {"flagged", flag}});
      } else {
        out << detail::pad(id, w) << "  approx " << fmt(a.mean, d) << " (var " << fmt(a.variance, d)
            << ")  mc " << fmt(m.mean, d) << " +- " << fmt(m.mean_se, d) << " (var " << fmt(m.variance, d)
            << " +- " << fmt(m.variance_se, d) << ")  |diff| " << fmt(diff, d) << "  diff/se "
            << fmt(rel_se, d) << (flag ? "  FLAG" : "") << "\n";
      }
    }
    if (opt.json) {
      nlohmann::json j = {{"status", std::string(to_string(r.status))},
                          {"iterations", r.iterations.size()},
                          {"samples", e.samples},
                          {"seed", e.seed},
                          {"effective_sample_size", num(e.effective_sample_size, d)},
                          {"parameters", rows},
                          {"flagged", flagged}};
      j["warning"] = e.warning ? nlohmann::json(*e.warning) : nlohmann::json(nullptr);
      out << j.dump(2) << "\n";
    } else {
      if (e.warning) out << "warning: " << *e.warning << "\n";
      if (flagged.empty()) {
        out << "discrepancy: none above max(3 se, 2% relative)\n";
      } else {
        out << "discrepancy: flagged";
        for (const auto& id : flagged) out << " " << id;
        out << "\n";
      }
    }
    return exit_code(r.status);
  });
}

}  // namespace lininf::cli
