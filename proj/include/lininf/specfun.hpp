#pragma once

// Polygamma functions evaluated by a ten-term upward recurrence followed by
// the asymptotic series in w = z + 10, and Newton inversion of the Beta
// log-odds moment map.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lininf/error.hpp"

namespace lininf {

/// Argument of a polygamma evaluation together with its recurrence-shifted
/// counterpart w = z + 10.
struct PolygammaArg {
  double z;
  double w;

  static PolygammaArg of(double z, const char* fn) {
    if (!(z > 0.0) || !std::isfinite(z)) {
      std::ostringstream os;
      os << fn << ": argument must be positive and finite, got " << z;
      throw DomainError(os.str());
    }
    return {z, z + 10.0};
  }
};

inline double digamma(double z) {
  const auto arg = PolygammaArg::of(z, "digamma");
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) sum -= 1.0 / (arg.z + i);
  const double w = arg.w;
  const double w2 = 1.0 / (w * w);
  // ln w - 1/(2w) - 1/(12w^2) + 1/(120w^4) - 1/(252w^6)
  return sum + std::log(w) - 0.5 / w -
         w2 * (1.0 / 12.0 - w2 * (1.0 / 120.0 - w2 / 252.0));
}

inline double trigamma(double z) {
  const auto arg = PolygammaArg::of(z, "trigamma");
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double zi = arg.z + i;
    sum += 1.0 / (zi * zi);
  }
  const double inv = 1.0 / arg.w;
  const double inv2 = inv * inv;
  // 1/w + 1/(2w^2) + 1/(6w^3) - 1/(30w^5) + 1/(42w^7) - 1/(30w^9)
  return sum + inv + 0.5 * inv2 +
         inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)));
}

inline double tetragamma(double z) {
  const auto arg = PolygammaArg::of(z, "tetragamma");
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double zi = arg.z + i;
    sum -= 2.0 / (zi * zi * zi);
  }
  const double inv = 1.0 / arg.w;
  const double inv2 = inv * inv;
  // -1/w^2 - 1/w^3 - 1/(2w^4) + 1/(6w^6) - 1/(6w^8)
  return sum - inv2 - inv2 * inv -
         inv2 * inv2 * (0.5 - inv2 * (1.0 / 6.0 - inv2 / 6.0));
}

struct BetaParams {
  double alpha;
  double beta;

  bool valid() const noexcept {
    return alpha > 0.0 && beta > 0.0 && std::isfinite(alpha) && std::isfinite(beta);
  }
};

/// (mean, variance) of logit(P) for P ~ Beta(alpha, beta).
inline std::pair<double, double> beta_to_moments(const BetaParams& p) {
  if (!p.valid()) {
    throw DomainError("beta_to_moments: alpha and beta must be positive");
  }
  return {digamma(p.alpha) - digamma(p.beta), trigamma(p.alpha) + trigamma(p.beta)};
}

struct BetaFitOptions {
  int max_newton_steps = 100;
  double residual_tol = 1e-10;
  double step_tol = 1e-12;
  double accept_tol = 1e-9;
};

/// Newton inversion failed; carries the last iterate.
class BetaConvergenceError : public ConvergenceError {
 public:
  BetaConvergenceError(const std::string& what, BetaParams last)
      : ConvergenceError(what), last_(last) {}

  const BetaParams& last_iterate() const noexcept { return last_; }

 private:
  BetaParams last_;
};

struct BetaFit {
  BetaParams params;
  /// Every iterate, starting with the seed.
  std::vector<BetaParams> iterates;
};

/// Closed-form starting point, accurate when alpha and beta are large.
inline BetaParams beta_initial_guess(double mean_x, double var_x) {
  return {0.5 + (1.0 + std::exp(mean_x)) / var_x, 0.5 + (1.0 + std::exp(-mean_x)) / var_x};
}

inline BetaFit fit_beta(double mean_x, double var_x,
                        std::optional<BetaParams> init = std::nullopt,
                        const BetaFitOptions& opt = {}) {
  if (!(var_x > 0.0) || !std::isfinite(var_x) || !std::isfinite(mean_x)) {
    throw DomainError("beta_from_moments: variance must be positive and moments finite");
  }
  BetaParams cur = init ? *init : beta_initial_guess(mean_x, var_x);
  if (!cur.valid()) throw DomainError("beta_from_moments: initial guess must be positive");

  BetaFit fit;
  fit.iterates.push_back(cur);
  int rescues = 0;

  for (int k = 0; k < opt.max_newton_steps; ++k) {
    const double ra = digamma(cur.alpha) - digamma(cur.beta) - mean_x;
    const double rb = trigamma(cur.alpha) + trigamma(cur.beta) - var_x;
    if (std::abs(ra) < opt.residual_tol && std::abs(rb) < opt.residual_tol) {
      fit.params = cur;
      return fit;
    }

    // Jacobian of (psi(a) - psi(b), psi'(a) + psi'(b)) in (a, b).
    const double j11 = trigamma(cur.alpha);
    const double j12 = -trigamma(cur.beta);
    const double j21 = tetragamma(cur.alpha);
    const double j22 = tetragamma(cur.beta);
    const double det = j11 * j22 - j12 * j21;
    if (!(std::abs(det) >= 1e-14)) {
      if (++rescues > 3) {
        throw BetaConvergenceError("beta_from_moments: singular Jacobian", cur);
      }
      cur = {cur.alpha + 1e-6, cur.beta + 1e-6};
      fit.iterates.push_back(cur);
      continue;
    }
    const double da = (j22 * ra - j12 * rb) / det;
    const double db = (-j21 * ra + j11 * rb) / det;

    const BetaParams next{std::max(0.5 * cur.alpha, cur.alpha - da),
                          std::max(0.5 * cur.beta, cur.beta - db)};
    assert(next.alpha >= 0.5 * cur.alpha && next.beta >= 0.5 * cur.beta);
    const double step = std::hypot(next.alpha - cur.alpha, next.beta - cur.beta);
    cur = next;
    fit.iterates.push_back(cur);

    if (step < opt.step_tol) {
      const double ea = digamma(cur.alpha) - digamma(cur.beta) - mean_x;
      const double eb = trigamma(cur.alpha) + trigamma(cur.beta) - var_x;
      if (std::abs(ea) < opt.accept_tol && std::abs(eb) < opt.accept_tol) {
        fit.params = cur;
        return fit;
      }
    }
  }
  const double ra = digamma(cur.alpha) - digamma(cur.beta) - mean_x;
  const double rb = trigamma(cur.alpha) + trigamma(cur.beta) - var_x;
  if (std::abs(ra) < opt.accept_tol && std::abs(rb) < opt.accept_tol) {
    fit.params = cur;
    return fit;
  }
  std::ostringstream os;
  os << "beta_from_moments: no convergence after " << opt.max_newton_steps
     << " Newton steps (mean " << mean_x << ", variance " << var_x << ")";
  throw BetaConvergenceError(os.str(), cur);
}

/// Recovers (alpha, beta) whose logit moments equal (mean_x, var_x).
inline BetaParams beta_from_moments(double mean_x, double var_x,
                                    std::optional<BetaParams> init = std::nullopt) {
  return fit_beta(mean_x, var_x, init).params;
}

}  // namespace lininf
