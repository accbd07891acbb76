#pragma once

// Gaussian approximations to experimental likelihoods on the transformed
// parameter X that the experiment bears on.

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lininf/error.hpp"
#include "lininf/specfun.hpp"
#include "lininf/transforms.hpp"

namespace lininf {

/// D | X ~ Normal(X, v) observed at d.
struct LikelihoodApprox {
  double d = 0.0;
  double v = 1.0;
};

/// n samples of known variance sigma2 with sample mean `mean` (X scale).
struct NormalKnownVar {
  long n = 1;
  double mean = 0.0;
  double sigma2 = 1.0;
};

/// n samples of unknown variance; `s` is the sample variance with divisor n.
struct NormalUnknownVar {
  long n = 4;
  double mean = 0.0;
  double s = 1.0;
};

/// s successes in n trials. alpha and beta tune the approximation; when
/// absent they default from the parent's prior.
struct Binomial {
  long n = 1;
  long s = 0;
  std::optional<double> alpha;
  std::optional<double> beta;
};

struct EvidenceSpec {
  std::variant<NormalKnownVar, NormalUnknownVar, Binomial> data;
  /// Normal variants only: `samples` holds raw lognormal observations that
  /// are mapped through the parent's log-scaled transform to give (n, mean, s).
  bool lognormal_samples = false;
  std::vector<double> samples;

  bool is_binomial() const noexcept { return std::holds_alternative<Binomial>(data); }

  std::optional<std::string> violation() const {
    std::ostringstream os;
    if (const auto* k = std::get_if<NormalKnownVar>(&data)) {
      if (!(k->sigma2 > 0.0) || !std::isfinite(k->sigma2)) return "normal_known_var requires sigma2 > 0";
      if (lognormal_samples) {
        if (samples.empty()) return "lognormal_samples requires at least one sample";
        return std::nullopt;
      }
      if (k->n < 1) return "normal_known_var requires n >= 1";
      if (!std::isfinite(k->mean)) return "normal_known_var requires a finite mean";
    } else if (const auto* u = std::get_if<NormalUnknownVar>(&data)) {
      if (lognormal_samples) {
        if (samples.size() < 4) return "normal_unknown_var requires at least 4 samples";
        return std::nullopt;
      }
      if (u->n < 4) return "normal_unknown_var requires n >= 4";
      if (!(u->s > 0.0) || !std::isfinite(u->s)) return "normal_unknown_var requires s > 0";
      if (!std::isfinite(u->mean)) return "normal_unknown_var requires a finite mean";
    } else {
      const auto& b = std::get<Binomial>(data);
      if (lognormal_samples) return "lognormal_samples applies to normal evidence only";
      if (b.n < 1) return "binomial requires n >= 1";
      if (b.s < 0 || b.s > b.n) return "binomial requires 0 <= s <= n";
      if (b.alpha && !(*b.alpha > 0.0)) return "binomial requires alpha > 0";
      if (b.beta && !(*b.beta > 0.0)) return "binomial requires beta > 0";
    }
    return std::nullopt;
  }
};

inline LikelihoodApprox normal_known_var(long n, double m, double sigma2) {
  if (n < 1 || !(sigma2 > 0.0) || !std::isfinite(m) || !std::isfinite(sigma2)) {
    throw DomainError("normal_known_var: requires n >= 1, sigma2 > 0 and finite mean");
  }
  return {m, sigma2 / static_cast<double>(n)};
}

inline LikelihoodApprox normal_unknown_var(long n, double m, double s) {
  if (n <= 3) throw DomainError("normal_unknown_var: requires n >= 4 (variance divisor n - 3)");
  if (!(s > 0.0) || !std::isfinite(m) || !std::isfinite(s)) {
    throw DomainError("normal_unknown_var: requires s > 0 and finite mean");
  }
  return {m, s / static_cast<double>(n - 3)};
}

/// Gaussian pseudo-observation whose precision-weighted combination with the
/// logit moments of Beta(alpha, beta) gives exactly the logit moments of
/// Beta(alpha + s, beta + n - s).
inline LikelihoodApprox binomial(long n, long s, double alpha, double beta) {
  if (n < 1 || s < 0 || s > n) throw DomainError("binomial: requires n >= 1 and 0 <= s <= n");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("binomial: requires alpha, beta > 0");
  const auto [x1, v1] = beta_to_moments({alpha, beta});
  const auto [x2, v2] = beta_to_moments({alpha + static_cast<double>(s), beta + static_cast<double>(n - s)});
  if (!(v2 < v1)) throw DomainError("binomial: evidence adds no precision (v2 >= v1)");
  const double v = 1.0 / (1.0 / v2 - 1.0 / v1);
  return {v * (x2 / v2 - x1 / v1), v};
}

/// Precision-weighted combination of independent Gaussian observations.
inline LikelihoodApprox pool(std::span<const LikelihoodApprox> items) {
  if (items.empty()) throw DomainError("pool: empty list");
  double precision = 0.0;
  double weighted = 0.0;
  for (const auto& it : items) {
    if (!(it.v > 0.0)) throw DomainError("pool: every variance must be positive");
    precision += 1.0 / it.v;
    weighted += it.d / it.v;
  }
  const double v = 1.0 / precision;
  return {v * weighted, v};
}

struct SampleSummary {
  long n = 0;
  double mean = 0.0;
  /// Divisor n.
  double variance = 0.0;
};

/// Maps raw lognormal samples through a log-scaled transform and summarizes.
inline SampleSummary lognormal_sample_adapter(std::span<const double> samples, const Transform& t) {
  if (t.kind() != TransformKind::log_scaled) {
    throw DomainError("lognormal_sample_adapter: transform must be log_scaled");
  }
  if (samples.empty()) throw DomainError("lognormal_sample_adapter: no samples");
  std::vector<double> xs;
  xs.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!t.in_support(samples[i])) {
      std::ostringstream os;
      os << "lognormal_sample_adapter: sample " << i << " (" << samples[i]
         << ") outside transform support";
      throw DomainError(os.str());
    }
    xs.push_back(t.forward(samples[i]));
  }
  SampleSummary out;
  out.n = static_cast<long>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(out.n);
  for (double x : xs) out.variance += (x - out.mean) * (x - out.mean);
  out.variance /= static_cast<double>(out.n);
  return out;
}

/// Default (alpha, beta) for binomial evidence: the parent's Beta prior
/// when it has one, otherwise 0.5 each. Explicit values win.
inline BetaParams binomial_shape(const Binomial& b, const std::optional<BetaParams>& parent_prior) {
  BetaParams shape = parent_prior.value_or(BetaParams{0.5, 0.5});
  if (b.alpha) shape.alpha = *b.alpha;
  if (b.beta) shape.beta = *b.beta;
  return shape;
}

/// Gaussian likelihood for one evidence node given its parent's transform
/// (used by the lognormal sample adapter) and Beta prior, if any.
inline LikelihoodApprox approximate(const EvidenceSpec& e, const Transform& parent_transform,
                                    const std::optional<BetaParams>& parent_prior) {
  if (auto v = e.violation()) throw DomainError("evidence: " + *v);
  if (const auto* k = std::get_if<NormalKnownVar>(&e.data)) {
    if (e.lognormal_samples) {
      const auto sum = lognormal_sample_adapter(e.samples, parent_transform);
      return normal_known_var(sum.n, sum.mean, k->sigma2);
    }
    return normal_known_var(k->n, k->mean, k->sigma2);
  }
  if (const auto* u = std::get_if<NormalUnknownVar>(&e.data)) {
    if (e.lognormal_samples) {
      const auto sum = lognormal_sample_adapter(e.samples, parent_transform);
      return normal_unknown_var(sum.n, sum.mean, sum.variance);
    }
    return normal_unknown_var(u->n, u->mean, u->s);
  }
  const auto& b = std::get<Binomial>(e.data);
  const BetaParams shape = binomial_shape(b, parent_prior);
  return binomial(b.n, b.s, shape.alpha, shape.beta);
}

}  // namespace lininf
