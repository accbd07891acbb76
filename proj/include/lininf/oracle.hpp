#pragma once

// Reference posterior by importance sampling with the prior as proposal.
// Used to check the linear approximation; it shares no approximation code
// with the solver: evidence is weighted by exact likelihoods in the
// original parameterization.
//
// Random numbers: std::mt19937_64, one engine per block of 65536 draws,
// seeded from splitmix64 of (seed, block index). Blocks are merged in block
// order, so results do not depend on the number of worker threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lininf/error.hpp"
#include "lininf/evidence.hpp"
#include "lininf/expression.hpp"
#include "lininf/model.hpp"
#include "lininf/transforms.hpp"

namespace lininf {

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Engine for substream `stream` of `seed`.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

// The distributions below are written out rather than taken from <random>,
// whose algorithms are implementation-defined.

/// Uniform on the open interval (0, 1).
inline double uniform(std::mt19937_64& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

inline double normal(std::mt19937_64& g) {
  const double u1 = uniform(g);
  const double u2 = uniform(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Marsaglia-Tsang, with the shape < 1 boost G(k) = G(k + 1) U^(1/k).
inline double gamma(std::mt19937_64& g, double shape) {
  if (shape < 1.0) {
    const double boost = std::pow(uniform(g), 1.0 / shape);
    return gamma(g, shape + 1.0) * boost;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal(g);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform(g);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

inline double beta(std::mt19937_64& g, double a, double b) {
  const double x = gamma(g, a);
  const double y = gamma(g, b);
  return x / (x + y);
}

}  // namespace rng

struct McParameterEstimate {
  double mean = 0.0;
  double variance = 0.0;
  double mean_se = 0.0;
  double variance_se = 0.0;
};

struct McEstimate {
  /// Parameter ids in topological order.
  std::vector<std::string> parameters;
  std::map<std::string, McParameterEstimate> estimates;
  double effective_sample_size = 0.0;
  std::size_t samples = 0;
  /// Draws whose weight is exactly zero (out-of-support or unevaluable).
  std::size_t zero_weight = 0;
  std::uint64_t seed = 0;
  std::optional<std::string> warning;
};

inline constexpr double kMinEffectiveSampleSize = 50.0;
inline constexpr std::size_t kOracleBlockSize = 1u << 16;

namespace detail {

class ImportanceSampler {
 public:
  explicit ImportanceSampler(const Diagram& d) {
    const auto report = validate(d);
    if (!report.empty()) throw StructureError("invalid diagram:\n" + describe(report));
    std::unordered_map<std::string, std::size_t> pos;
    for (const auto& id : topological_order(d)) {
      const Node& n = d.at(id);
      if (n.is_parameter()) {
        pos[id] = params_.size();
        params_.push_back({&n, {}, {}});
        ids_.push_back(id);
      }
    }
    auto slot_of = [&](const std::string& name) { return pos.at(name); };
    for (auto& p : params_) {
      if (p.node->kind == NodeKind::deterministic) {
        p.f = CompiledExpression(*p.node->expr, slot_of);
      } else if (p.node->prior->family == PriorFamily::lognormal) {
        p.log_moments = forward_moments(*p.node->prior);
      }
    }
    for (const auto& id : topological_order(d)) {
      const Node& n = d.at(id);
      if (n.is_parameter()) continue;
      const std::size_t parent = pos.at(n.parents.front());
      const Node& pn = *params_[parent].node;
      Likelihood lk{parent, pn.transform.value(), {}, 0, 0};
      if (const auto* b = std::get_if<Binomial>(&n.evidence->data)) {
        lk.binomial = true;
        lk.n = b->n;
        lk.s = b->s;
      } else {
        std::optional<BetaParams> none;
        lk.normal = approximate(*n.evidence, *pn.transform, none);
      }
      likelihoods_.push_back(lk);
    }
  }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::size_t dimension() const noexcept { return params_.size(); }

  /// Draws one joint sample into `y`; returns its log weight.
  double draw(std::mt19937_64& g, std::vector<double>& y) const {
    for (std::size_t j = 0; j < params_.size(); ++j) {
      const Param& p = params_[j];
      const Transform& t = *p.node->transform;
      if (p.node->kind == NodeKind::deterministic) {
        try {
          y[j] = p.f(y);
        } catch (const EvaluationError&) {
          // Keep consuming the stream identically; weight is zero.
          y[j] = std::numeric_limits<double>::quiet_NaN();
        }
        continue;
      }
      const PriorSpec& prior = *p.node->prior;
      switch (prior.family) {
        case PriorFamily::normal:
          y[j] = prior.mean_y + std::sqrt(prior.var_y) * rng::normal(g);
          break;
        case PriorFamily::lognormal:
          y[j] = t.a() + (t.b() - t.a()) *
                             std::exp(p.log_moments.mean + std::sqrt(p.log_moments.variance) * rng::normal(g));
          break;
        case PriorFamily::beta:
          y[j] = t.a() + (t.b() - t.a()) * rng::beta(g, prior.shape.alpha, prior.shape.beta);
          break;
      }
    }
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (double v : y) {
      if (!std::isfinite(v)) return neg_inf;
    }
    double logw = 0.0;
    for (const auto& lk : likelihoods_) {
      const double yp = y[lk.parent];
      if (!lk.transform.in_support(yp)) return neg_inf;
      if (lk.binomial) {
        const double p = (yp - lk.transform.a()) / (lk.transform.b() - lk.transform.a());
        if (!(p > 0.0 && p < 1.0)) return neg_inf;
        logw += static_cast<double>(lk.s) * std::log(p) + static_cast<double>(lk.n - lk.s) * std::log1p(-p);
      } else {
        const double x = lk.transform.forward(yp);
        const double z = x - lk.normal.d;
        logw += -0.5 * z * z / lk.normal.v;
      }
    }
    return logw;
  }

 private:
  struct Param {
    const Node* node;
    CompiledExpression f;
    MomentPair log_moments;
  };
  struct Likelihood {
    std::size_t parent;
    Transform transform;
    LikelihoodApprox normal;
    long n;
    long s;
    bool binomial = false;
  };

  std::vector<Param> params_;
  std::vector<std::string> ids_;
  std::vector<Likelihood> likelihoods_;
};

struct FirstPass {
  double max_logw = -std::numeric_limits<double>::infinity();
  double sum_w = 0.0;                 // relative to max_logw
  std::vector<double> sum_wy;         // relative to max_logw
  std::size_t zero = 0;

  void rescale_to(double new_max) {
    if (new_max == max_logw) return;
    const double f = std::isfinite(max_logw) ? std::exp(max_logw - new_max) : 0.0;
    sum_w *= f;
    for (auto& v : sum_wy) v *= f;
    max_logw = new_max;
  }
};

struct SecondPass {
  double sum_w = 0.0;
  double sum_w2 = 0.0;
  std::vector<double> sum_w_c2;    // sum w (y - mean)^2
  std::vector<double> sum_w2_c2;   // sum w^2 (y - mean)^2
};

template <class Fn>
void for_blocks(std::size_t blocks, unsigned workers, Fn&& fn) {
  if (workers <= 1 || blocks <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::vector<std::thread> pool;
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, blocks));
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t b = w; b < blocks; b += n) fn(b);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Self-normalized importance sampling estimate of every parameter's
/// posterior mean and variance in original space. `workers` = 0 uses the
/// hardware concurrency; the result is identical for any worker count.
inline McEstimate mc_posterior(const Diagram& d, std::size_t n_samples, std::uint64_t seed,
                               unsigned workers = 0) {
  if (n_samples == 0) throw DomainError("mc_posterior: n_samples must be positive");
  const detail::ImportanceSampler sampler(d);
  const std::size_t np = sampler.dimension();
  const std::size_t blocks = (n_samples + kOracleBlockSize - 1) / kOracleBlockSize;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());

  auto block_len = [&](std::size_t b) {
    return std::min(kOracleBlockSize, n_samples - b * kOracleBlockSize);
  };

  // Replays block b, calling visit(y, logw) for every draw.
  auto replay = [&](std::size_t b, auto&& visit) {
    auto g = rng::substream(seed, b);
    std::vector<double> y(np);
    for (std::size_t i = 0, n = block_len(b); i < n; ++i) {
      const double logw = sampler.draw(g, y);
      visit(y, logw);
    }
  };

  // Pass 1: maximum log weight and weighted means.
  std::vector<detail::FirstPass> first(blocks);
  detail::for_blocks(blocks, workers, [&](std::size_t b) {
    detail::FirstPass& acc = first[b];
    acc.sum_wy.assign(np, 0.0);
    replay(b, [&](const std::vector<double>& y, double logw) {
      if (!std::isfinite(logw)) {
        ++acc.zero;
        return;
      }
      if (logw > acc.max_logw) acc.rescale_to(logw);
      const double w = std::exp(logw - acc.max_logw);
      acc.sum_w += w;
      for (std::size_t j = 0; j < np; ++j) acc.sum_wy[j] += w * y[j];
    });
  });
  detail::FirstPass total;
  total.sum_wy.assign(np, 0.0);
  for (auto& blk : first) {
    const double m = std::max(total.max_logw, blk.max_logw);
    total.rescale_to(m);
    blk.rescale_to(m);
    total.sum_w += blk.sum_w;
    for (std::size_t j = 0; j < np; ++j) total.sum_wy[j] += blk.sum_wy[j];
    total.zero += blk.zero;
  }

  McEstimate est;
  est.parameters = sampler.ids();
  est.samples = n_samples;
  est.seed = seed;
  est.zero_weight = total.zero;
  if (!(total.sum_w > 0.0)) {
    est.warning = "all importance weights are zero";
    for (const auto& id : est.parameters) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      est.estimates[id] = {nan, nan, nan, nan};
    }
    return est;
  }
  std::vector<double> mean(np);
  for (std::size_t j = 0; j < np; ++j) mean[j] = total.sum_wy[j] / total.sum_w;
  const double max_logw = total.max_logw;

  // Pass 2: centered second moments and the weight-squared sums.
  std::vector<detail::SecondPass> second(blocks);
  detail::for_blocks(blocks, workers, [&](std::size_t b) {
    detail::SecondPass& acc = second[b];
    acc.sum_w_c2.assign(np, 0.0);
    acc.sum_w2_c2.assign(np, 0.0);
    replay(b, [&](const std::vector<double>& y, double logw) {
      if (!std::isfinite(logw)) return;
      const double w = std::exp(logw - max_logw);
      acc.sum_w += w;
      acc.sum_w2 += w * w;
      for (std::size_t j = 0; j < np; ++j) {
        const double c2 = (y[j] - mean[j]) * (y[j] - mean[j]);
        acc.sum_w_c2[j] += w * c2;
        acc.sum_w2_c2[j] += w * w * c2;
      }
    });
  });
  double sum_w = 0.0, sum_w2 = 0.0;
  std::vector<double> sum_w_c2(np, 0.0), sum_w2_c2(np, 0.0);
  for (const auto& blk : second) {
    sum_w += blk.sum_w;
    sum_w2 += blk.sum_w2;
    for (std::size_t j = 0; j < np; ++j) {
      sum_w_c2[j] += blk.sum_w_c2[j];
      sum_w2_c2[j] += blk.sum_w2_c2[j];
    }
  }
  std::vector<double> var(np);
  for (std::size_t j = 0; j < np; ++j) var[j] = sum_w_c2[j] / sum_w;

  // Pass 3: spread of the squared deviations, for the variance's error.
  std::vector<std::vector<double>> third(blocks, std::vector<double>(np, 0.0));
  detail::for_blocks(blocks, workers, [&](std::size_t b) {
    replay(b, [&](const std::vector<double>& y, double logw) {
      if (!std::isfinite(logw)) return;
      const double w = std::exp(logw - max_logw);
      for (std::size_t j = 0; j < np; ++j) {
        const double dev = (y[j] - mean[j]) * (y[j] - mean[j]) - var[j];
        third[b][j] += w * w * dev * dev;
      }
    });
  });
  std::vector<double> sum_w2_dev(np, 0.0);
  for (const auto& blk : third) {
    for (std::size_t j = 0; j < np; ++j) sum_w2_dev[j] += blk[j];
  }

  est.effective_sample_size = sum_w * sum_w / sum_w2;
  for (std::size_t j = 0; j < np; ++j) {
    McParameterEstimate& e = est.estimates[est.parameters[j]];
    e.mean = mean[j];
    e.variance = var[j];
    e.mean_se = std::sqrt(sum_w2_c2[j]) / sum_w;
    e.variance_se = std::sqrt(sum_w2_dev[j]) / sum_w;
  }
  if (est.effective_sample_size < kMinEffectiveSampleSize) {
    est.warning = "effective sample size " + std::to_string(est.effective_sample_size) +
                  " is below " + std::to_string(static_cast<int>(kMinEffectiveSampleSize)) +
                  "; the estimate is degenerate";
  }
  return est;
}

}  // namespace lininf
