#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "lininf/error.hpp"
#include "lininf/specfun.hpp"

namespace lininf {

enum class TransformKind { scaled, log_scaled, logistic_scaled };

inline std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::scaled: return "scaled";
    case TransformKind::log_scaled: return "log_scaled";
    case TransformKind::logistic_scaled: return "logistic_scaled";
  }
  return "?";
}

inline std::optional<TransformKind> transform_kind_from(std::string_view s) {
  if (s == "scaled") return TransformKind::scaled;
  if (s == "log_scaled") return TransformKind::log_scaled;
  if (s == "logistic_scaled") return TransformKind::logistic_scaled;
  return std::nullopt;
}

/// Monotone map between an original variable Y and its Gaussian surrogate X.
///
///   scaled           X = (Y - a) / (b - a)          Y in (-inf, inf)
///   log_scaled       X = ln((Y - a) / (b - a))      Y on the b side of a
///   logistic_scaled  X = ln((Y - a) / (b - Y))      Y strictly between a and b
///
/// Derivatives carry their true sign, so a > b gives a decreasing scaled map
/// and a decreasing logistic map.
class Transform {
 public:
  Transform(TransformKind kind, double a, double b) : kind_(kind), a_(a), b_(b) {
    if (!(a != b) || !std::isfinite(a) || !std::isfinite(b)) {
      std::ostringstream os;
      os << "transform requires finite a != b, got a=" << a << " b=" << b;
      throw DomainError(os.str());
    }
  }

  static Transform scaled(double a = 0.0, double b = 1.0) { return {TransformKind::scaled, a, b}; }
  static Transform log_scaled(double a = 0.0, double b = 1.0) {
    return {TransformKind::log_scaled, a, b};
  }
  static Transform logistic_scaled(double a = 0.0, double b = 1.0) {
    return {TransformKind::logistic_scaled, a, b};
  }

  TransformKind kind() const noexcept { return kind_; }
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }

  bool in_support(double y) const noexcept {
    if (!std::isfinite(y)) return false;
    switch (kind_) {
      case TransformKind::scaled: return true;
      case TransformKind::log_scaled: return a_ < b_ ? y > a_ : y < a_;
      case TransformKind::logistic_scaled: return a_ < b_ ? (y > a_ && y < b_) : (y > b_ && y < a_);
    }
    return false;
  }

  double forward(double y) const {
    require_support(y, "forward_point");
    switch (kind_) {
      case TransformKind::scaled: return (y - a_) / (b_ - a_);
      case TransformKind::log_scaled: return std::log((y - a_) / (b_ - a_));
      case TransformKind::logistic_scaled: return std::log((y - a_) / (b_ - y));
    }
    return 0.0;
  }

  double inverse(double x) const {
    switch (kind_) {
      case TransformKind::scaled: return a_ + (b_ - a_) * x;
      case TransformKind::log_scaled: {
        const double ex = std::exp(x);
        if (!std::isfinite(ex)) {
          std::ostringstream os;
          os << "inverse_point: exp(" << x << ") overflows for log_scaled transform";
          throw RangeError(os.str());
        }
        const double y = a_ + (b_ - a_) * ex;
        return in_support(y) ? y : std::nextafter(a_, b_);
      }
      case TransformKind::logistic_scaled: {
        const double y = b_ + (a_ - b_) / (1.0 + std::exp(x));
        if (in_support(y)) return y;
        const double margin = (b_ - a_) * 1e-15;
        return x > 0.0 ? b_ - margin : a_ + margin;
      }
    }
    return 0.0;
  }

  /// dX/dY at y.
  double derivative(double y) const {
    require_support(y, "derivative");
    switch (kind_) {
      case TransformKind::scaled: return 1.0 / (b_ - a_);
      case TransformKind::log_scaled: return 1.0 / (y - a_);
      case TransformKind::logistic_scaled: return 1.0 / (y - a_) + 1.0 / (b_ - y);
    }
    return 0.0;
  }

  friend bool operator==(const Transform&, const Transform&) = default;

 private:
  void require_support(double y, const char* op) const {
    if (!in_support(y)) {
      std::ostringstream os;
      os << op << ": y=" << y << " outside support of " << to_string(kind_)
         << " transform (a=" << a_ << ", b=" << b_ << ")";
      throw DomainError(os.str());
    }
  }

  TransformKind kind_;
  double a_;
  double b_;
};

inline double forward_point(const Transform& t, double y) { return t.forward(y); }
inline double inverse_point(const Transform& t, double x) { return t.inverse(x); }
inline double derivative(const Transform& t, double y) { return t.derivative(y); }

struct MomentPair {
  double mean = 0.0;
  double variance = 0.0;

  friend bool operator==(const MomentPair&, const MomentPair&) = default;
};

enum class PriorFamily { normal, lognormal, beta };

inline std::string_view to_string(PriorFamily f) {
  switch (f) {
    case PriorFamily::normal: return "normal";
    case PriorFamily::lognormal: return "lognormal";
    case PriorFamily::beta: return "beta";
  }
  return "?";
}

inline std::optional<PriorFamily> prior_family_from(std::string_view s) {
  if (s == "normal") return PriorFamily::normal;
  if (s == "lognormal") return PriorFamily::lognormal;
  if (s == "beta") return PriorFamily::beta;
  return std::nullopt;
}

/// The distribution family that pairs with each transform kind.
inline PriorFamily family_for(TransformKind k) {
  switch (k) {
    case TransformKind::scaled: return PriorFamily::normal;
    case TransformKind::log_scaled: return PriorFamily::lognormal;
    case TransformKind::logistic_scaled: return PriorFamily::beta;
  }
  return PriorFamily::normal;
}

inline TransformKind kind_for(PriorFamily f) {
  switch (f) {
    case PriorFamily::normal: return TransformKind::scaled;
    case PriorFamily::lognormal: return TransformKind::log_scaled;
    case PriorFamily::beta: return TransformKind::logistic_scaled;
  }
  return TransformKind::scaled;
}

/// Prior of a basic parameter. Normal and lognormal priors are given by the
/// mean and variance of Y itself; Beta priors by (alpha, beta) of
/// (Y - a) / (b - a).
struct PriorSpec {
  PriorFamily family = PriorFamily::normal;
  double mean_y = 0.0;
  double var_y = 1.0;
  BetaParams shape{1.0, 1.0};
  Transform transform = Transform::scaled();

  static PriorSpec normal(double mean, double var, Transform t = Transform::scaled()) {
    return {PriorFamily::normal, mean, var, {1.0, 1.0}, t};
  }
  static PriorSpec lognormal(double mean, double var, Transform t = Transform::log_scaled()) {
    return {PriorFamily::lognormal, mean, var, {1.0, 1.0}, t};
  }
  static PriorSpec beta(double alpha, double beta, Transform t = Transform::logistic_scaled()) {
    return {PriorFamily::beta, 0.0, 0.0, {alpha, beta}, t};
  }

  /// Prior mean of Y.
  double mean() const {
    if (family == PriorFamily::beta) {
      return transform.a() +
             (transform.b() - transform.a()) * shape.alpha / (shape.alpha + shape.beta);
    }
    return mean_y;
  }

  /// Description of the first violated invariant, if any.
  std::optional<std::string> violation() const {
    if (kind_for(family) != transform.kind()) {
      return std::string(to_string(family)) + " prior requires a " +
             std::string(to_string(kind_for(family))) + " transform, got " +
             std::string(to_string(transform.kind()));
    }
    if (family == PriorFamily::beta) {
      if (!shape.valid()) return std::string("beta prior requires alpha > 0 and beta > 0");
      return std::nullopt;
    }
    if (!std::isfinite(mean_y)) return std::string("prior mean must be finite");
    if (!(var_y > 0.0) || !std::isfinite(var_y)) return std::string("prior variance must be positive");
    if (!transform.in_support(mean_y)) {
      std::ostringstream os;
      os << "prior mean " << mean_y << " lies outside the transform support";
      return os.str();
    }
    return std::nullopt;
  }

  friend bool operator==(const PriorSpec& l, const PriorSpec& r) {
    if (l.family != r.family || !(l.transform == r.transform)) return false;
    if (l.family == PriorFamily::beta) {
      return l.shape.alpha == r.shape.alpha && l.shape.beta == r.shape.beta;
    }
    return l.mean_y == r.mean_y && l.var_y == r.var_y;
  }
};

/// (E X, Var X) implied by a prior on Y.
inline MomentPair forward_moments(const PriorSpec& p) {
  if (auto v = p.violation()) throw DomainError("forward_moments: " + *v);
  const double a = p.transform.a();
  const double b = p.transform.b();
  switch (p.family) {
    case PriorFamily::normal:
      return {(p.mean_y - a) / (b - a), p.var_y / ((b - a) * (b - a))};
    case PriorFamily::lognormal: {
      const double shift = p.mean_y - a;
      const double s2 = std::log1p(p.var_y / (shift * shift));
      return {std::log(shift / (b - a)) - 0.5 * s2, s2};
    }
    case PriorFamily::beta: {
      const auto [m, v] = beta_to_moments(p.shape);
      return {m, v};
    }
  }
  return {};
}

/// (E Y, Var Y) for a family and transform given (E X, Var X).
inline MomentPair inverse_moments(PriorFamily family, const Transform& t, const MomentPair& m) {
  if (!(m.variance >= 0.0) || !std::isfinite(m.mean) || !std::isfinite(m.variance)) {
    std::ostringstream os;
    os << "inverse_moments: invalid moments (" << m.mean << ", " << m.variance << ")";
    throw DomainError(os.str());
  }
  const double a = t.a();
  const double b = t.b();
  const double span = b - a;
  switch (family) {
    case PriorFamily::normal:
      return {a + span * m.mean, span * span * m.variance};
    case PriorFamily::lognormal:
      return {a + span * std::exp(m.mean + 0.5 * m.variance),
              span * span * std::expm1(m.variance) * std::exp(2.0 * m.mean + m.variance)};
    case PriorFamily::beta: {
      if (m.variance == 0.0) return {t.inverse(m.mean), 0.0};
      const BetaParams p = beta_from_moments(m.mean, m.variance);
      const double s = p.alpha + p.beta;
      return {a + span * p.alpha / s, span * span * p.alpha * p.beta / (s * s * (s + 1.0))};
    }
  }
  return {};
}

inline MomentPair inverse_moments(const Transform& t, const MomentPair& m) {
  return inverse_moments(family_for(t.kind()), t, m);
}

}  // namespace lininf
