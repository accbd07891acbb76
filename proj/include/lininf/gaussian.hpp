#pragma once

// Multivariate normal in regression form: X_j = E X_j + sum_i B_ij (X_i - E X_i) + e_j,
// with B strictly upper triangular in node order and Var e_j = v_j.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "lininf/error.hpp"

namespace lininf {

struct GaussianState {
  Eigen::VectorXd mean;
  /// coeffs(i, j) is the coefficient of X_i in the regression of X_j.
  Eigen::MatrixXd coeffs;
  Eigen::VectorXd cond_var;
  /// Unconditional covariance; filled by propagate_covariance.
  Eigen::MatrixXd cov;

  Eigen::Index size() const noexcept { return mean.size(); }

  static GaussianState zeros(Eigen::Index n) {
    return {Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n),
            Eigen::MatrixXd::Zero(n, n)};
  }
};

/// Unconditional covariance by the forward recursion over node order.
inline GaussianState propagate_covariance(GaussianState st) {
  const Eigen::Index n = st.size();
  if (st.coeffs.rows() != n || st.coeffs.cols() != n || st.cond_var.size() != n) {
    throw DomainError("propagate_covariance: inconsistent dimensions");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(st.cond_var(j) >= 0.0)) throw DomainError("propagate_covariance: negative conditional variance");
    for (Eigen::Index i = j; i < n; ++i) {
      if (st.coeffs(i, j) != 0.0) {
        throw DomainError("propagate_covariance: coefficient matrix must be strictly upper triangular");
      }
    }
  }
  st.cov.setZero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto b = st.coeffs.col(j).head(j);
    const auto prior = st.cov.topLeftCorner(j, j);
    const Eigen::VectorXd cross = prior * b;
    st.cov.col(j).head(j) = cross;
    st.cov.row(j).head(j) = cross.transpose();
    st.cov(j, j) = st.cond_var(j) + b.dot(cross);
  }
  return st;
}

/// Mean and covariance over the nodes that were not observed, listed in
/// `index` (ascending).
struct ConditionedGaussian {
  std::vector<Eigen::Index> index;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Observed values keyed by node index.
using Observations = std::map<Eigen::Index, double>;

inline constexpr double kMaxEvidenceCondition = 1e12;

namespace detail {

inline std::vector<Eigen::Index> unobserved(Eigen::Index n, const Observations& obs) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!obs.count(i)) out.push_back(i);
  }
  return out;
}

inline void check_observations(const GaussianState& st, const Observations& obs) {
  if (st.cov.rows() != st.size()) throw DomainError("condition: covariance not propagated");
  for (const auto& [i, _] : obs) {
    if (i < 0 || i >= st.size()) throw DomainError("condition: observation index out of range");
  }
}

}  // namespace detail

/// Joint update E[X|D] = E X + S_ND S_DD^-1 (d - E D),
/// Var[X|D] = S_NN - S_ND S_DD^-1 S_DN.
inline ConditionedGaussian condition(const GaussianState& st, const Observations& obs) {
  detail::check_observations(st, obs);
  ConditionedGaussian out;
  out.index = detail::unobserved(st.size(), obs);
  const auto& keep = out.index;
  const Eigen::Index nk = static_cast<Eigen::Index>(keep.size());
  const Eigen::Index nd = static_cast<Eigen::Index>(obs.size());

  out.mean.resize(nk);
  out.cov.resize(nk, nk);
  for (Eigen::Index a = 0; a < nk; ++a) {
    out.mean(a) = st.mean(keep[a]);
    for (Eigen::Index b = 0; b < nk; ++b) out.cov(a, b) = st.cov(keep[a], keep[b]);
  }
  if (nd == 0) return out;

  std::vector<Eigen::Index> ev;
  Eigen::VectorXd innovation(nd);
  for (const auto& [i, d] : obs) {
    innovation(static_cast<Eigen::Index>(ev.size())) = d - st.mean(i);
    ev.push_back(i);
  }
  Eigen::MatrixXd s_dd(nd, nd);
  Eigen::MatrixXd s_nd(nk, nd);
  for (Eigen::Index a = 0; a < nd; ++a) {
    for (Eigen::Index b = 0; b < nd; ++b) s_dd(a, b) = st.cov(ev[a], ev[b]);
    for (Eigen::Index b = 0; b < nk; ++b) s_nd(b, a) = st.cov(keep[b], ev[a]);
  }

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s_dd, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond < kMaxEvidenceCondition)) {
    std::ostringstream os;
    os << "condition: evidence covariance is singular or ill-conditioned (condition estimate "
       << cond << ")";
    throw NumericalError(os.str(), cond);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(s_dd);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("condition: evidence covariance is not positive definite", cond);
  }
  out.mean += s_nd * llt.solve(innovation);
  out.cov -= s_nd * llt.solve(s_nd.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

/// Same contract as condition(), one observation at a time.
inline ConditionedGaussian condition_sequential(const GaussianState& st, const Observations& obs) {
  detail::check_observations(st, obs);
  Eigen::VectorXd mean = st.mean;
  Eigen::MatrixXd cov = st.cov;
  for (const auto& [k, d] : obs) {
    const double s = cov(k, k);
    if (!(s > 0.0)) {
      throw NumericalError("condition_sequential: observed node has no remaining variance", 0.0);
    }
    const Eigen::VectorXd gain = cov.col(k) / s;
    mean += gain * (d - mean(k));
    cov -= gain * cov.row(k);
    cov = 0.5 * (cov + cov.transpose()).eval();
  }
  ConditionedGaussian out;
  out.index = detail::unobserved(st.size(), obs);
  const Eigen::Index nk = static_cast<Eigen::Index>(out.index.size());
  out.mean.resize(nk);
  out.cov.resize(nk, nk);
  for (Eigen::Index a = 0; a < nk; ++a) {
    out.mean(a) = mean(out.index[a]);
    for (Eigen::Index b = 0; b < nk; ++b) out.cov(a, b) = cov(out.index[a], out.index[b]);
  }
  return out;
}

/// Zero when either variance is zero.
inline double correlation(const Eigen::MatrixXd& cov, Eigen::Index i, Eigen::Index j) {
  const double vi = cov(i, i);
  const double vj = cov(j, j);
  if (!(vi > 0.0) || !(vj > 0.0)) return 0.0;
  const double r = cov(i, j) / (std::sqrt(vi) * std::sqrt(vj));
  return std::clamp(r, -1.0, 1.0);
}

inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& cov) {
  const Eigen::Index n = cov.rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = correlation(cov, i, j);
  }
  return out;
}

}  // namespace lininf
