#pragma once

// Random regression-form Gaussians and the closed-form covariance
// (I - B)^-T diag(v) (I - B)^-1 used to check the forward recursion.

#include <random>

#include <Eigen/Dense>

#include "lininf/gaussian.hpp"

namespace testsupport {

inline lininf::GaussianState random_state(std::mt19937_64& g, Eigen::Index n, double density = 0.6) {
  std::uniform_real_distribution<double> coef(-1.5, 1.5);
  std::uniform_real_distribution<double> var(0.05, 2.0);
  std::uniform_real_distribution<double> mean(-3.0, 3.0);
  std::bernoulli_distribution edge(density);
  auto st = lininf::GaussianState::zeros(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    st.mean(j) = mean(g);
    st.cond_var(j) = var(g);
    for (Eigen::Index i = 0; i < j; ++i) {
      if (edge(g)) st.coeffs(i, j) = coef(g);
    }
  }
  return st;
}

inline Eigen::MatrixXd closed_form_covariance(const lininf::GaussianState& st) {
  const Eigen::Index n = st.size();
  const Eigen::MatrixXd inv = (Eigen::MatrixXd::Identity(n, n) - st.coeffs).inverse();
  return inv.transpose() * st.cond_var.asDiagonal() * inv;
}

}  // namespace testsupport
