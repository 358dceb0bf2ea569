#pragma once

// Dense reference computations for small d. Nothing here calls into the
// library's numerical routines, so agreement is a real cross-check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lrvga/fa_precision.hpp"
#include "lrvga/gaussian.hpp"

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline VectorXd gaussian_vector(Index d, std::mt19937_64& rng) {
  return gaussian_matrix(d, 1, rng).col(0);
}

inline double uniform(double lo, double hi, std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// W entries N(0, scale^2), psi uniform on [0.2, 2].
inline lrvga::FaPrecision random_fa(Index d, Index p, std::mt19937_64& rng, double scale = 1.0) {
  MatrixXd w = scale * gaussian_matrix(d, p, rng);
  VectorXd psi(d);
  for (Index i = 0; i < d; ++i) psi(i) = uniform(0.2, 2.0, rng);
  return lrvga::FaPrecision(std::move(w), std::move(psi));
}

inline MatrixXd dense(const MatrixXd& w, const VectorXd& psi) {
  MatrixXd c = w * w.transpose();
  c.diagonal() += psi;
  return c;
}

inline MatrixXd random_spd(Index d, std::mt19937_64& rng) {
  const MatrixXd a = gaussian_matrix(d, d + 2, rng);
  MatrixXd s = a * a.transpose() / static_cast<double>(d);
  s.diagonal().array() += 0.3;
  return s;
}

inline MatrixXd inverse(const MatrixXd& a) { return a.fullPivLu().inverse(); }

inline double log_det(const MatrixXd& a) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
  return eig.eigenvalues().array().log().sum();
}

inline double rel_err(const MatrixXd& got, const MatrixXd& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

// Average Gaussian log-likelihood of data with second moment S under N(0, C),
// dropping the constant.
inline double fa_loglik(const MatrixXd& s, const MatrixXd& c) {
  return -0.5 * (log_det(c) + inverse(c).cwiseProduct(s).sum());
}

// Classical factor-analysis EM written through the posterior of the latent
// z | v: beta = W^T C^{-1}, E[z z^T] = I - beta W + beta S beta^T.
inline void textbook_em(MatrixXd& w, VectorXd& psi, const MatrixXd& s) {
  const MatrixXd beta = w.transpose() * inverse(dense(w, psi));
  const Index p = w.cols();
  const MatrixXd ezz = MatrixXd::Identity(p, p) - beta * w + beta * s * beta.transpose();
  const MatrixXd w_new = s * beta.transpose() * inverse(ezz);
  psi = (s - w_new * beta * s).diagonal();
  w = w_new;
}

// A target S for which (W, Psi) is a stationary point of the marginal
// likelihood. With C = W W^T + Psi the conditions are R W = 0 and
// diag(R) = 0 for R = C^{-1} (S - C) C^{-1}; R = Q A Q^T with Q spanning the
// complement of W gives the first, and A is projected onto diag(R) = 0.
// Needs (d - p)(d - p + 1) / 2 > d.
inline MatrixXd stationary_target(const MatrixXd& w, const VectorXd& psi, std::mt19937_64& rng,
                                  double size = 0.3) {
  const Index d = w.rows();
  const Index m = d - w.cols();
  const Eigen::HouseholderQR<MatrixXd> qr(w);
  const MatrixXd q = (qr.householderQ() * MatrixXd::Identity(d, d)).rightCols(m);

  MatrixXd a = gaussian_matrix(m, m, rng);
  a = 0.5 * (a + a.transpose()).eval();
  // Rows of L map vec(A) to diag(Q A Q^T).
  MatrixXd l(d, m * m);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < m; ++j)
      for (Index k = 0; k < m; ++k) l(i, j * m + k) = q(i, j) * q(i, k);
  VectorXd vec(m * m);
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < m; ++k) vec(j * m + k) = a(j, k);
  vec -= l.transpose() * (l * l.transpose()).ldlt().solve(l * vec);
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < m; ++k) a(j, k) = vec(j * m + k);

  const MatrixXd c = dense(w, psi);
  MatrixXd r = q * a * q.transpose();
  const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(c).eigenvalues().minCoeff();
  MatrixXd bump = c * r * c;
  bump *= size * min_eig / bump.norm();
  return c + bump;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline const double kBeta = std::sqrt(8.0 / std::numbers::pi);

// Bayesian linear regression posterior, N x d inputs, unit noise.
inline lrvga::DenseGaussian ridge_posterior(const MatrixXd& x, const VectorXd& y, double sigma0) {
  MatrixXd info = x.transpose() * x;
  info.diagonal().array() += 1.0 / (sigma0 * sigma0);
  const MatrixXd cov = inverse(info);
  return lrvga::DenseGaussian{cov * x.transpose() * y, cov};
}

// One implicit logistic step on explicit matrices:
//   P_t^{-1} = P_{t-1}^{-1} + k s'(k x^T mu_t) x x^T
//   mu_t = mu_{t-1} + P_{t-1} x (y - s(k x^T mu_t)),  k = beta / sqrt(x^T P_t x + beta^2)
// solved by damped iteration over (mu_t, P_t).
inline lrvga::DenseGaussian implicit_logistic_step(const lrvga::DenseGaussian& prior,
                                                   const VectorXd& x, double y) {
  const MatrixXd prec0 = inverse(prior.covariance);
  VectorXd mu = prior.mean;
  MatrixXd cov = prior.covariance;
  for (int it = 0; it < 5000; ++it) {
    const double k = kBeta / std::sqrt(x.dot(cov * x) + kBeta * kBeta);
    const double sg = sigmoid(k * x.dot(mu));
    const VectorXd mu_next = prior.mean + prior.covariance * x * (y - sg);
    const MatrixXd cov_next = inverse(prec0 + k * sg * (1.0 - sg) * x * x.transpose());
    const double change = (mu_next - mu).norm() + (cov_next - cov).norm();
    mu = 0.5 * (mu + mu_next);
    cov = 0.5 * (cov + cov_next);
    if (change < 1e-15) break;
  }
  return lrvga::DenseGaussian{mu, cov};
}

}  // namespace oracle
