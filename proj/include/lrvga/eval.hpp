#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "lrvga/gaussian.hpp"
#include "lrvga/sampler.hpp"

namespace lrvga {

// KL(q || target) for Gaussians, closed form.
double gaussian_kl(const DenseGaussian& q, const DenseGaussian& target);
// q in factor form: the trace and log det terms go through the precision
// factors, O(d^2 p) for a dense target.
double gaussian_kl(const GaussianBelief& q, const DenseGaussian& target);

// KL(N(0, S) || N(0, W W^T + Psi)) for the covariance factorisation problem:
//   1/2 [Tr((W W^T + Psi)^{-1} S) - d + log det(W W^T + Psi) - log det S].
// Pass log det S when evaluating many factorisations against one S.
double covariance_kl(const MatrixXd& target, const FaPrecision& fa,
                     std::optional<double> target_log_det = std::nullopt);

// log det of a dense SPD matrix; throws NumericalError otherwise.
double spd_log_det(const MatrixXd& matrix);

struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;
  Index n_samples = 0;
  // False when the log-density is only known up to a constant.
  bool normalized = false;
};

// Log-density evaluated on the columns of a d x K block.
using BatchLogDensity = std::function<VectorXd(const MatrixXd&)>;

BatchLogDensity pointwise(std::function<double(const VectorXd&)> f);

inline constexpr Index kDefaultKlSamples = 1000;

// E_q[log q] - E_q[logpost] with the entropy term in closed form and the
// second term by Monte Carlo. Draws through the ensemble sampler.
KlEstimate mc_kl_to_posterior(const GaussianBelief& q, const BatchLogDensity& logpost,
                              Index count, std::uint64_t seed, bool normalized = false);
// Same estimate for an explicit covariance (Cholesky draws).
KlEstimate mc_kl_to_posterior(const DenseGaussian& q, const BatchLogDensity& logpost,
                              Index count, std::uint64_t seed, bool normalized = false);

// Inputs stacked row-wise with their labels. Dense; evaluation sizes only.
struct Dataset {
  MatrixXd inputs;  // N x d
  VectorXd labels;

  Index size() const { return inputs.rows(); }
  Index dim() const { return inputs.cols(); }

  static Dataset from(std::span<const Observation> observations, Index dim);
};

// log N(theta; 0, sigma0^2 I), normalised.
double log_prior(const VectorXd& theta, double sigma0);

// Prior plus the sum of log-likelihoods: unit Gaussian noise for the linear
// model, Bernoulli-logistic for classification.
double logposterior_linear(const VectorXd& theta, const Dataset& data, double sigma0);
double logposterior_logistic(const VectorXd& theta, const Dataset& data, double sigma0);
VectorXd logposterior_linear(const MatrixXd& thetas, const Dataset& data, double sigma0);
VectorXd logposterior_logistic(const MatrixXd& thetas, const Dataset& data, double sigma0);

// Exact posterior of the linear model under N(0, sigma0^2 I).
DenseGaussian linear_posterior(const Dataset& data, double sigma0);

// I / sigma0^2 + sum sigma'(x_i^T theta) x_i x_i^T.
MatrixXd logistic_hessian(const VectorXd& theta, const Dataset& data, double sigma0);
// Gradient of the regularised logistic loss (negative log posterior).
VectorXd logistic_loss_gradient(const VectorXd& theta, const Dataset& data, double sigma0);

// MAP by damped Newton; covariance is the inverse Hessian there. Converged
// once ||grad|| < tol * max(1, sum_i ||x_i||); throws NumericalError if that
// is not reached within max_iter.
DenseGaussian laplace_logistic(const Dataset& data, double sigma0, double tol = 1e-9,
                               int max_iter = 100);

}  // namespace lrvga
