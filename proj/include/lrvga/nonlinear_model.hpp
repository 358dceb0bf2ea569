#pragma once

#include "lrvga/gaussian.hpp"

namespace lrvga {

// Exponential-family observation model with natural parameter eta = h(theta, x).
// Implementations supply h, its Jacobian, Cov(y | theta) and the
// log-likelihood with its gradient.
class NonlinearModel {
 public:
  virtual ~NonlinearModel() = default;

  virtual Index output_dim() const { return 1; }
  virtual VectorXd natural_parameter(const VectorXd& theta, const Observation& obs) const = 0;
  // d x m matrix dh/dtheta.
  virtual MatrixXd jacobian(const VectorXd& theta, const Observation& obs) const = 0;
  // m x m Cov(y | theta).
  virtual MatrixXd output_covariance(const VectorXd& theta, const Observation& obs) const = 0;
  // Symmetric square root of Cov(y | theta); throws NumericalError when the
  // covariance is not PSD.
  virtual MatrixXd output_covariance_sqrt(const VectorXd& theta, const Observation& obs) const;

  virtual double log_likelihood(const VectorXd& theta, const Observation& obs) const = 0;
  virtual VectorXd grad_log_likelihood(const VectorXd& theta, const Observation& obs) const = 0;
};

double sigmoid(double z);
// log sigma(z), stable for large |z|.
double log_sigmoid(double z);

// Bernoulli label with P(y = 1) = sigma(theta^T x); labels in {0, 1}.
class LogisticModel final : public NonlinearModel {
 public:
  VectorXd natural_parameter(const VectorXd& theta, const Observation& obs) const override;
  MatrixXd jacobian(const VectorXd& theta, const Observation& obs) const override;
  MatrixXd output_covariance(const VectorXd& theta, const Observation& obs) const override;
  MatrixXd output_covariance_sqrt(const VectorXd& theta, const Observation& obs) const override;
  double log_likelihood(const VectorXd& theta, const Observation& obs) const override;
  VectorXd grad_log_likelihood(const VectorXd& theta, const Observation& obs) const override;
};

// y = theta^T x + N(0, 1).
class LinearGaussianModel final : public NonlinearModel {
 public:
  VectorXd natural_parameter(const VectorXd& theta, const Observation& obs) const override;
  MatrixXd jacobian(const VectorXd& theta, const Observation& obs) const override;
  MatrixXd output_covariance(const VectorXd& theta, const Observation& obs) const override;
  MatrixXd output_covariance_sqrt(const VectorXd& theta, const Observation& obs) const override;
  double log_likelihood(const VectorXd& theta, const Observation& obs) const override;
  VectorXd grad_log_likelihood(const VectorXd& theta, const Observation& obs) const override;
};

}  // namespace lrvga
