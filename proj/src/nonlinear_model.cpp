#include "lrvga/nonlinear_model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

#include "lrvga/errors.hpp"

namespace lrvga {

MatrixXd NonlinearModel::output_covariance_sqrt(const VectorXd& theta,
                                                const Observation& obs) const {
  const MatrixXd cov = output_covariance(theta, obs);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  const VectorXd& values = eig.eigenvalues();
  const double slack = 1e-12 * std::max(1.0, values.cwiseAbs().maxCoeff());
  if (values.minCoeff() < -slack) throw NumericalError("model covariance is not PSD");
  return eig.eigenvectors() * values.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

VectorXd LogisticModel::natural_parameter(const VectorXd& theta, const Observation& obs) const {
  return VectorXd::Constant(1, obs.dot(theta));
}

MatrixXd LogisticModel::jacobian(const VectorXd&, const Observation& obs) const {
  return obs.dense();
}

MatrixXd LogisticModel::output_covariance(const VectorXd& theta, const Observation& obs) const {
  const double s = sigmoid(obs.dot(theta));
  return MatrixXd::Constant(1, 1, s * (1.0 - s));
}

MatrixXd LogisticModel::output_covariance_sqrt(const VectorXd& theta,
                                               const Observation& obs) const {
  const double s = sigmoid(obs.dot(theta));
  return MatrixXd::Constant(1, 1, std::sqrt(s * (1.0 - s)));
}

double LogisticModel::log_likelihood(const VectorXd& theta, const Observation& obs) const {
  const double z = obs.dot(theta);
  const double y = obs.y();
  return y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z);
}

VectorXd LogisticModel::grad_log_likelihood(const VectorXd& theta, const Observation& obs) const {
  return obs.dense() * (obs.y() - sigmoid(obs.dot(theta)));
}

VectorXd LinearGaussianModel::natural_parameter(const VectorXd& theta,
                                                const Observation& obs) const {
  return VectorXd::Constant(1, obs.dot(theta));
}

MatrixXd LinearGaussianModel::jacobian(const VectorXd&, const Observation& obs) const {
  return obs.dense();
}

MatrixXd LinearGaussianModel::output_covariance(const VectorXd&, const Observation&) const {
  return MatrixXd::Identity(1, 1);
}

MatrixXd LinearGaussianModel::output_covariance_sqrt(const VectorXd&, const Observation&) const {
  return MatrixXd::Identity(1, 1);
}

double LinearGaussianModel::log_likelihood(const VectorXd& theta, const Observation& obs) const {
  const double r = obs.y() - obs.dot(theta);
  return -0.5 * r * r - 0.5 * std::log(2.0 * std::numbers::pi);
}

VectorXd LinearGaussianModel::grad_log_likelihood(const VectorXd& theta,
                                                  const Observation& obs) const {
  return obs.dense() * (obs.y() - obs.dot(theta));
}

}  // namespace lrvga
