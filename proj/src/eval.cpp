#include "lrvga/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lrvga/errors.hpp"
#include "lrvga/nonlinear_model.hpp"

namespace lrvga {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::LLT<MatrixXd> factor_spd(const MatrixXd& matrix, const char* who) {
  Eigen::LLT<MatrixXd> llt(matrix);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(who) + ": matrix is not SPD");
  return llt;
}

double llt_log_det(const Eigen::LLT<MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

KlEstimate finish_estimate(const VectorXd& logpost, double neg_entropy, bool normalized) {
  if (!logpost.allFinite()) throw NumericalError("mc_kl_to_posterior: non-finite log density");
  const Index k = logpost.size();
  const double mean = logpost.mean();
  const double var = (logpost.array() - mean).square().sum() / static_cast<double>(k - 1);
  KlEstimate out;
  out.value = neg_entropy - mean;
  out.std_error = std::sqrt(var / static_cast<double>(k));
  out.n_samples = k;
  out.normalized = normalized;
  return out;
}

void require_samples(Index count) {
  if (count < 2) throw std::invalid_argument("mc_kl_to_posterior: need at least two samples");
}

}  // namespace

double spd_log_det(const MatrixXd& matrix) {
  return llt_log_det(factor_spd(matrix, "spd_log_det"));
}

double gaussian_kl(const DenseGaussian& q, const DenseGaussian& target) {
  if (q.dim() != target.dim()) throw DimensionError("gaussian_kl: dimension mismatch");
  const auto lq = factor_spd(q.covariance, "gaussian_kl");
  const auto lt = factor_spd(target.covariance, "gaussian_kl");
  const double trace = lt.solve(q.covariance).trace();
  const VectorXd diff = target.mean - q.mean;
  const double maha = diff.dot(lt.solve(diff));
  const double d = static_cast<double>(q.dim());
  return 0.5 * (trace + maha - d + llt_log_det(lt) - llt_log_det(lq));
}

double gaussian_kl(const GaussianBelief& q, const DenseGaussian& target) {
  if (q.dim() != target.dim()) throw DimensionError("gaussian_kl: dimension mismatch");
  const auto lt = factor_spd(target.covariance, "gaussian_kl");
  const MatrixXd target_precision = lt.solve(MatrixXd::Identity(q.dim(), q.dim()));
  // Tr(Sigma_t^{-1} P) with P = (W W^T + Psi)^{-1}.
  const double trace = woodbury_apply(q.precision, target_precision).trace();
  const VectorXd diff = target.mean - q.mean;
  const double maha = diff.dot(lt.solve(diff));
  const double d = static_cast<double>(q.dim());
  return 0.5 * (trace + maha - d + llt_log_det(lt) + log_det(q.precision));
}

double covariance_kl(const MatrixXd& target, const FaPrecision& fa,
                     std::optional<double> target_log_det) {
  if (target.rows() != fa.dim() || target.cols() != fa.dim()) {
    throw DimensionError("covariance_kl: dimension mismatch");
  }
  const double ld = target_log_det ? *target_log_det : spd_log_det(target);
  const double trace = woodbury_apply(fa, target).trace();
  return 0.5 * (trace - static_cast<double>(fa.dim()) + log_det(fa) - ld);
}

BatchLogDensity pointwise(std::function<double(const VectorXd&)> f) {
  return [f = std::move(f)](const MatrixXd& samples) {
    VectorXd out(samples.cols());
    for (Index i = 0; i < samples.cols(); ++i) out(i) = f(samples.col(i));
    return out;
  };
}

KlEstimate mc_kl_to_posterior(const GaussianBelief& q, const BatchLogDensity& logpost,
                              Index count, std::uint64_t seed, bool normalized) {
  require_samples(count);
  EnsembleSampler sampler(q.precision, seed);
  const MatrixXd samples = sampler.draw(q.mean, count);
  const double d = static_cast<double>(q.dim());
  const double neg_entropy = 0.5 * log_det(q.precision) - 0.5 * d * (1.0 + kLog2Pi);
  return finish_estimate(logpost(samples), neg_entropy, normalized);
}

KlEstimate mc_kl_to_posterior(const DenseGaussian& q, const BatchLogDensity& logpost,
                              Index count, std::uint64_t seed, bool normalized) {
  require_samples(count);
  std::mt19937_64 rng(seed);
  const MatrixXd samples = draw_dense_reference(q.mean, q.covariance, count, rng);
  const double d = static_cast<double>(q.dim());
  const double neg_entropy = -0.5 * spd_log_det(q.covariance) - 0.5 * d * (1.0 + kLog2Pi);
  return finish_estimate(logpost(samples), neg_entropy, normalized);
}

Dataset Dataset::from(std::span<const Observation> observations, Index dim) {
  Dataset data;
  data.inputs.resize(static_cast<Index>(observations.size()), dim);
  data.labels.resize(static_cast<Index>(observations.size()));
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Observation& obs = observations[i];
    if (obs.dim() != dim) throw DimensionError("Dataset::from: observation length mismatch");
    data.inputs.row(static_cast<Index>(i)) = obs.dense().transpose();
    data.labels(static_cast<Index>(i)) = obs.y();
  }
  return data;
}

double log_prior(const VectorXd& theta, double sigma0) {
  const double d = static_cast<double>(theta.size());
  return -0.5 * theta.squaredNorm() / (sigma0 * sigma0) -
         0.5 * d * (kLog2Pi + 2.0 * std::log(sigma0));
}

VectorXd logposterior_linear(const MatrixXd& thetas, const Dataset& data, double sigma0) {
  if (thetas.rows() != data.dim()) throw DimensionError("logposterior_linear: length mismatch");
  MatrixXd resid = data.inputs * thetas;
  resid = (-resid).colwise() + data.labels;
  const double n = static_cast<double>(data.size());
  VectorXd out(thetas.cols());
  for (Index j = 0; j < thetas.cols(); ++j) {
    out(j) = log_prior(thetas.col(j), sigma0) - 0.5 * resid.col(j).squaredNorm() - 0.5 * n * kLog2Pi;
  }
  return out;
}

VectorXd logposterior_logistic(const MatrixXd& thetas, const Dataset& data, double sigma0) {
  if (thetas.rows() != data.dim()) throw DimensionError("logposterior_logistic: length mismatch");
  const MatrixXd z = data.inputs * thetas;
  VectorXd out(thetas.cols());
  for (Index j = 0; j < thetas.cols(); ++j) {
    double total = log_prior(thetas.col(j), sigma0);
    for (Index i = 0; i < z.rows(); ++i) {
      const double y = data.labels(i);
      total += y * log_sigmoid(z(i, j)) + (1.0 - y) * log_sigmoid(-z(i, j));
    }
    out(j) = total;
  }
  return out;
}

double logposterior_linear(const VectorXd& theta, const Dataset& data, double sigma0) {
  return logposterior_linear(MatrixXd(theta), data, sigma0)(0);
}

double logposterior_logistic(const VectorXd& theta, const Dataset& data, double sigma0) {
  return logposterior_logistic(MatrixXd(theta), data, sigma0)(0);
}

DenseGaussian linear_posterior(const Dataset& data, double sigma0) {
  MatrixXd precision = data.inputs.transpose() * data.inputs;
  precision.diagonal().array() += 1.0 / (sigma0 * sigma0);
  const auto llt = factor_spd(precision, "linear_posterior");
  DenseGaussian out;
  out.mean = llt.solve(data.inputs.transpose() * data.labels);
  out.covariance = llt.solve(MatrixXd::Identity(data.dim(), data.dim()));
  return out;
}

MatrixXd logistic_hessian(const VectorXd& theta, const Dataset& data, double sigma0) {
  const VectorXd z = data.inputs * theta;
  VectorXd weights(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    const double s = sigmoid(z(i));
    weights(i) = s * (1.0 - s);
  }
  MatrixXd h = data.inputs.transpose() * weights.asDiagonal() * data.inputs;
  h.diagonal().array() += 1.0 / (sigma0 * sigma0);
  return h;
}

VectorXd logistic_loss_gradient(const VectorXd& theta, const Dataset& data, double sigma0) {
  const VectorXd z = data.inputs * theta;
  VectorXd resid(z.size());
  for (Index i = 0; i < z.size(); ++i) resid(i) = sigmoid(z(i)) - data.labels(i);
  return data.inputs.transpose() * resid + theta / (sigma0 * sigma0);
}

DenseGaussian laplace_logistic(const Dataset& data, double sigma0, double tol, int max_iter) {
  const Index d = data.dim();
  VectorXd theta = VectorXd::Zero(d);
  auto loss = [&](const VectorXd& t) { return -logposterior_logistic(t, data, sigma0); };
  double current = loss(theta);
  VectorXd grad = logistic_loss_gradient(theta, data, sigma0);
  // The gradient is a sum of N terms, so its rounding floor grows with the
  // data; tol is relative to sum ||x_i|| once that exceeds 1.
  const double scale = std::max(1.0, data.inputs.rowwise().norm().sum());
  int it = 0;
  while (grad.norm() >= tol * scale) {
    if (++it > max_iter) throw NumericalError("laplace_logistic: Newton did not converge");
    const VectorXd step = factor_spd(logistic_hessian(theta, data, sigma0), "laplace_logistic")
                              .solve(grad);
    double lambda = 1.0;
    VectorXd next = theta - step;
    double value = loss(next);
    // Armijo backtracking; near the optimum the full step always passes.
    while (value > current - 1e-4 * lambda * grad.dot(step) && lambda > 1e-10) {
      lambda *= 0.5;
      next = theta - lambda * step;
      value = loss(next);
    }
    if (value > current) {
      // Loss differences are below rounding; keep the Newton point if it
      // lowers the gradient.
      const VectorXd g_next = logistic_loss_gradient(theta - step, data, sigma0);
      if (g_next.norm() >= grad.norm()) throw NumericalError("laplace_logistic: line search failed");
      next = theta - step;
      value = loss(next);
    }
    theta = next;
    current = value;
    grad = logistic_loss_gradient(theta, data, sigma0);
  }
  const auto llt = factor_spd(logistic_hessian(theta, data, sigma0), "laplace_logistic");
  return DenseGaussian{theta, llt.solve(MatrixXd::Identity(d, d))};
}

}  // namespace lrvga
