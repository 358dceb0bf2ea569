#include "lrvga/filters.hpp"

#include <algorithm>
#include <cstdio>

#include "lrvga/errors.hpp"
#include "lrvga/log.hpp"

namespace lrvga {

namespace {

MatrixXd as_block(const VectorXd& x) { return MatrixXd(x); }

void require_dim(const GaussianBelief& belief, const Observation& obs, const char* who) {
  if (obs.dim() != belief.dim()) {
    throw DimensionError(std::string(who) + ": observation length does not match the belief");
  }
}

struct ScalarResidual {
  double f1 = 0.0;
  double f2 = 0.0;
  double norm() const { return std::max(std::abs(f1), std::abs(f2)); }
};

ScalarResidual glm_residual(double a, double nu, double a0, double nu0, double y) {
  const double k = kProbitBeta / std::sqrt(nu + kProbitBeta * kProbitBeta);
  const double sig = sigmoid(k * a);
  const double s = k * sig * (1.0 - sig);
  return {a - a0 - nu0 * (y - sig), nu - nu0 / (1.0 + s * nu0)};
}

}  // namespace

void check_divergence(const GaussianBelief& belief, Index clamped_entries) {
  if (!belief.mean.allFinite()) throw DivergenceError("mean has non-finite entries");
  const double norm = belief.mean.norm();
  if (norm > kDivergenceMeanNorm) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "mean norm %.3g exceeds the divergence limit", norm);
    throw DivergenceError(buf);
  }
  const double limit = kDivergenceClampFraction * static_cast<double>(belief.dim());
  if (static_cast<double>(clamped_entries) > limit) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%ld of %ld diagonal entries clamped",
                  static_cast<long>(clamped_entries), static_cast<long>(belief.dim()));
    throw DivergenceError(buf);
  }
}

DenseGaussian kalman_step_dense(const DenseGaussian& prior, const Observation& obs) {
  if (obs.dim() != prior.dim()) throw DimensionError("kalman_step_dense: dimension mismatch");
  const VectorXd x = obs.dense();
  const VectorXd px = prior.covariance * x;
  const double denom = 1.0 + x.dot(px);
  DenseGaussian out;
  out.mean = prior.mean + px * ((obs.y() - x.dot(prior.mean)) / denom);
  out.covariance = prior.covariance - px * px.transpose() / denom;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

GaussianBelief lrvga_linear_step(const GaussianBelief& prior, const Observation& obs,
                                 InnerLoops loops) {
  require_dim(prior, obs, "lrvga_linear_step");
  const VectorXd x = obs.dense();
  FaUpdate update = recursive_em_update(prior.precision, as_block(x), RecursionWeights(), loops);
  const VectorXd gain = woodbury_apply(update.fa, x);
  GaussianBelief out{prior.mean + gain * (obs.y() - x.dot(prior.mean)), std::move(update.fa)};
  check_divergence(out, update.clamped_entries);
  return out;
}

GlmScalarSolution solve_glm_scalars(double a0, double nu0, double y, double tol, int max_iter) {
  if (!(nu0 >= 0.0) || !std::isfinite(nu0) || !std::isfinite(a0)) {
    throw NumericalError("solve_glm_scalars: need finite a0 and nu0 >= 0");
  }
  const double b2 = kProbitBeta * kProbitBeta;
  double a = a0;
  double nu = nu0;
  ScalarResidual r = glm_residual(a, nu, a0, nu0, y);
  int it = 0;
  for (; it < max_iter && r.norm() >= tol; ++it) {
    const double k = kProbitBeta / std::sqrt(nu + b2);
    const double dk = -k / (2.0 * (nu + b2));
    const double sig = sigmoid(k * a);
    const double d1 = sig * (1.0 - sig);
    const double d2 = d1 * (1.0 - 2.0 * sig);
    const double s = k * d1;
    const double ds_da = k * k * d2;
    const double ds_dnu = dk * (d1 + k * a * d2);
    const double q = nu0 * nu0 / ((1.0 + s * nu0) * (1.0 + s * nu0));

    const double j11 = 1.0 + nu0 * d1 * k;
    const double j12 = nu0 * d1 * a * dk;
    const double j21 = q * ds_da;
    const double j22 = 1.0 + q * ds_dnu;
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || std::abs(det) < 1e-300) break;
    const double step_a = (j22 * r.f1 - j12 * r.f2) / det;
    const double step_nu = (j11 * r.f2 - j21 * r.f1) / det;

    double lambda = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, lambda *= 0.5) {
      const double a_try = a - lambda * step_a;
      const double nu_try = std::max(0.0, nu - lambda * step_nu);
      const ScalarResidual r_try = glm_residual(a_try, nu_try, a0, nu0, y);
      if (r_try.norm() < r.norm()) {
        a = a_try;
        nu = nu_try;
        r = r_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }

  GlmScalarSolution out;
  out.iterations = it;
  if (r.norm() >= tol) {
    // Damped Picard iteration on the original fixed-point form.
    log::warn("solve_glm_scalars: Newton stalled, falling back to Picard iteration");
    for (int p = 0; p < 20 * max_iter && r.norm() >= tol; ++p) {
      const double k = kProbitBeta / std::sqrt(nu + b2);
      const double sig = sigmoid(k * a);
      const double s = k * sig * (1.0 - sig);
      a = 0.5 * a + 0.5 * (a0 + nu0 * (y - sig));
      nu = nu0 / (1.0 + s * nu0);
      r = glm_residual(a, nu, a0, nu0, y);
      ++out.iterations;
    }
  }
  out.a = a;
  out.nu = nu;
  out.k = kProbitBeta / std::sqrt(nu + b2);
  out.residual = r.norm();
  out.converged = out.residual < tol;
  if (!out.converged) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "solve_glm_scalars: residual %.3g above tolerance %.3g",
                  out.residual, tol);
    log::warn(buf);
  }
  return out;
}

GlmScalarSolution solve_glm_scalars(const GaussianBelief& belief, const Observation& obs,
                                    double tol, int max_iter) {
  require_dim(belief, obs, "solve_glm_scalars");
  const VectorXd x = obs.dense();
  const double nu0 = x.dot(woodbury_apply(belief.precision, x));
  return solve_glm_scalars(x.dot(belief.mean), nu0, obs.y(), tol, max_iter);
}

GaussianBelief lrvga_logistic_step(const GaussianBelief& prior, const Observation& obs,
                                   InnerLoops loops) {
  require_dim(prior, obs, "lrvga_logistic_step");
  const VectorXd x = obs.dense();
  const VectorXd px = woodbury_apply(prior.precision, x);
  const GlmScalarSolution sol = solve_glm_scalars(x.dot(prior.mean), x.dot(px), obs.y());
  const double sig = sigmoid(sol.k * sol.a);
  const double s = sol.k * sig * (1.0 - sig);

  FaUpdate update =
      recursive_em_update(prior.precision, as_block(x * std::sqrt(s)), RecursionWeights(), loops);
  GaussianBelief out{prior.mean + px * (obs.y() - sig), std::move(update.fa)};
  check_divergence(out, update.clamped_entries);
  return out;
}

MatrixXd ggn_block(const NonlinearModel& model, const Observation& obs, const MatrixXd& samples) {
  const Index count = samples.cols();
  if (count < 1) throw std::invalid_argument("ggn_block: need at least one sample");
  if (samples.rows() != obs.dim()) throw DimensionError("ggn_block: sample length mismatch");
  const Index m = model.output_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(count));
  MatrixXd block(samples.rows(), count * m);
  for (Index i = 0; i < count; ++i) {
    const VectorXd theta = samples.col(i);
    block.middleCols(i * m, m).noalias() =
        model.jacobian(theta, obs) * model.output_covariance_sqrt(theta, obs) * scale;
  }
  return block;
}

namespace {

VectorXd mean_gradient(const NonlinearModel& model, const Observation& obs,
                       const MatrixXd& samples) {
  VectorXd g = VectorXd::Zero(samples.rows());
  for (Index i = 0; i < samples.cols(); ++i) {
    g += model.grad_log_likelihood(samples.col(i), obs);
  }
  return g / static_cast<double>(samples.cols());
}

}  // namespace

GaussianBelief lrvga_nonlinear_step(const GaussianBelief& prior, const Observation& obs,
                                    const NonlinearModel& model, const NonlinearOptions& options,
                                    EnsembleSampler& sampler) {
  require_dim(prior, obs, "lrvga_nonlinear_step");
  if (options.hessian_samples < 1 || options.gradient_samples < 1) {
    throw ConfigError("lrvga_nonlinear_step: sample counts must be positive");
  }
  const Index k_hess = options.hessian_samples;
  const Index k_grad = options.gradient_samples;
  const Index k_max = std::max(k_hess, k_grad);

  sampler.reset(prior.precision);
  const EnsembleSampler::Noise noise = sampler.draw_noise(k_max);
  const MatrixXd theta = sampler.transform(prior.mean, noise);

  FaUpdate half = recursive_em_update(prior.precision,
                                      ggn_block(model, obs, theta.leftCols(k_hess)),
                                      RecursionWeights(), options.loops);
  GaussianBelief mid{prior.mean + woodbury_apply(half.fa, mean_gradient(model, obs,
                                                                        theta.leftCols(k_grad))),
                     half.fa};
  check_divergence(mid, half.clamped_entries);
  if (options.scheme == MirrorProxScheme::kExplicit) return mid;

  sampler.reset(mid.precision);
  const MatrixXd theta_mid = options.fresh_samples ? sampler.draw(mid.mean, k_max)
                                                   : sampler.transform(mid.mean, noise);
  const VectorXd grad = mean_gradient(model, obs, theta_mid.leftCols(k_grad));

  if (options.scheme == MirrorProxScheme::kMirrorProxSkipCov) {
    GaussianBelief out{prior.mean + woodbury_apply(mid.precision, grad), std::move(mid.precision)};
    check_divergence(out, half.clamped_entries);
    return out;
  }

  FaUpdate full = recursive_em_update(prior.precision,
                                      ggn_block(model, obs, theta_mid.leftCols(k_hess)),
                                      RecursionWeights(), options.loops);
  GaussianBelief out{prior.mean + woodbury_apply(full.fa, grad), std::move(full.fa)};
  check_divergence(out, full.clamped_entries);
  return out;
}

VectorXd expectation_by_sampling(const std::function<VectorXd(const VectorXd&)>& f,
                                 const GaussianBelief& belief, Index count,
                                 EnsembleSampler& sampler) {
  sampler.reset(belief.precision);
  const MatrixXd samples = sampler.draw(belief.mean, count);
  VectorXd total = f(samples.col(0));
  for (Index i = 1; i < count; ++i) total += f(samples.col(i));
  return total / static_cast<double>(count);
}

}  // namespace lrvga
