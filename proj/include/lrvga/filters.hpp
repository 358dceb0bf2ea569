#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include "lrvga/gaussian.hpp"
#include "lrvga/nonlinear_model.hpp"
#include "lrvga/sampler.hpp"

namespace lrvga {

// sqrt(8 / pi): matches the slope of the probit approximation to sigma at 0.
inline const double kProbitBeta = std::sqrt(8.0 / std::numbers::pi);

// A step diverges when ||mu|| exceeds this or more than 10% of the diagonal
// had to be clamped.
inline constexpr double kDivergenceMeanNorm = 1e8;
inline constexpr double kDivergenceClampFraction = 0.1;

// Throws DivergenceError if the belief is non-finite or one of the limits
// above is crossed.
void check_divergence(const GaussianBelief& belief, Index clamped_entries);

// Exact Kalman update for y = theta^T x + N(0, 1) on an explicit covariance
// (Sherman-Morrison). Reference for small d.
DenseGaussian kalman_step_dense(const DenseGaussian& prior, const Observation& obs);

// Linear-Gaussian step: precision by recursive EM on (prev, x), mean
//   mu + P_t x (y - x^T mu).
GaussianBelief lrvga_linear_step(const GaussianBelief& prior, const Observation& obs,
                                 InnerLoops loops);

// Implicit scalars of the logistic step:
//   nu = nu0 / (1 + s nu0),  a = a0 + nu0 (y - sigma(k a)),
//   k = beta / sqrt(nu + beta^2),  s = k sigma'(k a).
struct GlmScalarSolution {
  double a = 0.0;
  double nu = 0.0;
  double k = 1.0;
  double residual = 0.0;  // max |F| at the returned point
  int iterations = 0;
  bool converged = false;
};

// Damped Newton on the 2x2 system with a Picard fallback (warns when the
// fallback is needed or when neither reaches tol).
GlmScalarSolution solve_glm_scalars(double a0, double nu0, double y, double tol = 1e-10,
                                    int max_iter = 50);
// a0 = x^T mu, nu0 = x^T P x.
GlmScalarSolution solve_glm_scalars(const GaussianBelief& belief, const Observation& obs,
                                    double tol = 1e-10, int max_iter = 50);

// Logistic step: mean mu + P_{t-1} x (y - sigma(k a)), precision by recursive
// EM on the block x sqrt(s).
GaussianBelief lrvga_logistic_step(const GaussianBelief& prior, const Observation& obs,
                                   InnerLoops loops);

// d x (K m) block whose columns are J(theta_i) Cov^{1/2}(theta_i) / sqrt(K)
// over the columns theta_i of `samples`.
MatrixXd ggn_block(const NonlinearModel& model, const Observation& obs, const MatrixXd& samples);

enum class MirrorProxScheme { kExplicit, kMirrorProxFull, kMirrorProxSkipCov };

struct NonlinearOptions {
  Index hessian_samples = 10;
  Index gradient_samples = 10;
  InnerLoops loops;
  MirrorProxScheme scheme = MirrorProxScheme::kMirrorProxSkipCov;
  // Draw new noise at the extrapolated belief; otherwise push the first
  // stage's noise through it.
  bool fresh_samples = true;
};

// Sampling-based step for a generic model. The sampler's RNG stream is
// consumed; its factors are reset to whichever belief is sampled.
GaussianBelief lrvga_nonlinear_step(const GaussianBelief& prior, const Observation& obs,
                                    const NonlinearModel& model, const NonlinearOptions& options,
                                    EnsembleSampler& sampler);

// Monte Carlo mean of f over K draws from the belief.
VectorXd expectation_by_sampling(const std::function<VectorXd(const VectorXd&)>& f,
                                 const GaussianBelief& belief, Index count,
                                 EnsembleSampler& sampler);

}  // namespace lrvga
