#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lrvga/errors.hpp"
#include "lrvga/filters.hpp"
#include "lrvga/log.hpp"
#include "support/oracles.hpp"

using namespace lrvga;

namespace {

// Tight inner loops so that p = d runs reproduce exact updates.
const InnerLoops kConverged{200000, 1e-14};

GaussianBelief exact_prior(Index d, double sigma0) {
  // p = d factors of sigma0^{-2} I with a nonzero W.
  MatrixXd w = MatrixXd::Identity(d, d) * (0.1 / sigma0);
  return GaussianBelief{VectorXd::Zero(d),
                        FaPrecision(w, VectorXd::Constant(d, 0.99 / (sigma0 * sigma0)))};
}

// Scalar oracle for the logistic implicit equations: for fixed a, nu solves
// nu = nu0 / (1 + s nu0) by bisection; then a solves
// a - a0 - nu0 (y - sigma(k a)) = 0 by bisection.
double nu_given_a(double a, double nu0) {
  auto g = [&](double nu) {
    const double k = oracle::kBeta / std::sqrt(nu + oracle::kBeta * oracle::kBeta);
    const double sg = oracle::sigmoid(k * a);
    return nu - nu0 / (1.0 + k * sg * (1.0 - sg) * nu0);
  };
  double lo = 0.0, hi = nu0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

std::pair<double, double> bisect_scalars(double a0, double nu0, double y) {
  auto f = [&](double a) {
    const double nu = nu_given_a(a, nu0);
    const double k = oracle::kBeta / std::sqrt(nu + oracle::kBeta * oracle::kBeta);
    return a - a0 - nu0 * (y - oracle::sigmoid(k * a));
  };
  double lo = a0 - nu0 - 1.0, hi = a0 + nu0 + 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  const double a = 0.5 * (lo + hi);
  return {a, nu_given_a(a, nu0)};
}

// E[f(a)] for a ~ N(m, v) by the trapezoid rule on +-12 sd.
template <class F>
double gauss_expect(F f, double m, double v) {
  const double sd = std::sqrt(v);
  const int n = 4001;
  const double h = 24.0 / (n - 1);
  double total = 0.0, norm = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = -12.0 + i * h;
    const double w = std::exp(-0.5 * z * z);
    total += w * f(m + sd * z);
    norm += w;
  }
  return total / norm;
}

// Two-stage extragradient step for the logistic model with exact Gaussian
// expectations; the second stage keeps the first-stage covariance.
DenseGaussian skip_cov_by_quadrature(const DenseGaussian& prior, const VectorXd& x, double y) {
  auto curv = [](double a) { const double s = oracle::sigmoid(a); return s * (1.0 - s); };
  auto resid = [y](double a) { return y - oracle::sigmoid(a); };
  const double v0 = x.dot(prior.covariance * x);
  const double m0 = x.dot(prior.mean);
  const MatrixXd prec1 = oracle::inverse(prior.covariance) + gauss_expect(curv, m0, v0) * x * x.transpose();
  const MatrixXd cov1 = oracle::inverse(prec1);
  const VectorXd mu1 = prior.mean + cov1 * x * gauss_expect(resid, m0, v0);
  const VectorXd mu = prior.mean + cov1 * x * gauss_expect(resid, x.dot(mu1), x.dot(cov1 * x));
  return DenseGaussian{mu, cov1};
}

}  // namespace

TEST_SUITE("filters") {

TEST_CASE("dense Kalman step, scalar case") {
  const DenseGaussian prior{VectorXd::Zero(1), MatrixXd::Ones(1, 1)};
  const DenseGaussian post = kalman_step_dense(prior, make_observation(VectorXd::Ones(1), 1.0));
  CHECK(post.covariance(0, 0) == doctest::Approx(0.5));
  CHECK(post.mean(0) == doctest::Approx(0.5));

  const DenseGaussian same = kalman_step_dense(post, make_observation(VectorXd::Zero(1), 3.0));
  CHECK(same.mean(0) == post.mean(0));
  CHECK(same.covariance(0, 0) == post.covariance(0, 0));
}

TEST_CASE("dense Kalman recursion equals the batch posterior") {
  std::mt19937_64 rng(1);
  const Index d = 5, n = 40;
  const MatrixXd x = oracle::gaussian_matrix(n, d, rng);
  const VectorXd y = oracle::gaussian_vector(n, rng);
  DenseGaussian b{VectorXd::Zero(d), MatrixXd::Identity(d, d) * 4.0};
  for (Index t = 0; t < n; ++t) b = kalman_step_dense(b, make_observation(VectorXd(x.row(t)), y(t)));
  const DenseGaussian want = oracle::ridge_posterior(x, y, 2.0);
  CHECK(oracle::rel_err(b.mean, want.mean) < 1e-10);
  CHECK(oracle::rel_err(b.covariance, want.covariance) < 1e-10);
}

TEST_CASE("linear step ignores a zero input") {
  std::mt19937_64 rng(2);
  const GaussianBelief prior{oracle::gaussian_vector(6, rng), oracle::random_fa(6, 2, rng)};
  const GaussianBelief post = lrvga_linear_step(prior, make_observation(VectorXd::Zero(6), 2.0), InnerLoops{});
  CHECK((post.mean - prior.mean).norm() == 0.0);
  CHECK(oracle::rel_err(post.precision.dense(), prior.precision.dense()) < 1e-10);
}

TEST_CASE("linear step by hand, d = 2, p = 1") {
  const FaPrecision fa(MatrixXd::Constant(2, 1, 0.3), VectorXd::Constant(2, 0.9));
  const GaussianBelief prior{VectorXd::Constant(2, 0.1), fa};
  VectorXd x(2);
  x << 1.0, -2.0;
  const double y = 0.7;
  const GaussianBelief post = lrvga_linear_step(prior, make_observation(x, y), InnerLoops{3, 0.0});

  MatrixXd w = fa.loadings();
  VectorXd psi = fa.diagonal();
  const MatrixXd s = fa.dense() + x * x.transpose();
  for (int k = 0; k < 3; ++k) oracle::textbook_em(w, psi, s);
  const MatrixXd prec = oracle::dense(w, psi);
  const VectorXd mean = prior.mean + oracle::inverse(prec) * x * (y - x.dot(prior.mean));
  CHECK(oracle::rel_err(post.precision.dense(), prec) < 1e-12);
  CHECK(oracle::rel_err(post.mean, mean) < 1e-12);
}

TEST_CASE("linear filter at p = d tracks the Kalman filter") {
  std::mt19937_64 rng(3);
  const Index d = 10;
  GaussianBelief f = exact_prior(d, 1.0);
  DenseGaussian k = to_dense(f);
  double worst_mu = 0.0, worst_p = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Observation obs = make_observation(oracle::gaussian_vector(d, rng), oracle::gaussian_vector(1, rng)(0));
    f = lrvga_linear_step(f, obs, kConverged);
    k = kalman_step_dense(k, obs);
    worst_mu = std::max(worst_mu, oracle::rel_err(f.mean, k.mean));
    worst_p = std::max(worst_p, oracle::rel_err(oracle::inverse(f.precision.dense()), k.covariance));
  }
  CHECK(worst_mu < 1e-6);
  CHECK(worst_p < 1e-6);
}

TEST_CASE("information only accumulates at p = d") {
  std::mt19937_64 rng(4);
  const Index d = 6;
  GaussianBelief f = exact_prior(d, 1.0);
  for (int t = 0; t < 30; ++t) {
    const VectorXd x = oracle::gaussian_vector(d, rng);
    const double before = x.dot(oracle::inverse(f.precision.dense()) * x);
    f = lrvga_linear_step(f, make_observation(x, 0.5), kConverged);
    CHECK(x.dot(oracle::inverse(f.precision.dense()) * x) <= before + 1e-6);
  }
}

TEST_CASE("sparse and dense inputs give the same trajectory") {
  std::mt19937_64 rng(5);
  const Index d = 8;
  GaussianBelief a{VectorXd::Zero(d), init_isotropic_prior(d, 3, 1.0, 0.01, rng)};
  GaussianBelief b = a;
  for (int t = 0; t < 20; ++t) {
    VectorXd x = oracle::gaussian_vector(d, rng);
    x(t % d) = 0.0;
    const double y = static_cast<double>(t % 2);
    const SparseVector sx = x.sparseView();
    a = lrvga_logistic_step(a, make_observation(x, y), InnerLoops{});
    b = lrvga_logistic_step(b, make_observation(sx, y), InnerLoops{});
  }
  CHECK((a.mean - b.mean).norm() <= 1e-12 * a.mean.norm());
  CHECK(oracle::rel_err(a.precision.dense(), b.precision.dense()) < 1e-12);
}

TEST_CASE("probit constant") {
  CHECK(kProbitBeta == doctest::Approx(1.59577).epsilon(1e-5));
}

TEST_CASE("GLM scalars for a zero input") {
  const GlmScalarSolution s = solve_glm_scalars(0.4, 0.0, 1.0);
  CHECK(s.a == 0.4);
  CHECK(s.nu == 0.0);
  CHECK(s.k == doctest::Approx(1.0));
  CHECK(s.converged);
}

TEST_CASE("GLM scalars match a bisection oracle") {
  std::mt19937_64 rng(6);
  const Index d = 5;
  for (int rep = 0; rep < 50; ++rep) {
    const GaussianBelief b{oracle::gaussian_vector(d, rng), oracle::random_fa(d, 2, rng, 0.5)};
    const VectorXd x = 2.0 * oracle::gaussian_vector(d, rng);
    const double y = rep % 2;
    const Observation obs = make_observation(x, y);
    const GlmScalarSolution s = solve_glm_scalars(b, obs);
    CHECK(s.converged);
    CHECK(s.residual < 1e-10);
    CHECK(s.k > 0.0);
    CHECK(s.k <= 1.0);
    CHECK(s.k == doctest::Approx(oracle::kBeta / std::sqrt(s.nu + oracle::kBeta * oracle::kBeta)));
    const double nu0 = x.dot(oracle::inverse(b.precision.dense()) * x);
    const auto [a, nu] = bisect_scalars(x.dot(b.mean), nu0, y);
    CHECK(std::abs(s.a - a) < 1e-8 * std::max(1.0, std::abs(a)));
    CHECK(std::abs(s.nu - nu) < 1e-8 * std::max(1.0, nu));
  }
}

TEST_CASE("GLM scalars survive extreme inputs") {
  log::set_quiet(true);
  for (double nu0 : {1e-8, 1.0, 1e3, 1e6}) {
    for (double a0 : {-50.0, 0.0, 50.0}) {
      for (double y : {0.0, 1.0}) {
        const GlmScalarSolution s = solve_glm_scalars(a0, nu0, y);
        CHECK(std::isfinite(s.a));
        CHECK(s.nu >= 0.0);
        CHECK(s.nu <= nu0);
        CHECK(s.k > 0.0);
        CHECK(s.k <= 1.0);
      }
    }
  }
  log::set_quiet(false);
  CHECK_THROWS_AS(solve_glm_scalars(0.0, -1.0, 1.0), NumericalError);
}

TEST_CASE("logistic step ignores a zero input") {
  std::mt19937_64 rng(7);
  const GaussianBelief prior{oracle::gaussian_vector(5, rng), oracle::random_fa(5, 2, rng)};
  const GaussianBelief post =
      lrvga_logistic_step(prior, make_observation(VectorXd::Zero(5), 1.0), InnerLoops{});
  CHECK((post.mean - prior.mean).norm() == 0.0);
  CHECK(oracle::rel_err(post.precision.dense(), prior.precision.dense()) < 1e-10);
}

TEST_CASE("logistic filter at p = d tracks the dense implicit update") {
  std::mt19937_64 rng(8);
  const Index d = 5;
  const VectorXd theta = oracle::gaussian_vector(d, rng);
  GaussianBelief f = exact_prior(d, 2.0);
  DenseGaussian ref = to_dense(f);
  std::bernoulli_distribution coin;
  for (int t = 0; t < 50; ++t) {
    const VectorXd x = oracle::gaussian_vector(d, rng);
    const double y = std::bernoulli_distribution(oracle::sigmoid(x.dot(theta)))(rng) ? 1.0 : 0.0;
    f = lrvga_logistic_step(f, make_observation(x, y), kConverged);
    ref = oracle::implicit_logistic_step(ref, x, y);
  }
  CHECK(oracle::rel_err(f.mean, ref.mean) < 1e-4);
  CHECK(oracle::rel_err(oracle::inverse(f.precision.dense()), ref.covariance) < 1e-4);
}

TEST_CASE("GGN block for the logistic model") {
  std::mt19937_64 rng(9);
  const LogisticModel model;
  const Index d = 6, k = 7;
  const VectorXd x = oracle::gaussian_vector(d, rng);
  const Observation obs = make_observation(x, 1.0);
  const MatrixXd thetas = oracle::gaussian_matrix(d, k, rng);
  const MatrixXd block = ggn_block(model, obs, thetas);
  REQUIRE(block.cols() == k);
  MatrixXd fisher = MatrixXd::Zero(d, d);
  for (Index i = 0; i < k; ++i) {
    const double s = oracle::sigmoid(x.dot(thetas.col(i)));
    const VectorXd c = x * std::sqrt(s * (1.0 - s));
    CHECK(oracle::rel_err(block.col(i) * std::sqrt(double(k)), c) < 1e-14);
    fisher += s * (1.0 - s) * x * x.transpose() / double(k);
  }
  CHECK(oracle::rel_err(block * block.transpose(), fisher) < 1e-12);

  // At a single theta the block reproduces the analytic expected Hessian.
  const VectorXd th = oracle::gaussian_vector(d, rng);
  const MatrixXd one = ggn_block(model, obs, MatrixXd(th));
  const double s = oracle::sigmoid(x.dot(th));
  CHECK(oracle::rel_err(one * one.transpose(), s * (1.0 - s) * x * x.transpose()) < 1e-12);
}

TEST_CASE("GGN block for the linear-Gaussian model") {
  std::mt19937_64 rng(10);
  const LinearGaussianModel model;
  const VectorXd x = oracle::gaussian_vector(4, rng);
  const MatrixXd block = ggn_block(model, make_observation(x, 0.0), oracle::gaussian_matrix(4, 5, rng));
  CHECK(oracle::rel_err(block * block.transpose(), x * x.transpose()) < 1e-13);
}

TEST_CASE("model derivatives match finite differences") {
  std::mt19937_64 rng(11);
  const LogisticModel logistic;
  const LinearGaussianModel linear;
  const VectorXd x = oracle::gaussian_vector(4, rng);
  const VectorXd th = 0.5 * oracle::gaussian_vector(4, rng);
  for (const NonlinearModel* m : std::vector<const NonlinearModel*>{&logistic, &linear}) {
    const Observation obs = make_observation(x, 1.0);
    const VectorXd g = m->grad_log_likelihood(th, obs);
    for (Index i = 0; i < 4; ++i) {
      VectorXd e = VectorXd::Zero(4);
      e(i) = 1e-6;
      const double fd = (m->log_likelihood(th + e, obs) - m->log_likelihood(th - e, obs)) / 2e-6;
      CHECK(g(i) == doctest::Approx(fd).epsilon(1e-6));
    }
    CHECK(oracle::rel_err(m->jacobian(th, obs), MatrixXd(x)) < 1e-15);
  }
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
}

TEST_CASE("full mirror prox is idempotent on a linear model") {
  std::mt19937_64 rng(12);
  const LinearGaussianModel model;
  const GaussianBelief prior{oracle::gaussian_vector(6, rng), oracle::random_fa(6, 3, rng)};
  const Observation obs = make_observation(oracle::gaussian_vector(6, rng), 0.3);
  NonlinearOptions opt;
  opt.scheme = MirrorProxScheme::kExplicit;
  EnsembleSampler s1(prior.precision, 1), s2(prior.precision, 1);
  const GaussianBelief explicit_step = lrvga_nonlinear_step(prior, obs, model, opt, s1);
  opt.scheme = MirrorProxScheme::kMirrorProxFull;
  const GaussianBelief full = lrvga_nonlinear_step(prior, obs, model, opt, s2);
  CHECK(oracle::rel_err(full.precision.dense(), explicit_step.precision.dense()) < 1e-12);
}

TEST_CASE("mirror prox with many samples matches exact expectations") {
  std::mt19937_64 rng(13);
  const Index d = 3;
  const LogisticModel model;
  GaussianBelief prior = exact_prior(d, 1.0);
  const VectorXd x = oracle::gaussian_vector(d, rng);
  const Observation obs = make_observation(x, 1.0);
  NonlinearOptions opt;
  opt.hessian_samples = 20000;
  opt.gradient_samples = 20000;
  opt.loops = kConverged;
  EnsembleSampler sampler(prior.precision, 3);
  const GaussianBelief got = lrvga_nonlinear_step(prior, obs, model, opt, sampler);
  const DenseGaussian want = skip_cov_by_quadrature(to_dense(prior), x, 1.0);
  CHECK(oracle::rel_err(got.mean, want.mean) < 0.03);
  CHECK(oracle::rel_err(oracle::inverse(got.precision.dense()), want.covariance) < 0.03);
}

TEST_CASE("nonlinear step argument checks") {
  std::mt19937_64 rng(14);
  const LogisticModel model;
  const GaussianBelief prior{VectorXd::Zero(4), oracle::random_fa(4, 2, rng)};
  EnsembleSampler sampler(prior.precision, 1);
  NonlinearOptions opt;
  opt.hessian_samples = 0;
  CHECK_THROWS_AS(lrvga_nonlinear_step(prior, make_observation(VectorXd::Ones(4), 1.0), model, opt, sampler),
                  ConfigError);
  opt.hessian_samples = 2;
  CHECK_THROWS_AS(lrvga_nonlinear_step(prior, make_observation(VectorXd::Ones(3), 1.0), model, opt, sampler),
                  DimensionError);
}

TEST_CASE("reused noise changes only the second stage") {
  std::mt19937_64 rng(15);
  const LogisticModel model;
  const GaussianBelief prior{VectorXd::Zero(5), oracle::random_fa(5, 2, rng)};
  const Observation obs = make_observation(oracle::gaussian_vector(5, rng), 0.0);
  NonlinearOptions fresh;
  NonlinearOptions reuse;
  reuse.fresh_samples = false;
  EnsembleSampler a(prior.precision, 4), b(prior.precision, 4);
  const GaussianBelief ra = lrvga_nonlinear_step(prior, obs, model, fresh, a);
  const GaussianBelief rb = lrvga_nonlinear_step(prior, obs, model, reuse, b);
  // Skip-cov keeps the first-stage precision, which both runs share.
  CHECK(oracle::rel_err(ra.precision.dense(), rb.precision.dense()) == 0.0);
  CHECK((ra.mean - rb.mean).norm() > 0.0);
}

TEST_CASE("divergence detection") {
  const FaPrecision fa(MatrixXd::Zero(10, 1), VectorXd::Ones(10));
  CHECK_NOTHROW(check_divergence(GaussianBelief{VectorXd::Ones(10), fa}, 1));
  CHECK_THROWS_AS(check_divergence(GaussianBelief{VectorXd::Constant(10, 1e8), fa}, 0), DivergenceError);
  CHECK_THROWS_AS(check_divergence(GaussianBelief{VectorXd::Ones(10), fa}, 2), DivergenceError);
  VectorXd nan = VectorXd::Ones(10);
  nan(3) = std::nan("");
  CHECK_THROWS_AS(check_divergence(GaussianBelief{nan, fa}, 0), DivergenceError);
}

TEST_CASE("expectations by sampling") {
  std::mt19937_64 rng(16);
  const GaussianBelief b{oracle::gaussian_vector(6, rng), oracle::random_fa(6, 2, rng)};
  EnsembleSampler s(b.precision, 8);
  const VectorXd c = expectation_by_sampling([](const VectorXd&) { return VectorXd::Constant(1, 2.5); },
                                             b, 10, s);
  CHECK(c(0) == 2.5);

  const VectorXd x = oracle::gaussian_vector(6, rng);
  const Index k = 20000;
  const VectorXd lin = expectation_by_sampling(
      [&](const VectorXd& th) { return VectorXd::Constant(1, x.dot(th)); }, b, k, s);
  const double sd = std::sqrt(x.dot(oracle::inverse(b.precision.dense()) * x) / k);
  CHECK(std::abs(lin(0) - x.dot(b.mean)) < 4.0 * sd);
}

}
