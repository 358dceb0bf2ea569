#include <doctest.h>

#include <cmath>
#include <random>

#include "lrvga/errors.hpp"
#include "lrvga/sampler.hpp"
#include "support/oracles.hpp"

using namespace lrvga;

namespace {

MatrixXd empirical_cov(const MatrixXd& draws, const VectorXd& mean) {
  const MatrixXd c = draws.colwise() - mean;
  return c * c.transpose() / static_cast<double>(draws.cols());
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("gain satisfies Psi L M = W") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const FaPrecision fa = oracle::random_fa(9, 3, rng);
    const EnsembleSampler s(fa, 7);
    const MatrixXd m = MatrixXd::Identity(3, 3) +
                       fa.loadings().transpose() * fa.diagonal().cwiseInverse().asDiagonal() *
                           fa.loadings();
    CHECK(oracle::rel_err(fa.diagonal().asDiagonal() * s.gain() * m, fa.loadings()) < 1e-10);
  }
}

TEST_CASE("second-moment identity") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const FaPrecision fa = oracle::random_fa(8, 2, rng);
    const EnsembleSampler s(fa, 1);
    const MatrixXd a = MatrixXd::Identity(8, 8) - s.gain() * fa.loadings().transpose();
    const MatrixXd got = a * fa.diagonal().cwiseInverse().asDiagonal() * a.transpose() +
                         s.gain() * s.gain().transpose();
    CHECK(oracle::rel_err(got, oracle::inverse(fa.dense())) < 1e-12);
  }
}

TEST_CASE("zero loadings sample the diagonal") {
  const FaPrecision fa(MatrixXd::Zero(4, 2), VectorXd::Constant(4, 4.0));
  EnsembleSampler s(fa, 3);
  CHECK(s.gain().norm() == 0.0);
  const MatrixXd draws = s.draw(VectorXd::Zero(4), 40000);
  const MatrixXd c = empirical_cov(draws, VectorXd::Zero(4));
  CHECK(oracle::rel_err(c, MatrixXd::Identity(4, 4) * 0.25) < 0.03);
}

TEST_CASE("empirical covariance matches P") {
  std::mt19937_64 rng(4);
  const FaPrecision fa = oracle::random_fa(20, 3, rng);
  EnsembleSampler s(fa, 11);
  const VectorXd mu = oracle::gaussian_vector(20, rng);
  const MatrixXd draws = s.draw(mu, 50000);
  CHECK(oracle::rel_err(empirical_cov(draws, mu), oracle::inverse(fa.dense())) < 0.05);
}

TEST_CASE("sample mean converges at the 1/sqrt(K) rate") {
  std::mt19937_64 rng(5);
  const FaPrecision fa = oracle::random_fa(6, 2, rng);
  const MatrixXd cov = oracle::inverse(fa.dense());
  const VectorXd mu = oracle::gaussian_vector(6, rng);
  EnsembleSampler s(fa, 12);
  for (Index k : {100, 1000, 10000}) {
    const VectorXd mean = s.draw(mu, k).rowwise().mean();
    for (Index i = 0; i < 6; ++i) {
      CHECK(std::abs(mean(i) - mu(i)) < 3.0 * std::sqrt(cov(i, i) / static_cast<double>(k)) + 1e-12);
    }
  }
}

TEST_CASE("identical seeds give identical draws") {
  std::mt19937_64 rng(6);
  const FaPrecision fa = oracle::random_fa(5, 2, rng);
  EnsembleSampler a(fa, 99), b(fa, 99), c(fa, 100);
  const MatrixXd da = a.draw(VectorXd::Zero(5), 7);
  CHECK((da - b.draw(VectorXd::Zero(5), 7)).norm() == 0.0);
  CHECK((da - c.draw(VectorXd::Zero(5), 7)).norm() > 0.0);
}

TEST_CASE("noise split reproduces draw") {
  std::mt19937_64 rng(7);
  const FaPrecision fa = oracle::random_fa(5, 2, rng);
  EnsembleSampler a(fa, 5), b(fa, 5);
  const VectorXd mu = VectorXd::Constant(5, 0.5);
  const EnsembleSampler::Noise noise = a.draw_noise(4);
  CHECK((a.transform(mu, noise) - b.draw(mu, 4)).norm() < 1e-14);
  // x+ = (I - L W^T) Psi^{-1/2} e + L eps, written out.
  const MatrixXd x = fa.diagonal().cwiseSqrt().cwiseInverse().asDiagonal() * noise.ambient;
  const MatrixXd want = (x - a.gain() * (fa.loadings().transpose() * x) + a.gain() * noise.latent)
                            .colwise() + mu;
  CHECK(oracle::rel_err(a.transform(mu, noise), want) < 1e-14);
}

TEST_CASE("reset follows new factors") {
  std::mt19937_64 rng(8);
  const FaPrecision a = oracle::random_fa(5, 2, rng);
  const FaPrecision b = oracle::random_fa(5, 2, rng);
  EnsembleSampler s(a, 1);
  s.reset(b);
  const EnsembleSampler fresh(b, 1);
  CHECK((s.gain() - fresh.gain()).norm() == 0.0);
}

TEST_CASE("dense reference sampler") {
  std::mt19937_64 rng(9);
  const MatrixXd draws = draw_dense_reference(VectorXd::Zero(3), MatrixXd::Identity(3, 3), 50000, rng);
  CHECK(oracle::rel_err(empirical_cov(draws, VectorXd::Zero(3)), MatrixXd::Identity(3, 3)) < 0.03);
  MatrixXd bad = MatrixXd::Identity(3, 3);
  bad(2, 2) = -1.0;
  CHECK_THROWS_AS(draw_dense_reference(VectorXd::Zero(3), bad, 2, rng), NumericalError);
}

TEST_CASE("ensemble and Cholesky sampling agree on a functional") {
  std::mt19937_64 rng(10);
  const FaPrecision fa = oracle::random_fa(12, 3, rng);
  const VectorXd mu = 0.3 * oracle::gaussian_vector(12, rng);
  const VectorXd x = oracle::gaussian_vector(12, rng).normalized();
  EnsembleSampler s(fa, 21);
  std::mt19937_64 r2(22);
  const Index k = 20000;
  const MatrixXd e = s.draw(mu, k);
  const MatrixXd c = draw_dense_reference(mu, oracle::inverse(fa.dense()), k, r2);
  auto stats = [&](const MatrixXd& th) {
    VectorXd f(k);
    for (Index i = 0; i < k; ++i) f(i) = oracle::sigmoid(x.dot(th.col(i)));
    const double m = f.mean();
    return std::pair{m, std::sqrt((f.array() - m).square().sum() / (k - 1) / k)};
  };
  const auto [me, se] = stats(e);
  const auto [mc, sc] = stats(c);
  CHECK(std::abs(me - mc) < 4.0 * std::hypot(se, sc));
}

}
