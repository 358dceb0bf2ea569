#include "lrvga/sampler.hpp"

#include "lrvga/errors.hpp"

namespace lrvga {

namespace {

MatrixXd standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  MatrixXd out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

}  // namespace

EnsembleSampler::EnsembleSampler(const FaPrecision& fa, std::uint64_t seed) : rng_(seed) {
  reset(fa);
}

void EnsembleSampler::reset(const FaPrecision& fa) {
  if (!fa.diagonal().allFinite()) throw NumericalError("EnsembleSampler: non-finite diagonal");
  fa_ = fa;
  const LatentGram gram(fa_);
  gain_ = gram.solver().solve(MatrixXd(gram.scaled_loadings().transpose())).transpose();
  inv_sqrt_diag_ = fa_.diagonal().cwiseSqrt().cwiseInverse();
}

EnsembleSampler::Noise EnsembleSampler::draw_noise(Index count) {
  if (count < 1) throw std::invalid_argument("EnsembleSampler: need at least one draw");
  Noise noise;
  noise.ambient = standard_normal(fa_.dim(), count, rng_);
  noise.latent = standard_normal(fa_.rank(), count, rng_);
  return noise;
}

MatrixXd EnsembleSampler::transform(const VectorXd& mean, const Noise& noise) const {
  if (mean.size() != fa_.dim() || noise.ambient.rows() != fa_.dim() ||
      noise.latent.rows() != fa_.rank() || noise.ambient.cols() != noise.latent.cols()) {
    throw DimensionError("EnsembleSampler: mean or noise does not match the factors");
  }
  MatrixXd x = inv_sqrt_diag_.asDiagonal() * noise.ambient;  // N(0, Psi^{-1})
  const MatrixXd correction = noise.latent - fa_.loadings().transpose() * x;
  x.noalias() += gain_ * correction;
  x.colwise() += mean;
  return x;
}

MatrixXd EnsembleSampler::draw(const VectorXd& mean, Index count) {
  return transform(mean, draw_noise(count));
}

MatrixXd draw_dense_reference(const VectorXd& mean, const MatrixXd& covariance, Index count,
                              std::mt19937_64& rng) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw DimensionError("draw_dense_reference: covariance does not match the mean");
  }
  if (count < 1) throw std::invalid_argument("draw_dense_reference: need at least one draw");
  Eigen::LLT<MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("draw_dense_reference: covariance is not SPD");
  MatrixXd out = llt.matrixL() * standard_normal(mean.size(), count, rng);
  out.colwise() += mean;
  return out;
}

}  // namespace lrvga
