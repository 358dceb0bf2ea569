#pragma once

#include <random>

#include "lrvga/fa_precision.hpp"

namespace lrvga {

// Draws from N(mu, (W W^T + Psi)^{-1}) in O(K d p) without forming or
// inverting a d x d matrix:
//   x ~ N(0, Psi^{-1}), eps ~ N(0, I_p), x+ = (I - L W^T) x + L eps,
// with L = Psi^{-1} W M^{-1}.
class EnsembleSampler {
 public:
  EnsembleSampler(const FaPrecision& fa, std::uint64_t seed);

  // Recomputes L for new factors. The RNG stream continues.
  void reset(const FaPrecision& fa);

  const FaPrecision& factors() const { return fa_; }
  const MatrixXd& gain() const { return gain_; }  // L, d x p

  // d x K matrix whose columns are independent draws.
  MatrixXd draw(const VectorXd& mean, Index count);

  // Standard-normal noise for `count` draws, split as the d-dimensional and
  // p-dimensional parts. `transform` maps it to samples; the same noise can be
  // pushed through several beliefs (common random numbers).
  struct Noise {
    MatrixXd ambient;  // d x K, N(0, I)
    MatrixXd latent;   // p x K, N(0, I)
  };
  Noise draw_noise(Index count);
  MatrixXd transform(const VectorXd& mean, const Noise& noise) const;

  std::mt19937_64& rng() { return rng_; }

 private:
  FaPrecision fa_;
  MatrixXd gain_;
  VectorXd inv_sqrt_diag_;
  std::mt19937_64 rng_;
};

// Square-root sampling from an explicit covariance (Cholesky). Baseline for
// small d. Throws NumericalError if the covariance is not SPD.
MatrixXd draw_dense_reference(const VectorXd& mean, const MatrixXd& covariance, Index count,
                              std::mt19937_64& rng);

}  // namespace lrvga
