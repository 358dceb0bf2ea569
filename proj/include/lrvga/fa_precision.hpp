#pragma once

// "Low-rank + diagonal" matrices W W^T + diag(psi) and the factor-analysis EM
// machinery that maintains them. Every routine here works in O(d p^2 + p^3)
// time and O(d p) memory; nothing allocates a d x d matrix except the explicit
// dense helpers (`dense()`, `DenseOperator`, `mle_fixed_point_step`) which
// exist for small-d oracles and batch baselines.

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <span>

namespace lrvga {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Lower bound applied to diagonal entries produced by an M-step.
inline constexpr double kPsiFloor = 1e-12;

class FaPrecision {
 public:
  FaPrecision() = default;
  // Throws DimensionError on a row mismatch or p > d, NumericalError if a
  // diagonal entry is not strictly positive or any entry is non-finite.
  FaPrecision(MatrixXd loadings, VectorXd diagonal);

  Index dim() const { return diagonal_.size(); }
  Index rank() const { return loadings_.cols(); }

  const MatrixXd& loadings() const { return loadings_; }
  const VectorXd& diagonal() const { return diagonal_; }

  // Explicit W W^T + diag(psi). Small d only.
  MatrixXd dense() const;

  // Tr(W W^T + Psi), O(dp).
  double trace() const;

 private:
  MatrixXd loadings_;
  VectorXd diagonal_;
};

// Symmetric positive-definite p x p solver. Falls back to an eigenvalue
// pseudo-inverse (with a warning) when Cholesky fails.
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(const MatrixXd& matrix);

  MatrixXd solve(const MatrixXd& rhs) const;
  VectorXd solve(const VectorXd& rhs) const;
  MatrixXd inverse() const;
  // log det of the factored matrix (pseudo-determinant in fallback mode).
  double log_det() const;
  bool used_pseudo_inverse() const { return pseudo_.has_value(); }

 private:
  Eigen::LLT<MatrixXd> llt_;
  std::optional<MatrixXd> pseudo_;
  double pseudo_log_det_ = 0.0;
};

// M = I_p + W^T Psi^{-1} W, factored once.
class LatentGram {
 public:
  explicit LatentGram(const FaPrecision& fa);

  const MatrixXd& matrix() const { return matrix_; }
  // Psi^{-1} W, the d x p block every Woodbury product starts from.
  const MatrixXd& scaled_loadings() const { return scaled_loadings_; }
  const SpdSolver& solver() const { return solver_; }

 private:
  MatrixXd scaled_loadings_;
  MatrixXd matrix_;
  SpdSolver solver_;
};

// (W W^T + Psi)^{-1} v via Psi^{-1}(v - W M^{-1} W^T Psi^{-1} v).
VectorXd woodbury_apply(const FaPrecision& fa, const VectorXd& v);
MatrixXd woodbury_apply(const FaPrecision& fa, const MatrixXd& block);
VectorXd woodbury_apply(const FaPrecision& fa, const LatentGram& gram, const VectorXd& v);

// log det(W W^T + Psi) = log det M + sum log psi.
double log_det(const FaPrecision& fa);

// diag(X Y^T) without forming X Y^T.
VectorXd star(const MatrixXd& x, const MatrixXd& y);

// Prior N(0, sigma0^2 I) in factor form: psi = (1 - eps) / sigma0^2, columns
// of W isotropic with norm sqrt(eps d / p) / sigma0, so the trace is exactly
// d / sigma0^2.
FaPrecision init_isotropic_prior(Index d, Index p, double sigma0, double eps,
                                 std::mt19937_64& rng);

inline constexpr double kDefaultInitEps = 0.01;

// A symmetric d x d matrix that is only reachable through products with thin
// blocks and through its diagonal.
class SymmetricOperator {
 public:
  virtual ~SymmetricOperator() = default;
  virtual Index dim() const = 0;
  virtual MatrixXd apply(const MatrixXd& block) const = 0;
  virtual VectorXd diagonal() const = 0;
};

// Wraps an explicit matrix; the caller keeps it alive.
class DenseOperator final : public SymmetricOperator {
 public:
  explicit DenseOperator(const MatrixXd& matrix);
  Index dim() const override { return matrix_.rows(); }
  MatrixXd apply(const MatrixXd& block) const override { return matrix_ * block; }
  VectorXd diagonal() const override { return matrix_.diagonal(); }

 private:
  const MatrixXd& matrix_;
};

class RecursionWeights {
 public:
  RecursionWeights() = default;
  // Requires alpha >= 0, beta >= 0 and alpha + beta > 0.
  RecursionWeights(double alpha, double beta);
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  double alpha_ = 1.0;
  double beta_ = 1.0;
};

// alpha (W W^T + Psi) + beta X X^T for a previous factorisation and a d x K
// block X. References must outlive the operator.
class FaUpdateOperator final : public SymmetricOperator {
 public:
  FaUpdateOperator(const FaPrecision& previous, const MatrixXd& block, RecursionWeights weights);
  Index dim() const override { return previous_.dim(); }
  MatrixXd apply(const MatrixXd& block) const override;
  VectorXd diagonal() const override;

 private:
  const FaPrecision& previous_;
  const MatrixXd& block_;
  RecursionWeights weights_;
};

struct FaUpdate {
  FaPrecision fa;
  Index clamped_entries = 0;  // diagonal entries raised to kPsiFloor
  int loops = 0;              // fixed-point cycles actually run
};

// One fused E/M cycle of the factor-analysis fixed point for the target S:
//   W' = S Psi^{-1} W (I + M^{-1} W^T Psi^{-1} S Psi^{-1} W)^{-1}
//   psi' = diag(S - W' M^{-1} W^T Psi^{-1} S)
// with M taken at the incoming (W, Psi).
FaUpdate em_fixed_point_step(const FaPrecision& fa, const SymmetricOperator& target);

// Marginal-likelihood fixed point W' = S (W W^T + Psi)^{-1} W,
// psi' = diag(S - W' W'^T). Dense; used as an oracle.
FaPrecision mle_fixed_point_step(const FaPrecision& fa, const MatrixXd& target);

// How many fixed-point cycles to run per observation. With tolerance > 0 the
// loop stops early once the relative Frobenius change of W W^T + Psi falls
// below it; max_loops is then a cap.
struct InnerLoops {
  int max_loops = 3;
  double tolerance = 0.0;
};

// 3 cycles up to d = 1000, 1 above.
InnerLoops default_inner_loops(Index d);

// ||(W1 W1^T + Psi1) - (W0 W0^T + Psi0)||_F / ||W0 W0^T + Psi0||_F in O(dp^2).
double relative_change(const FaPrecision& from, const FaPrecision& to);

// Factor-analysis projection of alpha (W W^T + Psi) + beta X X^T, warm-started
// at the previous factors. Throws NumericalError on non-finite iterates.
FaUpdate recursive_em_update(const FaPrecision& previous, const MatrixXd& block,
                             RecursionWeights weights, InnerLoops loops);

// alpha = (t - 1) / t, beta = 1 / t: running average of outer products.
RecursionWeights covariance_mode_weights(long t);

// sigma0 = sqrt(d / mean ||x||^2) over a leading batch, so that the isotropic
// guess I / sigma0^2 has the batch's mean squared norm as its trace.
double guess_s0_scale(std::span<const VectorXd> batch, Index d);

}  // namespace lrvga
