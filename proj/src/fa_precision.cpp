#include "lrvga/fa_precision.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "lrvga/errors.hpp"
#include "lrvga/log.hpp"

namespace lrvga {

namespace {

void require_finite(const VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NumericalError(std::string(what) + " has non-finite entries");
}

void require_length(Index expected, Index actual, const char* what) {
  if (expected != actual) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) +
                         ", got " + std::to_string(actual));
  }
}

}  // namespace

FaPrecision::FaPrecision(MatrixXd loadings, VectorXd diagonal)
    : loadings_(std::move(loadings)), diagonal_(std::move(diagonal)) {
  if (loadings_.rows() != diagonal_.size()) {
    throw DimensionError("factor loadings have " + std::to_string(loadings_.rows()) +
                         " rows for a diagonal of length " + std::to_string(diagonal_.size()));
  }
  if (loadings_.cols() > loadings_.rows()) {
    throw DimensionError("latent rank exceeds dimension");
  }
  if (!loadings_.allFinite() || !diagonal_.allFinite()) {
    throw NumericalError("factor precision has non-finite entries");
  }
  if (diagonal_.size() > 0 && diagonal_.minCoeff() <= 0.0) {
    throw NumericalError("diagonal of a factor precision must be strictly positive");
  }
}

MatrixXd FaPrecision::dense() const {
  MatrixXd out = loadings_ * loadings_.transpose();
  out.diagonal() += diagonal_;
  return out;
}

double FaPrecision::trace() const { return loadings_.squaredNorm() + diagonal_.sum(); }

SpdSolver::SpdSolver(const MatrixXd& matrix) : llt_(matrix) {
  if (llt_.info() == Eigen::Success) return;
  log::warn("Cholesky factorisation failed on a " + std::to_string(matrix.rows()) +
            "x" + std::to_string(matrix.cols()) + " system; using a pseudo-inverse");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(matrix);
  const VectorXd& values = eig.eigenvalues();
  const double cutoff =
      values.cwiseAbs().maxCoeff() * static_cast<double>(values.size()) * 1e-14;
  VectorXd inv = VectorXd::Zero(values.size());
  pseudo_log_det_ = 0.0;
  for (Index i = 0; i < values.size(); ++i) {
    if (values(i) > cutoff) {
      inv(i) = 1.0 / values(i);
      pseudo_log_det_ += std::log(values(i));
    }
  }
  pseudo_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

MatrixXd SpdSolver::solve(const MatrixXd& rhs) const {
  if (pseudo_) return *pseudo_ * rhs;
  return llt_.solve(rhs);
}

VectorXd SpdSolver::solve(const VectorXd& rhs) const {
  if (pseudo_) return *pseudo_ * rhs;
  return llt_.solve(rhs);
}

MatrixXd SpdSolver::inverse() const {
  if (pseudo_) return *pseudo_;
  return llt_.solve(MatrixXd::Identity(llt_.rows(), llt_.cols()));
}

double SpdSolver::log_det() const {
  if (pseudo_) return pseudo_log_det_;
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

LatentGram::LatentGram(const FaPrecision& fa)
    : scaled_loadings_(fa.loadings().array().colwise() / fa.diagonal().array()) {
  matrix_ = fa.loadings().transpose() * scaled_loadings_;
  matrix_.diagonal().array() += 1.0;
  solver_ = SpdSolver(matrix_);
}

VectorXd woodbury_apply(const FaPrecision& fa, const LatentGram& gram, const VectorXd& v) {
  require_length(fa.dim(), v.size(), "woodbury_apply");
  require_finite(v, "woodbury_apply input");
  const VectorXd coeffs = gram.solver().solve(VectorXd(gram.scaled_loadings().transpose() * v));
  return (v - fa.loadings() * coeffs).cwiseQuotient(fa.diagonal());
}

VectorXd woodbury_apply(const FaPrecision& fa, const VectorXd& v) {
  return woodbury_apply(fa, LatentGram(fa), v);
}

MatrixXd woodbury_apply(const FaPrecision& fa, const MatrixXd& block) {
  require_length(fa.dim(), block.rows(), "woodbury_apply");
  if (!block.allFinite()) throw NumericalError("woodbury_apply input has non-finite entries");
  const LatentGram gram(fa);
  const MatrixXd coeffs = gram.solver().solve(MatrixXd(gram.scaled_loadings().transpose() * block));
  MatrixXd out = block - fa.loadings() * coeffs;
  out.array().colwise() /= fa.diagonal().array();
  return out;
}

double log_det(const FaPrecision& fa) {
  if (fa.dim() > 0 && fa.diagonal().minCoeff() <= 0.0) {
    throw NumericalError("log_det: non-positive diagonal entry");
  }
  return LatentGram(fa).solver().log_det() + fa.diagonal().array().log().sum();
}

VectorXd star(const MatrixXd& x, const MatrixXd& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw DimensionError("star: operands must have the same shape");
  }
  return x.cwiseProduct(y).rowwise().sum();
}

FaPrecision init_isotropic_prior(Index d, Index p, double sigma0, double eps,
                                 std::mt19937_64& rng) {
  if (p < 1 || d < p) throw DimensionError("init_isotropic_prior: need d >= p >= 1");
  if (!(sigma0 > 0.0)) throw std::invalid_argument("init_isotropic_prior: sigma0 must be > 0");
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("init_isotropic_prior: eps must lie in (0, 1)");
  }
  const double column_norm =
      std::sqrt(eps * static_cast<double>(d) / static_cast<double>(p)) / sigma0;
  std::normal_distribution<double> normal;
  MatrixXd loadings(d, p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < d; ++i) loadings(i, j) = normal(rng);
    loadings.col(j) *= column_norm / loadings.col(j).norm();
  }
  return FaPrecision(std::move(loadings), VectorXd::Constant(d, (1.0 - eps) / (sigma0 * sigma0)));
}

DenseOperator::DenseOperator(const MatrixXd& matrix) : matrix_(matrix) {
  if (matrix.rows() != matrix.cols()) throw DimensionError("DenseOperator: matrix not square");
}

RecursionWeights::RecursionWeights(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0)) {
    throw std::invalid_argument("recursion weights must be nonnegative with a positive sum");
  }
}

FaUpdateOperator::FaUpdateOperator(const FaPrecision& previous, const MatrixXd& block,
                                   RecursionWeights weights)
    : previous_(previous), block_(block), weights_(weights) {
  if (block.rows() != previous.dim()) {
    throw DimensionError("FaUpdateOperator: block has " + std::to_string(block.rows()) +
                         " rows, expected " + std::to_string(previous.dim()));
  }
}

MatrixXd FaUpdateOperator::apply(const MatrixXd& b) const {
  const MatrixXd& w = previous_.loadings();
  MatrixXd out = w * (w.transpose() * b);
  out += previous_.diagonal().asDiagonal() * b;
  out *= weights_.alpha();
  if (block_.cols() > 0) out.noalias() += weights_.beta() * (block_ * (block_.transpose() * b));
  return out;
}

VectorXd FaUpdateOperator::diagonal() const {
  VectorXd out = weights_.alpha() * (previous_.loadings().rowwise().squaredNorm() +
                                     previous_.diagonal());
  if (block_.cols() > 0) out += weights_.beta() * block_.rowwise().squaredNorm();
  return out;
}

FaUpdate em_fixed_point_step(const FaPrecision& fa, const SymmetricOperator& target) {
  require_length(fa.dim(), target.dim(), "em_fixed_point_step");
  const LatentGram gram(fa);
  const MatrixXd& scaled = gram.scaled_loadings();
  // V = S Psi^{-1} W.  The update W' = V (I + M^{-1} W^T Psi^{-1} V)^{-1} is
  // rewritten as V G^{-1} M with G = M + W^T Psi^{-1} S Psi^{-1} W symmetric.
  const MatrixXd v = target.apply(scaled);
  MatrixXd g = scaled.transpose() * v;
  g = 0.5 * (g + g.transpose());
  g += gram.matrix();
  const MatrixXd gain = SpdSolver(g).solve(MatrixXd(v.transpose())).transpose();  // V G^{-1}

  MatrixXd loadings = gain * gram.matrix();
  VectorXd diagonal = target.diagonal() - star(gain, v);
  if (!loadings.allFinite() || !diagonal.allFinite()) {
    throw NumericalError("EM fixed point produced non-finite factors");
  }
  Index clamped = 0;
  for (Index i = 0; i < diagonal.size(); ++i) {
    if (diagonal(i) < kPsiFloor) {
      diagonal(i) = kPsiFloor;
      ++clamped;
    }
  }
  return FaUpdate{FaPrecision(std::move(loadings), std::move(diagonal)), clamped, 1};
}

FaPrecision mle_fixed_point_step(const FaPrecision& fa, const MatrixXd& target) {
  require_length(fa.dim(), target.rows(), "mle_fixed_point_step");
  Eigen::LLT<MatrixXd> llt(fa.dense());
  if (llt.info() != Eigen::Success) throw NumericalError("mle_fixed_point_step: singular W W^T + Psi");
  MatrixXd loadings = target * llt.solve(fa.loadings());
  VectorXd diagonal = target.diagonal() - loadings.rowwise().squaredNorm();
  diagonal = diagonal.cwiseMax(kPsiFloor);
  return FaPrecision(std::move(loadings), std::move(diagonal));
}

InnerLoops default_inner_loops(Index d) { return InnerLoops{d <= 1000 ? 3 : 1, 0.0}; }

double relative_change(const FaPrecision& from, const FaPrecision& to) {
  if (from.dim() != to.dim() || from.rank() != to.rank()) {
    throw DimensionError("relative_change: factorisations have different shapes");
  }
  const MatrixXd& w0 = from.loadings();
  const MatrixXd& w1 = to.loadings();
  const MatrixXd delta = w1 - w0;
  const VectorXd dpsi = to.diagonal() - from.diagonal();
  // Expanded in the differences so the result stays accurate near convergence.
  const MatrixXd dtd = delta.transpose() * delta;
  const double low_rank = dtd.cwiseProduct(w1.transpose() * w1).sum() +
                          dtd.cwiseProduct(w0.transpose() * w0).sum() +
                          2.0 * ((delta.transpose() * w0) * (delta.transpose() * w1)).trace();
  const VectorXd low_rank_diag = star(delta, w1) + star(w0, delta);
  const double num = low_rank + 2.0 * dpsi.dot(low_rank_diag) + dpsi.squaredNorm();
  const double den = (w0.transpose() * w0).squaredNorm() +
                     2.0 * from.diagonal().dot(w0.rowwise().squaredNorm()) +
                     from.diagonal().squaredNorm();
  return std::sqrt(std::max(num, 0.0) / den);
}

FaUpdate recursive_em_update(const FaPrecision& previous, const MatrixXd& block,
                             RecursionWeights weights, InnerLoops loops) {
  if (loops.max_loops < 1) throw std::invalid_argument("recursive_em_update: need at least one inner loop");
  if (block.cols() < 1) throw DimensionError("recursive_em_update: empty input block");
  const FaUpdateOperator target(previous, block, weights);
  FaUpdate current{previous, 0, 0};
  for (int k = 0; k < loops.max_loops; ++k) {
    FaUpdate next = em_fixed_point_step(current.fa, target);
    const bool settled =
        loops.tolerance > 0.0 && relative_change(current.fa, next.fa) < loops.tolerance;
    current.fa = std::move(next.fa);
    current.clamped_entries = next.clamped_entries;
    current.loops = k + 1;
    if (settled) break;
  }
  return current;
}

RecursionWeights covariance_mode_weights(long t) {
  if (t < 1) throw std::invalid_argument("covariance_mode_weights: step index must be >= 1");
  const double td = static_cast<double>(t);
  return RecursionWeights((td - 1.0) / td, 1.0 / td);
}

double guess_s0_scale(std::span<const VectorXd> batch, Index d) {
  if (batch.empty()) throw std::invalid_argument("guess_s0_scale: empty batch");
  double total = 0.0;
  for (const VectorXd& x : batch) {
    require_length(d, x.size(), "guess_s0_scale");
    total += x.squaredNorm();
  }
  const double mean = total / static_cast<double>(batch.size());
  if (!(mean > 0.0)) throw NumericalError("guess_s0_scale: batch is identically zero");
  return std::sqrt(static_cast<double>(d) / mean);
}

}  // namespace lrvga
