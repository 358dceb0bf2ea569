#pragma once

#include <Eigen/SparseCore>

#include <optional>
#include <variant>

#include "lrvga/fa_precision.hpp"

namespace lrvga {

using SparseVector = Eigen::SparseVector<double>;

// Filter state: mean plus factor-form precision P^{-1} = W W^T + Psi.
struct GaussianBelief {
  VectorXd mean;
  FaPrecision precision;

  Index dim() const { return mean.size(); }
};

// Explicit (mean, covariance) pair for small-d baselines and oracles.
struct DenseGaussian {
  VectorXd mean;
  MatrixXd covariance;

  Index dim() const { return mean.size(); }
};

// One input x (dense or sparse) with an optional label.
struct Observation {
  std::variant<VectorXd, SparseVector> input;
  std::optional<double> label;

  Index dim() const;
  bool is_sparse() const { return std::holds_alternative<SparseVector>(input); }
  VectorXd dense() const;
  double dot(const VectorXd& v) const;
  double squared_norm() const;
  // Requires a label; throws std::invalid_argument otherwise.
  double y() const;
};

Observation make_observation(VectorXd x, std::optional<double> label = std::nullopt);
Observation make_observation(SparseVector x, std::optional<double> label = std::nullopt);

// Convert a belief to dense form (small d only).
DenseGaussian to_dense(const GaussianBelief& belief);

}  // namespace lrvga
