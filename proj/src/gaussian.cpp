#include "lrvga/gaussian.hpp"

#include <cmath>
#include <stdexcept>

#include "lrvga/errors.hpp"

namespace lrvga {

Index Observation::dim() const {
  return std::visit([](const auto& x) -> Index { return x.size(); }, input);
}

VectorXd Observation::dense() const {
  if (const auto* x = std::get_if<VectorXd>(&input)) return *x;
  return VectorXd(std::get<SparseVector>(input));
}

double Observation::dot(const VectorXd& v) const {
  if (v.size() != dim()) throw DimensionError("Observation::dot: length mismatch");
  if (const auto* x = std::get_if<VectorXd>(&input)) return x->dot(v);
  double total = 0.0;
  for (SparseVector::InnerIterator it(std::get<SparseVector>(input)); it; ++it) {
    total += it.value() * v(it.index());
  }
  return total;
}

double Observation::squared_norm() const {
  return std::visit([](const auto& x) { return x.squaredNorm(); }, input);
}

double Observation::y() const {
  if (!label) throw std::invalid_argument("observation has no label");
  return *label;
}

Observation make_observation(VectorXd x, std::optional<double> label) {
  if (!x.allFinite()) throw NumericalError("observation input has non-finite entries");
  return Observation{std::move(x), label};
}

Observation make_observation(SparseVector x, std::optional<double> label) {
  for (SparseVector::InnerIterator it(x); it; ++it) {
    if (!std::isfinite(it.value())) throw NumericalError("observation input has non-finite entries");
  }
  return Observation{std::move(x), label};
}

DenseGaussian to_dense(const GaussianBelief& belief) {
  const MatrixXd precision = belief.precision.dense();
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError("to_dense: precision is not SPD");
  return DenseGaussian{belief.mean,
                       llt.solve(MatrixXd::Identity(precision.rows(), precision.cols()))};
}

}  // namespace lrvga
