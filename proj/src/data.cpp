#include "lrvga/data.hpp"

#include <cmath>

#include "lrvga/errors.hpp"
#include "lrvga/nonlinear_model.hpp"

namespace lrvga {

namespace {

VectorXd normal_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

class LinearLabelStream final : public ObservationStream {
 public:
  LinearLabelStream(StreamPtr inputs, VectorXd theta, std::uint64_t seed, bool noise_free)
      : inputs_(std::move(inputs)), theta_(std::move(theta)), rng_(seed), noise_free_(noise_free) {
    if (theta_.size() != inputs_->dim()) throw DimensionError("gen_linear_labels: theta length");
  }
  Index dim() const override { return inputs_->dim(); }
  std::optional<Observation> next() override {
    auto obs = inputs_->next();
    if (!obs) return std::nullopt;
    double y = obs->dot(theta_);
    if (!noise_free_) y += normal_(rng_);
    obs->label = y;
    return obs;
  }

 private:
  StreamPtr inputs_;
  VectorXd theta_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  bool noise_free_;
};

class LogisticLabelStream final : public ObservationStream {
 public:
  LogisticLabelStream(StreamPtr inputs, VectorXd theta, std::uint64_t seed)
      : inputs_(std::move(inputs)), theta_(std::move(theta)), rng_(seed) {
    if (theta_.size() != inputs_->dim()) throw DimensionError("gen_logistic_labels: theta length");
  }
  Index dim() const override { return inputs_->dim(); }
  std::optional<Observation> next() override {
    auto obs = inputs_->next();
    if (!obs) return std::nullopt;
    obs->label = uniform_(rng_) < sigmoid(obs->dot(theta_)) ? 1.0 : 0.0;
    return obs;
  }

 private:
  StreamPtr inputs_;
  VectorXd theta_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_;
};

}  // namespace

std::vector<Observation> take(ObservationStream& stream, std::size_t n) {
  std::vector<Observation> out;
  out.reserve(n);
  while (out.size() < n) {
    auto obs = stream.next();
    if (!obs) break;
    out.push_back(std::move(*obs));
  }
  return out;
}

VectorStream::VectorStream(std::vector<Observation> items, Index dim)
    : items_(std::move(items)), dim_(dim) {}

std::optional<Observation> VectorStream::next() {
  if (pos_ >= items_.size()) return std::nullopt;
  return std::move(items_[pos_++]);
}

MatrixXd SyntheticCovariance::dense() const {
  MatrixXd s = loadings * loadings.transpose();
  s.diagonal() += diagonal;
  return s;
}

SyntheticCovariance make_fa_covariance(const SyntheticCovSpec& spec) {
  if (spec.d < 1 || spec.p_true < 0 || spec.p_true > spec.d) {
    throw ConfigError("synthetic covariance needs d >= 1 and 0 <= p_true <= d");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  SyntheticCovariance cov;
  cov.loadings.resize(spec.d, spec.p_true);
  for (Index j = 0; j < spec.p_true; ++j)
    for (Index i = 0; i < spec.d; ++i) cov.loadings(i, j) = normal(rng);
  cov.diagonal.resize(spec.d);
  for (Index i = 0; i < spec.d; ++i) {
    const double z = normal(rng);
    cov.diagonal(i) = z * z + kSyntheticPsiFloor;
  }
  return cov;
}

FaCovarianceStream::FaCovarianceStream(const SyntheticCovSpec& spec, std::size_t n)
    : cov_(make_fa_covariance(spec)),
      sqrt_diag_(cov_.diagonal.cwiseSqrt()),
      // Offset so the sample stream does not replay the parameter draws.
      rng_(spec.seed ^ 0x9e3779b97f4a7c15ULL),
      remaining_(n) {}

std::optional<Observation> FaCovarianceStream::next() {
  if (remaining_ == 0) return std::nullopt;
  --remaining_;
  const VectorXd z = normal_vector(cov_.loadings.cols(), rng_);
  const VectorXd e = normal_vector(dim(), rng_);
  return Observation{VectorXd(cov_.loadings * z + sqrt_diag_.cwiseProduct(e)), std::nullopt};
}

Rotation::Rotation(Index d, std::mt19937_64& rng) : dim_(d) {
  if (d < 1) throw ConfigError("rotation dimension must be positive");
  if (d <= kDenseRotationMaxDim) {
    MatrixXd g(d, d);
    std::normal_distribution<double> normal;
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < d; ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    dense_ = qr.householderQ();
    // Sign fix so the distribution is uniform over the orthogonal group.
    const VectorXd r = qr.matrixQR().diagonal();
    for (Index j = 0; j < d; ++j) {
      if (r(j) < 0.0) dense_.col(j) *= -1.0;
    }
    return;
  }
  for (int k = 0; k < kHouseholderCount; ++k) {
    VectorXd u = normal_vector(d, rng);
    reflections_.push_back(u / u.norm());
  }
}

VectorXd Rotation::apply_transpose(const VectorXd& v) const {
  if (v.size() != dim_) throw DimensionError("Rotation: length mismatch");
  if (is_dense()) return dense_.transpose() * v;
  VectorXd out = v;
  for (const VectorXd& u : reflections_) out -= (2.0 * u.dot(out)) * u;
  return out;
}

MatrixXd Rotation::matrix() const {
  if (is_dense()) return dense_;
  MatrixXd mt(dim_, dim_);
  for (Index j = 0; j < dim_; ++j) mt.col(j) = apply_transpose(VectorXd::Unit(dim_, j));
  return mt.transpose();
}

RegressionInputStream::RegressionInputStream(const RegressionSpec& spec)
    : rng_(spec.seed), rotation_(spec.d, rng_), remaining_(spec.n) {
  if (!(spec.c >= 0.0)) throw ConfigError("condition exponent c must be >= 0");
  spectrum_.resize(spec.d);
  for (Index j = 0; j < spec.d; ++j) spectrum_(j) = std::pow(static_cast<double>(j + 1), -spec.c);
  spectrum_ *= static_cast<double>(spec.d) / spectrum_.sum();
  scale_ = spectrum_.cwiseSqrt();
}

std::optional<Observation> RegressionInputStream::next() {
  if (remaining_ == 0) return std::nullopt;
  --remaining_;
  const VectorXd z = normal_vector(dim(), rng_);
  return Observation{rotation_.apply_transpose(scale_.cwiseProduct(z)), std::nullopt};
}

MatrixXd RegressionInputStream::covariance() const {
  const MatrixXd m = rotation_.matrix();
  return m.transpose() * spectrum_.asDiagonal() * m;
}

VectorXd regression_theta_star(const RegressionSpec& spec) {
  if (spec.theta_star) {
    if (spec.theta_star->size() != spec.d) throw DimensionError("theta_star length must equal d");
    return *spec.theta_star;
  }
  std::mt19937_64 rng(spec.seed + 0x632be59bd9b4e019ULL);
  return spec.sigma0 * normal_vector(spec.d, rng);
}

StreamPtr gen_linear_labels(StreamPtr inputs, VectorXd theta_star, std::uint64_t seed,
                            bool noise_free) {
  return std::make_unique<LinearLabelStream>(std::move(inputs), std::move(theta_star), seed,
                                             noise_free);
}

StreamPtr gen_logistic_labels(StreamPtr inputs, VectorXd theta_star, std::uint64_t seed) {
  return std::make_unique<LogisticLabelStream>(std::move(inputs), std::move(theta_star), seed);
}

Observation scaled(const Observation& obs, double factor) {
  Observation out = obs;
  std::visit([factor](auto& x) { x *= factor; }, out.input);
  return out;
}

NormalizedStream::NormalizedStream(StreamPtr inner, NormalizeMode mode, std::size_t batch)
    : inner_(std::move(inner)) {
  if (mode == NormalizeMode::kNone) return;
  if (batch == 0) throw ConfigError("normalization batch must be non-empty");
  buffer_ = take(*inner_, batch);
  double total = 0.0;
  for (const Observation& obs : buffer_) total += obs.squared_norm();
  if (buffer_.empty() || !(total > 0.0)) {
    throw NumericalError("normalize_stream: leading batch is empty or all zero");
  }
  const double mean_sq = total / static_cast<double>(buffer_.size());
  scale_ = std::sqrt(static_cast<double>(dim()) / mean_sq);
}

std::optional<Observation> NormalizedStream::next() {
  if (pos_ < buffer_.size()) return scaled(buffer_[pos_++], scale_);
  auto obs = inner_->next();
  if (!obs) return std::nullopt;
  if (scale_ != 1.0) return scaled(*obs, scale_);
  return obs;
}

}  // namespace lrvga
