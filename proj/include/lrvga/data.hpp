#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "lrvga/gaussian.hpp"

namespace lrvga {

// Single-pass source of observations. Unlabelled sources (covariance samples,
// raw inputs) leave Observation::label empty.
class ObservationStream {
 public:
  virtual ~ObservationStream() = default;
  virtual Index dim() const = 0;
  // std::nullopt once exhausted.
  virtual std::optional<Observation> next() = 0;
};

using StreamPtr = std::unique_ptr<ObservationStream>;

// Drains up to n observations.
std::vector<Observation> take(ObservationStream& stream, std::size_t n);

// Replays a stored vector once.
class VectorStream final : public ObservationStream {
 public:
  VectorStream(std::vector<Observation> items, Index dim);
  Index dim() const override { return dim_; }
  std::optional<Observation> next() override;

 private:
  std::vector<Observation> items_;
  std::size_t pos_ = 0;
  Index dim_;
};

// S = W W^T + Diag(psi) with W entries N(0, 1) and psi = z^2 + 0.1.
struct SyntheticCovSpec {
  Index d = 0;
  Index p_true = 0;
  std::uint64_t seed = 0;
};

struct SyntheticCovariance {
  MatrixXd loadings;
  VectorXd diagonal;
  MatrixXd dense() const;
};

inline constexpr double kSyntheticPsiFloor = 0.1;

SyntheticCovariance make_fa_covariance(const SyntheticCovSpec& spec);

// Zero-mean samples W z + sqrt(psi) e from the covariance above.
class FaCovarianceStream final : public ObservationStream {
 public:
  FaCovarianceStream(const SyntheticCovSpec& spec, std::size_t n);
  Index dim() const override { return cov_.diagonal.size(); }
  std::optional<Observation> next() override;
  const SyntheticCovariance& covariance() const { return cov_; }

 private:
  SyntheticCovariance cov_;
  VectorXd sqrt_diag_;
  std::mt19937_64 rng_;
  std::size_t remaining_;
};

// Random orthogonal d x d rotation applied without storing it when d is large.
class Rotation {
 public:
  // Dense QR of a Gaussian matrix up to kDenseRotationMaxDim, otherwise a
  // product of kHouseholderCount random reflections.
  Rotation(Index d, std::mt19937_64& rng);
  Index dim() const { return dim_; }
  bool is_dense() const { return dense_.size() > 0; }
  // M^T v.
  VectorXd apply_transpose(const VectorXd& v) const;
  // Explicit M (small d only).
  MatrixXd matrix() const;

 private:
  Index dim_;
  MatrixXd dense_;
  std::vector<VectorXd> reflections_;  // unit normals
};

inline constexpr Index kDenseRotationMaxDim = 1024;
inline constexpr int kHouseholderCount = 4;

struct RegressionSpec {
  Index d = 0;
  std::size_t n = 0;
  double c = 1.0;        // spectrum 1, 1/2^c, ..., 1/d^c
  double sigma0 = 1.0;   // prior scale, used to draw theta_star when unset
  std::uint64_t seed = 0;
  std::optional<VectorXd> theta_star;
};

// x = M^T Diag(j^{-c/2}) z scaled so that E||x||^2 = d.
class RegressionInputStream final : public ObservationStream {
 public:
  explicit RegressionInputStream(const RegressionSpec& spec);
  Index dim() const override { return rotation_.dim(); }
  std::optional<Observation> next() override;
  const Rotation& rotation() const { return rotation_; }
  // Diagonal of Diag(j^{-c}) after the normalising scale.
  const VectorXd& spectrum() const { return spectrum_; }
  // Dense C (small d only).
  MatrixXd covariance() const;

 private:
  std::mt19937_64 rng_;
  Rotation rotation_;
  VectorXd spectrum_;
  VectorXd scale_;  // sqrt of spectrum
  std::size_t remaining_;
};

// spec.theta_star when set, otherwise a draw from N(0, sigma0^2 I) on its own seed.
VectorXd regression_theta_star(const RegressionSpec& spec);

// y = x^T theta_star + N(0, 1); noise_free drops the noise.
StreamPtr gen_linear_labels(StreamPtr inputs, VectorXd theta_star, std::uint64_t seed,
                            bool noise_free = false);
// y ~ Bernoulli(sigma(x^T theta_star)), y in {0, 1}.
StreamPtr gen_logistic_labels(StreamPtr inputs, VectorXd theta_star, std::uint64_t seed);

enum class NormalizeMode { kNone, kMeanNorm };

inline constexpr std::size_t kLeadingBatch = 100;

// Scales every input by one factor so that the leading batch has mean
// squared norm d. Labels pass through.
class NormalizedStream final : public ObservationStream {
 public:
  NormalizedStream(StreamPtr inner, NormalizeMode mode, std::size_t batch = kLeadingBatch);
  Index dim() const override { return inner_->dim(); }
  std::optional<Observation> next() override;
  double scale() const { return scale_; }

 private:
  StreamPtr inner_;
  std::vector<Observation> buffer_;
  std::size_t pos_ = 0;
  double scale_ = 1.0;
};

Observation scaled(const Observation& obs, double factor);

}  // namespace lrvga
