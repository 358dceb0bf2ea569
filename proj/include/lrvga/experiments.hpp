#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lrvga/fa_precision.hpp"
#include "lrvga/filters.hpp"

namespace lrvga {

enum class ExperimentKind { kCovariance, kLinear, kLogistic, kNonlinear };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view text);
std::string to_string(MirrorProxScheme scheme);
MirrorProxScheme parse_scheme(std::string_view text);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kLinear;
  Index d = 50;
  std::vector<Index> p{1, 5, 10, 50};
  long n = 2000;
  // Nonlinear sweep cells pair k_hess[i] with k_grad[i]; a single-entry list
  // is broadcast against the other.
  std::vector<Index> k_hess{10};
  std::vector<Index> k_grad{10};
  int inner_loops = 0;            // 0: 3 up to d = 1000, 1 above
  double inner_tolerance = 0.0;   // > 0: iterate to this relative change
  std::vector<double> sigma0{1.0};
  double eps_init = kDefaultInitEps;
  double c = 1.0;
  std::uint64_t seed = 0;
  MirrorProxScheme scheme = MirrorProxScheme::kMirrorProxSkipCov;
  bool fresh_samples = true;
  std::string dataset;            // LIBSVM path; empty for synthetic data
  bool map_signed_labels = true;
  long checkpoints = 50;
  std::string out = "out";
  // Covariance experiment.
  std::vector<std::string> methods{"recursive-em", "online-em", "batch-em"};
  Index p_true = 5;
  int batch_passes = 10;
  // Scale of theta* ~ N(0, s^2 I) for synthetic labels; 0 uses sigma0[0].
  double theta_scale = 0.0;
  Index kl_samples = 1000;
  bool record_timing = false;
};

// Defaults for each experiment family.
ExperimentConfig default_config(ExperimentKind kind);

// Throws ConfigError on an invalid combination.
void validate(const ExperimentConfig& cfg);

// Stable JSON echo (sorted keys, two-space indent, trailing newline).
std::string config_to_json(const ExperimentConfig& cfg);
// Fields present in `json` replace those in `base`; unknown keys are a
// ConfigError.
ExperimentConfig apply_config_json(ExperimentConfig base, std::string_view json);

// splitmix64 of the master seed mixed with a hash of the tag.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

// `count` distinct integers spaced logarithmically over [1, n], always
// including 1 and n (fewer only when count > n).
std::vector<long> log_checkpoints(long n, long count);

struct ResultRow {
  long checkpoint = 0;
  std::string method;
  Index p = 0;
  Index k = 0;
  double kl = 0.0;
  double std_error = 0.0;
  double wall_ms = 0.0;
};

// Expectations of sigma(x^T theta) and Tr P by ensemble and Cholesky draws.
struct SamplingRow {
  double sigma0 = 0.0;
  Index k = 0;
  double probit = 0.0;
  double ensemble = 0.0;
  double dense = 0.0;
  double trace_exact = 0.0;
  double trace_ensemble = 0.0;
  double trace_dense = 0.0;
};

struct MemoryReport {
  long analytic_bytes = 0;       // 8 d (p + K) for the limited-memory state
  long peak_aux_bytes = -1;      // measured, -1 without the heap probe
  long largest_allocation = -1;  // measured, -1 without the heap probe
};

struct RunReport {
  ExperimentConfig config;
  std::vector<ResultRow> rows;
  std::vector<SamplingRow> sampling;
  std::vector<std::pair<std::string, std::string>> summary;
  // Milliseconds per processed observation, by method.
  std::vector<std::pair<std::string, double>> time_per_step_ms;
  MemoryReport memory;
  double input_scale = 1.0;
};

RunReport run_covariance_experiment(const ExperimentConfig& cfg);
RunReport run_linear_experiment(const ExperimentConfig& cfg);
RunReport run_logistic_experiment(const ExperimentConfig& cfg);
RunReport run_nonlinear_ablation(const ExperimentConfig& cfg);
RunReport run_experiment(const ExperimentConfig& cfg);

// Above this dimension the linear experiment skips dense baselines and KL.
inline constexpr Index kDenseEvalMaxDim = 2000;

// results.csv, config.json and summary.txt (plus sampling.csv when present).
void emit_report(const RunReport& report, const std::filesystem::path& dir);
std::string results_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(std::string_view text);

}  // namespace lrvga
