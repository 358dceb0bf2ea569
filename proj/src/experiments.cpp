#include "lrvga/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "lrvga/data.hpp"
#include "lrvga/errors.hpp"
#include "lrvga/eval.hpp"
#include "lrvga/heap_probe.hpp"
#include "lrvga/libsvm.hpp"
#include "lrvga/online_em.hpp"

namespace lrvga {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string format_exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Accumulated time per method; reported per step.
class Stopwatch {
 public:
  void add(const std::string& method, double ms) { totals_[method] += ms; }
  double total(const std::string& method) const {
    const auto it = totals_.find(method);
    return it == totals_.end() ? 0.0 : it->second;
  }
  void report(RunReport& report, const std::vector<std::string>& order, long steps) const {
    for (const std::string& m : order) {
      report.time_per_step_ms.emplace_back(m, total(m) / static_cast<double>(std::max(1L, steps)));
    }
  }

 private:
  std::map<std::string, double> totals_;
};

InnerLoops loops_for(const ExperimentConfig& cfg, Index d) {
  if (cfg.inner_loops > 0) return InnerLoops{cfg.inner_loops, cfg.inner_tolerance};
  if (cfg.inner_tolerance > 0.0) return InnerLoops{200000, cfg.inner_tolerance};
  return default_inner_loops(d);
}

std::string p_tag(Index p) { return "p=" + std::to_string(p); }

std::string sigma_suffix(const ExperimentConfig& cfg, double sigma0) {
  if (cfg.sigma0.size() <= 1) return "";
  return "@sigma0=" + format_double(sigma0);
}

FaPrecision initial_prior(const ExperimentConfig& cfg, Index d, Index p, double sigma0,
                          std::string_view tag) {
  std::mt19937_64 rng(derive_seed(cfg.seed, tag));
  return init_isotropic_prior(d, p, sigma0, cfg.eps_init, rng);
}

double wall_column(const ExperimentConfig& cfg, double ms) { return cfg.record_timing ? ms : 0.0; }

struct LoadedDataset {
  std::vector<Observation> observations;
  Index d = 0;
  double scale = 1.0;
};

LoadedDataset load_dataset(const ExperimentConfig& cfg) {
  LibsvmOptions options;
  options.map_signed_labels = cfg.map_signed_labels;
  LibsvmData raw = parse_libsvm(std::filesystem::path(cfg.dataset), options);
  if (raw.observations.empty()) throw ConfigError("dataset " + cfg.dataset + " has no rows");
  const std::size_t keep = std::min<std::size_t>(raw.observations.size(), cfg.n);
  raw.observations.resize(keep);
  NormalizedStream normalized(std::make_unique<VectorStream>(std::move(raw.observations), raw.dim),
                              NormalizeMode::kMeanNorm);
  LoadedDataset out;
  out.d = raw.dim;
  out.scale = normalized.scale();
  out.observations = take(normalized, keep);
  return out;
}

void check_ranks(const ExperimentConfig& cfg, Index d) {
  for (Index p : cfg.p) {
    if (p > d) throw ConfigError("latent dimension p=" + std::to_string(p) + " exceeds d");
  }
}

double theta_scale(const ExperimentConfig& cfg) {
  return cfg.theta_scale > 0.0 ? cfg.theta_scale : cfg.sigma0.front();
}

struct RegressionSource {
  StreamPtr stream;
  Index d = 0;
  long n = 0;
  double scale = 1.0;
};

RegressionSource regression_source(const ExperimentConfig& cfg, bool logistic) {
  RegressionSource src;
  if (!cfg.dataset.empty()) {
    LoadedDataset data = load_dataset(cfg);
    src.d = data.d;
    src.n = static_cast<long>(data.observations.size());
    src.scale = data.scale;
    src.stream = std::make_unique<VectorStream>(std::move(data.observations), data.d);
    return src;
  }
  RegressionSpec spec;
  spec.d = cfg.d;
  spec.n = static_cast<std::size_t>(cfg.n);
  spec.c = cfg.c;
  spec.sigma0 = theta_scale(cfg);
  spec.seed = derive_seed(cfg.seed, "inputs");
  VectorXd theta_star = regression_theta_star(spec);
  auto inputs = std::make_unique<RegressionInputStream>(spec);
  const std::uint64_t label_seed = derive_seed(cfg.seed, "labels");
  src.stream = logistic ? gen_logistic_labels(std::move(inputs), std::move(theta_star), label_seed)
                        : gen_linear_labels(std::move(inputs), std::move(theta_star), label_seed);
  src.d = cfg.d;
  src.n = cfg.n;
  return src;
}

std::uint64_t kl_seed(const ExperimentConfig& cfg, std::size_t checkpoint_index) {
  return derive_seed(cfg.seed, "kl") + checkpoint_index;
}

struct HeapWindow {
  long base = 0;
  HeapWindow() {
    heap::reset_peak();
    base = heap::current_bytes();
  }
  void finish(MemoryReport& memory) const {
    if (!heap::active()) return;
    memory.peak_aux_bytes = heap::peak_bytes() - base;
    memory.largest_allocation = heap::largest_allocation();
  }
};

// Sampled-vs-exact expectations at a belief for the query x.
SamplingRow sampling_row(const GaussianBelief& belief, const VectorXd& x, double sigma0, Index k,
                         std::uint64_t seed) {
  SamplingRow row;
  row.sigma0 = sigma0;
  row.k = k;
  const VectorXd px = woodbury_apply(belief.precision, x);
  const double nu = x.dot(px);
  row.probit = sigmoid(kProbitBeta / std::sqrt(nu + kProbitBeta * kProbitBeta) * x.dot(belief.mean));
  const DenseGaussian dense = to_dense(belief);
  row.trace_exact = dense.covariance.trace();

  auto summarise = [&](const MatrixXd& draws, double& expectation, double& trace) {
    double total = 0.0;
    for (Index i = 0; i < draws.cols(); ++i) total += sigmoid(x.dot(draws.col(i)));
    expectation = total / static_cast<double>(draws.cols());
    // Spread about the known mean, so K = 1 is defined.
    trace = (draws.colwise() - belief.mean).squaredNorm() / static_cast<double>(draws.cols());
  };
  EnsembleSampler sampler(belief.precision, seed);
  summarise(sampler.draw(belief.mean, k), row.ensemble, row.trace_ensemble);
  std::mt19937_64 rng(seed);
  summarise(draw_dense_reference(belief.mean, dense.covariance, k, rng), row.dense, row.trace_dense);
  return row;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kCovariance: return "cov";
    case ExperimentKind::kLinear: return "linear";
    case ExperimentKind::kLogistic: return "logistic";
    case ExperimentKind::kNonlinear: return "nonlinear";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view text) {
  if (text == "cov" || text == "covariance") return ExperimentKind::kCovariance;
  if (text == "linear") return ExperimentKind::kLinear;
  if (text == "logistic") return ExperimentKind::kLogistic;
  if (text == "nonlinear") return ExperimentKind::kNonlinear;
  throw ConfigError("unknown experiment '" + std::string(text) + "'");
}

std::string to_string(MirrorProxScheme scheme) {
  switch (scheme) {
    case MirrorProxScheme::kExplicit: return "explicit";
    case MirrorProxScheme::kMirrorProxFull: return "mirror-prox-full";
    case MirrorProxScheme::kMirrorProxSkipCov: return "mirror-prox-skip-cov";
  }
  return "?";
}

MirrorProxScheme parse_scheme(std::string_view text) {
  if (text == "explicit") return MirrorProxScheme::kExplicit;
  if (text == "mirror-prox-full") return MirrorProxScheme::kMirrorProxFull;
  if (text == "mirror-prox-skip-cov") return MirrorProxScheme::kMirrorProxSkipCov;
  throw ConfigError("unknown scheme '" + std::string(text) + "'");
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ExperimentKind::kCovariance:
      cfg.d = 100;
      cfg.p = {5};
      cfg.n = 2000;
      break;
    case ExperimentKind::kLinear:
      break;
    case ExperimentKind::kLogistic:
      cfg.d = 20;
      cfg.p = {1, 5};
      cfg.n = 1000;
      cfg.sigma0 = {4.0};
      break;
    case ExperimentKind::kNonlinear:
      cfg.d = 20;
      cfg.p = {10};
      cfg.n = 1000;
      cfg.sigma0 = {1.0, 2.0, 3.0};
      cfg.k_hess = {1, 10, 100};
      cfg.k_grad = {1, 10, 100};
      break;
  }
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (cfg.d < 1) fail("d must be positive");
  if (cfg.n < 1) fail("n must be positive");
  if (cfg.p.empty()) fail("p list is empty");
  for (Index p : cfg.p) {
    if (p < 1) fail("p must be positive");
    if (cfg.dataset.empty() && p > cfg.d) fail("p must not exceed d");
  }
  if (cfg.checkpoints < 1) fail("checkpoint count must be positive");
  if (cfg.sigma0.empty()) fail("sigma0 list is empty");
  for (double s : cfg.sigma0) {
    if (!(s > 0.0) || !std::isfinite(s)) fail("sigma0 must be positive");
  }
  if (!(cfg.eps_init > 0.0 && cfg.eps_init < 1.0)) fail("eps_init must lie in (0, 1)");
  if (!(cfg.c >= 0.0)) fail("c must be >= 0");
  if (cfg.inner_loops < 0) fail("inner_loops must be >= 0");
  if (!(cfg.inner_tolerance >= 0.0)) fail("inner_tolerance must be >= 0");
  if (cfg.kl_samples < 2) fail("kl_samples must be at least 2");
  if (!(cfg.theta_scale >= 0.0)) fail("theta_scale must be >= 0");
  if (cfg.k_hess.empty() || cfg.k_grad.empty()) fail("sample count lists are empty");
  for (Index k : cfg.k_hess) if (k < 1) fail("k_hess must be positive");
  for (Index k : cfg.k_grad) if (k < 1) fail("k_grad must be positive");
  if (cfg.k_hess.size() != cfg.k_grad.size() && cfg.k_hess.size() != 1 && cfg.k_grad.size() != 1) {
    fail("k_hess and k_grad lists must have equal length or length 1");
  }
  if (cfg.kind == ExperimentKind::kCovariance) {
    if (cfg.methods.empty()) fail("method list is empty");
    static const std::set<std::string> known{"recursive-em", "online-em", "batch-em"};
    for (const auto& m : cfg.methods) {
      if (!known.count(m)) fail("unknown covariance method '" + m + "'");
    }
    if (cfg.p_true < 0 || (cfg.dataset.empty() && cfg.p_true > cfg.d)) fail("p_true must lie in [0, d]");
    if (cfg.batch_passes < 1) fail("batch_passes must be positive");
  }
  if (cfg.kind != ExperimentKind::kNonlinear && cfg.scheme != MirrorProxScheme::kMirrorProxSkipCov) {
    fail("scheme only applies to the nonlinear experiment");
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<long> log_checkpoints(long n, long count) {
  if (n < 1 || count < 1) throw ConfigError("checkpoints need n >= 1 and count >= 1");
  count = std::min(count, n);
  if (count == 1) return {n};
  std::vector<long> out(static_cast<std::size_t>(count));
  const double log_n = std::log(static_cast<double>(n));
  for (long i = 0; i < count; ++i) {
    const double raw = std::exp(log_n * static_cast<double>(i) / static_cast<double>(count - 1));
    long v = std::lround(raw);
    // Strictly increasing while leaving room for the remaining entries.
    if (i > 0) v = std::max(v, out[static_cast<std::size_t>(i - 1)] + 1);
    v = std::min(v, n - (count - 1 - i));
    out[static_cast<std::size_t>(i)] = v;
  }
  out.front() = 1;
  out.back() = n;
  return out;
}

// ---------------------------------------------------------------- covariance

RunReport run_covariance_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  RunReport report;
  report.config = cfg;

  std::vector<VectorXd> samples;
  MatrixXd target;
  Index d = cfg.d;
  if (!cfg.dataset.empty()) {
    LoadedDataset data = load_dataset(cfg);
    d = data.d;
    report.input_scale = data.scale;
    for (const Observation& obs : data.observations) samples.push_back(obs.dense());
    target = MatrixXd::Zero(d, d);
    for (const VectorXd& v : samples) target.selfadjointView<Eigen::Lower>().rankUpdate(v);
    target = target.selfadjointView<Eigen::Lower>();
    target /= static_cast<double>(samples.size());
    target.diagonal().array() += 1e-8 * std::max(1.0, target.diagonal().mean());
  } else {
    FaCovarianceStream stream(SyntheticCovSpec{cfg.d, cfg.p_true, derive_seed(cfg.seed, "covariance")},
                              static_cast<std::size_t>(cfg.n));
    target = stream.covariance().dense();
    for (auto obs = stream.next(); obs; obs = stream.next()) samples.push_back(obs->dense());
  }
  check_ranks(cfg, d);
  const long n = static_cast<long>(samples.size());
  const double target_log_det = spd_log_det(target);
  const std::vector<long> checkpoints = log_checkpoints(n, cfg.checkpoints);
  const InnerLoops loops = loops_for(cfg, d);

  const std::size_t lead = std::min<std::size_t>(kLeadingBatch, samples.size());
  const double s0_scale = guess_s0_scale(std::span<const VectorXd>(samples.data(), lead), d);
  report.summary.emplace_back("s0_scale", format_exact(s0_scale));

  auto has = [&](const std::string& m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
  };
  Stopwatch watch;
  std::vector<std::string> timed;
  Index max_p = 0;

  for (Index p : cfg.p) {
    max_p = std::max(max_p, p);
    const FaPrecision start = initial_prior(cfg, d, p, s0_scale, "init/" + p_tag(p));

    if (has("recursive-em")) {
      const std::string name = "recursive-em";
      FaPrecision fa = start;
      Index clamped = 0;
      std::size_t next = 0;
      double spent = 0.0;
      for (long t = 1; t <= n; ++t) {
        const auto t0 = Clock::now();
        const MatrixXd block = samples[static_cast<std::size_t>(t - 1)];
        FaUpdate up = recursive_em_update(fa, block, covariance_mode_weights(t), loops);
        fa = std::move(up.fa);
        clamped += up.clamped_entries;
        spent += elapsed_ms(t0);
        if (next < checkpoints.size() && checkpoints[next] == t) {
          report.rows.push_back({t, name, p, 1, covariance_kl(target, fa, target_log_det), 0.0,
                                 wall_column(cfg, spent)});
          ++next;
        }
      }
      report.summary.emplace_back(name + "/" + p_tag(p) + "/clamped", std::to_string(clamped));
      timed.push_back(name + "/" + p_tag(p));
      watch.add(timed.back(), spent);
    }

    if (has("online-em")) {
      const std::string name = "online-em";
      FaPrecision fa = start;
      OnlineEmState state = OnlineEmState::zeros(d, p);
      Index clamped = 0;
      std::size_t next = 0;
      double spent = 0.0;
      for (long t = 1; t <= n; ++t) {
        const auto t0 = Clock::now();
        OnlineEmResult res = online_em_update(state, fa, samples[static_cast<std::size_t>(t - 1)],
                                              online_em_step_size(t));
        state = std::move(res.state);
        fa = std::move(res.fa);
        clamped += res.clamped_entries;
        std::optional<FaPrecision> averaged;
        if (2 * t > n) averaged = polyak_ruppert_average(state, fa, t, n);
        spent += elapsed_ms(t0);
        if (next < checkpoints.size() && checkpoints[next] == t) {
          const FaPrecision& shown = averaged ? *averaged : fa;
          report.rows.push_back({t, name, p, 1, covariance_kl(target, shown, target_log_det), 0.0,
                                 wall_column(cfg, spent)});
          ++next;
        }
      }
      report.summary.emplace_back(name + "/" + p_tag(p) + "/clamped", std::to_string(clamped));
      timed.push_back(name + "/" + p_tag(p));
      watch.add(timed.back(), spent);
    }

    if (has("batch-em")) {
      const std::string name = "batch-em";
      MatrixXd empirical = MatrixXd::Zero(d, d);
      for (const VectorXd& v : samples) empirical.selfadjointView<Eigen::Lower>().rankUpdate(v);
      empirical = empirical.selfadjointView<Eigen::Lower>();
      empirical /= static_cast<double>(n);
      const DenseOperator op(empirical);
      FaPrecision fa = start;
      const auto t0 = Clock::now();
      for (int pass = 1; pass <= cfg.batch_passes; ++pass) {
        fa = em_fixed_point_step(fa, op).fa;
        report.rows.push_back({pass * n, name, p, 0, covariance_kl(target, fa, target_log_det), 0.0,
                               wall_column(cfg, elapsed_ms(t0))});
      }
      timed.push_back(name + "/" + p_tag(p));
      // Per pass, so the per-step figure is the cost of one sample touch.
      watch.add(timed.back(), elapsed_ms(t0) / cfg.batch_passes);
    }
  }
  watch.report(report, timed, n);
  report.memory.analytic_bytes = 8L * d * (max_p + 1);
  return report;
}

// -------------------------------------------------------------------- linear

RunReport run_linear_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  RunReport report;
  report.config = cfg;

  for (double sigma0 : cfg.sigma0) {
    RegressionSource src = regression_source(cfg, false);
    report.input_scale = src.scale;
    const Index d = src.d;
    check_ranks(cfg, d);
    const std::vector<long> checkpoints = log_checkpoints(src.n, cfg.checkpoints);
    const InnerLoops loops = loops_for(cfg, d);
    const bool dense = d <= kDenseEvalMaxDim;
    const std::string suffix = sigma_suffix(cfg, sigma0);

    std::vector<GaussianBelief> beliefs;
    for (Index p : cfg.p) {
      beliefs.push_back({VectorXd::Zero(d), initial_prior(cfg, d, p, sigma0, "init/" + p_tag(p))});
    }
    std::optional<DenseGaussian> kalman;
    MatrixXd information;
    VectorXd projection;
    if (dense) {
      kalman = DenseGaussian{VectorXd::Zero(d), MatrixXd::Identity(d, d) * (sigma0 * sigma0)};
      information = MatrixXd::Identity(d, d) / (sigma0 * sigma0);
      projection = VectorXd::Zero(d);
    }

    Stopwatch watch;
    std::vector<std::string> timed;
    for (Index p : cfg.p) timed.push_back("lrvga" + suffix + "/" + p_tag(p));
    if (dense) timed.push_back("kalman" + suffix);

    const HeapWindow heap_window;
    std::size_t next = 0;
    long t = 0;
    for (auto obs = src.stream->next(); obs; obs = src.stream->next()) {
      ++t;
      for (std::size_t i = 0; i < beliefs.size(); ++i) {
        const auto t0 = Clock::now();
        beliefs[i] = lrvga_linear_step(beliefs[i], *obs, loops);
        watch.add(timed[i], elapsed_ms(t0));
      }
      if (dense) {
        const auto t0 = Clock::now();
        *kalman = kalman_step_dense(*kalman, *obs);
        watch.add(timed.back(), elapsed_ms(t0));
        const VectorXd x = obs->dense();
        information.selfadjointView<Eigen::Lower>().rankUpdate(x);
        projection += x * obs->y();
      }
      if (next < checkpoints.size() && checkpoints[next] == t) {
        std::optional<DenseGaussian> exact;
        if (dense) {
          const MatrixXd full = information.selfadjointView<Eigen::Lower>();
          Eigen::LLT<MatrixXd> llt(full);
          if (llt.info() != Eigen::Success) throw NumericalError("exact posterior is not SPD");
          exact = DenseGaussian{llt.solve(projection), llt.solve(MatrixXd::Identity(d, d))};
        }
        for (std::size_t i = 0; i < beliefs.size(); ++i) {
          const double kl = exact ? gaussian_kl(beliefs[i], *exact) : std::nan("");
          report.rows.push_back({t, "lrvga" + suffix, cfg.p[i], 1, kl, 0.0,
                                 wall_column(cfg, watch.total(timed[i]))});
        }
        if (dense) {
          report.rows.push_back({t, "kalman" + suffix, d, 0, gaussian_kl(*kalman, *exact), 0.0,
                                 wall_column(cfg, watch.total(timed.back()))});
        }
        ++next;
      }
    }
    heap_window.finish(report.memory);
    watch.report(report, timed, t);
    for (std::size_t i = 0; i < beliefs.size(); ++i) {
      report.summary.emplace_back(timed[i] + "/mean_norm", format_exact(beliefs[i].mean.norm()));
      report.summary.emplace_back(timed[i] + "/precision_trace",
                                  format_exact(beliefs[i].precision.trace()));
    }
    const Index max_p = *std::max_element(cfg.p.begin(), cfg.p.end());
    report.memory.analytic_bytes = 8L * d * (max_p + 1);
  }
  return report;
}

// ------------------------------------------------------------------ logistic

RunReport run_logistic_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  RunReport report;
  report.config = cfg;

  RegressionSource src = regression_source(cfg, true);
  report.input_scale = src.scale;
  const Index d = src.d;
  check_ranks(cfg, d);
  const std::vector<Observation> observations = take(*src.stream, static_cast<std::size_t>(src.n));
  const Dataset data = Dataset::from(observations, d);
  const long n = static_cast<long>(observations.size());
  const std::vector<long> checkpoints = log_checkpoints(n, cfg.checkpoints);
  const InnerLoops loops = loops_for(cfg, d);

  for (double sigma0 : cfg.sigma0) {
    const std::string suffix = sigma_suffix(cfg, sigma0);
    const BatchLogDensity logpost = [&data, sigma0](const MatrixXd& thetas) {
      return logposterior_logistic(thetas, data, sigma0);
    };
    const DenseGaussian laplace = laplace_logistic(data, sigma0);

    Stopwatch watch;
    std::vector<std::string> timed;
    for (Index p : cfg.p) {
      const std::string name = "lrvga" + suffix;
      const std::string tag = name + "/" + p_tag(p);
      timed.push_back(tag);
      GaussianBelief belief{VectorXd::Zero(d), initial_prior(cfg, d, p, sigma0, "init/" + p_tag(p))};
      std::size_t next = 0;
      for (long t = 1; t <= n; ++t) {
        const auto t0 = Clock::now();
        belief = lrvga_logistic_step(belief, observations[static_cast<std::size_t>(t - 1)], loops);
        watch.add(tag, elapsed_ms(t0));
        if (next < checkpoints.size() && checkpoints[next] == t) {
          const KlEstimate kl = mc_kl_to_posterior(belief, logpost, cfg.kl_samples, kl_seed(cfg, next));
          report.rows.push_back({t, name, p, 1, kl.value, kl.std_error,
                                 wall_column(cfg, watch.total(tag))});
          ++next;
        }
      }
      const double cosine =
          belief.mean.dot(laplace.mean) / (belief.mean.norm() * laplace.mean.norm());
      report.summary.emplace_back(tag + "/cosine_to_map", format_exact(cosine));
      report.summary.emplace_back(tag + "/mean_norm", format_exact(belief.mean.norm()));
    }
    const KlEstimate kl =
        mc_kl_to_posterior(laplace, logpost, cfg.kl_samples, kl_seed(cfg, checkpoints.size() - 1));
    report.rows.push_back({n, "laplace" + suffix, d, 0, kl.value, kl.std_error, 0.0});
    report.summary.emplace_back("laplace" + suffix + "/map_norm", format_exact(laplace.mean.norm()));
    watch.report(report, timed, n);
  }
  const Index max_p = *std::max_element(cfg.p.begin(), cfg.p.end());
  report.memory.analytic_bytes = 8L * d * (max_p + 1);
  return report;
}

// ----------------------------------------------------------------- nonlinear

RunReport run_nonlinear_ablation(const ExperimentConfig& cfg) {
  validate(cfg);
  RunReport report;
  report.config = cfg;

  RegressionSource src = regression_source(cfg, true);
  report.input_scale = src.scale;
  const Index d = src.d;
  check_ranks(cfg, d);
  const std::vector<Observation> observations = take(*src.stream, static_cast<std::size_t>(src.n));
  const Dataset data = Dataset::from(observations, d);
  const long n = static_cast<long>(observations.size());
  const std::vector<long> checkpoints = log_checkpoints(n, cfg.checkpoints);
  const InnerLoops loops = loops_for(cfg, d);
  const LogisticModel model;

  const std::size_t cells = std::max(cfg.k_hess.size(), cfg.k_grad.size());
  auto k_hess = [&](std::size_t i) { return cfg.k_hess[cfg.k_hess.size() == 1 ? 0 : i]; };
  auto k_grad = [&](std::size_t i) { return cfg.k_grad[cfg.k_grad.size() == 1 ? 0 : i]; };
  const VectorXd query = observations.back().dense();

  Stopwatch watch;
  std::vector<std::string> timed;
  Index max_k = 1;
  for (double sigma0 : cfg.sigma0) {
    const std::string sig = "@sigma0=" + format_double(sigma0);
    const BatchLogDensity logpost = [&data, sigma0](const MatrixXd& thetas) {
      return logposterior_logistic(thetas, data, sigma0);
    };
    for (Index p : cfg.p) {
      const FaPrecision prior = initial_prior(cfg, d, p, sigma0, "init/" + p_tag(p));

      // Closed-form expectations.
      const std::string base_name = "closed-form" + sig;
      const std::string base_tag = base_name + "/" + p_tag(p);
      timed.push_back(base_tag);
      GaussianBelief belief{VectorXd::Zero(d), prior};
      std::size_t next = 0;
      for (long t = 1; t <= n; ++t) {
        const auto t0 = Clock::now();
        belief = lrvga_logistic_step(belief, observations[static_cast<std::size_t>(t - 1)], loops);
        watch.add(base_tag, elapsed_ms(t0));
        if (next < checkpoints.size() && checkpoints[next] == t) {
          const KlEstimate kl = mc_kl_to_posterior(belief, logpost, cfg.kl_samples, kl_seed(cfg, next));
          report.rows.push_back({t, base_name, p, 0, kl.value, kl.std_error,
                                 wall_column(cfg, watch.total(base_tag))});
          ++next;
        }
      }
      const GaussianBelief baseline_final = belief;

      for (std::size_t cell = 0; cell < cells; ++cell) {
        NonlinearOptions options;
        options.hessian_samples = k_hess(cell);
        options.gradient_samples = k_grad(cell);
        options.loops = loops;
        options.scheme = cfg.scheme;
        options.fresh_samples = cfg.fresh_samples;
        max_k = std::max({max_k, options.hessian_samples, options.gradient_samples});
        const Index k_label = options.gradient_samples;
        std::string name = "sampled-" + to_string(cfg.scheme) + sig;
        if (options.hessian_samples != options.gradient_samples) {
          name += "/k_hess=" + std::to_string(options.hessian_samples);
        }
        const std::string tag = name + "/" + p_tag(p) + "/K=" + std::to_string(k_label);
        timed.push_back(tag);
        EnsembleSampler sampler(prior, derive_seed(cfg.seed, "sampler/" + tag));
        GaussianBelief run{VectorXd::Zero(d), prior};
        next = 0;
        for (long t = 1; t <= n; ++t) {
          const auto t0 = Clock::now();
          run = lrvga_nonlinear_step(run, observations[static_cast<std::size_t>(t - 1)], model,
                                     options, sampler);
          watch.add(tag, elapsed_ms(t0));
          if (next < checkpoints.size() && checkpoints[next] == t) {
            const KlEstimate kl = mc_kl_to_posterior(run, logpost, cfg.kl_samples, kl_seed(cfg, next));
            report.rows.push_back({t, name, p, k_label, kl.value, kl.std_error,
                                   wall_column(cfg, watch.total(tag))});
            ++next;
          }
        }
        report.sampling.push_back(sampling_row(baseline_final, query, sigma0, k_label,
                                               derive_seed(cfg.seed, "table/" + tag)));
      }
    }
  }
  watch.report(report, timed, n);
  const Index max_p = *std::max_element(cfg.p.begin(), cfg.p.end());
  report.memory.analytic_bytes = 8L * d * (max_p + max_k);
  return report;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::kCovariance: return run_covariance_experiment(cfg);
    case ExperimentKind::kLinear: return run_linear_experiment(cfg);
    case ExperimentKind::kLogistic: return run_logistic_experiment(cfg);
    case ExperimentKind::kNonlinear: return run_nonlinear_ablation(cfg);
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace lrvga
