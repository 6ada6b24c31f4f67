#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "krrlab/kernels.hpp"
#include "krrlab/krr.hpp"
#include "krrlab/rates.hpp"
#include "krrlab/target.hpp"

namespace krrlab {

enum class LambdaRuleKind { TheoreticalSchedule, Fixed, GridSearchOracle };

/// How each sweep point picks lambda.
///   TheoreticalSchedule  lambda = multiplier * d^{-l}, l from exact_rate(gamma, source_s)
///   Fixed                lambda = value at every d
///   GridSearchOracle     per trial, the grid value with the smallest test error
struct LambdaRule {
  LambdaRuleKind kind = LambdaRuleKind::TheoreticalSchedule;
  double multiplier = 1.0;
  double value = 0.0;
  std::vector<double> grid;

  nlohmann::json to_json() const;
  static LambdaRule from_json(const nlohmann::json& j);
};

struct SweepConfig {
  std::string name = "sweep";
  nlohmann::json kernel = {{"kind", "gaussian"}, {"params", {{"ell", 1.0}, {"sigma", 1.0}}}};
  TargetRequest target;
  double gamma = 1.5;
  std::vector<int> d_list;
  int trials = 30;
  double sigma_eps = 0.1;
  LambdaRule lambda_rule;
  double source_s = 1.0;   ///< drives the lambda schedule and the exact rate
  double minimax_s = 1.0;  ///< the minimax rate listed in verification reports
  int test_m = kDefaultTestSamples;
  std::uint64_t root_seed = 0;
  double drop_fraction = 0.2;
  double slope_tolerance = 0.2;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing fields keep their defaults; unknown fields are rejected.
  static SweepConfig from_json(const nlohmann::json& j);
  static SweepConfig load(const std::filesystem::path& path);

  /// First 16 hex digits of SHA-256 over the canonical JSON dump.
  std::string hash() const;
};

/// Copy of `cfg` with KRRLAB_SEED applied when set. Throws ConfigError on a malformed value.
SweepConfig apply_seed_override(SweepConfig cfg);

/// Worker count from KRRLAB_WORKERS, else hardware concurrency (at least 1).
int worker_count_from_env();

/// ceil(d^gamma), treating values within 1e-9 of an integer as that integer.
long long sample_size(int d, double gamma);

/// The lambda a non-oracle rule assigns at dimension d.
double scheduled_lambda(const SweepConfig& cfg, int d);

struct SweepRecord {
  int d = 0;
  long long n = 0;
  double lambda = 0.0;  ///< oracle rule: geometric mean of the per-trial picks
  double mean_error = 0.0;
  double std_error = 0.0;
  std::vector<double> trial_errors;   ///< successful trials, in trial order
  std::vector<double> trial_lambdas;  ///< oracle rule only
  int failed = 0;
  nlohmann::json target;
};

struct SweepResult {
  SweepConfig config;  ///< effective config (seed override applied)
  std::string config_hash;
  std::vector<SweepRecord> records;
  int workers = 1;
  double elapsed_seconds = 0.0;
  std::vector<double> per_d_seconds;

  /// Deterministic content only; no timing or worker count.
  nlohmann::json to_json() const;
  nlohmann::json timing_json() const;
  /// d, n, lambda, mean_error, stderr with 17 significant digits.
  std::string to_csv() const;

  /// Writes <dir>/<hash>.json, .csv and .timing.json; returns the .json path.
  std::filesystem::path persist(const std::filesystem::path& dir) const;
};

struct SweepOptions {
  std::optional<int> workers;  ///< overrides KRRLAB_WORKERS
  bool apply_env_seed = true;
  /// Receives (d, trial, message) for every failed trial.
  std::function<void(int, int, const std::string&)> on_failure;
};

/// Runs every (d, trial) pair on a worker pool. Trial t at dimension d uses
/// the stream derive_seed(root_seed, d, t + 1); the target uses
/// derive_seed(root_seed, d, 0). Failed fits are excluded; NumericalError if
/// more than 10% of all trials fail.
SweepResult run_sweep(const SweepConfig& cfg, const SweepOptions& options = {});

struct SlopeFit {
  double slope = 0.0;
  double std_error = 0.0;
  double intercept = 0.0;
  double r2_fit = 0.0;
  int points = 0;
};

/// OLS of ln(error) on ln(d) after dropping floor(drop_fraction * N) smallest d.
/// Throws std::invalid_argument with fewer than 3 retained points or non-positive values.
SlopeFit fit_loglog_slope(const std::vector<double>& d, const std::vector<double>& errors, double drop_fraction);
SlopeFit fit_loglog_slope(const SweepResult& result, double drop_fraction);

struct VerifyReport {
  SlopeFit fit;
  RateResult exact;
  RateResult minimax;
  double tolerance = 0.2;
  bool pass = false;

  nlohmann::json to_json() const;
};

VerifyReport verify_theory(const SweepConfig& cfg, const SweepResult& result);
/// Runs the sweep first.
VerifyReport verify_theory(const SweepConfig& cfg);

}  // namespace krrlab
