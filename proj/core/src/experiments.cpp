#include "krrlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "krrlab/codec.hpp"
#include "krrlab/error.hpp"
#include "krrlab/format.hpp"

namespace krrlab {

namespace {

using json = nlohmann::json;

const char* rule_name(LambdaRuleKind k) {
  switch (k) {
    case LambdaRuleKind::TheoreticalSchedule: return "theoretical_schedule";
    case LambdaRuleKind::Fixed: return "fixed";
    case LambdaRuleKind::GridSearchOracle: return "grid_search_oracle";
  }
  return "?";
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "field '" + path + "' is missing or has the wrong type");
  }
}

template <class T>
void read_optional(const json& j, const std::string& key, T& out, const std::string& path) {
  if (j.contains(key)) out = get_field<T>(j, key, path);
}

double finite_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field, std::string(field) + " must be positive and finite");
  return v;
}

}  // namespace

// ------------------------------------------------------------------ LambdaRule

json LambdaRule::to_json() const {
  json j = {{"kind", rule_name(kind)}};
  switch (kind) {
    case LambdaRuleKind::TheoreticalSchedule: j["multiplier"] = multiplier; break;
    case LambdaRuleKind::Fixed: j["value"] = value; break;
    case LambdaRuleKind::GridSearchOracle: j["grid"] = grid; break;
  }
  return j;
}

LambdaRule LambdaRule::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("lambda_rule", "lambda_rule must be a JSON object");
  const auto kind = get_field<std::string>(j, "kind", "lambda_rule.kind");
  LambdaRule r;
  if (kind == "theoretical_schedule") {
    r.kind = LambdaRuleKind::TheoreticalSchedule;
    read_optional(j, "multiplier", r.multiplier, "lambda_rule.multiplier");
  } else if (kind == "fixed") {
    r.kind = LambdaRuleKind::Fixed;
    r.value = get_field<double>(j, "value", "lambda_rule.value");
  } else if (kind == "grid_search_oracle") {
    r.kind = LambdaRuleKind::GridSearchOracle;
    r.grid = get_field<std::vector<double>>(j, "grid", "lambda_rule.grid");
  } else {
    throw ConfigError("lambda_rule.kind",
                      "unknown lambda_rule.kind '" + kind + "' (expected theoretical_schedule, fixed or grid_search_oracle)");
  }
  return r;
}

// ----------------------------------------------------------------- SweepConfig

void SweepConfig::validate() const {
  if (d_list.empty()) throw ConfigError("d_list", "d_list must be nonempty");
  for (std::size_t i = 0; i < d_list.size(); ++i) {
    if (d_list[i] < 1) throw ConfigError("d_list", "d_list entries must be positive");
    if (i > 0 && d_list[i] <= d_list[i - 1]) throw ConfigError("d_list", "d_list must be strictly increasing");
  }
  if (trials < 1) throw ConfigError("trials", "trials must be >= 1");
  if (test_m < 1) throw ConfigError("test_m", "test_m must be >= 1");
  finite_positive(gamma, "gamma");
  if (!(sigma_eps >= 0.0) || !std::isfinite(sigma_eps)) throw ConfigError("sigma_eps", "sigma_eps must be >= 0");
  finite_positive(source_s, "source_s");
  finite_positive(minimax_s, "minimax_s");
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) throw ConfigError("drop_fraction", "drop_fraction must lie in [0, 1)");
  if (!(slope_tolerance > 0.0)) throw ConfigError("slope_tolerance", "slope_tolerance must be positive");

  switch (lambda_rule.kind) {
    case LambdaRuleKind::TheoreticalSchedule: {
      finite_positive(lambda_rule.multiplier, "lambda_rule.multiplier");
      if (!exact_rate({gamma, source_s}).covered()) {
        throw ConfigError("source_s", "no lambda schedule: (gamma, source_s) lies outside the covered regime");
      }
      break;
    }
    case LambdaRuleKind::Fixed:
      if (!(lambda_rule.value > 0.0) || !std::isfinite(lambda_rule.value)) {
        throw ConfigError("lambda_rule.value", "lambda must be positive");
      }
      break;
    case LambdaRuleKind::GridSearchOracle:
      if (lambda_rule.grid.empty()) throw ConfigError("lambda_rule.grid", "lambda_rule.grid must be nonempty");
      for (double v : lambda_rule.grid) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("lambda_rule.grid", "lambda must be positive");
      }
      break;
  }

  const KernelTemplate tmpl(kernel);
  for (int d : d_list) {
    try {
      (void)tmpl.instantiate(d);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("kernel", "kernel is invalid at d = " + std::to_string(d) + ": " + e.what());
    }
  }
  if (target.kind == TargetKind::KernelSections && target.anchors < 1) {
    throw ConfigError("target.anchors", "target.anchors must be >= 1");
  }
  if (target.kind == TargetKind::Eigenfunction && (target.level < 0 || target.index < 0)) {
    throw ConfigError("target.level", "target.level and target.index must be >= 0");
  }
}

json SweepConfig::to_json() const {
  return {{"name", name},
          {"kernel", kernel},
          {"target", target.to_json()},
          {"gamma", gamma},
          {"d_list", d_list},
          {"trials", trials},
          {"sigma_eps", sigma_eps},
          {"lambda_rule", lambda_rule.to_json()},
          {"source_s", source_s},
          {"minimax_s", minimax_s},
          {"test_m", test_m},
          {"root_seed", root_seed},
          {"drop_fraction", drop_fraction},
          {"slope_tolerance", slope_tolerance}};
}

SweepConfig SweepConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "sweep config must be a JSON object");
  static const std::set<std::string> known = {"name",   "kernel",      "target",     "gamma",     "d_list",
                                              "trials", "sigma_eps",   "lambda_rule", "source_s", "minimax_s",
                                              "test_m", "root_seed",   "drop_fraction", "slope_tolerance"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ConfigError(item.key(), "unknown config field '" + item.key() + "'");
  }
  SweepConfig c;
  read_optional(j, "name", c.name, "name");
  if (j.contains("kernel")) c.kernel = j.at("kernel");
  if (j.contains("target")) c.target = TargetRequest::from_json(j.at("target"));
  read_optional(j, "gamma", c.gamma, "gamma");
  read_optional(j, "d_list", c.d_list, "d_list");
  read_optional(j, "trials", c.trials, "trials");
  read_optional(j, "sigma_eps", c.sigma_eps, "sigma_eps");
  if (j.contains("lambda_rule")) c.lambda_rule = LambdaRule::from_json(j.at("lambda_rule"));
  read_optional(j, "source_s", c.source_s, "source_s");
  c.minimax_s = c.source_s;
  read_optional(j, "minimax_s", c.minimax_s, "minimax_s");
  read_optional(j, "test_m", c.test_m, "test_m");
  read_optional(j, "root_seed", c.root_seed, "root_seed");
  read_optional(j, "drop_fraction", c.drop_fraction, "drop_fraction");
  read_optional(j, "slope_tolerance", c.slope_tolerance, "slope_tolerance");
  c.validate();
  return c;
}

SweepConfig SweepConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config", "config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::string SweepConfig::hash() const { return codec::sha256_hex(to_json().dump()).substr(0, 16); }

SweepConfig apply_seed_override(SweepConfig cfg) {
  if (const char* env = std::getenv("KRRLAB_SEED"); env && *env) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') {
      throw ConfigError("KRRLAB_SEED", "KRRLAB_SEED must be an unsigned 64-bit integer");
    }
    cfg.root_seed = v;
  }
  return cfg;
}

int worker_count_from_env() {
  if (const char* env = std::getenv("KRRLAB_WORKERS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError("KRRLAB_WORKERS", "KRRLAB_WORKERS must be a positive integer");
    return static_cast<int>(std::min<long>(v, 1024));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

long long sample_size(int d, double gamma) {
  const double v = std::pow(static_cast<double>(d), gamma);
  const double r = std::round(v);
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, r)) return static_cast<long long>(r);
  return static_cast<long long>(std::ceil(v));
}

double scheduled_lambda(const SweepConfig& cfg, int d) {
  switch (cfg.lambda_rule.kind) {
    case LambdaRuleKind::TheoreticalSchedule: {
      const auto rate = exact_rate({cfg.gamma, cfg.source_s});
      return cfg.lambda_rule.multiplier * std::pow(static_cast<double>(d), -rate.lambda_exponent);
    }
    case LambdaRuleKind::Fixed: return cfg.lambda_rule.value;
    case LambdaRuleKind::GridSearchOracle: break;
  }
  throw std::logic_error("grid-search oracle has no scheduled lambda");
}

// ------------------------------------------------------------------- SweepResult

json SweepResult::to_json() const {
  json recs = json::array();
  for (const auto& r : records) {
    json jr = {{"d", r.d},
               {"n", r.n},
               {"lambda", r.lambda},
               {"mean_error", r.mean_error},
               {"stderr", r.std_error},
               {"trial_errors", r.trial_errors},
               {"failed", r.failed},
               {"target", r.target}};
    if (!r.trial_lambdas.empty()) jr["trial_lambdas"] = r.trial_lambdas;
    recs.push_back(std::move(jr));
  }
  return {{"config", config.to_json()}, {"config_hash", config_hash}, {"records", std::move(recs)}};
}

json SweepResult::timing_json() const {
  json per_d = json::array();
  for (std::size_t i = 0; i < records.size() && i < per_d_seconds.size(); ++i) {
    per_d.push_back({{"d", records[i].d}, {"seconds", per_d_seconds[i]}});
  }
  return {{"config_hash", config_hash}, {"workers", workers}, {"elapsed_seconds", elapsed_seconds}, {"per_d", per_d}};
}

std::string SweepResult::to_csv() const {
  std::ostringstream out;
  out << "d,n,lambda,mean_error,stderr\n";
  for (const auto& r : records) {
    out << r.d << ',' << r.n << ',' << format_double(r.lambda) << ',' << format_double(r.mean_error) << ','
        << format_double(r.std_error) << '\n';
  }
  return out.str();
}

std::filesystem::path SweepResult::persist(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
  };
  const auto base = dir / config_hash;
  const auto json_path = std::filesystem::path(base.string() + ".json");
  write(json_path, to_json().dump(2) + "\n");
  write(base.string() + ".csv", to_csv());
  write(base.string() + ".timing.json", timing_json().dump(2) + "\n");
  return json_path;
}

// --------------------------------------------------------------------- run_sweep

namespace {

struct TrialOutcome {
  bool ok = false;
  double error = 0.0;
  double lambda = 0.0;
  std::string message;
};

struct PointContext {
  int d = 0;
  long long n = 0;
  double lambda = 0.0;
  ProductKernel kernel;
  TargetSpec target;
};

TrialOutcome run_trial(const SweepConfig& cfg, const PointContext& pt, int trial) {
  TrialOutcome out;
  try {
    Rng rng(derive_seed(cfg.root_seed, static_cast<std::uint64_t>(pt.d), static_cast<std::uint64_t>(trial) + 1));
    TrainingSet data;
    data.X = pt.kernel.sample(rng, static_cast<int>(pt.n));
    data.y = pt.target.evaluate_rows(data.X);
    if (cfg.sigma_eps > 0.0) {
      std::normal_distribution<double> noise(0.0, cfg.sigma_eps);
      for (Eigen::Index i = 0; i < data.y.size(); ++i) data.y(i) += noise(rng);
    }

    if (cfg.lambda_rule.kind != LambdaRuleKind::GridSearchOracle) {
      const auto model = fit(pt.kernel, data, pt.lambda);
      out.error = generalization_error(model, pt.target, cfg.test_m, rng).mean;
      out.lambda = pt.lambda;
    } else {
      // Shared test draw across the grid so the pick is a fair comparison.
      const RowMatrix Xt = pt.kernel.sample(rng, cfg.test_m);
      const Vector ft = pt.target.evaluate_rows(Xt);
      const RowMatrix Kt = pt.kernel.cross(Xt, data.X);
      out.error = std::numeric_limits<double>::infinity();
      int successes = 0;
      for (double lam : cfg.lambda_rule.grid) {
        try {
          const auto model = fit(pt.kernel, data, lam);
          const double e = (Kt * model.alpha() - ft).squaredNorm() / static_cast<double>(cfg.test_m);
          ++successes;
          if (e < out.error) {
            out.error = e;
            out.lambda = lam;
          }
        } catch (const NumericalError&) {
        }
      }
      if (successes == 0) throw NumericalError("every grid value failed to fit");
    }
    if (!std::isfinite(out.error)) throw NumericalError("non-finite test error");
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.message = e.what();
  }
  return out;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& input, const SweepOptions& options) {
  const SweepConfig cfg = options.apply_env_seed ? apply_seed_override(input) : input;
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  SweepResult result;
  result.config = cfg;
  result.config_hash = cfg.hash();
  result.workers = options.workers ? std::max(1, *options.workers) : worker_count_from_env();

  const KernelTemplate tmpl(cfg.kernel);
  std::vector<PointContext> points;
  points.reserve(cfg.d_list.size());
  for (int d : cfg.d_list) {
    auto pk = tmpl.instantiate(d);
    Rng target_rng(derive_seed(cfg.root_seed, static_cast<std::uint64_t>(d), 0));
    auto target = make_target(pk, cfg.target, target_rng, derive_seed(cfg.root_seed, static_cast<std::uint64_t>(d), 0));
    const double lam = cfg.lambda_rule.kind == LambdaRuleKind::GridSearchOracle ? 0.0 : scheduled_lambda(cfg, d);
    points.push_back(PointContext{d, sample_size(d, cfg.gamma), lam, std::move(pk), std::move(target)});
  }

  const std::size_t per_point = static_cast<std::size_t>(cfg.trials);
  const std::size_t total = points.size() * per_point;
  std::vector<TrialOutcome> outcomes(total);
  std::vector<double> seconds(points.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::mutex seconds_mutex;

  // Largest d first so the expensive tasks do not straggle at the end.
  auto task_at = [&](std::size_t i) {
    const std::size_t p = points.size() - 1 - i / per_point;
    return std::pair{p, static_cast<int>(i % per_point)};
  };
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
      const auto [p, trial] = task_at(i);
      const auto s0 = std::chrono::steady_clock::now();
      outcomes[p * per_point + static_cast<std::size_t>(trial)] = run_trial(cfg, points[p], trial);
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - s0;
      std::lock_guard lock(seconds_mutex);
      seconds[p] += dt.count();
    }
  };

  const int nthreads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(result.workers), total));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }

  std::size_t total_failed = 0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    SweepRecord rec;
    rec.d = points[p].d;
    rec.n = points[p].n;
    rec.target = points[p].target.to_json();
    const bool oracle = cfg.lambda_rule.kind == LambdaRuleKind::GridSearchOracle;
    double log_lambda = 0.0;
    for (int t = 0; t < cfg.trials; ++t) {
      const auto& o = outcomes[p * per_point + static_cast<std::size_t>(t)];
      if (!o.ok) {
        ++rec.failed;
        if (options.on_failure) options.on_failure(rec.d, t, o.message);
        continue;
      }
      rec.trial_errors.push_back(o.error);
      if (oracle) {
        rec.trial_lambdas.push_back(o.lambda);
        log_lambda += std::log(o.lambda);
      }
    }
    total_failed += rec.failed;
    if (rec.trial_errors.empty()) {
      throw NumericalError("sweep failed: every trial failed at d = " + std::to_string(rec.d));
    }
    const auto est = summarize(Eigen::Map<const Vector>(rec.trial_errors.data(),
                                                        static_cast<Eigen::Index>(rec.trial_errors.size())));
    rec.mean_error = est.mean;
    rec.std_error = est.std_error;
    rec.lambda = oracle ? std::exp(log_lambda / static_cast<double>(rec.trial_lambdas.size())) : points[p].lambda;
    result.records.push_back(std::move(rec));
  }

  if (total_failed * 10 > total) {
    throw NumericalError("sweep failed: " + std::to_string(total_failed) + " of " + std::to_string(total) +
                         " trials failed");
  }
  result.per_d_seconds = std::move(seconds);
  result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ------------------------------------------------------------------- slope fits

SlopeFit fit_loglog_slope(const std::vector<double>& d, const std::vector<double>& errors, double drop_fraction) {
  if (d.size() != errors.size()) throw std::invalid_argument("d and error series differ in length");
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) throw std::invalid_argument("drop_fraction must lie in [0, 1)");

  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] < d[b]; });
  const auto drop = static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(d.size())));
  if (d.size() < drop + 3) throw std::invalid_argument("slope fit needs at least 3 retained points");

  std::vector<double> xs, ys;
  for (std::size_t i = drop; i < order.size(); ++i) {
    const double x = d[order[i]], y = errors[order[i]];
    if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("slope fit needs positive d and errors");
    xs.push_back(std::log(x));
    ys.push_back(std::log(y));
  }
  const auto m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("slope fit needs at least two distinct d values");

  SlopeFit f;
  f.points = static_cast<int>(xs.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    sse += r * r;
  }
  f.std_error = std::sqrt(sse / (m - 2.0) / sxx);
  f.r2_fit = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

SlopeFit fit_loglog_slope(const SweepResult& result, double drop_fraction) {
  std::vector<double> d, e;
  for (const auto& r : result.records) {
    d.push_back(r.d);
    e.push_back(r.mean_error);
  }
  return fit_loglog_slope(d, e, drop_fraction);
}

// ------------------------------------------------------------------- verify

json VerifyReport::to_json() const {
  auto rate = [](const RateResult& r) {
    return json{{"case", to_string(r.case_id)},
                {"p", r.p},
                {"d_exponent", r.d_exponent},
                {"n_exponent", r.n_exponent},
                {"log_factor", to_string(r.log_factor)}};
  };
  return {{"slope", fit.slope},
          {"slope_stderr", fit.std_error},
          {"r2_fit", fit.r2_fit},
          {"points", fit.points},
          {"exact", rate(exact)},
          {"minimax", rate(minimax)},
          {"deviation", std::abs(fit.slope - exact.d_exponent)},
          {"tolerance", tolerance},
          {"pass", pass}};
}

VerifyReport verify_theory(const SweepConfig& cfg, const SweepResult& result) {
  VerifyReport rep;
  rep.fit = fit_loglog_slope(result, cfg.drop_fraction);
  rep.exact = exact_rate({cfg.gamma, cfg.source_s});
  rep.minimax = minimax_rate({cfg.gamma, cfg.minimax_s});
  rep.tolerance = cfg.slope_tolerance;
  rep.pass = rep.exact.covered() && std::abs(rep.fit.slope - rep.exact.d_exponent) <= rep.tolerance;
  return rep;
}

VerifyReport verify_theory(const SweepConfig& cfg) { return verify_theory(cfg, run_sweep(cfg)); }

}  // namespace krrlab
