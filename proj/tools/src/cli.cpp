#include "krrlab_cli/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "krrlab/error.hpp"
#include "krrlab/experiments.hpp"
#include "krrlab/format.hpp"
#include "krrlab/krr.hpp"
#include "krrlab/rates.hpp"
#include "krrlab/spectrum.hpp"
#include "krrlab/target.hpp"

namespace krrlab::cli {

namespace {

using json = nlohmann::json;

// Inline JSON when the text starts with '{', otherwise a file path.
json read_json_arg(const std::string& text, const std::string& field) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(field, field + " is not valid JSON: " + e.what());
    }
  }
  std::ifstream in(text);
  if (!in) throw ConfigError(field, "cannot open " + field + " file '" + text + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(field, field + " file '" + text + "' is not valid JSON: " + e.what());
  }
}

// --seed wins, then KRRLAB_SEED, then the fallback.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  SweepConfig probe;
  probe.root_seed = fallback;
  return apply_seed_override(probe).root_seed;
}

ProductKernel kernel_from_arg(const std::string& text, std::optional<int> d) {
  auto j = read_json_arg(text, "kernel");
  if (!j.is_object()) throw ConfigError("kernel", "kernel must be a JSON object");
  if (d) {
    if (j.contains("factors")) throw ConfigError("d", "--d cannot resize a mixed kernel");
    j["d"] = *d;
  }
  if (!j.contains("d")) throw ConfigError("kernel.d", "kernel JSON has no 'd'; pass --d");
  return ProductKernel::from_json(j);
}

std::vector<double> parse_grid(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(item, &pos);
      if (item.find_first_not_of(" \t", pos) != std::string::npos) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(field, field + " entry '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(field, field + " must list at least one value");
  return out;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("out", "cannot write '" + path + "'");
  f << text;
}

std::string cell(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

// ---------------------------------------------------------------- subcommands

struct RatesArgs {
  double s = 1.0;
  double gamma_min = 0.1, gamma_max = 6.0, step = 0.01;
  std::string axis = "d", which = "both", out;
};

int cmd_rates(const RatesArgs& a, std::ostream& out) {
  const auto axis = a.axis == "n" ? CurveAxis::N : CurveAxis::D;
  const auto which = a.which == "exact" ? CurveSelection::Exact
                     : a.which == "minimax" ? CurveSelection::Minimax
                                            : CurveSelection::Both;
  if (!(a.s > 0.0)) throw ConfigError("s", "s must be positive");
  if (!(a.step > 0.0)) throw ConfigError("step", "step must be positive");
  if (!(a.gamma_min > 0.0) || !(a.gamma_max >= a.gamma_min)) {
    throw ConfigError("gamma-min", "need 0 < gamma-min <= gamma-max");
  }
  const auto curve = rate_curve(a.s, gamma_grid(a.gamma_min, a.gamma_max, a.step), which, axis);
  emit(curve.to_csv(), a.out, out);
  return kExitOk;
}

struct SpectrumArgs {
  std::string kernel, lambda_grid, target, out;
  std::optional<int> d;
  int k_max = 6;
  double s = 1.0;
  std::optional<std::uint64_t> seed;
};

int cmd_spectrum(const SpectrumArgs& a, std::ostream& out) {
  const auto pk = kernel_from_arg(a.kernel, a.d);
  if (a.k_max < 0) throw ConfigError("k-max", "k-max must be >= 0");
  const auto grid = parse_grid(a.lambda_grid, "lambda-grid");
  for (double v : grid) {
    if (!(v > 0.0)) throw ConfigError("lambda-grid", "lambda must be positive");
  }
  const auto sp = build_spectrum(pk, a.k_max);

  std::optional<CoefficientSpec> coeffs;
  if (!a.target.empty()) {
    const auto req = TargetRequest::from_json(read_json_arg(a.target, "target"));
    if (req.kind == TargetKind::KernelSections) {
      throw ConfigError("target.kind", "spectrum functionals need an eigenfunction or coefficients target");
    }
    Rng rng(derive_seed(resolve_seed(a.seed, 0), static_cast<std::uint64_t>(pk.dim()), 0));
    coeffs = make_target(pk, req, rng).level_masses(sp, a.s);
  }

  std::ostringstream csv;
  csv << "lambda,n1,n2,r2,flam_bound,tail_err\n";
  for (double lam : grid) {
    const auto v1 = n1(sp, lam);
    const auto v2 = n2(sp, lam);
    csv << format_double(lam) << ',' << format_double(v1.value) << ',' << format_double(v2.value) << ',';
    if (coeffs) csv << cell(r2(sp, *coeffs, lam)) << ',' << cell(f_lambda_sup_bound(sp, *coeffs, lam));
    else csv << ',';
    csv << ',' << format_double(std::max(v1.tail_error, v2.tail_error)) << '\n';
  }
  emit(csv.str(), a.out, out);
  return kExitOk;
}

struct RunArgs {
  std::string kernel, target, out;
  std::optional<int> d;
  long long n = 100;
  double lambda = 0.0;
  double sigma_eps = 0.1;
  int test_m = kDefaultTestSamples;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  if (!(a.lambda > 0.0) || !std::isfinite(a.lambda)) throw ConfigError("lambda", "lambda must be positive");
  if (a.n < 1) throw ConfigError("n", "n must be >= 1");
  if (a.test_m < 1) throw ConfigError("test-m", "test-m must be >= 1");
  if (!(a.sigma_eps >= 0.0)) throw ConfigError("sigma-eps", "sigma-eps must be >= 0");
  const auto pk = kernel_from_arg(a.kernel, a.d);
  const auto req = a.target.empty() ? TargetRequest{} : TargetRequest::from_json(read_json_arg(a.target, "target"));
  const auto seed = resolve_seed(a.seed, 0);
  const auto d = static_cast<std::uint64_t>(pk.dim());

  Rng target_rng(derive_seed(seed, d, 0));
  const auto target = make_target(pk, req, target_rng, derive_seed(seed, d, 0));

  Rng rng(derive_seed(seed, d, 1));
  TrainingSet data;
  data.X = pk.sample(rng, static_cast<int>(a.n));
  data.y = target.evaluate_rows(data.X);
  std::normal_distribution<double> noise(0.0, a.sigma_eps);
  if (a.sigma_eps > 0.0) {
    for (Eigen::Index i = 0; i < data.y.size(); ++i) data.y(i) += noise(rng);
  }
  const auto model = fit(pk, data, a.lambda);
  const auto err = generalization_error(model, target, a.test_m, rng);
  Rng bv_rng(derive_seed(seed, d, 2));
  const auto bv = bias_variance(pk, data.X, target, a.sigma_eps, a.lambda, a.test_m, bv_rng);

  const json report = {{"kernel", pk.to_json()},
                       {"target", target.to_json()},
                       {"n", a.n},
                       {"lambda", a.lambda},
                       {"sigma_eps", a.sigma_eps},
                       {"seed", seed},
                       {"test_m", a.test_m},
                       {"error", {{"mean", err.mean}, {"stderr", err.std_error}}},
                       {"bias2", {{"mean", bv.bias2.mean}, {"stderr", bv.bias2.std_error}}},
                       {"variance", {{"mean", bv.variance.mean}, {"stderr", bv.variance.std_error}}},
                       {"jitter", model.jitter()},
                       {"dual_residual", model.dual_residual()}};
  emit(report.dump(2) + "\n", a.out, out);
  return kExitOk;
}

struct SweepArgs {
  std::string config;
  std::string results_dir = "results";
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

SweepConfig load_config(const SweepArgs& a, SweepOptions& opts) {
  auto cfg = SweepConfig::from_json(read_json_arg(a.config, "config"));
  cfg.root_seed = resolve_seed(a.seed, cfg.root_seed);
  opts.apply_env_seed = false;
  if (a.workers) {
    if (*a.workers < 1) throw ConfigError("workers", "workers must be >= 1");
    opts.workers = a.workers;
  }
  return cfg;
}

SweepOptions reporting_options(std::ostream& err) {
  SweepOptions opts;
  opts.on_failure = [&err](int d, int trial, const std::string& msg) {
    err << "warning: trial " << trial << " at d = " << d << " failed: " << msg << "\n";
  };
  return opts;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  auto opts = reporting_options(err);
  const auto cfg = load_config(a, opts);
  const auto result = run_sweep(cfg, opts);
  const auto path = result.persist(a.results_dir);
  out << result.to_csv();
  err << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_verify(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  auto opts = reporting_options(err);
  const auto cfg = load_config(a, opts);
  const auto result = run_sweep(cfg, opts);
  const auto path = result.persist(a.results_dir);
  const auto report = verify_theory(cfg, result);
  out << report.to_json().dump(2) << "\n";
  err << "wrote " << path.string() << "\n";
  return report.pass ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Large-dimensional kernel ridge regression rates and experiments", "krrlab"};
  app.require_subcommand(1);

  RatesArgs rates;
  auto* c_rates = app.add_subcommand("rates", "Exact and minimax rate curves as CSV");
  c_rates->add_option("--s", rates.s, "Source condition s")->required();
  c_rates->add_option("--gamma-min", rates.gamma_min)->capture_default_str();
  c_rates->add_option("--gamma-max", rates.gamma_max)->capture_default_str();
  c_rates->add_option("--step", rates.step)->capture_default_str();
  c_rates->add_option("--axis", rates.axis, "Exponent axis")->check(CLI::IsMember({"d", "n"}))->capture_default_str();
  c_rates->add_option("--which", rates.which)->check(CLI::IsMember({"exact", "minimax", "both"}))->capture_default_str();
  c_rates->add_option("--out", rates.out, "Output file (default stdout)");
  std::optional<std::uint64_t> rates_seed;
  c_rates->add_option("--seed", rates_seed, "Accepted for uniformity; rates are deterministic");

  SpectrumArgs spectrum;
  auto* c_spec = app.add_subcommand("spectrum", "Spectral functionals over a lambda grid as CSV");
  c_spec->add_option("--kernel", spectrum.kernel, "Kernel JSON (inline or file)")->required();
  c_spec->add_option("--d", spectrum.d, "Dimension, if the kernel JSON has none");
  c_spec->add_option("--k-max", spectrum.k_max)->capture_default_str();
  c_spec->add_option("--lambda-grid", spectrum.lambda_grid, "Comma-separated lambda values")->required();
  c_spec->add_option("--target", spectrum.target, "Eigenfunction or coefficients target JSON for r2");
  c_spec->add_option("--s", spectrum.s, "Source condition for r2")->capture_default_str();
  c_spec->add_option("--seed", spectrum.seed);
  c_spec->add_option("--out", spectrum.out);

  RunArgs runa;
  auto* c_run = app.add_subcommand("run", "Single fit with error and bias/variance report");
  c_run->add_option("--kernel", runa.kernel)->required();
  c_run->add_option("--d", runa.d);
  c_run->add_option("--target", runa.target, "Target JSON (default: 3 kernel sections)");
  c_run->add_option("--n", runa.n)->capture_default_str();
  c_run->add_option("--lambda", runa.lambda)->required();
  c_run->add_option("--sigma-eps", runa.sigma_eps)->capture_default_str();
  c_run->add_option("--test-m", runa.test_m)->capture_default_str();
  c_run->add_option("--seed", runa.seed);
  c_run->add_option("--out", runa.out);

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Run a sweep config and persist results");
  SweepArgs verify;
  auto* c_verify = app.add_subcommand("verify", "Run a sweep and compare its slope with theory");
  for (auto [cmd, a] : {std::pair{c_sweep, &sweep}, std::pair{c_verify, &verify}}) {
    cmd->add_option("--config", a->config, "Sweep config JSON (file or inline)")->required();
    cmd->add_option("--results-dir", a->results_dir)->capture_default_str();
    cmd->add_option("--workers", a->workers, "Overrides KRRLAB_WORKERS");
    cmd->add_option("--seed", a->seed, "Overrides root_seed and KRRLAB_SEED");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (c_rates->parsed()) return cmd_rates(rates, out);
    if (c_spec->parsed()) return cmd_spectrum(spectrum, out);
    if (c_run->parsed()) return cmd_run(runa, out);
    if (c_sweep->parsed()) return cmd_sweep(sweep, out, err);
    if (c_verify->parsed()) return cmd_verify(verify, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.field() << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitConfig;
}

}  // namespace krrlab::cli
