#include "krrlab/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "krrlab/error.hpp"
#include "krrlab/multi_index.hpp"

namespace krrlab {

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive");
}

double level_weight(const LevelSpec& level, SpectrumMode mode) {
  return mode == SpectrumMode::UniformFactorFastPath ? level.multiplicity.value() : 1.0;
}

template <class Term>
double sum_over_levels(const SpectrumModel& sp, Term&& term) {
  CompensatedSum acc;
  for (const auto& level : sp.levels()) {
    const double w = level_weight(level, sp.mode());
    for (double mu : level.eigenvalues) acc.add(w * term(mu));
  }
  return acc.value();
}

}  // namespace

// ----------------------------------------------------------------- multiplicity

double Multiplicity::value() const {
  if (exact) return static_cast<double>(*exact);
  return std::exp(log_value);
}

Multiplicity multiplicity(int d, int k) {
  if (d < 1 || k < 0) throw std::invalid_argument("multiplicity requires d >= 1 and k >= 0");
  Multiplicity m;
  m.log_value = std::lgamma(static_cast<double>(k) + d) - std::lgamma(static_cast<double>(k) + 1.0) -
                std::lgamma(static_cast<double>(d));

  // binom(k+d-1, k) = prod_{i=1..k} (d-1+i)/i; dividing out gcd(acc, i) first
  // keeps every step an exact integer product.
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 63;
  std::uint64_t acc = 1;
  for (int i = 1; i <= k; ++i) {
    const auto iu = static_cast<std::uint64_t>(i);
    const std::uint64_t g = std::gcd(acc, iu);
    const std::uint64_t factor = static_cast<std::uint64_t>(d - 1 + i) / (iu / g);
    if (__builtin_mul_overflow(acc / g, factor, &acc) || acc >= kLimit) return m;
  }
  m.exact = static_cast<std::uint64_t>(acc);
  m.log_value = std::log(static_cast<double>(*m.exact));
  return m;
}

// -------------------------------------------------------------------- levels

double LevelSpec::representative() const {
  if (eigenvalues.empty()) return 0.0;
  CompensatedSum acc;
  for (double v : eigenvalues) acc.add(v);
  return acc.value() / static_cast<double>(eigenvalues.size());
}

double LevelSpec::min_value() const { return *std::min_element(eigenvalues.begin(), eigenvalues.end()); }

double LevelSpec::max_value() const { return *std::max_element(eigenvalues.begin(), eigenvalues.end()); }

SpectrumModel::SpectrumModel(int d, SpectrumMode mode, std::vector<LevelSpec> levels, double tail_trace,
                             double tail_max)
    : d_(d), mode_(mode), levels_(std::move(levels)), tail_trace_(tail_trace), tail_max_(tail_max) {
  if (levels_.empty()) throw std::invalid_argument("spectrum needs at least one level");
  for (const auto& level : levels_) {
    if (level.eigenvalues.empty()) throw std::invalid_argument("spectrum level without eigenvalues");
    for (double v : level.eigenvalues) {
      if (!(v > 0.0)) throw std::invalid_argument("spectrum eigenvalues must be positive");
    }
  }
}

SpectrumModel SpectrumModel::from_eigenvalues(const std::vector<double>& values) {
  std::vector<LevelSpec> levels;
  levels.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    LevelSpec level;
    level.k = static_cast<int>(i);
    level.multiplicity = multiplicity(1, level.k);
    level.eigenvalues = {values[i]};
    levels.push_back(std::move(level));
  }
  return SpectrumModel(1, SpectrumMode::ExactEnumeration, std::move(levels), 0.0, 0.0);
}

double SpectrumModel::staircase_lower() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& level : levels_) lo = std::min(lo, level.min_value() * std::pow(d_, level.k));
  return lo;
}

double SpectrumModel::staircase_upper() const {
  double hi = 0.0;
  for (const auto& level : levels_) hi = std::max(hi, level.max_value() * std::pow(d_, level.k));
  return hi;
}

std::vector<double> SpectrumModel::flattened() const {
  double total = 0.0;
  for (const auto& level : levels_) {
    total += mode_ == SpectrumMode::UniformFactorFastPath ? level.multiplicity.value()
                                                           : static_cast<double>(level.eigenvalues.size());
  }
  if (total > kEnumerationBudget) throw BudgetError("flattened spectrum exceeds the enumeration budget");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total));
  for (const auto& level : levels_) {
    if (mode_ == SpectrumMode::UniformFactorFastPath) {
      out.insert(out.end(), static_cast<std::size_t>(*level.multiplicity.exact), level.eigenvalues.front());
    } else {
      out.insert(out.end(), level.eigenvalues.begin(), level.eigenvalues.end());
    }
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

nlohmann::json SpectrumModel::to_json() const {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : levels_) {
    nlohmann::json j{{"k", level.k}, {"log_multiplicity", level.multiplicity.log_value}};
    if (level.multiplicity.exact) j["multiplicity"] = *level.multiplicity.exact;
    j["eigenvalues"] = level.eigenvalues;
    levels.push_back(std::move(j));
  }
  return {{"d", d_},
          {"mode", mode_ == SpectrumMode::ExactEnumeration ? "exact" : "uniform"},
          {"levels", std::move(levels)},
          {"tail_trace", tail_trace_},
          {"tail_max", tail_max_}};
}

// -------------------------------------------------------------------- build

namespace {

SpectrumModel build_uniform(const ProductKernel& pk, int k_max) {
  const int d = pk.dim();
  const auto& f = pk.factor(0);
  const double log_base = d * std::log(f.eigenvalue_scale());
  const double log_r = std::log(f.decay());

  std::vector<LevelSpec> levels;
  for (int k = 0; k <= k_max; ++k) {
    LevelSpec level;
    level.k = k;
    level.multiplicity = multiplicity(d, k);
    level.eigenvalues = {std::exp(log_base + k * log_r)};
    levels.push_back(std::move(level));
  }

  // sum_{k > k_max} N(d,k) mu_0^d r^k; the term ratio tends to r < 1.
  CompensatedSum tail;
  for (int k = k_max + 1; k < k_max + 100000; ++k) {
    const double term = std::exp(multiplicity(d, k).log_value + log_base + k * log_r);
    tail.add(term);
    const double ratio = f.decay() * (k + d) / (k + 1.0);
    if (ratio < 1.0 && term < 1e-18 * tail.value()) break;
  }
  const double tail_max = std::exp(log_base + (k_max + 1) * log_r);
  return SpectrumModel(d, SpectrumMode::UniformFactorFastPath, std::move(levels), tail.value(), tail_max);
}

SpectrumModel build_exact(const ProductKernel& pk, int k_max) {
  const int d = pk.dim();
  if (multiplicity(d, k_max).value() > kEnumerationBudget) {
    throw BudgetError("exact enumeration of level " + std::to_string(k_max) + " at d = " + std::to_string(d) +
                      " exceeds the budget; use the uniform-factor fast path");
  }
  double base = 1.0;
  double r_max = 0.0;
  std::vector<double> r(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    base *= pk.factor(i).eigenvalue_scale();
    r[static_cast<std::size_t>(i)] = pk.factor(i).decay();
    r_max = std::max(r_max, r[static_cast<std::size_t>(i)]);
  }

  std::vector<LevelSpec> levels;
  CompensatedSum partial;
  for (int k = 0; k <= k_max; ++k) {
    LevelSpec level;
    level.k = k;
    level.multiplicity = multiplicity(d, k);
    level.eigenvalues.reserve(static_cast<std::size_t>(level.multiplicity.value()));
    for_each_multi_index(d, k, [&](const std::vector<int>& alpha) {
      double v = base;
      for (int i = 0; i < d; ++i) {
        if (alpha[static_cast<std::size_t>(i)] > 0) v *= std::pow(r[static_cast<std::size_t>(i)], alpha[static_cast<std::size_t>(i)]);
      }
      level.eigenvalues.push_back(v);
      partial.add(v);
      return true;
    });
    levels.push_back(std::move(level));
  }
  const double total = pk.trace();
  const double tail = std::max(total - partial.value(), 0.0) + 4.0 * std::numeric_limits<double>::epsilon() * total;
  const double tail_max = base * std::pow(r_max, k_max + 1);
  return SpectrumModel(d, SpectrumMode::ExactEnumeration, std::move(levels), tail, tail_max);
}

}  // namespace

SpectrumModel build_spectrum(const ProductKernel& pk, int k_max, SpectrumMode mode) {
  if (k_max < 0) throw std::invalid_argument("k_max must be non-negative");
  if (mode == SpectrumMode::UniformFactorFastPath) {
    if (!pk.is_uniform()) throw std::invalid_argument("the uniform fast path requires identical factors");
    return build_uniform(pk, k_max);
  }
  return build_exact(pk, k_max);
}

SpectrumModel build_spectrum(const ProductKernel& pk, int k_max) {
  return build_spectrum(pk, k_max,
                        pk.is_uniform() ? SpectrumMode::UniformFactorFastPath : SpectrumMode::ExactEnumeration);
}

int choose_level_cap(const ProductKernel& pk, double lambda, double rel_tol, int max_levels) {
  require_positive_lambda(lambda);
  for (int k = 0; k < max_levels; ++k) {
    const auto sp = build_spectrum(pk, k);
    const auto v = n1(sp, lambda);
    if (v.tail_error <= rel_tol * v.value) return k;
  }
  return max_levels;
}

// ------------------------------------------------------------- coefficients

void CoefficientSpec::validate() const {
  if (!(s > 0.0)) throw ConfigError("s", "source condition s must be positive");
  if (!(norm_budget > 0.0)) throw ConfigError("norm_budget", "norm budget R1 must be positive");
  for (double m : masses) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw ConfigError("masses", "coefficient masses must be finite and >= 0");
  }
  if (source_norm_squared() > norm_budget * norm_budget * (1.0 + 1e-12)) {
    throw ConfigError("masses", "sum of coefficient masses exceeds R1^2");
  }
}

double CoefficientSpec::source_norm_squared() const {
  CompensatedSum acc;
  for (double m : masses) acc.add(m);
  return acc.value();
}

bool CoefficientSpec::satisfies_mass_lower_bound(double c0, int q) const {
  if (q < 0 || static_cast<std::size_t>(q) >= masses.size()) return false;
  for (int k = 0; k <= q; ++k) {
    if (masses[static_cast<std::size_t>(k)] < c0) return false;
  }
  return true;
}

CoefficientSpec CoefficientSpec::from_per_index(const SpectrumModel& sp, std::vector<std::vector<double>> coeffs,
                                                double s, double norm_budget) {
  if (sp.mode() != SpectrumMode::ExactEnumeration) {
    throw std::invalid_argument("per-index coefficients require an exact spectrum");
  }
  if (coeffs.size() > sp.levels().size()) throw std::invalid_argument("more coefficient levels than spectrum levels");
  CoefficientSpec spec;
  spec.s = s;
  spec.norm_budget = norm_budget;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const auto& mus = sp.levels()[k].eigenvalues;
    if (coeffs[k].size() != mus.size()) throw std::invalid_argument("coefficient count does not match level size");
    CompensatedSum acc;
    for (std::size_t j = 0; j < mus.size(); ++j) acc.add(std::pow(mus[j], -s) * coeffs[k][j] * coeffs[k][j]);
    spec.masses.push_back(acc.value());
  }
  spec.per_index = std::move(coeffs);
  return spec;
}

std::optional<int> mass_check_level(const SpectrumModel& sp, double gamma) {
  const int q = static_cast<int>(std::floor(gamma)) + 1;
  if (q > sp.k_max()) return std::nullopt;
  return q;
}

// ---------------------------------------------------------------- functionals

FunctionalValue n1(const SpectrumModel& sp, double lambda) {
  require_positive_lambda(lambda);
  FunctionalValue out;
  out.value = sum_over_levels(sp, [lambda](double mu) { return mu / (mu + lambda); });
  out.tail_error = sp.tail_trace() / lambda;
  return out;
}

FunctionalValue n2(const SpectrumModel& sp, double lambda) {
  require_positive_lambda(lambda);
  FunctionalValue out;
  out.value = sum_over_levels(sp, [lambda](double mu) {
    const double ratio = mu / (mu + lambda);
    return ratio * ratio;
  });
  out.tail_error = sp.tail_trace() / lambda * std::min(1.0, sp.tail_max() / lambda);
  return out;
}

namespace {

void check_coefficient_levels(const SpectrumModel& sp, const CoefficientSpec& coeffs) {
  if (coeffs.masses.size() > sp.levels().size()) {
    throw std::invalid_argument("coefficient spec has more levels than the spectrum");
  }
}

// Per-index sum when explicit coefficients exist on an exact spectrum, else level masses.
template <class PerIndex, class PerLevel>
double coefficient_sum(const SpectrumModel& sp, const CoefficientSpec& coeffs, PerIndex&& per_index,
                       PerLevel&& per_level) {
  check_coefficient_levels(sp, coeffs);
  CompensatedSum acc;
  if (coeffs.per_index && sp.mode() == SpectrumMode::ExactEnumeration) {
    const auto& f = *coeffs.per_index;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const auto& mus = sp.levels()[k].eigenvalues;
      for (std::size_t j = 0; j < mus.size(); ++j) acc.add(per_index(mus[j], f[k][j] * f[k][j]));
    }
    return acc.value();
  }
  for (std::size_t k = 0; k < coeffs.masses.size(); ++k) {
    acc.add(per_level(sp.levels()[k].representative(), coeffs.masses[k]));
  }
  return acc.value();
}

}  // namespace

double r2(const SpectrumModel& sp, const CoefficientSpec& coeffs, double lambda) {
  require_positive_lambda(lambda);
  const double s = coeffs.s;
  return coefficient_sum(
      sp, coeffs,
      [lambda](double mu, double f2) {
        const double shrink = lambda / (mu + lambda);
        return shrink * shrink * f2;
      },
      [lambda, s](double mu, double mass) {
        const double shrink = lambda / (mu + lambda);
        return shrink * shrink * std::pow(mu, s) * mass;
      });
}

double f_lambda_sup_bound(const SpectrumModel& sp, const CoefficientSpec& coeffs, double lambda, double kappa) {
  require_positive_lambda(lambda);
  const double s = coeffs.s;
  const double h_norm2 = coefficient_sum(
      sp, coeffs, [lambda](double mu, double f2) { return mu / ((mu + lambda) * (mu + lambda)) * f2; },
      [lambda, s](double mu, double mass) { return std::pow(mu, 1.0 + s) / ((mu + lambda) * (mu + lambda)) * mass; });
  return kappa * std::sqrt(h_norm2);
}

AsymptoticScales asymptotic_functionals(int d, double l, double s) {
  if (!(l > 0.0)) throw std::invalid_argument("l must be positive");
  if (!(s > 0.0)) throw std::invalid_argument("s must be positive");
  AsymptoticScales out;
  out.p = static_cast<int>(std::floor(l));
  const double p = out.p;
  const double dd = d;
  const double st = std::min(s, 2.0);
  out.lambda = std::pow(dd, -l);
  out.n1_scale = 1.0 / out.lambda;
  out.n2_scale = std::pow(dd, p) + std::pow(dd, 2.0 * l - (p + 1.0));
  out.r2_scale = std::pow(dd, (2.0 - st) * p - 2.0 * l) + std::pow(dd, -(p + 1.0) * st);
  out.flam_scale = std::pow(dd, (1.0 - s) * p / 2.0) + std::pow(dd, l - (1.0 + s) * (p + 1.0) / 2.0);
  return out;
}

// ------------------------------------------------------------------ conditions

bool ConditionReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const ConditionEntry& e) { return e.pass; });
}

nlohmann::json ConditionReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    list.push_back({{"name", e.name}, {"small", e.small_side}, {"large", e.large_side}, {"pass", e.pass}});
  }
  return {{"fraction", fraction}, {"pass", pass()}, {"conditions", std::move(list)}};
}

ConditionReport check_conditions(const SpectrumModel& sp, const CoefficientSpec& coeffs, long long n, double lambda,
                                 double s, double epsilon, double fraction, double kappa) {
  ConditionReport report;
  report.fraction = fraction;
  const double nn = static_cast<double>(n);
  const double log_n = std::log(nn);
  const double n1v = n1(sp, lambda).value;
  const double n2v = n2(sp, lambda).value;

  auto smallness = [&](std::string name, double small, double large) {
    report.entries.push_back({std::move(name), small, large, small <= fraction * large});
  };

  smallness("N1 ln(n) / n", n1v * log_n / nn, 1.0);
  smallness("1 / (n lambda)", 1.0 / (nn * lambda), 1.0);
  report.entries.push_back({"N2 = Omega(1)", 1.0, n2v, n2v >= fraction});
  smallness("ln(n) / (n lambda^2) vs N2", log_n / (nn * lambda * lambda), n2v);

  if (s < 1.0) {
    const double flam = f_lambda_sup_bound(sp, coeffs, lambda, kappa);
    const double r2v = r2(sp, coeffs, lambda);
    const double left = std::sqrt(1.0 / lambda) * (std::pow(nn, (1.0 - s) / 2.0 + epsilon) + flam) / nn;
    const double right = std::sqrt(n2v / nn) + std::sqrt(r2v);
    smallness("f_lambda sup-norm condition", left, right);
  }
  return report;
}

}  // namespace krrlab
