#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "krrlab/kernels.hpp"

namespace krrlab {

/// Largest single level that build_spectrum will enumerate explicitly.
inline constexpr double kEnumerationBudget = 1e7;

/// binom(k + d - 1, d - 1); exact when it fits below 2^63, always available in log space.
struct Multiplicity {
  double log_value = 0.0;
  std::optional<std::uint64_t> exact;

  double value() const;
};

Multiplicity multiplicity(int d, int k);

enum class SpectrumMode { ExactEnumeration, UniformFactorFastPath };

struct LevelSpec {
  int k = 0;
  Multiplicity multiplicity;
  /// ExactEnumeration: every eigenvalue of the level in multi-index order.
  /// UniformFactorFastPath: the single common value.
  std::vector<double> eigenvalues;

  /// Common value (fast path) or the level mean (exact mode).
  double representative() const;
  double min_value() const;
  double max_value() const;
};

/// Staircase spectrum of a product kernel truncated at level k_max.
class SpectrumModel {
 public:
  SpectrumModel(int d, SpectrumMode mode, std::vector<LevelSpec> levels, double tail_trace, double tail_max);

  /// A finite spectrum given as a plain list; each value becomes its own
  /// multiplicity-one level and nothing is left in the tail.
  static SpectrumModel from_eigenvalues(const std::vector<double>& values);

  int dim() const noexcept { return d_; }
  SpectrumMode mode() const noexcept { return mode_; }
  const std::vector<LevelSpec>& levels() const noexcept { return levels_; }
  int k_max() const noexcept { return static_cast<int>(levels_.size()) - 1; }

  /// Sum of eigenvalues beyond k_max, and an upper bound on any single one of them.
  double tail_trace() const noexcept { return tail_trace_; }
  double tail_max() const noexcept { return tail_max_; }

  /// Staircase constants: min and max of mu * d^k over all modeled eigenvalues.
  double staircase_lower() const;
  double staircase_upper() const;

  /// Every modeled eigenvalue with multiplicity, sorted non-increasing.
  /// Throws BudgetError if the expansion would exceed kEnumerationBudget entries.
  std::vector<double> flattened() const;

  nlohmann::json to_json() const;

 private:
  int d_;
  SpectrumMode mode_;
  std::vector<LevelSpec> levels_;
  double tail_trace_;
  double tail_max_;
};

/// Builds levels 0..k_max. ExactEnumeration throws BudgetError when
/// multiplicity(d, k_max) exceeds kEnumerationBudget; the fast path throws
/// std::invalid_argument unless the kernel is uniform.
SpectrumModel build_spectrum(const ProductKernel& pk, int k_max, SpectrumMode mode);
/// Fast path for uniform kernels, exact enumeration otherwise.
SpectrumModel build_spectrum(const ProductKernel& pk, int k_max);

/// Smallest level cap whose tail bound on N1 is below rel_tol of the partial sum.
int choose_level_cap(const ProductKernel& pk, double lambda, double rel_tol = 1e-6, int max_levels = 64);

/// Target coefficients aggregated per level: m_k = sum_j mu_{k,j}^{-s} f_{k,j}^2.
struct CoefficientSpec {
  std::vector<double> masses;
  double s = 1.0;
  double norm_budget = 1.0;  ///< R_1
  /// Optional f_{k,j} aligned with an ExactEnumeration spectrum.
  std::optional<std::vector<std::vector<double>>> per_index;

  /// Throws ConfigError on negative masses, s <= 0, R_1 <= 0 or sum m_k > R_1^2.
  void validate() const;

  /// ||f||_{[H]^s}^2 = sum_k m_k.
  double source_norm_squared() const;

  /// m_k >= c0 for every k <= q.
  bool satisfies_mass_lower_bound(double c0, int q) const;

  /// Builds masses from explicit per-index coefficients on an exact spectrum.
  static CoefficientSpec from_per_index(const SpectrumModel& sp, std::vector<std::vector<double>> coeffs, double s,
                                        double norm_budget);
};

/// q: the smallest integer level strictly above gamma that the spectrum models.
std::optional<int> mass_check_level(const SpectrumModel& sp, double gamma);

struct FunctionalValue {
  double value = 0.0;
  double tail_error = 0.0;  ///< upper bound on the omitted k > k_max contribution
};

/// N1(lambda) = sum_i mu_i / (mu_i + lambda). Throws std::invalid_argument for lambda <= 0.
FunctionalValue n1(const SpectrumModel& sp, double lambda);
/// N2(lambda) = sum_i (mu_i / (mu_i + lambda))^2.
FunctionalValue n2(const SpectrumModel& sp, double lambda);
/// R2(lambda) = sum_k (lambda / (mu_k + lambda))^2 mu_k^s m_k.
double r2(const SpectrumModel& sp, const CoefficientSpec& coeffs, double lambda);
/// kappa * ||f_lambda||_H, the route used to bound ||f_lambda||_inf.
double f_lambda_sup_bound(const SpectrumModel& sp, const CoefficientSpec& coeffs, double lambda,
                          double kappa = 1.0);

/// Theta-scales of the functionals at lambda = d^{-l}, p = floor(l).
struct AsymptoticScales {
  int p = 0;
  double lambda = 0.0;
  double n1_scale = 0.0;    ///< lambda^{-1}
  double n2_scale = 0.0;    ///< d^p + lambda^{-2} d^{-(p+1)}
  double r2_scale = 0.0;    ///< lambda^2 d^{(2-s~)p} + d^{-(p+1)s~}
  double flam_scale = 0.0;  ///< d^{(1-s)p/2} + lambda^{-1} d^{-(1+s)(p+1)/2}
};

AsymptoticScales asymptotic_functionals(int d, double l, double s);

struct ConditionEntry {
  std::string name;
  double small_side = 0.0;
  double large_side = 0.0;
  bool pass = false;
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;
  double fraction = 0.1;
  bool pass() const;
  nlohmann::json to_json() const;
};

/// Evaluates the regime conditions at (n, lambda).
/// A "<<" condition passes when small_side <= fraction * large_side; the
/// N2 = Omega(1) condition passes when N2 >= fraction. For s < 1 the extra
/// f_lambda condition is appended.
ConditionReport check_conditions(const SpectrumModel& sp, const CoefficientSpec& coeffs, long long n, double lambda,
                                 double s, double epsilon, double fraction = 0.1, double kappa = 1.0);

}  // namespace krrlab
