#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "krrlab/types.hpp"

namespace krrlab {

enum class BaseKind { Gaussian, Mehler, Laguerre };

/// A one-dimensional kernel factor together with its coordinate measure and
/// closed-form Mercer system. Immutable after construction.
///
///   Gaussian  exp(-(x-y)^2 / (2 ell^2 d))          on N(0, sigma^2)
///   Mehler    Mehler kernel with r = theta/d      on N(0, sigma^2)
///   Laguerre  Hardy-Hille kernel with r = theta/d on Gamma(alpha+1, 1)
///
/// Every factor has eigenvalues mu_k = mu_0 r^k.
class BaseKernel1D {
 public:
  static BaseKernel1D gaussian(double ell, double sigma, int d);
  static BaseKernel1D mehler(double theta, double sigma, int d);
  static BaseKernel1D laguerre(double theta, double alpha, int d);

  BaseKind kind() const noexcept { return kind_; }
  int d_context() const noexcept { return d_; }

  /// Geometric decay ratio r in (0, 1).
  double decay() const noexcept { return r_; }
  /// mu_0; 1 for Mehler and Laguerre.
  double eigenvalue_scale() const noexcept { return mu0_; }

  // Parameters; the ones that do not apply to kind() read as 0.
  double ell() const noexcept { return ell_; }
  double sigma() const noexcept { return sigma_; }
  double theta() const noexcept { return theta_; }
  double alpha() const noexcept { return alpha_; }

  /// Gaussian-factor constants a = 1/(4 sigma^2), b = 1/(2 ell^2 d),
  /// c = sqrt(a^2 + 2ab), A = a + b + c, B = b/A. Zero for other kinds.
  struct GaussianConstants {
    double a = 0, b = 0, c = 0, A = 0, B = 0;
  };
  const GaussianConstants& gaussian_constants() const noexcept { return g_; }

  /// Closed-form kernel value. Laguerre requires x, y > 0 (std::domain_error otherwise).
  double evaluate(double x, double y) const;
  double log_evaluate(double x, double y) const;

  double eigenvalue(int k) const;

  /// L^2(measure)-orthonormal eigenfunction e_k(x).
  double eigenfunction(int k, double x) const;
  /// out[j] = e_j(x) for j = 0..k_max.
  void eigenfunctions(int k_max, double x, std::span<double> out) const;

  /// Truncated Mercer sum over k = 0..k_max.
  double mercer_sum(double x, double y, int k_max) const;

  /// One draw from the coordinate measure.
  double sample(Rng& rng) const;

  /// Standard deviation of the coordinate measure.
  double measure_stddev() const noexcept;
  double measure_mean() const noexcept;

  /// True when both factors have the same kind and parameters.
  bool same_as(const BaseKernel1D& other) const noexcept;

  /// {"kind": ..., "params": {...}}; d is carried by the enclosing product kernel.
  nlohmann::json to_json() const;
  /// Throws ConfigError naming the bad field.
  static BaseKernel1D from_json(const nlohmann::json& j, int d);

 private:
  BaseKernel1D() = default;

  BaseKind kind_ = BaseKind::Gaussian;
  int d_ = 1;
  double ell_ = 0, sigma_ = 0, theta_ = 0, alpha_ = 0;
  double r_ = 0, mu0_ = 1;
  GaussianConstants g_{};
  double log_gamma_alpha1_ = 0;  // lgamma(alpha + 1), Laguerre only
  double eigfn_scale_ = 1;       // (c/a)^{1/4}, Gaussian only
};

/// k_d(x, y) = prod_i factor_i(x_i, y_i) over the product measure.
class ProductKernel {
 public:
  /// Every factor must carry d_context == factors.size().
  explicit ProductKernel(std::vector<BaseKernel1D> factors);

  static ProductKernel uniform(const BaseKernel1D& factor);
  static ProductKernel gaussian(int d, double ell = 1.0, double sigma = 1.0);
  static ProductKernel mehler(int d, double theta = 1.0, double sigma = 1.0);
  static ProductKernel laguerre(int d, double theta = 1.0, double alpha = 0.0);

  /// Concatenates blocks of identical factors; block factors must already
  /// carry d_context equal to the total dimension.
  static ProductKernel mixed(const std::vector<std::pair<BaseKernel1D, int>>& blocks);

  int dim() const noexcept { return static_cast<int>(factors_.size()); }
  std::span<const BaseKernel1D> factors() const noexcept { return factors_; }
  const BaseKernel1D& factor(int i) const { return factors_.at(static_cast<std::size_t>(i)); }

  /// All factors identical (enables the uniform spectrum fast path).
  bool is_uniform() const noexcept { return uniform_; }

  /// Throws std::invalid_argument on length mismatch.
  double evaluate(std::span<const double> x, std::span<const double> y) const;

  void sample(Rng& rng, std::span<double> out) const;
  RowMatrix sample(Rng& rng, int count) const;

  /// Symmetric n x n matrix K(X, X).
  RowMatrix gram(const RowMatrix& X) const;
  /// rows(A) x rows(B) matrix K(A, B).
  RowMatrix cross(const RowMatrix& A, const RowMatrix& B) const;

  /// Sum of all Mercer eigenvalues, prod_i mu_{i,0} / (1 - r_i).
  double trace() const;

  /// max_x k(x, x) over the supplied rows; an empirical kappa^2.
  double diagonal_max(const RowMatrix& X) const;

  nlohmann::json to_json() const;
  /// Accepts {"kind", "params", "d", "factors"}; throws ConfigError.
  static ProductKernel from_json(const nlohmann::json& j);

 private:
  double evaluate_unchecked(const double* x, const double* y) const;

  std::vector<BaseKernel1D> factors_;
  std::vector<double> gauss_weight_;  // 1/(2 ell^2 d) for Gaussian factors, 0 otherwise
  bool all_gaussian_ = false;
  bool uniform_ = false;
};

/// A kernel specification whose dimension is supplied later (sweeps instantiate one per d).
class KernelTemplate {
 public:
  explicit KernelTemplate(nlohmann::json spec);
  ProductKernel instantiate(int d) const;
  const nlohmann::json& spec() const noexcept { return spec_; }

 private:
  nlohmann::json spec_;
};

}  // namespace krrlab
