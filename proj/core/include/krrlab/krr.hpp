#pragma once

#include <functional>
#include <span>

#include <nlohmann/json.hpp>

#include "krrlab/kernels.hpp"
#include "krrlab/target.hpp"
#include "krrlab/types.hpp"

namespace krrlab {

/// Default Monte-Carlo test-sample size per error estimate.
inline constexpr int kDefaultTestSamples = 2000;

struct TrainingSet {
  RowMatrix X;  ///< n x d
  Vector y;     ///< n

  Eigen::Index n() const noexcept { return X.rows(); }
  Eigen::Index d() const noexcept { return X.cols(); }
};

/// Fitted kernel ridge regression model
///   f(x) = K(x, X) (K(X, X) + n lambda I)^{-1} y.
/// Immutable once fitted; safe to share across threads.
class KrrModel {
 public:
  KrrModel(ProductKernel kernel, RowMatrix X, Vector alpha, double lambda, double jitter = 0.0,
           double dual_residual = 0.0);

  const ProductKernel& kernel() const noexcept { return kernel_; }
  const RowMatrix& inputs() const noexcept { return X_; }
  const Vector& alpha() const noexcept { return alpha_; }
  double lambda() const noexcept { return lambda_; }
  /// Diagonal jitter that was added to make the factorization succeed (0 if none).
  double jitter() const noexcept { return jitter_; }
  /// ||(K + n lambda I) alpha - y|| / ||y|| measured after the solve.
  double dual_residual() const noexcept { return dual_residual_; }

  /// Throws std::invalid_argument on length mismatch.
  double predict(std::span<const double> x) const;
  Vector predict(const RowMatrix& X) const;

  /// {"kernel", "lambda", "n", "d", "jitter", "X", "alpha"} with X and alpha as
  /// base64 of little-endian row-major doubles.
  nlohmann::json to_json() const;
  static KrrModel from_json(const nlohmann::json& j);

 private:
  ProductKernel kernel_;
  RowMatrix X_;
  Vector alpha_;
  double lambda_;
  double jitter_;
  double dual_residual_;
};

/// Solves (K + n lambda I) alpha = y by Cholesky. If the factorization fails,
/// diagonal jitter starting at 1e-12 trace/n is added and doubled up to six
/// times; NumericalError if it still fails. One step of iterative refinement
/// against the unjittered system follows the solve.
///
/// Throws std::invalid_argument for lambda <= 0 ("lambda must be positive"),
/// empty data, shape mismatch or non-finite responses.
KrrModel fit(const ProductKernel& kernel, const TrainingSet& data, double lambda);

struct ErrorEstimate {
  double mean = 0.0;
  double std_error = 0.0;  ///< Monte-Carlo standard error of `mean`
  int samples = 0;
};

/// Mean of (predict(x) - f*(x))^2 over m fresh draws from the product measure.
ErrorEstimate generalization_error(const KrrModel& model, const TargetSpec& target, int m, Rng& rng);

/// Same estimator for an arbitrary batch predictor (rows in, predictions out).
ErrorEstimate squared_error(const ProductKernel& measure, const std::function<Vector(const RowMatrix&)>& predictor,
                            const TargetSpec& target, int m, Rng& rng);

/// Mean and standard error of precomputed per-point values.
ErrorEstimate summarize(const Vector& values);

struct BiasVariance {
  ErrorEstimate bias2;     ///< error of the fit on noiseless responses f*(X)
  ErrorEstimate variance;  ///< sigma^2/n^2 E_x K(x,X)(K/n + lambda)^{-2} K(X,x)
  double jitter = 0.0;
};

/// Empirical bias-variance split at fixed inputs X. Both terms share the same m test draws.
BiasVariance bias_variance(const ProductKernel& kernel, const RowMatrix& X, const TargetSpec& target,
                           double sigma_eps, double lambda, int m, Rng& rng);

}  // namespace krrlab
