#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "krrlab/kernels.hpp"
#include "krrlab/spectrum.hpp"
#include "krrlab/types.hpp"

namespace krrlab {

enum class TargetKind { KernelSections, Eigenfunction, Coefficients };

/// What make_target should build.
struct TargetRequest {
  TargetKind kind = TargetKind::KernelSections;
  int anchors = 3;  ///< KernelSections
  int level = 1;    ///< Eigenfunction
  int index = 0;    ///< Eigenfunction, position within the level (multi_index.hpp order)
  /// Coefficients: f_{k,j} for levels 0..K in multi-index order.
  std::vector<std::vector<double>> coefficients;

  nlohmann::json to_json() const;
  /// Throws ConfigError naming the bad field.
  static TargetRequest from_json(const nlohmann::json& j);
};

/// The regression function f*, exactly evaluable on the kernel's domain.
class TargetSpec {
 public:
  /// f*(x) = sum_a k(x, anchor_a).
  static TargetSpec kernel_sections(ProductKernel pk, RowMatrix anchors, std::uint64_t seed);
  /// f*(x) = prod_i e_{alpha_i}(x_i) for the index-th multi-index of the level.
  static TargetSpec eigenfunction(ProductKernel pk, int level, int index);
  /// f*(x) = sum_{k,j} f_{k,j} e_{k,j}(x). Throws BudgetError when any level
  /// exceeds the exact-enumeration budget.
  static TargetSpec coefficients(ProductKernel pk, std::vector<std::vector<double>> coeffs);

  TargetKind kind() const noexcept { return kind_; }
  const ProductKernel& kernel() const noexcept { return pk_; }
  int dim() const noexcept { return pk_.dim(); }

  double evaluate(std::span<const double> x) const;
  Vector evaluate_rows(const RowMatrix& X) const;

  const RowMatrix& anchors() const noexcept { return anchors_; }
  std::uint64_t seed() const noexcept { return seed_; }
  /// Eigenfunction targets: the multi-index alpha.
  const std::vector<int>& multi_index() const noexcept { return alpha_; }

  /// ||f*||^2 in [H]^s. Kernel-section targets support s = 1 only (RKHS norm).
  double source_norm_squared(double s) const;

  /// Level masses m_k = sum_j mu_{k,j}^{-s} f_{k,j}^2 on `sp`'s levels, for
  /// eigenfunction and coefficient targets. Throws std::invalid_argument otherwise.
  CoefficientSpec level_masses(const SpectrumModel& sp, double s) const;

  nlohmann::json to_json() const;

 private:
  explicit TargetSpec(ProductKernel pk) : pk_(std::move(pk)) {}

  double eigen_product(const double* x, const std::vector<int>& alpha) const;

  TargetKind kind_ = TargetKind::KernelSections;
  ProductKernel pk_;
  RowMatrix anchors_;
  std::uint64_t seed_ = 0;
  std::vector<int> alpha_;
  std::vector<std::vector<int>> basis_;  // coefficient targets: multi-indices
  std::vector<double> coeffs_;           // aligned with basis_
  std::vector<double> basis_eigenvalues_;
  std::vector<std::vector<double>> coeffs_by_level_;
};

/// Builds the requested target; KernelSections draws anchors from the product measure with `rng`.
TargetSpec make_target(const ProductKernel& pk, const TargetRequest& request, Rng& rng, std::uint64_t seed = 0);

/// Multi-index at position `index` within level `level` (multi_index.hpp order).
/// Throws std::out_of_range if the level has fewer entries.
std::vector<int> multi_index_at(int d, int level, long long index);

/// prod_i mu_{i, alpha_i}.
double multi_index_eigenvalue(const ProductKernel& pk, const std::vector<int>& alpha);

}  // namespace krrlab
