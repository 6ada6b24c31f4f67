#pragma once

#include <span>

namespace krrlab::specfun {

/// Hard upper bound on polynomial degree accepted by the evaluators.
inline constexpr int kDefaultDegreeCap = 512;

enum class PolyKind {
  HermitePhysicists,    ///< H_k, weight e^{-x^2}
  HermiteProbabilists,  ///< He_k, weight e^{-x^2/2}
  Laguerre,             ///< generalized L_k^alpha, weight x^alpha e^{-x}
};

/// One of the classical families used by the Mercer systems.
class PolynomialFamily {
 public:
  static PolynomialFamily hermite_physicists() { return PolynomialFamily(PolyKind::HermitePhysicists, 0.0); }
  static PolynomialFamily hermite_probabilists() { return PolynomialFamily(PolyKind::HermiteProbabilists, 0.0); }
  /// Throws std::invalid_argument unless alpha > -1.
  static PolynomialFamily laguerre(double alpha);

  PolyKind kind() const noexcept { return kind_; }
  double alpha() const noexcept { return alpha_; }

 private:
  PolynomialFamily(PolyKind kind, double alpha) : kind_(kind), alpha_(alpha) {}

  PolyKind kind_;
  double alpha_;
};

/// Value of the degree-k polynomial of `family` at x by forward three-term recurrence.
///
/// Throws std::domain_error for non-finite x and std::out_of_range when
/// k < 0 or k > degree_cap. The result is not normalized and may overflow to
/// infinity for large k and |x|.
double eval_poly(const PolynomialFamily& family, int k, double x, int degree_cap = kDefaultDegreeCap);

/// Fills out[0..k_max] with the raw polynomial values P_0(x) .. P_{k_max}(x).
/// `out.size()` must be at least k_max + 1.
void eval_poly_sequence(const PolynomialFamily& family, int k_max, double x, std::span<double> out,
                        int degree_cap = kDefaultDegreeCap);

/// Fills out[0..k_max] with polynomials normalized to unit norm under the
/// family's probability weight:
///   HermitePhysicists   H_k / sqrt(2^k k!)          under e^{-x^2}/sqrt(pi)
///   HermiteProbabilists He_k / sqrt(k!)             under N(0,1)
///   Laguerre            L_k^a / sqrt(binom(k+a,k))  under Gamma(a+1,1)
/// The recurrence is run on the normalized values directly, so nothing
/// overflows for moderate |x| even at high degree.
void eval_orthonormal_sequence(const PolynomialFamily& family, int k_max, double x, std::span<double> out,
                               int degree_cap = kDefaultDegreeCap);

/// Modified Bessel function of the first kind I_alpha(z) for z >= 0.
///
/// Accepts alpha > -1 (the Laguerre kernel needs the negative range). Values
/// that exceed double range come back as +inf; use log_bessel_i for those.
double bessel_i(double alpha, double z);

/// e^{-z} I_alpha(z); finite for every z >= 0 that the series can sum.
double bessel_i_scaled(double alpha, double z);

/// ln I_alpha(z). Returns -inf at z = 0 when alpha > 0.
double log_bessel_i(double alpha, double z);

/// ln of the entire function (z/2)^{-alpha} I_alpha(z) = sum_m (z/2)^{2m} / (m! Gamma(m+alpha+1)).
/// Finite at z = 0, where it equals -lgamma(alpha+1).
double log_bessel_i_reduced(double alpha, double z);

}  // namespace krrlab::specfun
