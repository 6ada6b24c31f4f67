#include "krrlab/specfun.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace krrlab::specfun {

namespace {

void check_degree(int k, int degree_cap) {
  if (k < 0) throw std::out_of_range("polynomial degree must be non-negative");
  if (k > degree_cap) {
    throw std::out_of_range("polynomial degree " + std::to_string(k) + " exceeds cap " +
                            std::to_string(degree_cap));
  }
}

void check_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::domain_error(std::string(what) + " must be finite");
}

void check_span(std::span<double> out, int k_max) {
  if (out.size() < static_cast<std::size_t>(k_max) + 1) {
    throw std::invalid_argument("output span too small for requested degree");
  }
}

// Terms of sum_m w^m / (m! Gamma(m+alpha+1)) relative to the largest one are
// summed outward from the peak; ln of the peak term is added back at the end.
double log_reduced_series(double alpha, double w) {
  if (w == 0.0) return -std::lgamma(alpha + 1.0);

  const double root = 0.5 * (-(alpha + 2.0) + std::sqrt(alpha * alpha + 4.0 * w));
  const double m0 = root > 0.0 ? std::ceil(root) : 0.0;
  const double log_peak = m0 * std::log(w) - std::lgamma(m0 + 1.0) - std::lgamma(m0 + alpha + 1.0);

  constexpr double kTiny = 1e-18;
  double sum = 1.0;

  double term = 1.0;
  for (double m = m0;; m += 1.0) {
    term *= w / ((m + 1.0) * (m + alpha + 1.0));
    sum += term;
    if (term < kTiny * sum) break;
  }

  term = 1.0;
  for (double m = m0; m >= 1.0; m -= 1.0) {
    term *= m * (m + alpha) / w;
    sum += term;
    if (term < kTiny * sum) break;
  }

  return log_peak + std::log(sum);
}

void check_bessel_args(double alpha, double z) {
  check_finite(alpha, "Bessel order");
  check_finite(z, "Bessel argument");
  if (alpha <= -1.0) throw std::domain_error("Bessel order must exceed -1");
  if (z < 0.0) throw std::domain_error("Bessel argument must be non-negative");
}

}  // namespace

PolynomialFamily PolynomialFamily::laguerre(double alpha) {
  if (!(alpha > -1.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("Laguerre alpha must be finite and > -1");
  }
  return PolynomialFamily(PolyKind::Laguerre, alpha);
}

void eval_poly_sequence(const PolynomialFamily& family, int k_max, double x, std::span<double> out,
                        int degree_cap) {
  check_degree(k_max, degree_cap);
  check_finite(x, "polynomial argument");
  check_span(out, k_max);

  const double a = family.alpha();
  out[0] = 1.0;
  if (k_max == 0) return;

  switch (family.kind()) {
    case PolyKind::HermitePhysicists:
      out[1] = 2.0 * x;
      for (int k = 1; k < k_max; ++k) out[k + 1] = 2.0 * x * out[k] - 2.0 * k * out[k - 1];
      break;
    case PolyKind::HermiteProbabilists:
      out[1] = x;
      for (int k = 1; k < k_max; ++k) out[k + 1] = x * out[k] - k * out[k - 1];
      break;
    case PolyKind::Laguerre:
      out[1] = 1.0 + a - x;
      for (int k = 1; k < k_max; ++k) {
        out[k + 1] = ((2.0 * k + 1.0 + a - x) * out[k] - (k + a) * out[k - 1]) / (k + 1.0);
      }
      break;
  }
}

double eval_poly(const PolynomialFamily& family, int k, double x, int degree_cap) {
  check_degree(k, degree_cap);
  check_finite(x, "polynomial argument");
  if (k == 0) return 1.0;

  // Two-slot rolling recurrence; same arithmetic as eval_poly_sequence.
  const double a = family.alpha();
  double prev = 1.0;
  double cur = 0.0;
  switch (family.kind()) {
    case PolyKind::HermitePhysicists: cur = 2.0 * x; break;
    case PolyKind::HermiteProbabilists: cur = x; break;
    case PolyKind::Laguerre: cur = 1.0 + a - x; break;
  }
  for (int j = 1; j < k; ++j) {
    double next = 0.0;
    switch (family.kind()) {
      case PolyKind::HermitePhysicists: next = 2.0 * x * cur - 2.0 * j * prev; break;
      case PolyKind::HermiteProbabilists: next = x * cur - j * prev; break;
      case PolyKind::Laguerre: next = ((2.0 * j + 1.0 + a - x) * cur - (j + a) * prev) / (j + 1.0); break;
    }
    prev = cur;
    cur = next;
  }
  return cur;
}

void eval_orthonormal_sequence(const PolynomialFamily& family, int k_max, double x, std::span<double> out,
                               int degree_cap) {
  check_degree(k_max, degree_cap);
  check_finite(x, "polynomial argument");
  check_span(out, k_max);

  const double a = family.alpha();
  out[0] = 1.0;
  if (k_max == 0) return;

  switch (family.kind()) {
    case PolyKind::HermitePhysicists:
      out[1] = std::sqrt(2.0) * x;
      for (int k = 1; k < k_max; ++k) {
        const double kp = k + 1.0;
        out[k + 1] = std::sqrt(2.0 / kp) * x * out[k] - std::sqrt(k / kp) * out[k - 1];
      }
      break;
    case PolyKind::HermiteProbabilists:
      out[1] = x;
      for (int k = 1; k < k_max; ++k) {
        out[k + 1] = (x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) / std::sqrt(k + 1.0);
      }
      break;
    case PolyKind::Laguerre:
      out[1] = (1.0 + a - x) / std::sqrt(1.0 + a);
      for (int k = 1; k < k_max; ++k) {
        const double num = (2.0 * k + 1.0 + a - x) * out[k] - std::sqrt(k * (k + a)) * out[k - 1];
        out[k + 1] = num / std::sqrt((k + 1.0) * (k + 1.0 + a));
      }
      break;
  }
}

double log_bessel_i_reduced(double alpha, double z) {
  check_bessel_args(alpha, z);
  return log_reduced_series(alpha, 0.25 * z * z);
}

double log_bessel_i(double alpha, double z) {
  check_bessel_args(alpha, z);
  if (z == 0.0) {
    if (alpha == 0.0) return 0.0;
    return alpha > 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  }
  return alpha * std::log(0.5 * z) + log_reduced_series(alpha, 0.25 * z * z);
}

double bessel_i(double alpha, double z) { return std::exp(log_bessel_i(alpha, z)); }

double bessel_i_scaled(double alpha, double z) { return std::exp(log_bessel_i(alpha, z) - z); }

}  // namespace krrlab::specfun
