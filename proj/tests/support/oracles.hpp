#pragma once

// Independent reference implementations used only by the tests.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "krrlab/kernels.hpp"

namespace oracle {

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1 (probability measure)
};

// Golub-Welsch nodes from a symmetric Jacobi matrix. Weights come from the
// Christoffel function 1 / sum_k p_k(x)^2 with the orthonormal p_k generated
// by the same Jacobi recurrence, which keeps tail weights accurate.
inline Quadrature golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& off) {
  const auto n = diag.size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  J.diagonal() = diag;
  for (Eigen::Index i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = off(i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
  Quadrature q;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = es.eigenvalues()(i);
    double prev = 0.0, cur = 1.0, sum = 1.0;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      const double next = ((x - diag(k)) * cur - (k > 0 ? off(k - 1) * prev : 0.0)) / off(k);
      prev = cur;
      cur = next;
      sum += cur * cur;
    }
    q.nodes.push_back(x);
    q.weights.push_back(1.0 / sum);
  }
  return q;
}

// Gauss rule for N(0, 1).
inline Quadrature gauss_hermite_prob(int n) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n), off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  return golub_welsch(diag, off);
}

// Gauss rule for Gamma(alpha + 1, 1).
inline Quadrature gauss_laguerre(int n, double alpha) {
  Eigen::VectorXd diag(n), off(n - 1);
  for (int k = 0; k < n; ++k) diag(k) = 2.0 * k + alpha + 1.0;
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(k * (k + alpha));
  return golub_welsch(diag, off);
}

// Plain ascending series for I_alpha(z), fixed number of terms.
inline double bessel_series(double alpha, double z, int terms = 30) {
  double sum = 0.0;
  for (int m = 0; m < terms; ++m) {
    sum += std::exp((2.0 * m + alpha) * std::log(z / 2.0) - std::lgamma(m + 1.0) - std::lgamma(m + alpha + 1.0));
  }
  return sum;
}

// L_k^alpha(x) from the explicit finite sum.
inline double laguerre_explicit(int k, double alpha, double x) {
  double sum = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double binom = std::exp(std::lgamma(k + alpha + 1.0) - std::lgamma(k - i + 1.0) - std::lgamma(alpha + i + 1.0));
    sum += ((i % 2) ? -1.0 : 1.0) * binom * std::pow(x, i) / std::tgamma(i + 1.0);
  }
  return sum;
}

// Sum of |terms| of the explicit sum; bounds its cancellation error.
inline double laguerre_explicit_abs(int k, double alpha, double x) {
  double sum = 0.0;
  for (int i = 0; i <= k; ++i) {
    sum += std::exp(std::lgamma(k + alpha + 1.0) - std::lgamma(k - i + 1.0) - std::lgamma(alpha + i + 1.0)) *
           std::pow(x, i) / std::tgamma(i + 1.0);
  }
  return sum;
}

// Every product eigenvalue with total degree <= k_max, visited coordinate by coordinate.
inline void for_each_eigenvalue(const krrlab::ProductKernel& pk, int k_max,
                                const std::function<void(int level, double mu)>& visit) {
  const int d = pk.dim();
  std::function<void(int, int, double)> rec = [&](int i, int used, double mu) {
    if (i == d) {
      visit(used, mu);
      return;
    }
    for (int a = 0; used + a <= k_max; ++a) rec(i + 1, used + a, mu * pk.factor(i).eigenvalue(a));
  };
  rec(0, 0, 1.0);
}

inline double brute_n1(const krrlab::ProductKernel& pk, int k_max, double lambda) {
  double s = 0.0;
  for_each_eigenvalue(pk, k_max, [&](int, double mu) { s += mu / (mu + lambda); });
  return s;
}

inline double brute_n2(const krrlab::ProductKernel& pk, int k_max, double lambda) {
  double s = 0.0;
  for_each_eigenvalue(pk, k_max, [&](int, double mu) { s += (mu / (mu + lambda)) * (mu / (mu + lambda)); });
  return s;
}

// R2 with every index of level k carrying coefficient f_k (so m_k = N(d,k) mu^{-s} f_k^2 per index).
inline double brute_r2_uniform_coeffs(const krrlab::ProductKernel& pk, int k_max, double lambda,
                                      const std::vector<double>& f_per_level) {
  double s = 0.0;
  for_each_eigenvalue(pk, k_max, [&](int level, double mu) {
    const double shrink = lambda / (mu + lambda);
    s += shrink * shrink * f_per_level[static_cast<std::size_t>(level)] * f_per_level[static_cast<std::size_t>(level)];
  });
  return s;
}

// Gaussian elimination with partial pivoting on a dense copy.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= A[i][k] * x[k];
    x[i] = acc / A[i][i];
  }
  return x;
}

}  // namespace oracle
