#include "krrlab/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "krrlab/error.hpp"
#include "krrlab/specfun.hpp"

namespace krrlab {

namespace {

constexpr double kLogSwitch = 1e-300;

const char* kind_name(BaseKind kind) {
  switch (kind) {
    case BaseKind::Gaussian: return "gaussian";
    case BaseKind::Mehler: return "mehler";
    case BaseKind::Laguerre: return "laguerre";
  }
  return "?";
}

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(field, std::string(field) + " must be a positive finite number");
  }
}

void require_dimension(int d) {
  if (d < 1) throw ConfigError("d", "d must be a positive integer");
}

double read_number(const nlohmann::json& params, const char* key, double fallback, const std::string& prefix) {
  if (!params.contains(key)) return fallback;
  const auto& v = params.at(key);
  if (!v.is_number()) throw ConfigError(prefix + key, prefix + key + " must be a number");
  return v.get<double>();
}

}  // namespace

// ---------------------------------------------------------------- BaseKernel1D

BaseKernel1D BaseKernel1D::gaussian(double ell, double sigma, int d) {
  require_positive(ell, "ell");
  require_positive(sigma, "sigma");
  require_dimension(d);
  BaseKernel1D k;
  k.kind_ = BaseKind::Gaussian;
  k.d_ = d;
  k.ell_ = ell;
  k.sigma_ = sigma;
  auto& g = k.g_;
  g.a = 1.0 / (4.0 * sigma * sigma);
  g.b = 1.0 / (2.0 * ell * ell * d);
  g.c = std::sqrt(g.a * g.a + 2.0 * g.a * g.b);
  g.A = g.a + g.b + g.c;
  g.B = g.b / g.A;
  k.r_ = g.B;
  k.mu0_ = std::sqrt(2.0 * g.a / g.A);
  k.eigfn_scale_ = std::pow(g.c / g.a, 0.25);
  return k;
}

BaseKernel1D BaseKernel1D::mehler(double theta, double sigma, int d) {
  require_positive(theta, "theta");
  require_positive(sigma, "sigma");
  require_dimension(d);
  if (!(theta < d)) throw ConfigError("theta", "Mehler theta must be smaller than d so that r = theta/d < 1");
  BaseKernel1D k;
  k.kind_ = BaseKind::Mehler;
  k.d_ = d;
  k.theta_ = theta;
  k.sigma_ = sigma;
  k.r_ = theta / d;
  k.mu0_ = 1.0;
  return k;
}

BaseKernel1D BaseKernel1D::laguerre(double theta, double alpha, int d) {
  require_positive(theta, "theta");
  require_dimension(d);
  if (!(alpha > -1.0) || !std::isfinite(alpha)) throw ConfigError("alpha", "Laguerre alpha must be > -1");
  if (!(theta < d)) throw ConfigError("theta", "Laguerre theta must be smaller than d so that r = theta/d < 1");
  BaseKernel1D k;
  k.kind_ = BaseKind::Laguerre;
  k.d_ = d;
  k.theta_ = theta;
  k.alpha_ = alpha;
  k.r_ = theta / d;
  k.mu0_ = 1.0;
  k.log_gamma_alpha1_ = std::lgamma(alpha + 1.0);
  return k;
}

double BaseKernel1D::log_evaluate(double x, double y) const {
  if (!std::isfinite(x) || !std::isfinite(y)) throw std::domain_error("kernel arguments must be finite");
  switch (kind_) {
    case BaseKind::Gaussian: {
      const double diff = x - y;
      return -g_.b * diff * diff;
    }
    case BaseKind::Mehler: {
      const double u = x / sigma_;
      const double v = y / sigma_;
      const double one_minus = 1.0 - r_ * r_;
      return -0.5 * std::log(one_minus) + (2.0 * r_ * (u * v) - r_ * r_ * (u * u + v * v)) / (2.0 * one_minus);
    }
    case BaseKind::Laguerre: {
      if (!(x > 0.0) || !(y > 0.0)) throw std::domain_error("Laguerre kernel requires x, y > 0");
      const double one_minus = 1.0 - r_;
      const double z = 2.0 * std::sqrt(r_ * (x * y)) / one_minus;
      // (r x y)^{-alpha/2} I_alpha(z) = (1-r)^{-alpha} (z/2)^{-alpha} I_alpha(z)
      return log_gamma_alpha1_ - (alpha_ + 1.0) * std::log(one_minus) - r_ * (x + y) / one_minus +
             specfun::log_bessel_i_reduced(alpha_, z);
    }
  }
  return 0.0;
}

double BaseKernel1D::evaluate(double x, double y) const {
  if (kind_ == BaseKind::Gaussian) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw std::domain_error("kernel arguments must be finite");
    const double diff = x - y;
    return std::exp(-g_.b * diff * diff);
  }
  return std::exp(log_evaluate(x, y));
}

double BaseKernel1D::eigenvalue(int k) const {
  if (k < 0) throw std::out_of_range("eigenvalue index must be non-negative");
  return mu0_ * std::pow(r_, k);
}

void BaseKernel1D::eigenfunctions(int k_max, double x, std::span<double> out) const {
  switch (kind_) {
    case BaseKind::Gaussian: {
      specfun::eval_orthonormal_sequence(specfun::PolynomialFamily::hermite_physicists(), k_max,
                                         std::sqrt(2.0 * g_.c) * x, out);
      const double envelope = eigfn_scale_ * std::exp(-(g_.c - g_.a) * x * x);
      for (int k = 0; k <= k_max; ++k) out[k] *= envelope;
      return;
    }
    case BaseKind::Mehler:
      specfun::eval_orthonormal_sequence(specfun::PolynomialFamily::hermite_probabilists(), k_max, x / sigma_,
                                         out);
      return;
    case BaseKind::Laguerre:
      if (!(x > 0.0)) throw std::domain_error("Laguerre eigenfunctions require x > 0");
      specfun::eval_orthonormal_sequence(specfun::PolynomialFamily::laguerre(alpha_), k_max, x, out);
      return;
  }
}

double BaseKernel1D::eigenfunction(int k, double x) const {
  if (k < 0) throw std::out_of_range("eigenfunction index must be non-negative");
  std::vector<double> buf(static_cast<std::size_t>(k) + 1);
  eigenfunctions(k, x, buf);
  return buf.back();
}

double BaseKernel1D::mercer_sum(double x, double y, int k_max) const {
  if (k_max < 0) throw std::out_of_range("k_max must be non-negative");
  std::vector<double> ex(static_cast<std::size_t>(k_max) + 1);
  std::vector<double> ey(ex.size());
  eigenfunctions(k_max, x, ex);
  eigenfunctions(k_max, y, ey);
  double sum = 0.0;
  double mu = mu0_;
  for (int k = 0; k <= k_max; ++k) {
    sum += mu * ex[k] * ey[k];
    mu *= r_;
  }
  return sum;
}

double BaseKernel1D::sample(Rng& rng) const {
  if (kind_ == BaseKind::Laguerre) {
    std::gamma_distribution<double> gamma(alpha_ + 1.0, 1.0);
    return gamma(rng);
  }
  std::normal_distribution<double> normal(0.0, sigma_);
  return normal(rng);
}

double BaseKernel1D::measure_stddev() const noexcept {
  return kind_ == BaseKind::Laguerre ? std::sqrt(alpha_ + 1.0) : sigma_;
}

double BaseKernel1D::measure_mean() const noexcept { return kind_ == BaseKind::Laguerre ? alpha_ + 1.0 : 0.0; }

bool BaseKernel1D::same_as(const BaseKernel1D& o) const noexcept {
  return kind_ == o.kind_ && d_ == o.d_ && ell_ == o.ell_ && sigma_ == o.sigma_ && theta_ == o.theta_ &&
         alpha_ == o.alpha_;
}

nlohmann::json BaseKernel1D::to_json() const {
  nlohmann::json params;
  switch (kind_) {
    case BaseKind::Gaussian: params = {{"ell", ell_}, {"sigma", sigma_}}; break;
    case BaseKind::Mehler: params = {{"theta", theta_}, {"sigma", sigma_}}; break;
    case BaseKind::Laguerre: params = {{"theta", theta_}, {"alpha", alpha_}}; break;
  }
  return {{"kind", kind_name(kind_)}, {"params", params}};
}

BaseKernel1D BaseKernel1D::from_json(const nlohmann::json& j, int d) {
  if (!j.is_object()) throw ConfigError("kernel", "kernel factor must be a JSON object");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError("kind", "kernel kind must be a string");
  const auto kind = j.at("kind").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  if (!params.is_object()) throw ConfigError("params", "kernel params must be an object");
  const std::string prefix = "params.";
  if (kind == "gaussian") {
    return gaussian(read_number(params, "ell", 1.0, prefix), read_number(params, "sigma", 1.0, prefix), d);
  }
  if (kind == "mehler") {
    return mehler(read_number(params, "theta", 1.0, prefix), read_number(params, "sigma", 1.0, prefix), d);
  }
  if (kind == "laguerre") {
    return laguerre(read_number(params, "theta", 1.0, prefix), read_number(params, "alpha", 0.0, prefix), d);
  }
  throw ConfigError("kind", "unknown kernel kind '" + kind + "' (expected gaussian, mehler, laguerre or mixed)");
}

// --------------------------------------------------------------- ProductKernel

ProductKernel::ProductKernel(std::vector<BaseKernel1D> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw std::invalid_argument("product kernel needs at least one factor");
  const int d = dim();
  all_gaussian_ = true;
  uniform_ = true;
  gauss_weight_.reserve(factors_.size());
  for (const auto& f : factors_) {
    if (f.d_context() != d) {
      throw std::invalid_argument("every factor must carry d_context equal to the number of factors");
    }
    if (f.kind() == BaseKind::Gaussian) {
      gauss_weight_.push_back(f.gaussian_constants().b);
    } else {
      gauss_weight_.push_back(0.0);
      all_gaussian_ = false;
    }
    uniform_ = uniform_ && f.same_as(factors_.front());
  }
}

ProductKernel ProductKernel::uniform(const BaseKernel1D& factor) {
  return ProductKernel(std::vector<BaseKernel1D>(static_cast<std::size_t>(factor.d_context()), factor));
}

ProductKernel ProductKernel::gaussian(int d, double ell, double sigma) {
  return uniform(BaseKernel1D::gaussian(ell, sigma, d));
}

ProductKernel ProductKernel::mehler(int d, double theta, double sigma) {
  return uniform(BaseKernel1D::mehler(theta, sigma, d));
}

ProductKernel ProductKernel::laguerre(int d, double theta, double alpha) {
  return uniform(BaseKernel1D::laguerre(theta, alpha, d));
}

ProductKernel ProductKernel::mixed(const std::vector<std::pair<BaseKernel1D, int>>& blocks) {
  std::vector<BaseKernel1D> factors;
  for (const auto& [factor, count] : blocks) {
    if (count < 0) throw std::invalid_argument("block count must be non-negative");
    factors.insert(factors.end(), static_cast<std::size_t>(count), factor);
  }
  return ProductKernel(std::move(factors));
}

double ProductKernel::evaluate_unchecked(const double* x, const double* y) const {
  double exponent = 0.0;
  if (all_gaussian_) {
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      const double diff = x[i] - y[i];
      exponent -= gauss_weight_[i] * diff * diff;
    }
    return std::exp(exponent);
  }

  double product = 1.0;
  bool use_log = false;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (factors_[i].kind() == BaseKind::Gaussian) {
      const double diff = x[i] - y[i];
      exponent -= gauss_weight_[i] * diff * diff;
      continue;
    }
    const double v = factors_[i].evaluate(x[i], y[i]);
    if (v < kLogSwitch) use_log = true;
    product *= v;
  }
  if (!use_log && product >= kLogSwitch && std::isfinite(product)) return product * std::exp(exponent);

  double log_sum = exponent;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (factors_[i].kind() != BaseKind::Gaussian) log_sum += factors_[i].log_evaluate(x[i], y[i]);
  }
  return std::exp(log_sum);
}

double ProductKernel::evaluate(std::span<const double> x, std::span<const double> y) const {
  const auto d = factors_.size();
  if (x.size() != d || y.size() != d) {
    throw std::invalid_argument("input length does not match kernel dimension " + std::to_string(d));
  }
  return evaluate_unchecked(x.data(), y.data());
}

void ProductKernel::sample(Rng& rng, std::span<double> out) const {
  if (out.size() != factors_.size()) throw std::invalid_argument("output length does not match kernel dimension");
  for (std::size_t i = 0; i < factors_.size(); ++i) out[i] = factors_[i].sample(rng);
}

RowMatrix ProductKernel::sample(Rng& rng, int count) const {
  RowMatrix X(count, dim());
  for (int i = 0; i < count; ++i) sample(rng, std::span<double>(X.row(i).data(), factors_.size()));
  return X;
}

RowMatrix ProductKernel::gram(const RowMatrix& X) const {
  if (X.cols() != dim()) throw std::invalid_argument("gram: column count does not match kernel dimension");
  const Eigen::Index n = X.rows();
  RowMatrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* xi = X.row(i).data();
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = evaluate_unchecked(xi, X.row(j).data());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

RowMatrix ProductKernel::cross(const RowMatrix& A, const RowMatrix& B) const {
  if (A.cols() != dim() || B.cols() != dim()) {
    throw std::invalid_argument("cross: column count does not match kernel dimension");
  }
  RowMatrix K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double* ai = A.row(i).data();
    for (Eigen::Index j = 0; j < B.rows(); ++j) K(i, j) = evaluate_unchecked(ai, B.row(j).data());
  }
  return K;
}

double ProductKernel::trace() const {
  double log_trace = 0.0;
  for (const auto& f : factors_) log_trace += std::log(f.eigenvalue_scale()) - std::log1p(-f.decay());
  return std::exp(log_trace);
}

double ProductKernel::diagonal_max(const RowMatrix& X) const {
  double best = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    best = std::max(best, evaluate_unchecked(X.row(i).data(), X.row(i).data()));
  }
  return best;
}

nlohmann::json ProductKernel::to_json() const {
  if (uniform_) {
    auto j = factors_.front().to_json();
    j["d"] = dim();
    return j;
  }
  nlohmann::json blocks = nlohmann::json::array();
  std::size_t i = 0;
  while (i < factors_.size()) {
    std::size_t run = 1;
    while (i + run < factors_.size() && factors_[i + run].same_as(factors_[i])) ++run;
    auto block = factors_[i].to_json();
    block["count"] = run;
    blocks.push_back(std::move(block));
    i += run;
  }
  return {{"kind", "mixed"}, {"d", dim()}, {"factors", std::move(blocks)}};
}

ProductKernel ProductKernel::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("kernel", "kernel specification must be a JSON object");
  if (!j.contains("d") || !j.at("d").is_number_integer()) throw ConfigError("d", "kernel d must be an integer");
  const int d = j.at("d").get<int>();
  require_dimension(d);

  if (j.contains("factors")) {
    const auto& list = j.at("factors");
    if (!list.is_array() || list.empty()) throw ConfigError("factors", "factors must be a non-empty array");
    std::vector<std::pair<BaseKernel1D, int>> blocks;
    int total = 0;
    for (const auto& entry : list) {
      int count = 1;
      if (entry.contains("count")) {
        if (!entry.at("count").is_number_integer() || entry.at("count").get<int>() < 1) {
          throw ConfigError("factors.count", "factor block count must be a positive integer");
        }
        count = entry.at("count").get<int>();
      }
      blocks.emplace_back(BaseKernel1D::from_json(entry, d), count);
      total += count;
    }
    if (total != d) {
      throw ConfigError("factors", "factor counts sum to " + std::to_string(total) + " but d = " +
                                       std::to_string(d));
    }
    return mixed(blocks);
  }
  if (j.value("kind", "") == "mixed") throw ConfigError("factors", "mixed kernels require a factors list");
  return uniform(BaseKernel1D::from_json(j, d));
}

// -------------------------------------------------------------- KernelTemplate

KernelTemplate::KernelTemplate(nlohmann::json spec) : spec_(std::move(spec)) {
  if (!spec_.is_object()) throw ConfigError("kernel", "kernel template must be a JSON object");
  if (spec_.contains("factors")) {
    throw ConfigError("kernel.factors", "kernel templates must be homogeneous; mixed kernels need a fixed d");
  }
  // Validate parameters eagerly with a dummy dimension large enough for theta < d.
  (void)BaseKernel1D::from_json(spec_, 1 << 20);
}

ProductKernel KernelTemplate::instantiate(int d) const {
  auto j = spec_;
  j["d"] = d;
  return ProductKernel::from_json(j);
}

}  // namespace krrlab
