#include "krrlab/krr.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "krrlab/codec.hpp"
#include "krrlab/error.hpp"

namespace krrlab {

namespace {

constexpr int kMaxJitterDoublings = 6;

void require_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive");
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Cholesky of K + shift I, escalating diagonal jitter only on failure.
Factorization factorize(const RowMatrix& K, double shift) {
  const auto n = K.rows();
  Eigen::MatrixXd A = K;
  A.diagonal().array() += shift;

  Factorization f;
  f.llt.compute(A);
  if (f.llt.info() == Eigen::Success) return f;

  double jitter = 1e-12 * A.trace() / static_cast<double>(n);
  for (int attempt = 0; attempt <= kMaxJitterDoublings; ++attempt, jitter *= 2.0) {
    Eigen::MatrixXd J = A;
    J.diagonal().array() += jitter;
    f.llt.compute(J);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
  }
  throw NumericalError("Cholesky factorization failed after jitter escalation up to " + std::to_string(jitter / 2.0));
}

#ifndef NDEBUG
void debug_check_gram(const RowMatrix& K) {
  if (!K.isApprox(K.transpose(), 0.0) && (K - K.transpose()).cwiseAbs().maxCoeff() > 0.0) {
    throw std::logic_error("kernel matrix is not symmetric");
  }
  if (K.rows() <= 200) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(K), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8 * K.trace()) throw std::logic_error("kernel matrix is not PSD");
  }
}
#endif

void validate(const ProductKernel& kernel, const TrainingSet& data, double lambda) {
  require_lambda(lambda);
  if (data.n() < 1) throw std::invalid_argument("training set must contain at least one sample");
  if (data.d() != kernel.dim()) throw std::invalid_argument("training inputs do not match kernel dimension");
  if (data.y.size() != data.n()) throw std::invalid_argument("response length does not match the number of inputs");
  if (!data.y.allFinite()) throw std::invalid_argument("responses must be finite");
  if (!data.X.allFinite()) throw std::invalid_argument("inputs must be finite");
}

}  // namespace

// -------------------------------------------------------------------- KrrModel

KrrModel::KrrModel(ProductKernel kernel, RowMatrix X, Vector alpha, double lambda, double jitter,
                   double dual_residual)
    : kernel_(std::move(kernel)),
      X_(std::move(X)),
      alpha_(std::move(alpha)),
      lambda_(lambda),
      jitter_(jitter),
      dual_residual_(dual_residual) {
  require_lambda(lambda_);
  if (X_.cols() != kernel_.dim()) throw std::invalid_argument("model inputs do not match kernel dimension");
  if (alpha_.size() != X_.rows()) throw std::invalid_argument("alpha length does not match the number of inputs");
}

double KrrModel::predict(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != kernel_.dim()) {
    throw std::invalid_argument("prediction input has length " + std::to_string(x.size()) + ", expected " +
                                std::to_string(kernel_.dim()));
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    sum += kernel_.evaluate(x, std::span<const double>(X_.row(i).data(), x.size())) * alpha_(i);
  }
  return sum;
}

Vector KrrModel::predict(const RowMatrix& X) const {
  if (X.cols() != kernel_.dim()) throw std::invalid_argument("prediction inputs do not match kernel dimension");
  return kernel_.cross(X, X_) * alpha_;
}

nlohmann::json KrrModel::to_json() const {
  return {{"kernel", kernel_.to_json()},
          {"lambda", lambda_},
          {"n", X_.rows()},
          {"d", X_.cols()},
          {"jitter", jitter_},
          {"dual_residual", dual_residual_},
          {"encoding", "base64-float64-le-row-major"},
          {"X", codec::encode_doubles(std::span<const double>(X_.data(), static_cast<std::size_t>(X_.size())))},
          {"alpha", codec::encode_doubles(std::span<const double>(alpha_.data(), static_cast<std::size_t>(alpha_.size())))}};
}

KrrModel KrrModel::from_json(const nlohmann::json& j) {
  try {
    auto kernel = ProductKernel::from_json(j.at("kernel"));
    const auto n = j.at("n").get<Eigen::Index>();
    const auto d = j.at("d").get<Eigen::Index>();
    const auto xs = codec::decode_doubles(j.at("X").get<std::string>());
    const auto as = codec::decode_doubles(j.at("alpha").get<std::string>());
    if (static_cast<Eigen::Index>(xs.size()) != n * d || static_cast<Eigen::Index>(as.size()) != n) {
      throw ConfigError("X", "encoded arrays do not match n and d");
    }
    RowMatrix X = Eigen::Map<const RowMatrix>(xs.data(), n, d);
    Vector alpha = Eigen::Map<const Vector>(as.data(), n);
    return KrrModel(std::move(kernel), std::move(X), std::move(alpha), j.at("lambda").get<double>(),
                    j.value("jitter", 0.0), j.value("dual_residual", 0.0));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model", std::string("malformed model JSON: ") + e.what());
  }
}

// ------------------------------------------------------------------------ fit

KrrModel fit(const ProductKernel& kernel, const TrainingSet& data, double lambda) {
  validate(kernel, data, lambda);
  const auto n = data.n();
  const double shift = static_cast<double>(n) * lambda;

  const RowMatrix K = kernel.gram(data.X);
#ifndef NDEBUG
  debug_check_gram(K);
#endif
  const auto f = factorize(K, shift);

  Vector alpha = f.llt.solve(data.y);
  auto apply = [&](const Vector& v) -> Vector { return K * v + shift * v; };
  alpha += f.llt.solve(Vector(data.y - apply(alpha)));

  const double y_norm = data.y.norm();
  const double res = (apply(alpha) - data.y).norm();
  const double rel = y_norm > 0.0 ? res / y_norm : res;
  if (!alpha.allFinite()) throw NumericalError("KRR solve produced non-finite coefficients");

  return KrrModel(kernel, data.X, std::move(alpha), lambda, f.jitter, rel);
}

// --------------------------------------------------------------------- errors

ErrorEstimate summarize(const Vector& values) {
  ErrorEstimate e;
  e.samples = static_cast<int>(values.size());
  if (e.samples == 0) return e;
  e.mean = values.mean();
  if (e.samples > 1) {
    const double var = (values.array() - e.mean).square().sum() / (e.samples - 1);
    e.std_error = std::sqrt(var / e.samples);
  }
  return e;
}

ErrorEstimate squared_error(const ProductKernel& measure, const std::function<Vector(const RowMatrix&)>& predictor,
                            const TargetSpec& target, int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("test sample size must be >= 1");
  const RowMatrix Xt = measure.sample(rng, m);
  const Vector diff = predictor(Xt) - target.evaluate_rows(Xt);
  return summarize(diff.array().square().matrix());
}

ErrorEstimate generalization_error(const KrrModel& model, const TargetSpec& target, int m, Rng& rng) {
  return squared_error(
      model.kernel(), [&model](const RowMatrix& X) { return model.predict(X); }, target, m, rng);
}

BiasVariance bias_variance(const ProductKernel& kernel, const RowMatrix& X, const TargetSpec& target,
                           double sigma_eps, double lambda, int m, Rng& rng) {
  if (!(sigma_eps >= 0.0)) throw std::invalid_argument("sigma_eps must be non-negative");
  if (m < 1) throw std::invalid_argument("test sample size must be >= 1");
  TrainingSet clean{X, target.evaluate_rows(X)};
  validate(kernel, clean, lambda);
  const auto n = X.rows();
  const double shift = static_cast<double>(n) * lambda;

  const RowMatrix K = kernel.gram(X);
  const auto f = factorize(K, shift);
  Vector alpha = f.llt.solve(clean.y);
  alpha += f.llt.solve(Vector(clean.y - (K * alpha + shift * alpha)));

  const RowMatrix Xt = kernel.sample(rng, m);
  const RowMatrix Kt = kernel.cross(Xt, X);  // m x n

  BiasVariance out;
  out.jitter = f.jitter;
  const Vector residual = Kt * alpha - target.evaluate_rows(Xt);
  out.bias2 = summarize(residual.array().square().matrix());

  // (K + n lambda)^{-1} K(X, x_j) for every test point; variance_j = sigma^2 ||.||^2.
  const Eigen::MatrixXd Z = f.llt.solve(Eigen::MatrixXd(Kt.transpose()));
  const Vector norms = Z.colwise().squaredNorm().transpose();
  out.variance = summarize((sigma_eps * sigma_eps) * norms);
  return out;
}

}  // namespace krrlab
