#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "krrlab/error.hpp"
#include "krrlab/krr.hpp"
#include "oracles.hpp"

using namespace krrlab;

namespace {

Vector dense_oracle_alpha(const ProductKernel& pk, const TrainingSet& data, double lambda) {
  const auto n = data.n();
  std::vector<std::vector<double>> A(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<double> b(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    b[i] = data.y(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      A[i][j] = pk.evaluate(std::span<const double>(data.X.row(i).data(), pk.dim()),
                            std::span<const double>(data.X.row(j).data(), pk.dim())) +
                (i == j ? n * lambda : 0.0);
    }
  }
  const auto x = oracle::dense_solve(A, b);
  return Eigen::Map<const Vector>(x.data(), n);
}

TrainingSet make_data(const ProductKernel& pk, const TargetSpec& t, int n, double sigma, Rng& rng) {
  TrainingSet data{pk.sample(rng, n), Vector()};
  data.y = t.evaluate_rows(data.X);
  std::normal_distribution<double> noise(0.0, sigma);
  for (Eigen::Index i = 0; i < data.y.size(); ++i) data.y(i) += noise(rng);
  return data;
}

}  // namespace

TEST_CASE("scalar fit") {
  const auto pk = ProductKernel::gaussian(2);
  TrainingSet data{RowMatrix::Zero(1, 2), Vector::Constant(1, 2.0)};
  const auto m = fit(pk, data, 1.0);
  CHECK(m.alpha()(0) == doctest::Approx(1.0).epsilon(1e-15));
  const double x[2] = {0.0, 0.0};
  CHECK(m.predict(x) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("heavy ridge shrinks predictions to zero") {
  const auto pk = ProductKernel::gaussian(3);
  Rng rng(1);
  TrainingSet data{pk.sample(rng, 20), Vector::Constant(20, 1.0)};
  const auto m = fit(pk, data, 1e6);
  const auto X = pk.sample(rng, 10);
  CHECK(m.predict(X).cwiseAbs().maxCoeff() <= 1.0 / 1e6);
}

TEST_CASE("fit matches the dense-solve oracle on 50 random instances") {
  std::mt19937_64 meta(2024);
  std::uniform_int_distribution<int> nd(2, 50), dd(1, 6);
  std::uniform_real_distribution<double> le(-3.0, -1.0);
  for (int inst = 0; inst < 50; ++inst) {
    const int n = nd(meta), d = dd(meta);
    const double lambda = std::pow(10.0, le(meta));
    const auto pk = inst % 3 == 0 ? ProductKernel::gaussian(d) : inst % 3 == 1 ? ProductKernel::mehler(d, 0.5) : ProductKernel::laguerre(d, 0.5);
    Rng rng(static_cast<std::uint64_t>(inst));
    TrainingSet data{pk.sample(rng, n), Vector(n)};
    std::normal_distribution<double> z;
    for (int i = 0; i < n; ++i) data.y(i) = z(rng);
    const auto m = fit(pk, data, lambda);
    const auto ref = dense_oracle_alpha(pk, data, lambda);
    CHECK((m.alpha() - ref).norm() / ref.norm() <= 1e-10);
    CHECK(m.dual_residual() <= 1e-8);
    CHECK(m.jitter() == 0.0);
  }
}

TEST_CASE("zero model predicts zero") {
  const auto pk = ProductKernel::mehler(2, 0.5);
  Rng rng(4);
  const KrrModel m(pk, pk.sample(rng, 7), Vector::Zero(7), 0.1);
  CHECK(m.predict(pk.sample(rng, 5)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("near interpolation at tiny lambda") {
  const auto pk = ProductKernel::gaussian(3);
  Rng rng(8);
  TrainingSet data{pk.sample(rng, 5), Vector(5)};
  data.y << 0.3, -1.0, 2.0, 0.5, 0.0;
  const auto m = fit(pk, data, 1e-10);
  CHECK((m.predict(data.X) - data.y).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(m.dual_residual() <= 1e-8);
}

TEST_CASE("fit validation") {
  const auto pk = ProductKernel::gaussian(2);
  TrainingSet data{RowMatrix::Zero(3, 2), Vector::Zero(3)};
  try {
    (void)fit(pk, data, 0.0);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()) == "lambda must be positive");
  }
  CHECK_THROWS_AS(fit(pk, data, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(fit(pk, data, NAN), std::invalid_argument);
  CHECK_THROWS_AS(fit(pk, TrainingSet{RowMatrix::Zero(3, 3), Vector::Zero(3)}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(fit(pk, TrainingSet{RowMatrix::Zero(3, 2), Vector::Zero(2)}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(fit(pk, TrainingSet{RowMatrix::Zero(0, 2), Vector::Zero(0)}, 1.0), std::invalid_argument);
  Vector bad = Vector::Zero(3);
  bad(1) = INFINITY;
  CHECK_THROWS_AS(fit(pk, TrainingSet{RowMatrix::Zero(3, 2), bad}, 1.0), std::invalid_argument);
  const auto m = fit(pk, data, 1.0);
  const double x3[3] = {0, 0, 0};
  CHECK_THROWS_AS(m.predict(std::span<const double>(x3, 3)), std::invalid_argument);
}

TEST_CASE("jitter escalation on a singular system") {
  const auto pk = ProductKernel::gaussian(2);
  TrainingSet data{RowMatrix::Zero(3, 2), Vector::Constant(3, 1.0)};
  const auto m = fit(pk, data, 1e-320);
  CHECK(m.jitter() > 0.0);
  CHECK(m.alpha().allFinite());
}

TEST_CASE("shrinkage monotonicity of the training residual") {
  const auto pk = ProductKernel::gaussian(4);
  Rng rng(12);
  const auto t = TargetSpec::kernel_sections(pk, pk.sample(rng, 3), 0);
  const auto data = make_data(pk, t, 40, 0.1, rng);
  double prev = -1.0;
  for (double e = -6; e <= 2; e += 0.5) {
    const auto m = fit(pk, data, std::pow(10.0, e));
    const double mse = (m.predict(data.X) - data.y).squaredNorm() / 40.0;
    CHECK(mse >= prev - 1e-15);
    prev = mse;
  }
}

TEST_CASE("model JSON round trip is exact") {
  const auto pk = ProductKernel::laguerre(3, 0.9, 0.5);
  Rng rng(3);
  const auto t = TargetSpec::eigenfunction(pk, 1, 2);
  const auto data = make_data(pk, t, 25, 0.1, rng);
  const auto m = fit(pk, data, 0.01);
  const auto back = KrrModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  const auto X = pk.sample(rng, 30);
  CHECK((back.predict(X).array() == m.predict(X).array()).all());
  CHECK(back.lambda() == m.lambda());
  auto j = m.to_json();
  j["n"] = 3;
  CHECK_THROWS_AS(KrrModel::from_json(j), ConfigError);
}

TEST_CASE("squared error trivial cases") {
  const auto pk = ProductKernel::mehler(3, 0.5);
  const auto one = TargetSpec::eigenfunction(pk, 0, 0);
  Rng rng(5);
  const auto zero = squared_error(pk, [](const RowMatrix& X) { return Vector::Zero(X.rows()); }, one, 100, rng);
  CHECK(zero.mean == 1.0);
  CHECK(zero.std_error == 0.0);
  const auto t = TargetSpec::eigenfunction(pk, 2, 1);
  const auto same = squared_error(pk, [&](const RowMatrix& X) { return t.evaluate_rows(X); }, t, 100, rng);
  CHECK(same.mean == 0.0);
  CHECK_THROWS(squared_error(pk, [](const RowMatrix& X) { return Vector::Zero(X.rows()); }, one, 0, rng));
}

TEST_CASE("Monte-Carlo error agrees with a quadrature oracle") {
  const auto pk = ProductKernel::mehler(1, 0.4, 1.0);
  const auto t = TargetSpec::eigenfunction(pk, 1, 0);
  Rng rng(9);
  const auto data = make_data(pk, t, 15, 0.3, rng);
  const auto m = fit(pk, data, 0.05);
  const auto est = generalization_error(m, t, 20000, rng);
  const auto q = oracle::gauss_hermite_prob(150);
  double exact = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double x = q.nodes[i];
    const double diff = m.predict(std::span<const double>(&x, 1)) - t.evaluate(std::span<const double>(&x, 1));
    exact += q.weights[i] * diff * diff;
  }
  CHECK(std::abs(est.mean - exact) <= 3.0 * est.std_error);
}

TEST_CASE("variance scales with sigma squared") {
  const auto pk = ProductKernel::gaussian(5);
  Rng r0(21);
  const auto t = TargetSpec::kernel_sections(pk, pk.sample(r0, 3), 0);
  const auto X = pk.sample(r0, 60);
  Rng a(1), b(1), c(1);
  const auto zero = bias_variance(pk, X, t, 0.0, 0.01, 500, a);
  const auto one = bias_variance(pk, X, t, 0.1, 0.01, 500, b);
  const auto two = bias_variance(pk, X, t, 0.2, 0.01, 500, c);
  CHECK(zero.variance.mean == 0.0);
  CHECK(two.variance.mean == doctest::Approx(4.0 * one.variance.mean).epsilon(1e-14));
  CHECK(two.bias2.mean == one.bias2.mean);
  CHECK(zero.bias2.mean == one.bias2.mean);
}

TEST_CASE("bias plus variance matches the noise-averaged error") {
  const int d = 5, n = 60, m = 2000, redraws = 30;
  const double sigma = 0.1, lambda = 0.01;
  const auto pk = ProductKernel::gaussian(d);
  Rng r0(77);
  const auto t = TargetSpec::kernel_sections(pk, pk.sample(r0, 3), 0);
  const auto X = pk.sample(r0, n);
  Rng bv_rng(500);
  const auto bv = bias_variance(pk, X, t, sigma, lambda, m, bv_rng);

  std::vector<double> errs;
  const Vector clean = t.evaluate_rows(X);
  for (int r = 0; r < redraws; ++r) {
    Rng nr(1000 + r);
    std::normal_distribution<double> noise(0.0, sigma);
    TrainingSet data{X, clean};
    for (Eigen::Index i = 0; i < n; ++i) data.y(i) += noise(nr);
    Rng test_rng(500);  // same test draw as bias_variance
    errs.push_back(generalization_error(fit(pk, data, lambda), t, m, test_rng).mean);
  }
  const auto avg = summarize(Eigen::Map<const Vector>(errs.data(), redraws));
  const double combined = std::sqrt(avg.std_error * avg.std_error + bv.bias2.std_error * bv.bias2.std_error +
                                    bv.variance.std_error * bv.variance.std_error);
  CHECK(std::abs(bv.bias2.mean + bv.variance.mean - avg.mean) <= 3.0 * combined);
}
