// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "krrlab/experiments.hpp"
#include "krrlab/krr.hpp"
#include "krrlab/rates.hpp"
#include "krrlab/spectrum.hpp"
#include "oracles.hpp"

using namespace krrlab;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = budget_s <= 0.0 || secs <= budget_s;
  const bool ok = v.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s  %2d  %-34s  %s  [%.3fs%s]\n", ok ? "PASS" : "FAIL", id, title, v.detail.c_str(), secs,
              in_time ? "" : " over budget");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<ProductKernel> default_kernels(int d) {
  return {ProductKernel::gaussian(d), ProductKernel::mehler(d, 0.5), ProductKernel::laguerre(d, 0.5)};
}

// Points where the exact and minimax exponents change formula.
std::vector<double> seams(double s) {
  std::vector<double> out;
  const double st = s >= 1 ? std::min(s, 2.0) : s;
  for (int p = 0; p <= 6; ++p) {
    const double base = p + p * st;
    if (s >= 1) {
      out.push_back(base + 1);
      out.push_back(base + 2 * st - 1);
    } else {
      out.push_back(base + s);
    }
    out.push_back(base + 1 + st);
    out.push_back(p + p * s + s);
    out.push_back((p + 1) * (1 + s));
  }
  return out;
}

Verdict rate_points() {
  const auto a = exact_rate({1.5, 1.0});
  const auto b2 = exact_rate({1.5, 2.0});
  const auto b5 = exact_rate({1.5, 5.0});
  const auto m = minimax_rate({1.5, 5.0});
  const bool ok = a.d_exponent == -1.0 && b2.d_exponent == -1.25 && b5.d_exponent == -1.25 && m.d_exponent == -1.5 &&
                  m.log_factor == LogFactor::EpsSlack;
  return {ok, fmt("exact(1.5,1)=%g exact(1.5,2)=%g minimax(1.5,5)=%g", a.d_exponent, b2.d_exponent, m.d_exponent) +
                  " flag=" + to_string(m.log_factor)};
}

Verdict rate_curves() {
  const auto grid = gamma_grid(0.01, 10.0, 0.01);
  double max_jump = 0.0;
  bool ordering = true, equality_rule = true;
  for (double s : {0.6, 1.0, 1.5, 2.0, 2.5}) {
    const auto curve = rate_curve(s, grid, CurveSelection::Both, CurveAxis::D);
    const auto ex = curve.exact_series(), mm = curve.minimax_series();
    bool all_equal = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::isnan(ex[i])) continue;
      if (ex[i] < mm[i] - 1e-12) ordering = false;
      if (std::abs(ex[i] - mm[i]) > 1e-12) all_equal = false;
    }
    if (all_equal != (s <= 1.0)) equality_rule = false;
    for (double g : seams(s)) {
      if (g <= 0.0) continue;
      for (double eps : {1e-11, -1e-11}) {
        const auto e0 = exact_rate({g, s}), e1 = exact_rate({g + eps, s});
        if (e0.covered() && e1.covered()) max_jump = std::max(max_jump, std::abs(e0.d_exponent - e1.d_exponent));
        max_jump = std::max(max_jump,
                            std::abs(minimax_rate({g, s}).d_exponent - minimax_rate({g + eps, s}).d_exponent));
      }
    }
  }
  // Local extrema of the n-axis exponent for s = 1.5.
  const auto y = rate_curve(1.5, grid, CurveSelection::Exact, CurveAxis::N).exact_series();
  auto at = [&](double g) {
    return static_cast<std::size_t>(std::lround((g - grid.front()) / 0.01));
  };
  bool extrema = true;
  for (int p = 1; p <= 2; ++p) {
    const auto imax = at(p + p * 1.5), imin = at(p + p * 1.5 + 1);
    for (std::size_t w = 1; w <= 20; ++w) {
      extrema = extrema && y[imax] > y[imax - w] && y[imax] > y[imax + w];
      extrema = extrema && y[imin] < y[imin - w] && y[imin] < y[imin + w];
    }
  }
  const bool ok = max_jump < 1e-9 && ordering && equality_rule && extrema;
  std::ostringstream d;
  d << "max seam jump=" << max_jump << " exact>=minimax=" << ordering << " equality iff s<=1=" << equality_rule
    << " extrema(s=1.5)=" << extrema;
  return {ok, d.str()};
}

struct PresetRun {
  SlopeFit fit;
  double seconds = 0.0;
};

PresetRun run_preset(const char* file) {
  const auto cfg = SweepConfig::load(std::string(KRRLAB_PRESET_DIR) + "/" + file);
  SweepOptions o;
  o.apply_env_seed = false;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_sweep(cfg, o);
  PresetRun out;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.fit = fit_loglog_slope(r, cfg.drop_fraction);
  return out;
}

PresetRun preset_a, preset_b;

Verdict slope_a() {
  preset_a = run_preset("sweep-a.json");
  const double s = preset_a.fit.slope;
  return {s >= -1.2 && s <= -0.8, fmt("slope=%.4f (stderr %.4f), band [-1.2,-0.8]", s, preset_a.fit.std_error)};
}

Verdict slope_b() {
  preset_b = run_preset("sweep-b.json");
  const double s = preset_b.fit.slope;
  const bool band = s >= -1.45 && s <= -1.05;
  const bool steeper = preset_a.fit.points > 0 && s < preset_a.fit.slope;
  const bool closer = std::abs(s + 1.25) < std::abs(s + 1.5);
  return {band && steeper && closer,
          fmt("slope=%.4f (stderr %.4f), band [-1.45,-1.05]", s, preset_b.fit.std_error) +
              fmt(", steeper than (a) %.4f", preset_a.fit.slope) + (closer ? ", nearer -1.25" : ", nearer -1.5")};
}

Verdict spectral_oracle() {
  double worst = 0.0;
  int instances = 0;
  for (int d = 1; d <= 4; ++d) {
    for (int k_max = 0; k_max <= 6; ++k_max) {
      for (const auto& pk : default_kernels(d)) {
        const auto sp = build_spectrum(pk, k_max, SpectrumMode::ExactEnumeration);
        std::vector<double> f(static_cast<std::size_t>(k_max + 1));
        for (int k = 0; k <= k_max; ++k) f[k] = 0.3 / (k + 1);
        CoefficientSpec c;
        c.s = 1.0;
        for (int k = 0; k <= k_max; ++k) {
          double m = 0;
          for (double mu : sp.levels()[k].eigenvalues) m += f[k] * f[k] / mu;
          c.masses.push_back(m);
        }
        for (double lam : {1e-4, 1e-2, 0.3}) {
          auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
          worst = std::max(worst, rel(n1(sp, lam).value, oracle::brute_n1(pk, k_max, lam)));
          worst = std::max(worst, rel(n2(sp, lam).value, oracle::brute_n2(pk, k_max, lam)));
          worst = std::max(worst, rel(r2(sp, c, lam), oracle::brute_r2_uniform_coeffs(pk, k_max, lam, f)));
          ++instances;
        }
      }
    }
  }
  return {worst <= 1e-9, fmt("%g instances, worst relative error %.3g", instances, worst)};
}

Verdict staircase() {
  double c1 = INFINITY, c2 = 0.0;
  bool mult = true;
  for (int d : {10, 30, 100}) {
    for (const auto& pk : default_kernels(d)) {
      const auto sp = build_spectrum(pk, 4);
      c1 = std::min(c1, sp.staircase_lower());
      c2 = std::max(c2, sp.staircase_upper());
      for (int k = 0; k <= 4; ++k) {
        // binom(k + d - 1, d - 1) by exact integer product.
        unsigned long long b = 1;
        for (int i = 1; i <= k; ++i) b = b * static_cast<unsigned long long>(d - 1 + i) / static_cast<unsigned long long>(i);
        const auto& m = sp.levels()[k].multiplicity;
        mult = mult && m.value() == static_cast<double>(b);
      }
    }
  }
  return {c1 > 0.0 && std::isfinite(c2) && c1 > 0.05 && c2 < 20.0 && mult,
          fmt("c1=%.4g c2=%.4g across d in {10,30,100}", c1, c2) + (mult ? ", multiplicities exact" : ", multiplicity mismatch")};
}

Verdict mercer() {
  const std::vector<BaseKernel1D> factors = {BaseKernel1D::gaussian(1.0, 1.0, 4), BaseKernel1D::gaussian(0.8, 1.3, 10),
                                             BaseKernel1D::mehler(0.5, 1.0, 5),   BaseKernel1D::mehler(1.5, 0.7, 5),
                                             BaseKernel1D::laguerre(0.3, 1.0, 1), BaseKernel1D::laguerre(0.5, 0.0, 5)};
  bool envelope = true;
  double worst_small_r = 0.0;
  for (const auto& f : factors) {
    const double r = f.decay();
    std::vector<double> pts;
    for (int i = 0; i < 5; ++i) {
      double p = f.measure_mean() + f.measure_stddev() * (-3.0 + 1.5 * i);
      if (f.kind() == BaseKind::Laguerre) p = std::max(p, 0.05);
      pts.push_back(p);
    }
    for (double x : pts) {
      for (double y : pts) {
        const double exact = f.evaluate(x, y);
        const double c = std::max(std::abs(f.mercer_sum(x, y, 5) - exact) / std::pow(r, 5), 1.0);
        for (int k = 5; k <= 50; k += 5) {
          const double err = std::abs(f.mercer_sum(x, y, k) - exact);
          envelope = envelope && err <= 1e3 * c * std::pow(r, k) * std::pow(k, 3) + 1e-13;
        }
        if (r <= 0.3) worst_small_r = std::max(worst_small_r, std::abs(f.mercer_sum(x, y, 50) - exact));
      }
    }
  }
  return {envelope && worst_small_r < 1e-8,
          fmt("geometric envelope held, worst error at k_max=50 (r<=0.3) = %.3g", worst_small_r)};
}

Verdict solver_oracle() {
  std::mt19937_64 meta(2024);
  std::uniform_int_distribution<int> nd(2, 50), dd(1, 6);
  std::uniform_real_distribution<double> le(-3.0, -1.0);
  double worst_rel = 0.0, worst_res = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = nd(meta), d = dd(meta);
    const double lambda = std::pow(10.0, le(meta));
    const auto pk = inst % 3 == 0   ? ProductKernel::gaussian(d)
                    : inst % 3 == 1 ? ProductKernel::mehler(d, 0.5)
                                    : ProductKernel::laguerre(d, 0.5);
    Rng rng(static_cast<std::uint64_t>(inst));
    TrainingSet data{pk.sample(rng, n), Vector(n)};
    std::normal_distribution<double> z;
    for (int i = 0; i < n; ++i) data.y(i) = z(rng);
    const auto m = fit(pk, data, lambda);
    std::vector<std::vector<double>> A(n, std::vector<double>(n));
    std::vector<double> b(data.y.data(), data.y.data() + n);
    const RowMatrix K = pk.gram(data.X);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A[i][j] = K(i, j) + (i == j ? n * lambda : 0.0);
    const auto ref = oracle::dense_solve(A, b);
    const Vector r = Eigen::Map<const Vector>(ref.data(), n);
    worst_rel = std::max(worst_rel, (m.alpha() - r).norm() / r.norm());
    worst_res = std::max(worst_res, m.dual_residual());
  }
  return {worst_rel <= 1e-10 && worst_res <= 1e-8,
          fmt("worst relative deviation %.3g, worst dual residual %.3g", worst_rel, worst_res)};
}

Verdict bias_variance_additivity() {
  const int d = 5, n = 60, m = 2000, redraws = 30;
  const double sigma = 0.1, lambda = 0.01;
  const auto pk = ProductKernel::gaussian(d);
  Rng r0(77);
  const auto t = TargetSpec::kernel_sections(pk, pk.sample(r0, 3), 0);
  const auto X = pk.sample(r0, n);
  Rng bv_rng(500);
  const auto bv = bias_variance(pk, X, t, sigma, lambda, m, bv_rng);
  Vector errs(redraws);
  const Vector clean = t.evaluate_rows(X);
  for (int r = 0; r < redraws; ++r) {
    Rng nr(1000 + static_cast<std::uint64_t>(r));
    std::normal_distribution<double> noise(0.0, sigma);
    TrainingSet data{X, clean};
    for (Eigen::Index i = 0; i < n; ++i) data.y(i) += noise(nr);
    Rng test_rng(500);
    errs(r) = generalization_error(fit(pk, data, lambda), t, m, test_rng).mean;
  }
  const auto avg = summarize(errs);
  const double se = std::sqrt(avg.std_error * avg.std_error + bv.bias2.std_error * bv.bias2.std_error +
                              bv.variance.std_error * bv.variance.std_error);
  const double gap = std::abs(bv.bias2.mean + bv.variance.mean - avg.mean);
  return {gap <= 3.0 * se, fmt("bias2+variance=%.5g redraw mean=%.5g, gap %.2f combined SE",
                               bv.bias2.mean + bv.variance.mean, avg.mean, gap / se)};
}

Verdict determinism() {
  auto cfg = SweepConfig::load(std::string(KRRLAB_PRESET_DIR) + "/sweep-b.json");
  cfg.trials = 4;
  cfg.d_list = {20, 40, 60};
  SweepOptions one, many;
  one.workers = 1;
  many.workers = 4;
  one.apply_env_seed = many.apply_env_seed = false;
  const auto a = run_sweep(cfg, one).to_json().dump(2);
  const auto b = run_sweep(cfg, one).to_json().dump(2);
  const auto c = run_sweep(cfg, many).to_json().dump(2);
  return {a == b && a == c, fmt("%g-byte results JSON identical across 3 runs (1 and 4 workers)", static_cast<double>(a.size()))};
}

}  // namespace

int main() {
  criterion(1, "rate-point reproduction", 0.001, rate_points);
  criterion(2, "rate curves", 1.0, rate_curves);
  criterion(3, "preset (a) slope", 15 * 60.0, slope_a);
  criterion(4, "preset (b) slope", 15 * 60.0, slope_b);
  criterion(5, "spectral oracle equivalence", 5.0, spectral_oracle);
  criterion(6, "staircase property", 5.0, staircase);
  criterion(7, "Mercer reconstruction", 5.0, mercer);
  criterion(8, "solver oracle", 5.0, solver_oracle);
  criterion(9, "bias-variance additivity", 30.0, bias_variance_additivity);
  criterion(10, "determinism", 0.0, determinism);
  std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
