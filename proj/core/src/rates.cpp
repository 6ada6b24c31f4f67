#include "krrlab/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "krrlab/format.hpp"

namespace krrlab {

namespace {

// Tolerance for deciding interval membership at seams.
constexpr double kSeamTol = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate(const RegimeQuery& q) {
  if (!(q.gamma > 0.0) || !std::isfinite(q.gamma)) throw std::invalid_argument("gamma must be positive");
  if (!(q.s > 0.0) || !std::isfinite(q.s)) throw std::invalid_argument("s must be positive");
}

// p such that gamma lies in (p*period, (p+1)*period].
int period_index(double gamma, double period) {
  const int p = static_cast<int>(std::ceil(gamma / period - kSeamTol)) - 1;
  return std::max(p, 0);
}

RateResult finish(RateResult r, double gamma) {
  r.n_exponent = r.d_exponent / gamma;
  return r;
}

}  // namespace

const char* to_string(RateCase c) {
  switch (c) {
    case RateCase::I: return "I";
    case RateCase::II: return "II";
    case RateCase::III: return "III";
    case RateCase::MinimaxI: return "MinimaxI";
    case RateCase::MinimaxII: return "MinimaxII";
    case RateCase::NotCovered: return "NotCovered";
  }
  return "?";
}

const char* to_string(LogFactor f) {
  switch (f) {
    case LogFactor::None: return "none";
    case LogFactor::Ln2n: return "ln2n";
    case LogFactor::EpsSlack: return "eps_slack";
  }
  return "?";
}

RateResult exact_rate(const RegimeQuery& q) {
  validate(q);
  const double g = q.gamma;
  const double s = q.s;
  RateResult r;

  if (s < 1.0) {
    r.s_tilde = s;
    if (s <= 0.5 && g <= 3.0 * s / (2.0 * (s + 1.0)) + kSeamTol) {
      r.case_id = RateCase::NotCovered;
      r.lambda_exponent = r.d_exponent = r.n_exponent = kNaN;
      return r;
    }
    const int p = period_index(g, 1.0 + s);
    const double pd = p;
    r.p = p;
    if (g - pd * (1.0 + s) <= s + kSeamTol) {
      r.case_id = RateCase::I;
      r.lambda_exponent = p == 0 ? g / 2.0 : (g + pd - pd * s) / 2.0;
      r.d_exponent = -g + pd;
      r.log_factor = p == 0 ? LogFactor::Ln2n : LogFactor::None;
    } else {
      r.case_id = RateCase::III;
      r.lambda_exponent = (2.0 * pd + s) / 2.0;
      r.d_exponent = -(pd + 1.0) * s;
    }
    return finish(r, g);
  }

  const double st = std::min(s, 2.0);
  r.s_tilde = st;
  const int p = period_index(g, 1.0 + st);
  const double pd = p;
  r.p = p;
  const double offset = g - pd * (1.0 + st);
  if (offset <= 1.0 + kSeamTol) {
    r.case_id = RateCase::I;
    r.lambda_exponent = p == 0 ? g / 2.0 : (g + pd - pd * st) / 2.0;
    r.d_exponent = -g + pd;
    r.log_factor = p == 0 ? LogFactor::Ln2n : LogFactor::None;
  } else if (offset <= 2.0 * st - 1.0 + kSeamTol) {
    r.case_id = RateCase::II;
    r.lambda_exponent = (g + 3.0 * pd - pd * st + 1.0) / 4.0;
    r.d_exponent = -(g - pd + pd * st + 1.0) / 2.0;
  } else {
    r.case_id = RateCase::III;
    r.lambda_exponent = (g + (pd + 1.0) * (1.0 - st)) / 2.0;
    r.d_exponent = -(pd + 1.0) * st;
  }
  return finish(r, g);
}

RateResult minimax_rate(const RegimeQuery& q) {
  validate(q);
  const double g = q.gamma;
  const double s = q.s;
  RateResult r;
  r.s_tilde = s;
  r.lambda_exponent = kNaN;
  const int p = period_index(g, 1.0 + s);
  const double pd = p;
  r.p = p;
  if (g - pd * (1.0 + s) <= s + kSeamTol) {
    r.case_id = RateCase::MinimaxI;
    r.d_exponent = -g + pd;
    r.log_factor = LogFactor::EpsSlack;
  } else {
    r.case_id = RateCase::MinimaxII;
    r.d_exponent = -(pd + 1.0) * s;
  }
  return finish(r, g);
}

std::vector<double> gamma_grid(double gamma_min, double gamma_max, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  if (!(gamma_min > 0.0)) throw std::invalid_argument("gamma_min must be positive");
  if (!(gamma_max >= gamma_min)) throw std::invalid_argument("gamma_max must be >= gamma_min");
  std::vector<double> grid;
  const auto count = static_cast<long long>(std::floor((gamma_max - gamma_min) / step + 1e-9));
  grid.reserve(static_cast<std::size_t>(count) + 1);
  for (long long i = 0; i <= count; ++i) {
    grid.push_back(std::round((gamma_min + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return grid;
}

RateCurve rate_curve(double s, const std::vector<double>& grid, CurveSelection which, CurveAxis axis) {
  if (grid.empty()) throw std::invalid_argument("gamma grid must not be empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw std::invalid_argument("gamma grid must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw std::invalid_argument("gamma grid must be strictly increasing");
  }
  RateCurve curve;
  curve.s = s;
  curve.which = which;
  curve.axis = axis;
  curve.rows.reserve(grid.size());
  for (double g : grid) {
    RateCurveRow row;
    row.gamma = g;
    const RegimeQuery q{g, s, 1.0};
    if (which != CurveSelection::Minimax) row.exact = exact_rate(q);
    if (which != CurveSelection::Exact) row.minimax = minimax_rate(q);
    curve.rows.push_back(row);
  }
  return curve;
}

namespace {

std::vector<double> series(const RateCurve& c, std::optional<RateResult> RateCurveRow::*member) {
  std::vector<double> out;
  out.reserve(c.rows.size());
  for (const auto& row : c.rows) {
    const auto& r = row.*member;
    if (!r || !r->covered()) {
      out.push_back(kNaN);
    } else {
      out.push_back(c.axis == CurveAxis::D ? r->d_exponent : r->n_exponent);
    }
  }
  return out;
}

}  // namespace

std::vector<double> RateCurve::exact_series() const { return series(*this, &RateCurveRow::exact); }

std::vector<double> RateCurve::minimax_series() const { return series(*this, &RateCurveRow::minimax); }

std::string RateCurve::to_csv() const {
  std::string out =
      "gamma,exact_d_exp,exact_n_exp,exact_case,exact_p,lambda_exp,log_flag,minimax_d_exp,minimax_n_exp,"
      "minimax_case\n";
  for (const auto& row : rows) {
    out += format_double(row.gamma);
    if (row.exact && row.exact->covered()) {
      const auto& e = *row.exact;
      out += ',' + format_double(e.d_exponent) + ',' + format_double(e.n_exponent) + ',' + to_string(e.case_id) + ',' +
             std::to_string(e.p) + ',' + format_double(e.lambda_exponent) + ',' + to_string(e.log_factor);
    } else if (row.exact) {
      out += ",,," + std::string(to_string(row.exact->case_id)) + ",,,";
    } else {
      out += ",,,,,,";
    }
    if (row.minimax) {
      const auto& m = *row.minimax;
      out += ',' + format_double(m.d_exponent) + ',' + format_double(m.n_exponent) + ',' + to_string(m.case_id);
    } else {
      out += ",,,";
    }
    out += '\n';
  }
  return out;
}

}  // namespace krrlab
