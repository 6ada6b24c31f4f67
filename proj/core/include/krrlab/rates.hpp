#pragma once

#include <optional>
#include <string>
#include <vector>

namespace krrlab {

/// n ~ c d^gamma with source condition s.
struct RegimeQuery {
  double gamma = 1.0;
  double s = 1.0;
  double log_d_n_constant = 1.0;  ///< the c in n = c d^gamma; does not enter exponents
};

enum class RateCase { I, II, III, MinimaxI, MinimaxII, NotCovered };
enum class LogFactor { None, Ln2n, EpsSlack };

const char* to_string(RateCase c);
const char* to_string(LogFactor f);

/// One point of the piecewise rate theory. Exponents are of d (and of n,
/// equal to d_exponent / gamma). NotCovered results carry NaN exponents.
struct RateResult {
  int p = 0;
  RateCase case_id = RateCase::NotCovered;
  double lambda_exponent = 0.0;  ///< lambda = d^{-l}; NaN for minimax results
  double d_exponent = 0.0;
  double n_exponent = 0.0;
  LogFactor log_factor = LogFactor::None;
  double s_tilde = 0.0;

  bool covered() const noexcept { return case_id != RateCase::NotCovered; }
};

/// Exact generalization-error rate of KRR with the optimally scheduled lambda.
/// Intervals are left-open and right-closed; s >= 1 clamps s~ = min(s, 2),
/// s < 1 uses s itself. For s <= 1/2 and gamma <= 3s/(2(s+1)) the regime is
/// NotCovered. Throws std::invalid_argument unless gamma > 0 and s > 0.
RateResult exact_rate(const RegimeQuery& q);

/// Minimax lower-bound rate. Case I carries the EpsSlack flag.
RateResult minimax_rate(const RegimeQuery& q);

enum class CurveSelection { Exact, Minimax, Both };
enum class CurveAxis { D, N };

struct RateCurveRow {
  double gamma = 0.0;
  std::optional<RateResult> exact;
  std::optional<RateResult> minimax;
};

struct RateCurve {
  double s = 1.0;
  CurveSelection which = CurveSelection::Both;
  CurveAxis axis = CurveAxis::D;
  std::vector<RateCurveRow> rows;

  /// Exponent series along `axis`; NaN where a point is missing or not covered.
  std::vector<double> exact_series() const;
  std::vector<double> minimax_series() const;

  /// CSV: gamma, exact_d_exp, exact_n_exp, exact_case, exact_p, lambda_exp,
  /// log_flag, minimax_d_exp, minimax_n_exp, minimax_case. Unselected or
  /// uncovered entries are left empty. Floats use 17 significant digits.
  std::string to_csv() const;
};

/// Throws std::invalid_argument unless the grid is strictly increasing and positive.
RateCurve rate_curve(double s, const std::vector<double>& gamma_grid, CurveSelection which, CurveAxis axis);

/// gamma_min, gamma_min + step, ... <= gamma_max, each point computed as
/// gamma_min + i*step and rounded to 12 decimals so seams land on grid points.
std::vector<double> gamma_grid(double gamma_min, double gamma_max, double step);

}  // namespace krrlab
