#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ddestab/model.hpp"
#include "ddestab/transform.hpp"

namespace ddestab {

enum class Status { Satisfied, Violated, Inconclusive };

enum class Conclusion {
  NoConclusion,
  SolutionsBounded,
  FundamentalPositive,
  NotAsymptoticallyStable,
  AsymptoticallyStable,
  ExponentiallyStable,
};

const char* to_string(Status s);
const char* to_string(Conclusion c);

// One named number backing a verdict, always tagged with the window it was
// computed on; `at` is the witness time of an extremum when there is one.
struct Evidence {
  std::string name;
  double value = 0;
  double window_lo = 0;
  double window_hi = 0;
  std::optional<double> at;
  std::string note;
};

struct HypothesisCheck {
  std::string name;
  bool passed = false;
  std::string detail;
  bool finite_horizon_proxy = false;  // decided by a surrogate, not the limit
};

struct Verdict {
  std::string id;
  Status status = Status::Inconclusive;
  Conclusion conclusion = Conclusion::NoConclusion;
  std::vector<Evidence> evidence;
  std::vector<HypothesisCheck> hypotheses;
  std::string summary;

  bool hypotheses_ok() const;
  const Evidence* find(const std::string& name) const;
};

struct CheckParams {
  double horizon = 1000;
  GridSpec grid;
  double margin = 1e-6;                // strict-inequality buffer
  std::optional<double> window_R;      // window length for density liminf tests
  std::vector<int> index_set;          // 1-based dominant-part selection
  bool assume_divergent = false;       // user asserts the density integral diverges
  bool assume_nonvanishing = false;    // user asserts the density liminf is positive
};

// Fundamental-function positivity via the 1/e bound on the integral of the
// combined coefficient over each delay window (non-strict threshold).
Verdict check_positivity_integral(const DelayEquation& eq, const CheckParams& p);

// Positivity via a scalar inequality on coefficient bounds A_k and lag
// bounds sigma_k: exists lambda with lambda >= sum A_k exp(lambda sigma_k).
Verdict check_positivity_char(const DelayEquation& eq, const CheckParams& p);

// Shifted 1/e test: with positive density liminf and bounded delays, the
// weighted integral from each delay to the point r(t) where the remaining
// integral to t equals 1/e must stay below 1.
Verdict check_one_over_e_shift(const DelayEquation& eq, const CheckParams& p);

// The 1+1/e workhorse, weighted form: limsup of
//   sum_k a_k(t)/sum_i a_i(t) * int_{h_k(t)}^{t} sum_i a_i < 1 + 1/e,
// with conclusion routing by hypothesis profile (bounded delays, divergent
// density, density nonzero a.e. / strictly increasing cumulative map).
Verdict check_one_plus_one_over_e(const DelayEquation& eq, const CheckParams& p);

// The 1+1/e test with the unweighted min-delay integrand
//   int_{min_k h_k(t)}^{t} sum_i a_i < 1 + 1/e,
// which drops the nonzero-a.e. requirement.
Verdict check_one_plus_one_over_e_min_delay(const DelayEquation& eq, const CheckParams& p);

// Dominant nonnegative part: the terms in the index set I form a
// sub-equation with positive fundamental function and dominate the rest:
// limsup sum_{k not in I}|a_k| / sum_{k in I} a_k < 1 (off the zero set of
// the denominator, which must also null the numerator).
Verdict check_dominant_positive(const DelayEquation& eq, const CheckParams& p);

// Integrable combined coefficient: certified-convergent integral of
// sum |a_k| implies bounded solutions and rules out asymptotic stability;
// evidence includes the bound A and the start time from which the
// fundamental function stays above 1/2.
Verdict check_integrable(const DelayEquation& eq, const CheckParams& p);

// Necessary window-density condition: the associated instantaneous equation
// x' + (sum a_k) x = 0 is exponentially stable iff some window length R has
// liminf_t int_t^{t+R} sum a_k > 0. Failure rules out exponential stability
// of the delay equation (under bounded delays); success concludes only for
// pure instantaneous equations.
Verdict check_ode_necessary(const DelayEquation& eq, const CheckParams& p);

// Integrable perturbation: a certified exponentially stable base plus extra
// terms with bounded lags and certified-convergent integral of sum |b_k|
// keeps exponential stability.
Verdict check_perturbation(const DelayEquation& base, const std::vector<Term>& extra,
                           const CheckParams& p);

struct Report {
  std::vector<Verdict> checks;
  Conclusion combined = Conclusion::NoConclusion;
  std::vector<std::string> provenance;  // ids of checks producing `combined`
  ValidationReport validation;
};

// Runs the catalogue in a fixed order (splitting off integrable-tail terms
// for the perturbation check when both parts are nonempty) and aggregates
// the strongest conclusion.
Report run_all(const DelayEquation& eq, const CheckParams& p);

std::string report_to_json(const Report& r, int indent = 2);

}  // namespace ddestab
