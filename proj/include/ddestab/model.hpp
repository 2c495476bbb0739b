#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "ddestab/piecewise.hpp"

namespace ddestab {

// One term a_k(t) * x(h_k(t)) of a scalar linear delay equation
//   x'(t) + sum_k a_k(t) x(h_k(t)) = f(t),  t >= t_start.
struct Term {
  PiecewiseFn coefficient;  // a_k
  PiecewiseFn delay;        // h_k, with h_k(t) <= t
};

struct DelayEquation {
  std::vector<Term> terms;
  double t_start = 0;
  std::optional<PiecewiseFn> forcing;
};

// Initial state: x(t) = phi(t) for t < t0 (constant extension below `floor`),
// x(t0) = x0. phi and x0 need not agree in the limit.
struct InitialData {
  PiecewiseFn phi;
  double floor = 0;
  double x0 = 1;
  double t0 = 0;

  double history(double u) const;   // value for u < t0
  double initial_scale() const;     // max(|x0|, sup |phi|)
};

InitialData zero_history(double t0);                               // phi == 0, x0 = 1
InitialData constant_history(double value, double x0, double t0);

struct GridSpec {
  double step = 1e-3;
  double tail_fraction = 0.2;  // tail window [max(t_start, 0.2*H), H]
  double window_lo(double t_start, double horizon) const {
    return std::max(t_start, tail_fraction * horizon);
  }
};

struct ValidationItem {
  std::string assumption;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool all_passed() const {
    return std::all_of(items.begin(), items.end(),
                       [](const ValidationItem& i) { return i.passed; });
  }
};

// Checks, over [t_start, horizon]: coefficients essentially bounded, delays
// lagging (h_k(t) <= t) with unbounded growth, and — when initial data is
// given — a bounded history function. Each item carries a numeric witness.
ValidationReport validate_equation(const DelayEquation& eq, double horizon,
                                   const GridSpec& grid = {},
                                   const InitialData* init = nullptr);

struct SignPattern {
  std::vector<bool> nonnegative;  // per term, sampled over the horizon
  std::vector<int> index_set;     // 0-based indices of nonnegative terms
  bool all_nonnegative = false;
};

// Sign tolerance: values above -1e-14 count as nonnegative.
SignPattern classify_signs(const DelayEquation& eq, double horizon,
                           const GridSpec& grid = {});

struct LoadedProblem {
  DelayEquation equation;
  std::optional<InitialData> history;
  ParamTable params;
};

// JSON schema:
//   { "t_start": number,
//     "params":  { name: number, ... }        (optional)
//     "terms":   [ { "coef": expr, "delay": expr }, ... ],
//     "forcing": expr,                        (optional)
//     "history": { "phi": expr, "x0": number, "t0": number,
//                  "floor": number (optional) } }
// `overrides` replace file-level parameter values before expressions parse.
LoadedProblem load_problem_json(const std::string& text, const ParamTable& overrides = {});
LoadedProblem load_problem_file(const std::string& path, const ParamTable& overrides = {});

}  // namespace ddestab
