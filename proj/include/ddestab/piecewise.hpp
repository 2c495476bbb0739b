#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ddestab/expr.hpp"

namespace ddestab {

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SupResult {
  double value = 0;
  double at = 0;
  bool unbounded = false;
};

struct ExtremumEstimate {
  double value = 0;
  double at = 0;
  double window_lo = 0;
  double window_hi = 0;
};

// A piecewise-analytic function of time, backed either by an expression tree
// or by an arbitrary callable with a precomputed breakpoint list. Immutable
// after construction; safe to share across threads.
class PiecewiseFn {
 public:
  PiecewiseFn() = default;

  static PiecewiseFn from_expr(ExprPtr e, double domain_start);
  static PiecewiseFn from_callable(std::function<double(double, int)> fn,
                                   std::vector<double> breakpoints, double domain_start);

  bool valid() const { return impl_ != nullptr; }
  double domain_start() const;

  // dir >= 0 evaluates the right limit at discontinuities, dir < 0 the left.
  double eval(double t, int dir = +1) const;
  double operator()(double t) const { return eval(t); }

  // Sorted, deduplicated discontinuities/kinks within [a, b]. Lazily cached
  // for expression-backed functions; widening the window extends the cache,
  // so the list over a window always contains the list over a sub-window.
  std::vector<double> breakpoints(double a, double b) const;

  // Splits [a, b] at breakpoints, uses exact antiderivatives on pieces that
  // have them and adaptive Simpson elsewhere. Throws IntegrationError when a
  // sample is non-finite (non-integrable singularity), DomainError below the
  // domain start.
  double integrate(double a, double b, double tol = 1e-10) const;

  bool closed_form() const;
  const ExprPtr& expression() const;  // null for callable-backed functions

  // Supremum of |f| over [a, b]: exact on monotone pieces (endpoints are
  // sampled with one-sided limits), grid + local refinement otherwise.
  SupResult sup_abs(double a, double b) const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// Finite-horizon limsup/liminf surrogate: extremum of g over the grid
// {lo + k*step} refined by one dyadic probe pass around the arg-extremum.
ExtremumEstimate estimate_supremum(const std::function<double(double)>& g, double lo,
                                   double hi, double step);
ExtremumEstimate estimate_infimum(const std::function<double(double)>& g, double lo,
                                  double hi, double step);

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol);

// Sorts and merges near-duplicates in place.
void sort_unique(std::vector<double>& xs, double tol_scale = 1e-10);

}  // namespace ddestab
