#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include "ddestab/model.hpp"

namespace ddestab {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The solution magnitude left the representable range (severe growth).
struct OverflowError : SolverError {
  using SolverError::SolverError;
};

struct StepControl {
  double max_step = 1e-2;
  double res_tol = 1e-8;   // defect bound per step, scaled by 1 + |x|
  double min_step = 1e-12;
  bool adaptive = true;    // halve on residual violations, regrow when slack
};

// One accepted node with one-sided derivatives (they differ at kinks).
struct Knot {
  double t = 0;
  double x = 0;
  double dl = 0;  // derivative entering the node (left limit)
  double dr = 0;  // derivative leaving the node (right limit)
};

// Dense solution: cubic Hermite between knots, initial data below t0.
struct Trajectory {
  InitialData init;
  std::vector<Knot> knots;
  double max_residual = 0;

  double t_begin() const { return knots.front().t; }
  double t_end() const { return knots.back().t; }
  double eval(double u) const;
  double derivative(double u) const;
  double tail_max_abs(double from) const;
  void write_csv(std::ostream& os) const;
};

// Integrates x'(t) + sum_k a_k(t) x(h_k(t)) = f(t) from init.t0 to T.
// Steps never straddle breakpoints of the coefficients, delays, or forcing,
// nor the times where a delayed argument crosses a kink of the solution
// (propagated to depth 4). Delayed arguments inside the current step use a
// predictor with one corrector pass. Throws SolverError on step underflow.
Trajectory solve(const DelayEquation& eq, const InitialData& init, double T,
                 const StepControl& ctrl = {});

// Solution with x(t) = 0 for t < s and x(s) = 1.
struct FundamentalSlice {
  double s = 0;
  Trajectory traj;
};
FundamentalSlice fundamental(const DelayEquation& eq, double s, double T,
                             const StepControl& ctrl = {});

// Max over sample times of |direct solution - variation-of-constants form|,
// where the latter is X(t,t0)*x0 - int X(t,s)*sum_k a_k(s)*phi(h_k(s)) ds
// + int X(t,s)*f(s) ds with phi extended by zero at and above t0.
double representation_residual(const DelayEquation& eq, const InitialData& init, double T,
                               const StepControl& ctrl = {});

std::vector<Trajectory> solve_ensemble(const DelayEquation& eq,
                                       const std::vector<InitialData>& inits, double T,
                                       const StepControl& ctrl = {});

// Deterministic bounded random histories for ensemble runs.
std::vector<InitialData> random_histories(int count, unsigned long long seed, double t0,
                                          double floor);

}  // namespace ddestab
