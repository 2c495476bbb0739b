#pragma once

#include <vector>

#include "ddestab/solver.hpp"

namespace ddestab {

enum class DecayClass { Decaying, Bounded, Growing };

const char* to_string(DecayClass c);

// Exponential envelope |x(t)| <= K * exp(-lambda * (t - t_begin)) fitted to
// the tail of a trajectory. lambda is the least-squares slope of log|x| over
// per-bin maxima; K is chosen so the envelope touches the data from above
// on the whole computed range.
struct DecayFit {
  bool decaying = false;
  double lambda = 0;
  double K = 0;
  double log_K = 0;       // ln K, safe when K itself would overflow
  double r2 = 0;          // least-squares fit quality in [0, 1]
  double tail_ratio = 0;  // max |x| on the last fifth of the window / window max
  double window_lo = 0;
  double window_hi = 0;
};

DecayFit fit_exponential(const Trajectory& traj, double lo, double hi);

// Pooled fit over fundamental slices: envelope knots (elapsed time t - s,
// log of the per-bin max of |X|) from every slice feed one regression, and K
// is lifted so the envelope bounds every computed sample from above.
DecayFit fit_exponential(const std::vector<FundamentalSlice>& slices);

// Tail magnitude on [0.8*horizon, horizon] against the initial scale:
// below 1/100 of it => Decaying, above 10x => Growing, else Bounded.
DecayClass classify(const Trajectory& traj, double horizon);
DecayClass classify_ensemble(const std::vector<Trajectory>& trajs, double horizon);

// Runs the ensemble and classifies; a numeric overflow during integration
// counts as Growing instead of an error.
struct EnsembleOutcome {
  DecayClass combined = DecayClass::Bounded;
  std::vector<DecayClass> per_run;
  double worst_residual = 0;
};
EnsembleOutcome classify_runs(const DelayEquation& eq, const std::vector<InitialData>& inits,
                              double T, const StepControl& ctrl = {});

}  // namespace ddestab
