#pragma once

#include <memory>
#include <vector>

#include "ddestab/model.hpp"

namespace ddestab {

// Cumulative integral P(t) = int_{t_start}^t rho(u) du of a nonnegative
// density, with a monotone inverse. Below t_start the map is extended
// linearly so that composing P^{-1} after P stays the identity there.
class CumulativeDensity {
 public:
  CumulativeDensity() = default;
  static CumulativeDensity build(const PiecewiseFn& density, double t_start, double t_end,
                                 double cell_hint = 0.25);

  bool valid() const { return impl_ != nullptr; }
  double t_start() const;
  double t_end() const;
  double value(double t) const;      // P(t), linear extension below t_start
  double inverse(double s) const;    // P^{-1}(s)
  double density_at(double t, int dir = +1) const;
  bool strictly_increasing() const;  // every cell carries positive mass
  double total() const;              // P(t_end)

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

// The equation rewritten in the time scale s = P(t) where rho = sum_k a_k:
// dy/ds + sum_k b_k(s) y(l_k(s)) = 0 with b_k(s) = a_k(t)/rho(t) at
// t = P^{-1}(s), l_k(s) = P(h_k(t)), so sum_k b_k == 1 and
// s - l_k(s) = int_{h_k(t)}^{t} rho.
struct Rescaling {
  CumulativeDensity map;       // P built from sum_k a_k (plus regularizer)
  DelayEquation scaled;        // equation in the s variable, t_start = 0
  bool regularized = false;    // an exp(-t) density floor was added
  double horizon_s = 0;        // P(t_end)
};

// Builds the rescaling over [eq.t_start, t_end]. Requires every coefficient
// to be nonnegative there and no forcing term. If the combined coefficient
// vanishes on a set of positive measure, set regularize=true to add an
// exp(-t) floor to the density (the scaled equation then carries a matching
// extra term so solutions correspond).
Rescaling build_rescaling(const DelayEquation& eq, double t_end, bool regularize = false,
                          double cell_hint = 0.25);

// Max mismatch over sample points between the solution of the original
// equation and the pulled-back solution of the rescaled one, both from the
// mapped initial data. Validates the rescaling numerically.
double pullback_mismatch(const DelayEquation& eq, const InitialData& init,
                         const Rescaling& rs, double t_end, int samples = 16);

}  // namespace ddestab
