#include "ddestab/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ddestab {

const char* to_string(DecayClass c) {
  switch (c) {
    case DecayClass::Decaying: return "Decaying";
    case DecayClass::Bounded: return "Bounded";
    case DecayClass::Growing: return "Growing";
  }
  return "Bounded";
}

namespace {

// One (origin-shifted) trajectory feeding the envelope regression: elapsed
// times d = t - origin against per-bin maxima of |x|.
struct EnvelopeBatch {
  const Trajectory* traj = nullptr;
  double origin = 0;
  double lo = 0, hi = 0;
};

DecayFit fit_envelope(const std::vector<EnvelopeBatch>& batches) {
  DecayFit fit;
  constexpr int kBins = 16;
  std::vector<double> xs, ys;  // pooled (elapsed, log bin-max)
  double window_max = 0, tail_ratio = 0;
  double d_hi = 0;
  bool any = false;
  for (const EnvelopeBatch& b : batches) {
    if (!b.traj || !(b.hi > b.lo) || b.traj->knots.size() < 2) continue;
    const double width = (b.hi - b.lo) / kBins;
    double bin_max[kBins] = {};
    double bin_d[kBins] = {};
    const double tail_start = b.hi - 0.2 * (b.hi - b.lo);
    double bmax = 0, btail = 0;
    for (const Knot& k : b.traj->knots) {
      if (k.t < b.lo || k.t > b.hi) continue;
      double a = std::fabs(k.x);
      int bin = std::min(kBins - 1, static_cast<int>((k.t - b.lo) / width));
      if (a > bin_max[bin]) {
        bin_max[bin] = a;
        bin_d[bin] = k.t - b.origin;
      }
      bmax = std::max(bmax, a);
      if (k.t >= tail_start) btail = std::max(btail, a);
    }
    any = true;
    window_max = std::max(window_max, bmax);
    if (bmax > 0) tail_ratio = std::max(tail_ratio, btail / bmax);
    d_hi = std::max(d_hi, b.hi - b.origin);
    for (int bin = 0; bin < kBins; ++bin) {
      if (bin_max[bin] <= 0) continue;
      xs.push_back(bin_d[bin]);
      ys.push_back(std::log(bin_max[bin]));
    }
  }
  fit.window_hi = d_hi;
  if (!any) return fit;
  if (window_max == 0) {  // identically zero on the window
    fit.decaying = true;
    fit.r2 = 1;
    return fit;
  }
  fit.tail_ratio = tail_ratio;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(xs.size());
  for (int i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double slope = 0, intercept = n > 0 ? sy / n : 0;
  if (n >= 2) {
    double denom = n * sxx - sx * sx;
    if (denom > 0) {
      slope = (n * sxy - sx * sy) / denom;
      intercept = (sy - slope * sx) / n;
    }
  }
  fit.lambda = -slope;
  fit.decaying = slope < -1e-12 && fit.tail_ratio < 0.01;

  double ss_tot = 0, ss_res = 0;
  const double ymean = n > 0 ? sy / n : 0;
  for (int i = 0; i < n; ++i) {
    ss_tot += (ys[i] - ymean) * (ys[i] - ymean);
    double resid = ys[i] - (intercept + slope * xs[i]);
    ss_res += resid * resid;
  }
  fit.r2 = ss_tot > 0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;

  // Envelope constant over every computed sample, in logs to dodge overflow
  // when lambda * span is large; never below the regression intercept.
  double log_k = intercept;
  for (const EnvelopeBatch& b : batches) {
    if (!b.traj) continue;
    for (const Knot& k : b.traj->knots) {
      if (k.t > b.hi) break;
      double a = std::fabs(k.x);
      if (a <= 0) continue;
      log_k = std::max(log_k, std::log(a) + fit.lambda * (k.t - b.origin));
    }
  }
  fit.log_K = log_k;
  fit.K = std::exp(std::min(log_k, 700.0));
  return fit;
}

}  // namespace

DecayFit fit_exponential(const Trajectory& traj, double lo, double hi) {
  EnvelopeBatch b;
  b.traj = &traj;
  b.origin = traj.t_begin();
  b.lo = std::max(lo, traj.t_begin());
  b.hi = std::min(hi, traj.t_end());
  DecayFit fit = fit_envelope({b});
  fit.window_lo = b.lo;
  fit.window_hi = b.hi;
  return fit;
}

DecayFit fit_exponential(const std::vector<FundamentalSlice>& slices) {
  std::vector<EnvelopeBatch> batches;
  batches.reserve(slices.size());
  for (const FundamentalSlice& s : slices) {
    EnvelopeBatch b;
    b.traj = &s.traj;
    b.origin = s.s;
    b.lo = s.traj.t_begin();
    b.hi = s.traj.t_end();
    batches.push_back(b);
  }
  DecayFit fit = fit_envelope(batches);
  fit.window_lo = 0;  // window in elapsed time t - s
  return fit;
}

DecayClass classify(const Trajectory& traj, double horizon) {
  double lo = std::max(traj.t_begin(), 0.8 * horizon);
  double scale = std::max(traj.init.initial_scale(), 1e-300);
  double tail = traj.tail_max_abs(lo);
  if (tail <= 0.01 * scale) return DecayClass::Decaying;
  if (tail >= 10.0 * scale) return DecayClass::Growing;
  return DecayClass::Bounded;
}

DecayClass classify_ensemble(const std::vector<Trajectory>& trajs, double horizon) {
  bool all_decay = !trajs.empty();
  for (const Trajectory& tr : trajs) {
    DecayClass c = classify(tr, horizon);
    if (c == DecayClass::Growing) return DecayClass::Growing;
    if (c != DecayClass::Decaying) all_decay = false;
  }
  return all_decay ? DecayClass::Decaying : DecayClass::Bounded;
}

EnsembleOutcome classify_runs(const DelayEquation& eq, const std::vector<InitialData>& inits,
                              double T, const StepControl& ctrl) {
  EnsembleOutcome out;
  bool all_decay = !inits.empty();
  bool any_growing = false;
  for (const InitialData& d : inits) {
    DecayClass c;
    try {
      Trajectory tr = solve(eq, d, T, ctrl);
      out.worst_residual = std::max(out.worst_residual, tr.max_residual);
      c = classify(tr, T);
    } catch (const OverflowError&) {
      c = DecayClass::Growing;
    }
    out.per_run.push_back(c);
    if (c == DecayClass::Growing) any_growing = true;
    if (c != DecayClass::Decaying) all_decay = false;
  }
  out.combined = any_growing   ? DecayClass::Growing
                 : all_decay   ? DecayClass::Decaying
                               : DecayClass::Bounded;
  return out;
}

}  // namespace ddestab
