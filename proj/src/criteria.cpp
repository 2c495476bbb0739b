#include "ddestab/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "ddestab/solver.hpp"

namespace ddestab {

namespace {

constexpr double kInvE = 0.36787944117144233;
constexpr double kOnePlusInvE = 1.0 + kInvE;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Evidence mk_ev(std::string name, double value, double lo, double hi,
               std::optional<double> at = std::nullopt, std::string note = {}) {
  Evidence e;
  e.name = std::move(name);
  e.value = value;
  e.window_lo = lo;
  e.window_hi = hi;
  e.at = at;
  e.note = std::move(note);
  return e;
}

// Shared per-check working state: window bounds, sign classification, and the
// cumulative integral P of the combined coefficient (built only when every
// coefficient is nonnegative, since P must be monotone).
struct Ctx {
  Ctx(const DelayEquation& e, const CheckParams& pp) : eq(e), p(pp) {}

  const DelayEquation& eq;
  const CheckParams& p;
  double t0 = 0;
  double H = 0;
  double wlo = 0;
  SignPattern signs;
  bool nonneg = false;
  CumulativeDensity P;

  double scan_step(double lo, double hi) const {
    double s = std::max(p.grid.step, (hi - lo) / 200000.0);
    return std::max(s, 1e-12);
  }
  double sum_coef(double t) const {
    double s = 0;
    for (const Term& tm : eq.terms) s += tm.coefficient.eval(t);
    return s;
  }
  // Cumulative integral clamped to the built range, with the lower limit
  // never reaching below the equation start.
  double Pt(double u) const { return P.value(std::min(std::max(u, t0), H)); }
};

PiecewiseFn sum_density(const std::vector<Term>& terms, double t0, double hi, bool absolute) {
  std::vector<PiecewiseFn> coefs;
  coefs.reserve(terms.size());
  std::vector<double> bps;
  for (const Term& tm : terms) {
    coefs.push_back(tm.coefficient);
    auto b = tm.coefficient.breakpoints(t0, hi);
    bps.insert(bps.end(), b.begin(), b.end());
  }
  sort_unique(bps);
  auto fn = [coefs, absolute](double t, int dir) {
    double s = 0;
    for (const PiecewiseFn& c : coefs) {
      double v = c.eval(t, dir);
      s += absolute ? std::abs(v) : v;
    }
    return s;
  };
  return PiecewiseFn::from_callable(fn, std::move(bps), t0);
}

Ctx make_ctx(const DelayEquation& eq, const CheckParams& p, bool build_map) {
  Ctx c(eq, p);
  c.t0 = eq.t_start;
  c.H = std::max(p.horizon, c.t0 + 1.0);
  c.wlo = p.grid.window_lo(c.t0, c.H);
  GridSpec coarse = p.grid;
  coarse.step = c.scan_step(c.t0, c.H);
  c.signs = classify_signs(eq, c.H, coarse);
  c.nonneg = c.signs.all_nonnegative;
  if (build_map && c.nonneg && !eq.terms.empty()) {
    try {
      c.P = CumulativeDensity::build(sum_density(eq.terms, c.t0, c.H, false), c.t0, c.H);
    } catch (const std::exception&) {
      c.nonneg = false;  // a cell integrated negative: retract the sign call
    }
  }
  return c;
}

HypothesisCheck hyp_nonneg(const Ctx& c) {
  HypothesisCheck h;
  h.name = "coefficients-nonnegative";
  h.passed = c.nonneg;
  if (c.nonneg) {
    h.detail = "every coefficient sampled nonnegative on [" + fmt(c.t0) + ", " + fmt(c.H) + "]";
  } else {
    std::string bad;
    for (std::size_t k = 0; k < c.signs.nonnegative.size(); ++k)
      if (!c.signs.nonnegative[k]) bad += (bad.empty() ? "" : ", ") + std::to_string(k + 1);
    h.detail = bad.empty() ? "no terms" : "terms {" + bad + "} take negative values";
  }
  return h;
}

// Positive-liminf surrogate for a pointwise density g: the grid minimum over
// the tail window must clear the margin and must not still be sliding
// downward between the two window halves.
HypothesisCheck liminf_positive_hyp(const std::string& name,
                                    const std::function<double(double)>& g, const Ctx& c,
                                    bool asserted) {
  HypothesisCheck h;
  h.name = name;
  h.finite_horizon_proxy = true;
  if (asserted) {
    h.passed = true;
    h.detail = "asserted by flag";
    return h;
  }
  double mid = 0.5 * (c.wlo + c.H);
  auto early = estimate_infimum(g, c.wlo, mid, c.scan_step(c.wlo, mid));
  auto late = estimate_infimum(g, mid, c.H, c.scan_step(mid, c.H));
  bool positive = late.value > c.p.margin;
  bool settled = late.value >= 0.9 * early.value - c.p.margin;
  h.passed = positive && settled;
  h.detail = "window minimum " + fmt(std::min(early.value, late.value)) + " (early half " +
             fmt(early.value) + ", late half " + fmt(late.value) + ")";
  if (positive && !settled) h.detail += "; still decreasing across the window";
  return h;
}

// Bounded-limsup surrogate: the supremum over the late half of the window
// must not exceed the early half by more than 10%.
struct BoundedSup {
  bool bounded = false;
  double sup = 0;
  double at = 0;
};

BoundedSup bounded_sup(const std::function<double(double)>& g, double lo, double hi,
                       const Ctx& c) {
  double mid = 0.5 * (lo + hi);
  auto early = estimate_supremum(g, lo, mid, c.scan_step(lo, mid));
  auto late = estimate_supremum(g, mid, hi, c.scan_step(mid, hi));
  BoundedSup r;
  r.bounded = late.value <= 1.1 * early.value + std::max(c.p.margin, 1e-9);
  if (late.value >= early.value) {
    r.sup = late.value;
    r.at = late.at;
  } else {
    r.sup = early.value;
    r.at = early.at;
  }
  return r;
}

HypothesisCheck hyp_delays_bounded(const Ctx& c, std::vector<Evidence>* ev = nullptr) {
  HypothesisCheck h;
  h.name = "delays-bounded";
  h.finite_horizon_proxy = true;
  h.passed = true;
  for (std::size_t k = 0; k < c.eq.terms.size(); ++k) {
    const PiecewiseFn& delay = c.eq.terms[k].delay;
    auto lag = [&delay](double t) { return t - delay.eval(t); };
    BoundedSup b = bounded_sup(lag, c.t0, c.H, c);
    if (!b.bounded) h.passed = false;
    h.detail += (h.detail.empty() ? "" : "; ") + ("term " + std::to_string(k + 1) +
               " lag sup " + fmt(b.sup) + (b.bounded ? "" : " (growing)"));
    if (ev)
      ev->push_back(mk_ev("lag-sup-term-" + std::to_string(k + 1), b.sup, c.t0, c.H, b.at));
  }
  return h;
}

// Divergence surrogate for the integral of the density behind a cumulative
// map Q over [t0, hi]: either the total keeps growing at least linearly
// (total >= 1.5 x half) or the last quarter-block carries at least 90% of
// the mass of the one before it (catches logarithmic divergence).
HypothesisCheck divergent_hyp(const std::string& name, const CumulativeDensity& Q, double t0,
                              double hi, bool asserted) {
  HypothesisCheck h;
  h.name = name;
  h.finite_horizon_proxy = true;
  if (asserted) {
    h.passed = true;
    h.detail = "asserted by flag";
    return h;
  }
  if (!Q.valid()) {
    h.detail = "cumulative map unavailable";
    return h;
  }
  double q1 = t0 + 0.25 * (hi - t0);
  double q2 = t0 + 0.50 * (hi - t0);
  double total = Q.value(hi);
  double half = Q.value(q2);
  double b1 = half - Q.value(q1);
  double b2 = total - half;
  bool rule_linear = total > 0 && total >= 1.5 * half;
  bool rule_blocks = b1 > 0 && b2 >= 0.9 * b1;
  h.passed = rule_linear || rule_blocks;
  h.detail = "total " + fmt(total) + ", half " + fmt(half) + ", quarter blocks " + fmt(b1) +
             " / " + fmt(b2);
  return h;
}

// Per-term boundedness of int_{h_k(t)}^{t} density, measured through the
// cumulative map; required both for the divergence-route conclusions and as
// the bounded-delay condition expressed in the rescaled clock.
HypothesisCheck per_term_integral_bounded_hyp(const Ctx& c, const CumulativeDensity& Q,
                                              const std::string& name,
                                              std::vector<Evidence>* ev) {
  HypothesisCheck h;
  h.name = name;
  h.finite_horizon_proxy = true;
  h.passed = true;
  auto q_at = [&](double u) {
    return Q.value(std::min(std::max(u, c.t0), c.H));
  };
  for (std::size_t k = 0; k < c.eq.terms.size(); ++k) {
    const PiecewiseFn& delay = c.eq.terms[k].delay;
    auto g = [&](double t) { return q_at(t) - q_at(std::max(delay.eval(t), c.t0)); };
    BoundedSup b = bounded_sup(g, c.wlo, c.H, c);
    if (!b.bounded) h.passed = false;
    h.detail += (h.detail.empty() ? "" : "; ") + ("term " + std::to_string(k + 1) + " sup " +
               fmt(b.sup) + (b.bounded ? "" : " (growing)"));
    if (ev)
      ev->push_back(
          mk_ev("delay-integral-sup-term-" + std::to_string(k + 1), b.sup, c.wlo, c.H, b.at));
  }
  return h;
}

HypothesisCheck hyp_density_ae_positive(const Ctx& c) {
  HypothesisCheck h;
  h.name = "density-nonzero-ae";
  h.finite_horizon_proxy = true;
  if (c.p.assume_nonvanishing) {
    h.passed = true;
    h.detail = "asserted by flag";
    return h;
  }
  h.passed = c.P.valid() && c.P.strictly_increasing();
  h.detail = h.passed ? "every cell of the cumulative map carries positive mass"
                      : "the combined coefficient vanishes on a cell of positive length";
  return h;
}

std::optional<HypothesisCheck> window_liminf_hyp(const Ctx& c, const CumulativeDensity& Q,
                                                 const std::string& name,
                                                 std::vector<Evidence>* ev) {
  if (!c.p.window_R) return std::nullopt;
  double R = *c.p.window_R;
  HypothesisCheck h;
  h.name = name;
  h.finite_horizon_proxy = true;
  if (R <= 0 || c.wlo + R >= c.H || !Q.valid()) {
    h.detail = "window length R = " + fmt(R) + " unusable on [" + fmt(c.wlo) + ", " +
               fmt(c.H) + "]";
    return h;
  }
  auto g = [&](double t) { return Q.value(t + R) - Q.value(t); };
  auto inf = estimate_infimum(g, c.wlo, c.H - R, c.scan_step(c.wlo, c.H - R));
  h.passed = inf.value > c.p.margin;
  h.detail = "liminf of the length-" + fmt(R) + " window integral = " + fmt(inf.value);
  if (ev)
    ev->push_back(mk_ev("window-liminf", inf.value, c.wlo, c.H - R, inf.at,
                        "window length R = " + fmt(R)));
  return h;
}

void finalize(Verdict& v) {
  if (v.status != Status::Satisfied) v.conclusion = Conclusion::NoConclusion;
}

int rank(Conclusion c) {
  switch (c) {
    case Conclusion::ExponentiallyStable: return 5;
    case Conclusion::AsymptoticallyStable: return 4;
    case Conclusion::NotAsymptoticallyStable: return 3;
    case Conclusion::FundamentalPositive: return 2;
    case Conclusion::SolutionsBounded: return 1;
    case Conclusion::NoConclusion: return 0;
  }
  return 0;
}

// Tail-certified convergence of the integral of `density` past `hi0`:
// total over [t0, hi0], then doubling blocks [hi0, 2*hi0], [2*hi0, 4*hi0].
struct TailCertificate {
  bool built = false;
  bool convergent = false;
  double total = 0;      // integral over [t0, 4*hi0] plus extrapolated tail
  double tail1 = 0;      // block [hi0, 2*hi0]
  double ratio = 0;      // second block over first
  CumulativeDensity map;
  double far = 0;        // 4*hi0
};

TailCertificate certify_tail(const PiecewiseFn& density, double t0, double hi0) {
  TailCertificate tc;
  double far = t0 + 4.0 * std::max(hi0 - t0, 1.0);
  tc.far = far;
  try {
    tc.map = CumulativeDensity::build(density, t0, far);
  } catch (const std::exception&) {
    return tc;  // non-integrable sample: not certifiable
  }
  tc.built = true;
  double mid1 = t0 + 1.0 * std::max(hi0 - t0, 1.0);
  double mid2 = t0 + 2.0 * std::max(hi0 - t0, 1.0);
  double at_h = tc.map.value(mid1);
  double at_2h = tc.map.value(mid2);
  double at_4h = tc.map.value(far);
  tc.tail1 = at_2h - at_h;
  double tail2 = at_4h - at_2h;
  tc.ratio = tc.tail1 > 1e-300 ? tail2 / tc.tail1 : 0.0;
  tc.convergent = tc.tail1 < 1e-6 || tc.ratio < 0.9;
  double beyond = 0;
  if (tc.convergent) beyond = (tail2 > 0 && tc.ratio < 1) ? tail2 * tc.ratio / (1 - tc.ratio) : tail2;
  tc.total = at_4h + beyond;
  return tc;
}

std::optional<std::string> exp_certificate(const DelayEquation& eq, const CheckParams& p);

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::Satisfied: return "Satisfied";
    case Status::Violated: return "Violated";
    case Status::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

const char* to_string(Conclusion c) {
  switch (c) {
    case Conclusion::NoConclusion: return "NoConclusion";
    case Conclusion::SolutionsBounded: return "SolutionsBounded";
    case Conclusion::FundamentalPositive: return "FundamentalPositive";
    case Conclusion::NotAsymptoticallyStable: return "NotAsymptoticallyStable";
    case Conclusion::AsymptoticallyStable: return "AsymptoticallyStable";
    case Conclusion::ExponentiallyStable: return "ExponentiallyStable";
  }
  return "NoConclusion";
}

bool Verdict::hypotheses_ok() const {
  return std::all_of(hypotheses.begin(), hypotheses.end(),
                     [](const HypothesisCheck& h) { return h.passed; });
}

const Evidence* Verdict::find(const std::string& name) const {
  for (const Evidence& e : evidence)
    if (e.name == name) return &e;
  return nullptr;
}

Verdict check_positivity_integral(const DelayEquation& eq, const CheckParams& p) {
  Ctx c = make_ctx(eq, p, true);
  Verdict v;
  v.id = "positivity-integral";
  HypothesisCheck hn = hyp_nonneg(c);
  v.hypotheses.push_back(hn);
  if (!hn.passed || !c.P.valid()) {
    v.summary = "sign hypothesis failed: the delay-window integral bound does not apply";
    finalize(v);
    return v;
  }
  auto g = [&](double t) {
    double hmin = t;
    for (const Term& tm : eq.terms) hmin = std::min(hmin, tm.delay.eval(t));
    return c.Pt(t) - c.Pt(std::max(hmin, c.t0));
  };
  auto est = estimate_supremum(g, c.t0, c.H, c.scan_step(c.t0, c.H));
  v.evidence.push_back(mk_ev("sup-delay-window-integral", est.value, c.t0, c.H, est.at));
  v.evidence.push_back(mk_ev("threshold", kInvE, c.t0, c.H, std::nullopt, "non-strict"));
  v.evidence.push_back(mk_ev("margin", kInvE - est.value, c.t0, c.H));
  if (est.value <= kInvE + 1e-12) {
    v.status = Status::Satisfied;
    v.conclusion = Conclusion::FundamentalPositive;
    v.summary = "the combined-coefficient integral over every delay window stays at or below "
                "1/e: the fundamental function is positive";
  } else {
    v.status = Status::Violated;
    v.summary = "the delay-window integral reaches " + fmt(est.value) +
                " > 1/e: positivity is not certified by this bound";
  }
  finalize(v);
  return v;
}

Verdict check_positivity_char(const DelayEquation& eq, const CheckParams& p) {
  Ctx c = make_ctx(eq, p, false);
  Verdict v;
  v.id = "positivity-characteristic";
  HypothesisCheck hn = hyp_nonneg(c);
  v.hypotheses.push_back(hn);
  if (!hn.passed) {
    v.summary = "sign hypothesis failed: the coefficient-bound inequality does not apply";
    finalize(v);
    return v;
  }
  double sum_A = 0, sum_As = 0;
  std::vector<double> A(eq.terms.size()), sig(eq.terms.size());
  HypothesisCheck hb;
  hb.name = "coefficient-bounds-finite";
  hb.passed = true;
  for (std::size_t k = 0; k < eq.terms.size(); ++k) {
    SupResult sa = eq.terms[k].coefficient.sup_abs(c.t0, c.H);
    const PiecewiseFn& delay = eq.terms[k].delay;
    auto lag = [&delay](double t) { return t - delay.eval(t); };
    auto ls = estimate_supremum(lag, c.t0, c.H, c.scan_step(c.t0, c.H));
    A[k] = sa.value;
    sig[k] = std::max(ls.value, 0.0);
    if (sa.unbounded || !std::isfinite(sa.value) || !std::isfinite(sig[k])) hb.passed = false;
    sum_A += A[k];
    sum_As += A[k] * sig[k];
    v.evidence.push_back(
        mk_ev("coef-sup-term-" + std::to_string(k + 1), A[k], c.t0, c.H, sa.at));
    v.evidence.push_back(
        mk_ev("lag-sup-term-" + std::to_string(k + 1), sig[k], c.t0, c.H, ls.at));
  }
  hb.detail = "sum of coefficient sups " + fmt(sum_A);
  v.hypotheses.push_back(hb);
  if (!hb.passed) {
    v.summary = "a coefficient supremum is unbounded on the horizon";
    finalize(v);
    return v;
  }
  double lambda_star = 0, gap = 0;
  if (sum_A <= 0) {
    lambda_star = 1;
    gap = 1;  // zero equation: any positive rate works
  } else if (sum_As <= 0) {
    lambda_star = sum_A;  // purely instantaneous: equality at lambda = sum A_k
    gap = 0;
  } else {
    auto gp = [&](double l) {
      double s = 1;
      for (std::size_t k = 0; k < A.size(); ++k)
        s -= A[k] * sig[k] * std::exp(std::min(l * sig[k], 700.0));
      return s;
    };
    auto gval = [&](double l) {
      double s = l;
      for (std::size_t k = 0; k < A.size(); ++k)
        s -= A[k] * std::exp(std::min(l * sig[k], 700.0));
      return s;
    };
    if (gp(0) <= 0) {
      lambda_star = 0;
      gap = gval(0);
    } else {
      double hi = 1;
      while (gp(hi) > 0 && hi < 1e9) hi *= 2;
      double lo = 0;
      for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (gp(mid) > 0 ? lo : hi) = mid;
      }
      lambda_star = 0.5 * (lo + hi);
      gap = gval(lambda_star);
    }
  }
  v.evidence.push_back(mk_ev("lambda-star", lambda_star, c.t0, c.H));
  v.evidence.push_back(mk_ev("max-gap", gap, c.t0, c.H, std::nullopt,
                             "max over rates of rate - sum_k A_k exp(rate x lag_k)"));
  if (gap >= -1e-12) {
    v.status = Status::Satisfied;
    v.conclusion = Conclusion::FundamentalPositive;
    v.summary = "a rate lambda = " + fmt(lambda_star) +
                " dominates the lag-weighted coefficient bounds: the fundamental function is "
                "positive";
  } else {
    v.status = Status::Violated;
    v.summary = "no rate dominates the lag-weighted coefficient bounds (best gap " + fmt(gap) +
                ")";
  }
  finalize(v);
  return v;
}

Verdict check_one_over_e_shift(const DelayEquation& eq, const CheckParams& p) {
  Ctx c = make_ctx(eq, p, true);
  Verdict v;
  v.id = "one-over-e-shift";
  HypothesisCheck hn = hyp_nonneg(c);
  v.hypotheses.push_back(hn);
  if (!hn.passed || !c.P.valid()) {
    v.summary = "sign hypothesis failed: the shifted 1/e test does not apply";
    finalize(v);
    return v;
  }
  auto sumc = [&](double t) { return c.sum_coef(t); };
  v.hypotheses.push_back(
      liminf_positive_hyp("density-liminf-positive", sumc, c, c.p.assume_nonvanishing));
  v.hypotheses.push_back(hyp_delays_bounded(c, &v.evidence));
  bool hyps_ok = v.hypotheses_ok();
  if (c.P.value(c.wlo) < 2 * kInvE) {
    v.summary = "cumulative coefficient mass before the window is too small to anchor the "
                "shifted lower limit";
    finalize(v);
    return v;
  }
  auto g = [&](double t) {
    double sum = c.sum_coef(t);
    if (sum <= 0) return 0.0;
    double r = c.P.inverse(c.P.value(t) - kInvE);
    double Pr = c.Pt(std::max(r, c.t0));
    double tot = 0;
    for (const Term& tm : eq.terms) {
      double a = tm.coefficient.eval(t);
      if (a == 0) continue;
      double Ph = c.Pt(std::max(tm.delay.eval(t), c.t0));
      tot += (a / sum) * std::abs(Pr - Ph);
    }
    return tot;
  };
  auto est = estimate_supremum(g, c.wlo, c.H, c.scan_step(c.wlo, c.H));
  v.evidence.push_back(mk_ev("weighted-shifted-integral", est.value, c.wlo, c.H, est.at,
                             "integral from each delay to the point where the remaining "
                             "coefficient mass up to t equals 1/e"));
  v.evidence.push_back(mk_ev("threshold", 1.0, c.wlo, c.H, std::nullopt, "strict"));
  v.evidence.push_back(mk_ev("margin", 1.0 - est.value, c.wlo, c.H));
  if (!hyps_ok) {
    v.summary = "hypotheses failed; shifted-integral estimate " + fmt(est.value) +
                " recorded for reference";
    finalize(v);
    return v;
  }
  if (est.value < 1.0 + p.margin) {
    v.status = Status::Satisfied;
    v.conclusion = Conclusion::ExponentiallyStable;
    v.summary = "weighted shifted integral " + fmt(est.value) +
                " < 1 with positive density and bounded lags: exponentially stable";
  } else {
    v.status = Status::Violated;
    v.summary = "weighted shifted integral " + fmt(est.value) + " reaches 1";
  }
  finalize(v);
  return v;
}

Verdict check_one_plus_one_over_e(const DelayEquation& eq, const CheckParams& p) {
  Ctx c = make_ctx(eq, p, true);
  Verdict v;
  v.id = "one-plus-one-over-e-weighted";
  HypothesisCheck hn = hyp_nonneg(c);
  v.hypotheses.push_back(hn);
  if (!hn.passed || !c.P.valid()) {
    v.summary = "sign hypothesis failed: the weighted 1+1/e test does not apply";
    finalize(v);
    return v;
  }
  auto g = [&](double t) {
    double sum = c.sum_coef(t);
    if (sum <= 0) return 0.0;
    double tot = 0;
    double Ptop = c.Pt(t);
    for (const Term& tm : eq.terms) {
      double a = tm.coefficient.eval(t);
      if (a == 0) continue;
      double Ph = c.Pt(std::max(tm.delay.eval(t), c.t0));
      tot += (a / sum) * (Ptop - Ph);
    }
    return tot;
  };
  auto est = estimate_supremum(g, c.wlo, c.H, c.scan_step(c.wlo, c.H));
  v.evidence.push_back(mk_ev("weighted-delay-integral", est.value, c.wlo, c.H, est.at));
  v.evidence.push_back(mk_ev("threshold", kOnePlusInvE, c.wlo, c.H, std::nullopt, "strict"));
  v.evidence.push_back(mk_ev("margin", kOnePlusInvE - est.value, c.wlo, c.H));

  auto sumc = [&](double t) { return c.sum_coef(t); };
  HypothesisCheck h8 =
      liminf_positive_hyp("density-liminf-positive", sumc, c, c.p.assume_nonvanishing);
  HypothesisCheck h9 = hyp_delays_bounded(c, nullptr);
  HypothesisCheck hdiv =
      divergent_hyp("density-integral-divergent", c.P, c.t0, c.H, c.p.assume_divergent);
  HypothesisCheck hpt =
      per_term_integral_bounded_hyp(c, c.P, "per-term-delay-integral-bounded", &v.evidence);
  HypothesisCheck hae = hyp_density_ae_positive(c);
  std::optional<HypothesisCheck> h22 =
      window_liminf_hyp(c, c.P, "window-density-liminf-positive", &v.evidence);

  v.status = est.value < kOnePlusInvE + p.margin ? Status::Satisfied : Status::Violated;
  if (v.status == Status::Violated) {
    v.summary = "weighted delay integral " + fmt(est.value) + " reaches 1 + 1/e";
    for (auto& h : {h8, h9, hdiv, hpt, hae}) v.hypotheses.push_back(h);
    if (h22) v.hypotheses.push_back(*h22);
    finalize(v);
    return v;
  }

  // Conclusion routing by hypothesis profile.
  if (h8.passed && h9.passed) {
    v.hypotheses.push_back(h8);
    v.hypotheses.push_back(h9);
    v.conclusion = Conclusion::ExponentiallyStable;
    v.summary = "weighted delay integral " + fmt(est.value) +
                " < 1 + 1/e with positive density and bounded lags: exponentially stable";
  } else if (hdiv.passed && hpt.passed && hae.passed) {
    v.hypotheses.push_back(hdiv);
    v.hypotheses.push_back(hpt);
    v.hypotheses.push_back(hae);
    if (h9.passed) {
      // With bounded lags a positive window liminf of the density is
      // necessary for exponential stability, so the upgrade requires it.
      if (h22 && h22->passed) {
        v.hypotheses.push_back(h9);
        v.hypotheses.push_back(*h22);
        v.conclusion = Conclusion::ExponentiallyStable;
        v.summary = "weighted delay integral " + fmt(est.value) +
                    " < 1 + 1/e with divergent density, positive window liminf and bounded "
                    "lags: exponentially stable";
      } else {
        v.conclusion = Conclusion::AsymptoticallyStable;
        v.summary = "weighted delay integral " + fmt(est.value) +
                    " < 1 + 1/e with divergent, a.e.-positive density: solutions tend to "
                    "zero";
        v.summary += h22 ? " (the window liminf fails, so no exponential upgrade)"
                         : " (supply a window length to attempt the exponential upgrade)";
      }
    } else {
      v.conclusion = Conclusion::ExponentiallyStable;
      v.summary = "weighted delay integral " + fmt(est.value) +
                  " < 1 + 1/e with divergent, a.e.-positive density and bounded per-term "
                  "integrals: decay is exponential in the coefficient-mass clock";
      v.evidence.push_back(mk_ev("rescaled-clock-rate", 1.0, c.wlo, c.H, std::nullopt,
                                 "the decay exponent is measured against the cumulative "
                                 "coefficient mass, not raw time"));
      if (h22 && h22->passed) {
        v.hypotheses.push_back(*h22);
        v.evidence.push_back(mk_ev("exponential-estimate", 1.0, c.wlo, c.H, std::nullopt,
                                   "window liminf converts the mass-clock rate to raw time"));
      }
    }
  } else {
    for (auto& h : {h8, h9, hdiv, hpt, hae}) v.hypotheses.push_back(h);
    if (h22) v.hypotheses.push_back(*h22);
    v.summary = "weighted delay integral " + fmt(est.value) +
                " < 1 + 1/e, but no hypothesis route applies";
  }
  if (v.conclusion != Conclusion::NoConclusion) {
    // Only the active route's hypotheses are listed; assert they all passed.
    if (!v.hypotheses_ok()) v.conclusion = Conclusion::NoConclusion;
  }
  return v;
}

Verdict check_one_plus_one_over_e_min_delay(const DelayEquation& eq, const CheckParams& p) {
  Ctx c = make_ctx(eq, p, true);
  Verdict v;
  v.id = "one-plus-one-over-e-min-delay";
  HypothesisCheck hn = hyp_nonneg(c);
  v.hypotheses.push_back(hn);
  if (!hn.passed || !c.P.valid()) {
    v.summary = "sign hypothesis failed: the min-delay 1+1/e test does not apply";
    finalize(v);
    return v;
  }
  auto g = [&](double t) {
    double hmin = t;
    for (const Term& tm : eq.terms) hmin = std::min(hmin, tm.delay.eval(t));
    return c.Pt(t) - c.Pt(std::max(hmin, c.t0));
  };
  auto est = estimate_supremum(g, c.wlo, c.H, c.scan_step(c.wlo, c.H));
  v.evidence.push_back(mk_ev("min-delay-integral", est.value, c.wlo, c.H, est.at));
  v.evidence.push_back(mk_ev("threshold", kOnePlusInvE, c.wlo, c.H, std::nullopt, "strict"));
  v.evidence.push_back(mk_ev("margin", kOnePlusInvE - est.value, c.wlo, c.H));

  auto sumc = [&](double t) { return c.sum_coef(t); };
  HypothesisCheck h8 =
      liminf_positive_hyp("density-liminf-positive", sumc, c, c.p.assume_nonvanishing);
  HypothesisCheck h9 = hyp_delays_bounded(c, nullptr);
  HypothesisCheck hdiv =
      divergent_hyp("density-integral-divergent", c.P, c.t0, c.H, c.p.assume_divergent);
  std::optional<HypothesisCheck> h22 =
      window_liminf_hyp(c, c.P, "window-density-liminf-positive", &v.evidence);

  v.status = est.value < kOnePlusInvE + p.margin ? Status::Satisfied : Status::Violated;
  if (v.status == Status::Violated) {
    v.summary = "min-delay integral " + fmt(est.value) + " reaches 1 + 1/e";
    for (auto& h : {h8, h9, hdiv}) v.hypotheses.push_back(h);
    if (h22) v.hypotheses.push_back(*h22);
    finalize(v);
    return v;
  }
  if (h8.passed && h9.passed) {
    v.hypotheses.push_back(h8);
    v.hypotheses.push_back(h9);
    v.conclusion = Conclusion::ExponentiallyStable;
    v.summary = "min-delay integral " + fmt(est.value) +
                " < 1 + 1/e with positive density and bounded lags: exponentially stable";
  } else if (hdiv.passed) {
    v.hypotheses.push_back(hdiv);
    bool est22 = h22 && h22->passed;
    if (est22) v.hypotheses.push_back(*h22);
    if (est22 && h9.passed) {
      v.hypotheses.push_back(h9);
      v.conclusion = Conclusion::ExponentiallyStable;
      v.summary = "min-delay integral " + fmt(est.value) +
                  " < 1 + 1/e with divergent density, positive window liminf and bounded "
                  "lags: exponentially stable";
    } else {
      v.conclusion = Conclusion::AsymptoticallyStable;
      v.summary = "min-delay integral " + fmt(est.value) +
                  " < 1 + 1/e with divergent density: solutions tend to zero";
      if (est22)
        v.evidence.push_back(mk_ev("exponential-estimate", 1.0, c.wlo, c.H, std::nullopt,
                                   "the fundamental function also obeys an exponential bound"));
    }
  } else {
    v.hypotheses.push_back(h8);
    v.hypotheses.push_back(h9);
    v.hypotheses.push_back(hdiv);
    if (h22) v.hypotheses.push_back(*h22);
    v.summary = "min-delay integral " + fmt(est.value) +
                " < 1 + 1/e, but no hypothesis route applies";
  }
  if (v.conclusion != Conclusion::NoConclusion && !v.hypotheses_ok())
    v.conclusion = Conclusion::NoConclusion;
  return v;
}

Verdict check_dominant_positive(const DelayEquation& eq, const CheckParams& p) {
  Ctx c = make_ctx(eq, p, false);
  Verdict v;
  v.id = "dominant-positive";
  const std::size_t m = eq.terms.size();

  // Resolve the dominant index set (user-specified 1-based, else automatic:
  // nonnegative instantaneous terms if any, else all nonnegative terms).
  std::vector<int> I;
  std::string source;
  if (!p.index_set.empty()) {
    source = "user-specified";
    for (int k1 : p.index_set) {
      if (k1 < 1 || static_cast<std::size_t>(k1) > m) {
        v.summary = "index set entry " + std::to_string(k1) + " is out of range";
        finalize(v);
        return v;
      }
      I.push_back(k1 - 1);
    }
    std::sort(I.begin(), I.end());
    I.erase(std::unique(I.begin(), I.end()), I.end());
  } else {
    std::vector<int> nonneg_terms, instant;
    for (std::size_t k = 0; k < m; ++k) {
      if (!c.signs.nonnegative[k]) continue;
      nonneg_terms.push_back(static_cast<int>(k));
      const PiecewiseFn& delay = eq.terms[k].delay;
      auto lag = [&delay](double t) { return std::abs(t - delay.eval(t)); };
      auto sup = estimate_supremum(lag, c.wlo, c.H, c.scan_step(c.wlo, c.H));
      if (sup.value <= 1e-9) instant.push_back(static_cast<int>(k));
    }
    I = instant.empty() ? nonneg_terms : instant;
    source = instant.empty() ? "automatic (all nonnegative terms)"
                             : "automatic (nonnegative instantaneous terms)";
  }

  HypothesisCheck hI;
  hI.name = "index-set-nonnegative";
  hI.passed = !I.empty();
  {
    std::string list;
    for (int k : I) list += (list.empty() ? "" : ", ") + std::to_string(k + 1);
    hI.detail = "I = {" + list + "} (" + source + ")";
  }
  for (int k : I)
    if (!c.signs.nonnegative[static_cast<std::size_t>(k)]) {
      hI.passed = false;
      hI.detail += "; term " + std::to_string(k + 1) + " takes negative values";
    }
  v.hypotheses.push_back(hI);
  if (!hI.passed) {
    v.summary = I.empty() ? "no nonnegative terms available for the dominant part"
                          : "the selected dominant part has sign violations";
    finalize(v);
    return v;
  }
  v.evidence.push_back(mk_ev("index-set-size", static_cast<double>(I.size()), c.t0, c.H,
                             std::nullopt, hI.detail));

  DelayEquation sub;
  sub.t_start = eq.t_start;
  std::vector<bool> in_I(m, false);
  for (int k : I) {
    sub.terms.push_back(eq.terms[static_cast<std::size_t>(k)]);
    in_I[static_cast<std::size_t>(k)] = true;
  }

  // Positivity of the dominant sub-equation's fundamental function: try the
  // two analytic certificates first, fall back to a direct numerical slice.
  HypothesisCheck hpos;
  hpos.name = "subequation-fundamental-positive";
  {
    Verdict v6 = check_positivity_integral(sub, p);
    if (v6.status == Status::Satisfied) {
      hpos.passed = true;
      hpos.detail = "certified by the delay-window integral bound";
    } else {
      Verdict v7 = check_positivity_char(sub, p);
      if (v7.status == Status::Satisfied) {
        hpos.passed = true;
        hpos.detail = "certified by the coefficient-bound inequality";
      } else {
        hpos.finite_horizon_proxy = true;
        try {
          StepControl sc;
          FundamentalSlice fs = fundamental(sub, c.t0, c.H, sc);
          double lo = std::numeric_limits<double>::infinity();
          for (const Knot& k : fs.traj.knots) lo = std::min(lo, k.x);
          hpos.passed = lo > 0;
          hpos.detail = "numerical fundamental slice minimum " + fmt(lo) + " on [" +
                        fmt(c.t0) + ", " + fmt(c.H) + "]";
        } catch (const SolverError& err) {
          hpos.passed = false;
          hpos.detail = std::string("numerical slice failed: ") + err.what();
        }
      }
    }
  }
  v.hypotheses.push_back(hpos);

  // Dominance ratio over the tail window, skipping the exception set where
  // the dominant part vanishes (there the rest must vanish too).
  auto sum_I = [&](double t) {
    double s = 0;
    for (int k : I) s += eq.terms[static_cast<std::size_t>(k)].coefficient.eval(t);
    return s;
  };
  auto sum_C = [&](double t) {
    double s = 0;
    for (std::size_t k = 0; k < m; ++k)
      if (!in_I[k]) s += std::abs(eq.terms[k].coefficient.eval(t));
    return s;
  };
  bool exception_clean = true;
  double bad_at = 0;
  {
    double step = c.scan_step(c.wlo, c.H);
    for (double t = c.wlo; t <= c.H + 0.5 * step; t += step) {
      double u = std::min(t, c.H);
      if (sum_I(u) < 1e-14 && sum_C(u) >= 1e-14) {
        exception_clean = false;
        bad_at = u;
        break;
      }
    }
  }
  auto ratio = [&](double t) {
    double den = sum_I(t);
    if (den < 1e-14) return 0.0;
    return sum_C(t) / den;
  };
  auto est = estimate_supremum(ratio, c.wlo, c.H, c.scan_step(c.wlo, c.H));
  v.evidence.push_back(mk_ev("dominance-ratio", est.value, c.wlo, c.H, est.at,
                             "sup of (sum of |a_k|, k outside I) / (sum of a_k, k in I)"));
  v.evidence.push_back(mk_ev("threshold", 1.0, c.wlo, c.H, std::nullopt, "strict"));
  v.evidence.push_back(mk_ev("margin", 1.0 - est.value, c.wlo, c.H));

  if (!hpos.passed) {
    v.summary = "positivity of the dominant sub-equation could not be certified";
    finalize(v);
    return v;
  }
  if (!exception_clean) {
    v.status = Status::Violated;
    v.summary = "the dominant part vanishes at t = " + fmt(bad_at) +
                " while the remaining terms do not";
    finalize(v);
    return v;
  }
  if (est.value >= 1.0 + p.margin) {
    v.status = Status::Violated;
    v.summary = "dominance ratio " + fmt(est.value) + " reaches 1";
    finalize(v);
    return v;
  }
  v.status = Status::Satisfied;

  // Conclusion routing.
  CumulativeDensity PI;
  try {
    PI = CumulativeDensity::build(sum_density(sub.terms, c.t0, c.H, false), c.t0, c.H);
  } catch (const std::exception&) {
  }
  HypothesisCheck h9 = hyp_delays_bounded(c, nullptr);
  HypothesisCheck h10a = liminf_positive_hyp("dominant-density-liminf-positive", sum_I, c,
                                             c.p.assume_nonvanishing);
  HypothesisCheck hdivI = divergent_hyp("dominant-density-integral-divergent", PI, c.t0, c.H,
                                        c.p.assume_divergent);
  HypothesisCheck hptI = per_term_integral_bounded_hyp(
      c, PI, "per-term-dominant-integral-bounded", &v.evidence);
  std::optional<HypothesisCheck> h22d =
      window_liminf_hyp(c, PI, "dominant-window-liminf-positive", &v.evidence);

  if (h9.passed && h10a.passed) {
    v.hypotheses.push_back(h9);
    v.hypotheses.push_back(h10a);
    v.conclusion = Conclusion::ExponentiallyStable;
    v.summary = "dominance ratio " + fmt(est.value) +
                " < 1 over a positive dominant part with bounded lags: exponentially stable";
  } else if (PI.valid() && hdivI.passed && hptI.passed) {
    v.hypotheses.push_back(hdivI);
    v.hypotheses.push_back(hptI);
    bool est22 = h22d && h22d->passed;
    if (est22) v.hypotheses.push_back(*h22d);
    if (est22 && h9.passed) {
      v.hypotheses.push_back(h9);
      v.conclusion = Conclusion::ExponentiallyStable;
      v.summary = "dominance ratio " + fmt(est.value) +
                  " < 1 with divergent dominant density, positive window liminf and bounded "
                  "lags: exponentially stable";
    } else {
      v.conclusion = Conclusion::AsymptoticallyStable;
      v.summary = "dominance ratio " + fmt(est.value) +
                  " < 1 with a positive, divergent dominant part: solutions tend to zero";
      if (est22)
        v.evidence.push_back(mk_ev("exponential-estimate", 1.0, c.wlo, c.H, std::nullopt,
                                   "the fundamental function also obeys an exponential bound"));
    }
  } else {
    v.hypotheses.push_back(h9);
    v.hypotheses.push_back(h10a);
    v.hypotheses.push_back(hdivI);
    v.hypotheses.push_back(hptI);
    v.summary = "dominance ratio " + fmt(est.value) +
                " < 1, but no hypothesis route applies";
  }
  if (v.conclusion != Conclusion::NoConclusion && !v.hypotheses_ok())
    v.conclusion = Conclusion::NoConclusion;
  return v;
}

Verdict check_integrable(const DelayEquation& eq, const CheckParams& p) {
  Ctx c = make_ctx(eq, p, false);
  Verdict v;
  v.id = "integrable-coefficients";
  TailCertificate tc = certify_tail(sum_density(eq.terms, c.t0, c.H, true), c.t0, c.H);
  if (!tc.built) {
    v.summary = "the combined |coefficient| could not be integrated over the extended horizon";
    finalize(v);
    return v;
  }
  v.evidence.push_back(mk_ev("total-integral", tc.total, c.t0, tc.far, std::nullopt,
                             "integral of sum |a_k|, tail extrapolated past the far horizon"));
  v.evidence.push_back(mk_ev("tail-block-ratio", tc.ratio, c.H, tc.far, std::nullopt,
                             "mass of the second doubling block over the first"));
  if (!tc.convergent) {
    v.status = Status::Violated;
    v.summary = "the |coefficient| integral keeps growing (tail block " + fmt(tc.tail1) +
                ", ratio " + fmt(tc.ratio) + "): no boundedness bound from this test";
    finalize(v);
    return v;
  }
  double A = std::exp(std::min(tc.total, 700.0));
  v.evidence.push_back(mk_ev("envelope-bound", A, c.t0, tc.far, std::nullopt,
                             "every solution and the fundamental function stay within "
                             "exp(total integral) times their initial scale"));
  double target = tc.total - 1.0 / (2.0 * A);
  double t_half = target <= 0 ? c.t0 : std::min(tc.map.inverse(target), tc.far);
  v.evidence.push_back(mk_ev("half-floor-start", t_half, c.t0, tc.far, std::nullopt,
                             "fundamental slices started at or beyond this time stay above "
                             "1/2"));
  v.evidence.push_back(mk_ev("solutions-bounded", 1.0, c.t0, tc.far));
  v.status = Status::Satisfied;
  v.conclusion = Conclusion::NotAsymptoticallyStable;
  v.summary = "the |coefficient| integral converges (total " + fmt(tc.total) +
              "): all solutions are bounded and the equation is not asymptotically stable";
  return v;
}

Verdict check_ode_necessary(const DelayEquation& eq, const CheckParams& p) {
  Ctx c = make_ctx(eq, p, true);
  Verdict v;
  v.id = "ode-necessary";
  HypothesisCheck hn = hyp_nonneg(c);
  v.hypotheses.push_back(hn);
  if (!hn.passed || !c.P.valid()) {
    v.summary = "sign hypothesis failed: the window-density test does not apply";
    finalize(v);
    return v;
  }
  // Positive window liminf needs the late-half minimum both above the margin
  // and not still decaying relative to the early half (same settling rule as
  // the pointwise density liminf), so 1/t-like densities read as zero.
  struct WindowInf {
    double value = 0;  // minimum over the whole window
    double late = 0;
    double early = 0;
    double at = 0;
    bool positive = false;
  };
  auto liminf_for = [&](double R) {
    auto g = [&](double t) { return c.P.value(t + R) - c.P.value(t); };
    double hi = c.H - R;
    double mid = 0.5 * (c.wlo + hi);
    auto early = estimate_infimum(g, c.wlo, mid, c.scan_step(c.wlo, mid));
    auto late = estimate_infimum(g, mid, hi, c.scan_step(mid, hi));
    WindowInf w;
    w.early = early.value;
    w.late = late.value;
    w.value = std::min(early.value, late.value);
    w.at = w.value == late.value ? late.at : early.at;
    w.positive = late.value > p.margin && late.value >= 0.9 * early.value - p.margin;
    return w;
  };
  std::vector<double> scan;
  for (double R = 1; R <= std::min(50.0, 0.5 * (c.H - c.wlo)); R *= 2) scan.push_back(R);

  bool satisfied = false;
  if (p.window_R) {
    double R = *p.window_R;
    if (R <= 0 || c.wlo + R >= c.H) {
      v.summary = "window length R = " + fmt(R) + " is unusable on this horizon";
      finalize(v);
      return v;
    }
    auto inf = liminf_for(R);
    std::string note = "window length R = " + fmt(R);
    if (!inf.positive && inf.late > p.margin)
      note += "; still decreasing across the window (early half " + fmt(inf.early) +
              ", late half " + fmt(inf.late) + ")";
    v.evidence.push_back(mk_ev("window-liminf", inf.value, c.wlo, c.H - R, inf.at, note));
    v.evidence.push_back(mk_ev("window-R", R, c.wlo, c.H - R));
    if (inf.positive) {
      satisfied = true;
    } else {
      std::optional<double> works;
      for (double Rs : scan) {
        if (Rs <= R) continue;
        auto alt = liminf_for(Rs);
        if (alt.positive) {
          works = Rs;
          v.evidence.push_back(mk_ev("suggested-R", Rs, c.wlo, c.H - Rs, std::nullopt,
                                     "liminf " + fmt(alt.value) + " at this window length"));
          break;
        }
      }
      if (works) {
        v.summary = "window length R = " + fmt(R) + " gives liminf " + fmt(inf.value) +
                    "; a longer window R = " + fmt(*works) + " works";
        finalize(v);
        return v;
      }
      v.status = Status::Violated;
    }
  } else {
    double best = -std::numeric_limits<double>::infinity(), best_R = 0;
    for (double Rs : scan) {
      auto inf = liminf_for(Rs);
      if (inf.value > best) {
        best = inf.value;
        best_R = Rs;
      }
      if (inf.positive) {
        satisfied = true;
        v.evidence.push_back(mk_ev("window-liminf", inf.value, c.wlo, c.H - Rs, inf.at,
                                   "window length R = " + fmt(Rs)));
        v.evidence.push_back(mk_ev("window-R", Rs, c.wlo, c.H - Rs));
        break;
      }
    }
    if (!satisfied) {
      v.evidence.push_back(mk_ev("window-liminf", best, c.wlo, c.H - best_R, std::nullopt,
                                 "best over scanned window lengths, R = " + fmt(best_R) +
                                     " (no length settles to a positive floor)"));
      v.status = Status::Violated;
    }
  }

  bool is_ode = true;
  for (const Term& tm : eq.terms) {
    const PiecewiseFn& delay = tm.delay;
    auto lag = [&delay](double t) { return std::abs(t - delay.eval(t)); };
    if (estimate_supremum(lag, c.t0, c.H, c.scan_step(c.t0, c.H)).value > 1e-9) {
      is_ode = false;
      break;
    }
  }
  v.evidence.push_back(mk_ev("instantaneous-equation", is_ode ? 1.0 : 0.0, c.t0, c.H));

  if (satisfied) {
    v.status = Status::Satisfied;
    if (is_ode) {
      v.conclusion = Conclusion::ExponentiallyStable;
      v.summary = "positive window liminf and every delay is instantaneous: the equation is "
                  "exponentially stable";
    } else {
      v.summary = "positive window liminf: the necessary condition for exponential stability "
                  "holds (not sufficient for a delay equation)";
    }
  } else if (v.status == Status::Violated) {
    v.summary = "no scanned window length gives a positive density liminf: the instantaneous "
                "equation is not exponentially stable, and with bounded lags the delay "
                "equation cannot be either";
  }
  finalize(v);
  return v;
}

namespace {

std::optional<std::string> exp_certificate(const DelayEquation& eq, const CheckParams& p) {
  using CheckFn = Verdict (*)(const DelayEquation&, const CheckParams&);
  const CheckFn fns[] = {check_one_over_e_shift, check_one_plus_one_over_e,
                         check_one_plus_one_over_e_min_delay, check_ode_necessary,
                         check_dominant_positive};
  for (CheckFn fn : fns) {
    Verdict v = fn(eq, p);
    if (v.conclusion == Conclusion::ExponentiallyStable) return v.id;
  }
  return std::nullopt;
}

}  // namespace

Verdict check_perturbation(const DelayEquation& base, const std::vector<Term>& extra,
                           const CheckParams& p) {
  Ctx c = make_ctx(base, p, false);
  Verdict v;
  v.id = "perturbation";

  HypothesisCheck hbase;
  hbase.name = "base-exponentially-stable";
  hbase.finite_horizon_proxy = true;
  if (auto id = exp_certificate(base, p)) {
    hbase.passed = true;
    hbase.detail = "certified by " + *id;
  } else {
    hbase.detail = "no check certifies the base equation as exponentially stable";
  }
  v.hypotheses.push_back(hbase);

  HypothesisCheck hlag;
  hlag.name = "extra-lags-bounded";
  hlag.finite_horizon_proxy = true;
  hlag.passed = true;
  for (std::size_t k = 0; k < extra.size(); ++k) {
    const PiecewiseFn& delay = extra[k].delay;
    auto lag = [&delay](double t) { return t - delay.eval(t); };
    BoundedSup b = bounded_sup(lag, c.t0, c.H, c);
    if (!b.bounded || b.sup < -1e-9) hlag.passed = false;
    hlag.detail += (hlag.detail.empty() ? "" : "; ") + ("extra term " + std::to_string(k + 1) +
                 " lag sup " + fmt(b.sup) + (b.bounded ? "" : " (growing)"));
  }
  if (extra.empty()) hlag.detail = "no extra terms";
  v.hypotheses.push_back(hlag);

  HypothesisCheck hint;
  hint.name = "extra-integrable";
  hint.finite_horizon_proxy = true;
  if (extra.empty()) {
    hint.passed = true;
    hint.detail = "no extra terms";
    v.evidence.push_back(mk_ev("extra-total-integral", 0.0, c.t0, c.H));
  } else {
    TailCertificate tc = certify_tail(sum_density(extra, c.t0, c.H, true), c.t0, c.H);
    hint.passed = tc.built && tc.convergent;
    hint.detail = tc.built ? "total " + fmt(tc.total) + ", tail block " + fmt(tc.tail1) +
                                 ", block ratio " + fmt(tc.ratio)
                           : "integral not certifiable";
    if (tc.built) {
      v.evidence.push_back(mk_ev("extra-total-integral", tc.total, c.t0, tc.far, std::nullopt,
                                 "integral of the summed |extra coefficients|, tail "
                                 "extrapolated"));
      v.evidence.push_back(mk_ev("extra-tail-block-ratio", tc.ratio, c.H, tc.far));
    }
  }
  v.hypotheses.push_back(hint);

  if (v.hypotheses_ok()) {
    v.status = Status::Satisfied;
    v.conclusion = Conclusion::ExponentiallyStable;
    v.summary = "an exponentially stable base plus bounded-lag terms with a convergent "
                "|coefficient| integral: the full equation stays exponentially stable";
  } else {
    v.summary = "perturbation bound not established; no conclusion about the full equation";
  }
  finalize(v);
  return v;
}

Report run_all(const DelayEquation& eq, const CheckParams& p) {
  Report r;
  r.validation = validate_equation(eq, p.horizon, p.grid);
  r.checks.push_back(check_positivity_integral(eq, p));
  r.checks.push_back(check_positivity_char(eq, p));
  r.checks.push_back(check_one_over_e_shift(eq, p));
  r.checks.push_back(check_one_plus_one_over_e(eq, p));
  r.checks.push_back(check_one_plus_one_over_e_min_delay(eq, p));
  r.checks.push_back(check_dominant_positive(eq, p));
  r.checks.push_back(check_integrable(eq, p));
  r.checks.push_back(check_ode_necessary(eq, p));

  // When some terms carry an integrable coefficient tail and others do not,
  // retry with the integrable ones treated as a perturbation of the rest.
  if (eq.terms.size() > 1 && !eq.forcing) {
    DelayEquation base;
    base.t_start = eq.t_start;
    std::vector<Term> extra;
    for (const Term& tm : eq.terms) {
      bool integrable = false;
      try {
        std::vector<Term> one{tm};
        TailCertificate tc =
            certify_tail(sum_density(one, eq.t_start, p.horizon, true), eq.t_start, p.horizon);
        integrable = tc.built && tc.convergent;
      } catch (const std::exception&) {
      }
      (integrable ? extra : base.terms).push_back(tm);
    }
    if (!extra.empty() && !base.terms.empty())
      r.checks.push_back(check_perturbation(base, extra, p));
  }

  for (const Verdict& v : r.checks)
    if (rank(v.conclusion) > rank(r.combined)) r.combined = v.conclusion;
  if (r.combined != Conclusion::NoConclusion)
    for (const Verdict& v : r.checks)
      if (v.conclusion == r.combined) r.provenance.push_back(v.id);
  return r;
}

namespace {

nlohmann::ordered_json evidence_json(const Evidence& e) {
  nlohmann::ordered_json j;
  j["value"] = e.value;
  j["window"] = {e.window_lo, e.window_hi};
  if (e.at) j["at"] = *e.at;
  if (!e.note.empty()) j["note"] = e.note;
  return j;
}

nlohmann::ordered_json verdict_json(const Verdict& v) {
  nlohmann::ordered_json j;
  j["id"] = v.id;
  j["status"] = to_string(v.status);
  j["conclusion"] = to_string(v.conclusion);
  j["summary"] = v.summary;
  nlohmann::ordered_json ev = nlohmann::ordered_json::object();
  for (const Evidence& e : v.evidence) ev[e.name] = evidence_json(e);
  j["evidence"] = std::move(ev);
  nlohmann::ordered_json hyps = nlohmann::ordered_json::array();
  for (const HypothesisCheck& h : v.hypotheses) {
    nlohmann::ordered_json hj;
    hj["name"] = h.name;
    hj["passed"] = h.passed;
    hj["detail"] = h.detail;
    hj["finite_horizon_proxy"] = h.finite_horizon_proxy;
    hyps.push_back(std::move(hj));
  }
  j["hypotheses"] = std::move(hyps);
  return j;
}

}  // namespace

std::string report_to_json(const Report& r, int indent) {
  nlohmann::ordered_json j;
  j["combined"] = to_string(r.combined);
  j["provenance"] = r.provenance;
  nlohmann::ordered_json val;
  val["all_passed"] = r.validation.all_passed();
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  for (const ValidationItem& it : r.validation.items) {
    nlohmann::ordered_json ij;
    ij["assumption"] = it.assumption;
    ij["passed"] = it.passed;
    ij["detail"] = it.detail;
    items.push_back(std::move(ij));
  }
  val["items"] = std::move(items);
  j["validation"] = std::move(val);
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const Verdict& v : r.checks) checks.push_back(verdict_json(v));
  j["checks"] = std::move(checks);
  return j.dump(indent);
}

}  // namespace ddestab
