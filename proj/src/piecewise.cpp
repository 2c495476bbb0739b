#include "ddestab/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace ddestab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void sort_unique(std::vector<double>& xs, double tol_scale) {
  std::sort(xs.begin(), xs.end());
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) {
    if (out.empty() || x - out.back() > tol_scale * std::max(1.0, std::fabs(x))) {
      out.push_back(x);
    }
  }
  xs = std::move(out);
}

// ---------------------------------------------------------------------------
// Adaptive Simpson

namespace {

double simpson(double a, double fa, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double simpson_rec(const std::function<double(double)>& f, double a, double fa, double b,
                   double fb, double m, double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  if (!std::isfinite(flm) || !std::isfinite(frm))
    throw IntegrationError("non-finite integrand sample near t=" + std::to_string(m));
  const double left = simpson(a, fa, flm, m, fm);
  const double right = simpson(m, fm, frm, b, fb);
  const double err = left + right - whole;
  if (depth <= 0 || std::fabs(err) <= 15.0 * tol) return left + right + err / 15.0;
  return simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
    throw IntegrationError("non-finite integrand sample in [" + std::to_string(a) + ", " +
                           std::to_string(b) + "]");
  const double whole = simpson(a, fa, fm, b, fb);
  return simpson_rec(f, a, fa, b, fb, 0.5 * (a + b), fm, whole, std::max(tol, 1e-300), 48);
}

// ---------------------------------------------------------------------------
// PiecewiseFn

struct PiecewiseFn::Impl {
  ExprPtr expr;                           // null for callable-backed
  std::function<double(double, int)> fn;  // used when expr is null
  double domain_start = 0;
  bool closed = false;
  std::vector<double> fixed_bps;  // callable-backed: the complete list

  mutable std::mutex mu;
  mutable std::vector<double> cache;
  mutable double cover_hi = -kInf;
};

PiecewiseFn PiecewiseFn::from_expr(ExprPtr e, double domain_start) {
  PiecewiseFn f;
  f.impl_ = std::make_shared<Impl>();
  f.impl_->expr = std::move(e);
  f.impl_->domain_start = domain_start;
  f.impl_->closed = has_closed_form(*f.impl_->expr);
  return f;
}

PiecewiseFn PiecewiseFn::from_callable(std::function<double(double, int)> fn,
                                       std::vector<double> breakpoints,
                                       double domain_start) {
  PiecewiseFn f;
  f.impl_ = std::make_shared<Impl>();
  f.impl_->fn = std::move(fn);
  f.impl_->domain_start = domain_start;
  sort_unique(breakpoints);
  f.impl_->fixed_bps = std::move(breakpoints);
  return f;
}

double PiecewiseFn::domain_start() const { return impl_->domain_start; }

double PiecewiseFn::eval(double t, int dir) const {
  const Impl& im = *impl_;
  if (t < im.domain_start - 1e-12 * std::max(1.0, std::fabs(t)))
    throw DomainError("function evaluated below its domain start (t=" + std::to_string(t) +
                      ", start=" + std::to_string(im.domain_start) + ")");
  if (im.expr) return ddestab::eval(*im.expr, t, dir);
  return im.fn(t, dir);
}

bool PiecewiseFn::closed_form() const { return impl_->closed; }

const ExprPtr& PiecewiseFn::expression() const { return impl_->expr; }

std::vector<double> PiecewiseFn::breakpoints(double a, double b) const {
  const Impl& im = *impl_;
  a = std::max(a, im.domain_start);
  std::vector<double> out;
  if (b <= a) return out;
  if (!im.expr) {
    auto lo = std::lower_bound(im.fixed_bps.begin(), im.fixed_bps.end(), a);
    auto hi = std::upper_bound(im.fixed_bps.begin(), im.fixed_bps.end(), b);
    return std::vector<double>(lo, hi);
  }
  std::lock_guard<std::mutex> lock(im.mu);
  if (b > im.cover_hi) {
    // Re-collect from the domain start so wider windows extend, never shuffle,
    // the cached list; double the covered span to amortize extensions.
    double new_hi = b;
    if (im.cover_hi > im.domain_start)
      new_hi = std::max(new_hi, im.domain_start + 2.0 * (im.cover_hi - im.domain_start));
    std::vector<double> pts;
    collect_breakpoints(*im.expr, im.domain_start, new_hi, pts);
    sort_unique(pts);
    im.cache = std::move(pts);
    im.cover_hi = new_hi;
  }
  auto lo = std::lower_bound(im.cache.begin(), im.cache.end(),
                             a + 1e-12 * std::max(1.0, std::fabs(a)));
  auto hi = std::upper_bound(im.cache.begin(), im.cache.end(),
                             b - 1e-12 * std::max(1.0, std::fabs(b)));
  if (lo > hi) lo = hi;
  return std::vector<double>(lo, hi);
}

double PiecewiseFn::integrate(double a, double b, double tol) const {
  if (a == b) return 0.0;
  if (a > b) return -integrate(b, a, tol);
  const Impl& im = *impl_;
  if (a < im.domain_start - 1e-12 * std::max(1.0, std::fabs(a)))
    throw DomainError("integration range starts below the domain start");
  if (im.expr && im.closed) {
    if (auto v = closed_form_integral(*im.expr, a, b)) return *v;
  }
  std::vector<double> cuts = breakpoints(a, b);
  cuts.push_back(a);
  cuts.push_back(b);
  sort_unique(cuts);
  double sum = 0, comp = 0;  // Kahan
  auto add = [&](double v) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  };
  const double span = b - a;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double x1 = cuts[i], x2 = cuts[i + 1];
    if (x2 <= x1) continue;
    if (im.expr) {
      if (auto v = closed_form_integral(*im.expr, x1, x2)) {
        add(*v);
        continue;
      }
    }
    auto sample = [&](double x) {
      const int dir = x >= x2 ? -1 : +1;
      return im.expr ? ddestab::eval(*im.expr, x, dir) : im.fn(x, dir);
    };
    const double piece_tol = std::max(tol * (x2 - x1) / span, tol * 1e-6);
    add(adaptive_simpson(sample, x1, x2, piece_tol));
  }
  return sum;
}

SupResult PiecewiseFn::sup_abs(double a, double b) const {
  const Impl& im = *impl_;
  a = std::max(a, im.domain_start);
  SupResult best{-kInf, a, false};
  if (b < a) return SupResult{0, a, false};
  std::vector<double> cuts = breakpoints(a, b);
  cuts.push_back(a);
  cuts.push_back(b);
  sort_unique(cuts);
  auto consider = [&](double x, int dir) {
    double v;
    try {
      v = std::fabs(eval(x, dir));
    } catch (const DomainError&) {
      return;
    }
    if (!std::isfinite(v)) {
      best.unbounded = true;
      best.value = kInf;
      best.at = x;
      return;
    }
    if (v > best.value) {
      best.value = v;
      best.at = x;
    }
  };
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double x1 = cuts[i], x2 = cuts[i + 1];
    if (x2 <= x1) continue;
    const int n = 64;
    double seg_best = -kInf, seg_arg = x1;
    for (int k = 0; k <= n; ++k) {
      const double x = x1 + (x2 - x1) * k / n;
      const int dir = k == n ? -1 : +1;
      consider(x, dir);
      double v;
      try {
        v = std::fabs(eval(x, dir));
      } catch (const DomainError&) {
        continue;
      }
      if (std::isfinite(v) && v > seg_best) {
        seg_best = v;
        seg_arg = x;
      }
    }
    // Local refinement around the segment arg-max (golden section on -|f|).
    double lo = std::max(x1, seg_arg - (x2 - x1) / n);
    double hi = std::min(x2, seg_arg + (x2 - x1) / n);
    const double gr = 0.6180339887498949;
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    for (int it = 0; it < 60 && hi - lo > 1e-13 * std::max(1.0, std::fabs(hi)); ++it) {
      const double fc = std::fabs(eval(c)), fd = std::fabs(eval(d));
      if (fc > fd) {
        hi = d;
        d = c;
        c = hi - gr * (hi - lo);
      } else {
        lo = c;
        c = d;
        d = lo + gr * (hi - lo);
      }
      consider(0.5 * (lo + hi), +1);
    }
  }
  if (best.value == -kInf) return SupResult{0, a, false};
  return best;
}

// ---------------------------------------------------------------------------
// Finite-horizon limsup / liminf estimates

ExtremumEstimate estimate_supremum(const std::function<double(double)>& g, double lo,
                                   double hi, double step) {
  ExtremumEstimate est{-kInf, lo, lo, hi};
  if (hi < lo) return est;
  if (step <= 0) step = std::max((hi - lo) / 1024.0, 1e-9);
  const double n = std::floor((hi - lo) / step);
  auto consider = [&](double x) {
    const double v = g(x);
    if (v > est.value) {
      est.value = v;
      est.at = x;
    }
  };
  for (double k = 0; k <= n; k += 1) consider(lo + k * step);
  consider(hi);
  // One dyadic refinement pass around the grid arg-max.
  const double center = est.at;
  for (int j = 1; j <= 26; ++j) {
    const double d = step / std::pow(2.0, j);
    if (center - d >= lo) consider(center - d);
    if (center + d <= hi) consider(center + d);
  }
  return est;
}

ExtremumEstimate estimate_infimum(const std::function<double(double)>& g, double lo,
                                  double hi, double step) {
  auto neg = estimate_supremum([&](double x) { return -g(x); }, lo, hi, step);
  return ExtremumEstimate{-neg.value, neg.at, neg.window_lo, neg.window_hi};
}

}  // namespace ddestab
