#include "ddestab/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "ddestab/solver.hpp"

namespace ddestab {

namespace {

// 7-point Gauss-Legendre on [-1, 1]; exact to degree 13, which makes in-cell
// partial integrals of smooth pieces accurate to roundoff at cell widths
// of order 0.25.
constexpr double kGx[7] = {0.0,
                           0.4058451513773972,  -0.4058451513773972,
                           0.7415311855993945,  -0.7415311855993945,
                           0.9491079123427585,  -0.9491079123427585};
constexpr double kGw[7] = {0.4179591836734694, 0.3818300505051189, 0.3818300505051189,
                           0.2797053914892766, 0.2797053914892766, 0.1294849661688697,
                           0.1294849661688697};

double gauss7(const PiecewiseFn& f, double a, double b) {
  if (!(b > a)) return 0.0;
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0;
  for (int i = 0; i < 7; ++i) acc += kGw[i] * f.eval(mid + half * kGx[i], +1);
  return acc * half;
}

}  // namespace

struct CumulativeDensity::Impl {
  PiecewiseFn density;
  double t_start = 0;
  double t_end = 0;
  double slope_below = 1.0;
  double slope_above = 1.0;
  std::vector<double> nodes;  // cell boundaries, nodes.front() == t_start
  std::vector<double> cum;    // cum[i] = P(nodes[i]), cum[0] == 0
  double min_cell = 0;
  double mean_cell = 0;
};

CumulativeDensity CumulativeDensity::build(const PiecewiseFn& density, double t_start,
                                           double t_end, double cell_hint) {
  if (!density.valid()) throw DomainError("cumulative map needs a density function");
  if (!(t_end > t_start)) throw DomainError("cumulative map needs a nonempty interval");
  auto impl = std::make_shared<Impl>();
  impl->density = density;
  impl->t_start = t_start;
  impl->t_end = t_end;

  const double span = t_end - t_start;
  double hint = std::max(cell_hint, span / 200000.0);
  std::vector<double> anchors = density.breakpoints(t_start, t_end);
  anchors.push_back(t_start);
  anchors.push_back(t_end);
  sort_unique(anchors);
  std::vector<double>& nodes = impl->nodes;
  for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
    double u = anchors[i], v = anchors[i + 1];
    int pieces = std::max(1, static_cast<int>(std::ceil((v - u) / hint)));
    for (int k = 0; k < pieces; ++k) nodes.push_back(u + (v - u) * k / pieces);
  }
  nodes.push_back(t_end);
  sort_unique(nodes);

  impl->cum.resize(nodes.size());
  impl->cum[0] = 0;
  double carry = 0;  // Kahan compensation
  double min_cell = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    double mass = density.integrate(nodes[i], nodes[i + 1], 1e-12);
    if (mass < -1e-10 * (1.0 + std::fabs(impl->cum[i])))
      throw DomainError("cumulative map density is negative");
    min_cell = std::min(min_cell, mass);
    double y = mass - carry;
    double s = impl->cum[i] + y;
    carry = (s - impl->cum[i]) - y;
    impl->cum[i + 1] = s;
  }
  impl->min_cell = min_cell;
  impl->mean_cell = impl->cum.back() / static_cast<double>(nodes.size() - 1);

  double d0 = density.eval(t_start, +1);
  impl->slope_below = (std::isfinite(d0) && d0 > 1e-12) ? d0 : 1.0;
  double d1 = density.eval(t_end, -1);
  impl->slope_above = (std::isfinite(d1) && d1 > 1e-12) ? d1 : 1.0;

  CumulativeDensity out;
  out.impl_ = std::move(impl);
  return out;
}

double CumulativeDensity::t_start() const { return impl_->t_start; }
double CumulativeDensity::t_end() const { return impl_->t_end; }
double CumulativeDensity::total() const { return impl_->cum.back(); }

bool CumulativeDensity::strictly_increasing() const {
  return impl_->min_cell > 1e-12 * impl_->mean_cell;
}

double CumulativeDensity::density_at(double t, int dir) const {
  const Impl& im = *impl_;
  if (t <= im.t_start) return im.slope_below;
  if (t >= im.t_end) return im.slope_above;
  return im.density.eval(t, dir);
}

double CumulativeDensity::value(double t) const {
  const Impl& im = *impl_;
  if (t <= im.t_start) return im.slope_below * (t - im.t_start);
  if (t >= im.t_end) return im.cum.back() + im.slope_above * (t - im.t_end);
  auto it = std::upper_bound(im.nodes.begin(), im.nodes.end(), t);
  std::size_t i = static_cast<std::size_t>(it - im.nodes.begin());
  i = (i == 0) ? 0 : i - 1;
  if (i + 1 >= im.nodes.size()) return im.cum.back();
  return im.cum[i] + gauss7(im.density, im.nodes[i], t);
}

double CumulativeDensity::inverse(double s) const {
  const Impl& im = *impl_;
  if (s <= 0) return im.t_start + s / im.slope_below;
  const double total = im.cum.back();
  if (s >= total) return im.t_end + (s - total) / im.slope_above;

  // Cell search; ties on flat stretches resolve to the leftmost cell end.
  auto it = std::upper_bound(im.cum.begin(), im.cum.end(), s);
  std::size_t i = static_cast<std::size_t>(it - im.cum.begin());
  i = (i == 0) ? 0 : i - 1;
  if (i + 1 >= im.nodes.size()) return im.t_end;
  double lo = im.nodes[i], hi = im.nodes[i + 1];
  double base = im.cum[i];
  double t = 0.5 * (lo + hi);
  for (int iter = 0; iter < 60; ++iter) {
    double g = base + gauss7(im.density, im.nodes[i], t) - s;
    if (g > 0)
      hi = t;
    else
      lo = t;
    if (hi - lo <= 1e-15 * std::max(1.0, std::fabs(hi))) break;
    double d = im.density.eval(t, +1);
    double step = (d > 1e-30) ? -g / d : 0.0;
    double cand = t + step;
    t = (cand > lo && cand < hi) ? cand : 0.5 * (lo + hi);
  }
  return t;
}

Rescaling build_rescaling(const DelayEquation& eq, double t_end, bool regularize,
                          double cell_hint) {
  if (eq.forcing) throw DomainError("time rescaling requires a homogeneous equation");
  if (eq.terms.empty()) throw DomainError("time rescaling needs at least one term");
  SignPattern signs = classify_signs(eq, t_end);
  if (!signs.all_nonnegative)
    throw DomainError("time rescaling requires nonnegative coefficients on the window");

  const double t0 = eq.t_start;
  std::vector<double> bps;
  for (const Term& term : eq.terms) {
    auto b = term.coefficient.breakpoints(t0, t_end);
    bps.insert(bps.end(), b.begin(), b.end());
    auto d = term.delay.breakpoints(t0, t_end);
    bps.insert(bps.end(), d.begin(), d.end());
  }
  sort_unique(bps);

  std::vector<PiecewiseFn> coefs;
  for (const Term& term : eq.terms) coefs.push_back(term.coefficient);
  auto density_fn = [coefs, regularize](double t, int dir) {
    double acc = regularize ? std::exp(-t) : 0.0;
    for (const PiecewiseFn& c : coefs) acc += c.eval(t, dir);
    return acc;
  };
  PiecewiseFn density = PiecewiseFn::from_callable(density_fn, bps, t0);

  Rescaling rs;
  rs.regularized = regularize;
  rs.map = CumulativeDensity::build(density, t0, t_end, cell_hint);
  if (!regularize && !rs.map.strictly_increasing())
    throw DomainError(
        "combined coefficient vanishes on an interval; rescale with regularization");
  rs.horizon_s = rs.map.total();

  const CumulativeDensity map = rs.map;
  std::vector<double> bps_s;
  bps_s.reserve(bps.size());
  for (double b : bps) bps_s.push_back(map.value(b));
  sort_unique(bps_s);

  rs.scaled.t_start = 0;
  for (const Term& term : eq.terms) {
    PiecewiseFn coef = term.coefficient;
    PiecewiseFn delay = term.delay;
    auto b_fn = [map, coef](double s, int dir) {
      double t = map.inverse(s);
      double rho = map.density_at(t, dir);
      double a = coef.eval(t, dir);
      return rho > 0 ? a / rho : 0.0;
    };
    auto l_fn = [map, delay](double s, int dir) {
      double t = map.inverse(s);
      double u = delay.eval(t, dir);
      return std::min(map.value(u), s);
    };
    Term scaled_term;
    scaled_term.coefficient = PiecewiseFn::from_callable(b_fn, bps_s, 0.0);
    scaled_term.delay = PiecewiseFn::from_callable(l_fn, bps_s, 0.0);
    rs.scaled.terms.push_back(std::move(scaled_term));
  }
  if (regularize) {
    // x' + sum a_k x(h_k) + e^{-t} x - e^{-t} x = 0 rescaled by the padded
    // density: an instantaneous pair that keeps the positive-part weights
    // summing to one while the negative half is integrable in s.
    auto reg_fn = [map](double s, int dir) {
      double t = map.inverse(s);
      double rho = map.density_at(t, dir);
      return rho > 0 ? std::exp(-t) / rho : 0.0;
    };
    auto neg_reg_fn = [reg_fn](double s, int dir) { return -reg_fn(s, dir); };
    PiecewiseFn identity = PiecewiseFn::from_expr(time_var(), 0.0);
    Term plus, minus;
    plus.coefficient = PiecewiseFn::from_callable(reg_fn, bps_s, 0.0);
    plus.delay = identity;
    minus.coefficient = PiecewiseFn::from_callable(neg_reg_fn, bps_s, 0.0);
    minus.delay = identity;
    rs.scaled.terms.push_back(std::move(plus));
    rs.scaled.terms.push_back(std::move(minus));
  }
  return rs;
}

double pullback_mismatch(const DelayEquation& eq, const InitialData& init,
                         const Rescaling& rs, double t_end, int samples) {
  const CumulativeDensity& map = rs.map;
  if (t_end > map.t_end() + 1e-9)
    throw DomainError("pullback window exceeds the rescaled horizon");

  StepControl ctrl;
  Trajectory direct = solve(eq, init, t_end, ctrl);

  InitialData init_s;
  init_s.t0 = map.value(init.t0);
  init_s.floor = map.value(init.floor);
  init_s.x0 = init.x0;
  PiecewiseFn phi = init.phi;
  double floor_t = init.floor;
  auto psi = [map, phi, floor_t](double s, int dir) {
    double u = std::max(map.inverse(s), floor_t);
    return phi.eval(u, dir);
  };
  init_s.phi = PiecewiseFn::from_callable(psi, {}, init_s.floor);

  double s_end = map.value(t_end);
  Trajectory scaled = solve(rs.scaled, init_s, s_end, ctrl);

  double worst = 0;
  for (int j = 1; j <= samples; ++j) {
    double tj = init.t0 + (t_end - init.t0) * j / samples;
    double sj = std::min(map.value(tj), s_end);
    worst = std::max(worst, std::fabs(direct.eval(tj) - scaled.eval(sj)));
  }
  return worst;
}

}  // namespace ddestab
