#include "ddestab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <utility>

#include "ddestab/expr.hpp"
#include "ddestab/piecewise.hpp"

namespace ddestab {

namespace {

double hermite_eval(const Knot& a, const Knot& b, double u) {
  const double h = b.t - a.t;
  if (h <= 0) return b.x;
  const double s = (u - a.t) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * a.x + h10 * h * a.dr + h01 * b.x + h11 * h * b.dl;
}

double hermite_deriv(const Knot& a, const Knot& b, double u) {
  const double h = b.t - a.t;
  if (h <= 0) return b.dl;
  const double s = (u - a.t) / h;
  const double s2 = s * s;
  const double h00p = 6 * s2 - 6 * s;
  const double h10p = 3 * s2 - 4 * s + 1;
  const double h01p = -6 * s2 + 6 * s;
  const double h11p = 3 * s2 - 2 * s;
  return (h00p * a.x + h01p * b.x) / h + h10p * a.dr + h11p * b.dl;
}

double rel_tol(double t) { return 1e-12 * std::max(1.0, std::fabs(t)); }

// Times t in (lo, hi] where fn(t) == target. Linear expressions are solved
// directly; otherwise a sign-change scan with bisection refinement is used.
void roots_hitting(const PiecewiseFn& fn, double target, double lo, double hi,
                   std::vector<double>& out) {
  if (!(hi > lo)) return;
  if (const ExprPtr& e = fn.expression(); e) {
    if (auto lf = linear_form(*e)) {
      if (lf->slope != 0.0) {
        double r = (target - lf->offset) / lf->slope;
        if (r > lo + rel_tol(lo) && r <= hi + rel_tol(hi)) out.push_back(std::min(r, hi));
      }
      return;
    }
  }
  const int n = 2048;
  double prev_t = lo;
  double prev_g;
  try {
    prev_g = fn.eval(lo, +1) - target;
  } catch (const DomainError&) {
    return;
  }
  for (int i = 1; i <= n; ++i) {
    double t = lo + (hi - lo) * i / n;
    double g = fn.eval(t, i == n ? -1 : +1) - target;
    if (std::isfinite(prev_g) && std::isfinite(g) && ((prev_g < 0 && g >= 0) || (prev_g > 0 && g <= 0))) {
      double a = prev_t, b = t, ga = prev_g;
      for (int it = 0; it < 80; ++it) {
        double m = 0.5 * (a + b);
        double gm = fn.eval(m, +1) - target;
        if ((ga < 0) == (gm < 0)) {
          a = m;
          ga = gm;
        } else {
          b = m;
        }
      }
      out.push_back(0.5 * (a + b));
    }
    prev_t = t;
    prev_g = g;
  }
}

struct StepResult {
  double x_next = 0;
  double d_left = 0;
  double residual = 0;
};

class Integrator {
 public:
  Integrator(const DelayEquation& eq, const InitialData& init, double T, const StepControl& ctrl)
      : eq_(eq), T_(T), ctrl_(ctrl) {
    traj_.init = init;
  }

  Trajectory run() {
    const double t0 = traj_.init.t0;
    if (!(T_ > t0)) throw SolverError("horizon must exceed the start time");
    build_mandatory();
    prov_active_ = false;
    Knot first;
    first.t = t0;
    first.x = traj_.init.x0;
    first.dl = 0;
    traj_.knots.push_back(first);
    traj_.knots.back().dr = field(t0, +1, first.x, t0);

    std::size_t mi = 0;
    double h_cur = std::min(ctrl_.max_step, T_ - t0);
    double t = t0;
    while (t < T_ - rel_tol(T_)) {
      const double skip_tol = std::max(rel_tol(t), 1e-10 * std::max(1.0, std::fabs(t)));
      while (mi < mandatory_.size() && mandatory_[mi] <= t + skip_tol) ++mi;
      double limit = (mi < mandatory_.size()) ? std::min(mandatory_[mi], T_) : T_;
      double h = std::min(h_cur, limit - t);
      for (;;) {
        double t_next = t + h;
        const double snap =
            std::max(4 * rel_tol(limit), 1e-10 * std::max(1.0, std::fabs(limit)));
        if (limit - t_next <= snap) t_next = limit;
        StepResult r = attempt(t, t_next);
        // Defect tolerance scales with the solution magnitude; on slivers left
        // by boundary snapping the defect estimate is pure roundoff, so accept.
        const double scale =
            1.0 + std::max(std::fabs(traj_.knots.back().x), std::fabs(r.x_next));
        bool ok = r.residual <= ctrl_.res_tol * scale;
        if (!ok && t_next - t <= 1e-9 * std::max(1.0, std::fabs(t))) ok = true;
        if (ok || !ctrl_.adaptive || h <= 2 * ctrl_.min_step) {
          if (!ok && ctrl_.adaptive) {
            std::ostringstream msg;
            msg << "step size underflow at t=" << t << " (step " << h << ", residual "
                << r.residual << "); the delay may vanish too fast for the local model";
            throw SolverError(msg.str());
          }
          commit(t_next, r);
          t = t_next;
          if (r.residual < ctrl_.res_tol * scale / 64)
            h_cur = std::min(ctrl_.max_step, 2 * h_cur);
          break;
        }
        h = std::max(0.5 * h, ctrl_.min_step);
      }
    }
    return std::move(traj_);
  }

 private:
  // Right-hand side x' = f(t) - sum_k a_k(t) x(h_k(t)); stage_t/stage_x give
  // the value to use when a delayed argument lands on the stage time itself.
  double field(double t, int dir, double stage_x, double stage_t) {
    double val = eq_.forcing ? eq_.forcing->eval(t, dir) : 0.0;
    for (const Term& term : eq_.terms) {
      double a = term.coefficient.eval(t, dir);
      if (a == 0.0) continue;
      val -= a * delayed_value(term, t, dir, stage_x, stage_t);
    }
    return val;
  }

  double delayed_value(const Term& term, double t, int dir, double stage_x, double stage_t) {
    double u = term.delay.eval(t, dir);
    int side = near_jump(u) ? approach_side(term, t, dir, u) : 0;
    return lookup(u, stage_t, stage_x, side);
  }

  // A delayed argument sitting exactly on a value jump of the past (the start
  // time, or a discontinuity of the history) must be read as the limit from
  // the side the stage approaches it, which is the stage direction composed
  // with the local monotonicity of the delay.
  bool near_jump(double u) const {
    if (jump_pts_.empty()) return false;
    const double tol = 4 * rel_tol(u);
    auto it = std::lower_bound(jump_pts_.begin(), jump_pts_.end(), u);
    if (it != jump_pts_.end() && *it - u <= tol) return true;
    return it != jump_pts_.begin() && u - *(it - 1) <= tol;
  }

  int approach_side(const Term& term, double t, int dir, double u) const {
    const double delta = 1e-6 * std::max(1.0, std::fabs(t));
    try {
      return u < term.delay.eval(t - dir * delta, +1) ? -1 : +1;
    } catch (const DomainError&) {
    }
    try {
      return term.delay.eval(t + dir * delta, +1) < u ? -1 : +1;
    } catch (const DomainError&) {
    }
    return +1;
  }

  // side: -1/+1 snaps u just below/above a nearby value jump so the correct
  // one-sided limit is read; 0 means no jump nearby.
  double lookup(double u, double stage_t, double stage_x, int side = 0) {
    if (std::fabs(u - stage_t) <= rel_tol(stage_t)) return stage_x;
    if (side != 0) u += side * 4 * rel_tol(u);
    const Knot& last = traj_.knots.back();
    if (u <= last.t) return traj_.eval(u);
    instep_ = true;
    if (prov_active_) {
      if (u >= prov1_.t) return prov1_.x;
      return hermite_eval(prov0_, prov1_, u);
    }
    return last.x + last.dr * (u - last.t);
  }

  StepResult attempt(double tn, double t_next) {
    const Knot last = traj_.knots.back();
    const double h = t_next - tn;
    const double xn = last.x;
    const double k1 = last.dr;  // equals field(tn, +1, xn, tn)
    prov_active_ = false;
    StepResult r;
    for (int pass = 0; pass < 2; ++pass) {
      instep_ = false;
      const double tm = tn + 0.5 * h;
      double k2 = field(tm, +1, xn + 0.5 * h * k1, tm);
      double k3 = field(tm, +1, xn + 0.5 * h * k2, tm);
      double k4 = field(t_next, -1, xn + h * k3, t_next);
      r.x_next = xn + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      if (!std::isfinite(r.x_next)) {
        std::ostringstream msg;
        msg << "solution magnitude overflow near t=" << t_next;
        throw OverflowError(msg.str());
      }
      r.d_left = field(t_next, -1, r.x_next, t_next);
      prov0_ = last;
      prov1_ = Knot{t_next, r.x_next, r.d_left, r.d_left};
      prov_active_ = true;
      if (!instep_) break;  // no in-step delayed lookups, corrector unnecessary
    }
    // Defect of the dense interpolant at the step midpoint.
    const double tm = tn + 0.5 * h;
    double xm = hermite_eval(prov0_, prov1_, tm);
    double dm = hermite_deriv(prov0_, prov1_, tm);
    double acc = dm - (eq_.forcing ? eq_.forcing->eval(tm, +1) : 0.0);
    for (const Term& term : eq_.terms) {
      double a = term.coefficient.eval(tm, +1);
      if (a == 0.0) continue;
      acc += a * delayed_value(term, tm, +1, xm, tm);
    }
    r.residual = std::fabs(acc);
    return r;
  }

  void commit(double t_next, const StepResult& r) {
    prov_active_ = false;
    Knot k;
    k.t = t_next;
    k.x = r.x_next;
    k.dl = r.d_left;
    k.dr = r.d_left;
    traj_.knots.push_back(k);
    if (is_mandatory(t_next)) traj_.knots.back().dr = field(t_next, +1, r.x_next, t_next);
    traj_.max_residual = std::max(traj_.max_residual, r.residual);
  }

  bool is_mandatory(double t) const {
    auto it = std::lower_bound(mandatory_.begin(), mandatory_.end(), t - rel_tol(t));
    return it != mandatory_.end() && std::fabs(*it - t) <= rel_tol(t);
  }

  // Step boundaries: structural breakpoints of every coefficient, delay and
  // the forcing, plus the images of solution kinks (start time, history
  // kinks, history floor) pushed forward through the delays to depth 4.
  void build_mandatory() {
    const double t0 = traj_.init.t0;
    const std::size_t cap = 20000;
    std::vector<double> pts;
    auto add_fn = [&](const PiecewiseFn& fn, double lo, double hi) {
      if (!fn.valid()) return;
      auto bps = fn.breakpoints(lo, hi);
      pts.insert(pts.end(), bps.begin(), bps.end());
    };
    for (const Term& term : eq_.terms) {
      add_fn(term.coefficient, t0, T_);
      add_fn(term.delay, t0, T_);
    }
    if (eq_.forcing) add_fn(*eq_.forcing, t0, T_);

    std::vector<double> frontier = pts;
    frontier.push_back(t0);
    jump_pts_.clear();
    jump_pts_.push_back(t0);
    if (traj_.init.phi.valid()) {
      frontier.push_back(traj_.init.floor);
      add_fn(traj_.init.phi, traj_.init.floor, t0);
      auto hb = traj_.init.phi.breakpoints(traj_.init.floor, t0);
      frontier.insert(frontier.end(), hb.begin(), hb.end());
      jump_pts_.insert(jump_pts_.end(), hb.begin(), hb.end());
      if (traj_.init.floor > -1e299) jump_pts_.push_back(traj_.init.floor);
    }
    sort_unique(jump_pts_);
    sort_unique(frontier);
    for (int depth = 0; depth < 4 && !frontier.empty() && pts.size() < cap; ++depth) {
      std::vector<double> found;
      for (double xi : frontier) {
        for (const Term& term : eq_.terms) {
          roots_hitting(term.delay, xi, std::max(xi, t0), T_, out_buffer_);
          found.insert(found.end(), out_buffer_.begin(), out_buffer_.end());
          out_buffer_.clear();
          if (found.size() + pts.size() > cap) break;
        }
        if (found.size() + pts.size() > cap) break;
      }
      sort_unique(found);
      // keep only genuinely new points to stop the frontier from cycling
      std::vector<double> fresh;
      for (double v : found) {
        auto it = std::lower_bound(pts.begin(), pts.end(), v - 1e-9);
        if (it == pts.end() || std::fabs(*it - v) > 1e-9) fresh.push_back(v);
      }
      std::sort(pts.begin(), pts.end());
      pts.insert(pts.end(), fresh.begin(), fresh.end());
      std::sort(pts.begin(), pts.end());
      frontier = std::move(fresh);
    }
    sort_unique(pts);
    mandatory_.clear();
    for (double v : pts)
      if (v > t0 + rel_tol(t0) && v < T_ - rel_tol(T_)) mandatory_.push_back(v);
  }

  const DelayEquation& eq_;
  double T_;
  StepControl ctrl_;
  Trajectory traj_;
  std::vector<double> mandatory_;
  std::vector<double> jump_pts_;
  std::vector<double> out_buffer_;
  bool prov_active_ = false;
  bool instep_ = false;
  Knot prov0_, prov1_;
};

}  // namespace

double Trajectory::eval(double u) const {
  if (knots.empty()) throw SolverError("trajectory has no nodes");
  const double t0 = knots.front().t;
  if (u < t0) return init.history(u);
  const double tend = knots.back().t;
  if (u >= tend) {
    if (u - tend <= 1e-9 * std::max(1.0, std::fabs(tend))) return knots.back().x;
    std::ostringstream msg;
    msg << "trajectory evaluated at t=" << u << " beyond its end " << tend;
    throw SolverError(msg.str());
  }
  auto it = std::upper_bound(knots.begin(), knots.end(), u,
                             [](double v, const Knot& k) { return v < k.t; });
  std::size_t i = static_cast<std::size_t>(it - knots.begin());
  i = (i == 0) ? 0 : i - 1;
  if (i + 1 >= knots.size()) return knots.back().x;
  return hermite_eval(knots[i], knots[i + 1], u);
}

double Trajectory::derivative(double u) const {
  if (knots.empty()) throw SolverError("trajectory has no nodes");
  const double t0 = knots.front().t;
  if (u < t0 || u >= knots.back().t) {
    if (std::fabs(u - knots.back().t) <= 1e-9 * std::max(1.0, std::fabs(u))) return knots.back().dl;
    throw SolverError("derivative requested outside the integrated range");
  }
  auto it = std::upper_bound(knots.begin(), knots.end(), u,
                             [](double v, const Knot& k) { return v < k.t; });
  std::size_t i = static_cast<std::size_t>(it - knots.begin());
  i = (i == 0) ? 0 : i - 1;
  if (i + 1 >= knots.size()) return knots.back().dl;
  return hermite_deriv(knots[i], knots[i + 1], u);
}

double Trajectory::tail_max_abs(double from) const {
  double best = 0;
  for (const Knot& k : knots)
    if (k.t >= from) best = std::max(best, std::fabs(k.x));
  return best;
}

void Trajectory::write_csv(std::ostream& os) const {
  os << "t,x\n";
  char buf[80];
  for (const Knot& k : knots) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", k.t, k.x);
    os << buf;
  }
}

Trajectory solve(const DelayEquation& eq, const InitialData& init, double T,
                 const StepControl& ctrl) {
  Integrator ig(eq, init, T, ctrl);
  return ig.run();
}

FundamentalSlice fundamental(const DelayEquation& eq, double s, double T,
                             const StepControl& ctrl) {
  // The kernel X(.,s) solves the homogeneous equation regardless of any
  // forcing on eq itself.
  DelayEquation hom = eq;
  hom.forcing.reset();
  FundamentalSlice out;
  out.s = s;
  out.traj = solve(hom, zero_history(s), T, ctrl);
  return out;
}

double representation_residual(const DelayEquation& eq, const InitialData& init, double T,
                               const StepControl& ctrl) {
  const double t0 = init.t0;
  Trajectory direct = solve(eq, init, T, ctrl);

  DelayEquation hom = eq;  // the kernel X(.,s) ignores forcing
  hom.forcing.reset();
  std::map<double, Trajectory> slices;
  auto slice_at = [&](double s) -> const Trajectory& {
    auto it = slices.find(s);
    if (it == slices.end()) it = slices.emplace(s, solve(hom, zero_history(s), T, ctrl)).first;
    return it->second;
  };
  auto X = [&](double t, double s) -> double {
    if (s > t) return 0.0;
    if (t - s <= 1e-12 * std::max(1.0, std::fabs(t))) return 1.0;
    return slice_at(s).eval(t);
  };
  auto phi_ext = [&](double u) -> double { return u < t0 ? init.history(u) : 0.0; };

  // Cut the s-integrals where a delayed argument crosses t0 and at
  // coefficient/forcing breakpoints; each piece is smooth enough for the
  // adaptive rule.
  std::vector<double> cuts;
  for (const Term& term : eq.terms) {
    roots_hitting(term.delay, t0, t0, T, cuts);
    auto b = term.coefficient.breakpoints(t0, T);
    cuts.insert(cuts.end(), b.begin(), b.end());
  }
  if (eq.forcing) {
    auto b = eq.forcing->breakpoints(t0, T);
    cuts.insert(cuts.end(), b.begin(), b.end());
  }
  sort_unique(cuts);

  double worst = 0;
  for (int j = 1; j <= 8; ++j) {
    const double tj = t0 + (T - t0) * j / 8.0;
    double val = X(tj, t0) * init.x0;

    auto hist_g = [&](double s) {
      double acc = 0;
      for (const Term& term : eq.terms) {
        double a = term.coefficient.eval(s, +1);
        if (a == 0.0) continue;
        acc += a * phi_ext(term.delay.eval(s, +1));
      }
      if (acc == 0.0) return 0.0;
      return X(tj, s) * acc;
    };
    auto force_g = [&](double s) { return X(tj, s) * eq.forcing->eval(s, +1); };

    std::vector<double> seg{t0, tj};
    for (double c : cuts)
      if (c > t0 && c < tj) seg.push_back(c);
    sort_unique(seg);
    for (std::size_t i = 0; i + 1 < seg.size(); ++i) {
      val -= adaptive_simpson(hist_g, seg[i], seg[i + 1], 2e-9);
      if (eq.forcing) val += adaptive_simpson(force_g, seg[i], seg[i + 1], 2e-9);
    }
    worst = std::max(worst, std::fabs(direct.eval(tj) - val));
  }
  return worst;
}

std::vector<Trajectory> solve_ensemble(const DelayEquation& eq,
                                       const std::vector<InitialData>& inits, double T,
                                       const StepControl& ctrl) {
  std::vector<Trajectory> out;
  out.reserve(inits.size());
  for (const InitialData& d : inits) out.push_back(solve(eq, d, T, ctrl));
  return out;
}

std::vector<InitialData> random_histories(int count, unsigned long long seed, double t0,
                                          double floor) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<InitialData> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    double base = -1.0 + 2.0 * U(rng);
    double amp = 0.25 + 1.5 * U(rng);
    double omega = 0.5 + 5.5 * U(rng);
    double phase = 2.0 * std::numbers::pi * U(rng);
    double jump = (i % 2 == 1) ? (U(rng) - 0.5) : 0.0;
    auto fn = [=](double u, int) { return base + amp * std::sin(omega * u + phase); };
    InitialData d;
    d.phi = PiecewiseFn::from_callable(fn, {}, floor);
    d.floor = floor;
    d.t0 = t0;
    d.x0 = fn(t0, 0) + jump;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace ddestab
