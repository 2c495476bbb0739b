// End-to-end acceptance suite: nine desk-scale scenarios, one [PASS]/[FAIL]
// line each. Exit code is the number of failed scenarios.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ddestab/criteria.hpp"
#include "ddestab/estimator.hpp"
#include "ddestab/model.hpp"
#include "ddestab/solver.hpp"
#include "ddestab/transform.hpp"

using namespace ddestab;
namespace nums = std::numbers;

namespace {

const std::string kEqDir = DDESTAB_EQ_DIR;
int g_failures = 0;

void report(int n, const char* label, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s — %s\n", ok ? "PASS" : "FAIL", n, label, detail.c_str());
  if (!ok) ++g_failures;
}

DelayEquation load_eq(const std::string& name, const ParamTable& overrides = {}) {
  return load_problem_file(kEqDir + "/" + name, overrides).equation;
}

DelayEquation single_term(const std::string& coef, const std::string& delay,
                          double t_start = 0.0) {
  DelayEquation eq;
  eq.t_start = t_start;
  Term tm;
  tm.coefficient = PiecewiseFn::from_expr(parse_expression(coef), t_start);
  tm.delay = PiecewiseFn::from_expr(parse_expression(delay), t_start);
  eq.terms.push_back(std::move(tm));
  return eq;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Square-wave instantaneous equation: fundamental matches the explicit
// exponential, the decay fit lands near 1/2, the K=e envelope holds for all
// computed (t, s) pairs, and the window-liminf scan separates R=1 from R=2.
void criterion_1() {
  auto t0 = std::chrono::steady_clock::now();
  DelayEquation eq = load_eq("square_wave_ode.json");
  PiecewiseFn a = eq.terms[0].coefficient;

  bool ok = true;
  char buf[160];

  std::vector<FundamentalSlice> slices;
  for (double s = 0.0; s < 39.0; s += 2.5) slices.push_back(fundamental(eq, s, 40.0));

  double worst_ode = 0;
  for (double t = 0; t <= 40.0; t += 0.05) {
    double expected = std::exp(-a.integrate(0.0, t));
    worst_ode = std::max(worst_ode, std::abs(slices[0].traj.eval(t) - expected));
  }
  if (worst_ode > 1e-8) ok = false;
  std::snprintf(buf, sizeof buf, "max |X - exp(-int a)| = %.2e", worst_ode);
  std::string detail = buf;

  DecayFit fit = fit_exponential(slices);
  if (!(fit.lambda >= 0.48 && fit.lambda <= 0.52)) ok = false;
  std::snprintf(buf, sizeof buf, ", lambda = %.4f", fit.lambda);
  detail += buf;

  bool envelope_ok = true;
  for (const FundamentalSlice& f : slices) {
    for (double t = f.s; t <= 40.0; t += 0.05) {
      double bound = nums::e * std::exp(-0.5 * (t - f.s));
      if (std::abs(f.traj.eval(t)) > bound * (1 + 1e-9)) envelope_ok = false;
    }
  }
  if (!envelope_ok) ok = false;
  detail += envelope_ok ? ", K=e envelope holds" : ", K=e envelope BROKEN";

  CheckParams p;
  p.horizon = 200;
  p.window_R = 1.0;
  Verdict v1 = check_ode_necessary(eq, p);
  p.window_R = 2.0;
  Verdict v2 = check_ode_necessary(eq, p);
  double lim1 = v1.find("window-liminf") ? v1.find("window-liminf")->value : -1;
  double lim2 = v2.find("window-liminf") ? v2.find("window-liminf")->value : -1;
  if (!(std::abs(lim1) <= 1e-9 && lim2 >= 1.0 - 2e-3)) ok = false;
  std::snprintf(buf, sizeof buf, ", liminf(R=1) = %.2e, liminf(R=2) = %.6f", lim1, lim2);
  detail += buf;

  double elapsed = seconds_since(t0);
  if (elapsed >= 5.0) ok = false;
  std::snprintf(buf, sizeof buf, ", %.2f s", elapsed);
  detail += buf;
  report(1, "square-wave instantaneous equation", ok, detail);
}

// 2. Half-wave rectified coefficient with lag pi: the 1+1/e evidence reads
// 4*alpha, small gain decays in the ensemble, large gain violates the bound.
void criterion_2() {
  CheckParams p;
  p.horizon = 400;
  DelayEquation eq = load_eq("half_wave_rectified.json");  // alpha = 0.3
  Verdict v = check_one_plus_one_over_e_min_delay(eq, p);
  bool ok = v.status == Status::Satisfied && v.conclusion == Conclusion::AsymptoticallyStable;
  double est = v.find("min-delay-integral") ? v.find("min-delay-integral")->value : -1;
  if (std::abs(est - 1.2) > 0.01) ok = false;

  std::vector<InitialData> inits = random_histories(5, 1234, 0.0, -nums::pi - 0.1);
  std::vector<Trajectory> runs = solve_ensemble(eq, inits, 500.0);
  double worst_tail = 0;
  for (const Trajectory& x : runs) worst_tail = std::max(worst_tail, x.tail_max_abs(490.0));
  if (worst_tail >= 1e-2) ok = false;

  DelayEquation hot = load_eq("half_wave_rectified.json", {{"alpha", 0.4}});
  Status hot_status = check_one_plus_one_over_e_min_delay(hot, p).status;
  if (hot_status != Status::Violated) ok = false;

  report(2, "half-wave rectified delay equation", ok,
         "evidence = " + std::to_string(est) + " (target 1.2), ensemble tail max = " +
             std::to_string(worst_tail) + ", alpha=0.4 " + to_string(hot_status));
}

// 3. Proportional delays with 1/t gain: weighted evidence near
// (alpha+beta) ln 2, exponential verdict, accurate clock pullback, and a
// violated bound once alpha + beta reaches 2.
void criterion_3() {
  CheckParams p;
  p.horizon = 2000;
  DelayEquation eq = load_eq("two_proportional_delays.json");  // alpha 1.0, beta 0.9
  Verdict v = check_one_plus_one_over_e(eq, p);
  double est = v.find("weighted-delay-integral") ? v.find("weighted-delay-integral")->value : -1;
  bool ok = v.status == Status::Satisfied && v.conclusion == Conclusion::ExponentiallyStable;
  if (std::abs(est - 1.9 * std::log(2.0)) > 0.005) ok = false;

  Rescaling rs = build_rescaling(eq, 50.0);
  double mismatch = pullback_mismatch(eq, zero_history(1.0), rs, 50.0);
  if (mismatch > 1e-4) ok = false;

  DelayEquation hot = load_eq("two_proportional_delays.json", {{"alpha", 1.05}, {"beta", 0.95}});
  Status hot_status = check_one_plus_one_over_e(hot, p).status;
  if (hot_status != Status::Violated) ok = false;

  report(3, "proportional delays with 1/t gain", ok,
         "evidence = " + std::to_string(est) + " (target 1.316980 +- 0.005), pullback mismatch = " +
             std::to_string(mismatch) + ", alpha+beta=2 " + to_string(hot_status));
}

// 4. Dominant instantaneous part: exact dominance ratio 1/2 and a decaying
// ensemble out to t = 10^4 under the default 1e-2 step cap.
void criterion_4() {
  auto t0 = std::chrono::steady_clock::now();
  CheckParams p;
  p.horizon = 1000;
  DelayEquation eq = load_eq("dominant_instantaneous.json");
  Verdict v = check_dominant_positive(eq, p);
  double ratio = v.find("dominance-ratio") ? v.find("dominance-ratio")->value : -1;
  bool ok = v.status == Status::Satisfied && std::abs(ratio - 0.5) <= 1e-9;

  EnsembleOutcome out = classify_runs(eq, random_histories(5, 77, 1.0, 0.4), 1e4);
  if (out.combined != DecayClass::Decaying) ok = false;

  double elapsed = seconds_since(t0);
  if (elapsed >= 60.0) ok = false;
  report(4, "dominant instantaneous part", ok,
         "ratio = " + std::to_string(ratio) + ", ensemble " + to_string(out.combined) +
             ", " + std::to_string(elapsed) + " s (budget 60)");
}

// 5. Integrable coefficient: bounded but not asymptotically stable; the
// fundamental slice from t0 = 2 never drops below 1/2 and fits as
// non-decaying.
void criterion_5() {
  CheckParams p;
  p.horizon = 300;
  DelayEquation eq = load_eq("integrable_decay.json");
  Verdict v = check_integrable(eq, p);
  bool ok =
      v.status == Status::Satisfied && v.conclusion == Conclusion::NotAsymptoticallyStable;

  FundamentalSlice f = fundamental(eq, 2.0, 50.0);
  double floor_seen = 1e300;
  for (double t = 2.0; t <= 50.0; t += 0.05) floor_seen = std::min(floor_seen, f.traj.eval(t));
  if (floor_seen < 0.5) ok = false;

  DecayClass cls = classify(f.traj, 50.0);
  DecayFit fit = fit_exponential(f.traj, 2.0, 50.0);
  if (cls != DecayClass::Bounded || fit.decaying) ok = false;

  report(5, "integrable coefficient keeps the fundamental above 1/2", ok,
         "min X(t,2) = " + std::to_string(floor_seen) + ", classify = " + to_string(cls) +
             ", fit decaying = " + (fit.decaying ? "yes" : "no"));
}

// 6. Representation formula: forced instantaneous equation against
// 1 - exp(-t), and the unit-delay equation against hand method-of-steps
// values with a small representation residual.
void criterion_6() {
  DelayEquation forced = single_term("1", "t");
  forced.forcing = PiecewiseFn::from_expr(parse_expression("1"), 0.0);
  InitialData init = zero_history(0.0);
  init.x0 = 0.0;
  Trajectory x = solve(forced, init, 10.0);
  double worst = 0;
  for (double t = 0; t <= 10.0; t += 0.05)
    worst = std::max(worst, std::abs(x.eval(t) - (1.0 - std::exp(-t))));
  double res_forced = representation_residual(forced, init, 10.0);
  bool ok = worst <= 1e-6 && res_forced <= 1e-6;

  DelayEquation unit = single_term("1", "t - 1");
  InitialData ones = constant_history(1.0, 1.0, 0.0);
  Trajectory y = solve(unit, ones, 4.0);
  double res_unit = representation_residual(unit, ones, 4.0);
  if (std::abs(y.eval(1.0)) > 1e-8 || std::abs(y.eval(2.0) + 0.5) > 1e-8) ok = false;
  if (res_unit > 1e-5) ok = false;

  report(6, "representation formula", ok,
         "forced residual = " + std::to_string(res_forced) + ", unit-delay residual = " +
             std::to_string(res_unit) + ", x(1) = " + std::to_string(y.eval(1.0)) +
             ", x(2) = " + std::to_string(y.eval(2.0)));
}

// 7. Positivity suite: randomized equations under the 1/e window bound and
// under the characteristic bound keep a strictly positive fundamental
// function (20/20 each).
void criterion_7() {
  std::mt19937 rng(20260814);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  CheckParams p;
  p.horizon = 50;

  int pass_window = 0, pass_char = 0;
  const int n = 20;

  auto strictly_positive = [](const Trajectory& traj, double from, double to) {
    for (double t = from; t <= to; t += 0.02)
      if (traj.eval(t) <= 0) return false;
    return true;
  };

  for (int i = 0; i < n; ++i) {
    double tau = 0.2 + 1.3 * U(rng);
    double u = 0.5 + 0.45 * U(rng);
    double c = u / (nums::e * tau);
    double w = 0.3 + 2.7 * U(rng);
    char coef[128];
    std::snprintf(coef, sizeof coef, "%.12f*(0.6+0.4*sin(%.12f*t))", c, w);
    char delay[64];
    std::snprintf(delay, sizeof delay, "t - %.12f", tau);
    DelayEquation eq = single_term(coef, delay);
    if (check_positivity_integral(eq, p).status != Status::Satisfied) continue;
    if (strictly_positive(fundamental(eq, 0.0, 40.0).traj, 0.0, 40.0)) ++pass_window;
  }

  for (int i = 0; i < n; ++i) {
    double sigma = 0.1 + 0.9 * U(rng);
    double u = 0.4 + 0.5 * U(rng);
    double A = u / (nums::e * sigma);
    char coef[64], delay[64];
    std::snprintf(coef, sizeof coef, "%.12f", A);
    std::snprintf(delay, sizeof delay, "t - %.12f", sigma);
    DelayEquation eq = single_term(coef, delay);
    if (check_positivity_char(eq, p).status != Status::Satisfied) continue;
    if (strictly_positive(fundamental(eq, 0.0, 40.0).traj, 0.0, 40.0)) ++pass_char;
  }

  bool ok = pass_window == n && pass_char == n;
  report(7, "randomized positivity suite", ok,
         "window bound " + std::to_string(pass_window) + "/20, characteristic bound " +
             std::to_string(pass_char) + "/20");
}

// 8. Transform invariants on randomized nonnegative equations: rescaled
// weights sum to one everywhere and the pullback matches the direct solve.
void criterion_8() {
  std::mt19937 rng(8088);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int good_sum = 0, good_pullback = 0;
  const int n = 10;
  for (int i = 0; i < n; ++i) {
    DelayEquation eq;
    eq.t_start = 0.0;
    int m = 1 + (i % 2);
    for (int k = 0; k < m; ++k) {
      double c = 0.2 + 1.3 * U(rng);
      double w = 0.3 + 2.7 * U(rng);
      double tau = 0.1 + 1.9 * U(rng);
      char coef[128], delay[64];
      std::snprintf(coef, sizeof coef, "%.12f*(1+0.5*cos(%.12f*t))", c, w);
      std::snprintf(delay, sizeof delay, "t - %.12f", tau);
      Term tm;
      tm.coefficient = PiecewiseFn::from_expr(parse_expression(coef), 0.0);
      tm.delay = PiecewiseFn::from_expr(parse_expression(delay), 0.0);
      eq.terms.push_back(std::move(tm));
    }
    Rescaling rs = build_rescaling(eq, 30.0);
    double worst_sum = 0;
    for (int j = 0; j < 200; ++j) {
      double s = rs.horizon_s * (j + 0.5) / 200.0;
      double sum = 0;
      for (const Term& tm : rs.scaled.terms) sum += tm.coefficient.eval(s);
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
    if (worst_sum <= 1e-12) ++good_sum;
    if (pullback_mismatch(eq, zero_history(0.0), rs, 30.0) <= 1e-4) ++good_pullback;
  }
  bool ok = good_sum == n && good_pullback == n;
  report(8, "randomized transform invariants", ok,
         "unit weight sum " + std::to_string(good_sum) + "/10, pullback " +
             std::to_string(good_pullback) + "/10");
}

// 9. Soundness sweep over the constant-coefficient single-delay family:
// cells with a stability conclusion never grow, and cells failing the
// necessary window condition are never fitted as decaying.
void criterion_9() {
  CheckParams p;
  p.horizon = 200;
  p.grid.step = 5e-3;
  int stability_cells = 0, growing_cells = 0, violations = 0, ode_failed_cells = 0;
  for (int i = 0; i < 10; ++i) {
    double alpha = i * (2.0 / 9.0);  // includes alpha = 0
    for (int j = 0; j < 10; ++j) {
      double tau = 0.1 + j * (2.9 / 9.0);
      char coef[64], delay[64];
      std::snprintf(coef, sizeof coef, "%.12f", alpha);
      std::snprintf(delay, sizeof delay, "t - %.12f", tau);
      DelayEquation eq = single_term(coef, delay);
      Report r = run_all(eq, p);

      bool stability = false, ode_failed = false;
      for (const Verdict& v : r.checks) {
        if (v.conclusion == Conclusion::AsymptoticallyStable ||
            v.conclusion == Conclusion::ExponentiallyStable)
          stability = true;
        if (v.id == "ode-necessary" && v.status == Status::Violated) ode_failed = true;
      }
      if (stability) ++stability_cells;
      if (ode_failed) ++ode_failed_cells;

      EnsembleOutcome out =
          classify_runs(eq, random_histories(3, 900 + 10 * i + j, 0.0, -tau - 0.1), 80.0);
      if (out.combined == DecayClass::Growing) ++growing_cells;
      if (stability && out.combined == DecayClass::Growing) ++violations;

      if (ode_failed) {
        DecayFit fit = fit_exponential(fundamental(eq, 0.0, 80.0).traj, 0.0, 80.0);
        if (fit.decaying && fit.lambda > p.margin) ++violations;
      }
    }
  }
  bool ok = violations == 0 && stability_cells > 0 && ode_failed_cells > 0;
  report(9, "soundness sweep on the single-delay family", ok,
         std::to_string(stability_cells) + " stability cells, " +
             std::to_string(growing_cells) + " growing cells, " +
             std::to_string(ode_failed_cells) + " necessary-condition failures, " +
             std::to_string(violations) + " violations");
}

}  // namespace

int main() {
  using Fn = std::function<void()>;
  struct Entry {
    int n;
    const char* label;
    Fn fn;
  };
  const Entry entries[] = {
      {1, "square-wave instantaneous equation", criterion_1},
      {2, "half-wave rectified delay equation", criterion_2},
      {3, "proportional delays with 1/t gain", criterion_3},
      {4, "dominant instantaneous part", criterion_4},
      {5, "integrable coefficient keeps the fundamental above 1/2", criterion_5},
      {6, "representation formula", criterion_6},
      {7, "randomized positivity suite", criterion_7},
      {8, "randomized transform invariants", criterion_8},
      {9, "soundness sweep on the single-delay family", criterion_9},
  };
  for (const Entry& e : entries) {
    try {
      e.fn();
    } catch (const std::exception& ex) {
      report(e.n, e.label, false, std::string("exception: ") + ex.what());
    }
  }
  if (g_failures == 0)
    std::printf("acceptance: all 9 scenarios passed\n");
  else
    std::printf("acceptance: %d scenario(s) FAILED\n", g_failures);
  return g_failures;
}
