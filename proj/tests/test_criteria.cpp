#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddestab/criteria.hpp"
#include "ddestab/model.hpp"

using namespace ddestab;
namespace nums = std::numbers;

namespace {

const std::string kEqDir = DDESTAB_EQ_DIR;

DelayEquation load_eq(const std::string& name, const ParamTable& overrides = {}) {
  return load_problem_file(kEqDir + "/" + name, overrides).equation;
}

DelayEquation one_over_t_ode() {
  return load_problem_json(R"({"t_start": 1, "terms": [{"coef": "1/t", "delay": "t"}]})")
      .equation;
}

const Verdict& find_check(const Report& r, const std::string& id) {
  for (const Verdict& v : r.checks)
    if (v.id == id) return v;
  REQUIRE_MESSAGE(false, ("missing check id " + id));
  return r.checks.front();
}

double evidence(const Verdict& v, const std::string& name) {
  const Evidence* e = v.find(name);
  REQUIRE_MESSAGE(e != nullptr, (v.id + " lacks evidence " + name));
  return e->value;
}

const HypothesisCheck* find_hyp(const Verdict& v, const std::string& name) {
  for (const HypothesisCheck& h : v.hypotheses)
    if (h.name == name) return &h;
  return nullptr;
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

}  // namespace

TEST_CASE("constant single delay: catalogue snapshot") {
  DelayEquation eq = load_eq("single_constant_delay.json");  // a = 1, lag 0.5
  CheckParams p;
  p.horizon = 200;
  Report r = run_all(eq, p);

  const char* expected_ids[] = {
      "positivity-integral",          "positivity-characteristic",
      "one-over-e-shift",             "one-plus-one-over-e-weighted",
      "one-plus-one-over-e-min-delay", "dominant-positive",
      "integrable-coefficients",      "ode-necessary",
  };
  REQUIRE(r.checks.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(r.checks[i].id == expected_ids[i]);

  const Verdict& pos = find_check(r, "positivity-integral");
  CHECK(pos.status == Status::Violated);
  CHECK(evidence(pos, "sup-delay-window-integral") == doctest::Approx(0.5).epsilon(1e-9));

  const Verdict& chr = find_check(r, "positivity-characteristic");
  CHECK(chr.status == Status::Violated);
  CHECK(evidence(chr, "lambda-star") == doctest::Approx(2 * std::log(2.0)).epsilon(1e-6));
  CHECK(evidence(chr, "max-gap") ==
        doctest::Approx(2 * std::log(2.0) - 2.0).epsilon(1e-6));

  const Verdict& shift = find_check(r, "one-over-e-shift");
  CHECK(shift.status == Status::Satisfied);
  CHECK(shift.conclusion == Conclusion::ExponentiallyStable);
  CHECK(evidence(shift, "weighted-shifted-integral") ==
        doctest::Approx(0.5 - 1.0 / nums::e).epsilon(1e-9));

  const Verdict& weighted = find_check(r, "one-plus-one-over-e-weighted");
  CHECK(weighted.status == Status::Satisfied);
  CHECK(weighted.conclusion == Conclusion::ExponentiallyStable);
  CHECK(evidence(weighted, "weighted-delay-integral") == doctest::Approx(0.5).epsilon(1e-9));

  const Verdict& mind = find_check(r, "one-plus-one-over-e-min-delay");
  CHECK(mind.conclusion == Conclusion::ExponentiallyStable);
  CHECK(evidence(mind, "min-delay-integral") == doctest::Approx(0.5).epsilon(1e-9));

  CHECK(find_check(r, "dominant-positive").status == Status::Inconclusive);
  CHECK(find_check(r, "integrable-coefficients").status == Status::Violated);

  const Verdict& ode = find_check(r, "ode-necessary");
  CHECK(ode.status == Status::Satisfied);
  CHECK(ode.conclusion == Conclusion::NoConclusion);  // delayed, so necessary-only
  CHECK(evidence(ode, "window-liminf") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(evidence(ode, "window-R") == doctest::Approx(1.0));

  CHECK(r.combined == Conclusion::ExponentiallyStable);
  bool shift_in_prov = false;
  for (const std::string& id : r.provenance)
    if (id == "one-over-e-shift") shift_in_prov = true;
  CHECK(shift_in_prov);
  CHECK(r.validation.all_passed());
}

TEST_CASE("positivity boundary at one over e") {
  CheckParams p;
  p.horizon = 100;
  DelayEquation inside = load_eq("single_constant_delay.json", {{"tau", 0.36}});
  Verdict vi = check_positivity_integral(inside, p);
  CHECK(vi.status == Status::Satisfied);
  CHECK(vi.conclusion == Conclusion::FundamentalPositive);

  Verdict vc = check_positivity_char(inside, p);
  CHECK(vc.status == Status::Satisfied);
  double lam = std::log(1.0 / 0.36) / 0.36;
  CHECK(evidence(vc, "max-gap") == doctest::Approx(lam - 1.0 / 0.36).epsilon(1e-6));

  DelayEquation outside = load_eq("single_constant_delay.json", {{"tau", 0.37}});
  CHECK(check_positivity_integral(outside, p).status == Status::Violated);
  CHECK(check_positivity_char(outside, p).status == Status::Violated);
}

TEST_CASE("half-wave rectified coefficient stays under 1 + 1/e at small gain") {
  CheckParams p;
  p.horizon = 400;
  DelayEquation eq = load_eq("half_wave_rectified.json");  // alpha = 0.3
  Verdict mind = check_one_plus_one_over_e_min_delay(eq, p);
  CHECK(mind.status == Status::Satisfied);
  CHECK(mind.conclusion == Conclusion::AsymptoticallyStable);
  CHECK(evidence(mind, "min-delay-integral") == doctest::Approx(1.2).epsilon(0.01 / 1.2));

  Verdict w = check_one_plus_one_over_e(eq, p);
  CHECK(w.status == Status::Satisfied);
  CHECK(w.conclusion == Conclusion::NoConclusion);  // density vanishes on half-periods

  Report r = run_all(eq, p);
  CHECK(r.combined == Conclusion::AsymptoticallyStable);

  DelayEquation hot = load_eq("half_wave_rectified.json", {{"alpha", 0.4}});
  Verdict bad = check_one_plus_one_over_e_min_delay(hot, p);
  CHECK(bad.status == Status::Violated);
  CHECK(evidence(bad, "min-delay-integral") == doctest::Approx(1.6).epsilon(0.01 / 1.6));
  CHECK(run_all(hot, p).combined == Conclusion::NoConclusion);
}

TEST_CASE("shift test requires a settled positive density") {
  CheckParams p;
  p.horizon = 400;
  Verdict shift = check_one_over_e_shift(load_eq("half_wave_rectified.json"), p);
  CHECK(shift.status == Status::Inconclusive);
  const HypothesisCheck* h = find_hyp(shift, "density-liminf-positive");
  REQUIRE(h != nullptr);
  CHECK_FALSE(h->passed);
  CHECK(h->finite_horizon_proxy);
}

TEST_CASE("proportional delays: weighted estimate near (alpha+beta) ln 2") {
  CheckParams p;
  p.horizon = 2000;
  DelayEquation eq = load_eq("two_proportional_delays.json");  // alpha 1.0, beta 0.9
  Report r = run_all(eq, p);
  const Verdict& w = find_check(r, "one-plus-one-over-e-weighted");
  CHECK(w.status == Status::Satisfied);
  CHECK(w.conclusion == Conclusion::ExponentiallyStable);
  double est = evidence(w, "weighted-delay-integral");
  CHECK(est >= 1.9 * std::log(2.0) - 0.005);
  CHECK(est <= 1.9 * std::log(2.0) + 0.005);
  // Route audit: unbounded proportional lags, divergent 1/t mass, positive a.e.
  CHECK(find_hyp(w, "density-integral-divergent")->passed);
  CHECK(find_hyp(w, "per-term-delay-integral-bounded")->passed);
  CHECK(find_hyp(w, "density-nonzero-ae")->passed);
  CHECK(w.find("rescaled-clock-rate") != nullptr);

  const Verdict& mind = find_check(r, "one-plus-one-over-e-min-delay");
  CHECK(mind.conclusion == Conclusion::AsymptoticallyStable);

  CHECK(r.combined == Conclusion::ExponentiallyStable);
  REQUIRE(r.provenance.size() == 1);
  CHECK(r.provenance[0] == "one-plus-one-over-e-weighted");

  DelayEquation hot =
      load_eq("two_proportional_delays.json", {{"alpha", 1.05}, {"beta", 0.95}});
  CHECK(check_one_plus_one_over_e(hot, p).status == Status::Violated);
}

TEST_CASE("dominant instantaneous part with exact dominance ratio") {
  CheckParams p;
  p.horizon = 500;
  DelayEquation eq = load_eq("dominant_instantaneous.json");  // 1/t and 0.5/t x(t/2)
  Verdict v = check_dominant_positive(eq, p);
  CHECK(v.status == Status::Satisfied);
  CHECK(v.conclusion == Conclusion::AsymptoticallyStable);
  CHECK(evidence(v, "dominance-ratio") == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(evidence(v, "index-set-size") == doctest::Approx(1.0));
  CHECK(find_hyp(v, "subequation-fundamental-positive")->passed);

  CheckParams swapped = p;
  swapped.index_set = {2};  // dominate by the delayed term instead: ratio flips to 2
  Verdict vs = check_dominant_positive(eq, swapped);
  CHECK(vs.status == Status::Violated);
  CHECK(evidence(vs, "dominance-ratio") == doctest::Approx(2.0).epsilon(1e-9));

  CheckParams bad = p;
  bad.index_set = {5};
  CHECK(check_dominant_positive(eq, bad).status == Status::Inconclusive);
}

TEST_CASE("integrable coefficients rule out asymptotic stability") {
  CheckParams p;
  p.horizon = 300;
  DelayEquation eq = load_eq("integrable_decay.json");  // exp(-t) x(t-1)
  Report r = run_all(eq, p);
  const Verdict& v = find_check(r, "integrable-coefficients");
  CHECK(v.status == Status::Satisfied);
  CHECK(v.conclusion == Conclusion::NotAsymptoticallyStable);
  CHECK(evidence(v, "total-integral") == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(evidence(v, "envelope-bound") == doctest::Approx(nums::e).epsilon(1e-6));
  CHECK(evidence(v, "half-floor-start") == doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-6));
  CHECK(evidence(v, "solutions-bounded") == doctest::Approx(1.0));
  CHECK(r.combined == Conclusion::NotAsymptoticallyStable);
  REQUIRE(r.provenance.size() == 1);
  CHECK(r.provenance[0] == "integrable-coefficients");
}

TEST_CASE("margin only widens acceptance, never conclusions from failed hypotheses") {
  DelayEquation eq = load_eq("single_constant_delay.json", {{"tau", 1.368}});
  CheckParams loose;
  loose.horizon = 100;
  loose.margin = 1e-2;
  CheckParams tight = loose;
  tight.margin = 1e-6;
  // Estimate 1.368 sits between threshold and threshold + 1e-2.
  CHECK(check_one_plus_one_over_e_min_delay(eq, loose).status == Status::Satisfied);
  CHECK(check_one_plus_one_over_e_min_delay(eq, tight).status == Status::Violated);
}

TEST_CASE("weighted estimate never exceeds the min-delay estimate") {
  CheckParams p;
  p.horizon = 400;
  for (const char* name : {"single_constant_delay.json", "two_proportional_delays.json",
                           "dominant_instantaneous.json", "perturbed_constant_delay.json"}) {
    DelayEquation eq = load_eq(name);
    double w = evidence(check_one_plus_one_over_e(eq, p), "weighted-delay-integral");
    double m = evidence(check_one_plus_one_over_e_min_delay(eq, p), "min-delay-integral");
    CAPTURE(name);
    CHECK(w <= m + 1e-9);
  }
}

TEST_CASE("decaying-coefficient instantaneous equation: asymptotic but not exponential") {
  CheckParams p;
  p.horizon = 1000;
  DelayEquation eq = one_over_t_ode();
  Report r = run_all(eq, p);
  CHECK(find_check(r, "ode-necessary").status == Status::Violated);
  CHECK(find_check(r, "one-plus-one-over-e-weighted").conclusion ==
        Conclusion::AsymptoticallyStable);
  CHECK(find_check(r, "one-plus-one-over-e-min-delay").conclusion ==
        Conclusion::AsymptoticallyStable);
  CHECK(r.combined == Conclusion::AsymptoticallyStable);
}

TEST_CASE("window liminf scan picks the first settling window length") {
  DelayEquation sw = load_eq("square_wave_ode.json");
  CheckParams p;
  p.horizon = 200;
  Verdict scan = check_ode_necessary(sw, p);
  CHECK(scan.status == Status::Satisfied);
  CHECK(scan.conclusion == Conclusion::ExponentiallyStable);
  CHECK(evidence(scan, "window-R") == doctest::Approx(2.0));
  CHECK(evidence(scan, "window-liminf") == doctest::Approx(1.0).epsilon(2e-3));

  CheckParams r1 = p;
  r1.window_R = 1.0;
  Verdict v1 = check_ode_necessary(sw, r1);
  CHECK(v1.status == Status::Inconclusive);
  CHECK(evidence(v1, "window-liminf") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(evidence(v1, "suggested-R") == doctest::Approx(2.0));
}

TEST_CASE("integrable perturbations keep a certified stable base stable") {
  CheckParams p;
  p.horizon = 300;
  DelayEquation full = load_eq("perturbed_constant_delay.json");
  Report r = run_all(full, p);
  const Verdict& v = find_check(r, "perturbation");
  CHECK(v.status == Status::Satisfied);
  CHECK(v.conclusion == Conclusion::ExponentiallyStable);
  CHECK(evidence(v, "extra-total-integral") == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(find_hyp(v, "base-exponentially-stable")->passed);

  // A non-integrable extra term cannot Violate; the test is only sufficient.
  DelayEquation base;
  base.t_start = 0;
  Term b;
  b.coefficient = PiecewiseFn::from_expr(parse_expression("1"), 0.0);
  b.delay = PiecewiseFn::from_expr(parse_expression("t - 0.5"), 0.0);
  base.terms.push_back(b);
  Term extra;
  extra.coefficient = PiecewiseFn::from_expr(parse_expression("0.1"), 0.0);
  extra.delay = PiecewiseFn::from_expr(parse_expression("t - 1"), 0.0);
  CHECK(check_perturbation(base, {extra}, p).status == Status::Inconclusive);
}

TEST_CASE("characteristic test degenerates cleanly for instantaneous equations") {
  DelayEquation eq =
      load_problem_json(R"({"t_start": 0, "terms": [{"coef": "2", "delay": "t"}]})").equation;
  CheckParams p;
  p.horizon = 100;
  Verdict v = check_positivity_char(eq, p);
  CHECK(v.status == Status::Satisfied);
  CHECK(v.conclusion == Conclusion::FundamentalPositive);
  CHECK(evidence(v, "lambda-star") == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(evidence(v, "max-gap") == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("conclusions always rest on satisfied status and passing hypotheses") {
  const char* files[] = {
      "square_wave_ode.json",      "half_wave_rectified.json",
      "two_proportional_delays.json", "dominant_instantaneous.json",
      "integrable_decay.json",     "single_constant_delay.json",
      "perturbed_constant_delay.json",
  };
  CheckParams p;
  p.horizon = 300;
  auto audit = [&](const DelayEquation& eq) {
    Report r = run_all(eq, p);
    int best = 0;
    for (const Verdict& v : r.checks) {
      if (v.conclusion != Conclusion::NoConclusion) {
        CHECK(v.status == Status::Satisfied);
        CHECK(v.hypotheses_ok());
      }
      best = std::max(best, rank(v.conclusion));
    }
    CHECK(rank(r.combined) == best);
    if (r.combined != Conclusion::NoConclusion) {
      CHECK_FALSE(r.provenance.empty());
      for (const std::string& id : r.provenance)
        CHECK(find_check(r, id).conclusion == r.combined);
    }
  };
  for (const char* f : files) {
    CAPTURE(f);
    audit(load_eq(f));
  }
  audit(one_over_t_ode());
}

TEST_CASE("report serializes to well-formed json") {
  DelayEquation eq = load_eq("single_constant_delay.json");
  CheckParams p;
  p.horizon = 100;
  Report r = run_all(eq, p);
  nlohmann::json j = nlohmann::json::parse(report_to_json(r));
  CHECK(j["combined"] == "ExponentiallyStable");
  CHECK(j["validation"]["all_passed"] == true);
  REQUIRE(j["checks"].is_array());
  CHECK(j["checks"][0]["id"] == "positivity-integral");
  CHECK(j["checks"][0]["evidence"].contains("sup-delay-window-integral"));
  REQUIRE(j["checks"][0]["hypotheses"].is_array());
}
