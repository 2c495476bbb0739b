#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "ddestab/model.hpp"
#include "ddestab/solver.hpp"
#include "ddestab/transform.hpp"

using namespace ddestab;

namespace {

DelayEquation make_eq(std::initializer_list<std::pair<const char*, const char*>> terms,
                      double t_start = 0.0) {
  DelayEquation eq;
  eq.t_start = t_start;
  for (const auto& [coef, delay] : terms) {
    Term tm;
    tm.coefficient = PiecewiseFn::from_expr(parse_expression(coef), t_start);
    tm.delay = PiecewiseFn::from_expr(parse_expression(delay), t_start);
    eq.terms.push_back(std::move(tm));
  }
  return eq;
}

const std::string kEqDir = DDESTAB_EQ_DIR;

}  // namespace

TEST_CASE("cumulative map is exact for a constant density") {
  DelayEquation eq = make_eq({{"2", "t - 1"}});
  Rescaling rs = build_rescaling(eq, 20.0);
  CHECK(rs.map.value(3.0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(rs.map.total() == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(rs.horizon_s == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(rs.map.strictly_increasing());
  for (double t = 0; t <= 20.0; t += 0.37)
    CHECK(std::abs(rs.map.inverse(rs.map.value(t)) - t) <= 1e-10);
  // The single rescaled term has unit coefficient and lag 2 in the new clock.
  for (double s = 0.5; s < 39.5; s += 1.3) {
    CHECK(rs.scaled.terms[0].coefficient.eval(s) == doctest::Approx(1.0).epsilon(1e-12));
    double lag = s - rs.scaled.terms[0].delay.eval(s);
    if (s >= 2.0) CHECK(lag == doctest::Approx(2.0).epsilon(1e-9));
  }
}

TEST_CASE("rescaled coefficients sum to one and delays never advance") {
  DelayEquation eq = make_eq({{"1", "t - 1"}, {"abs(sin(t)) + 0.1", "t - 2"}});
  Rescaling rs = build_rescaling(eq, 30.0);
  for (double s = 0.0; s < rs.horizon_s; s += rs.horizon_s / 257.0) {
    double sum = 0;
    for (const Term& tm : rs.scaled.terms) sum += tm.coefficient.eval(s);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (const Term& tm : rs.scaled.terms) CHECK(tm.delay.eval(s) <= s + 1e-12);
  }
}

TEST_CASE("clock lag equals the density mass over the original delay window") {
  DelayEquation eq = make_eq({{"1", "t - 1"}, {"abs(sin(t)) + 0.1", "t - 2"}});
  Rescaling rs = build_rescaling(eq, 30.0);
  for (double t = 2.5; t <= 29.5; t += 0.83) {
    double s = rs.map.value(t);
    for (std::size_t k = 0; k < eq.terms.size(); ++k) {
      double h = eq.terms[k].delay.eval(t);
      double direct = 0;
      for (const Term& tm : eq.terms) direct += tm.coefficient.integrate(h, t);
      double via_map = s - rs.scaled.terms[k].delay.eval(s);
      CHECK(via_map == doctest::Approx(direct).epsilon(1e-9));
    }
  }
}

TEST_CASE("pullback of the rescaled solution matches the original") {
  DelayEquation eq = make_eq({{"1", "t - 0.5"}});
  Rescaling rs = build_rescaling(eq, 20.0);
  double mismatch = pullback_mismatch(eq, zero_history(0.0), rs, 20.0);
  CHECK(mismatch <= 1e-4);
}

TEST_CASE("vanishing density requires regularization") {
  DelayEquation eq = make_eq({{"pw(2; [0,1): 1; [1,2): 0)", "t"}});
  CHECK_THROWS_AS(build_rescaling(eq, 20.0, false), DomainError);

  Rescaling rs = build_rescaling(eq, 20.0, true);
  CHECK(rs.regularized);
  CHECK(rs.map.strictly_increasing());
  REQUIRE(rs.scaled.terms.size() == 3);  // original + canceling instantaneous pair
  for (double s = 0.1; s < rs.horizon_s; s += rs.horizon_s / 101.0) {
    double positive_part = rs.scaled.terms[0].coefficient.eval(s) +
                           rs.scaled.terms[1].coefficient.eval(s);
    CHECK(positive_part == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rs.scaled.terms[2].coefficient.eval(s) ==
          doctest::Approx(-rs.scaled.terms[1].coefficient.eval(s)).epsilon(1e-12));
  }
  double mismatch = pullback_mismatch(eq, zero_history(0.0), rs, 20.0);
  CHECK(mismatch <= 1e-4);
}

TEST_CASE("proportional-delay equation rescales and pulls back accurately") {
  LoadedProblem lp = load_problem_file(kEqDir + "/two_proportional_delays.json");
  Rescaling rs = build_rescaling(lp.equation, 50.0);
  for (double s = 0.0; s < rs.horizon_s; s += rs.horizon_s / 129.0) {
    double sum = 0;
    for (const Term& tm : rs.scaled.terms) sum += tm.coefficient.eval(s);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  double mismatch = pullback_mismatch(lp.equation, zero_history(1.0), rs, 50.0);
  CHECK(mismatch <= 1e-4);
}
