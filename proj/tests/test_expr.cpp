#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ddestab/expr.hpp"
#include "ddestab/piecewise.hpp"

using namespace ddestab;
namespace nums = std::numbers;

TEST_CASE("parses literals, constants and arithmetic") {
  CHECK(eval(*parse_expression("2 + 3*4"), 0.0) == doctest::Approx(14.0).epsilon(1e-15));
  CHECK(eval(*parse_expression("pi"), 0.0) == doctest::Approx(nums::pi).epsilon(1e-15));
  CHECK(eval(*parse_expression("e"), 0.0) == doctest::Approx(nums::e).epsilon(1e-15));
  CHECK(eval(*parse_expression("(2*t+1)^3"), 1.0) == doctest::Approx(27.0).epsilon(1e-15));
  CHECK(eval(*parse_expression("-t^2"), 2.0) == doctest::Approx(-4.0).epsilon(1e-15));
  CHECK(eval(*parse_expression("abs(0 - 3.5)"), 0.0) == doctest::Approx(3.5));
  CHECK(eval(*parse_expression("sin(t)^2 + cos(t)^2"), 1.3) == doctest::Approx(1.0));
  auto c = constant_value(*parse_expression("7"));
  REQUIRE(c.has_value());
  CHECK(*c == 7.0);
}

TEST_CASE("named parameters substitute before evaluation") {
  ParamTable params{{"alpha", 2.5}, {"tau", 0.5}};
  ExprPtr e = parse_expression("alpha*t - tau", params);
  CHECK(eval(*e, 3.0) == doctest::Approx(7.0).epsilon(1e-15));
  CHECK_THROWS_AS(parse_expression("beta*t", params), ParseError);
}

TEST_CASE("printing round-trips through the parser") {
  struct Case {
    const char* src;
    double lo, hi;
  };
  const Case sources[] = {
      {"sin(t)*cos(2*t) - exp(0-0.5*t)", 0.0, 10.0},
      {"abs(sin(t))", 0.0, 10.0},
      {"pw(2; [0,1): 1; [1,2): 0)", 0.0, 10.0},
      {"pw(0; [0,1): t; [1,3): 2 - t)", 0.0, 2.95},  // non-periodic: stay inside the base
      {"(2*t + 1)^3 / (t + 4)", 0.0, 10.0},
      {"1/t", 0.05, 10.0},
  };
  std::mt19937 rng(7);
  for (const auto& [src, lo, hi] : sources) {
    ExprPtr e1 = parse_expression(src);
    ExprPtr e2 = parse_expression(to_string(*e1));
    std::uniform_real_distribution<double> U(lo, hi);
    for (int i = 0; i < 200; ++i) {
      double t = U(rng);
      double a = eval(*e1, t);
      double b = eval(*e2, t);
      CAPTURE(src);
      CAPTURE(t);
      CHECK(b == doctest::Approx(a).epsilon(1e-12));
    }
  }
}

TEST_CASE("piecewise evaluation takes one-sided limits at boundaries") {
  ExprPtr e = parse_expression("pw(2; [0,1): 1; [1,2): 0)");
  CHECK(eval(*e, 1.0, +1) == 0.0);
  CHECK(eval(*e, 1.0, -1) == 1.0);
  // Period boundary: right limit re-enters the first segment.
  CHECK(eval(*e, 2.0, +1) == 1.0);
  CHECK(eval(*e, 2.0, -1) == 0.0);
}

TEST_CASE("periodic piecewise repeats exactly") {
  ExprPtr e = parse_expression("pw(2; [0,1): t; [1,2): 2-t)");
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(0.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    double t = U(rng);
    for (int k : {1, 3, 10}) {
      CHECK(eval(*e, t + 2.0 * k) == doctest::Approx(eval(*e, t)).epsilon(1e-12));
    }
  }
}

TEST_CASE("piecewise segments must tile the base interval") {
  CHECK_THROWS_AS(parse_expression("pw(2; [0,1): 1; [1.5,2): 0)"), ParseError);
  CHECK_THROWS_AS(parse_expression("pw(3; [0,1): 1; [1,2): 0)"), ParseError);  // period mismatch
  CHECK_THROWS_AS(parse_expression("pw(0; [1,0): 1)"), ParseError);           // empty segment
}

TEST_CASE("parse errors carry a source position") {
  try {
    parse_expression("2 + ");
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.position >= 3);
  }
  CHECK_THROWS_AS(parse_expression("sin()"), ParseError);
  CHECK_THROWS_AS(parse_expression("(2+3"), ParseError);
  CHECK_THROWS_AS(parse_expression("t^t"), ParseError);  // exponent must be constant
}

TEST_CASE("closed-form integrals are exact") {
  auto integral = [](const char* src, double a, double b) {
    auto v = closed_form_integral(*parse_expression(src), a, b);
    REQUIRE_MESSAGE(v.has_value(), src);
    return *v;
  };
  CHECK(integral("sin(t)", 0, nums::pi) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(integral("1/t", 1, nums::e) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(integral("(2*t+1)^3", 0, 1) == doctest::Approx(10.0).epsilon(1e-13));
  CHECK(integral("exp(0-2*t)", 0, 1) == doctest::Approx((1 - std::exp(-2.0)) / 2).epsilon(1e-13));
  CHECK(integral("pw(2; [0,1): 1; [1,2): 0)", 0, 7) == doctest::Approx(4.0).epsilon(1e-13));
}

TEST_CASE("integration splits at breakpoints and is additive") {
  PiecewiseFn f = PiecewiseFn::from_expr(parse_expression("abs(sin(t))"), 0.0);
  CHECK(f.integrate(0, 2 * nums::pi) == doctest::Approx(4.0).epsilon(1e-9));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(0.0, 20.0);
  for (int i = 0; i < 25; ++i) {
    double a = U(rng), b = U(rng);
    if (a > b) std::swap(a, b);
    double whole = f.integrate(0, b);
    double split = f.integrate(0, a) + f.integrate(a, b);
    CHECK(split == doctest::Approx(whole).epsilon(1e-9));
  }
}

TEST_CASE("breakpoints include kinks of abs arguments") {
  std::vector<double> pts;
  collect_breakpoints(*parse_expression("abs(sin(t))"), 0.5, 10.0, pts);
  sort_unique(pts);
  bool near_pi = false, near_2pi = false, near_3pi = false;
  for (double p : pts) {
    if (std::abs(p - nums::pi) < 1e-6) near_pi = true;
    if (std::abs(p - 2 * nums::pi) < 1e-6) near_2pi = true;
    if (std::abs(p - 3 * nums::pi) < 1e-6) near_3pi = true;
  }
  CHECK(near_pi);
  CHECK(near_2pi);
  CHECK(near_3pi);
}

TEST_CASE("singular denominators are guarded by the domain start") {
  PiecewiseFn f = PiecewiseFn::from_expr(parse_expression("1/t"), 1.0);
  CHECK(f.domain_start() == 1.0);
  CHECK(f.integrate(1, std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(f.integrate(0.5, 2.0), DomainError);
}

TEST_CASE("linear forms are recognized") {
  auto lf = linear_form(*parse_expression("t - 0.5"));
  REQUIRE(lf.has_value());
  CHECK(lf->slope == doctest::Approx(1.0));
  CHECK(lf->offset == doctest::Approx(-0.5));
  auto half = linear_form(*parse_expression("t/2"));
  REQUIRE(half.has_value());
  CHECK(half->slope == doctest::Approx(0.5));
  CHECK_FALSE(linear_form(*parse_expression("sin(t)")).has_value());
}

TEST_CASE("supremum estimation finds interior extrema") {
  PiecewiseFn f = PiecewiseFn::from_expr(parse_expression("sin(t)"), 0.0);
  SupResult s = f.sup_abs(0, 10);
  CHECK(s.value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(s.unbounded);

  auto g = [](double t) { return std::sin(t); };
  ExtremumEstimate hi = estimate_supremum(g, 0, 4, 1e-3);
  CHECK(hi.value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(hi.at - nums::pi / 2) < 1e-2);
  ExtremumEstimate lo = estimate_infimum(g, 0, 10, 1e-3);
  CHECK(lo.value == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("sort_unique merges near-duplicates") {
  std::vector<double> xs{1.0, 0.5, 1.0 + 1e-13, 0.5, 2.0};
  sort_unique(xs);
  REQUIRE(xs.size() == 3);
  CHECK(xs[0] == doctest::Approx(0.5));
  CHECK(xs[1] == doctest::Approx(1.0));
  CHECK(xs[2] == doctest::Approx(2.0));
}
