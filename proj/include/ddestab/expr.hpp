#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ddestab {

// Thrown by the expression parser; `position` is a byte offset into the source.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t pos);
  std::size_t position;
};

// Evaluation or integration outside the domain a function is defined on.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExprKind {
  Number,
  Time,
  Neg,
  Abs,
  Add,
  Sub,
  Mul,
  Div,
  Pow,  // constant exponent only
  Sin,
  Cos,
  Exp,
  Piecewise,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct PiecewiseSegment {
  double lo = 0;
  double hi = 0;  // half-open [lo, hi)
  ExprPtr body;
};

// Immutable expression tree over the time variable `t`.
struct Expr {
  ExprKind kind;
  double number = 0;                       // Number value, or Pow exponent
  ExprPtr lhs, rhs;                        // children (unary ops use lhs only)
  double period = 0;                       // Piecewise: 0 means non-periodic
  std::vector<PiecewiseSegment> segments;  // Piecewise: sorted by lo, contiguous
};

using ParamTable = std::unordered_map<std::string, double>;

// One-sided evaluation: dir >= 0 takes the right limit at a discontinuity
// (the default convention for half-open segments), dir < 0 the left limit.
double eval(const Expr& e, double t, int dir = +1);

ExprPtr parse_expression(std::string_view src);
ExprPtr parse_expression(std::string_view src, const ParamTable& params);

// Prints a form that parse_expression accepts; round-trips numerically.
std::string to_string(const Expr& e);

std::optional<double> constant_value(const Expr& e);

struct LinearForm {
  double slope = 0;
  double offset = 0;
};
std::optional<LinearForm> linear_form(const Expr& e);

// Exact integral over [a, b] when an antiderivative is known (polynomials,
// sin/cos/exp of linear arguments, powers of linear arguments including 1/t,
// and piecewise combinations of those); nullopt otherwise.
std::optional<double> closed_form_integral(const Expr& e, double a, double b);
bool has_closed_form(const Expr& e);

// Appends discontinuities and kinks of e within [a, b] to `out` (unsorted):
// piecewise segment boundaries (periodically unfolded) and sign changes of
// abs() arguments located by scan + bisection.
void collect_breakpoints(const Expr& e, double a, double b, std::vector<double>& out);

// Node constructors.
ExprPtr num(double v);
ExprPtr time_var();
ExprPtr unary(ExprKind k, ExprPtr a);
ExprPtr binary(ExprKind k, ExprPtr a, ExprPtr b);
ExprPtr pow_expr(ExprPtr base, double exponent);
ExprPtr piecewise(double period, std::vector<PiecewiseSegment> segments);

}  // namespace ddestab
