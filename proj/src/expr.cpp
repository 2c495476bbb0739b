#include "ddestab/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace ddestab {

ParseError::ParseError(const std::string& msg, std::size_t pos)
    : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}

// ---------------------------------------------------------------------------
// Node constructors

ExprPtr num(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Number;
  e->number = v;
  return e;
}

ExprPtr time_var() {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Time;
  return e;
}

ExprPtr unary(ExprKind k, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->lhs = std::move(a);
  return e;
}

ExprPtr binary(ExprKind k, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->lhs = std::move(a);
  e->rhs = std::move(b);
  return e;
}

ExprPtr pow_expr(ExprPtr base, double exponent) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Pow;
  e->lhs = std::move(base);
  e->number = exponent;
  return e;
}

ExprPtr piecewise(double period, std::vector<PiecewiseSegment> segments) {
  if (segments.empty()) throw std::invalid_argument("piecewise needs at least one segment");
  std::sort(segments.begin(), segments.end(),
            [](const PiecewiseSegment& x, const PiecewiseSegment& y) { return x.lo < y.lo; });
  const double scale = std::max({1.0, std::fabs(segments.front().lo), std::fabs(segments.back().hi)});
  const double tol = 1e-12 * scale;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!(segments[i].lo < segments[i].hi))
      throw std::invalid_argument("piecewise segment must satisfy lo < hi");
    if (i + 1 < segments.size()) {
      const double gap = segments[i + 1].lo - segments[i].hi;
      if (gap > tol) throw std::invalid_argument("piecewise segments leave a gap");
      if (gap < -tol) throw std::invalid_argument("piecewise segments overlap");
      // snap adjacent boundaries so lookups are unambiguous
      const double mid = 0.5 * (segments[i + 1].lo + segments[i].hi);
      segments[i].hi = mid;
      segments[i + 1].lo = mid;
    }
  }
  const double span = segments.back().hi - segments.front().lo;
  if (period != 0) {
    if (!(period > 0)) throw std::invalid_argument("piecewise period must be positive or zero");
    if (std::fabs(span - period) > tol)
      throw std::invalid_argument("piecewise period does not match the base interval length");
  }
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Piecewise;
  e->period = period;
  e->segments = std::move(segments);
  return e;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

// Folds t into the base interval of a periodic definition.
double fold_periodic(const Expr& e, double t, int dir) {
  const double lo0 = e.segments.front().lo;
  const double hiN = e.segments.back().hi;
  if (e.period <= 0) return t;
  double tau = t - std::floor((t - lo0) / e.period) * e.period;
  if (tau < lo0) tau += e.period;  // guard rounding
  if (tau >= hiN) tau -= e.period;
  if (dir < 0) {
    // Left limit exactly at a fold point belongs to the end of the base interval.
    const double tol = 1e-13 * std::max(1.0, std::fabs(t));
    if (std::fabs(tau - lo0) <= tol && t > lo0 + tol) tau = hiN;
  }
  return tau;
}

const PiecewiseSegment& select_segment(const Expr& e, double tau, int dir) {
  const auto& segs = e.segments;
  const double lo0 = segs.front().lo;
  const double hiN = segs.back().hi;
  const double tol = 1e-12 * std::max(1.0, std::fabs(tau));
  if (tau < lo0 - tol || tau > hiN + tol)
    throw DomainError("piecewise evaluated outside its domain at t=" + std::to_string(tau));
  // Last segment whose lo <= tau.
  std::size_t i = 0;
  {
    std::size_t lo = 0, hi = segs.size();
    while (lo + 1 < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (segs[mid].lo <= tau) lo = mid; else hi = mid;
    }
    i = lo;
  }
  if (dir < 0 && i > 0 && std::fabs(tau - segs[i].lo) <= tol) return segs[i - 1];
  if (dir >= 0 && std::fabs(tau - hiN) <= tol) return segs.back();  // closure at the top end
  return segs[i];
}

}  // namespace

double eval(const Expr& e, double t, int dir) {
  switch (e.kind) {
    case ExprKind::Number: return e.number;
    case ExprKind::Time: return t;
    case ExprKind::Neg: return -eval(*e.lhs, t, dir);
    case ExprKind::Abs: return std::fabs(eval(*e.lhs, t, dir));
    case ExprKind::Add: return eval(*e.lhs, t, dir) + eval(*e.rhs, t, dir);
    case ExprKind::Sub: return eval(*e.lhs, t, dir) - eval(*e.rhs, t, dir);
    case ExprKind::Mul: return eval(*e.lhs, t, dir) * eval(*e.rhs, t, dir);
    case ExprKind::Div: return eval(*e.lhs, t, dir) / eval(*e.rhs, t, dir);
    case ExprKind::Pow: return std::pow(eval(*e.lhs, t, dir), e.number);
    case ExprKind::Sin: return std::sin(eval(*e.lhs, t, dir));
    case ExprKind::Cos: return std::cos(eval(*e.lhs, t, dir));
    case ExprKind::Exp: return std::exp(eval(*e.lhs, t, dir));
    case ExprKind::Piecewise: {
      const double tau = fold_periodic(e, t, dir);
      const auto& seg = select_segment(e, tau, dir);
      return eval(*seg.body, tau, dir);
    }
  }
  throw std::logic_error("unreachable expression kind");
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Lexer {
  std::string_view src;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }
  bool eof() {
    skip_ws();
    return pos >= src.size();
  }
  char peek() {
    skip_ws();
    return pos < src.size() ? src[pos] : '\0';
  }
  bool accept(char c) {
    skip_ws();
    if (pos < src.size() && src[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c, const char* what) {
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "' " + what, pos);
  }

  // Lexes a decimal literal if one starts here; "2e" without exponent digits
  // lexes as 2 and leaves "e" for the identifier rule.
  std::optional<double> try_number() {
    skip_ws();
    std::size_t i = pos;
    auto digit = [&](std::size_t k) {
      return k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]));
    };
    if (!digit(i) && !(i < src.size() && src[i] == '.' && digit(i + 1))) return std::nullopt;
    std::size_t j = i;
    while (digit(j)) ++j;
    if (j < src.size() && src[j] == '.') {
      ++j;
      while (digit(j)) ++j;
    }
    if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
      std::size_t k = j + 1;
      if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
      if (digit(k)) {
        while (digit(k)) ++k;
        j = k;
      }
    }
    double v = 0;
    auto res = std::from_chars(src.data() + i, src.data() + j, v);
    if (res.ec != std::errc{}) throw ParseError("malformed number", i);
    pos = j;
    return v;
  }

  std::optional<std::string> try_ident() {
    skip_ws();
    std::size_t i = pos;
    auto alpha = [&](std::size_t k) {
      return k < src.size() &&
             (std::isalpha(static_cast<unsigned char>(src[k])) || src[k] == '_');
    };
    auto alnum = [&](std::size_t k) {
      return alpha(k) || (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k])));
    };
    if (!alpha(i)) return std::nullopt;
    std::size_t j = i + 1;
    while (alnum(j)) ++j;
    pos = j;
    return std::string(src.substr(i, j - i));
  }
};

struct Parser {
  Lexer lex;
  const ParamTable* params;

  ExprPtr parse() {
    auto e = expr();
    if (!lex.eof()) throw ParseError("unexpected trailing input", lex.pos);
    return e;
  }

  ExprPtr expr() {
    auto e = term();
    for (;;) {
      if (lex.accept('+')) e = binary(ExprKind::Add, e, term());
      else if (lex.accept('-')) e = binary(ExprKind::Sub, e, term());
      else return e;
    }
  }

  ExprPtr term() {
    auto e = factor();
    for (;;) {
      if (lex.accept('*')) e = binary(ExprKind::Mul, e, factor());
      else if (lex.accept('/')) e = binary(ExprKind::Div, e, factor());
      else return e;
    }
  }

  ExprPtr factor() {
    if (lex.accept('-')) return unary(ExprKind::Neg, factor());
    auto base = atom();
    if (lex.accept('^')) {
      std::size_t at = lex.pos;
      base = pow_expr(base, signed_number(at));
    }
    return base;
  }

  // A literal, 'pi'/'e', or a bound parameter name; optionally negated.
  double signed_number(std::size_t at) {
    bool neg = lex.accept('-');
    double v;
    if (auto n = lex.try_number()) {
      v = *n;
    } else if (auto id = lex.try_ident()) {
      if (*id == "pi") v = std::numbers::pi_v<double>;
      else if (*id == "e") v = std::numbers::e_v<double>;
      else if (params && params->count(*id)) v = params->at(*id);
      else throw ParseError("expected a number, got '" + *id + "'", at);
    } else {
      throw ParseError("expected a number", lex.pos);
    }
    return neg ? -v : v;
  }

  ExprPtr atom() {
    std::size_t at = lex.pos;
    if (auto n = lex.try_number()) return num(*n);
    if (lex.accept('(')) {
      auto e = expr();
      lex.expect(')', "to close parenthesis");
      return e;
    }
    if (auto id = lex.try_ident()) {
      if (*id == "t") return time_var();
      if (*id == "pi") return num(std::numbers::pi_v<double>);
      if (*id == "e") return num(std::numbers::e_v<double>);
      if (*id == "sin" || *id == "cos" || *id == "exp" || *id == "abs") {
        lex.expect('(', ("after '" + *id + "'").c_str());
        auto arg = expr();
        lex.expect(')', "to close function argument");
        ExprKind k = *id == "sin"   ? ExprKind::Sin
                     : *id == "cos" ? ExprKind::Cos
                     : *id == "exp" ? ExprKind::Exp
                                    : ExprKind::Abs;
        return unary(k, arg);
      }
      if (*id == "pw") return pw(at);
      if (params && params->count(*id)) return num(params->at(*id));
      throw ParseError("unknown identifier '" + *id + "'", at);
    }
    throw ParseError("expected a number, 't', '(', a function, or 'pw'", at);
  }

  ExprPtr pw(std::size_t at) {
    lex.expect('(', "after 'pw'");
    double period = signed_number(lex.pos);
    std::vector<PiecewiseSegment> segs;
    while (lex.accept(';')) {
      PiecewiseSegment s;
      lex.expect('[', "to open interval");
      s.lo = signed_number(lex.pos);
      lex.expect(',', "between interval bounds");
      s.hi = signed_number(lex.pos);
      lex.expect(')', "to close half-open interval");
      lex.expect(':', "between interval and segment expression");
      s.body = expr();
      segs.push_back(std::move(s));
    }
    lex.expect(')', "to close 'pw'");
    try {
      return piecewise(period, std::move(segs));
    } catch (const std::invalid_argument& err) {
      throw ParseError(err.what(), at);
    }
  }
};

}  // namespace

ExprPtr parse_expression(std::string_view src, const ParamTable& params) {
  Parser p{Lexer{src, 0}, &params};
  return p.parse();
}

ExprPtr parse_expression(std::string_view src) {
  Parser p{Lexer{src, 0}, nullptr};
  return p.parse();
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

// Precedence levels: Add/Sub 1, Mul/Div 2, Neg 3, Pow 4, atoms 5.
int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Add:
    case ExprKind::Sub: return 1;
    case ExprKind::Mul:
    case ExprKind::Div: return 2;
    case ExprKind::Neg: return 3;
    case ExprKind::Pow: return 4;
    case ExprKind::Number: return e.number < 0 ? 3 : 5;
    default: return 5;
  }
}

void print(const Expr& e, int min_prec, std::string& out) {
  const bool parens = precedence(e) < min_prec;
  if (parens) out += '(';
  switch (e.kind) {
    case ExprKind::Number: out += format_double(e.number); break;
    case ExprKind::Time: out += 't'; break;
    case ExprKind::Neg:
      out += '-';
      print(*e.lhs, 3, out);
      break;
    case ExprKind::Abs:
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp: {
      out += e.kind == ExprKind::Abs   ? "abs"
             : e.kind == ExprKind::Sin ? "sin"
             : e.kind == ExprKind::Cos ? "cos"
                                       : "exp";
      out += '(';
      print(*e.lhs, 0, out);
      out += ')';
      break;
    }
    case ExprKind::Add:
      print(*e.lhs, 1, out);
      out += " + ";
      print(*e.rhs, 2, out);
      break;
    case ExprKind::Sub:
      print(*e.lhs, 1, out);
      out += " - ";
      print(*e.rhs, 2, out);
      break;
    case ExprKind::Mul:
      print(*e.lhs, 2, out);
      out += '*';
      print(*e.rhs, 3, out);
      break;
    case ExprKind::Div:
      print(*e.lhs, 2, out);
      out += '/';
      print(*e.rhs, 3, out);
      break;
    case ExprKind::Pow:
      print(*e.lhs, 5, out);
      out += '^';
      out += format_double(e.number);
      break;
    case ExprKind::Piecewise: {
      out += "pw(";
      out += format_double(e.period);
      for (const auto& s : e.segments) {
        out += "; [";
        out += format_double(s.lo);
        out += ", ";
        out += format_double(s.hi);
        out += "): ";
        print(*s.body, 0, out);
      }
      out += ')';
      break;
    }
  }
  if (parens) out += ')';
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Structural analysis

std::optional<double> constant_value(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Number: return e.number;
    case ExprKind::Time: return std::nullopt;
    case ExprKind::Neg:
      if (auto v = constant_value(*e.lhs)) return -*v;
      return std::nullopt;
    case ExprKind::Abs:
      if (auto v = constant_value(*e.lhs)) return std::fabs(*v);
      return std::nullopt;
    case ExprKind::Sin:
      if (auto v = constant_value(*e.lhs)) return std::sin(*v);
      return std::nullopt;
    case ExprKind::Cos:
      if (auto v = constant_value(*e.lhs)) return std::cos(*v);
      return std::nullopt;
    case ExprKind::Exp:
      if (auto v = constant_value(*e.lhs)) return std::exp(*v);
      return std::nullopt;
    case ExprKind::Pow:
      if (auto v = constant_value(*e.lhs)) return std::pow(*v, e.number);
      return std::nullopt;
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::Div: {
      auto a = constant_value(*e.lhs);
      auto b = constant_value(*e.rhs);
      if (!a || !b) return std::nullopt;
      switch (e.kind) {
        case ExprKind::Add: return *a + *b;
        case ExprKind::Sub: return *a - *b;
        case ExprKind::Mul: return *a * *b;
        default: return *a / *b;
      }
    }
    case ExprKind::Piecewise: return std::nullopt;
  }
  return std::nullopt;
}

std::optional<LinearForm> linear_form(const Expr& e) {
  if (auto c = constant_value(e)) return LinearForm{0, *c};
  switch (e.kind) {
    case ExprKind::Time: return LinearForm{1, 0};
    case ExprKind::Neg:
      if (auto f = linear_form(*e.lhs)) return LinearForm{-f->slope, -f->offset};
      return std::nullopt;
    case ExprKind::Add:
    case ExprKind::Sub: {
      auto a = linear_form(*e.lhs);
      auto b = linear_form(*e.rhs);
      if (!a || !b) return std::nullopt;
      const double s = e.kind == ExprKind::Add ? 1.0 : -1.0;
      return LinearForm{a->slope + s * b->slope, a->offset + s * b->offset};
    }
    case ExprKind::Mul: {
      if (auto c = constant_value(*e.lhs)) {
        if (auto f = linear_form(*e.rhs)) return LinearForm{*c * f->slope, *c * f->offset};
      }
      if (auto c = constant_value(*e.rhs)) {
        if (auto f = linear_form(*e.lhs)) return LinearForm{*c * f->slope, *c * f->offset};
      }
      return std::nullopt;
    }
    case ExprKind::Div: {
      if (auto c = constant_value(*e.rhs)) {
        if (*c == 0) return std::nullopt;
        if (auto f = linear_form(*e.lhs)) return LinearForm{f->slope / *c, f->offset / *c};
      }
      return std::nullopt;
    }
    default: return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Closed-form integration

namespace {

std::optional<double> integral_impl(const Expr& e, double a, double b);

// Iterates occurrences of piecewise segments intersecting [a, b]; fn receives
// the segment body and the folded subinterval. Returns false if any piece has
// no closed form.
bool fold_piecewise_integral(const Expr& e, double a, double b, double& acc) {
  const double lo0 = e.segments.front().lo;
  const double hiN = e.segments.back().hi;
  auto add_piece =
      [&](const PiecewiseSegment& seg, double x1, double x2, double shift) -> bool {
    const double lo = std::max(x1, seg.lo + shift);
    const double hi = std::min(x2, seg.hi + shift);
    if (hi <= lo) return true;
    auto piece = integral_impl(*seg.body, lo - shift, hi - shift);
    if (!piece) return false;
    acc += *piece;
    return true;
  };
  if (e.period > 0) {
    const double T = e.period;
    double k0 = std::floor((a - lo0) / T);
    for (double k = k0;; k += 1) {
      const double shift = k * T;
      if (lo0 + shift >= b) break;
      for (const auto& seg : e.segments)
        if (!add_piece(seg, a, b, shift)) return false;
    }
    return true;
  }
  const double tol = 1e-12 * std::max({1.0, std::fabs(a), std::fabs(b)});
  if (a < lo0 - tol || b > hiN + tol) return false;  // out of domain; quadrature will report
  for (const auto& seg : e.segments)
    if (!add_piece(seg, std::max(a, lo0), std::min(b, hiN), 0.0)) return false;
  return true;
}

std::optional<double> power_of_linear_integral(const LinearForm& L, double p, double a,
                                               double b) {
  const double La = L.slope * a + L.offset;
  const double Lb = L.slope * b + L.offset;
  if (L.slope == 0) return std::pow(L.offset, p) * (b - a);
  if (p == -1) {
    if (La == 0 || Lb == 0 || (La < 0) != (Lb < 0)) return std::nullopt;  // pole inside
    return std::log(std::fabs(Lb / La)) / L.slope;
  }
  const bool integer_p = p == std::floor(p);
  if (!integer_p && (La < 0 || Lb < 0)) return std::nullopt;
  if (integer_p && p < 0 && ((La < 0) != (Lb < 0) || La == 0 || Lb == 0)) return std::nullopt;
  return (std::pow(Lb, p + 1) - std::pow(La, p + 1)) / (L.slope * (p + 1));
}

std::optional<double> integral_impl(const Expr& e, double a, double b) {
  if (a == b) return 0.0;
  if (auto c = constant_value(e)) return *c * (b - a);
  switch (e.kind) {
    case ExprKind::Number: return e.number * (b - a);
    case ExprKind::Time: return 0.5 * (b * b - a * a);
    case ExprKind::Neg:
      if (auto v = integral_impl(*e.lhs, a, b)) return -*v;
      return std::nullopt;
    case ExprKind::Add:
    case ExprKind::Sub: {
      auto u = integral_impl(*e.lhs, a, b);
      auto v = integral_impl(*e.rhs, a, b);
      if (!u || !v) return std::nullopt;
      return e.kind == ExprKind::Add ? *u + *v : *u - *v;
    }
    case ExprKind::Mul: {
      if (auto c = constant_value(*e.lhs)) {
        if (auto v = integral_impl(*e.rhs, a, b)) return *c * *v;
        return std::nullopt;
      }
      if (auto c = constant_value(*e.rhs)) {
        if (auto v = integral_impl(*e.lhs, a, b)) return *c * *v;
        return std::nullopt;
      }
      return std::nullopt;
    }
    case ExprKind::Div: {
      if (auto c = constant_value(*e.rhs)) {
        if (*c == 0) return std::nullopt;
        if (auto v = integral_impl(*e.lhs, a, b)) return *v / *c;
        return std::nullopt;
      }
      if (auto c = constant_value(*e.lhs)) {
        if (auto L = linear_form(*e.rhs)) {
          if (auto v = power_of_linear_integral(*L, -1.0, a, b)) return *c * *v;
        }
      }
      return std::nullopt;
    }
    case ExprKind::Pow: {
      if (auto L = linear_form(*e.lhs)) return power_of_linear_integral(*L, e.number, a, b);
      return std::nullopt;
    }
    case ExprKind::Sin: {
      auto L = linear_form(*e.lhs);
      if (!L) return std::nullopt;
      if (L->slope == 0) return std::sin(L->offset) * (b - a);
      return (std::cos(L->slope * a + L->offset) - std::cos(L->slope * b + L->offset)) /
             L->slope;
    }
    case ExprKind::Cos: {
      auto L = linear_form(*e.lhs);
      if (!L) return std::nullopt;
      if (L->slope == 0) return std::cos(L->offset) * (b - a);
      return (std::sin(L->slope * b + L->offset) - std::sin(L->slope * a + L->offset)) /
             L->slope;
    }
    case ExprKind::Exp: {
      auto L = linear_form(*e.lhs);
      if (!L) return std::nullopt;
      if (L->slope == 0) return std::exp(L->offset) * (b - a);
      return (std::exp(L->slope * b + L->offset) - std::exp(L->slope * a + L->offset)) /
             L->slope;
    }
    case ExprKind::Abs: return std::nullopt;
    case ExprKind::Piecewise: {
      double acc = 0;
      if (fold_piecewise_integral(e, a, b, acc)) return acc;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> closed_form_integral(const Expr& e, double a, double b) {
  if (a <= b) return integral_impl(e, a, b);
  auto v = integral_impl(e, b, a);
  if (!v) return std::nullopt;
  return -*v;
}

bool has_closed_form(const Expr& e) {
  if (constant_value(e)) return true;
  switch (e.kind) {
    case ExprKind::Number:
    case ExprKind::Time: return true;
    case ExprKind::Neg: return has_closed_form(*e.lhs);
    case ExprKind::Add:
    case ExprKind::Sub: return has_closed_form(*e.lhs) && has_closed_form(*e.rhs);
    case ExprKind::Mul:
      return (constant_value(*e.lhs) && has_closed_form(*e.rhs)) ||
             (constant_value(*e.rhs) && has_closed_form(*e.lhs));
    case ExprKind::Div:
      return (constant_value(*e.rhs) && has_closed_form(*e.lhs)) ||
             (constant_value(*e.lhs) && linear_form(*e.rhs).has_value());
    case ExprKind::Pow: return linear_form(*e.lhs).has_value();
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp: return linear_form(*e.lhs).has_value();
    case ExprKind::Abs: return false;
    case ExprKind::Piecewise:
      return std::all_of(e.segments.begin(), e.segments.end(),
                         [](const PiecewiseSegment& s) { return has_closed_form(*s.body); });
  }
  return false;
}

// ---------------------------------------------------------------------------
// Breakpoints

namespace {

// Scan step for locating kinks of abs(): absolute so that results over a small
// window are reproduced over any enclosing window.
constexpr double kAbsScanStep = 1.0 / 64.0;
constexpr double kMaxScanSamples = 4e6;

void scan_abs_kinks(const Expr& arg, double a, double b, std::vector<double>& out) {
  if (b <= a) return;
  double step = kAbsScanStep;
  if ((b - a) / step > kMaxScanSamples) step = (b - a) / kMaxScanSamples;
  // Anchor the grid at multiples of `step` so enclosing windows resample the
  // same points (keeps breakpoint queries monotone in the window).
  double x0 = std::floor(a / step) * step;
  auto value = [&](double x) -> double {
    try {
      return eval(arg, x, +1);
    } catch (const DomainError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  double xp = std::max(a, x0);
  double vp = value(xp);
  for (double k = 1;; k += 1) {
    double x = x0 + k * step;
    if (x > b) x = b;
    const double v = value(x);
    if (std::isfinite(vp) && std::isfinite(v) && ((vp < 0 && v > 0) || (vp > 0 && v < 0))) {
      double lo = xp, hi = x, flo = vp;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = value(mid);
        if (!std::isfinite(fm)) break;
        if ((flo < 0) == (fm < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
        if (hi - lo < 1e-14 * std::max(1.0, std::fabs(hi))) break;
      }
      out.push_back(0.5 * (lo + hi));
    }
    if (x >= b) break;
    xp = x;
    vp = v;
  }
}

}  // namespace

void collect_breakpoints(const Expr& e, double a, double b, std::vector<double>& out) {
  if (b <= a) return;
  switch (e.kind) {
    case ExprKind::Number:
    case ExprKind::Time: return;
    case ExprKind::Neg:
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp:
    case ExprKind::Pow: collect_breakpoints(*e.lhs, a, b, out); return;
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::Div:
      collect_breakpoints(*e.lhs, a, b, out);
      collect_breakpoints(*e.rhs, a, b, out);
      return;
    case ExprKind::Abs:
      collect_breakpoints(*e.lhs, a, b, out);
      scan_abs_kinks(*e.lhs, a, b, out);
      return;
    case ExprKind::Piecewise: {
      std::vector<double> bounds;
      bounds.reserve(e.segments.size() + 1);
      for (const auto& s : e.segments) bounds.push_back(s.lo);
      bounds.push_back(e.segments.back().hi);

      std::vector<double> body_bps;  // kinks of bodies, in base-interval time
      for (const auto& s : e.segments) collect_breakpoints(*s.body, s.lo, s.hi, body_bps);
      bounds.insert(bounds.end(), body_bps.begin(), body_bps.end());

      if (e.period > 0) {
        const double T = e.period;
        for (double c : bounds) {
          double k0 = std::ceil((a - c) / T - 1e-12);
          for (double k = k0; c + k * T <= b + 1e-12; k += 1) {
            const double x = c + k * T;
            if (x >= a && x <= b) out.push_back(x);
            if (out.size() > 2'000'000)
              throw std::runtime_error("too many piecewise breakpoints in requested window");
          }
        }
      } else {
        for (double c : bounds)
          if (c >= a && c <= b) out.push_back(c);
      }
      return;
    }
  }
}

}  // namespace ddestab
