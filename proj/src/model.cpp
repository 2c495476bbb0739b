#include "ddestab/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ddestab {

// ---------------------------------------------------------------------------
// InitialData

double InitialData::history(double u) const {
  if (u >= t0) return x0;
  const double v = std::max(u, floor);
  return phi.eval(v, v >= t0 ? -1 : +1);
}

double InitialData::initial_scale() const {
  const SupResult s = phi.sup_abs(floor, t0);
  return std::max(std::fabs(x0), s.value);
}

InitialData zero_history(double t0) {
  InitialData d;
  d.phi = PiecewiseFn::from_callable([](double, int) { return 0.0; }, {}, -1e300);
  d.floor = t0 - 1.0;
  d.x0 = 1.0;
  d.t0 = t0;
  return d;
}

InitialData constant_history(double value, double x0, double t0) {
  InitialData d;
  d.phi = PiecewiseFn::from_callable([value](double, int) { return value; }, {}, -1e300);
  d.floor = t0 - 1.0;
  d.x0 = x0;
  d.t0 = t0;
  return d;
}

// ---------------------------------------------------------------------------
// Validation and sign classification

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

ValidationReport validate_equation(const DelayEquation& eq, double horizon,
                                   const GridSpec& grid, const InitialData* init) {
  ValidationReport rep;
  const double t0 = eq.t_start;
  const double span = horizon - t0;
  const double step = std::max(grid.step, span / 100000.0);

  {
    ValidationItem item{"coefficients-essentially-bounded", true, ""};
    for (std::size_t k = 0; k < eq.terms.size(); ++k) {
      SupResult s = eq.terms[k].coefficient.sup_abs(t0, horizon);
      if (s.unbounded || !std::isfinite(s.value)) {
        item.passed = false;
        item.detail += "term " + std::to_string(k + 1) + ": unbounded near t=" + fmt(s.at) + "; ";
      } else {
        item.detail += "sup|a_" + std::to_string(k + 1) + "| = " + fmt(s.value) + "; ";
      }
    }
    item.detail += "window [" + fmt(t0) + ", " + fmt(horizon) + "]";
    rep.items.push_back(std::move(item));
  }

  {
    ValidationItem item{"delays-lag-behind-time", true, ""};
    for (std::size_t k = 0; k < eq.terms.size(); ++k) {
      const PiecewiseFn& h = eq.terms[k].delay;
      double worst = -1e300, worst_t = t0;
      for (double t = t0; t <= horizon; t += step) {
        const double lag = h.eval(t) - t;
        if (lag > worst) {
          worst = lag;
          worst_t = t;
        }
      }
      if (worst > 1e-9 * std::max(1.0, std::fabs(worst_t))) {
        item.passed = false;
        item.detail += "term " + std::to_string(k + 1) + ": h(t) - t = " + fmt(worst) +
                       " > 0 at t=" + fmt(worst_t) + "; ";
      } else {
        item.detail += "max(h_" + std::to_string(k + 1) + "(t) - t) = " + fmt(worst) + "; ";
      }
    }
    rep.items.push_back(std::move(item));
  }

  {
    // Unbounded-growth spot check: h_k near the horizon must exceed h_k near
    // the mid-horizon (finite-horizon proxy for limsup h_k = +inf).
    ValidationItem item{"delays-grow-without-bound", true, ""};
    for (std::size_t k = 0; k < eq.terms.size(); ++k) {
      const PiecewiseFn& h = eq.terms[k].delay;
      auto window_max = [&](double c) {
        double m = -1e300;
        for (int j = 0; j < 32; ++j) {
          const double t = std::max(t0, c - j * step);
          m = std::max(m, h.eval(t));
        }
        return m;
      };
      const double far = window_max(horizon);
      const double mid = window_max(t0 + 0.5 * span);
      if (!(far > mid)) {
        item.passed = false;
        item.detail += "term " + std::to_string(k + 1) + ": h(H)=" + fmt(far) +
                       " does not exceed h(H/2)=" + fmt(mid) + "; ";
      } else {
        item.detail += "h_" + std::to_string(k + 1) + ": " + fmt(mid) + " -> " + fmt(far) + "; ";
      }
    }
    rep.items.push_back(std::move(item));
  }

  if (init) {
    ValidationItem item{"history-bounded", true, ""};
    const SupResult s = init->phi.sup_abs(init->floor, init->t0);
    if (s.unbounded || !std::isfinite(s.value)) {
      item.passed = false;
      item.detail = "history unbounded near t=" + fmt(s.at);
    } else {
      item.detail = "sup|phi| = " + fmt(s.value) + " on [" + fmt(init->floor) + ", " +
                    fmt(init->t0) + ")";
    }
    rep.items.push_back(std::move(item));
  }

  return rep;
}

SignPattern classify_signs(const DelayEquation& eq, double horizon, const GridSpec& grid) {
  SignPattern sp;
  const double t0 = eq.t_start;
  const double step = std::max(grid.step, (horizon - t0) / 200000.0);
  for (const Term& term : eq.terms) {
    const PiecewiseFn& a = term.coefficient;
    double min_v = 1e300;
    auto consider = [&](double t, int dir) {
      try {
        min_v = std::min(min_v, a.eval(t, dir));
      } catch (const DomainError&) {
      }
    };
    for (double t = t0; t <= horizon; t += step) consider(t, +1);
    consider(horizon, -1);
    for (double bp : a.breakpoints(t0, horizon)) {
      consider(bp, +1);
      consider(bp, -1);
    }
    sp.nonnegative.push_back(min_v >= -1e-14);
  }
  for (std::size_t k = 0; k < sp.nonnegative.size(); ++k)
    if (sp.nonnegative[k]) sp.index_set.push_back(static_cast<int>(k));
  sp.all_nonnegative = sp.index_set.size() == sp.nonnegative.size();
  return sp;
}

// ---------------------------------------------------------------------------
// JSON loading

LoadedProblem load_problem_json(const std::string& text, const ParamTable& overrides) {
  nlohmann::json j = nlohmann::json::parse(text);
  LoadedProblem out;

  if (j.contains("params")) {
    for (auto& [name, value] : j["params"].items()) {
      if (!value.is_number())
        throw std::runtime_error("parameter '" + name + "' must be a number");
      out.params[name] = value.get<double>();
    }
  }
  for (const auto& [name, value] : overrides) out.params[name] = value;

  out.equation.t_start = j.value("t_start", 0.0);
  const double t_start = out.equation.t_start;

  if (!j.contains("terms") || !j["terms"].is_array() || j["terms"].empty())
    throw std::runtime_error("equation file needs a nonempty 'terms' array");
  for (const auto& jt : j["terms"]) {
    Term term;
    term.coefficient = PiecewiseFn::from_expr(
        parse_expression(jt.at("coef").get<std::string>(), out.params), t_start);
    term.delay = PiecewiseFn::from_expr(
        parse_expression(jt.at("delay").get<std::string>(), out.params), t_start);
    out.equation.terms.push_back(std::move(term));
  }

  if (j.contains("forcing"))
    out.equation.forcing = PiecewiseFn::from_expr(
        parse_expression(j["forcing"].get<std::string>(), out.params), t_start);

  if (j.contains("history")) {
    const auto& jh = j["history"];
    InitialData init;
    init.t0 = jh.value("t0", t_start);
    init.floor = jh.value("floor", init.t0 - 100.0);
    init.x0 = jh.at("x0").get<double>();
    init.phi = PiecewiseFn::from_expr(
        parse_expression(jh.at("phi").get<std::string>(), out.params), init.floor);
    out.history = std::move(init);
  }

  return out;
}

LoadedProblem load_problem_file(const std::string& path, const ParamTable& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open equation file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_problem_json(ss.str(), overrides);
}

}  // namespace ddestab
