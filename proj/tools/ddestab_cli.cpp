// Command-line front end: loads an equation file, runs the stability checks
// or the numerical solver, and emits JSON reports / CSV trajectories.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddestab/criteria.hpp"
#include "ddestab/estimator.hpp"
#include "ddestab/model.hpp"
#include "ddestab/solver.hpp"

namespace {

using nlohmann::ordered_json;

struct CommonOpts {
  std::string equation_path;
  double horizon = 1000;
  double step = 1e-3;
  double margin = 1e-6;
  std::vector<std::string> params;
  std::string out_path;  // empty: stdout
};

ddestab::ParamTable parse_params(const std::vector<std::string>& kvs) {
  ddestab::ParamTable table;
  for (const std::string& kv : kvs) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw CLI::ValidationError("--param", "expected name=value, got '" + kv + "'");
    table[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
  }
  return table;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << text << "\n";
}

ordered_json fit_json(const ddestab::DecayFit& fit) {
  ordered_json j;
  j["decaying"] = fit.decaying;
  j["lambda"] = fit.lambda;
  j["K"] = fit.K;
  j["log_K"] = fit.log_K;
  j["r2"] = fit.r2;
  j["tail_ratio"] = fit.tail_ratio;
  j["window"] = {fit.window_lo, fit.window_hi};
  return j;
}

int run_check(const CommonOpts& common, const ddestab::CheckParams& params) {
  ddestab::LoadedProblem prob =
      ddestab::load_problem_file(common.equation_path, parse_params(common.params));
  ddestab::Report report = ddestab::run_all(prob.equation, params);
  emit(ddestab::report_to_json(report), common.out_path);
  return report.validation.all_passed() ? 0 : 2;
}

int run_simulate(const CommonOpts& common, int histories, unsigned long long seed,
                 double max_step, double res_tol, const std::string& csv_prefix) {
  ddestab::LoadedProblem prob =
      ddestab::load_problem_file(common.equation_path, parse_params(common.params));
  const double t0 = prob.equation.t_start;
  if (common.horizon <= t0)
    throw CLI::ValidationError("--horizon", "horizon must exceed the equation start time");

  std::vector<ddestab::InitialData> inits;
  if (histories > 0) {
    inits = ddestab::random_histories(histories, seed, t0, t0 - 100.0);
  } else if (prob.history) {
    inits.push_back(*prob.history);
  } else {
    inits.push_back(ddestab::zero_history(t0));
  }

  ddestab::StepControl ctrl;
  ctrl.max_step = max_step;
  ctrl.res_tol = res_tol;

  ordered_json j;
  j["equation"] = common.equation_path;
  j["horizon"] = common.horizon;
  j["seed"] = seed;
  ordered_json runs = ordered_json::array();
  bool all_decay = !inits.empty(), any_growing = false;
  double worst_residual = 0;
  for (std::size_t i = 0; i < inits.size(); ++i) {
    ordered_json rj;
    rj["run"] = i;
    ddestab::DecayClass cls;
    try {
      ddestab::Trajectory tr = ddestab::solve(prob.equation, inits[i], common.horizon, ctrl);
      worst_residual = std::max(worst_residual, tr.max_residual);
      cls = ddestab::classify(tr, common.horizon);
      rj["tail_max"] = tr.tail_max_abs(std::max(tr.t_begin(), 0.8 * common.horizon));
      rj["max_residual"] = tr.max_residual;
      if (!csv_prefix.empty()) {
        std::string path = csv_prefix + "_run" + std::to_string(i) + ".csv";
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write " + path);
        tr.write_csv(os);
        rj["csv"] = path;
      }
    } catch (const ddestab::OverflowError&) {
      cls = ddestab::DecayClass::Growing;
      rj["overflow"] = true;
    }
    rj["class"] = ddestab::to_string(cls);
    if (cls == ddestab::DecayClass::Growing) any_growing = true;
    if (cls != ddestab::DecayClass::Decaying) all_decay = false;
    runs.push_back(std::move(rj));
  }
  j["runs"] = std::move(runs);
  j["combined"] = ddestab::to_string(any_growing  ? ddestab::DecayClass::Growing
                                     : all_decay  ? ddestab::DecayClass::Decaying
                                                  : ddestab::DecayClass::Bounded);
  j["worst_residual"] = worst_residual;
  emit(j.dump(2), common.out_path);
  return 0;
}

int run_fundamental(const CommonOpts& common, std::optional<double> s_opt, double max_step,
                    double res_tol, const std::string& csv_path) {
  ddestab::LoadedProblem prob =
      ddestab::load_problem_file(common.equation_path, parse_params(common.params));
  const double s = s_opt.value_or(prob.equation.t_start);
  if (common.horizon <= s)
    throw CLI::ValidationError("--horizon", "horizon must exceed the slice start s");

  ddestab::StepControl ctrl;
  ctrl.max_step = max_step;
  ctrl.res_tol = res_tol;
  ddestab::FundamentalSlice slice =
      ddestab::fundamental(prob.equation, s, common.horizon, ctrl);
  if (!csv_path.empty()) {
    std::ofstream os(csv_path);
    if (!os) throw std::runtime_error("cannot write " + csv_path);
    slice.traj.write_csv(os);
  }
  ddestab::DecayFit fit = ddestab::fit_exponential({slice});

  ordered_json j;
  j["equation"] = common.equation_path;
  j["s"] = s;
  j["horizon"] = common.horizon;
  j["max_residual"] = slice.traj.max_residual;
  j["fit"] = fit_json(fit);
  if (!csv_path.empty()) j["csv"] = csv_path;
  emit(j.dump(2), common.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability analysis for scalar linear delay differential equations"};
  app.require_subcommand(1);

  CommonOpts common;
  ddestab::CheckParams check_params;
  int histories = 0;
  unsigned long long seed = 1;
  double max_step = 1e-2, res_tol = 1e-8;
  std::string csv_prefix, csv_path;
  std::optional<double> s_opt;
  std::optional<double> window_R;
  std::vector<int> index_set;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("equation", common.equation_path, "equation JSON file")->required();
    cmd->add_option("--horizon", common.horizon, "analysis horizon")
        ->envname("DDESTAB_HORIZON")
        ->capture_default_str();
    cmd->add_option("--param", common.params, "parameter override name=value (repeatable)");
    cmd->add_option("--out", common.out_path, "write the JSON output here instead of stdout");
  };

  CLI::App* check = app.add_subcommand("check", "evaluate the stability criteria");
  add_common(check);
  check->add_option("--step", common.step, "scan grid step")
      ->envname("DDESTAB_STEP")
      ->capture_default_str();
  check->add_option("--margin", common.margin, "strict-inequality margin")
      ->envname("DDESTAB_MARGIN")
      ->capture_default_str();
  check->add_option("--window-R", window_R, "window length for density liminf tests");
  check->add_option("--index-set", index_set, "dominant term indices, 1-based")
      ->delimiter(',');
  check->add_flag("--assume-divergent", check_params.assume_divergent,
                  "assert that the coefficient integral diverges");
  check->add_flag("--assume-nonvanishing", check_params.assume_nonvanishing,
                  "assert that the combined coefficient has positive liminf");

  CLI::App* simulate = app.add_subcommand("simulate", "integrate solution ensembles");
  add_common(simulate);
  simulate->add_option("--histories", histories,
                       "number of random histories (0: use the file's history)")
      ->capture_default_str();
  simulate->add_option("--seed", seed, "random history seed")->capture_default_str();
  simulate->add_option("--max-step", max_step, "solver step ceiling")->capture_default_str();
  simulate->add_option("--res-tol", res_tol, "solver residual tolerance")
      ->capture_default_str();
  simulate->add_option("--csv-prefix", csv_prefix, "write per-run CSVs with this prefix");

  CLI::App* fund = app.add_subcommand("fundamental", "compute one fundamental slice");
  add_common(fund);
  fund->add_option("--s", s_opt, "slice start (default: equation start)");
  fund->add_option("--max-step", max_step, "solver step ceiling")->capture_default_str();
  fund->add_option("--res-tol", res_tol, "solver residual tolerance")->capture_default_str();
  fund->add_option("--csv", csv_path, "write the slice trajectory CSV here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) {
      check_params.horizon = common.horizon;
      check_params.grid.step = common.step;
      check_params.margin = common.margin;
      check_params.window_R = window_R;
      check_params.index_set = index_set;
      return run_check(common, check_params);
    }
    if (simulate->parsed())
      return run_simulate(common, histories, seed, max_step, res_tol, csv_prefix);
    if (fund->parsed()) return run_fundamental(common, s_opt, max_step, res_tol, csv_path);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
