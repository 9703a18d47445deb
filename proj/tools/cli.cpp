#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "ratelim/codec_loop.hpp"
#include "ratelim/limits.hpp"
#include "ratelim/mjls.hpp"
#include "ratelim/montecarlo.hpp"
#include "ratelim/timeshare.hpp"

namespace ratelim::cli {

namespace {

using json = nlohmann::ordered_json;

json opt(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<double> parse_list(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
      throw std::invalid_argument(flag + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument(flag + ": empty list");
  return out;
}

struct PlantArgs {
  int n = 0;
  std::string a_star;
  std::string eps;
  double p = 0.0;
  double y0 = 1.0;

  void add(CLI::App* app) {
    app->add_option("--n", n, "Plant order")->required();
    app->add_option("--a-star", a_star, "Nominal coefficients a_1*,...,a_n*")->required();
    app->add_option("--eps", eps, "Uncertainty radii eps_1,...,eps_n (default all zero)");
    app->add_option("--p", p, "Packet loss probability");
    app->add_option("--y0", y0, "Bound Y0 on |y_0|");
  }

  UncertainPlant plant() const {
    const std::vector<double> a = parse_list("--a-star", a_star);
    const std::vector<double> e = eps.empty() ? std::vector<double>(a.size(), 0.0) : parse_list("--eps", eps);
    if (n < 1) throw std::invalid_argument("--n must be at least 1");
    if (a.size() != static_cast<std::size_t>(n)) {
      throw std::invalid_argument("--a-star has " + std::to_string(a.size()) + " entries but --n is " +
                                  std::to_string(n));
    }
    if (e.size() != a.size()) throw std::invalid_argument("--eps must have --n entries");
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("--p must lie in [0, 1)");
    try {
      return UncertainPlant(a, e, y0);
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument(std::string("--a-star/--eps/--y0: ") + ex.what());
    }
  }
};

struct ExperimentArgs {
  int trials = 200;
  int steps = 400;
  std::uint64_t seed = 1;
  std::string strategy = "nominal";
  std::string control = "nominal";
  double tol_slope = 1e-3;

  void add(CLI::App* app) {
    app->add_option("--trials", trials, "Monte Carlo trials");
    app->add_option("--steps", steps, "Steps per trial (cycles for time sharing)");
    app->add_option("--seed", seed, "Base seed");
    app->add_option("--strategy", strategy, "nominal | vertex[:+-...] | uniform | adversarial");
    app->add_option("--control", control, "nominal | recentered");
    app->add_option("--tol-slope", tol_slope, "Slope tolerance for the verdict");
  }

  Experiment experiment() const {
    if (trials < 1) throw std::invalid_argument("--trials must be at least 1");
    if (steps < 1) throw std::invalid_argument("--steps must be at least 1");
    if (!(tol_slope >= 0.0)) throw std::invalid_argument("--tol-slope must be nonnegative");
    Experiment e;
    e.trials = trials;
    e.steps = steps;
    e.base_seed = seed;
    e.strategy = ParamStrategy::parse(strategy, seed);
    e.control = parse_control_law(control);
    e.tol_slope = tol_slope;
    return e;
  }
};

void add_format(CLI::App* app, std::string& format, const std::string& fallback) {
  format = fallback;
  app->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "csv"}));
}

/// Writes `text` to --out when given, otherwise to `out`.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path);
  if (!file) throw std::invalid_argument("cannot open output file '" + path + "'");
  file << text;
}

std::string csv_value(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  return v.dump();
}

std::string json_record_to_csv(const json& record, const std::vector<std::string>& keys) {
  std::string head, row;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    head += (i ? "," : "") + keys[i];
    row += (i ? "," : "") + csv_value(record.at(keys[i]));
  }
  return head + "\n" + row + "\n";
}

void warn_instability(const UncertainPlant& plant, std::ostream& err) {
  const int grid = plant.order() <= 6 ? 3 : 1;
  const auto found = check_unstable_assumption(plant, grid);
  if (found.empty()) return;
  err << "warning: " << found.size()
      << " sampled parameter vector(s) give an eigenvalue with modulus <= 1 (smallest "
      << std::min_element(found.begin(), found.end(),
                          [](const auto& a, const auto& b) { return a.modulus < b.modulus; })
             ->modulus
      << ")\n";
}

// ---------------------------------------------------------------------------

struct BoundsCmd {
  PlantArgs plant;
  std::string format;
  std::string out_path;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("bounds", "Necessary rate and loss bounds");
    plant.add(sub);
    add_format(sub, format, "json");
    sub->add_option("--out", out_path, "Output file");
  }

  void run(std::ostream& out, std::ostream& err) const {
    const UncertainPlant p = plant.plant();
    warn_instability(p, err);
    const double lambda = std::abs(lambda_pi(p));
    const double eps_n = p.radii().back();
    const NecessaryBounds nb = necessary_bounds(lambda, eps_n, plant.p);
    const KnownPlantBounds you = you_bounds(lambda, plant.p);
    json j;
    j["r_nec0"] = opt(nb.r_nec0);
    j["r_nec1"] = opt(nb.r_nec1);
    j["r_nec"] = opt(nb.r_nec);
    j["p_nec"] = nb.p_nec;
    j["r_you"] = opt(you.r_y);
    j["p_you"] = you.p_y;
    j["r_phat"] = p.order() == 1 ? opt(phat_bound(lambda, eps_n)) : json(nullptr);
    j["r_martins"] = p.order() == 1 ? opt(martins_bound(lambda, eps_n)) : json(nullptr);
    j["feasible"] = nb.feasible;
    if (format == "json") {
      emit(out_path, j.dump(2) + "\n", out);
    } else {
      emit(out_path,
           json_record_to_csv(j, {"r_nec0", "r_nec1", "r_nec", "p_nec", "r_you", "p_you", "r_phat",
                                  "r_martins", "feasible"}),
           out);
    }
  }
};

struct SufficientCmd {
  PlantArgs plant;
  std::optional<int> levels;
  bool min_n = false;
  int n_max = 1024;
  std::string dump_f;
  std::string format;
  std::string out_path;
  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("sufficient", "Spectral-radius sufficiency test");
    plant.add(sub);
    auto* n_opt = sub->add_option("--N", levels, "Quantizer levels (>= 2)");
    auto* m_opt = sub->add_flag("--min-n", min_n, "Search the smallest sufficient N");
    n_opt->excludes(m_opt);
    sub->add_option("--n-max", n_max, "Upper limit for --min-n");
    sub->add_option("--dump-f", dump_f, "Write F as row-major CSV");
    add_format(sub, format, "json");
    sub->add_option("--out", out_path, "Output file");
  }

  void run(std::ostream& out, std::ostream& err) const {
    const UncertainPlant p = plant.plant();
    warn_instability(p, err);
    if (!levels && !min_n) throw std::invalid_argument("sufficient needs --N or --min-n");
    json j;
    j["n"] = p.order();
    j["N"] = nullptr;
    j["p"] = plant.p;
    std::optional<int> used = levels;
    if (levels) {
      if (*levels < 2) throw std::invalid_argument("--N must be at least 2");
      const Sufficiency s = sufficient_mss(p, *levels, plant.p);
      j["N"] = *levels;
      j["rho"] = s.rho;
      j["sufficient"] = s.sufficient;
    } else {
      if (n_max < 2) throw std::invalid_argument("--n-max must be at least 2");
      const MinLevel m = min_sufficient_N(p, plant.p, n_max);
      used = m.levels;
      j["N"] = m.levels ? json(*m.levels) : json(nullptr);
      j["rho"] = m.rho;
      j["sufficient"] = m.levels.has_value();
      if (!m.monotone) err << "note: rho(F) was not monotone in N for this plant\n";
    }
    if (!dump_f.empty() && used) {
      const MjlsModel model = build_F(p, *used, plant.p);
      std::ofstream file(dump_f);
      if (!file) throw std::invalid_argument("cannot open --dump-f file '" + dump_f + "'");
      const Eigen::IOFormat csv(Eigen::FullPrecision, Eigen::DontAlignCols, ",", "\n");
      file << model.F.format(csv) << '\n';
    }
    if (format == "json") {
      emit(out_path, j.dump(2) + "\n", out);
    } else {
      emit(out_path, json_record_to_csv(j, {"n", "N", "p", "rho", "sufficient"}), out);
    }
  }
};

struct SimulateCmd {
  PlantArgs plant;
  ExperimentArgs experiment;
  double levels = 2.0;
  int m = 0;
  std::string trace_path;
  std::string format;
  std::string out_path;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("simulate", "Monte Carlo closed-loop runs");
    plant.add(sub);
    experiment.add(sub);
    sub->add_option("--N", levels, "Quantizer levels (average level with --m)")->required();
    sub->add_option("--m", m, "Time-sharing cycle length (0: one packet per step)");
    sub->add_option("--trace", trace_path, "Write the trace of trial 0 as CSV");
    add_format(sub, format, "csv");
    sub->add_option("--out", out_path, "Output file");
  }

  void run(std::ostream& out, std::ostream& err) const {
    const UncertainPlant p = plant.plant();
    const Experiment exp = experiment.experiment();
    if (m < 0) throw std::invalid_argument("--m must be nonnegative");
    DecayReport report;
    std::optional<SimTrace> trace;
    if (m > 0) {
      if (p.order() != 1) throw std::invalid_argument("--m needs a scalar plant (--n 1)");
      const TimeShareConfig cfg{p.nominal(0), p.radius(0), m, levels, plant.p};
      cfg.validate();
      report = run_experiment(cfg, p.y0_bound(), exp);
      if (!trace_path.empty()) trace = run_trial(cfg, p.y0_bound(), exp, 0);
    } else {
      if (levels != std::round(levels) || levels < 1.0 || levels > 2e9) {
        throw std::invalid_argument("--N must be a positive integer");
      }
      const QuantizerSpec q(static_cast<int>(levels));
      report = run_experiment(p, q, plant.p, exp);
      if (!trace_path.empty()) trace = run_trial(p, q, plant.p, exp, 0);
    }
    if (trace) {
      std::ofstream file(trace_path);
      if (!file) throw std::invalid_argument("cannot open --trace file '" + trace_path + "'");
      trace->write_csv(file);
    }

    json summary;
    summary["verdict"] = to_string(report.verdict);
    summary["slope"] = finite_or_null(report.slope);
    summary["converged"] = report.converged;
    summary["diverged"] = report.diverged;
    summary["horizon"] = report.horizon;
    summary["trials"] = exp.trials;
    summary["steps"] = exp.steps;
    if (format == "json") {
      summary["mean_sq_y"] = report.mean_sq_y;
      summary["mean_sq_sigma"] = report.mean_sq_sigma;
      emit(out_path, summary.dump(2) + "\n", out);
    } else {
      std::ostringstream os;
      report.write_csv(os);
      emit(out_path, os.str(), out);
      err << summary.dump() << '\n';
    }
  }
};

struct SweepCmd {
  PlantArgs plant;
  ExperimentArgs experiment;
  std::vector<std::string> vars;
  std::vector<std::string> ranges;
  std::optional<int> levels;
  int m = 0;
  int n_max = 1024;
  std::int64_t total_cap = 1000000;
  bool empirical = false;
  std::string format;
  std::string out_path;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("sweep", "Bounds and sufficiency over a parameter grid");
    plant.add(sub);
    experiment.add(sub);
    sub->add_option("--var", vars, "Swept variable: lambda | p | N | m (one or two)")->required();
    sub->add_option("--range", ranges, "lo:hi:step, one per --var")->required();
    sub->add_option("--N", levels, "Fixed quantizer level (default: minimal sufficient level)");
    sub->add_option("--m", m, "Time-sharing cycle length (0: per-step protocol)");
    sub->add_option("--n-max", n_max, "Upper limit of the level search");
    sub->add_option("--total-cap", total_cap, "Upper limit of the total level search (time sharing)");
    sub->add_flag("--empirical", empirical, "Add a Monte Carlo verdict per grid point");
    add_format(sub, format, "csv");
    sub->add_option("--out", out_path, "Output file");
  }

  void run(std::ostream& out, std::ostream&) const {
    if (vars.empty() || vars.size() > 2 || vars.size() != ranges.size()) {
      throw std::invalid_argument("--var and --range must be given together, once or twice");
    }
    SweepSpec spec;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      spec.axes.push_back(SweepAxis::parse(parse_sweep_var(vars[i]), ranges[i]));
    }
    const UncertainPlant p = plant.plant();
    spec.a_star.assign(p.nominal().begin(), p.nominal().end());
    spec.eps.assign(p.radii().begin(), p.radii().end());
    spec.p = plant.p;
    if (levels && *levels < 2) throw std::invalid_argument("--N must be at least 2");
    if (m < 0) throw std::invalid_argument("--m must be nonnegative");
    if (n_max < 2) throw std::invalid_argument("--n-max must be at least 2");
    spec.levels = levels;
    spec.m = m;
    spec.n_max = n_max;
    spec.total_cap = total_cap;
    if (empirical) spec.empirical = experiment.experiment();
    const SweepTable table = sweep(spec);

    if (format == "csv") {
      std::ostringstream os;
      table.write_csv(os);
      emit(out_path, os.str(), out);
      return;
    }
    json rows = json::array();
    for (const auto& r : table.rows) {
      json j;
      for (std::size_t i = 0; i < r.grid.size(); ++i) j[table.grid_names[i]] = r.grid[i];
      j["r_nec0"] = opt(r.r_nec0);
      j["r_nec1"] = opt(r.r_nec1);
      j["r_nec"] = opt(r.r_nec);
      j["p_nec"] = r.p_nec;
      j[table.timeshare ? "kappa_bar" : "rho_F"] = opt(r.rho_or_kappa);
      j["min_N"] = opt(r.min_level);
      j["verdict"] = r.verdict ? json(to_string(*r.verdict)) : json(nullptr);
      rows.push_back(j);
    }
    emit(out_path, rows.dump(2) + "\n", out);
  }
};

struct TimeshareCmd {
  PlantArgs plant;
  std::optional<int> m;
  std::optional<int> sweep_m;
  std::optional<double> levels;
  std::int64_t total_cap = 1000000;
  std::string format;
  std::string out_path;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("timeshare", "Time-sharing protocol analysis (scalar plants)");
    plant.add(sub);
    auto* m_opt = sub->add_option("--m", m, "Cycle length");
    auto* s_opt = sub->add_option("--sweep-m", sweep_m, "Tabulate m = 1..M");
    m_opt->excludes(s_opt);
    sub->add_option("--N", levels, "Average level N (default: the minimal feasible level)");
    sub->add_option("--total-cap", total_cap, "Upper limit of the total level search");
    add_format(sub, format, "");
    sub->add_option("--out", out_path, "Output file");
  }

  json row(double a, double eps, int cycle) const {
    const Deltas d = deltas(a, eps, cycle);
    const auto best = min_feasible_average_level(a, eps, plant.p, cycle, total_cap);
    json j;
    j["m"] = cycle;
    j["delta_plus"] = d.plus;
    j["delta_minus"] = d.minus;
    std::optional<double> level = levels;
    if (!level && best) level = best->average;
    j["kappa_bar"] = level ? json(kappa_bar({a, eps, cycle, *level, plant.p})) : json(nullptr);
    if (plant.p == 0.0) {
      const LosslessBound lb = lossless_bound(a, eps, cycle);
      j["r_bar"] = finite_or_null(lb.r_bar);
      j["feasible"] = lb.feasible;
    } else {
      j["r_bar"] = cycle == 1 ? opt(necessary_bounds(std::abs(a), eps, plant.p).r_nec) : json(nullptr);
      j["feasible"] = best.has_value();
    }
    j["min_total_level"] = best ? json(best->total) : json(nullptr);
    j["avg_level"] = best ? json(best->average) : json(nullptr);
    return j;
  }

  void run(std::ostream& out, std::ostream&) const {
    if (plant.n != 1) throw std::invalid_argument("timeshare needs a scalar plant (--n 1)");
    const UncertainPlant p = plant.plant();
    if (!m && !sweep_m) throw std::invalid_argument("timeshare needs --m or --sweep-m");
    if (levels && !(*levels >= 1.0)) throw std::invalid_argument("--N must be at least 1");
    if (total_cap < 2) throw std::invalid_argument("--total-cap must be at least 2");
    const int top = m ? *m : *sweep_m;
    if (top < 1) throw std::invalid_argument("--m must be at least 1");
    const std::vector<std::string> keys{"m",        "delta_plus", "delta_minus",     "kappa_bar",
                                        "r_bar",    "feasible",   "min_total_level", "avg_level"};
    const std::string fmt = format.empty() ? (m ? "json" : "csv") : format;
    if (m) {
      const json j = row(p.nominal(0), p.radius(0), *m);
      emit(out_path, fmt == "json" ? j.dump(2) + "\n" : json_record_to_csv(j, keys), out);
      return;
    }
    json rows = json::array();
    for (int c = 1; c <= top; ++c) rows.push_back(row(p.nominal(0), p.radius(0), c));
    if (fmt == "json") {
      emit(out_path, rows.dump(2) + "\n", out);
      return;
    }
    std::string text;
    for (std::size_t i = 0; i < keys.size(); ++i) text += (i ? "," : "") + keys[i];
    text += "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < keys.size(); ++i) text += (i ? "," : "") + csv_value(r.at(keys[i]));
      text += "\n";
    }
    emit(out_path, text, out);
  }
};

/// Expands `--config <file>` into flags placed right after the subcommand, so
/// explicit flags given later on the command line take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file path");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream file(path);
  if (!file) throw CLI::FileError("cannot read config file '" + path + "'");
  const std::vector<CLI::ConfigItem> items = CLI::ConfigINI().from_config(file);
  std::vector<std::string> injected;
  for (const auto& item : items) {
    if (item.name.empty() || item.name == "++" || item.name == "--") continue;
    const std::string flag = "--" + item.name;
    if (item.inputs.size() == 1 && item.inputs[0] == "false") continue;
    if (item.inputs.size() == 1 && item.inputs[0] == "true") {
      injected.push_back(flag);
      continue;
    }
    std::string joined;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) joined += (i ? "," : "") + item.inputs[i];
    injected.push_back(flag);
    injected.push_back(joined);
  }
  const auto at = args.empty() || args[0].rfind("-", 0) == 0 ? args.begin() : args.begin() + 1;
  args.insert(at, injected.begin(), injected.end());
  return args;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-rate and packet-loss limits for uncertain networked control loops", "ratelim"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--config", "key=value file mirroring the flags");

  BoundsCmd bounds;
  SufficientCmd sufficient;
  SimulateCmd simulate;
  SweepCmd sweep_cmd;
  TimeshareCmd timeshare;
  bounds.add(app);
  sufficient.add(app);
  simulate.add(app);
  sweep_cmd.add(app);
  timeshare.add(app);
  // Repeated --var/--range accumulate.
  for (auto* name : {"--var", "--range"}) {
    app.get_subcommand("sweep")->get_option(name)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  }

  try {
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    if (app.got_subcommand("bounds")) bounds.run(out, err);
    if (app.got_subcommand("sufficient")) sufficient.run(out, err);
    if (app.got_subcommand("simulate")) simulate.run(out, err);
    if (app.got_subcommand("sweep")) sweep_cmd.run(out, err);
    if (app.got_subcommand("timeshare")) timeshare.run(out, err);
  } catch (const SaturationError& e) {
    err << "invariant breach: " << e.what() << '\n';
    return kExitBreach;
  } catch (const SynchronyError& e) {
    err << "invariant breach: " << e.what() << '\n';
    return kExitBreach;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBreach;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}

}  // namespace ratelim::cli
