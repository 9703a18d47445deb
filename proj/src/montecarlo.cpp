#include "ratelim/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "ratelim/channel.hpp"
#include "ratelim/limits.hpp"
#include "ratelim/mjls.hpp"

namespace ratelim {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable:
      return "Stable";
    case Verdict::Unstable:
      return "Unstable";
    case Verdict::Inconclusive:
      return "Inconclusive";
  }
  return "Unknown";
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t trial) {
  return mix64(mix64(base_seed) + trial * 0x9E3779B97F4A7C15ULL);
}

unsigned default_threads() {
  if (const char* env = std::getenv("RATELIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

struct TrialSeries {
  std::vector<double> y_sq;
  std::vector<double> sigma_sq;
  LoopStatus status = LoopStatus::Completed;
};

TrialSeries series_from(const SimTrace& trace, int steps) {
  TrialSeries s;
  s.status = trace.status;
  s.y_sq.assign(static_cast<std::size_t>(steps), 0.0);
  s.sigma_sq.assign(static_cast<std::size_t>(steps), 0.0);
  const std::size_t n = std::min(trace.rows.size(), static_cast<std::size_t>(steps));
  for (std::size_t k = 0; k < n; ++k) {
    s.y_sq[k] = trace.rows[k].y * trace.rows[k].y;
    s.sigma_sq[k] = trace.rows[k].sigma * trace.rows[k].sigma;
  }
  if (trace.status == LoopStatus::Diverged && n > 0) {
    for (std::size_t k = n; k < s.y_sq.size(); ++k) {
      s.y_sq[k] = s.y_sq[n - 1];
      s.sigma_sq[k] = s.sigma_sq[n - 1];
    }
  }
  return s;
}

// Pairwise summation in trial order: independent of scheduling.
double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  if (hi - lo <= 8) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i];
    return s;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

DecayReport aggregate(const std::vector<TrialSeries>& trials, int steps, double tol_slope) {
  DecayReport r;
  const std::size_t nt = trials.size();
  for (const auto& t : trials) {
    if (t.status == LoopStatus::Converged) ++r.converged;
    if (t.status == LoopStatus::Diverged) ++r.diverged;
  }
  r.mean_sq_y.resize(static_cast<std::size_t>(steps));
  r.mean_sq_sigma.resize(static_cast<std::size_t>(steps));
  std::vector<double> column(nt);
  for (std::size_t k = 0; k < static_cast<std::size_t>(steps); ++k) {
    for (std::size_t t = 0; t < nt; ++t) column[t] = trials[t].y_sq[k];
    r.mean_sq_y[k] = nt ? pairwise_sum(column, 0, nt) / static_cast<double>(nt) : 0.0;
    for (std::size_t t = 0; t < nt; ++t) column[t] = trials[t].sigma_sq[k];
    r.mean_sq_sigma[k] = nt ? pairwise_sum(column, 0, nt) / static_cast<double>(nt) : 0.0;
  }

  r.horizon = steps;
  for (int k = 0; k < steps; ++k) {
    if (!(r.mean_sq_sigma[static_cast<std::size_t>(k)] > 0.0)) {
      r.horizon = k;
      break;
    }
  }

  // Least-squares slope of ln(mean sigma^2) over [horizon/2, horizon).
  const int first = r.horizon / 2;
  const int count = r.horizon - first;
  if (count >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = first; k < r.horizon; ++k) {
      const double x = k;
      const double y = std::log(r.mean_sq_sigma[static_cast<std::size_t>(k)]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double c = count;
    r.slope = (c * sxy - sx * sy) / (c * sxx - sx * sx);
  } else {
    r.slope = r.converged == static_cast<int>(nt) && nt > 0 ? -INFINITY : 0.0;
  }

  if (r.diverged > 0) {
    r.verdict = Verdict::Unstable;
  } else if (r.slope < -tol_slope) {
    r.verdict = Verdict::Stable;
  } else if (r.slope > tol_slope) {
    r.verdict = Verdict::Unstable;
  } else {
    r.verdict = Verdict::Inconclusive;
  }
  return r;
}

double initial_output(std::uint64_t seed, double bound) {
  return bound * (2.0 * unit_double(mix64(seed ^ 0x5851F42D4C957F2DULL)) - 1.0);
}

void check_experiment(const Experiment& exp) {
  if (exp.trials < 1) throw std::invalid_argument("experiment needs at least one trial");
  if (exp.steps < 1) throw std::invalid_argument("experiment needs at least one step");
}

}  // namespace

SimTrace run_trial(const UncertainPlant& plant, const QuantizerSpec& quantizer, double p,
                   const Experiment& exp, std::uint64_t trial) {
  const std::uint64_t seed = trial_seed(exp.base_seed, trial);
  const LossChannel channel({p, exp.base_seed}, trial);
  ParamStrategy strategy = exp.strategy;
  strategy.seed = seed;
  ParamRealizer realizer(plant, strategy);
  LoopOptions options;
  options.control = exp.control;
  return run_closed_loop(plant, quantizer, channel, realizer, exp.steps,
                         initial_output(seed, plant.y0_bound()), options);
}

SimTrace run_trial(const TimeShareConfig& cfg, double y0_bound, const Experiment& exp,
                   std::uint64_t trial) {
  const std::uint64_t seed = trial_seed(exp.base_seed, trial);
  const LossChannel channel({cfg.p, exp.base_seed}, trial);
  ParamStrategy strategy = exp.strategy;
  strategy.seed = seed;
  ParamRealizer realizer(scalar_plant(cfg, y0_bound), strategy);
  return run_timeshare_loop(cfg, y0_bound, channel, realizer, exp.steps,
                            initial_output(seed, y0_bound), exp.control);
}

DecayReport run_experiment(const UncertainPlant& plant, const QuantizerSpec& quantizer, double p,
                           const Experiment& exp) {
  check_experiment(exp);
  std::vector<TrialSeries> series(static_cast<std::size_t>(exp.trials));
  parallel_for(series.size(), exp.threads, [&](std::size_t t) {
    series[t] = series_from(run_trial(plant, quantizer, p, exp, t), exp.steps);
  });
  return aggregate(series, exp.steps, exp.tol_slope);
}

DecayReport run_experiment(const TimeShareConfig& cfg, double y0_bound, const Experiment& exp) {
  check_experiment(exp);
  cfg.validate();
  std::vector<TrialSeries> series(static_cast<std::size_t>(exp.trials));
  parallel_for(series.size(), exp.threads, [&](std::size_t t) {
    series[t] = series_from(run_trial(cfg, y0_bound, exp, t), exp.steps);
  });
  return aggregate(series, exp.steps, exp.tol_slope);
}

void DecayReport::write_csv(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "k,mean_sq_y,mean_sq_sigma\n";
  for (std::size_t k = 0; k < mean_sq_sigma.size(); ++k) {
    os << k << ',' << mean_sq_y[k] << ',' << mean_sq_sigma[k] << '\n';
  }
  os.precision(old);
}

// ---------------------------------------------------------------------------

SweepVar parse_sweep_var(const std::string& s) {
  if (s == "lambda") return SweepVar::Lambda;
  if (s == "p") return SweepVar::P;
  if (s == "N") return SweepVar::N;
  if (s == "m") return SweepVar::M;
  throw std::invalid_argument("unknown sweep variable '" + s + "' (lambda, p, N, m)");
}

std::string to_string(SweepVar v) {
  switch (v) {
    case SweepVar::Lambda:
      return "lambda";
    case SweepVar::P:
      return "p";
    case SweepVar::N:
      return "N";
    case SweepVar::M:
      return "m";
  }
  return "?";
}

std::vector<double> SweepAxis::values() const {
  std::vector<double> out;
  const double span = hi - lo;
  const auto count = static_cast<long long>(std::floor(span / step + 1e-9));
  for (long long i = 0; i <= count; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

SweepAxis SweepAxis::parse(SweepVar var, const std::string& range) {
  const auto c1 = range.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : range.find(':', c1 + 1);
  if (c2 == std::string::npos) throw std::invalid_argument("range must be lo:hi:step");
  SweepAxis a;
  a.var = var;
  try {
    std::size_t used = 0;
    const std::string parts[3] = {range.substr(0, c1), range.substr(c1 + 1, c2 - c1 - 1),
                                  range.substr(c2 + 1)};
    double vals[3];
    for (int i = 0; i < 3; ++i) {
      vals[i] = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing characters");
    }
    a.lo = vals[0];
    a.hi = vals[1];
    a.step = vals[2];
  } catch (const std::exception&) {
    throw std::invalid_argument("malformed range '" + range + "'");
  }
  if (!(a.step > 0.0) || !(a.hi >= a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi)) {
    throw std::invalid_argument("range needs lo <= hi and a positive step");
  }
  if ((var == SweepVar::N || var == SweepVar::M) &&
      (a.lo != std::round(a.lo) || a.step != std::round(a.step))) {
    throw std::invalid_argument("N and m ranges must be integral");
  }
  return a;
}

namespace {

struct GridPoint {
  std::vector<double> a_star;
  std::vector<double> eps;
  double p;
  std::optional<int> levels;
  int m;
};

}  // namespace

SweepTable sweep(const SweepSpec& spec) {
  if (spec.axes.empty() || spec.axes.size() > 2) throw std::invalid_argument("sweep takes one or two axes");
  if (spec.a_star.empty() || spec.a_star.size() != spec.eps.size()) {
    throw std::invalid_argument("sweep: a-star and eps must be nonempty and the same length");
  }
  bool timeshare = spec.m > 0;
  for (const auto& ax : spec.axes) timeshare = timeshare || ax.var == SweepVar::M;
  if (timeshare && spec.a_star.size() != 1) {
    throw std::invalid_argument("time-sharing sweeps need a scalar plant");
  }

  SweepTable table;
  table.timeshare = timeshare;
  for (const auto& ax : spec.axes) table.grid_names.push_back(to_string(ax.var));

  std::vector<std::vector<double>> grid;
  for (double v0 : spec.axes[0].values()) {
    if (spec.axes.size() == 1) {
      grid.push_back({v0});
    } else {
      for (double v1 : spec.axes[1].values()) grid.push_back({v0, v1});
    }
  }

  // Grid points already run in parallel; keep each experiment single-threaded.
  std::optional<Experiment> empirical = spec.empirical;
  if (empirical) empirical->threads = 1;

  std::vector<std::optional<SweepRow>> rows(grid.size());
  parallel_for(grid.size(), 0, [&](std::size_t g) {
    GridPoint pt{spec.a_star, spec.eps, spec.p, spec.levels, std::max(spec.m, 1)};
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      const double v = grid[g][a];
      switch (spec.axes[a].var) {
        case SweepVar::Lambda:
          pt.a_star.back() = std::copysign(v, spec.a_star.back());
          break;
        case SweepVar::P:
          pt.p = v;
          break;
        case SweepVar::N:
          pt.levels = static_cast<int>(std::lround(v));
          break;
        case SweepVar::M:
          pt.m = static_cast<int>(std::lround(v));
          break;
      }
    }
    if (!(pt.p >= 0.0 && pt.p < 1.0)) return;
    if (!(std::abs(pt.a_star.back()) - pt.eps.back() > 1.0)) return;
    const UncertainPlant plant(pt.a_star, pt.eps);

    SweepRow row;
    row.grid = grid[g];
    const NecessaryBounds nb = necessary_bounds(std::abs(pt.a_star.back()), pt.eps.back(), pt.p);
    row.p_nec = nb.p_nec;

    if (timeshare) {
      const double a = pt.a_star[0];
      const double e = pt.eps[0];
      if (pt.p == 0.0) {
        const LosslessBound lb = lossless_bound(a, e, pt.m);
        row.r_nec0 = lb.r_nec0;
        row.r_nec1 = lb.r_bar1;
        row.r_nec = lb.r_bar;
      } else if (pt.m == 1) {
        row.r_nec0 = nb.r_nec0;
        row.r_nec1 = nb.r_nec1;
        row.r_nec = nb.r_nec;
      }
      const auto best = min_feasible_average_level(a, e, pt.p, pt.m, spec.total_cap);
      if (best) row.min_level = static_cast<double>(best->total);
      std::optional<TimeShareConfig> cfg;
      if (pt.levels) {
        cfg = TimeShareConfig{a, e, pt.m, static_cast<double>(*pt.levels), pt.p};
      } else if (best) {
        cfg = TimeShareConfig{a, e, pt.m, best->average, pt.p};
      }
      if (cfg) {
        row.rho_or_kappa = kappa_bar(*cfg);
        if (empirical) row.verdict = run_experiment(*cfg, plant.y0_bound(), *empirical).verdict;
      }
    } else {
      row.r_nec0 = nb.r_nec0;
      row.r_nec1 = nb.r_nec1;
      row.r_nec = nb.r_nec;
      const MinLevel best = min_sufficient_N(plant, pt.p, spec.n_max);
      if (best.levels) row.min_level = *best.levels;
      std::optional<int> levels = pt.levels ? pt.levels : best.levels;
      if (pt.levels) {
        row.rho_or_kappa = sufficient_mss(plant, *pt.levels, pt.p).rho;
      } else if (best.levels) {
        row.rho_or_kappa = best.rho;
      }
      if (empirical && levels) {
        row.verdict = run_experiment(plant, QuantizerSpec(*levels), pt.p, *empirical).verdict;
      }
    }
    rows[g] = std::move(row);
  });

  for (auto& r : rows) {
    if (r) table.rows.push_back(std::move(*r));
  }
  return table;
}

void SweepTable::write_csv(std::ostream& os) const {
  const auto old = os.precision(12);
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const auto& name : grid_names) os << name << ',';
  os << "r_nec0,r_nec1,r_nec,p_nec," << (timeshare ? "kappa_bar" : "rho_F") << ",min_N,verdict\n";
  for (const auto& r : rows) {
    for (double g : r.grid) os << g << ',';
    opt(r.r_nec0);
    os << ',';
    opt(r.r_nec1);
    os << ',';
    opt(r.r_nec);
    os << ',' << r.p_nec << ',';
    opt(r.rho_or_kappa);
    os << ',';
    opt(r.min_level);
    os << ',';
    if (r.verdict) os << to_string(*r.verdict);
    os << '\n';
  }
  os.precision(old);
}

}  // namespace ratelim
