#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ratelim/codec_loop.hpp"
#include "ratelim/plant.hpp"
#include "ratelim/timeshare.hpp"

namespace ratelim {

struct Experiment {
  int trials = 200;
  int steps = 400;
  std::uint64_t base_seed = 1;
  ParamStrategy strategy;
  double tol_slope = 1e-3;
  ControlLaw control = ControlLaw::Nominal;
  unsigned threads = 0;  // 0: RATELIM_THREADS or hardware concurrency
};

enum class Verdict { Stable, Unstable, Inconclusive };
std::string to_string(Verdict v);

/// Empirical second moments across trials and the decay classification.
///
/// A trial that converges contributes zero from then on; a diverged trial holds
/// its last values. The slope of ln(mean sigma^2) per step is fitted over the
/// second half of the horizon, where the horizon ends early if every trial has
/// converged.
struct DecayReport {
  std::vector<double> mean_sq_y;
  std::vector<double> mean_sq_sigma;
  double slope = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  int converged = 0;
  int diverged = 0;
  int horizon = 0;

  void write_csv(std::ostream& os) const;
};

/// Per-trial seeds, injective in the trial index for a fixed base seed.
std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t trial);

/// Worker count from RATELIM_THREADS, else hardware concurrency (at least 1).
unsigned default_threads();

/// Trial t of an experiment: channel trial t, strategy seed and y0 from trial_seed.
SimTrace run_trial(const UncertainPlant& plant, const QuantizerSpec& quantizer, double p,
                   const Experiment& exp, std::uint64_t trial);
SimTrace run_trial(const TimeShareConfig& cfg, double y0_bound, const Experiment& exp,
                   std::uint64_t trial);

/// Trials of the per-step codec loop with N levels and loss probability p.
DecayReport run_experiment(const UncertainPlant& plant, const QuantizerSpec& quantizer, double p,
                           const Experiment& exp);

/// Trials of the time-sharing loop; `steps` counts cycles.
DecayReport run_experiment(const TimeShareConfig& cfg, double y0_bound, const Experiment& exp);

// ---------------------------------------------------------------------------
// Parameter sweeps.

enum class SweepVar { Lambda, P, N, M };
SweepVar parse_sweep_var(const std::string& s);
std::string to_string(SweepVar v);

struct SweepAxis {
  SweepVar var = SweepVar::Lambda;
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;

  std::vector<double> values() const;
  /// Parses "lo:hi:step".
  static SweepAxis parse(SweepVar var, const std::string& range);
};

struct SweepSpec {
  std::vector<SweepAxis> axes;  // one or two
  std::vector<double> a_star;
  std::vector<double> eps;
  double p = 0.0;
  std::optional<int> levels;  // N for rho(F) / kappa_bar; default: the minimal sufficient N
  int m = 0;                  // > 0 selects the time-sharing analysis (scalar plants)
  int n_max = 1024;
  std::int64_t total_cap = 1000000;
  std::optional<Experiment> empirical;
};

struct SweepRow {
  std::vector<double> grid;
  std::optional<double> r_nec0, r_nec1, r_nec;
  double p_nec = 0.0;
  std::optional<double> rho_or_kappa;
  std::optional<double> min_level;
  std::optional<Verdict> verdict;
};

struct SweepTable {
  std::vector<std::string> grid_names;
  bool timeshare = false;
  std::vector<SweepRow> rows;

  void write_csv(std::ostream& os) const;
};

/// Evaluates the necessary bounds, rho(F) (or kappa_bar for time sharing), the
/// minimal sufficient level, and optionally an empirical verdict per grid point.
/// Grid points whose plant is invalid are skipped.
SweepTable sweep(const SweepSpec& spec);

/// Runs fn(i) for i in [0, count) on `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace ratelim
