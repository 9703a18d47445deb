#pragma once

#include <cstdint>
#include <optional>

#include "ratelim/channel.hpp"
#include "ratelim/codec_loop.hpp"
#include "ratelim/plant.hpp"

namespace ratelim {

/// m-periodic time-sharing protocol on the scalar plant y[k+1] = a[k] y[k] + u[k].
/// One measurement per cycle is sent over m packet slots; a lost packet is
/// retried in the next slot.
struct TimeShareConfig {
  double a_star = 0.0;
  double eps = 0.0;
  int m = 1;              // cycle length
  double levels = 2.0;    // per-slot (average) level N; N^m is the total
  double p = 0.0;

  void validate() const;
  double total_levels() const;  // N^m
};

struct Deltas {
  double plus = 0.0;   // (|a*| + eps)^m - |a*|^m
  double minus = 0.0;  // |a*|^m - (|a*| - eps)^m
};

Deltas deltas(double a_star, double eps, int m);

/// Per-cycle sigma growth bound for realized resolution M = N^(packets received).
double kappa(double a_star, double eps, int m, double resolution);

/// E[kappa^2] under i.i.d. losses, by the binomial sum over received counts.
double kappa_bar(const TimeShareConfig& cfg);

struct LosslessBound {
  double r_bar = 0.0;   // average bits per slot; +inf when infeasible
  double r_nec0 = 0.0;  // log2(|a*| + eps)
  double r_bar1 = 0.0;  // +inf when infeasible
  bool feasible = false;  // (delta+ + delta-) / 2 < 1
};

LosslessBound lossless_bound(double a_star, double eps, int m);

struct AverageLevel {
  std::int64_t total = 0;  // integer N^m
  double average = 0.0;    // total^(1/m)
};

/// Smallest integer total level T >= 2 (up to cap) with kappa_bar < 1 at N = T^(1/m).
std::optional<AverageLevel> min_feasible_average_level(double a_star, double eps, double p, int m,
                                                       std::int64_t cap);

/// Cycle-level simulation. Row j holds k = m j, the measurement y[mj], the
/// number of packets received in the cycle (gamma), the cycle-end input, the
/// total-level symbol, and the decoder interval at the realized resolution.
/// cfg.total_levels() must be an integer >= 2.
SimTrace run_timeshare_loop(const TimeShareConfig& cfg, double y0_bound, const LossChannel& channel,
                            ParamRealizer& realizer, int cycles, double y0,
                            ControlLaw law = ControlLaw::Nominal);

/// Scalar plant view of a time-sharing configuration.
UncertainPlant scalar_plant(const TimeShareConfig& cfg, double y0_bound);

}  // namespace ratelim
