#include "ratelim/timeshare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ratelim {

namespace {

double snap_to_integer(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : x;
}

double binomial(int m, int s) {
  return std::exp(std::lgamma(m + 1.0) - std::lgamma(s + 1.0) - std::lgamma(m - s + 1.0));
}

/// E[kappa^2] with the resolution after s receptions being total^(s/m).
double kappa_bar_total(double a_star, double eps, int m, double total, double p) {
  double sum = 0.0;
  for (int s = 0; s <= m; ++s) {
    const double resolution = s == m ? total : std::pow(total, static_cast<double>(s) / m);
    const double k = kappa(a_star, eps, m, resolution);
    const double weight = binomial(m, s) * std::pow(1.0 - p, s) * std::pow(p, m - s);
    sum += weight * k * k;
  }
  return sum;
}

std::int64_t ipow(std::int64_t base, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

void TimeShareConfig::validate() const {
  if (!(std::abs(a_star) - eps > 1.0)) throw std::invalid_argument("time-sharing requires |a*| - eps > 1");
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be nonnegative");
  if (m < 1) throw std::invalid_argument("cycle length m must be at least 1");
  if (!(levels >= 1.0)) throw std::invalid_argument("average level must be at least 1");
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("loss probability must lie in [0, 1)");
}

double TimeShareConfig::total_levels() const { return snap_to_integer(std::pow(levels, m)); }

Deltas deltas(double a_star, double eps, int m) {
  if (m < 1) throw std::invalid_argument("cycle length m must be at least 1");
  const double a = std::abs(a_star);
  const double am = std::pow(a, m);
  return {std::pow(a + eps, m) - am, am - std::pow(a - eps, m)};
}

double kappa(double a_star, double eps, int m, double resolution) {
  if (!(resolution >= 1.0)) throw std::invalid_argument("kappa: resolution must be at least 1");
  const Deltas d = deltas(a_star, eps, m);
  const double big = resolution / 2.0;
  return (std::pow(std::abs(a_star), m) + std::max(big, 1.0) * d.plus +
          std::max(big - 1.0, 0.0) * d.minus) /
         resolution;
}

double kappa_bar(const TimeShareConfig& cfg) {
  cfg.validate();
  return kappa_bar_total(cfg.a_star, cfg.eps, cfg.m, cfg.total_levels(), cfg.p);
}

LosslessBound lossless_bound(double a_star, double eps, int m) {
  const Deltas d = deltas(a_star, eps, m);
  const double spread = 0.5 * (d.plus + d.minus);
  LosslessBound b;
  b.r_nec0 = std::log2(std::abs(a_star) + eps);
  b.feasible = spread < 1.0;
  if (b.feasible) {
    b.r_bar1 = std::log2((std::pow(std::abs(a_star), m) - d.minus) / (1.0 - spread)) / m;
    b.r_bar = std::max(b.r_nec0, b.r_bar1);
  } else {
    b.r_bar1 = std::numeric_limits<double>::infinity();
    b.r_bar = b.r_bar1;
  }
  return b;
}

std::optional<AverageLevel> min_feasible_average_level(double a_star, double eps, double p, int m,
                                                       std::int64_t cap) {
  TimeShareConfig{a_star, eps, m, 2.0, p}.validate();
  for (std::int64_t total = 2; total <= cap; ++total) {
    const double t = static_cast<double>(total);
    if (kappa_bar_total(a_star, eps, m, t, p) < 1.0) {
      return AverageLevel{total, std::pow(t, 1.0 / m)};
    }
  }
  return std::nullopt;
}

UncertainPlant scalar_plant(const TimeShareConfig& cfg, double y0_bound) {
  return UncertainPlant({cfg.a_star}, {cfg.eps}, y0_bound);
}

SimTrace run_timeshare_loop(const TimeShareConfig& cfg, double y0_bound, const LossChannel& channel,
                            ParamRealizer& realizer, int cycles, double y0, ControlLaw law) {
  cfg.validate();
  if (cycles < 0) throw std::invalid_argument("cycles must be nonnegative");
  if (!(std::abs(y0) <= y0_bound)) throw std::invalid_argument("initial output exceeds the bound Y0");
  const double total_real = cfg.total_levels();
  if (total_real != std::round(total_real) || total_real < 2.0 || total_real > 2e9) {
    throw std::invalid_argument("time-sharing simulation needs an integer total level N^m >= 2");
  }
  const auto total = static_cast<std::int64_t>(total_real);
  const int m = cfg.m;
  const double per_slot = std::round(cfg.levels);
  const bool integer_slots =
      std::abs(cfg.levels - per_slot) <= 1e-12 * per_slot && ipow(static_cast<std::int64_t>(per_slot), m) == total;

  const Interval box(cfg.a_star - cfg.eps, cfg.a_star + cfg.eps);
  // t -> t^m is monotone on a box that excludes zero.
  const double e1 = std::pow(box.lo(), m);
  const double e2 = std::pow(box.hi(), m);
  const Interval power_box(std::min(e1, e2), std::max(e1, e2));
  const double nominal_power = std::pow(cfg.a_star, m);

  double sigma = initial_sigma(y0_bound);
  double center = 0.0;
  double y = y0;
  SimTrace trace;
  trace.rows.reserve(static_cast<std::size_t>(cycles));

  for (int j = 0; j < cycles; ++j) {
    if (sigma < kConvergedSigma) {
      trace.status = LoopStatus::Converged;
      break;
    }
    if (sigma > kDivergedSigma || !std::isfinite(y)) {
      trace.status = LoopStatus::Diverged;
      break;
    }
    const double v = (y - center) / sigma;
    trace.max_abs_normalized = std::max(trace.max_abs_normalized, std::abs(v));
    if (std::abs(v) > 0.5 + kSaturationSlack) {
      std::ostringstream msg;
      msg << "quantizer saturated in cycle " << j << ": y=" << y << " center=" << center
          << " sigma=" << sigma;
      throw SaturationError(msg.str());
    }
    const double vc = std::clamp(v, -0.5, 0.5);
    const int symbol = quantize(static_cast<int>(total), vc);

    // Packets are sent in order and retried on loss, so the decoder ends the
    // cycle holding the first `received` of them.
    const std::int64_t k0 = static_cast<std::int64_t>(j) * m;
    int received = 0;
    for (int i = 0; i < m; ++i) received += channel.draw(static_cast<std::uint64_t>(k0 + i));

    double resolution = 1.0;
    Interval cell = decode_cell(1, sigma, center, std::nullopt);
    if (received == m) {
      resolution = total_real;
      cell = decode_cell(static_cast<int>(total), sigma, center, symbol);
    } else if (received > 0 && integer_slots) {
      const auto n = static_cast<std::int64_t>(per_slot);
      const std::int64_t coarse = ipow(n, received);
      resolution = static_cast<double>(coarse);
      cell = decode_cell(static_cast<int>(coarse), sigma, center,
                         static_cast<int>(symbol / ipow(n, m - received)));
    } else if (received > 0) {
      // Non-integer per-slot level: cells of width 1/L, the last one truncated at 1/2.
      resolution = std::pow(cfg.levels, received);
      const double cells = std::ceil(resolution);
      const double q = std::min(std::floor((vc + 0.5) * resolution), cells - 1.0);
      const double lo = -0.5 + q / resolution;
      const double hi = std::min(-0.5 + (q + 1.0) / resolution, 0.5);
      cell = Interval(center + sigma * lo, center + sigma * hi);
    }

    const Interval prediction = scale_product(power_box, cell);
    const double u_end =
        law == ControlLaw::Nominal ? -nominal_power * cell.midpoint() : -prediction.midpoint();
    trace.rows.push_back({k0, y, sigma, center, received, u_end, symbol, cell, resolution});

    for (int i = 0; i < m; ++i) {
      const double u = i == m - 1 ? u_end : 0.0;
      const auto next_output = [&](std::span<const double> params) { return params[0] * y + u; };
      const std::vector<double> a = realizer.next(next_output);
      if (!box.contains(a[0])) throw std::invalid_argument("realized parameter outside box");
      y = a[0] * y + u;
    }
    const ScalingUpdate next = advance_scaling(prediction, u_end);
    sigma = next.sigma;
    center = next.center;
  }
  return trace;
}

}  // namespace ratelim
