// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ratelim/interval.hpp"
#include "ratelim/limits.hpp"
#include "ratelim/mjls.hpp"
#include "ratelim/montecarlo.hpp"
#include "ratelim/timeshare.hpp"

using namespace ratelim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double inf() { return std::numeric_limits<double>::infinity(); }

// 1. Zero uncertainty reduces the necessary bounds to the known-plant limits.
Outcome zero_uncertainty_reduction() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  bool ok = true;
  for (int i = 0; i < 100; ++i) {
    const double lambda = 1.0 + 5.0 * (1.0 - unit(rng));
    const double p = unit(rng) / (lambda * lambda);
    const auto nec = necessary_bounds(lambda, 0.0, p);
    const auto you = you_bounds(lambda, p);
    if (!nec.feasible || !you.feasible || !nec.r_nec || !you.r_y) {
      ok = false;
      continue;
    }
    worst = std::max({worst, std::abs(*nec.r_nec - *you.r_y), std::abs(nec.p_nec - you.p_y)});
  }
  return {ok && worst < 1e-12, "max |diff| " + fmt("%.3g", worst) + " over 100 plants"};
}

// 2. Case formula for the product measure against the endpoint hull.
Outcome interval_oracle() {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> coef(-4.0, 4.0);
  std::uniform_real_distribution<double> rad(0.0, 2.0);
  std::uniform_real_distribution<double> end(-3.0, 3.0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double a = coef(rng);
    const double e = i % 10 == 0 ? 0.0 : rad(rng);
    double lo = end(rng);
    double hi = end(rng);
    if (lo > hi) std::swap(lo, hi);
    const Interval y(lo, hi);
    const double products[] = {(a - e) * lo, (a - e) * hi, (a + e) * lo, (a + e) * hi};
    const double hull = *std::max_element(std::begin(products), std::end(products)) -
                        *std::min_element(std::begin(products), std::end(products));
    worst = std::max(worst, std::abs(hull - product_measure_cases(a, e, y)));
  }
  return {worst < 1e-12, "max abs error " + fmt("%.3g", worst) + " over 1e5 cases"};
}

// 3. Cell enumeration reproduces eta * sigma.
Outcome eta_enumeration() {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  long bit_exact = 0, total = 0;
  for (int t = 0; t < 100; ++t) {
    const double eps = 0.9 * unit(rng);
    const double a = (unit(rng) < 0.5 ? -1.0 : 1.0) * (1.0 + eps + 1e-6 + 4.0 * unit(rng));
    const double sigma = 0.1 + 3.0 * unit(rng);
    for (int levels = 1; levels <= 64; ++levels) {
      for (int gamma = 0; gamma < 2; ++gamma) {
        const double expected = eta(std::abs(a), eps, levels, gamma) * sigma;
        const double got = max_cell_expansion(a, eps, levels, gamma, sigma);
        worst = std::max(worst, std::abs(got - expected) / expected);
        bit_exact += got == expected;
        ++total;
      }
    }
  }
  std::ostringstream d;
  d << "max rel error " << fmt("%.3g", worst) << " (round-off bound 1e-12), " << bit_exact << "/" << total
    << " bit-identical";
  return {worst <= 1e-12, d.str()};
}

// 4. For n = 1, rho(F) < 1 exactly when R > the N >= 2 rate branch and p < the loss limit.
Outcome scalar_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long checked = 0, mismatches = 0;
  double worst_eta = 0.0;
  for (int t = 0; t < 50; ++t) {
    const double eps = 0.5 * unit(rng);
    const double mag = 1.0 + eps + (5.0 - eps) * (1.0 - unit(rng));
    const double a = unit(rng) < 0.5 ? -mag : mag;
    const UncertainPlant plant({a}, {eps});
    for (int levels = 2; levels <= 64; ++levels) {
      for (int ip = 0; ip <= 9; ++ip) {
        const double p = 0.05 * ip;
        const double rho = sufficient_mss(plant, levels, p).rho;
        worst_eta = std::max(worst_eta, std::abs(rho - eta_second_moment(mag, eps, p, levels)));
        if (std::abs(rho - 1.0) <= 1e-6) continue;
        const auto nec = necessary_bounds(mag, eps, p);
        const bool predicted = nec.r_nec1 && std::log2(levels) > *nec.r_nec1 && p < nec.p_nec;
        ++checked;
        mismatches += predicted != (rho < 1.0);
      }
    }
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << mismatches << " sign mismatches in " << checked << " points, max |rho - E[eta^2]| "
    << fmt("%.3g", worst_eta) << ", " << fmt("%.2f", elapsed) << " s";
  return {mismatches == 0 && worst_eta < 1e-10 && elapsed < 10.0, d.str()};
}

// 5. The N >= 2 necessary rate sits below both lossless sufficient rates.
Outcome rate_ordering() {
  long compared = 0, violations = 0;
  for (int i = 0; i < 50; ++i) {
    const double lambda = 1.1 + (6.0 - 1.1) * i / 49.0;
    for (int j = 0; j < 50; ++j) {
      const double eps = 0.01 + (0.99 - 0.01) * j / 49.0;
      const auto nec = necessary_bounds(lambda, eps, 0.0);
      const auto rp = phat_bound(lambda, eps);
      const auto rm = martins_bound(lambda, eps);
      if (!nec.r_nec1 || !rp || !rm) continue;
      ++compared;
      violations += !(*nec.r_nec1 < *rp && *nec.r_nec1 < *rm);
    }
  }
  std::ostringstream d;
  d << violations << " violations in " << compared << " feasible grid points";
  return {compared > 0 && violations == 0, d.str()};
}

/// Smallest real level with rho(F) < 1, or +inf if none below 2^30.
double real_level_threshold(const UncertainPlant& plant, double p) {
  const auto rho = [&](double levels) { return spectral_radius(build_F(plant, levels, p).F).rho; };
  if (rho(2.0) < 1.0) return 2.0;
  double lo = 2.0, hi = 4.0;
  while (rho(hi) >= 1.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1073741824.0) return inf();
  }
  for (int i = 0; i < 60 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (rho(mid) < 1.0 ? hi : lo) = mid;
  }
  return hi;
}

// 6. Second-order plant sweep over a2*.
Outcome second_order_sweep() {
  const auto t0 = Clock::now();
  const double eps = 0.05, p = 0.05;
  std::vector<double> grid, nec, suf, suf_int;
  for (int i = 0; i <= 280; ++i) {
    const double a2 = 1.5 + 0.01 * i;
    const UncertainPlant plant({1.0, a2}, {eps, eps});
    const auto b = necessary_bounds(a2, eps, p);
    grid.push_back(a2);
    nec.push_back(b.r_nec ? *b.r_nec : inf());
    suf.push_back(std::log2(real_level_threshold(plant, p)));
    const auto m = min_sufficient_N(plant, p, 1024);
    suf_int.push_back(m.levels ? std::log2(*m.levels) : inf());
  }
  bool monotone = true, above = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) {
      monotone &= nec[i] >= nec[i - 1] - 1e-12;
      monotone &= suf[i] >= suf[i - 1] - 1e-9;
      monotone &= suf_int[i] >= suf_int[i - 1];
    }
    above &= suf[i] >= nec[i] && suf_int[i] >= nec[i];
  }
  const std::size_t at2 = 50;  // a2* = 2.0
  const double gap = suf[at2] - nec[at2];
  const double gap_int = suf_int[at2] - nec[at2];
  const bool gap_ok = gap <= 1.5 && gap >= 0.5 && gap_int <= 1.5 && gap_int >= 0.5;

  double lo = 1.5, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (necessary_bounds(mid, eps, p).p_nec > p ? lo : hi) = mid;
  }
  const double root = 0.5 * (lo + hi);
  const bool root_ok = std::abs(root - 4.3668) <= 1e-3;
  const double elapsed = seconds_since(t0);

  std::ostringstream d;
  d << "(a) nondecreasing " << (monotone ? "yes" : "no") << "; (b) sufficient >= necessary "
    << (above ? "yes" : "no") << "; (c) gap at 2.0 " << fmt("%.4f", gap) << " bits (integer N "
    << fmt("%.4f", gap_int) << "); (d) loss-limit root " << fmt("%.6f", root) << " vs 4.3668 "
    << (root_ok ? "ok" : "off") << "; " << fmt("%.2f", elapsed) << " s";
  return {monotone && above && gap_ok && root_ok && elapsed < 60.0, d.str()};
}

// 7. Time-sharing durations for a* = 3.3, eps = 0.025, p = 0.
Outcome time_sharing_durations() {
  const auto t0 = Clock::now();
  const double a = 3.3, eps = 0.025;
  bool feasible_ok = true;
  std::vector<double> avg_bound;
  for (int m = 1; m <= 10; ++m) {
    const auto b = lossless_bound(a, eps, m);
    if (m <= 3) {
      feasible_ok &= b.feasible && std::isfinite(b.r_bar);
      avg_bound.push_back(std::exp2(b.r_bar));
    } else {
      feasible_ok &= !b.feasible && std::isinf(b.r_bar);
    }
  }
  const bool min_at_one =
      avg_bound[0] < avg_bound[1] && avg_bound[0] < avg_bound[2];

  const std::int64_t expected_total[] = {4, 13, 190};
  std::ostringstream d;
  bool totals_ok = true;
  std::vector<double> avgs;
  for (int m = 1; m <= 4; ++m) {
    const auto lvl = min_feasible_average_level(a, eps, 0.0, m, 1000000);
    if (m == 4) {
      totals_ok &= !lvl.has_value();
      d << "m=4 none; ";
      continue;
    }
    if (!lvl) {
      totals_ok = false;
      d << "m=" << m << " none; ";
      continue;
    }
    const double expected_avg = std::pow(static_cast<double>(expected_total[m - 1]), 1.0 / m);
    totals_ok &= lvl->total == expected_total[m - 1] && std::abs(lvl->average - expected_avg) <= 1e-9;
    avgs.push_back(lvl->average);
    d << "m=" << m << " T=" << lvl->total << " (want " << expected_total[m - 1] << ") avg "
      << fmt("%.4f", lvl->average) << "; ";
  }
  const bool two_best = avgs.size() == 3 && avgs[1] < avgs[0] && avgs[1] < avgs[2];
  const double elapsed = seconds_since(t0);
  d << "lossless feasibility " << (feasible_ok ? "ok" : "wrong") << ", bound minimal at m=1 "
    << (min_at_one ? "yes" : "no") << ", m=2 best " << (two_best ? "yes" : "no") << ", "
    << fmt("%.2f", elapsed) << " s";
  return {feasible_ok && min_at_one && totals_ok && two_best && elapsed < 5.0, d.str()};
}

// 8. Plants certified with margin by rho(F) decay in simulation under every strategy.
Outcome empirical_sufficiency() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(108);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int accepted = 0, runs = 0, stable = 0;
  std::string first_failure;
  while (accepted < 20) {
    const int n = 1 + static_cast<int>(3.0 * unit(rng)) % 3;
    std::vector<double> a_star(n), eps(n);
    for (int i = 0; i < n; ++i) eps[i] = 0.2 * unit(rng);
    for (int i = 0; i + 1 < n; ++i) a_star[i] = -1.5 + 3.0 * unit(rng);
    const double mag = 1.0 + eps[n - 1] + (2.5 - eps[n - 1]) * (1.0 - unit(rng));
    a_star[n - 1] = unit(rng) < 0.5 ? -mag : mag;
    const int levels = static_cast<int>(std::round(std::exp2(1.0 + 5.0 * unit(rng))));
    const double p = 0.3 * unit(rng);
    const UncertainPlant plant(a_star, eps);
    if (!(sufficient_mss(plant, levels, p).rho < 0.9)) continue;
    ++accepted;

    std::vector<int> mixed(n);
    for (int i = 0; i < n; ++i) mixed[i] = unit(rng) < 0.5 ? -1 : 1;
    const std::vector<ParamStrategy> strategies = {
        ParamStrategy::nominal(),          ParamStrategy::vertex(std::vector<int>(n, 1)),
        ParamStrategy::vertex(std::vector<int>(n, -1)), ParamStrategy::vertex(mixed),
        ParamStrategy::uniform(accepted),  ParamStrategy::adversarial()};
    for (const auto& s : strategies) {
      Experiment exp;
      exp.base_seed = 1000 + accepted;
      exp.strategy = s;
      const auto r = run_experiment(plant, QuantizerSpec(levels), p, exp);
      ++runs;
      if (r.verdict == Verdict::Stable) {
        ++stable;
      } else if (first_failure.empty()) {
        first_failure = "; first non-stable: n=" + std::to_string(n) + " N=" + std::to_string(levels) +
                        " p=" + fmt("%.3f", p) + " " + s.name() + " slope " + fmt("%.3g", r.slope);
      }
    }
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream d;
  d << stable << "/" << runs << " runs Stable" << first_failure << ", " << fmt("%.1f", elapsed) << " s";
  return {stable == runs && elapsed < 120.0, d.str()};
}

// 9. Loss above the necessary limit is never classified Stable under the greedy adversary.
Outcome empirical_necessity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int stable = 0;
  std::ostringstream verdicts;
  for (int t = 0; t < 10; ++t) {
    const double lambda = 1.5 + 2.5 * (1.0 - unit(rng));
    const double eps = 0.01 + 0.29 * unit(rng);
    const double p_nec = necessary_bounds(lambda, eps, 0.0).p_nec;
    const double p_hi = std::min(0.95, 2.0 * p_nec);
    const double p = p_hi - (p_hi - p_nec) * unit(rng);
    const int levels = static_cast<int>(std::round(std::exp2(1.0 + 5.0 * unit(rng))));
    Experiment exp;
    exp.base_seed = 2000 + t;
    exp.strategy = ParamStrategy::adversarial();
    const auto r = run_experiment(UncertainPlant({lambda}, {eps}), QuantizerSpec(levels), p, exp);
    stable += r.verdict == Verdict::Stable;
    verdicts << (t ? " " : "") << to_string(r.verdict).substr(0, 1);
  }
  std::ostringstream d;
  d << stable << "/10 Stable [" << verdicts.str() << "], " << fmt("%.1f", seconds_since(t0)) << " s";
  return {stable == 0, d.str()};
}

// 10. Binomial kappa-bar against sampled loss windows.
Outcome kappa_bar_cross_check() {
  std::mt19937_64 rng(110);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr int kWindows = 100000;
  int within = 0;
  double worst_z = 0.0, worst_eta = 0.0;
  for (int i = 0; i < 50; ++i) {
    TimeShareConfig cfg;
    cfg.eps = 0.2 * unit(rng);
    cfg.a_star = (unit(rng) < 0.5 ? -1.0 : 1.0) * (1.05 + cfg.eps + 2.0 * unit(rng));
    cfg.m = 1 + static_cast<int>(5.0 * unit(rng)) % 5;
    cfg.levels = 2.0 + 6.0 * unit(rng);
    cfg.p = 0.3 * unit(rng);
    const LossChannel channel({cfg.p, static_cast<std::uint64_t>(i)});
    double sum = 0.0, sum_sq = 0.0;
    for (int w = 0; w < kWindows; ++w) {
      int received = 0;
      for (int s = 0; s < cfg.m; ++s) {
        received += channel.draw(static_cast<std::uint64_t>(w) * cfg.m + s);
      }
      const double k = kappa(cfg.a_star, cfg.eps, cfg.m, std::pow(cfg.levels, received));
      sum += k * k;
      sum_sq += k * k * k * k;
    }
    const double mean = sum / kWindows;
    const double se = std::sqrt(std::max(sum_sq / kWindows - mean * mean, 0.0) / kWindows);
    const double diff = std::abs(mean - kappa_bar(cfg));
    const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : inf());
    worst_z = std::max(worst_z, z);
    within += z <= 3.0;

    TimeShareConfig single = cfg;
    single.m = 1;
    worst_eta = std::max(worst_eta, std::abs(kappa_bar(single) - eta_second_moment(std::abs(cfg.a_star), cfg.eps,
                                                                                    cfg.p, cfg.levels)));
  }
  std::ostringstream d;
  d << within << "/50 within 3 SE (max " << fmt("%.2f", worst_z) << " SE), m=1 max |diff| "
    << fmt("%.3g", worst_eta);
  return {within == 50 && worst_eta < 1e-12, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"zero-uncertainty reduction", zero_uncertainty_reduction},
      {"interval oracle", interval_oracle},
      {"eta enumeration", eta_enumeration},
      {"scalar rho(F) equivalence", scalar_equivalence},
      {"rate ordering", rate_ordering},
      {"second-order sweep", second_order_sweep},
      {"time-sharing durations", time_sharing_durations},
      {"empirical sufficiency", empirical_sufficiency},
      {"empirical necessity direction", empirical_necessity},
      {"kappa-bar cross-check", kappa_bar_cross_check},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
