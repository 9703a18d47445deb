#include "ratelim/limits.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ratelim/codec_loop.hpp"
#include "ratelim/interval.hpp"

namespace ratelim {

namespace {

void check_probability(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("loss probability must lie in [0, 1)");
}

std::optional<double> log2_ratio(double num, double den) {
  if (!(num > 0.0) || !(den > 0.0)) return std::nullopt;
  return std::log2(num / den);
}

}  // namespace

NecessaryBounds necessary_bounds(double lambda_abs, double eps_n, double p) {
  check_probability(p);
  if (!(lambda_abs > 0.0)) throw std::invalid_argument("|lambda| must be positive");
  if (!(eps_n >= 0.0)) throw std::invalid_argument("eps_n must be nonnegative");

  const double hi = lambda_abs + eps_n;
  const double lo = lambda_abs - eps_n;
  const double keep = std::sqrt(1.0 - p);
  const double radicand = 1.0 - p * hi * hi;

  NecessaryBounds b;
  b.p_nec0 = 1.0 / (hi * hi);
  b.p_nec1 = (1.0 - eps_n * eps_n) / (lambda_abs * lambda_abs + 2.0 * lambda_abs * eps_n);
  b.p_nec = (1.0 - eps_n * eps_n) / (hi * hi - eps_n * eps_n);
  if (radicand > 0.0) {
    const double root = std::sqrt(radicand);
    b.r_nec0 = log2_ratio(hi * keep, root);
    b.r_nec1 = log2_ratio(lo * keep, root - eps_n * keep);
  }
  b.feasible = eps_n < 1.0 && p < b.p_nec && b.r_nec0 && b.r_nec1;
  if (b.feasible) b.r_nec = std::max(*b.r_nec0, *b.r_nec1);
  return b;
}

KnownPlantBounds you_bounds(double lambda_abs, double p) {
  check_probability(p);
  if (!(lambda_abs > 0.0)) throw std::invalid_argument("|lambda| must be positive");
  KnownPlantBounds b;
  b.p_y = 1.0 / (lambda_abs * lambda_abs);
  const double radicand = 1.0 - p * lambda_abs * lambda_abs;
  if (radicand > 0.0) b.r_y = log2_ratio(lambda_abs * std::sqrt(1.0 - p), std::sqrt(radicand));
  b.feasible = p < b.p_y && b.r_y.has_value();
  return b;
}

std::optional<double> phat_bound(double lambda_abs, double eps1) {
  const double den = 1.0 - eps1 * (2.0 * lambda_abs + 2.0 * eps1 + 1.0);
  if (!(den > 0.0)) return std::nullopt;
  return log2_ratio(lambda_abs - eps1 * (lambda_abs + eps1), den);
}

std::optional<double> martins_bound(double lambda_abs, double eps1) {
  if (!(eps1 < 1.0)) return std::nullopt;
  return log2_ratio(lambda_abs, 1.0 - eps1);
}

double eta(double lambda_abs, double eps_n, double levels, int gamma) {
  if (!(levels >= 1.0)) throw std::invalid_argument("eta: level count must be at least 1");
  const double scale = gamma == 1 ? levels : 1.0;
  return (lambda_abs + std::max(scale - 1.0, 1.0) * eps_n) / scale;
}

double eta_second_moment(double lambda_abs, double eps_n, double p, double levels) {
  const double lost = eta(lambda_abs, eps_n, levels, 0);
  const double got = eta(lambda_abs, eps_n, levels, 1);
  return p * lost * lost + (1.0 - p) * got * got;
}

double max_cell_expansion(double a_n_star, double eps_n, int levels, int gamma, double sigma) {
  const Interval a(a_n_star - eps_n, a_n_star + eps_n);
  if (gamma == 0) return scale_product(a, decode_cell(levels, sigma, 0.0, std::nullopt)).measure();
  double best = 0.0;
  for (int i = 0; i < levels; ++i) {
    best = std::max(best, scale_product(a, decode_cell(levels, sigma, 0.0, i)).measure());
  }
  return best;
}

}  // namespace ratelim
