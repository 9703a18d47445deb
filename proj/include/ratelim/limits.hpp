#pragma once

#include <optional>

namespace ratelim {

/// Necessary data-rate (bits/packet) and loss-probability limits for mean-square
/// stabilization of the uncertain plant. Rate entries are nullopt where the
/// closed form has a nonpositive radicand or denominator.
struct NecessaryBounds {
  std::optional<double> r_nec0;  // low-rate branch, 1 <= N < 2
  std::optional<double> r_nec1;  // N >= 2 branch
  std::optional<double> r_nec;   // max of the two; nullopt when not feasible
  double p_nec = 0.0;
  double p_nec0 = 0.0;
  double p_nec1 = 0.0;
  bool feasible = false;  // eps_n < 1 and p < p_nec
};

NecessaryBounds necessary_bounds(double lambda_abs, double eps_n, double p);

/// Exact limits for a known (eps = 0) plant.
struct KnownPlantBounds {
  std::optional<double> r_y;
  double p_y = 0.0;
  bool feasible = false;
};

KnownPlantBounds you_bounds(double lambda_abs, double p);

/// Lossless sufficient rate of the norm-bounded-uncertainty scheme, scalar plants.
std::optional<double> phat_bound(double lambda_abs, double eps1);

/// Lossless sufficient rate of the stochastic-uncertainty scheme, scalar plants.
std::optional<double> martins_bound(double lambda_abs, double eps1);

/// Worst-case growth of the oldest cell's contribution to sigma over one step,
/// for reception flag gamma and (possibly non-integer) level count N >= 1.
double eta(double lambda_abs, double eps_n, double levels, int gamma);

/// E[eta^2] = p eta(0)^2 + (1 - p) eta(1)^2. MSS of sigma requires this < 1.
double eta_second_moment(double lambda_abs, double eps_n, double p, double levels);

/// max over every decoder cell Y (N cells and the loss interval, sigma-wide range
/// centered at zero) of mu(A_n * Y), by enumeration.
double max_cell_expansion(double a_n_star, double eps_n, int levels, int gamma, double sigma);

}  // namespace ratelim
