#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ratelim/plant.hpp"

namespace ratelim {

/// Largest plant order for which the dense lifted matrix is built.
inline constexpr std::size_t kMaxMjlsOrder = 6;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The last n reception flags (gamma_k, ..., gamma_{k-n+1}). The state index is
/// one-based; gamma_k is the most significant bit, so {0,...,0,1} is state 2.
struct LossWindow {
  std::vector<int> bits;  // bits[i] = gamma_{k-i}
  std::size_t index = 1;

  static LossWindow from_index(std::size_t n, std::size_t index);
  static LossWindow from_bits(std::vector<int> bits);
};

/// Per-step growth bound of mu(A_i * Y) relative to sigma for flag gamma.
/// Accepts real N >= 2 so the level threshold can be bisected.
double theta(double a_star_i, double eps_i, double levels, int gamma);

/// Shift-register transition matrix over the 2^n loss windows.
Eigen::MatrixXd build_transition(std::size_t n, double p);

struct MjlsModel {
  std::size_t n = 0;
  double levels = 0.0;
  double p = 0.0;
  Eigen::MatrixXd theta_table;       // n x 2, (i, gamma)
  std::vector<Eigen::MatrixXd> H;    // one companion-form matrix per window
  Eigen::MatrixXd P;                 // 2^n x 2^n
  Eigen::MatrixXd F;                 // (2^n n^2) square, nonnegative
};

/// Assembles H, P and F = (P^T kron I) * blockdiag(H kron H).
/// Throws DimensionError above kMaxMjlsOrder.
MjlsModel build_F(const UncertainPlant& plant, double levels, double p);

struct SpectralRadius {
  double rho = 0.0;
  int iterations = 0;
  bool shifted = false;
};

/// Perron root of a nonnegative matrix by power iteration.
/// Throws ConvergenceError if the iteration cap is hit.
SpectralRadius spectral_radius(const Eigen::MatrixXd& m, double rel_tol = 1e-12,
                               int max_iterations = 100000);

struct Sufficiency {
  double rho = 0.0;
  bool sufficient = false;  // rho < 1, strictly
};

Sufficiency sufficient_mss(const UncertainPlant& plant, int levels, double p);

struct MinLevel {
  std::optional<int> levels;  // smallest sufficient N, if any up to the cap
  double rho = 0.0;           // rho at the returned N, or the largest rho seen when none
  bool monotone = true;       // false if a smaller N than the bracketed hit also passed
};

/// Smallest integer N in [2, n_max] with rho(F) < 1. Brackets with a doubling
/// search, bisects, then scans down from the hit to confirm.
MinLevel min_sufficient_N(const UncertainPlant& plant, double p, int n_max);

}  // namespace ratelim
