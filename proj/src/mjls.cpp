#include "ratelim/mjls.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace ratelim {

LossWindow LossWindow::from_index(std::size_t n, std::size_t index) {
  if (n == 0 || index < 1 || index > (std::size_t{1} << n)) {
    throw std::invalid_argument("loss window index out of range");
  }
  LossWindow w;
  w.index = index;
  w.bits.resize(n);
  const std::size_t code = index - 1;
  for (std::size_t i = 0; i < n; ++i) w.bits[i] = static_cast<int>((code >> (n - 1 - i)) & 1U);
  return w;
}

LossWindow LossWindow::from_bits(std::vector<int> bits) {
  if (bits.empty()) throw std::invalid_argument("loss window needs at least one flag");
  std::size_t code = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw std::invalid_argument("loss window flags must be 0 or 1");
    code = (code << 1U) | static_cast<std::size_t>(b);
  }
  return {std::move(bits), code + 1};
}

double theta(double a_star_i, double eps_i, double levels, int gamma) {
  if (!(levels >= 2.0)) throw std::invalid_argument("theta: level count must be at least 2");
  const double a = std::abs(a_star_i);
  if (gamma == 0) return a + eps_i;
  if (a - eps_i > 0.0) return (a + eps_i * (levels - 1.0)) / levels;
  return std::max((a + eps_i) / levels, eps_i);
}

Eigen::MatrixXd build_transition(std::size_t n, double p) {
  if (n == 0) throw std::invalid_argument("transition: order must be at least 1");
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("loss probability must lie in [0, 1)");
  const auto states = static_cast<Eigen::Index>(std::size_t{1} << n);
  const Eigen::Index half = states / 2;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(states, states);
  for (Eigen::Index i = 0; i < states; ++i) {
    P(i, i / 2) = p;
    P(i, half + i / 2) = 1.0 - p;
  }
  return P;
}

MjlsModel build_F(const UncertainPlant& plant, double levels, double p) {
  const std::size_t n = plant.order();
  if (n > kMaxMjlsOrder) {
    throw DimensionError("plant order " + std::to_string(n) + " exceeds the dense limit " +
                         std::to_string(kMaxMjlsOrder));
  }
  MjlsModel model;
  model.n = n;
  model.levels = levels;
  model.p = p;
  model.P = build_transition(n, p);

  const auto nn = static_cast<Eigen::Index>(n);
  model.theta_table.resize(nn, 2);
  for (Eigen::Index i = 0; i < nn; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (int g = 0; g < 2; ++g) {
      model.theta_table(i, g) = theta(plant.nominal(ui), plant.radius(ui), levels, g);
    }
  }

  const std::size_t states = std::size_t{1} << n;
  model.H.reserve(states);
  for (std::size_t s = 1; s <= states; ++s) {
    const LossWindow w = LossWindow::from_index(n, s);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nn, nn);
    for (Eigen::Index r = 0; r + 1 < nn; ++r) h(r, r + 1) = 1.0;
    // Last row: theta_n, ..., theta_1; theta_i reads gamma_{k-i+1} = bits[i-1].
    for (Eigen::Index j = 0; j < nn; ++j) {
      const Eigen::Index i = nn - j;  // one-based coefficient index
      h(nn - 1, j) = model.theta_table(i - 1, w.bits[static_cast<std::size_t>(i - 1)]);
    }
    model.H.push_back(std::move(h));
  }

  // (P^T kron I) is block-sparse against the block diagonal, so each block of
  // F is a single scaled Kronecker square.
  const Eigen::Index block = nn * nn;
  const auto ns = static_cast<Eigen::Index>(states);
  model.F = Eigen::MatrixXd::Zero(ns * block, ns * block);
  for (Eigen::Index j = 0; j < ns; ++j) {
    const Eigen::MatrixXd k = Eigen::kroneckerProduct(model.H[static_cast<std::size_t>(j)],
                                                      model.H[static_cast<std::size_t>(j)]);
    for (Eigen::Index i = 0; i < ns; ++i) {
      const double weight = model.P(j, i);
      if (weight != 0.0) model.F.block(i * block, j * block, block, block) = weight * k;
    }
  }
  return model;
}

namespace {

struct PowerRun {
  bool converged = false;
  double estimate = 0.0;
  int iterations = 0;
};

PowerRun power_iterate(const Eigen::MatrixXd& m, double shift, double rel_tol, int cap) {
  const Eigen::Index n = m.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double prev = -1.0;
  PowerRun run;
  for (int it = 1; it <= cap; ++it) {
    Eigen::VectorXd y = m * x;
    if (shift != 0.0) y += shift * x;
    // x stays nonnegative with unit 1-norm, so the sum is ||M x||_1.
    const double s = y.sum();
    run.iterations = it;
    run.estimate = s;
    if (!(s > 0.0)) {
      run.converged = true;
      run.estimate = shift;
      return run;
    }
    x = y / s;
    if (prev >= 0.0 && std::abs(s - prev) <= rel_tol * s) {
      run.converged = true;
      return run;
    }
    prev = s;
  }
  return run;
}

}  // namespace

SpectralRadius spectral_radius(const Eigen::MatrixXd& m, double rel_tol, int max_iterations) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
  if (m.size() == 0) return {};
  if (m.minCoeff() < 0.0) throw std::invalid_argument("spectral_radius: matrix must be nonnegative");

  constexpr int kPlainBudget = 2000;
  const PowerRun plain = power_iterate(m, 0.0, rel_tol, std::min(max_iterations, kPlainBudget));
  if (plain.converged) return {std::max(plain.estimate, 0.0), plain.iterations, false};

  // A rotating peripheral spectrum keeps the plain iteration from settling;
  // shifting by about rho makes the Perron root strictly dominant.
  const double shift = plain.estimate > 0.0 ? plain.estimate : 1.0;
  const int remaining = std::max(max_iterations - plain.iterations, 1);
  const PowerRun shifted = power_iterate(m, shift, rel_tol, remaining);
  if (!shifted.converged) {
    throw ConvergenceError("spectral_radius: no convergence within " +
                           std::to_string(max_iterations) + " iterations");
  }
  return {std::max(shifted.estimate - shift, 0.0), plain.iterations + shifted.iterations, true};
}

Sufficiency sufficient_mss(const UncertainPlant& plant, int levels, double p) {
  if (levels < 2) throw std::invalid_argument("sufficiency test requires N >= 2");
  const MjlsModel model = build_F(plant, levels, p);
  const double rho = spectral_radius(model.F).rho;
  return {rho, rho < 1.0};
}

MinLevel min_sufficient_N(const UncertainPlant& plant, double p, int n_max) {
  if (n_max < 2) throw std::invalid_argument("min_sufficient_N: N_max must be at least 2");
  MinLevel out;
  double largest = 0.0;
  auto rho_at = [&](int levels) {
    const double r = sufficient_mss(plant, levels, p).rho;
    largest = std::max(largest, r);
    return r;
  };

  // Bracket [last_fail, hit] by doubling.
  int last_fail = 1;
  int hit = 0;
  double hit_rho = 0.0;
  for (int levels = 2;; levels = std::min(levels * 2, n_max)) {
    const double r = rho_at(levels);
    if (r < 1.0) {
      hit = levels;
      hit_rho = r;
      break;
    }
    last_fail = levels;
    if (levels == n_max) break;
  }
  if (hit == 0) {
    out.rho = largest;
    return out;
  }
  while (hit - last_fail > 1) {
    const int mid = last_fail + (hit - last_fail) / 2;
    const double r = rho_at(mid);
    if (r < 1.0) {
      hit = mid;
      hit_rho = r;
    } else {
      last_fail = mid;
    }
  }
  // Confirm nothing below the bracketed hit passes.
  for (int levels = hit - 1; levels >= 2; --levels) {
    const double r = rho_at(levels);
    if (r < 1.0) {
      out.monotone = false;
      hit = levels;
      hit_rho = r;
    }
  }
  out.levels = hit;
  out.rho = hit_rho;
  return out;
}

}  // namespace ratelim
