#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ratelim/interval.hpp"

namespace ratelim {

/// Scalar autoregressive plant with interval-uncertain coefficients:
///
///   y[k+1] = a1[k] y[k] + a2[k] y[k-1] + ... + an[k] y[k-n+1] + u[k],
///   ai[k] in [ai* - eps_i, ai* + eps_i].
///
/// Construction enforces |an*| - eps_n > 1.
class UncertainPlant {
 public:
  UncertainPlant(std::vector<double> a_star, std::vector<double> eps, double y0_bound = 1.0);

  std::size_t order() const { return a_star_.size(); }
  std::span<const double> nominal() const { return a_star_; }
  std::span<const double> radii() const { return eps_; }
  double nominal(std::size_t i) const { return a_star_.at(i); }
  double radius(std::size_t i) const { return eps_.at(i); }
  double y0_bound() const { return y0_bound_; }

  /// Uncertainty box of coefficient i (zero-based, so i = 0 is a1).
  Interval coefficient_box(std::size_t i) const {
    return Interval(a_star_.at(i) - eps_.at(i), a_star_.at(i) + eps_.at(i));
  }

  bool in_box(std::span<const double> params) const;

 private:
  std::vector<double> a_star_;
  std::vector<double> eps_;
  double y0_bound_;
};

/// Product of the nominal eigenvalues, which for the companion form is an*.
inline double lambda_pi(const UncertainPlant& p) { return p.nominal().back(); }

/// One step of the recursion. `history[0]` is y[k], `history[i]` is y[k-i];
/// it must hold at least n entries (zeros before time 0).
/// Throws std::invalid_argument when params leave the uncertainty box.
double step(const UncertainPlant& plant, std::span<const double> history, double u,
            std::span<const double> params);

enum class StrategyKind { Nominal, FixedVertex, IidUniform, GreedyAdversarial };

/// How the time-varying coefficients are realized during simulation.
struct ParamStrategy {
  StrategyKind kind = StrategyKind::Nominal;
  std::vector<int> signs;  // FixedVertex only; +1/-1 per coefficient, empty = all +1
  std::uint64_t seed = 0;  // IidUniform only

  static ParamStrategy nominal() { return {}; }
  static ParamStrategy vertex(std::vector<int> signs) {
    return {StrategyKind::FixedVertex, std::move(signs), 0};
  }
  static ParamStrategy uniform(std::uint64_t seed) { return {StrategyKind::IidUniform, {}, seed}; }
  static ParamStrategy adversarial() { return {StrategyKind::GreedyAdversarial, {}, 0}; }

  /// Parses nominal | vertex[:+-...] | uniform | adversarial.
  static ParamStrategy parse(const std::string& text, std::uint64_t seed = 0);
  std::string name() const;
};

/// Candidate next output y[k+1] as a function of the realized coefficients.
using NextOutputFn = std::function<double(std::span<const double>)>;

/// Stateful realization of a ParamStrategy; owns its generator, so one
/// instance per trial.
class ParamRealizer {
 public:
  ParamRealizer(const UncertainPlant& plant, ParamStrategy strategy);

  std::vector<double> next(const NextOutputFn& next_output);
  const ParamStrategy& strategy() const { return strategy_; }

 private:
  UncertainPlant plant_;
  ParamStrategy strategy_;
  std::mt19937_64 rng_;
};

/// Single-shot convenience wrapper around ParamRealizer.
std::vector<double> realize_params(const UncertainPlant& plant, const ParamStrategy& strategy,
                                   const NextOutputFn& next_output);

/// Companion matrix of the controllable canonical form: ones on the
/// superdiagonal, last row (an, ..., a1).
Eigen::MatrixXd companion_matrix(std::span<const double> params);

struct StabilityViolation {
  std::vector<double> params;
  double modulus;  // smallest |eigenvalue| at this sample, <= 1
};

/// Samples every vertex of the box plus a `grid`-per-axis tensor grid and
/// reports samples whose companion matrix has an eigenvalue of modulus <= 1.
/// Warn-only.
std::vector<StabilityViolation> check_unstable_assumption(const UncertainPlant& plant, int grid);

}  // namespace ratelim
