#include "ratelim/plant.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace ratelim {

UncertainPlant::UncertainPlant(std::vector<double> a_star, std::vector<double> eps,
                               double y0_bound)
    : a_star_(std::move(a_star)), eps_(std::move(eps)), y0_bound_(y0_bound) {
  if (a_star_.empty()) throw std::invalid_argument("plant order must be at least 1");
  if (a_star_.size() != eps_.size()) {
    throw std::invalid_argument("a-star and eps must have the same length");
  }
  for (std::size_t i = 0; i < eps_.size(); ++i) {
    if (!std::isfinite(a_star_[i]) || !std::isfinite(eps_[i])) {
      throw std::invalid_argument("plant coefficients must be finite");
    }
    if (eps_[i] < 0.0) throw std::invalid_argument("eps must be nonnegative");
  }
  if (!(std::abs(a_star_.back()) - eps_.back() > 1.0)) {
    throw std::invalid_argument("plant requires |a_n*| - eps_n > 1");
  }
  if (!(y0_bound_ > 0.0) || !std::isfinite(y0_bound_)) {
    throw std::invalid_argument("initial output bound Y0 must be positive");
  }
}

bool UncertainPlant::in_box(std::span<const double> params) const {
  if (params.size() != order()) return false;
  for (std::size_t i = 0; i < order(); ++i) {
    if (!coefficient_box(i).contains(params[i])) return false;
  }
  return true;
}

double step(const UncertainPlant& plant, std::span<const double> history, double u,
            std::span<const double> params) {
  const std::size_t n = plant.order();
  if (history.size() < n) throw std::invalid_argument("step: history shorter than plant order");
  if (!plant.in_box(params)) throw std::invalid_argument("step: parameters outside uncertainty box");
  double next = u;
  for (std::size_t i = 0; i < n; ++i) next += params[i] * history[i];
  return next;
}

ParamStrategy ParamStrategy::parse(const std::string& text, std::uint64_t seed) {
  if (text == "nominal") return nominal();
  if (text == "uniform") return uniform(seed);
  if (text == "adversarial") return adversarial();
  if (text.rfind("vertex", 0) == 0) {
    std::vector<int> signs;
    if (text.size() > 6) {
      if (text[6] != ':') throw std::invalid_argument("strategy: expected vertex:<signs>");
      for (char c : text.substr(7)) {
        if (c == '+') {
          signs.push_back(1);
        } else if (c == '-') {
          signs.push_back(-1);
        } else {
          throw std::invalid_argument("strategy: vertex signs must be '+' or '-'");
        }
      }
    }
    return vertex(std::move(signs));
  }
  throw std::invalid_argument("unknown strategy '" + text + "'");
}

std::string ParamStrategy::name() const {
  switch (kind) {
    case StrategyKind::Nominal:
      return "nominal";
    case StrategyKind::FixedVertex: {
      std::string s = "vertex";
      if (!signs.empty()) {
        s += ':';
        for (int v : signs) s += v > 0 ? '+' : '-';
      }
      return s;
    }
    case StrategyKind::IidUniform:
      return "uniform";
    case StrategyKind::GreedyAdversarial:
      return "adversarial";
  }
  return "unknown";
}

ParamRealizer::ParamRealizer(const UncertainPlant& plant, ParamStrategy strategy)
    : plant_(plant), strategy_(std::move(strategy)), rng_(strategy_.seed) {
  if (strategy_.kind == StrategyKind::FixedVertex && !strategy_.signs.empty() &&
      strategy_.signs.size() != plant.order()) {
    throw std::invalid_argument("vertex strategy needs one sign per coefficient");
  }
}

std::vector<double> ParamRealizer::next(const NextOutputFn& next_output) {
  const UncertainPlant& p = plant_;
  const std::size_t n = p.order();
  std::vector<double> params(p.nominal().begin(), p.nominal().end());
  switch (strategy_.kind) {
    case StrategyKind::Nominal:
      break;
    case StrategyKind::FixedVertex:
      for (std::size_t i = 0; i < n; ++i) {
        const int s = strategy_.signs.empty() ? 1 : strategy_.signs[i];
        const Interval box = p.coefficient_box(i);
        params[i] = s > 0 ? box.hi() : box.lo();
      }
      break;
    case StrategyKind::IidUniform:
      for (std::size_t i = 0; i < n; ++i) {
        const Interval box = p.coefficient_box(i);
        if (box.measure() > 0.0) {
          params[i] = std::uniform_real_distribution<double>(box.lo(), box.hi())(rng_);
        }
      }
      break;
    case StrategyKind::GreedyAdversarial:
      // Coordinate sweep from the nominal point. |y| is convex in each
      // coefficient, so a vertex never does worse than the midpoint.
      for (std::size_t i = 0; i < n; ++i) {
        const Interval box = p.coefficient_box(i);
        params[i] = box.lo();
        const double at_lo = std::abs(next_output(params));
        params[i] = box.hi();
        const double at_hi = std::abs(next_output(params));
        if (at_lo > at_hi) params[i] = box.lo();
      }
      break;
  }
  return params;
}

std::vector<double> realize_params(const UncertainPlant& plant, const ParamStrategy& strategy,
                                   const NextOutputFn& next_output) {
  ParamRealizer r(plant, strategy);
  return r.next(next_output);
}

Eigen::MatrixXd companion_matrix(std::span<const double> params) {
  const auto n = static_cast<Eigen::Index>(params.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r + 1 < n; ++r) a(r, r + 1) = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) a(n - 1, j) = params[static_cast<std::size_t>(n - 1 - j)];
  return a;
}

namespace {

double min_eigen_modulus(std::span<const double> params) {
  const Eigen::MatrixXd a = companion_matrix(params);
  if (a.rows() == 1) return std::abs(a(0, 0));
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
  return solver.eigenvalues().cwiseAbs().minCoeff();
}

}  // namespace

std::vector<StabilityViolation> check_unstable_assumption(const UncertainPlant& plant, int grid) {
  if (grid < 1) throw std::invalid_argument("grid must be at least 1");
  const std::size_t n = plant.order();
  std::vector<StabilityViolation> out;
  std::vector<double> params(n);

  auto check = [&] {
    const double m = min_eigen_modulus(params);
    if (m <= 1.0) out.push_back({params, m});
  };

  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    for (std::size_t i = 0; i < n; ++i) {
      const Interval box = plant.coefficient_box(i);
      params[i] = (mask >> i) & 1U ? box.hi() : box.lo();
    }
    check();
  }

  if (std::pow(static_cast<double>(grid), static_cast<double>(n)) > 1e7) {
    throw std::invalid_argument("check_unstable_assumption: grid too fine for plant order");
  }
  std::vector<int> idx(n, 0);
  for (;;) {
    for (std::size_t i = 0; i < n; ++i) {
      const Interval box = plant.coefficient_box(i);
      params[i] = grid == 1 ? plant.nominal(i)
                            : box.lo() + box.measure() * idx[i] / static_cast<double>(grid - 1);
    }
    check();
    std::size_t d = 0;
    while (d < n && ++idx[d] == grid) idx[d++] = 0;
    if (d == n) break;
  }
  return out;
}

}  // namespace ratelim
