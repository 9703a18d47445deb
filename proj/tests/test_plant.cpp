#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ratelim/plant.hpp"

using ratelim::ParamRealizer;
using ratelim::ParamStrategy;
using ratelim::UncertainPlant;

TEST_CASE("construction and lambda_pi") {
  CHECK(ratelim::lambda_pi(UncertainPlant({1, 2.5}, {0, 0})) == 2.5);
  CHECK(ratelim::lambda_pi(UncertainPlant({3.3}, {0.025})) == 3.3);
  CHECK(ratelim::lambda_pi(UncertainPlant({1, -2.5}, {0, 0})) == -2.5);
  CHECK_THROWS_AS(UncertainPlant({1.5}, {0.6}), std::invalid_argument);
  CHECK_THROWS_AS(UncertainPlant({2.0}, {-0.1}), std::invalid_argument);
  CHECK_THROWS_AS(UncertainPlant({2.0}, {0.1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(UncertainPlant({1.0, 2.0}, {0.1}), std::invalid_argument);
}

TEST_CASE("step") {
  const UncertainPlant p1({2.0}, {0.0});
  const std::vector<double> h1{1.0};
  const std::vector<double> a1{2.0};
  CHECK(ratelim::step(p1, h1, -2.0, a1) == 0.0);

  const UncertainPlant p2({1.0, 2.0}, {0.0, 0.0});
  const std::vector<double> h2{1.0, 1.0};
  const std::vector<double> a2{1.0, 2.0};
  CHECK(ratelim::step(p2, h2, 0.0, a2) == 3.0);
  const std::vector<double> zero{0.0, 0.0};
  CHECK(ratelim::step(p2, zero, 0.0, a2) == 0.0);

  const std::vector<double> outside{1.5, 2.0};
  CHECK_THROWS_AS(ratelim::step(p2, h2, 0.0, outside), std::invalid_argument);
}

TEST_CASE("step is affine in u") {
  const UncertainPlant p({0.7, -1.2, 2.4}, {0.1, 0.2, 0.3});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-3, 3);
  ParamRealizer r(p, ParamStrategy::uniform(4));
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> h{d(rng), d(rng), d(rng)};
    const double u = d(rng);
    const auto a = r.next([](std::span<const double>) { return 0.0; });
    const double base = ratelim::step(p, h, 0.0, a);
    const double shifted = ratelim::step(p, h, u, a);
    CHECK(shifted - base == doctest::Approx(u).epsilon(1e-14));
  }
}

TEST_CASE("realize_params") {
  const UncertainPlant p({1.0, 2.5}, {0.05, 0.05});
  const auto none = [](std::span<const double>) { return 0.0; };
  CHECK(ratelim::realize_params(p, ParamStrategy::nominal(), none) == std::vector<double>{1.0, 2.5});
  const auto v = ratelim::realize_params(p, ParamStrategy::vertex({1, 1}), none);
  CHECK(v[0] == doctest::Approx(1.05));
  CHECK(v[1] == doctest::Approx(2.55));
  const auto w = ratelim::realize_params(p, ParamStrategy::vertex({1, -1}), none);
  CHECK(w[1] == doctest::Approx(2.45));

  // History (y_{k-1}, y_k) = (1, -1): y_{k+1} = a1*(-1) + a2*1.
  const auto next = [](std::span<const double> a) { return -a[0] + a[1]; };
  const auto g = ratelim::realize_params(p, ParamStrategy::adversarial(), next);
  CHECK(g[0] == doctest::Approx(0.95));
  CHECK(g[1] == doctest::Approx(2.55));
}

TEST_CASE("strategy parsing") {
  CHECK(ParamStrategy::parse("nominal").kind == ratelim::StrategyKind::Nominal);
  CHECK(ParamStrategy::parse("vertex:+-").signs == std::vector<int>{1, -1});
  CHECK(ParamStrategy::parse("uniform", 9).seed == 9);
  CHECK(ParamStrategy::parse("adversarial").kind == ratelim::StrategyKind::GreedyAdversarial);
  CHECK_THROWS_AS(ParamStrategy::parse("bogus"), std::invalid_argument);
}

TEST_CASE("uniform strategy is reproducible and stays in the box") {
  const UncertainPlant p({0.3, -2.0}, {0.4, 0.2});
  ParamRealizer a(p, ParamStrategy::uniform(42));
  ParamRealizer b(p, ParamStrategy::uniform(42));
  const auto none = [](std::span<const double>) { return 0.0; };
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next(none);
    const auto y = b.next(none);
    CHECK(x == y);
    CHECK(p.in_box(x));
  }
}

TEST_CASE("greedy adversary dominates nominal") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-2, 2);
  std::uniform_real_distribution<double> e(0, 0.3);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 1 + t % 3;
    std::vector<double> a(n), eps(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = d(rng);
      eps[i] = e(rng);
      h[i] = d(rng);
    }
    a.back() = 1.5 + std::abs(a.back());
    const UncertainPlant p(a, eps);
    const double u = d(rng);
    const auto next = [&](std::span<const double> params) { return ratelim::step(p, h, u, params); };
    const auto g = ratelim::realize_params(p, ParamStrategy::adversarial(), next);
    CHECK(p.in_box(g));
    CHECK(std::abs(next(g)) >= std::abs(next(p.nominal())));
  }
}

TEST_CASE("companion matrix and instability check") {
  const std::vector<double> a{1.0, 2.5};
  const Eigen::MatrixXd c = ratelim::companion_matrix(a);
  CHECK(c(0, 1) == 1.0);
  CHECK(c(1, 0) == 2.5);
  CHECK(c(1, 1) == 1.0);

  CHECK(ratelim::check_unstable_assumption(UncertainPlant({3.3}, {0.025}), 5).empty());

  // y_{k+1} = y_k + 2.5 y_{k-1}: roots (1 +- sqrt(11)) / 2, the smaller has modulus ~1.16.
  const auto v = ratelim::check_unstable_assumption(UncertainPlant({1.0, 2.5}, {0.05, 0.05}), 5);
  for (const auto& s : v) CHECK(s.modulus <= 1.0);
  // Here a root near -0.5 is stable.
  const auto w = ratelim::check_unstable_assumption(UncertainPlant({-2.0, 1.2}, {0.0, 0.0}), 1);
  CHECK_FALSE(w.empty());
  CHECK_THROWS_AS(ratelim::check_unstable_assumption(UncertainPlant({3.3}, {0.025}), 0),
                  std::invalid_argument);
}
