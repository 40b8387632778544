#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include <ulpsolve/optimizer.hpp>
#include <ulpsolve/smtlib.hpp>

#include "generators.hpp"
#include "oracles.hpp"

using namespace ulpsolve;
using namespace std::chrono_literals;

namespace {

Evaluation plain(double v) { return {v, false}; }

auto quadratic(std::vector<double> centre) {
  return [centre](std::span<const double> x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - centre[i]) * (x[i] - centre[i]);
    return plain(s);
  };
}

Evaluation rosenbrock(std::span<const double> x) {
  const double a = 1 - x[0];
  const double b = x[1] - x[0] * x[0];
  return plain(a * a + 100 * b * b);
}

OptimizerConfig quiet() {
  OptimizerConfig c;
  c.hops = 5;
  c.rng_seed = 3;
  return c;
}

}  // namespace

TEST(Powell, Quadratic) {
  const std::vector<double> start{10, -7, 3};
  const auto r = local_minimize(quadratic({1, 2, -3}), start, quiet());
  ASSERT_EQ(r.best_point.size(), 3u);
  EXPECT_NEAR(r.best_point[0], 1, 1e-4);
  EXPECT_NEAR(r.best_point[1], 2, 1e-4);
  EXPECT_NEAR(r.best_point[2], -3, 1e-4);
  EXPECT_LT(r.best_value, 1e-8);
  EXPECT_EQ(r.status, OptStatus::Converged);
  EXPECT_FALSE(r.exact_zero);
}

TEST(Powell, Rosenbrock) {
  const std::vector<double> start{-1.2, 1.0};
  OptimizerConfig c = quiet();
  c.local_max_iters = 2000;
  const auto r = local_minimize(rosenbrock, start, c);
  EXPECT_NEAR(r.best_point[0], 1, 1e-3);
  EXPECT_NEAR(r.best_point[1], 1, 2e-3);
}

TEST(Powell, ConstantObjectiveStopsImmediately) {
  const std::vector<double> start{5, 5};
  const auto r = local_minimize([](std::span<const double>) { return plain(4.0); }, start, quiet());
  EXPECT_EQ(r.best_value, 4.0);
  EXPECT_EQ(r.best_point, start);
  EXPECT_EQ(r.status, OptStatus::Converged);
  EXPECT_LT(r.evaluations, 500u);
}

TEST(Powell, NeverReturnsWorseThanStart) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> start{u(rng), u(rng)};
    auto bumpy = [](std::span<const double> x) { return plain(2 + std::sin(x[0]) * std::cos(x[1]) + 0.01 * x[0] * x[0]); };
    const double f0 = bumpy(start).value;
    const auto r = local_minimize(bumpy, start, quiet());
    ASSERT_LE(r.best_value, f0);
    ASSERT_EQ(bumpy(r.best_point).value, r.best_value);
  }
}

TEST(Powell, NanIsTreatedAsInfinity) {
  const std::vector<double> start{3};
  auto f = [](std::span<const double> x) { return plain(x[0] < 1 ? std::nan("") : (x[0] - 2) * (x[0] - 2)); };
  const auto r = local_minimize(f, start, quiet());
  EXPECT_NEAR(r.best_point[0], 2, 1e-4);
}

TEST(Search, ExactZeroStopsEarly) {
  int calls = 0;
  auto f = [&calls](std::span<const double> x) {
    ++calls;
    return Evaluation{std::abs(x[0]), x[0] == 0.0};
  };
  const std::vector<double> start{0.0};
  OptimizerConfig c = quiet();
  c.hops = 100;
  const auto r = basin_hop(f, start, c);
  EXPECT_TRUE(r.exact_zero);
  EXPECT_EQ(r.status, OptStatus::ZeroFound);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.evaluations, 1u);
  EXPECT_EQ(r.best_value, 0.0);
}

TEST(Search, ZeroHopsEvaluatesOnlyTheStart) {
  OptimizerConfig c = quiet();
  c.hops = 0;
  const std::vector<double> start{4, 4};
  const auto r = basin_hop(quadratic({0, 0}), start, c);
  EXPECT_EQ(r.evaluations, 1u);
  EXPECT_EQ(r.best_point, start);
  EXPECT_EQ(r.best_value, 32.0);
}

TEST(Search, TraceIsMonotoneAndOnePerHop) {
  auto f = [](std::span<const double> x) {
    return plain(x[0] * x[0] / 100 + 10 * (1 - std::cos(2 * M_PI * x[0])));  // Rastrigin-like
  };
  OptimizerConfig c = quiet();
  c.hops = 12;
  const std::vector<double> start{7.3};
  const auto r = basin_hop(f, start, c);
  ASSERT_EQ(r.trace.size(), 12u);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
  EXPECT_EQ(r.trace.back(), r.best_value);
}

TEST(Search, BasinHoppingEscapesLocalMinimum) {
  // Local basin near 4 (value 1); global basin near -4 (value 0).
  auto f = [](std::span<const double> x) {
    const double a = (x[0] - 4) * (x[0] - 4) + 1;
    const double b = (x[0] + 4) * (x[0] + 4);
    return plain(std::min(a, b));
  };
  OptimizerConfig c = quiet();
  c.hops = 30;
  const std::vector<double> start{4.5};
  const auto one = basin_hop(f, start, [&] { auto k = c; k.hops = 1; return k; }());
  EXPECT_NEAR(one.best_value, 1.0, 1e-8);
  const auto many = basin_hop(f, start, c);
  EXPECT_LT(many.best_value, 1e-8);
}

TEST(Search, DeterministicForFixedSeed) {
  auto f = [](std::span<const double> x) { return plain(std::abs(std::sin(3 * x[0]) + x[1] * x[1] - 0.3)); };
  auto sampler = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-5, 5);
    return std::vector<double>{u(rng), u(rng)};
  };
  OptimizerConfig c = quiet();
  c.n_restarts = 4;
  const auto a = multi_start(f, c, sampler);
  const auto b = multi_start(f, c, sampler);
  EXPECT_EQ(a.best_point, b.best_point);
  EXPECT_EQ(a.best_value, b.best_value);
  EXPECT_EQ(a.evaluations, b.evaluations);
  EXPECT_EQ(a.trace, b.trace);
  c.rng_seed = 99;
  const auto other = multi_start(f, c, sampler);
  EXPECT_NE(a.best_point, other.best_point);
}

TEST(Search, ParallelMultiStartFindsZero) {
  auto f = [](std::span<const double> x) {
    const double r = std::round(x[0]);
    return Evaluation{std::abs(x[0] - 3), x[0] == 3.0 || r == 3.0};
  };
  auto sampler = [](std::mt19937_64& rng) { return std::vector<double>{std::uniform_real_distribution<double>(-9, 9)(rng)}; };
  OptimizerConfig c = quiet();
  c.n_restarts = 8;
  c.parallel = true;
  const auto r = multi_start(f, c, sampler);
  EXPECT_TRUE(r.exact_zero);
  EXPECT_EQ(r.status, OptStatus::ZeroFound);
}

TEST(Search, DeadlineStopsTheSearch) {
  auto f = [](std::span<const double> x) { return plain(std::abs(std::sin(x[0] * 1e3)) + 1.0); };
  OptimizerConfig c = quiet();
  c.hops = 1'000'000;
  c.time_budget = 50ms;
  const std::vector<double> start{1};
  const auto t0 = Clock::now();
  const auto r = basin_hop(f, start, c);
  EXPECT_LT(Clock::now() - t0, 2s);
  EXPECT_TRUE(r.timed_out);
  EXPECT_EQ(r.status, OptStatus::BudgetExhausted);
  EXPECT_FALSE(r.best_point.empty());
}

TEST(Search, DeriveSeedSeparatesStreams) {
  EXPECT_NE(derive_seed(0, 0), derive_seed(0, 1));
  EXPECT_NE(derive_seed(0, 0), derive_seed(1, 0));
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(LatticeRefine, FindsModelWithinBound) {
  // x > 1 with anchor 1: one step up is a model.
  const auto f = parse("(declare-fun x () Float64) (assert (fp.gt x ((_ to_fp 11 53) RNE 1.0)))");
  const auto s3 = build_s3(f, Assignment{{FpScalar::from_double(1.0)}});
  const auto r = lattice_refine(s3, quiet());
  ASSERT_TRUE(r.exact_zero);
  EXPECT_EQ(r.best_point, std::vector<double>{1.0});
  EXPECT_TRUE(oracle::is_model(f, s3.assignment_at(r.best_point)));
}

TEST(LatticeRefine, StaysInsideTheBound) {
  // Needs 100 steps up from the anchor; a bound of 8 cannot reach it.
  const double target = gen::step_one(1.0, 100);
  const auto f = parse("(declare-fun x () Float64) (assert (fp.geq x " + term_string(term::constant(FpScalar::from_double(target)), {}) + "))");
  const auto s3 = build_s3(f, Assignment{{FpScalar::from_double(1.0)}});
  OptimizerConfig c = quiet();
  c.s3_bound = 8;
  c.hops = 1;
  const auto r = lattice_refine(s3, c);
  EXPECT_FALSE(r.exact_zero);
  c.s3_bound = 128;
  const auto wide = lattice_refine(s3, c);
  EXPECT_TRUE(wide.exact_zero);
  EXPECT_EQ(wide.best_point[0], 100.0);
}

TEST(LatticeRefine, ChainWithOneCoordinateOff) {
  std::string src;
  for (int i = 1; i <= 20; ++i) src += "(declare-fun x" + std::to_string(i) + " () Float64)";
  src += "(assert (fp.eq x1 ((_ to_fp 11 53) RNE 0.7)))";
  for (int i = 1; i < 20; ++i) src += "(assert (fp.eq x" + std::to_string(i + 1) + " x" + std::to_string(i) + "))";
  const auto f = parse(src);
  Assignment anchor;
  for (int i = 0; i < 20; ++i) anchor.values.push_back(FpScalar::from_double(0.7));
  anchor.values[13] = FpScalar::from_double(std::nextafter(0.7, 1.0));
  const auto s3 = build_s3(f, anchor);
  const auto r = lattice_refine(s3, quiet());
  ASSERT_TRUE(r.exact_zero);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(r.best_point[static_cast<std::size_t>(i)], i == 13 ? -1.0 : 0.0);
}

TEST(LatticeRefine, RejectsOtherObjectives) {
  const auto f = parse("(declare-fun x () Float64) (assert (fp.gt x x))");
  EXPECT_THROW(lattice_refine(build_s2(f), quiet()), std::invalid_argument);
}

TEST(StartBox, SamplesAreFiniteAndInFormat) {
  const auto f = parse(R"((declare-fun a () Float32) (declare-fun b () Float64)
      (assert (fp.lt a ((_ to_fp 8 24) RNE 0.25))) (assert (fp.gt b ((_ to_fp 11 53) RNE 12345.0))))");
  const StartBox box(f);
  EXPECT_EQ(box.constant_pool().size(), 2u);
  std::mt19937_64 rng(5);
  bool saw_constant = false;
  for (int i = 0; i < 5000; ++i) {
    const auto x = box(rng);
    ASSERT_EQ(x.size(), 2u);
    ASSERT_TRUE(std::isfinite(x[0]) && std::isfinite(x[1]));
    ASSERT_EQ(static_cast<double>(static_cast<float>(x[0])), x[0]);
    saw_constant = saw_constant || x[1] == 12345.0;
  }
  EXPECT_TRUE(saw_constant);
}
