#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lamd/optim.hpp"
#include "lamd/rng.hpp"
#include "oracles.hpp"

using namespace lamd;
using namespace oracle;

namespace {

TapeObjective rosenbrock() {
  return [](ad::Tape& t, ad::Var x) {
    ad::Var x0 = ad::crop(ad::reshape(x, {1, 1, 1, 2}), 0, 0, 1, 1);
    ad::Var x1 = ad::crop(ad::reshape(x, {1, 1, 1, 2}), 0, 1, 1, 1);
    ad::Var one = t.constant(Tensor({1, 1, 1, 1}, 1.0));
    ad::Var a = one - x0;
    ad::Var b = x1 - x0 * x0;
    return ad::sum(a * a) + 100.0 * ad::sum(b * b);
  };
}

std::size_t iterations_to(const std::vector<double>& trace, double level) {
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (trace[i] <= level) return i;
  return trace.size();
}

}  // namespace

TEST(Lbfgs, SolvesQuadraticToDirectSolution) {
  const Quadratic q = random_spd(8, 1);
  const Eigen::VectorXd exact = q.a.ldlt().solve(q.b);
  OptimizerConfig cfg;
  cfg.max_iters = 40;
  cfg.grad_tol = 1e-12;
  const MinimizeResult r = minimize(quadratic_objective(q), Tensor({1, 8}, 0.0), cfg);
  ASSERT_LE(r.iterations, 40u);
  double worst = 0;
  for (int i = 0; i < 8; ++i) worst = std::max(worst, std::abs(r.x[static_cast<std::size_t>(i)] - exact(i)));
  EXPECT_LT(worst, 1e-8);
}

TEST(Lbfgs, ConvergesOnRosenbrock) {
  OptimizerConfig cfg;
  cfg.max_iters = 500;
  cfg.grad_tol = 1e-12;
  const MinimizeResult r = minimize(rosenbrock(), Tensor({1, 2}, std::vector<double>{-1.2, 1.0}), cfg);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
}

TEST(Lbfgs, TraceNeverIncreases) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MinimizeResult r = minimize(quadratic_objective(random_spd(6, seed + 10)), Tensor({1, 6}, 0.5), {});
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
  }
  const MinimizeResult r = minimize(rosenbrock(), Tensor({1, 2}, std::vector<double>{-1.2, 1.0}), {});
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
}

TEST(Lbfgs, TraceStartsAtInitialValue) {
  const Quadratic q = random_spd(4, 3);
  const MinimizeResult r = minimize(quadratic_objective(q), Tensor({1, 4}, 0.0), {});
  EXPECT_EQ(r.trace.front(), 0.0);
  EXPECT_EQ(r.trace.size(), r.iterations + 1);
}

TEST(Lbfgs, StopsAtStationaryPoint) {
  OptimizerConfig cfg;
  cfg.grad_tol = 1e-6;
  const MinimizeResult r =
      minimize([](ad::Tape&, ad::Var x) { return ad::squared_l2(x); }, Tensor({1, 3}, 0.0), cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0u);
}

TEST(FirstOrder, SgdNeedsMoreIterationsThanLbfgs) {
  const Quadratic q = random_spd(8, 2);
  const Eigen::VectorXd exact = q.a.ldlt().solve(q.b);
  const double fstar = -0.5 * q.b.dot(exact);
  OptimizerConfig lb;
  lb.max_iters = 2000;
  OptimizerConfig sgd = lb;
  sgd.kind = OptimizerKind::sgd;
  sgd.sgd_lr = 1e-2;
  const auto f = quadratic_objective(q);
  const std::size_t it_lbfgs = iterations_to(minimize(f, Tensor({1, 8}, 0.0), lb).trace, fstar + 1e-4);
  const std::size_t it_sgd = iterations_to(minimize(f, Tensor({1, 8}, 0.0), sgd).trace, fstar + 1e-4);
  EXPECT_LT(it_lbfgs, it_sgd);
}

TEST(FirstOrder, SgdStepMatchesHandComputation) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::sgd;
  cfg.sgd_lr = 0.1;
  cfg.max_iters = 1;
  cfg.grad_tol = 0;
  const MinimizeResult r =
      minimize([](ad::Tape&, ad::Var x) { return ad::squared_l2(x); }, Tensor({2}, std::vector<double>{1, -2}), cfg);
  EXPECT_DOUBLE_EQ(r.x[0], 0.8);
  EXPECT_DOUBLE_EQ(r.x[1], -1.6);
}

TEST(FirstOrder, AdamFirstStepHasLearningRateMagnitude) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::adam;
  cfg.adam_lr = 0.05;
  cfg.max_iters = 1;
  cfg.grad_tol = 0;
  const MinimizeResult r =
      minimize([](ad::Tape&, ad::Var x) { return ad::squared_l2(x); }, Tensor({2}, std::vector<double>{3, -0.1}), cfg);
  EXPECT_NEAR(r.x[0], 3 - 0.05, 1e-6);
  EXPECT_NEAR(r.x[1], -0.1 + 0.05, 1e-6);
}

TEST(FirstOrder, AdamReducesQuadratic) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::adam;
  cfg.adam_lr = 0.05;
  cfg.max_iters = 300;
  const MinimizeResult r = minimize(quadratic_objective(random_spd(5, 4)), Tensor({1, 5}, 0.0), cfg);
  EXPECT_LT(r.final_value(), r.trace.front());
}

TEST(Minimize, RejectsBadConfigAndNonFiniteStart) {
  OptimizerConfig cfg;
  cfg.sgd_lr = 0;
  const TapeObjective f = [](ad::Tape&, ad::Var x) { return ad::squared_l2(x); };
  EXPECT_THROW(minimize(f, Tensor({1}, 1.0), cfg), ConfigError);
  EXPECT_THROW(minimize(f, Tensor({1}, NAN), {}), NumericError);
  EXPECT_THROW(optimizer_from_string("newton"), ConfigError);
}

TEST(Minimize, IsDeterministic) {
  const auto f = quadratic_objective(random_spd(6, 9));
  for (OptimizerKind k : {OptimizerKind::lbfgs, OptimizerKind::sgd, OptimizerKind::adam}) {
    OptimizerConfig cfg;
    cfg.kind = k;
    const MinimizeResult a = minimize(f, Tensor({1, 6}, 0.3), cfg), b = minimize(f, Tensor({1, 6}, 0.3), cfg);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.x, b.x);
  }
}

TEST(AdamState, StepsParameterList) {
  std::vector<Tensor> params{Tensor({2}, 1.0), Tensor({1}, -1.0)};
  const Tensor g0({2}, 2.0), g1({1}, -3.0);
  AdamState adam(0.1, 0.9, 0.999);
  adam.step(params, {&g0, &g1});
  EXPECT_EQ(adam.steps(), 1u);
  EXPECT_NEAR(params[0][0], 0.9, 1e-6);
  EXPECT_NEAR(params[1][0], -0.9, 1e-6);
}
