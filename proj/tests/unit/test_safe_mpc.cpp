/*
 Copyright 2026 The SafeMPC Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "safempc/environments.hpp"
#include "safempc/errors.hpp"
#include "safempc/experiments.hpp"
#include "safempc/optimizer.hpp"
#include "safempc/performance.hpp"
#include "safempc/safe_mpc.hpp"

#include "support/generators.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

#include <limits>

#include <cmath>

using namespace safempc;
using safempc::testing::Gen;

namespace
{
    struct PendulumFixture
    {
        EnvSpec env = make_pendulum_env();
        std::vector<KernelSpec> kernels;
        std::shared_ptr<const GPPosterior> gp;

        PendulumFixture()
        {
            const KernelSpec k = KernelSpec::sum(Eigen::Vector3d::Constant(1e-3), Eigen::Vector3d(0.5, 2.0, 1.0), 4e-3);
            kernels.assign(2, k);
            std::mt19937_64 rng(5);
            gp = fit_model(initial_safe_samples(env, 25, env.obs_noise_std, rng), kernels, 2.0, 150);
        }

        MPCProblem problem(int T, int H, ObjectivePtr objective, const Eigen::VectorXd &x) const
        {
            MPCProblem p;
            p.T = T;
            p.x_t = x;
            p.prior = env.prior;
            p.gp = gp;
            p.lipschitz = LipschitzConstants::zero(2);
            p.lipschitz.L_grad_mu = Eigen::Vector2d::Constant(0.05);
            p.lipschitz.L_sigma = 0.05;
            p.scheme = PropagationScheme::MeanLinearized;
            p.constraints = env.constraints;
            p.gains = env.gains(T);
            p.objective = std::move(objective);
            p.safe_policy = env.safe_policy;
            p.H = H;
            p.r = 1;
            return p;
        }
    };

    SolverConfig quick_solver(std::uint64_t seed)
    {
        SolverConfig s;
        s.multistarts = 3;
        s.seed = seed;
        return s;
    }
} // namespace

TEST(Optimizer, BfgsMinimizesRosenbrock)
{
    const MeritFunction f = [](const Eigen::VectorXd &x, Eigen::VectorXd *g)
    {
        const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
        if (g)
        {
            g->resize(2);
            (*g)(0) = -2.0 * a - 400.0 * x(0) * b;
            (*g)(1) = 200.0 * b;
        }
        return a * a + 100.0 * b * b;
    };
    const BfgsResult r = bfgs_minimize(f, Eigen::Vector2d(-1.2, 1.0), 2000, 1e-10, 1e-14);
    EXPECT_TRUE(r.valid);
    EXPECT_NEAR(r.x(0), 1.0, 1e-5);
    EXPECT_NEAR(r.x(1), 1.0, 1e-5);
}

namespace
{
    // min (x - 2)^2 + (y - 1)^2  s.t.  x + y <= 1  (solution (1, 0))
    class HalfPlaneQP : public PenaltyFunction
    {
    public:
        Eigen::Index dim() const override { return 2; }
        void evaluate(const Eigen::VectorXd &v, double &f, Eigen::VectorXd &g) const override
        {
            f = (v(0) - 2) * (v(0) - 2) + (v(1) - 1) * (v(1) - 1);
            g = Eigen::VectorXd::Constant(1, v(0) + v(1) - 1.0);
        }
    };
} // namespace

TEST(Optimizer, PenaltyMethodReachesConstrainedOptimum)
{
    PenaltyConfig cfg;
    cfg.margin = 0.0;
    cfg.penalty_stages = 8;
    const OptimizeResult r = minimize_penalty(HalfPlaneQP(), Eigen::Vector2d(0, 0), cfg);
    EXPECT_TRUE(r.valid);
    EXPECT_NEAR(r.x(0), 1.0, 1e-4);
    EXPECT_NEAR(r.x(1), 0.0, 1e-4);
    EXPECT_LE(r.max_violation, 1e-4);
}

TEST(SafeMpc, SolvedPlanIsCertifiedAndSimulatesSafely)
{
    const PendulumFixture fx;
    Gen gen(71);
    const double max_frequency = 2.0;
    const Eigen::Vector2d x0(0.2, -0.5);
    MPCProblem problem = fx.problem(2, 0, exploration_objective(ExplorationKind::VarianceSum), x0);
    problem.lipschitz =
        safempc::testing::sampled_lipschitz(*fx.gp, fx.env.region_lo, fx.env.region_hi, max_frequency, 500, 1.5, gen);
    const SafetyPlan plan = solve(problem, std::nullopt, quick_solver(1));
    ASSERT_TRUE(plan.feasible);
    ASSERT_TRUE(plan.certified);
    const ResidualReport again = certify(plan, problem);
    EXPECT_LE(again.max_residual, 1e-6);
    ASSERT_EQ(plan.ellipsoids.size(), 3u);

    // Monte Carlo oracle: model errors inside the GP intervals stay in every ellipsoid and end in X_safe
    for (int s = 0; s < 300; ++s)
    {
        const auto g = safempc::testing::SyntheticError::random(*fx.gp, gen, max_frequency);
        Eigen::VectorXd x = x0;
        for (int t = 0; t < 2; ++t)
        {
            const Eigen::VectorXd u = plan.laws[t](x);
            EXPECT_FALSE(fx.env.input_violated(u, 1e-9));
            Eigen::VectorXd z(3);
            z << x, u;
            x = (*fx.env.prior)(x, u) + g(z);
            EXPECT_TRUE(plan.ellipsoids[t + 1].contains(x, 1e-9)) << "sample " << s << " step " << t;
            EXPECT_FALSE(fx.env.state_violated(x));
        }
        EXPECT_TRUE(fx.env.safe_set.polytope.contains(x, 1e-9));
    }
}

TEST(SafeMpc, TamperedPlanFailsCertification)
{
    const PendulumFixture fx;
    const MPCProblem problem =
        fx.problem(2, 0, exploration_objective(ExplorationKind::VarianceSum), Eigen::Vector2d(0.1, 0.0));
    SafetyPlan plan = solve(problem, std::nullopt, quick_solver(2));
    ASSERT_TRUE(plan.certified);
    plan.laws[0].k(0) += 5.0; // far outside the input box
    const ResidualReport report = certify(plan, problem);
    EXPECT_GT(report.max_residual, 0.0);
    // the first input rows are violated by the offset minus the input bound
    double control0 = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < report.labels.size(); ++i)
        if (report.labels[i].rfind("control_0", 0) == 0)
            control0 = std::max(control0, report.residuals(static_cast<Eigen::Index>(i)));
    EXPECT_GT(control0, 3.0);
}

TEST(SafeMpc, SolveIsDeterministicForAFixedSeed)
{
    const PendulumFixture fx;
    const MPCProblem problem =
        fx.problem(1, 0, exploration_objective(ExplorationKind::VarianceSum), Eigen::Vector2d(-0.2, 0.3));
    const SafetyPlan a = solve(problem, std::nullopt, quick_solver(9));
    const SafetyPlan b = solve(problem, std::nullopt, quick_solver(9));
    EXPECT_EQ(a.feasible, b.feasible);
    EXPECT_EQ(a.objective, b.objective);
    EXPECT_EQ(a.laws[0].k, b.laws[0].k);
}

TEST(SafeMpc, InitialStateOptimizationStaysInsideTheSafeRegion)
{
    const PendulumFixture fx;
    MPCProblem problem =
        fx.problem(1, 0, exploration_objective(ExplorationKind::VarianceSum), fx.env.x_start);
    problem.optimize_initial_state = true;
    const SafetyPlan plan = solve(problem, std::nullopt, quick_solver(4));
    ASSERT_TRUE(plan.feasible);
    EXPECT_FALSE(fx.env.state_violated(plan.x0));
    // the optimized point must be at least as informative as the safe start
    const MPCProblem fixed = fx.problem(1, 0, exploration_objective(ExplorationKind::VarianceSum), fx.env.x_start);
    const SafetyPlan start = solve(fixed, std::nullopt, quick_solver(4));
    EXPECT_LE(plan.objective, start.objective + 1e-9);
}

TEST(SafeMpc, CoupledPerformanceInputsShareTheFirstSafetyInput)
{
    const PendulumFixture fx;
    const auto objective =
        exploration_objective(ExplorationKind::ConfidenceMinusDeviation, Eigen::Matrix2d::Identity());
    const MPCProblem problem = fx.problem(2, 4, objective, Eigen::Vector2d(0.1, 0.1));
    const SafetyPlan plan = solve(problem, std::nullopt, quick_solver(3));
    ASSERT_TRUE(plan.feasible);
    ASSERT_EQ(plan.u_perf.cols(), 4);
    EXPECT_LE((plan.u_perf.col(0) - plan.laws[0].k).norm(), 1e-12);
    EXPECT_EQ(plan.beliefs.size(), 5u);
}

TEST(SafeMpc, ValidateRejectsInconsistentProblems)
{
    const PendulumFixture fx;
    MPCProblem problem = fx.problem(2, 0, exploration_objective(ExplorationKind::VarianceSum), Eigen::Vector2d::Zero());
    problem.gains.pop_back();
    EXPECT_THROW(problem.validate(), InvalidInputError);
}

TEST(Controller, FallsBackToTheBackupPolicyAfterTInfeasibleSteps)
{
    const PendulumFixture fx;
    const int T = 3;
    const SafeMpcController controller(T, fx.env.safe_policy);
    ControllerState state = controller.initial_state();
    Eigen::VectorXd x(2);
    x << 0.2, 0.0;
    // one feasible solve, then forced infeasibility
    StepResult r = controller.step(state, fx.problem(T, 0, exploration_objective(ExplorationKind::VarianceSum), x),
                                   quick_solver(5));
    ASSERT_TRUE(r.feasible);
    EXPECT_FALSE(r.safe_policy_applied);
    const std::vector<PlanEntry> adopted = state.plan;
    for (int t = 1; t <= T; ++t)
    {
        x = fx.env.true_step(x, r.u);
        r = controller.step(state, fx.problem(T, 0, exploration_objective(ExplorationKind::VarianceSum), x),
                            quick_solver(5), true);
        EXPECT_FALSE(r.feasible);
        EXPECT_EQ(r.age, t);
        if (t < T)
        {
            EXPECT_FALSE(r.safe_policy_applied);
            EXPECT_LE((r.u - fx.env.safe_policy.clamp(adopted[t].law(x))).norm(), 1e-12);
        }
        else
        {
            EXPECT_TRUE(r.safe_policy_applied);
            EXPECT_LE((r.u - fx.env.safe_policy(x)).norm(), 1e-12);
        }
    }
}

TEST(Controller, RejectsHorizonMismatch)
{
    const PendulumFixture fx;
    const SafeMpcController controller(2, fx.env.safe_policy);
    ControllerState state = controller.initial_state();
    EXPECT_THROW(controller.step(state, fx.problem(3, 0, exploration_objective(ExplorationKind::VarianceSum),
                                                   Eigen::Vector2d::Zero()),
                                 quick_solver(1)),
                 InvalidInputError);
}

TEST(Baseline, ChanceConstrainedPlanKeepsMeansInside)
{
    const PendulumFixture fx;
    const double goal = 1.5 * bounding_box(fx.env.safe_set.polytope).half_widths(0);
    MPCProblem problem = fx.problem(0, 5, std::make_shared<SaturatingCostObjective>(Eigen::Vector2d(goal, 0.0),
                                                                                     Eigen::Matrix2d::Identity(), 0.9),
                                    Eigen::Vector2d(0.8 * goal / 1.5, 0.0));
    problem.gains.clear();
    problem.chance_kappa = 2.0;
    // angle box just around the safe set, with the goal beyond it so the chance constraint is active
    const HyperRectangle bb = bounding_box(fx.env.safe_set.polytope);
    const Eigen::Vector2d hw(1.05 * bb.half_widths(0), 5.0);
    const Polytope X = Polytope::box(bb.center - hw, bb.center + hw);
    problem.constraints = std::make_shared<const ConstraintSet>(X, fx.env.constraints->control(),
                                                                fx.env.safe_set.polytope);
    const SafetyPlan plan = solve(problem, std::nullopt, quick_solver(6));
    ASSERT_EQ(plan.u_perf.cols(), 5);
    ASSERT_TRUE(plan.feasible);
    double closest = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t < plan.beliefs.size(); ++t)
        for (int i = 0; i < X.rows(); ++i)
        {
            const Eigen::VectorXd a = X.H().row(i).transpose();
            const double bound = a.dot(plan.beliefs[t].mean) + 2.0 * std::sqrt(a.dot(plan.beliefs[t].cov * a));
            closest = std::max(closest, bound - X.h()(i));
        }
    EXPECT_LE(closest, 1e-4);
    EXPECT_GT(closest, -0.05); // the planner pushes toward the goal until the bound binds
}
