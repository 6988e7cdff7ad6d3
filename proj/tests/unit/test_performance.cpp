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

#include "safempc/errors.hpp"
#include "safempc/performance.hpp"

#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace safempc;
using safempc::testing::Gen;

namespace
{
    GaussianBelief random_belief(Gen &gen, int p)
    {
        return {gen.vector(p), gen.spd(p, 1e-3, 0.5)};
    }

    struct LinearToy
    {
        std::shared_ptr<PriorModel> prior;
        std::shared_ptr<GPPosterior> gp;
    };

    LinearToy linear_toy(Gen &gen, int p, int q)
    {
        LinearToy t;
        t.prior = std::make_shared<PriorModel>(PriorModel::linear(
            Eigen::MatrixXd::Identity(p, p) + 0.1 * gen.matrix(p, p), 0.2 * gen.matrix(p, q)));
        const int n = 15;
        Eigen::MatrixXd Z = gen.matrix(n, p + q), Y(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j)
                Y(i, j) = 0.1 * std::cos(Z(i, 0) - j) + 0.05 * Z(i, p);
        const KernelSpec k = KernelSpec::sum(Eigen::VectorXd::Constant(p + q, 1e-2),
                                             Eigen::VectorXd::Constant(p + q, 1.2), 2e-2);
        t.gp = std::make_shared<GPPosterior>(
            GPPosterior::fit(Dataset(Z, Y, 0.02), std::vector<KernelSpec>(p, k), 2.0));
        return t;
    }
} // namespace

TEST(SaturatingCost, ClosedFormMatchesQuadratureIn1D)
{
    // 1-D oracle by trapezoidal integration of 1 - exp(-w (x - g)^2 / 2) against the normal density
    Gen gen(51);
    for (int c = 0; c < 50; ++c)
    {
        const double m = gen.uniform(-2, 2), s2 = gen.uniform(0.01, 2.0), w = gen.uniform(0.1, 3.0),
                     g = gen.uniform(-1, 1);
        double integral = 0.0;
        const int N = 40000;
        const double lo = m - 12 * std::sqrt(s2), hi = m + 12 * std::sqrt(s2), dx = (hi - lo) / N;
        for (int i = 0; i <= N; ++i)
        {
            const double x = lo + i * dx;
            const double f = (1.0 - std::exp(-0.5 * w * (x - g) * (x - g))) *
                             std::exp(-0.5 * (x - m) * (x - m) / s2) / std::sqrt(2 * std::numbers::pi * s2);
            integral += (i == 0 || i == N ? 0.5 : 1.0) * f * dx;
        }
        const double closed = expected_saturating_cost({Eigen::VectorXd::Constant(1, m),
                                                        Eigen::MatrixXd::Constant(1, 1, s2)},
                                                       Eigen::VectorXd::Constant(1, g),
                                                       Eigen::MatrixXd::Constant(1, 1, w));
        EXPECT_NEAR(closed, integral, 1e-8);
    }
}

TEST(SaturatingCost, GradientsMatchFiniteDifferences)
{
    Gen gen(52);
    for (int c = 0; c < 100; ++c)
    {
        const int p = gen.integer(1, 4);
        const GaussianBelief X = random_belief(gen, p);
        const Eigen::VectorXd goal = gen.vector(p);
        const Eigen::MatrixXd W = gen.spd(p, 0.1, 2.0);
        Eigen::VectorXd dm;
        Eigen::MatrixXd dS;
        expected_saturating_cost(X, goal, W, &dm, &dS);
        const Eigen::VectorXd fd_m = safempc::testing::fd_gradient(
            [&](const Eigen::VectorXd &m) { return expected_saturating_cost({m, X.cov}, goal, W); }, X.mean);
        EXPECT_LE((dm - fd_m).norm(), 1e-6 * std::max(1.0, fd_m.norm()));
        Eigen::MatrixXd E = gen.matrix(p, p);
        E = (0.5 * (E + E.transpose())).eval();
        const double h = 1e-6;
        const double fd_S = (expected_saturating_cost({X.mean, X.cov + h * E}, goal, W) -
                             expected_saturating_cost({X.mean, X.cov - h * E}, goal, W)) /
                            (2 * h);
        EXPECT_NEAR((dS.array() * E.array()).sum(), fd_S, 1e-6 * std::max(1.0, std::abs(fd_S)));
    }
}

TEST(MomentPropagation, MatchesLinearizedMoments)
{
    Gen gen(53);
    for (int c = 0; c < 100; ++c)
    {
        const int p = gen.integer(1, 3), q = gen.integer(1, 2);
        const LinearToy t = linear_toy(gen, p, q);
        const GaussianBelief X = random_belief(gen, p);
        const Eigen::VectorXd u = gen.vector(q, 0.5);
        const GaussianBelief next = moment_propagate(X, u, *t.gp, *t.prior);
        Eigen::VectorXd z(p + q);
        z << X.mean, u;
        const GPPrediction pred = t.gp->predict(z);
        EXPECT_LE((next.mean - ((*t.prior)(X.mean, u) + pred.mean)).norm(), 1e-12);
        const Eigen::MatrixXd J = safempc::testing::fd_jacobian(
            [&](const Eigen::VectorXd &x) -> Eigen::VectorXd
            {
                Eigen::VectorXd zz(p + q);
                zz << x, u;
                return (*t.prior)(x, u) + t.gp->predict(zz).mean;
            },
            X.mean);
        Eigen::MatrixXd S = J * X.cov * J.transpose();
        S.diagonal() += pred.std.array().square().matrix();
        EXPECT_LE(safempc::testing::rel_err(next.cov, S), 1e-6);
    }
}

TEST(PerformanceChain, AdjointGradientMatchesFiniteDifferences)
{
    Gen gen(54);
    for (int c = 0; c < 60; ++c)
    {
        const int p = gen.integer(1, 3), q = gen.integer(1, 2), H = gen.integer(1, 6);
        const LinearToy t = linear_toy(gen, p, q);
        const GaussianBelief X0{gen.vector(p, 0.5), Eigen::MatrixXd::Zero(p, p)};
        const Eigen::MatrixXd inputs = gen.matrix(q, H, 0.5);
        const SaturatingCostObjective obj(gen.vector(p), gen.spd(p, 0.2, 2.0), gen.uniform(0.5, 1.0));
        const StageFunction stage = [&](int s, const GaussianBelief &b, Eigen::VectorXd *dm, Eigen::MatrixXd *dS)
        { return obj(s, b, dm, dS); };
        Eigen::MatrixXd d_inputs;
        Eigen::VectorXd d_mean0;
        const double value =
            performance_cost_gradient(X0, inputs, *t.gp, *t.prior, stage, &d_inputs, &d_mean0);
        // oracle: forward rollout only, then finite differences
        auto forward = [&](const Eigen::VectorXd &m0, const Eigen::MatrixXd &U)
        {
            const auto beliefs = performance_rollout({m0, X0.cov}, U, *t.gp, *t.prior);
            double v = 0.0;
            for (std::size_t s = 1; s < beliefs.size(); ++s)
                v += obj(static_cast<int>(s), beliefs[s], nullptr, nullptr);
            return v;
        };
        EXPECT_NEAR(value, forward(X0.mean, inputs), 1e-12);
        const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(inputs.data(), inputs.size());
        const Eigen::VectorXd fd_u = safempc::testing::fd_gradient(
            [&](const Eigen::VectorXd &v)
            { return forward(X0.mean, Eigen::Map<const Eigen::MatrixXd>(v.data(), q, H)); },
            flat);
        const Eigen::VectorXd got = Eigen::Map<const Eigen::VectorXd>(d_inputs.data(), d_inputs.size());
        EXPECT_LE((got - fd_u).norm(), 1e-5 * std::max(1.0, fd_u.norm())) << "case " << c;
        const Eigen::VectorXd fd_m =
            safempc::testing::fd_gradient([&](const Eigen::VectorXd &m) { return forward(m, inputs); }, X0.mean);
        EXPECT_LE((d_mean0 - fd_m).norm(), 1e-5 * std::max(1.0, fd_m.norm()));
    }
}

TEST(Objectives, SaturatingCostDiscountsFromTheFirstPredictedState)
{
    Gen gen(55);
    const SaturatingCostObjective obj(Eigen::Vector2d(1, 0), Eigen::Matrix2d::Identity(), 0.5);
    PlanEvaluation plan;
    for (int t = 0; t < 4; ++t)
        plan.beliefs.push_back(random_belief(gen, 2));
    double manual = 0.0;
    for (int t = 1; t < 4; ++t)
        manual += std::pow(0.5, t - 1) *
                  expected_saturating_cost(plan.beliefs[t], Eigen::Vector2d(1, 0), Eigen::Matrix2d::Identity());
    const GPPosterior gp = GPPosterior::prior(3, {KernelSpec::linear(Eigen::Vector3d::Ones())}, 0.1, 2.0);
    EXPECT_NEAR(obj.value(plan, gp), manual, 1e-14);
}

TEST(Objectives, VarianceSumIsMinusSummedStd)
{
    const KernelSpec k = KernelSpec::matern52(Eigen::Vector3d::Ones(), 0.3);
    const GPPosterior gp = GPPosterior::prior(3, {k, k}, 0.1, 2.0);
    PlanEvaluation plan;
    plan.x0 = Eigen::Vector2d(0.1, 0.2);
    plan.k = Eigen::MatrixXd::Constant(1, 2, 0.5);
    EXPECT_NEAR(VarianceSumObjective().value(plan, gp), -2.0 * std::sqrt(0.3), 1e-14);
}

TEST(ToySystem, TwoStageGetsStuckWhileCoupledReachesBestSafeState)
{
    ToyPlanner planner;
    planner.T = 1;
    planner.H = 1;
    planner.r = 1;
    const auto stuck = planner.simulate(0, 10, false);
    for (int x : stuck)
        EXPECT_EQ(x, 0);
    const auto coupled = planner.simulate(0, 10, true);
    EXPECT_EQ(coupled.back(), 1);
    for (int x : coupled)
        EXPECT_GE(x, 0);
    planner.r = 2;
    EXPECT_THROW(planner.coupled_action(0), InvalidInputError);
}

TEST(CoupledProblem, RejectsInvalidCouplingLength)
{
    MPCProblem mpc;
    mpc.T = 2;
    EXPECT_THROW(assemble_coupled_problem(mpc, 3, 3, nullptr), InvalidInputError);
    EXPECT_THROW(assemble_coupled_problem(mpc, -1, 1, nullptr), InvalidInputError);
    EXPECT_EQ(assemble_coupled_problem(mpc, 3, 2, nullptr).r, 2);
}
