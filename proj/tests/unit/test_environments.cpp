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

#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace safempc;
using safempc::testing::Gen;

namespace
{
    double pendulum_energy(const PendulumParams &P, const Eigen::VectorXd &x)
    {
        return 0.5 * P.m * P.l * P.l * x(1) * x(1) + P.m * P.g * P.l * std::cos(x(0));
    }

    double cartpole_energy(const CartPoleParams &P, const Eigen::VectorXd &x)
    {
        const double c = std::cos(x(2));
        return 0.5 * (P.M + P.m) * x(1) * x(1) - P.m * P.l * c * x(1) * x(3) + 0.5 * P.m * P.l * P.l * x(3) * x(3) +
               P.m * P.g * P.l * c;
    }

    // Riccati residual written out independently of the library.
    double oracle_residual(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B, const Eigen::MatrixXd &Q,
                           const Eigen::MatrixXd &R, const Eigen::MatrixXd &P)
    {
        const Eigen::MatrixXd G = R + B.transpose() * P * B;
        const Eigen::MatrixXd rhs =
            A.transpose() * P * A - A.transpose() * P * B * G.inverse() * B.transpose() * P * A + Q;
        return (P - rhs).cwiseAbs().maxCoeff() / std::max(1.0, P.cwiseAbs().maxCoeff());
    }
} // namespace

TEST(Dynamics, FrictionlessPendulumConservesEnergy)
{
    PendulumParams P;
    P.eta = 0.0;
    Eigen::VectorXd x(2);
    x << 0.7, -1.3;
    const double e0 = pendulum_energy(P, x);
    for (int t = 0; t < 400; ++t)
        x = pendulum_step(x, Eigen::VectorXd::Zero(1), P, 0.01, 10);
    EXPECT_NEAR(pendulum_energy(P, x), e0, 1e-8 * std::abs(e0));
}

TEST(Dynamics, FrictionlessCartPoleConservesEnergy)
{
    CartPoleParams P;
    P.eta = 0.0;
    Eigen::VectorXd x(4);
    x << 0.1, 0.4, 0.5, -0.7;
    const double e0 = cartpole_energy(P, x);
    for (int t = 0; t < 400; ++t)
        x = cartpole_step(x, Eigen::VectorXd::Zero(1), P, 0.01, 10);
    EXPECT_NEAR(cartpole_energy(P, x), e0, 1e-8 * std::abs(e0));
}

TEST(Dynamics, RungeKuttaIsFourthOrder)
{
    CartPoleParams P;
    Eigen::VectorXd x(4);
    x << 0.0, 0.5, 0.3, -0.2;
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 1.5);
    const Eigen::VectorXd ref = cartpole_step(x, u, P, 0.2, 4000);
    const double e1 = (cartpole_step(x, u, P, 0.2, 2) - ref).norm();
    const double e2 = (cartpole_step(x, u, P, 0.2, 4) - ref).norm();
    EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.5);
    // the generic integrator agrees with the fixed-size one
    const ContinuousDynamics F = [&](const Eigen::VectorXd &s, const Eigen::VectorXd &v) { return P.derivative(s, v); };
    EXPECT_LE((rk4_step(F, x, u, 0.05, 10) - cartpole_step(x, u, P, 0.05, 10)).norm(), 1e-13);
}

TEST(Dynamics, InputsAreClamped)
{
    PendulumParams P;
    const Eigen::Vector2d x(0.1, 0.0);
    EXPECT_LE((pendulum_step(x, Eigen::VectorXd::Constant(1, 50.0), P, 0.05) -
               pendulum_step(x, Eigen::VectorXd::Constant(1, P.u_max), P, 0.05))
                  .norm(),
              1e-15);
}

TEST(Linearization, ZeroOrderHoldMatchesMatrixExponentialSeries)
{
    Gen gen(61);
    for (int c = 0; c < 50; ++c)
    {
        const int p = gen.integer(1, 4), q = gen.integer(1, 2);
        const Eigen::MatrixXd A = gen.matrix(p, p), B = gen.matrix(p, q);
        const double dt = gen.uniform(0.01, 0.2);
        const LinearModel d = zoh_discretize(A, B, dt);
        // oracle: truncated Taylor series of exp(A dt) and its integral
        Eigen::MatrixXd Ad = Eigen::MatrixXd::Identity(p, p), Bd = Eigen::MatrixXd::Zero(p, q);
        Eigen::MatrixXd term = Eigen::MatrixXd::Identity(p, p);
        Bd += dt * B;
        for (int k = 1; k < 30; ++k)
        {
            term = term * A * dt / k;
            Ad += term;
            Bd += term * dt / (k + 1) * B;
        }
        EXPECT_LE((d.A - Ad).norm(), 1e-10 * Ad.norm());
        EXPECT_LE((d.B - Bd).norm(), 1e-10 * std::max(1.0, Bd.norm()));
    }
}

TEST(Linearization, ContinuousJacobiansOfPendulumAtUpright)
{
    PendulumParams P;
    const ContinuousDynamics F = [&](const Eigen::VectorXd &s, const Eigen::VectorXd &v) { return P.derivative(s, v); };
    const LinearModel J = continuous_jacobians(F, Eigen::Vector2d::Zero(), Eigen::VectorXd::Zero(1));
    const double ml2 = P.m * P.l * P.l;
    EXPECT_NEAR(J.A(0, 1), 1.0, 1e-8);
    EXPECT_NEAR(J.A(1, 0), P.g / P.l, 1e-6);
    EXPECT_NEAR(J.A(1, 1), -P.eta / ml2, 1e-6);
    EXPECT_NEAR(J.B(1, 0), 1.0 / ml2, 1e-6);
}

TEST(Lqr, RandomSystemsSatisfyRiccatiAndStabilize)
{
    Gen gen(62);
    for (int c = 0; c < 30; ++c)
    {
        const int p = gen.integer(1, 4), q = gen.integer(1, 2);
        const Eigen::MatrixXd A = gen.matrix(p, p, 0.6), B = gen.matrix(p, q);
        const Eigen::MatrixXd Q = gen.spd(p, 0.1, 2.0), R = gen.spd(q, 0.1, 2.0);
        const LqrResult lqr = lqr_synthesize(A, B, Q, R);
        EXPECT_LE(oracle_residual(A, B, Q, R, lqr.P), 1e-10);
        const Eigen::MatrixXd K = (R + B.transpose() * lqr.P * B).ldlt().solve(B.transpose() * lqr.P * A);
        EXPECT_LE((K - lqr.K).norm(), 1e-8 * std::max(1.0, K.norm()));
        const Eigen::VectorXcd ev = (A - B * lqr.K).eigenvalues();
        EXPECT_LT(ev.cwiseAbs().maxCoeff(), 1.0);
    }
}

TEST(Environments, PendulumAndCartPoleWiring)
{
    for (const EnvSpec &env : {make_pendulum_env(), make_cartpole_env()})
    {
        EXPECT_LE(env.lqr.residual, 1e-10) << env.name;
        EXPECT_LT(env.lqr.spectral_radius, 1.0) << env.name;
        EXPECT_LE(oracle_residual(env.true_linear.A, env.true_linear.B,
                                  env.name == "pendulum" ? Eigen::MatrixXd(Eigen::Vector2d(1, 2).asDiagonal())
                                                         : Eigen::MatrixXd(Eigen::Vector4d(4, 8, 12, 2).asDiagonal()),
                                  Eigen::MatrixXd::Constant(1, 1, env.name == "pendulum" ? 20.0 : 40.0), env.lqr.P),
                  1e-10);
        EXPECT_TRUE(env.safe_set.polytope.contains(env.x_start)) << env.name;
        if (env.constraints->state())
            EXPECT_TRUE(polytope_subset(env.safe_set.polytope, *env.constraints->state())) << env.name;
        else
            EXPECT_EQ(env.name, "pendulum");
        // vertices of the polytope lie inside the validated level set
        for (const auto &v : polytope_vertices(env.safe_set.polytope))
            EXPECT_LE(v.dot(env.safe_set.S * v), env.safe_set.level * (1 + 1e-9));
        // model error is the gap between the true step and the prior
        const Eigen::VectorXd x = 0.5 * env.x_start, u = Eigen::VectorXd::Constant(1, 0.2);
        EXPECT_LE((env.model_error(x, u) - (env.true_step(x, u) - (*env.prior)(x, u))).norm(), 1e-15);
        EXPECT_EQ(env.gains(3).size(), 3u);
    }
}

TEST(Environments, CartPoleConstraintsFollowRailAndFloor)
{
    const EnvSpec env = make_cartpole_env();
    Eigen::Vector4d x(0, 0, 0, 0);
    EXPECT_FALSE(env.state_violated(x));
    x(0) = 3.01;
    EXPECT_TRUE(env.state_violated(x));
    x(0) = -9.9;
    EXPECT_FALSE(env.state_violated(x));
    x(2) = 1.6;
    EXPECT_TRUE(env.state_violated(x));
    EXPECT_TRUE(env.input_violated(Eigen::VectorXd::Constant(1, 5.1)));
    EXPECT_FALSE(env.input_violated(Eigen::VectorXd::Constant(1, -5.0)));
}

TEST(SafeSet, BackupPolicyKeepsSampledStatesSafe)
{
    for (const EnvSpec &env : {make_pendulum_env(), make_cartpole_env()})
    {
        const SafeSetCheck check = check_safe_set(env, 200, 10.0, 5);
        EXPECT_EQ(check.violations, 0) << env.name;
        EXPECT_EQ(check.not_converged, 0) << env.name;
    }
}

TEST(SafeSet, WhitenedUnitPolytopeIsInsideTheUnitBall)
{
    for (int d = 1; d <= 5; ++d)
    {
        const Polytope P = whitened_unit_polytope(d);
        for (const auto &v : polytope_vertices(P))
            EXPECT_LE(v.norm(), 1.0 + 1e-9) << "dim " << d;
    }
}

TEST(Environments, RejectsInvalidParameters)
{
    PendulumEnvConfig pc;
    pc.truth.m = -1.0;
    EXPECT_THROW(make_pendulum_env(pc), ConfigError);
    CartPoleEnvConfig cc;
    cc.truth.x_start = 5.0;
    EXPECT_THROW(make_cartpole_env(cc), ConfigError);
}

TEST(Environments, SampleInPolytopeStaysInside)
{
    const EnvSpec env = make_pendulum_env();
    std::mt19937_64 rng(3);
    for (int s = 0; s < 200; ++s)
        EXPECT_TRUE(env.safe_set.polytope.contains(sample_in_polytope(env.safe_set.polytope, rng)));
}
