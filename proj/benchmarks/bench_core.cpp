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

#include "safempc/ellipsoid.hpp"
#include "safempc/environments.hpp"
#include "safempc/gp.hpp"
#include "safempc/performance.hpp"
#include "safempc/propagation.hpp"
#include "safempc/safe_mpc.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace safempc;

namespace
{
    Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64 &rng)
    {
        std::normal_distribution<double> N;
        Eigen::MatrixXd A(n, n);
        for (Eigen::Index i = 0; i < A.size(); ++i)
            A(i) = N(rng);
        return A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    }

    GPPosterior pendulum_gp(int n, const EnvSpec &env)
    {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        Eigen::MatrixXd Z(n, 3), Y(n, 2);
        for (int i = 0; i < n; ++i)
        {
            const Eigen::Vector2d x(0.5 * U(rng), U(rng));
            const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.5 * U(rng));
            Z.row(i) << x.transpose(), u.transpose();
            Y.row(i) = env.model_error(x, u).transpose();
        }
        const KernelSpec k = KernelSpec::sum(Eigen::Vector3d::Constant(1e-3), Eigen::Vector3d(0.5, 2.0, 1.0), 4e-3);
        return GPPosterior::fit(Dataset(Z, Y, 1e-3), {k, k}, 2.0);
    }
} // namespace

static void BM_MaxScaledDistance(benchmark::State &state)
{
    std::mt19937_64 rng(1);
    const auto n = state.range(0);
    const Eigen::MatrixXd Q = random_spd(n, rng);
    const Eigen::MatrixXd S = random_spd(n, rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(max_scaled_distance(Q, S));
}
BENCHMARK(BM_MaxScaledDistance)->Arg(2)->Arg(4)->Arg(8);

static void BM_MinkowskiSum(benchmark::State &state)
{
    std::mt19937_64 rng(2);
    const auto n = state.range(0);
    const Ellipsoid a(Eigen::VectorXd::Zero(n), random_spd(n, rng));
    const Ellipsoid b(Eigen::VectorXd::Ones(n), random_spd(n, rng));
    for (auto _ : state)
        benchmark::DoNotOptimize(minkowski_sum_outer(a, b));
}
BENCHMARK(BM_MinkowskiSum)->Arg(2)->Arg(4)->Arg(8);

static void BM_GPPredict(benchmark::State &state)
{
    const EnvSpec env = make_pendulum_env();
    const GPPosterior gp = pendulum_gp(static_cast<int>(state.range(0)), env);
    const Eigen::Vector3d z(0.1, -0.2, 0.05);
    for (auto _ : state)
        benchmark::DoNotOptimize(gp.predict(z));
}
BENCHMARK(BM_GPPredict)->Arg(50)->Arg(150)->Arg(400);

static void BM_GPPredictFull(benchmark::State &state)
{
    const EnvSpec env = make_pendulum_env();
    const GPPosterior gp = pendulum_gp(static_cast<int>(state.range(0)), env);
    const Eigen::Vector3d z(0.1, -0.2, 0.05);
    for (auto _ : state)
        benchmark::DoNotOptimize(gp.predict_full(z));
}
BENCHMARK(BM_GPPredictFull)->Arg(50)->Arg(150)->Arg(400);

static void BM_GPFit(benchmark::State &state)
{
    const EnvSpec env = make_pendulum_env();
    for (auto _ : state)
        benchmark::DoNotOptimize(pendulum_gp(static_cast<int>(state.range(0)), env));
}
BENCHMARK(BM_GPFit)->Arg(50)->Arg(150)->Unit(benchmark::kMillisecond);

static void BM_MultiStep(benchmark::State &state)
{
    const EnvSpec env = make_pendulum_env();
    const GPPosterior gp = pendulum_gp(100, env);
    LipschitzConstants L = env.lipschitz;
    L.L_grad_mu = Eigen::Vector2d::Constant(0.05);
    L.L_sigma = 0.05;
    const int T = static_cast<int>(state.range(0));
    const Ellipsoid R0 = Ellipsoid::point(Eigen::Vector2d(0.1, 0.0));
    for (auto _ : state)
    {
        std::vector<FeedbackLaw> laws(T, FeedbackLaw(-env.lqr.K, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2)));
        benchmark::DoNotOptimize(multi_step(R0, laws, *env.prior, gp, L, PropagationScheme::MeanLinearized));
    }
}
BENCHMARK(BM_MultiStep)->Arg(1)->Arg(5)->Arg(10);

static void BM_SaturatingCostGradient(benchmark::State &state)
{
    const EnvSpec env = make_pendulum_env();
    const GPPosterior gp = pendulum_gp(100, env);
    const auto H = state.range(0);
    const Eigen::MatrixXd inputs = Eigen::MatrixXd::Constant(1, H, 0.1);
    const SaturatingCostObjective objective(Eigen::Vector2d(0.3, 0.0), Eigen::Matrix2d::Identity(), 0.95);
    const StageFunction stage = [&](int t, const GaussianBelief &B, Eigen::VectorXd *dm, Eigen::MatrixXd *dS)
    { return objective(t, B, dm, dS); };
    const PriorModel prior = PriorModel::linear(env.true_linear.A, env.true_linear.B);
    Eigen::MatrixXd d_inputs;
    for (auto _ : state)
        benchmark::DoNotOptimize(performance_cost_gradient(GaussianBelief::point(Eigen::Vector2d(0.1, 0.0)), inputs,
                                                           gp, prior, stage, &d_inputs, nullptr));
}
BENCHMARK(BM_SaturatingCostGradient)->Arg(5)->Arg(15);

BENCHMARK_MAIN();
