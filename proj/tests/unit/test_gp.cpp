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
#include "safempc/gp.hpp"

#include "support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace safempc;
using safempc::testing::Gen;

namespace
{
    // Test-side kernel, written out independently of KernelSpec.
    double oracle_kernel(const KernelSpec &k, const Eigen::VectorXd &a, const Eigen::VectorXd &b)
    {
        double v = 0.0;
        if (k.family != KernelFamily::Matern52)
            for (Eigen::Index i = 0; i < a.size(); ++i)
                v += k.linear_weights(i) * a(i) * b(i);
        if (k.family != KernelFamily::Linear)
        {
            double r2 = 0.0;
            for (Eigen::Index i = 0; i < a.size(); ++i)
                r2 += std::pow((a(i) - b(i)) / k.lengthscales(i), 2);
            const double r = std::sqrt(r2);
            v += k.signal_variance * (1.0 + std::sqrt(5.0) * r + 5.0 / 3.0 * r2) * std::exp(-std::sqrt(5.0) * r);
        }
        return v;
    }

    struct DenseOracle
    {
        double mean = 0.0;
        double var = 0.0;
    };

    DenseOracle dense_posterior(const KernelSpec &k, const Eigen::MatrixXd &Z, const Eigen::VectorXd &y,
                                double noise_std, const Eigen::VectorXd &z)
    {
        const Eigen::Index n = Z.rows();
        Eigen::MatrixXd K(n, n);
        Eigen::VectorXd ks(n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            ks(i) = oracle_kernel(k, Z.row(i).transpose(), z);
            for (Eigen::Index j = 0; j < n; ++j)
                K(i, j) = oracle_kernel(k, Z.row(i).transpose(), Z.row(j).transpose());
        }
        K.diagonal().array() += noise_std * noise_std;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
        return {ks.dot(lu.solve(y)), oracle_kernel(k, z, z) - ks.dot(lu.solve(ks))};
    }

    KernelSpec random_kernel(Gen &gen, int d, int family)
    {
        const Eigen::VectorXd ls = gen.uniform_vector(d, 0.5, 2.0);
        const Eigen::VectorXd w = gen.uniform_vector(d, 0.0, 0.5);
        const double s2 = gen.uniform(0.2, 2.0);
        if (family == 0)
            return KernelSpec::linear(w);
        if (family == 1)
            return KernelSpec::matern52(ls, s2);
        return KernelSpec::sum(w, ls, s2);
    }

    Dataset random_dataset(Gen &gen, int n, int d, int p, double noise)
    {
        Eigen::MatrixXd Z = gen.matrix(n, d);
        Eigen::MatrixXd Y(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j)
                Y(i, j) = std::sin(Z(i, 0) + j) + 0.3 * Z.row(i).sum() + noise * gen.normal();
        return Dataset(Z, Y, noise);
    }
} // namespace

TEST(Kernel, MatchesOracleAndGradient)
{
    Gen gen(31);
    for (int c = 0; c < 100; ++c)
    {
        const int d = gen.integer(1, 5);
        const KernelSpec k = random_kernel(gen, d, c % 3);
        const Eigen::VectorXd a = gen.vector(d), b = gen.vector(d);
        EXPECT_NEAR(k(a, b), oracle_kernel(k, a, b), 1e-12);
        const Eigen::VectorXd fd =
            safempc::testing::fd_gradient([&](const Eigen::VectorXd &x) { return oracle_kernel(k, x, b); }, a);
        EXPECT_LE((k.gradient(a, b) - fd).norm(), 1e-6 * std::max(1.0, fd.norm()));
        EXPECT_NEAR(k.prior_variance(a), oracle_kernel(k, a, a), 1e-12);
    }
}

TEST(Kernel, RejectsBadHyperparameters)
{
    EXPECT_THROW(KernelSpec::matern52(Eigen::VectorXd::Constant(2, -1.0), 1.0).validate(2), InvalidInputError);
    EXPECT_THROW(KernelSpec::linear(Eigen::VectorXd::Ones(3)).validate(2), InvalidInputError);
    EXPECT_THROW(kernel_family_from_string("rbf"), InvalidInputError);
}

TEST(GPProperty, PosteriorMatchesDenseOracle)
{
    Gen gen(32);
    for (int c = 0; c < 100; ++c)
    {
        const int d = gen.integer(1, 4), p = gen.integer(1, 3), n = gen.integer(1, 30);
        const double noise = std::exp(gen.uniform(std::log(1e-2), std::log(0.3)));
        std::vector<KernelSpec> kernels;
        const KernelSpec shared = random_kernel(gen, d, c % 3);
        for (int j = 0; j < p; ++j)
            kernels.push_back(j % 2 == 0 ? shared : random_kernel(gen, d, (c + j) % 3));
        const Dataset data = random_dataset(gen, n, d, p, noise);
        const GPPosterior gp = GPPosterior::fit(data, kernels, 2.0);
        ASSERT_EQ(gp.jitter(), 0.0);
        for (int s = 0; s < 5; ++s)
        {
            const Eigen::VectorXd z = gen.vector(d, 1.5);
            const GPPrediction pred = gp.predict(z);
            for (int j = 0; j < p; ++j)
            {
                const DenseOracle o = dense_posterior(kernels[j], data.inputs, data.targets.col(j), noise, z);
                EXPECT_LE(std::abs(pred.mean(j) - o.mean), 1e-8 * std::max(1.0, std::abs(o.mean)));
                EXPECT_LE(std::abs(pred.std(j) * pred.std(j) - std::max(o.var, 0.0)),
                          1e-8 * std::max(1.0, std::abs(o.var)));
            }
        }
    }
}

TEST(GPProperty, JacobiansMatchFiniteDifferences)
{
    Gen gen(33);
    for (int c = 0; c < 100; ++c)
    {
        const int d = gen.integer(1, 4), p = gen.integer(1, 3), n = gen.integer(2, 25);
        std::vector<KernelSpec> kernels(p, random_kernel(gen, d, c % 3));
        const GPPosterior gp = GPPosterior::fit(random_dataset(gen, n, d, p, 0.1), kernels, 2.0);
        const Eigen::VectorXd z = gen.vector(d, 1.5);
        const GPJacobians J = gp.predict_jacobians(z);
        const Eigen::MatrixXd fd_mean =
            safempc::testing::fd_jacobian([&](const Eigen::VectorXd &x) { return gp.predict(x).mean; }, z);
        const Eigen::MatrixXd fd_std =
            safempc::testing::fd_jacobian([&](const Eigen::VectorXd &x) { return gp.predict(x).std; }, z);
        EXPECT_LE((J.d_mean - fd_mean).norm(), 1e-4 * std::max(1.0, fd_mean.norm()));
        for (int j = 0; j < p; ++j)
        {
            if (J.std_flagged[j])
                continue;
            EXPECT_LE((J.d_std.row(j) - fd_std.row(j)).norm(), 1e-4 * std::max(1.0, fd_std.row(j).norm()));
        }
        const GPFullPrediction full = gp.predict_full(z);
        EXPECT_LE((full.jacobians.d_mean - J.d_mean).norm(), 1e-12);
        EXPECT_LE((full.value.mean - gp.predict(z).mean).norm(), 1e-12);
    }
}

TEST(GPProperty, MeanHessiansMatchFiniteDifferences)
{
    Gen gen(34);
    for (int c = 0; c < 100; ++c)
    {
        const int d = gen.integer(1, 4), n = gen.integer(2, 20);
        std::vector<KernelSpec> kernels(2, random_kernel(gen, d, 1 + c % 2));
        const GPPosterior gp = GPPosterior::fit(random_dataset(gen, n, d, 2, 0.1), kernels, 2.0);
        const Eigen::VectorXd z = gen.vector(d, 1.5);
        const auto Hs = gp.predict_mean_hessians(z);
        for (int j = 0; j < 2; ++j)
        {
            const Eigen::MatrixXd fd = safempc::testing::fd_jacobian(
                [&](const Eigen::VectorXd &x) -> Eigen::VectorXd {
                    return gp.predict_jacobians(x).d_mean.row(j).transpose();
                },
                z, 1e-5);
            EXPECT_LE((Hs[j] - fd).norm(), 1e-4 * std::max(1.0, fd.norm()));
        }
    }
}

TEST(GP, PriorPredictsKernelVariance)
{
    const KernelSpec k = KernelSpec::sum(Eigen::VectorXd::Constant(2, 0.1), Eigen::VectorXd::Ones(2), 0.5);
    const GPPosterior gp = GPPosterior::prior(2, {k, k}, 0.01, 2.0);
    const Eigen::Vector2d z(0.3, -1.0);
    const GPPrediction pred = gp.predict(z);
    EXPECT_EQ(pred.mean.norm(), 0.0);
    EXPECT_NEAR(pred.std(0), std::sqrt(oracle_kernel(k, z, z)), 1e-14);
}

TEST(GP, VarianceShrinksAtData)
{
    Gen gen(35);
    const KernelSpec k = KernelSpec::matern52(Eigen::VectorXd::Ones(2), 1.0);
    const Dataset data = random_dataset(gen, 10, 2, 1, 1e-3);
    const GPPosterior gp = GPPosterior::fit(data, {k}, 2.0);
    for (int i = 0; i < data.size(); ++i)
        EXPECT_LT(gp.predict(data.inputs.row(i).transpose()).std(0), 2e-3);
}

TEST(GP, DuplicateInputsWithTinyNoiseAreFactorized)
{
    const KernelSpec k = KernelSpec::matern52(Eigen::VectorXd::Ones(1), 1.0);
    Eigen::MatrixXd Z(3, 1);
    Z << 0.5, 0.5, 0.5;
    Eigen::MatrixXd Y(3, 1);
    Y << 1.0, 1.0, 1.0;
    const GPPosterior gp = GPPosterior::fit(Dataset(Z, Y, 1e-12), {k}, 2.0);
    EXPECT_NEAR(gp.predict(Eigen::VectorXd::Constant(1, 0.5)).mean(0), 1.0, 1e-4);
    EXPECT_GT(gp.jitter(), 0.0);
}

TEST(MutualInformation, MatchesLogDeterminantAndIsMonotone)
{
    Gen gen(36);
    for (int c = 0; c < 100; ++c)
    {
        const int d = gen.integer(1, 4), p = gen.integer(1, 3), n = gen.integer(1, 25);
        std::vector<KernelSpec> kernels;
        for (int j = 0; j < p; ++j)
            kernels.push_back(random_kernel(gen, d, (c + j) % 3));
        const double noise = gen.uniform(0.01, 0.5);
        const Eigen::MatrixXd Z = gen.matrix(n, d);
        double oracle = 0.0;
        for (const auto &k : kernels)
        {
            Eigen::MatrixXd A(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    A(i, j) = oracle_kernel(k, Z.row(i).transpose(), Z.row(j).transpose()) / (noise * noise);
            A.diagonal().array() += 1.0;
            oracle += 0.5 * std::log(A.determinant());
        }
        const double mi = mutual_information(kernels, Z, noise);
        EXPECT_NEAR(mi, oracle, 1e-8 * std::max(1.0, std::abs(oracle)));
        // adding any point never decreases the information
        double prev = 0.0;
        for (int m = 1; m <= n; ++m)
        {
            const double cur = mutual_information(kernels, Z.topRows(m), noise);
            EXPECT_GE(cur, prev - 1e-10);
            prev = cur;
        }
    }
}

TEST(Subselect, GreedyMaxVarianceMatchesDenseRecompute)
{
    Gen gen(37);
    for (int c = 0; c < 30; ++c)
    {
        const int d = gen.integer(1, 3), n = gen.integer(10, 40), budget = gen.integer(1, 9);
        const KernelSpec k = random_kernel(gen, d, 1 + c % 2);
        const Dataset data = random_dataset(gen, n, d, 2, 0.05);
        const std::vector<int> got = max_variance_subselect_indices(data, {k, k}, budget);
        // oracle: recompute every candidate's posterior variance with a dense solve each round
        std::vector<int> chosen;
        for (int b = 0; b < budget; ++b)
        {
            int best = -1;
            double best_var = -1.0;
            for (int i = 0; i < n; ++i)
            {
                if (std::find(chosen.begin(), chosen.end(), i) != chosen.end())
                    continue;
                const Eigen::VectorXd z = data.inputs.row(i).transpose();
                double var = oracle_kernel(k, z, z);
                if (!chosen.empty())
                {
                    Eigen::MatrixXd Zs(chosen.size(), d);
                    for (std::size_t s = 0; s < chosen.size(); ++s)
                        Zs.row(s) = data.inputs.row(chosen[s]);
                    var = dense_posterior(k, Zs, Eigen::VectorXd::Zero(Zs.rows()), 0.05, z).var;
                }
                if (var > best_var)
                {
                    best_var = var;
                    best = i;
                }
            }
            chosen.push_back(best);
        }
        std::vector<int> a = got, b = chosen;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b) << "case " << c;
    }
}

TEST(Dataset, CsvRoundTrip)
{
    Gen gen(38);
    const Dataset data = random_dataset(gen, 7, 3, 2, 0.1);
    std::stringstream ss;
    data.write_csv(ss);
    const Dataset back = Dataset::read_csv(ss, 0.1);
    EXPECT_EQ(back.size(), 7);
    EXPECT_LE((back.inputs - data.inputs).norm(), 1e-12);
    EXPECT_LE((back.targets - data.targets).norm(), 1e-12);
}

TEST(Dataset, RejectsMismatchedAppend)
{
    Dataset data = Dataset::empty(2, 1, 0.1);
    EXPECT_THROW(data.append(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(1)), InvalidInputError);
}
