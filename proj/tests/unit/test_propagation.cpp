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

#include "safempc/constraints.hpp"
#include "safempc/errors.hpp"
#include "safempc/propagation.hpp"

#include "support/generators.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

using namespace safempc;
using safempc::testing::Gen;

namespace
{
    struct Toy
    {
        std::shared_ptr<PriorModel> prior;
        std::shared_ptr<GPPosterior> gp;
        Eigen::MatrixXd K;
    };

    // Random stable-ish linear prior with a GP fitted to a smooth residual.
    Toy random_toy(Gen &gen, int p, int q)
    {
        Toy t;
        const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(p, p) + 0.1 * gen.matrix(p, p);
        const Eigen::MatrixXd B = 0.1 * gen.matrix(p, q);
        t.prior = std::make_shared<PriorModel>(PriorModel::linear(A, B));
        const int n = 20;
        Eigen::MatrixXd Z = gen.matrix(n, p + q);
        Eigen::MatrixXd Y(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j)
                Y(i, j) = 0.05 * std::sin(Z(i, j % (p + q)) + j);
        const KernelSpec k = KernelSpec::sum(Eigen::VectorXd::Constant(p + q, 1e-3),
                                             Eigen::VectorXd::Constant(p + q, 1.5), 4e-3);
        t.gp = std::make_shared<GPPosterior>(
            GPPosterior::fit(Dataset(Z, Y, 1e-2), std::vector<KernelSpec>(p, k), 2.0));
        t.K = -0.2 * gen.matrix(q, p);
        return t;
    }
} // namespace

TEST(OneStep, CenterAndAffineShapeMatchOracles)
{
    Gen gen(41);
    for (int c = 0; c < 100; ++c)
    {
        const int p = gen.integer(1, 4), q = gen.integer(1, 2);
        const Toy t = random_toy(gen, p, q);
        const Ellipsoid R(gen.vector(p, 0.5), gen.spd(p, 1e-3, 1e-1));
        const FeedbackLaw law(t.K, gen.vector(q, 0.3), R.center());
        for (PropagationScheme scheme : {PropagationScheme::LocallyConstant, PropagationScheme::MeanLinearized})
        {
            OneStepDetail detail;
            const LipschitzConstants L = LipschitzConstants::zero(p);
            one_step(R, law, *t.prior, *t.gp, L, scheme, &detail);
            Eigen::VectorXd z(p + q);
            z << R.center(), law(R.center());
            // oracle center: prior plus posterior mean at the center
            const Eigen::VectorXd center = (*t.prior)(R.center(), law(R.center())) + t.gp->predict(z).mean;
            EXPECT_LE((detail.center - center).norm(), 1e-12);
            // oracle closed-loop Jacobian by finite differences of the nominal map
            auto nominal = [&](const Eigen::VectorXd &x) -> Eigen::VectorXd
            {
                Eigen::VectorXd zz(p + q);
                zz << x, law(x);
                Eigen::VectorXd out = (*t.prior)(x, law(x));
                if (scheme == PropagationScheme::MeanLinearized)
                    out += t.gp->predict(zz).mean;
                return out;
            };
            const Eigen::MatrixXd H = safempc::testing::fd_jacobian(nominal, R.center());
            const Eigen::MatrixXd oracle = H * R.shape() * H.transpose();
            EXPECT_LE(safempc::testing::rel_err(detail.affine_shape, oracle), 1e-6);
            // oracle distance: max over the boundary of ||(x - c, K (x - c))||
            double l_sampled = 0.0;
            for (int s = 0; s < 2000; ++s)
            {
                const Eigen::VectorXd dx = R.boundary_point(gen.unit_sphere(p)) - R.center();
                Eigen::VectorXd v(p + q);
                v << dx, t.K * dx;
                l_sampled = std::max(l_sampled, v.norm());
            }
            EXPECT_GE(detail.distance * (1 + 1e-9), l_sampled);
            EXPECT_LE(detail.distance, l_sampled * 1.05);
        }
    }
}

TEST(OneStepProperty, SampledSuccessorsStayInsideBothSchemes)
{
    Gen gen(42);
    for (int c = 0; c < 100; ++c)
    {
        const int p = gen.integer(1, 3), q = 1;
        const Toy t = random_toy(gen, p, q);
        const Ellipsoid R(gen.vector(p, 0.5), gen.spd(p, 1e-3, 5e-2));
        const FeedbackLaw law(t.K, gen.vector(q, 0.3), R.center());
        const double max_frequency = 2.0;
        const Eigen::VectorXd lo = Eigen::VectorXd::Constant(p + q, -4.0), hi = -lo;
        LipschitzConstants L =
            safempc::testing::sampled_lipschitz(*t.gp, lo, hi, max_frequency, 400, 1.5, gen);
        for (PropagationScheme scheme : {PropagationScheme::LocallyConstant, PropagationScheme::MeanLinearized})
        {
            const Ellipsoid next = one_step(R, law, *t.prior, *t.gp, L, scheme);
            for (int s = 0; s < 50; ++s)
            {
                const auto g = safempc::testing::SyntheticError::random(*t.gp, gen, max_frequency);
                const Eigen::VectorXd x =
                    s % 2 ? R.boundary_point(gen.unit_sphere(p)) : Eigen::VectorXd(R.center() + R.factor().matrixL() * gen.unit_ball(p));
                const Eigen::VectorXd u = law(x);
                Eigen::VectorXd z(p + q);
                z << x, u;
                const Eigen::VectorXd x_next = (*t.prior)(x, u) + g(z);
                EXPECT_TRUE(next.contains(x_next, 1e-9)) << "case " << c << " scheme " << to_string(scheme);
            }
        }
    }
}

TEST(MultiStep, AnchorsFollowCentersAndShapesGrow)
{
    Gen gen(43);
    const Toy t = random_toy(gen, 2, 1);
    const Ellipsoid R0 = Ellipsoid::point(Eigen::Vector2d(0.2, -0.1));
    std::vector<FeedbackLaw> laws(4, FeedbackLaw(t.K, Eigen::VectorXd::Constant(1, 0.1), Eigen::VectorXd::Zero(2)));
    LipschitzConstants L = LipschitzConstants::zero(2);
    L.L_g = 0.5;
    const auto Rs = multi_step(R0, laws, *t.prior, *t.gp, L, PropagationScheme::LocallyConstant);
    ASSERT_EQ(Rs.size(), 4u);
    EXPECT_LE((laws[0].anchor - R0.center()).norm(), 1e-15);
    for (int i = 1; i < 4; ++i)
    {
        EXPECT_LE((laws[i].anchor - Rs[i - 1].center()).norm(), 1e-15);
        EXPECT_GT(Rs[i].shape().trace(), 0.0);
    }
    std::vector<FeedbackLaw> none;
    EXPECT_THROW(multi_step(R0, none, *t.prior, *t.gp, L, PropagationScheme::LocallyConstant), InvalidInputError);
}

TEST(OneStep, RejectsDimensionMismatch)
{
    Gen gen(44);
    const Toy t = random_toy(gen, 2, 1);
    const Ellipsoid R(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
    const FeedbackLaw law(Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(3));
    EXPECT_THROW(one_step(R, law, *t.prior, *t.gp, LipschitzConstants::zero(2), PropagationScheme::LocallyConstant),
                 InvalidInputError);
}

TEST(Lipschitz, ValidatesShapesAndSigns)
{
    LipschitzConstants L = LipschitzConstants::zero(2);
    EXPECT_NO_THROW(L.validate(2));
    EXPECT_THROW(L.validate(3), InvalidInputError);
    L.L_g = -1.0;
    EXPECT_THROW(L.validate(2), InvalidInputError);
}

TEST(ConstraintsProperty, StateAndControlResidualsMatchSupportOracle)
{
    Gen gen(45);
    for (int c = 0; c < 100; ++c)
    {
        const int p = gen.integer(1, 4), q = gen.integer(1, 2);
        const Ellipsoid R(gen.vector(p, 0.3), gen.spd(p, 1e-3, 0.5));
        const int m = gen.integer(1, 6);
        const Polytope Xp(gen.matrix(m, p), gen.uniform_vector(m, 0.5, 2.0));
        const Eigen::VectorXd rs = state_residuals(R, Xp);
        const FeedbackLaw law(gen.matrix(q, p), gen.vector(q), R.center());
        const Polytope U = Polytope::box(Eigen::VectorXd::Constant(q, -1.0), Eigen::VectorXd::Constant(q, 1.0));
        const Eigen::VectorXd ru = control_residuals(R, law, U);
        // sampled boundary points never exceed the residuals, support points attain them
        Eigen::VectorXd max_x = Eigen::VectorXd::Constant(m, -1e300), max_u = Eigen::VectorXd::Constant(2 * q, -1e300);
        for (int s = 0; s < 3000; ++s)
        {
            const Eigen::VectorXd x = R.boundary_point(gen.unit_sphere(p));
            max_x = max_x.cwiseMax(Xp.H() * x - Xp.h());
            max_u = max_u.cwiseMax(U.H() * law(x) - U.h());
        }
        EXPECT_TRUE(((rs - max_x).array() >= -1e-9).all());
        EXPECT_TRUE(((ru - max_u).array() >= -1e-9).all());
        EXPECT_LE((rs - max_x).maxCoeff(), 0.05 * (1.0 + rs.cwiseAbs().maxCoeff()));
        EXPECT_LE((ru - max_u).maxCoeff(), 0.05 * (1.0 + ru.cwiseAbs().maxCoeff()));
        EXPECT_EQ(state_residuals(R, std::nullopt).size(), 0);
    }
}

TEST(Constraints, PolytopeSubsetByVertices)
{
    const Polytope inner = Polytope::box(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1));
    const Polytope outer = Polytope::box(Eigen::Vector2d(-2, -1), Eigen::Vector2d(2, 1));
    EXPECT_TRUE(polytope_subset(inner, outer));
    EXPECT_FALSE(polytope_subset(outer, inner));
}

TEST(Constraints, ConstraintSetRejectsMismatchedDimensions)
{
    const Polytope U = Polytope::box(Eigen::VectorXd::Constant(1, -1), Eigen::VectorXd::Constant(1, 1));
    const Polytope X2 = Polytope::box(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1));
    const Polytope X3 = Polytope::box(Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1));
    EXPECT_THROW(ConstraintSet(X3, U, X2), InvalidInputError);
    EXPECT_NO_THROW(ConstraintSet(std::nullopt, U, X2));
}
