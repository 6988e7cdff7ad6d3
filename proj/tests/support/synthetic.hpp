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

#ifndef SAFEMPC_TESTS_SYNTHETIC_HPP_
#define SAFEMPC_TESTS_SYNTHETIC_HPP_

#include "safempc/gp.hpp"
#include "safempc/propagation.hpp"

#include "support/generators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace safempc::testing
{
    /// Model error g_j(z) = mu_j(z) + beta sigma_j(z) s_j(z) with s_j(z) = a_j sin(w_j . z + phi_j) + b_j,
    /// |a_j| + |b_j| <= 1, so g stays inside the GP confidence interval everywhere.
    struct SyntheticError
    {
        const GPPosterior *gp = nullptr;
        Eigen::MatrixXd W;   ///< p x d frequencies
        Eigen::VectorXd phi; ///< p phases
        Eigen::VectorXd a;   ///< p amplitudes of the oscillating part
        Eigen::VectorXd b;   ///< p offsets

        static SyntheticError random(const GPPosterior &gp, Gen &gen, double max_frequency)
        {
            const Eigen::Index p = gp.output_dim(), d = gp.input_dim();
            SyntheticError e;
            e.gp = &gp;
            e.W = gen.matrix(p, d, max_frequency / std::sqrt(static_cast<double>(d)));
            for (Eigen::Index j = 0; j < p; ++j)
            {
                const double n = e.W.row(j).norm();
                if (n > max_frequency)
                    e.W.row(j) *= max_frequency / n;
            }
            e.phi = gen.uniform_vector(p, 0.0, 2.0 * std::numbers::pi);
            e.a.resize(p);
            e.b.resize(p);
            for (Eigen::Index j = 0; j < p; ++j)
            {
                const int mode = gen.integer(0, 3);
                if (mode == 0) // saturated at the upper bound
                {
                    e.a(j) = 0.0;
                    e.b(j) = 1.0;
                }
                else if (mode == 1) // saturated at the lower bound
                {
                    e.a(j) = 0.0;
                    e.b(j) = -1.0;
                }
                else
                {
                    e.a(j) = gen.uniform(0.5, 1.0);
                    e.b(j) = (1.0 - e.a(j)) * gen.uniform(-1.0, 1.0);
                }
            }
            return e;
        }

        Eigen::VectorXd operator()(const Eigen::VectorXd &z) const
        {
            const GPPrediction pred = gp->predict(z);
            Eigen::VectorXd g(pred.mean.size());
            for (Eigen::Index j = 0; j < g.size(); ++j)
            {
                const double s = a(j) * std::sin(W.row(j).dot(z) + phi(j)) + b(j);
                g(j) = pred.mean(j) + gp->beta() * pred.std(j) * s;
            }
            return g;
        }
    };

    /// Lipschitz constants for the synthetic errors, estimated by sampling a box and inflating by @p safety.
    inline LipschitzConstants sampled_lipschitz(const GPPosterior &gp, const Eigen::VectorXd &lo,
                                                const Eigen::VectorXd &hi, double max_frequency, int samples,
                                                double safety, Gen &gen)
    {
        const Eigen::Index p = gp.output_dim();
        LipschitzConstants L = LipschitzConstants::zero(p);
        double grad_sigma = 0.0, lip_g = 0.0;
        Eigen::VectorXd hess_mu = Eigen::VectorXd::Zero(p);
        for (int s = 0; s < samples; ++s)
        {
            Eigen::VectorXd z(lo.size());
            for (Eigen::Index i = 0; i < z.size(); ++i)
                z(i) = gen.uniform(lo(i), hi(i));
            const GPFullPrediction full = gp.predict_full(z);
            const auto H = gp.predict_mean_hessians(z);
            for (Eigen::Index j = 0; j < p; ++j)
            {
                const double ds = full.jacobians.d_std.row(j).norm();
                grad_sigma = std::max(grad_sigma, ds);
                const double dm = full.jacobians.d_mean.row(j).norm();
                lip_g = std::max(lip_g, dm + gp.beta() * (ds + full.value.std(j) * max_frequency));
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H[j] + H[j].transpose()));
                hess_mu(j) = std::max(hess_mu(j), es.eigenvalues().cwiseAbs().maxCoeff());
            }
        }
        L.L_sigma = safety * grad_sigma;
        L.L_g = safety * lip_g;
        L.L_grad_mu = safety * hess_mu;
        return L;
    }

} // namespace safempc::testing

#endif // SAFEMPC_TESTS_SYNTHETIC_HPP_
