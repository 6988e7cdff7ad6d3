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

#ifndef SAFEMPC_PLAN_HPP_
#define SAFEMPC_PLAN_HPP_

#include "safempc/ellipsoid.hpp"
#include "safempc/gp.hpp"
#include "safempc/propagation.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace safempc
{
    /// Gaussian belief N(mean, cov) over the state.
    struct GaussianBelief
    {
        Eigen::VectorXd mean;
        Eigen::MatrixXd cov;

        static GaussianBelief point(const Eigen::VectorXd &x);
    };

    /// Symmetrize and clip eigenvalues below zero (eigenvalues >= -1e-10 are treated as round-off).
    Eigen::MatrixXd clip_psd(const Eigen::MatrixXd &S);

    /// Everything computed for one candidate plan.
    struct PlanEvaluation
    {
        Eigen::VectorXd x0;
        Eigen::MatrixXd k;      ///< q x T feed-forward terms of the safety trajectory
        Eigen::MatrixXd u_perf; ///< q x H performance inputs (first r columns equal to k)
        std::vector<Ellipsoid> ellipsoids;   ///< R_0 .. R_T (R_0 is the point x0)
        std::vector<FeedbackLaw> laws;       ///< u_0 .. u_{T-1}
        std::vector<GaussianBelief> beliefs; ///< X_0 .. X_H
    };

    /**
     * @brief Additive cost over performance beliefs: sum_{t=1..H} stage(t, X_t).
     *
     * Implementations report d stage / d mean and d stage / d cov when requested.
     */
    class StageCost
    {
    public:
        virtual ~StageCost() = default;
        virtual double operator()(int t, const GaussianBelief &belief, Eigen::VectorXd *d_mean,
                                  Eigen::MatrixXd *d_cov) const = 0;
    };

    /// MPC objective J over a plan. Lower is better.
    class Objective
    {
    public:
        virtual ~Objective() = default;
        virtual std::string name() const = 0;
        virtual bool needs_performance_chain() const { return false; }
        virtual double value(const PlanEvaluation &plan, const GPPosterior &gp) const = 0;
        /// Non-null if value() is exactly the sum of this stage cost over the beliefs.
        virtual const StageCost *performance_stage_cost() const { return nullptr; }
    };

    using ObjectivePtr = std::shared_ptr<const Objective>;

} // namespace safempc

#endif // SAFEMPC_PLAN_HPP_
