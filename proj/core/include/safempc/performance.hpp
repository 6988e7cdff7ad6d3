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

#ifndef SAFEMPC_PERFORMANCE_HPP_
#define SAFEMPC_PERFORMANCE_HPP_

#include "safempc/gp.hpp"
#include "safempc/plan.hpp"
#include "safempc/propagation.hpp"
#include "safempc/safe_mpc.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace safempc
{
    /**
     * @brief First-order moment matching through x+ = h(x, u) + g(x, u), g ~ GP.
     *
     * m' = h(m,u) + mu(m,u),  S' = J S J^T + diag(sigma^2(m,u)),  J = d(h + mu)/dx at (m,u).
     */
    GaussianBelief moment_propagate(const GaussianBelief &belief, const Eigen::VectorXd &u, const GPPosterior &gp,
                                    const PriorModel &prior);

    /**
     * @brief E[1 - exp(-1/2 (x - x_g)^T W (x - x_g))] for x ~ N(m, S).
     *
     * Equals 1 - det(I + S W)^{-1/2} exp(-1/2 d^T W (I + S W)^{-1} d), d = m - x_g.
     * Optional outputs are the gradients with respect to m and S.
     */
    double expected_saturating_cost(const GaussianBelief &belief, const Eigen::VectorXd &x_goal,
                                    const Eigen::MatrixXd &W, Eigen::VectorXd *d_mean = nullptr,
                                    Eigen::MatrixXd *d_cov = nullptr);

    /// X_0 .. X_H under the open-loop inputs (q x H).
    std::vector<GaussianBelief> performance_rollout(const GaussianBelief &X0, const Eigen::MatrixXd &inputs,
                                                    const GPPosterior &gp, const PriorModel &prior);

    /// stage(t, X_t) for t = 1..H with optional gradients in (mean, cov).
    using StageFunction =
        std::function<double(int, const GaussianBelief &, Eigen::VectorXd *, Eigen::MatrixXd *)>;

    /**
     * @brief sum_{t=1..H} stage(t, X_t) and its gradient with respect to the inputs (q x H)
     * and the initial mean, by a reverse sweep through the moment equations.
     *
     * Requires a linear prior model (its second derivatives are not available otherwise).
     */
    double performance_cost_gradient(const GaussianBelief &X0, const Eigen::MatrixXd &inputs, const GPPosterior &gp,
                                     const PriorModel &prior, const StageFunction &stage, Eigen::MatrixXd *d_inputs,
                                     Eigen::VectorXd *d_mean0, std::vector<GaussianBelief> *beliefs = nullptr);

    // ---------------------------------------------------------------- objectives

    /// sum_{t=1..H} gamma^{t-1} E[c_sc(X_t)].
    class SaturatingCostObjective : public Objective, public StageCost
    {
    public:
        SaturatingCostObjective(Eigen::VectorXd x_goal, Eigen::MatrixXd W, double gamma);
        std::string name() const override { return "expected_saturating_cost"; }
        bool needs_performance_chain() const override { return true; }
        double value(const PlanEvaluation &plan, const GPPosterior &gp) const override;
        const StageCost *performance_stage_cost() const override { return this; }
        double operator()(int t, const GaussianBelief &belief, Eigen::VectorXd *d_mean,
                          Eigen::MatrixXd *d_cov) const override;

        const Eigen::VectorXd &goal() const { return x_goal_; }
        double gamma() const { return gamma_; }

    private:
        Eigen::VectorXd x_goal_;
        Eigen::MatrixXd W_;
        double gamma_;
    };

    /// sum_{t=0..T-1} weight * (p_t[index] - goal)^2 over the safety-trajectory centers.
    class CenterDistanceObjective : public Objective
    {
    public:
        CenterDistanceObjective(int index, double goal, double weight);
        std::string name() const override { return "center_distance"; }
        double value(const PlanEvaluation &plan, const GPPosterior &gp) const override;

    private:
        int index_;
        double goal_;
        double weight_;
    };

    /// -sum_j sigma_j(x_0, u_0): negative confidence at the first state-action pair.
    class VarianceSumObjective : public Objective
    {
    public:
        std::string name() const override { return "variance_sum"; }
        double value(const PlanEvaluation &plan, const GPPosterior &gp) const override;
    };

    /// -[sum_{t=0..H} tr(S_t^{1/2}) - sum_{t=1..min(T,H)} (m_t - p_t)^T Q (m_t - p_t)].
    class ConfidenceMinusDeviationObjective : public Objective
    {
    public:
        explicit ConfidenceMinusDeviationObjective(Eigen::MatrixXd Q_perf);
        std::string name() const override { return "confidence_minus_deviation"; }
        bool needs_performance_chain() const override { return true; }
        double value(const PlanEvaluation &plan, const GPPosterior &gp) const override;

    private:
        Eigen::MatrixXd Q_;
    };

    /// Objective that is identically zero (pure feasibility).
    class ZeroObjective : public Objective
    {
    public:
        std::string name() const override { return "zero"; }
        double value(const PlanEvaluation &, const GPPosterior &) const override { return 0.0; }
    };

    enum class ExplorationKind
    {
        VarianceSum,
        ConfidenceMinusDeviation
    };

    ObjectivePtr exploration_objective(ExplorationKind kind, const Eigen::MatrixXd &Q_perf = Eigen::MatrixXd());

    /// Couple a performance trajectory of length H to the safety problem; the first r inputs are shared.
    MPCProblem assemble_coupled_problem(MPCProblem mpc, int H, int r, ObjectivePtr objective);

    // ---------------------------------------------------------------- discrete toy system

    /**
     * @brief Integer system x+ = x + u, u in {-1, 0, 1}, safe set x >= 0, cost c(-1) = -2,
     * c(1) = -1, c(x) = 0 otherwise. Both planners enumerate all action sequences.
     */
    struct ToyPlanner
    {
        int T = 1;
        int H = 1;
        int r = 1;
        double gamma = 1.0;

        static double cost(int x);
        /// Plan perf inputs freely, then apply the safe input sequence closest to them.
        int two_stage_action(int x) const;
        /// Jointly plan safety and performance inputs with the first r inputs shared.
        int coupled_action(int x) const;
        /// Closed-loop states x_0 .. x_steps.
        std::vector<int> simulate(int x0, int steps, bool coupled) const;
    };

} // namespace safempc

#endif // SAFEMPC_PERFORMANCE_HPP_
