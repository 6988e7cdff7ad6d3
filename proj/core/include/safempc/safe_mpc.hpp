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

#ifndef SAFEMPC_SAFE_MPC_HPP_
#define SAFEMPC_SAFE_MPC_HPP_

#include "safempc/constraints.hpp"
#include "safempc/optimizer.hpp"
#include "safempc/plan.hpp"
#include "safempc/propagation.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace safempc
{
    /// Backup controller u = clamp(-K x) onto the box [u_lo, u_hi].
    struct SafePolicy
    {
        Eigen::MatrixXd K; ///< q x p LQR gain
        Eigen::VectorXd u_lo;
        Eigen::VectorXd u_hi;

        Eigen::VectorXd operator()(const Eigen::VectorXd &x) const;
        Eigen::VectorXd clamp(const Eigen::VectorXd &u) const;
    };

    struct SolverConfig
    {
        int multistarts = 25; ///< total starts: warm start and backup-policy start first, then random
        PenaltyConfig penalty;
        double tol_feas = 1e-6;
        std::uint64_t seed = 0;
        bool use_warm_start = true;
        bool use_safe_start = true;
        /// Spread of random x0 starts around X_safe when the initial state is optimized.
        double initial_state_spread = 1.5;
    };

    /**
     * @brief Safety MPC problem at the current state, optionally coupled with a Gaussian
     * performance trajectory of length H whose first r inputs equal the safety inputs.
     *
     * T == 0 denotes a performance-only problem (no safety trajectory, no certification);
     * chance constraints on the beliefs are then enforced when chance_kappa is set.
     */
    struct MPCProblem
    {
        int T = 1;
        Eigen::VectorXd x_t;
        std::shared_ptr<const PriorModel> prior;
        std::shared_ptr<const GPPosterior> gp;
        LipschitzConstants lipschitz;
        PropagationScheme scheme = PropagationScheme::LocallyConstant;
        std::shared_ptr<const ConstraintSet> constraints;
        std::vector<Eigen::MatrixXd> gains; ///< K_0 .. K_{T-1}, q x p
        ObjectivePtr objective;
        SafePolicy safe_policy;

        int H = 0;
        int r = 1;
        bool optimize_initial_state = false;
        /// Chance constraints m + kappa * std inside X and u in U for performance-only planning.
        std::optional<double> chance_kappa;
        /// Soft bound keeping uncoupled performance inputs inside U.
        bool bound_performance_inputs = true;

        Eigen::Index state_dim() const { return prior->state_dim(); }
        Eigen::Index input_dim() const { return prior->input_dim(); }
        int coupled_inputs() const;
        void validate() const;
    };

    /// Initial guess for the decision variables.
    struct PlanGuess
    {
        Eigen::VectorXd x0;     ///< used only when the initial state is optimized
        Eigen::MatrixXd k;      ///< q x T
        Eigen::MatrixXd u_perf; ///< q x H
    };

    struct ResidualReport
    {
        Eigen::VectorXd residuals;
        std::vector<std::string> labels;
        double max_residual = -std::numeric_limits<double>::infinity();
        int worst_index = -1;

        std::string worst_label() const;
    };

    struct SafetyPlan
    {
        Eigen::VectorXd x0;
        std::vector<FeedbackLaw> laws;
        std::vector<Ellipsoid> ellipsoids; ///< R_0 .. R_T
        Eigen::MatrixXd u_perf;            ///< q x H
        std::vector<GaussianBelief> beliefs;
        ResidualReport report;
        double objective = std::numeric_limits<double>::infinity();
        double aux_violation = 0.0; ///< soft / chance-constraint violation (not certified)
        bool feasible = false;
        bool certified = false;
        int start_index = -1;
        int iterations = 0;

        /// First input to apply at the planned initial state.
        Eigen::VectorXd first_input() const;
    };

    /// Evaluate the plan for decision variables (no optimization); throws on numerical failure.
    PlanEvaluation evaluate_plan(const MPCProblem &problem, const PlanGuess &vars);

    /// Residuals of the safety trajectory (control t = 0..T-1, state t = 1..T-1, terminal R_T).
    ResidualReport safety_residuals(const MPCProblem &problem, const PlanEvaluation &plan);

    /// Exact re-propagation of the plan's laws from its initial state and residual evaluation.
    ResidualReport certify(const SafetyPlan &plan, const MPCProblem &problem);

    /// Backup-policy guess: nominal mean rollout under the safe policy.
    PlanGuess safe_policy_guess(const MPCProblem &problem, const Eigen::VectorXd &x0);

    /// Multi-start penalty optimization followed by exact certification. Never throws on numerical failure.
    SafetyPlan solve(const MPCProblem &problem, const std::optional<PlanGuess> &warm_start, const SolverConfig &config);

    // ---------------------------------------------------------------- controller

    struct PlanEntry
    {
        bool safe_policy = true;
        FeedbackLaw law;
    };

    struct ControllerState
    {
        std::vector<PlanEntry> plan; ///< always T entries
        int age = 0;                 ///< shifts since the last feasible solve
        Eigen::MatrixXd last_u_perf; ///< performance inputs of the last feasible solve
        std::int64_t steps = 0;
    };

    struct StepResult
    {
        Eigen::VectorXd u;
        bool feasible = false;
        bool safe_policy_applied = false;
        int age = 0;
        SafetyPlan plan;
    };

    /// Receding-horizon controller: adopt feasible plans, otherwise shift and append the backup policy.
    class SafeMpcController
    {
    public:
        SafeMpcController(int T, SafePolicy policy);

        int horizon() const { return T_; }
        const SafePolicy &policy() const { return policy_; }
        ControllerState initial_state() const;

        /// Warm start built from the shifted plan of @p state evaluated along the nominal model.
        PlanGuess warm_start(const ControllerState &state, const MPCProblem &problem) const;

        /// One control step at the current state problem.x_t. @p force_infeasible skips the solver.
        StepResult step(ControllerState &state, const MPCProblem &problem, const SolverConfig &config,
                        bool force_infeasible = false) const;

    private:
        int T_;
        SafePolicy policy_;
    };

} // namespace safempc

#endif // SAFEMPC_SAFE_MPC_HPP_
