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

#ifndef SAFEMPC_OPTIMIZER_HPP_
#define SAFEMPC_OPTIMIZER_HPP_

#include <Eigen/Dense>

#include <functional>

namespace safempc
{
    struct PenaltyConfig
    {
        int max_iters = 100;         ///< BFGS iterations per penalty stage
        double penalty_init = 1e2;   ///< initial rho
        double penalty_growth = 10.0;
        int penalty_stages = 5;
        double margin = 1e-4;        ///< constraints are tightened to g + margin <= 0 inside the penalty
        double grad_tol = 1e-8;      ///< infinity norm of the merit gradient
        double step_tol = 1e-10;
        double fd_step = 1e-6;
    };

    /**
     * @brief Smooth objective f(v) subject to g(v) <= 0, minimized through the quadratic penalty
     * merit phi(v) = f(v) + rho * sum_i max(0, g_i(v) + margin)^2.
     */
    class PenaltyFunction
    {
    public:
        virtual ~PenaltyFunction() = default;
        virtual Eigen::Index dim() const = 0;
        /// Throws or returns non-finite values for invalid v.
        virtual void evaluate(const Eigen::VectorXd &v, double &f, Eigen::VectorXd &g) const = 0;
        /// Merit value; the gradient defaults to forward differences of the merit.
        virtual double merit(const Eigen::VectorXd &v, double rho, double margin, double fd_step,
                             Eigen::VectorXd *grad) const;
    };

    /// Merit value from already evaluated (f, g); +inf if anything is non-finite.
    double penalty_merit(double f, const Eigen::VectorXd &g, double rho, double margin);

    struct OptimizeResult
    {
        Eigen::VectorXd x;
        double f = 0.0;
        Eigen::VectorXd g;
        double max_violation = 0.0; ///< max_i g_i (without margin); -inf for no constraints
        int iterations = 0;
        double final_rho = 0.0;
        bool valid = false;         ///< false if the start or the result could not be evaluated
    };

    using MeritFunction = std::function<double(const Eigen::VectorXd &, Eigen::VectorXd *)>;

    struct BfgsResult
    {
        Eigen::VectorXd x;
        double value = 0.0;
        int iterations = 0;
        bool valid = false;
    };

    /// BFGS with Armijo backtracking. Non-finite trial values are rejected by the line search.
    BfgsResult bfgs_minimize(const MeritFunction &fg, const Eigen::VectorXd &x0, int max_iters, double grad_tol,
                             double step_tol);

    /// Penalty continuation: BFGS on phi_rho, rho *= growth until max g <= 0 or stages run out.
    OptimizeResult minimize_penalty(const PenaltyFunction &problem, const Eigen::VectorXd &x0,
                                    const PenaltyConfig &config);

} // namespace safempc

#endif // SAFEMPC_OPTIMIZER_HPP_
