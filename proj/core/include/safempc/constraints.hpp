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

#ifndef SAFEMPC_CONSTRAINTS_HPP_
#define SAFEMPC_CONSTRAINTS_HPP_

#include "safempc/ellipsoid.hpp"
#include "safempc/propagation.hpp"

#include <optional>

namespace safempc
{
    /**
     * @brief State polytope X (optional: unbounded state space), control polytope U and
     * terminal safe set X_safe. All rows are stored normalized to unit norm.
     */
    class ConstraintSet
    {
    public:
        /// Throws InvalidInputError unless X_safe is bounded and contained in X.
        ConstraintSet(std::optional<Polytope> X, Polytope U, Polytope X_safe);

        const std::optional<Polytope> &state() const { return X_; }
        const Polytope &control() const { return U_; }
        const Polytope &safe() const { return X_safe_; }
        Eigen::Index state_dim() const { return X_safe_.dim(); }
        Eigen::Index input_dim() const { return U_.dim(); }

    private:
        std::optional<Polytope> X_;
        Polytope U_;
        Polytope X_safe_;
    };

    /// True if every vertex of the bounded polytope @p inner satisfies @p outer up to @p tol.
    bool polytope_subset(const Polytope &inner, const Polytope &outer, double tol = 1e-9);

    /// Residuals of R inside X; empty when X is absent (unconstrained state).
    Eigen::VectorXd state_residuals(const Ellipsoid &R, const std::optional<Polytope> &X);

    /// Residuals of u(R) = E(u(p), K Q K^T) inside U.
    Eigen::VectorXd control_residuals(const Ellipsoid &R, const FeedbackLaw &law, const Polytope &U);

    /// Residuals of R_T inside X_safe.
    Eigen::VectorXd terminal_residuals(const Ellipsoid &R_T, const Polytope &X_safe);

} // namespace safempc

#endif // SAFEMPC_CONSTRAINTS_HPP_
