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

namespace safempc
{
    ConstraintSet::ConstraintSet(std::optional<Polytope> X, Polytope U, Polytope X_safe)
        : U_(U.normalized()), X_safe_(X_safe.normalized())
    {
        if (X)
        {
            X_ = X->normalized();
            if (X_->dim() != X_safe_.dim())
            {
                throw InvalidInputError("ConstraintSet: X and X_safe have different dimensions");
            }
        }
        if (polytope_vertices(X_safe_).empty())
        {
            throw InvalidInputError("ConstraintSet: X_safe must be a bounded, non-empty polytope");
        }
        if (X_ && !polytope_subset(X_safe_, *X_))
        {
            throw InvalidInputError("ConstraintSet: X_safe is not contained in X");
        }
    }

    bool polytope_subset(const Polytope &inner, const Polytope &outer, double tol)
    {
        if (inner.dim() != outer.dim())
        {
            throw InvalidInputError("polytope_subset: dimension mismatch");
        }
        const auto vertices = polytope_vertices(inner);
        if (vertices.empty())
        {
            return false;
        }
        for (const auto &v : vertices)
        {
            if (!outer.contains(v, tol))
            {
                return false;
            }
        }
        return true;
    }

    Eigen::VectorXd state_residuals(const Ellipsoid &R, const std::optional<Polytope> &X)
    {
        if (!X)
        {
            return Eigen::VectorXd(0);
        }
        return ellipsoid_in_polytope_residuals(R, *X);
    }

    Eigen::VectorXd control_residuals(const Ellipsoid &R, const FeedbackLaw &law, const Polytope &U)
    {
        if (law.K.cols() != R.dim() || law.K.rows() != U.dim())
        {
            throw InvalidInputError("control_residuals: dimension mismatch");
        }
        const Eigen::MatrixXd HKL = U.H() * law.K * R.factor().matrixL().toDenseMatrix();
        return U.H() * law(R.center()) + HKL.rowwise().norm() - U.h();
    }

    Eigen::VectorXd terminal_residuals(const Ellipsoid &R_T, const Polytope &X_safe)
    {
        return ellipsoid_in_polytope_residuals(R_T, X_safe);
    }

} // namespace safempc
