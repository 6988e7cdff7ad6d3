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

#include "safempc/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace safempc
{
    namespace
    {
        void require_finite(const Eigen::MatrixXd &m, const char *what)
        {
            if (!m.allFinite())
            {
                throw InvalidInputError(std::string(what) + " contains non-finite entries");
            }
        }

        Eigen::MatrixXd symmetrize(const Eigen::MatrixXd &m)
        {
            return 0.5 * (m + m.transpose());
        }
    } // namespace

    // ---------------------------------------------------------------- Ellipsoid

    Ellipsoid::Ellipsoid(Eigen::VectorXd center, Eigen::MatrixXd shape)
        : center_(std::move(center)), shape_(std::move(shape))
    {
        const Eigen::Index n = center_.size();
        if (n < 1 || shape_.rows() != n || shape_.cols() != n)
        {
            throw InvalidInputError("Ellipsoid: shape must be n x n with n = dim(center) >= 1");
        }
        require_finite(center_, "Ellipsoid center");
        require_finite(shape_, "Ellipsoid shape");

        const double scale = std::max(shape_.cwiseAbs().maxCoeff(), 1e-300);
        if ((shape_ - shape_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        {
            throw InvalidInputError("Ellipsoid: shape matrix is not symmetric");
        }
        shape_ = symmetrize(shape_);

        llt_.compute(shape_);
        if (llt_.info() != Eigen::Success)
        {
            throw DegenerateShapeError("Ellipsoid: shape matrix is not positive definite");
        }
        const Eigen::VectorXd diag = llt_.matrixL().toDenseMatrix().diagonal();
        if (!(diag.minCoeff() > 0.0))
        {
            throw DegenerateShapeError("Ellipsoid: Cholesky factor has a non-positive pivot");
        }
    }

    Ellipsoid Ellipsoid::from_symmetrized(Eigen::VectorXd center, const Eigen::MatrixXd &shape)
    {
        require_finite(shape, "Ellipsoid shape");
        return Ellipsoid(std::move(center), symmetrize(shape));
    }

    Ellipsoid Ellipsoid::point(const Eigen::VectorXd &x)
    {
        return Ellipsoid(x, kShapeFloor * Eigen::MatrixXd::Identity(x.size(), x.size()));
    }

    double Ellipsoid::quadratic_form(const Eigen::VectorXd &x) const
    {
        if (x.size() != dim())
        {
            throw InvalidInputError("Ellipsoid::quadratic_form: dimension mismatch");
        }
        const Eigen::VectorXd w = llt_.matrixL().solve(x - center_);
        return w.squaredNorm();
    }

    bool Ellipsoid::contains(const Eigen::VectorXd &x, double tol) const
    {
        return quadratic_form(x) <= 1.0 + tol;
    }

    Eigen::VectorXd Ellipsoid::boundary_point(const Eigen::VectorXd &unit_ball_direction) const
    {
        const double norm = unit_ball_direction.norm();
        if (unit_ball_direction.size() != dim() || !(norm > 0.0))
        {
            throw InvalidInputError("Ellipsoid::boundary_point: invalid direction");
        }
        return center_ + llt_.matrixL() * (unit_ball_direction / norm);
    }

    // ---------------------------------------------------------------- HyperRectangle / Polytope

    HyperRectangle::HyperRectangle(Eigen::VectorXd c, Eigen::VectorXd b)
        : center(std::move(c)), half_widths(std::move(b))
    {
        if (center.size() < 1 || center.size() != half_widths.size())
        {
            throw InvalidInputError("HyperRectangle: center and half-widths must have equal positive size");
        }
        require_finite(center, "HyperRectangle center");
        require_finite(half_widths, "HyperRectangle half-widths");
        if (half_widths.minCoeff() < 0.0)
        {
            throw InvalidInputError("HyperRectangle: negative half-width");
        }
    }

    Polytope::Polytope(Eigen::MatrixXd H, Eigen::VectorXd h) : H_(std::move(H)), h_(std::move(h))
    {
        if (H_.rows() < 1 || H_.cols() < 1 || H_.rows() != h_.size())
        {
            throw InvalidInputError("Polytope: H must be m x n with m = size(h) >= 1");
        }
        require_finite(H_, "Polytope H");
        require_finite(h_, "Polytope h");
        for (Eigen::Index i = 0; i < H_.rows(); ++i)
        {
            if (H_.row(i).norm() == 0.0)
            {
                throw InvalidInputError("Polytope: row " + std::to_string(i) + " of H is zero");
            }
        }
    }

    Polytope Polytope::box(const Eigen::VectorXd &lower, const Eigen::VectorXd &upper)
    {
        const Eigen::Index n = lower.size();
        if (upper.size() != n || n < 1)
        {
            throw InvalidInputError("Polytope::box: dimension mismatch");
        }
        if ((upper - lower).minCoeff() < 0.0)
        {
            throw InvalidInputError("Polytope::box: lower bound exceeds upper bound");
        }
        Eigen::MatrixXd H(2 * n, n);
        H << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd h(2 * n);
        h << upper, -lower;
        return Polytope(H, h);
    }

    Polytope Polytope::normalized() const
    {
        Eigen::MatrixXd H = H_;
        Eigen::VectorXd h = h_;
        for (Eigen::Index i = 0; i < H.rows(); ++i)
        {
            const double norm = H.row(i).norm();
            H.row(i) /= norm;
            h(i) /= norm;
        }
        return Polytope(H, h);
    }

    bool Polytope::contains(const Eigen::VectorXd &x, double tol) const
    {
        return residuals(x).maxCoeff() <= tol;
    }

    Eigen::VectorXd Polytope::residuals(const Eigen::VectorXd &x) const
    {
        if (x.size() != dim())
        {
            throw InvalidInputError("Polytope::residuals: dimension mismatch");
        }
        return H_ * x - h_;
    }

    // ---------------------------------------------------------------- operations

    Ellipsoid affine_transform(const Ellipsoid &ellipsoid, const Eigen::MatrixXd &A, const Eigen::VectorXd &b)
    {
        if (A.cols() != ellipsoid.dim() || A.rows() != b.size() || A.rows() < 1)
        {
            throw InvalidInputError("affine_transform: dimension mismatch");
        }
        require_finite(A, "affine_transform A");
        require_finite(b, "affine_transform b");
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
        if (A.rows() > A.cols() || qr.rank() < A.rows())
        {
            throw DegenerateShapeError("affine_transform: map is rank deficient");
        }
        const Eigen::MatrixXd LA = A * ellipsoid.factor().matrixL().toDenseMatrix();
        return Ellipsoid::from_symmetrized(A * ellipsoid.center() + b, LA * LA.transpose());
    }

    double trace_optimal_minkowski_parameter(const Eigen::MatrixXd &Q1, const Eigen::MatrixXd &Q2)
    {
        const double t1 = Q1.trace();
        const double t2 = Q2.trace();
        if (!(t2 > 0.0))
        {
            throw DegenerateShapeError("minkowski: second operand has zero trace");
        }
        if (t1 < 0.0)
        {
            throw DegenerateShapeError("minkowski: first operand has negative trace");
        }
        return std::sqrt(t1 / t2);
    }

    Eigen::MatrixXd minkowski_shape(const Eigen::MatrixXd &Q1, const Eigen::MatrixXd &Q2, std::optional<double> c)
    {
        if (Q1.rows() != Q2.rows() || Q1.cols() != Q2.cols())
        {
            throw InvalidInputError("minkowski_shape: dimension mismatch");
        }
        require_finite(Q1, "minkowski_shape Q1");
        require_finite(Q2, "minkowski_shape Q2");
        if (!c)
        {
            const double cc = trace_optimal_minkowski_parameter(Q1, Q2);
            if (cc == 0.0)
            {
                return Q2;
            }
            c = cc;
        }
        if (!(*c > 0.0) || !std::isfinite(*c))
        {
            throw InvalidInputError("minkowski_shape: c must be positive and finite");
        }
        return (1.0 + 1.0 / *c) * Q1 + (1.0 + *c) * Q2;
    }

    Ellipsoid minkowski_sum_outer(const Ellipsoid &e1, const Ellipsoid &e2, std::optional<double> c)
    {
        if (e1.dim() != e2.dim())
        {
            throw InvalidInputError("minkowski_sum_outer: dimension mismatch");
        }
        return Ellipsoid::from_symmetrized(e1.center() + e2.center(), minkowski_shape(e1.shape(), e2.shape(), c));
    }

    namespace
    {
        struct TopEigenPair
        {
            double value = 0.0;
            Eigen::VectorXd vector;
        };

        // Power iteration by repeated squaring of a symmetric PSD matrix.
        TopEigenPair top_eigen_pair(const Eigen::MatrixXd &M, int iterations)
        {
            const Eigen::Index n = M.rows();
            TopEigenPair out;
            out.vector = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));

            const double fro = M.norm();
            if (!(fro > 0.0))
            {
                return out;
            }
            Eigen::MatrixXd P = M / fro;
            for (int i = 0; i < iterations; ++i)
            {
                P = P * P;
                P = (0.5 * (P + P.transpose())).eval();
                const double s = P.norm();
                if (!(s > 0.0))
                {
                    break;
                }
                P /= s;
            }
            // P ~ v v^T; project the deterministic start vector and polish with one product.
            Eigen::VectorXd v = P * out.vector;
            if (!(v.norm() > 0.0))
            {
                Eigen::Index col = 0;
                P.colwise().norm().maxCoeff(&col);
                v = P.col(col);
            }
            v = M * (v / v.norm());
            if (!(v.norm() > 0.0))
            {
                return out;
            }
            v.normalize();
            out.vector = v;
            out.value = std::max(0.0, v.dot(M * v));
            return out;
        }

        int effective_iterations(Eigen::Index n, int iterations)
        {
            if (iterations > 0)
            {
                return iterations;
            }
            return std::max(static_cast<int>(n * n), kMinPowerSquarings);
        }

        void check_scaled_distance_inputs(const Eigen::MatrixXd &Q, const Eigen::MatrixXd &S)
        {
            if (Q.rows() != Q.cols() || S.cols() != Q.rows() || Q.rows() < 1)
            {
                throw InvalidInputError("max_scaled_distance: dimension mismatch");
            }
            if (Q.hasNaN() || S.hasNaN() || !Q.allFinite() || !S.allFinite())
            {
                throw InvalidInputError("max_scaled_distance: non-finite input");
            }
        }

        Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd &Q)
        {
            Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (Q + Q.transpose()));
            if (llt.info() != Eigen::Success)
            {
                throw DegenerateShapeError("max_scaled_distance: Q is not positive definite");
            }
            return llt.matrixL();
        }
    } // namespace

    double max_scaled_distance(const Eigen::MatrixXd &Q, const Eigen::MatrixXd &S, int iterations)
    {
        check_scaled_distance_inputs(Q, S);
        const Eigen::MatrixXd L = cholesky_factor(Q);
        const Eigen::MatrixXd SL = S * L;
        const Eigen::MatrixXd M = SL.transpose() * SL;
        return std::sqrt(top_eigen_pair(M, effective_iterations(Q.rows(), iterations)).value);
    }

    ScaledDistanceDerivative max_scaled_distance_with_derivative(const Eigen::MatrixXd &Q, const Eigen::MatrixXd &S,
                                                                 int iterations)
    {
        check_scaled_distance_inputs(Q, S);
        const Eigen::MatrixXd L = cholesky_factor(Q);
        const Eigen::MatrixXd SL = S * L;
        const Eigen::MatrixXd M = SL.transpose() * SL;
        const TopEigenPair top = top_eigen_pair(M, effective_iterations(Q.rows(), iterations));

        ScaledDistanceDerivative out;
        out.value = std::sqrt(top.value);
        out.d_shape = Eigen::MatrixXd::Zero(Q.rows(), Q.cols());
        out.d_scaling = Eigen::MatrixXd::Zero(S.rows(), S.cols());
        if (!(out.value > 0.0))
        {
            return out;
        }
        // v = L y is the maximizer on the boundary of E(0,Q); w = Q^{-1} v.
        const Eigen::VectorXd v = L * top.vector;
        const Eigen::VectorXd w = L.transpose().triangularView<Eigen::Upper>().solve(top.vector);
        const double inv_2r = 0.5 / out.value;
        out.d_shape = inv_2r * top.value * (w * w.transpose());
        out.d_scaling = inv_2r * 2.0 * (S * v) * v.transpose();
        return out;
    }

    Ellipsoid rect_to_ellipsoid(const HyperRectangle &rect)
    {
        const Eigen::Index p = rect.center.size();
        const Eigen::VectorXd b = rect.half_widths.cwiseMax(kShapeFloor);
        const Eigen::VectorXd diag = static_cast<double>(p) * b.cwiseProduct(b);
        return Ellipsoid(rect.center, diag.asDiagonal().toDenseMatrix());
    }

    Eigen::VectorXd ellipsoid_in_polytope_residuals(const Ellipsoid &ellipsoid, const Polytope &polytope)
    {
        if (ellipsoid.dim() != polytope.dim())
        {
            throw InvalidInputError("ellipsoid_in_polytope_residuals: dimension mismatch");
        }
        // sqrt(H_i Q H_i^T) = ||L^T H_i^T||.
        const Eigen::MatrixXd HL = polytope.H() * ellipsoid.factor().matrixL().toDenseMatrix();
        return polytope.H() * ellipsoid.center() + HL.rowwise().norm() - polytope.h();
    }

    std::vector<Eigen::VectorXd> polytope_vertices(const Polytope &polytope, double tol)
    {
        const int m = static_cast<int>(polytope.rows());
        const int n = static_cast<int>(polytope.dim());
        std::vector<Eigen::VectorXd> vertices;
        if (m < n)
        {
            return vertices;
        }
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        Eigen::MatrixXd A(n, n);
        Eigen::VectorXd rhs(n);
        while (true)
        {
            for (int r = 0; r < n; ++r)
            {
                A.row(r) = polytope.H().row(idx[r]);
                rhs(r) = polytope.h()(idx[r]);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
            if (lu.isInvertible())
            {
                const Eigen::VectorXd x = lu.solve(rhs);
                const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
                if (polytope.contains(x, tol * scale))
                {
                    const bool duplicate = std::any_of(vertices.begin(), vertices.end(), [&](const Eigen::VectorXd &v)
                                                       { return (v - x).cwiseAbs().maxCoeff() <= tol * scale; });
                    if (!duplicate)
                    {
                        vertices.push_back(x);
                    }
                }
            }
            // next combination
            int k = n - 1;
            while (k >= 0 && idx[k] == m - n + k)
            {
                --k;
            }
            if (k < 0)
            {
                break;
            }
            ++idx[k];
            for (int j = k + 1; j < n; ++j)
            {
                idx[j] = idx[j - 1] + 1;
            }
        }
        return vertices;
    }

    HyperRectangle bounding_box(const Polytope &polytope)
    {
        const auto vertices = polytope_vertices(polytope);
        if (vertices.empty())
        {
            throw InvalidInputError("bounding_box: polytope has no vertices (empty or unbounded)");
        }
        Eigen::VectorXd lo = vertices.front();
        Eigen::VectorXd hi = vertices.front();
        for (const auto &v : vertices)
        {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        return HyperRectangle(0.5 * (lo + hi), 0.5 * (hi - lo));
    }

} // namespace safempc
