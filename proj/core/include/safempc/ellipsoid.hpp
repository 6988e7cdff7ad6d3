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

#ifndef SAFEMPC_ELLIPSOID_HPP_
#define SAFEMPC_ELLIPSOID_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace safempc
{
    /// Floor applied to zero half-widths / point sets so that shape matrices stay s.p.d.
    inline constexpr double kShapeFloor = 1e-9;

    /**
     * @brief Ellipsoid E(p, Q) = { x | (x - p)^T Q^{-1} (x - p) <= 1 }.
     *
     * The shape matrix is symmetric positive definite; a Cholesky factor is cached on
     * construction and all membership queries go through it.
     */
    class Ellipsoid
    {
    public:
        Ellipsoid(Eigen::VectorXd center, Eigen::MatrixXd shape);

        /// Symmetrizes @p shape before validation. Used for shapes assembled from products.
        static Ellipsoid from_symmetrized(Eigen::VectorXd center, const Eigen::MatrixXd &shape);

        /// Degenerate "point" ellipsoid E(x, kShapeFloor * I).
        static Ellipsoid point(const Eigen::VectorXd &x);

        Eigen::Index dim() const { return center_.size(); }
        const Eigen::VectorXd &center() const { return center_; }
        const Eigen::MatrixXd &shape() const { return shape_; }
        const Eigen::LLT<Eigen::MatrixXd> &factor() const { return llt_; }

        /// (x - p)^T Q^{-1} (x - p), evaluated through the Cholesky factor.
        double quadratic_form(const Eigen::VectorXd &x) const;
        bool contains(const Eigen::VectorXd &x, double tol = 0.0) const;

        /// Point on the boundary in direction @p unit_ball_direction of the whitened space.
        Eigen::VectorXd boundary_point(const Eigen::VectorXd &unit_ball_direction) const;

    private:
        Eigen::VectorXd center_;
        Eigen::MatrixXd shape_;
        Eigen::LLT<Eigen::MatrixXd> llt_;
    };

    /// Axis-aligned box a +- b.
    struct HyperRectangle
    {
        HyperRectangle(Eigen::VectorXd center, Eigen::VectorXd half_widths);

        Eigen::VectorXd center;
        Eigen::VectorXd half_widths;
    };

    /// Intersection of half-spaces { x | H x <= h }.
    class Polytope
    {
    public:
        Polytope(Eigen::MatrixXd H, Eigen::VectorXd h);

        /// Box lower <= x <= upper written as 2n half-spaces.
        static Polytope box(const Eigen::VectorXd &lower, const Eigen::VectorXd &upper);

        Eigen::Index dim() const { return H_.cols(); }
        Eigen::Index rows() const { return H_.rows(); }
        const Eigen::MatrixXd &H() const { return H_; }
        const Eigen::VectorXd &h() const { return h_; }

        /// Copy with every row of (H, h) scaled to unit norm of H_i.
        Polytope normalized() const;

        bool contains(const Eigen::VectorXd &x, double tol = 0.0) const;

        /// H x - h.
        Eigen::VectorXd residuals(const Eigen::VectorXd &x) const;

    private:
        Eigen::MatrixXd H_;
        Eigen::VectorXd h_;
    };

    /// A E + b = E(A p + b, A Q A^T). Exact image; A (r x n, r <= n) must have full row rank.
    Ellipsoid affine_transform(const Ellipsoid &ellipsoid, const Eigen::MatrixXd &A, const Eigen::VectorXd &b);

    /// Trace-minimizing Minkowski parameter c = sqrt(Tr(Q1) / Tr(Q2)).
    double trace_optimal_minkowski_parameter(const Eigen::MatrixXd &Q1, const Eigen::MatrixXd &Q2);

    /**
     * @brief Shape (1 + 1/c) Q1 + (1 + c) Q2 of an outer ellipsoid of the Minkowski sum.
     *
     * Q1 may be positive semi-definite (e.g. the image under a singular map). When
     * Tr(Q1) == 0 and c is omitted the limit c -> 0 is taken and Q2 is returned.
     */
    Eigen::MatrixXd minkowski_shape(const Eigen::MatrixXd &Q1, const Eigen::MatrixXd &Q2,
                                   std::optional<double> c = std::nullopt);

    /// Outer ellipsoid of E1 (+) E2; c defaults to the trace-optimal value.
    Ellipsoid minkowski_sum_outer(const Ellipsoid &e1, const Ellipsoid &e2, std::optional<double> c = std::nullopt);

    /**
     * @brief max_{x in E(0,Q)} ||S x||_2.
     *
     * Square root of the largest generalized eigenvalue of (S^T S, Q^{-1}), computed by
     * power iteration on the whitened matrix L^T S^T S L (Q = L L^T). Every iteration
     * squares the current iterate, so @p iterations steps apply the operator 2^iterations
     * times. The start is deterministic and the iteration count fixed; a non-positive
     * @p iterations selects the default max(n^2, kMinPowerSquarings).
     */
    double max_scaled_distance(const Eigen::MatrixXd &Q, const Eigen::MatrixXd &S, int iterations = 0);

    inline constexpr int kMinPowerSquarings = 32;

    /// Value of max_scaled_distance together with d r / d Q and d r / d S from the converged eigen-pair.
    struct ScaledDistanceDerivative
    {
        double value = 0.0;
        Eigen::MatrixXd d_shape;
        Eigen::MatrixXd d_scaling;
    };
    ScaledDistanceDerivative max_scaled_distance_with_derivative(const Eigen::MatrixXd &Q, const Eigen::MatrixXd &S,
                                                             int iterations = 0);

    /// a +- b  subset of  E(a, p * diag(b)^2); zero half-widths are raised to kShapeFloor.
    Ellipsoid rect_to_ellipsoid(const HyperRectangle &rect);

    /// Component i: H_i p + sqrt(H_i Q H_i^T) - h_i.  E is inside P iff all are <= 0.
    Eigen::VectorXd ellipsoid_in_polytope_residuals(const Ellipsoid &ellipsoid, const Polytope &polytope);

    /// Vertices of a bounded polytope by enumeration of n-row active sets (small n only).
    std::vector<Eigen::VectorXd> polytope_vertices(const Polytope &polytope, double tol = 1e-9);

    /// Tight axis-aligned bounding box of a bounded polytope.
    HyperRectangle bounding_box(const Polytope &polytope);

} // namespace safempc

#endif // SAFEMPC_ELLIPSOID_HPP_
