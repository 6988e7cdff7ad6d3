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

#ifndef SAFEMPC_PROPAGATION_HPP_
#define SAFEMPC_PROPAGATION_HPP_

#include "safempc/ellipsoid.hpp"
#include "safempc/gp.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace safempc
{
    /// Lipschitz constants entering the remainder terms of the one-step over-approximation.
    struct LipschitzConstants
    {
        Eigen::VectorXd L_grad_h;  ///< per output, gradient of the prior
        double L_g = 0.0;          ///< model error
        Eigen::VectorXd L_grad_mu; ///< per output, gradient of the GP mean
        double L_sigma = 0.0;      ///< GP standard deviation

        static LipschitzConstants zero(Eigen::Index state_dim);
        void validate(Eigen::Index state_dim) const;
    };

    /// u(x) = K (x - anchor) + k.
    struct FeedbackLaw
    {
        Eigen::MatrixXd K;
        Eigen::VectorXd k;
        Eigen::VectorXd anchor;

        FeedbackLaw() = default;
        FeedbackLaw(Eigen::MatrixXd K, Eigen::VectorXd k, Eigen::VectorXd anchor);

        Eigen::VectorXd operator()(const Eigen::VectorXd &x) const;
    };

    /// Known prior model x+ = h(x, u) with its Jacobians.
    class PriorModel
    {
    public:
        using Map = std::function<Eigen::VectorXd(const Eigen::VectorXd &, const Eigen::VectorXd &)>;
        using Jacobian = std::function<void(const Eigen::VectorXd &, const Eigen::VectorXd &, Eigen::MatrixXd &A,
                                            Eigen::MatrixXd &B)>;

        PriorModel(Eigen::Index state_dim, Eigen::Index input_dim, Map h, Jacobian jacobian);

        /// h(x, u) = A x + B u.
        static PriorModel linear(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B);

        Eigen::Index state_dim() const { return p_; }
        Eigen::Index input_dim() const { return q_; }
        bool is_linear() const { return linear_; }

        Eigen::VectorXd operator()(const Eigen::VectorXd &x, const Eigen::VectorXd &u) const;
        void jacobian(const Eigen::VectorXd &x, const Eigen::VectorXd &u, Eigen::MatrixXd &A, Eigen::MatrixXd &B) const;

    private:
        Eigen::Index p_;
        Eigen::Index q_;
        Map h_;
        Jacobian jac_;
        bool linear_ = false;
    };

    enum class PropagationScheme
    {
        LocallyConstant,
        MeanLinearized
    };

    PropagationScheme propagation_scheme_from_string(const std::string &name);
    std::string to_string(PropagationScheme scheme);

    /// Intermediate quantities of one propagation step, exposed for inspection and tests.
    struct OneStepDetail
    {
        Eigen::VectorXd center;        ///< h(z) + mu(z)
        Eigen::MatrixXd affine_shape;  ///< H Q H^T (possibly singular)
        Eigen::VectorXd remainder;     ///< half-widths of the error rectangle
        double distance = 0.0;         ///< l = max_{x in R} ||(x - p, K (x - p))||
        Eigen::VectorXd sigma;         ///< GP std at the linearization point
    };

    /**
     * @brief Ellipsoid containing every possible next state for x in R under law u.
     *
     * Linearizes at z = (p, u(p)) and adds a rectangle bounding the GP confidence interval
     * and the Taylor/Lipschitz remainders, over-approximated by an ellipsoid and merged by
     * an outer Minkowski sum.
     */
    Ellipsoid one_step(const Ellipsoid &R, const FeedbackLaw &law, const PriorModel &prior, const GPPosterior &gp,
                       const LipschitzConstants &L, PropagationScheme scheme, OneStepDetail *detail = nullptr);

    /// R_{t+1} = one_step(R_t, u_t); every law's anchor is reset to the center of R_t.
    std::vector<Ellipsoid> multi_step(const Ellipsoid &R0, std::vector<FeedbackLaw> &laws, const PriorModel &prior,
                                      const GPPosterior &gp, const LipschitzConstants &L, PropagationScheme scheme);

} // namespace safempc

#endif // SAFEMPC_PROPAGATION_HPP_
