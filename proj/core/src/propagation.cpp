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

#include "safempc/propagation.hpp"

#include "safempc/errors.hpp"

namespace safempc
{
    LipschitzConstants LipschitzConstants::zero(Eigen::Index state_dim)
    {
        LipschitzConstants L;
        L.L_grad_h = Eigen::VectorXd::Zero(state_dim);
        L.L_grad_mu = Eigen::VectorXd::Zero(state_dim);
        return L;
    }

    void LipschitzConstants::validate(Eigen::Index state_dim) const
    {
        if (L_grad_h.size() != state_dim || L_grad_mu.size() != state_dim)
        {
            throw InvalidInputError("LipschitzConstants: per-output vectors must have state dimension");
        }
        if (!L_grad_h.allFinite() || !L_grad_mu.allFinite() || !std::isfinite(L_g) || !std::isfinite(L_sigma))
        {
            throw InvalidInputError("LipschitzConstants: non-finite constant");
        }
        if (L_grad_h.minCoeff() < 0.0 || L_grad_mu.minCoeff() < 0.0 || L_g < 0.0 || L_sigma < 0.0)
        {
            throw InvalidInputError("LipschitzConstants: constants must be nonnegative");
        }
    }

    FeedbackLaw::FeedbackLaw(Eigen::MatrixXd K_, Eigen::VectorXd k_, Eigen::VectorXd anchor_)
        : K(std::move(K_)), k(std::move(k_)), anchor(std::move(anchor_))
    {
        if (K.rows() != k.size() || K.cols() != anchor.size())
        {
            throw InvalidInputError("FeedbackLaw: K must be q x p with q = size(k), p = size(anchor)");
        }
    }

    Eigen::VectorXd FeedbackLaw::operator()(const Eigen::VectorXd &x) const
    {
        return K * (x - anchor) + k;
    }

    PriorModel::PriorModel(Eigen::Index state_dim, Eigen::Index input_dim, Map h, Jacobian jacobian)
        : p_(state_dim), q_(input_dim), h_(std::move(h)), jac_(std::move(jacobian))
    {
        if (p_ < 1 || q_ < 1 || !h_ || !jac_)
        {
            throw InvalidInputError("PriorModel: invalid dimensions or missing callables");
        }
    }

    PriorModel PriorModel::linear(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B)
    {
        if (A.rows() != A.cols() || B.rows() != A.rows())
        {
            throw InvalidInputError("PriorModel::linear: A must be p x p and B p x q");
        }
        PriorModel model(
            A.rows(), B.cols(), [A, B](const Eigen::VectorXd &x, const Eigen::VectorXd &u) -> Eigen::VectorXd
            { return A * x + B * u; },
            [A, B](const Eigen::VectorXd &, const Eigen::VectorXd &, Eigen::MatrixXd &Ao, Eigen::MatrixXd &Bo)
            {
                Ao = A;
                Bo = B;
            });
        model.linear_ = true;
        return model;
    }

    Eigen::VectorXd PriorModel::operator()(const Eigen::VectorXd &x, const Eigen::VectorXd &u) const
    {
        if (x.size() != p_ || u.size() != q_)
        {
            throw InvalidInputError("PriorModel: dimension mismatch");
        }
        return h_(x, u);
    }

    void PriorModel::jacobian(const Eigen::VectorXd &x, const Eigen::VectorXd &u, Eigen::MatrixXd &A,
                              Eigen::MatrixXd &B) const
    {
        if (x.size() != p_ || u.size() != q_)
        {
            throw InvalidInputError("PriorModel: dimension mismatch");
        }
        jac_(x, u, A, B);
    }

    PropagationScheme propagation_scheme_from_string(const std::string &name)
    {
        if (name == "locally_constant")
            return PropagationScheme::LocallyConstant;
        if (name == "mean_linearized")
            return PropagationScheme::MeanLinearized;
        throw InvalidInputError("unknown propagation scheme '" + name + "'");
    }

    std::string to_string(PropagationScheme scheme)
    {
        return scheme == PropagationScheme::LocallyConstant ? "locally_constant" : "mean_linearized";
    }

    Ellipsoid one_step(const Ellipsoid &R, const FeedbackLaw &law, const PriorModel &prior, const GPPosterior &gp,
                       const LipschitzConstants &L, PropagationScheme scheme, OneStepDetail *detail)
    {
        const Eigen::Index p = prior.state_dim();
        const Eigen::Index q = prior.input_dim();
        if (R.dim() != p || law.K.rows() != q || law.K.cols() != p || gp.input_dim() != p + q ||
            gp.output_dim() != p)
        {
            throw InvalidInputError("one_step: dimension mismatch");
        }
        L.validate(p);

        const Eigen::VectorXd &x_bar = R.center();
        const Eigen::VectorXd u_bar = law(x_bar);
        Eigen::VectorXd z_bar(p + q);
        z_bar << x_bar, u_bar;

        const bool linearized = scheme == PropagationScheme::MeanLinearized;
        const GPFullPrediction pred = linearized ? gp.predict_with_mean_jacobian(z_bar)
                                                 : GPFullPrediction{gp.predict(z_bar), {}};
        const Eigen::VectorXd h_bar = prior(x_bar, u_bar);
        if (!pred.value.mean.allFinite() || !pred.value.std.allFinite() || !h_bar.allFinite())
        {
            throw InvalidInputError("one_step: non-finite model output");
        }

        Eigen::MatrixXd A, B;
        prior.jacobian(x_bar, u_bar, A, B);
        if (linearized)
        {
            A += pred.jacobians.d_mean.leftCols(p);
            B += pred.jacobians.d_mean.rightCols(q);
        }
        const Eigen::MatrixXd H = A + B * law.K;
        const Eigen::MatrixXd HL = H * R.factor().matrixL().toDenseMatrix();
        const Eigen::MatrixXd affine_shape = HL * HL.transpose();

        Eigen::MatrixXd S(p + q, p);
        S << Eigen::MatrixXd::Identity(p, p), law.K;
        const double l = max_scaled_distance(R.shape(), S);

        const double beta = gp.beta();
        Eigen::VectorXd remainder;
        if (linearized)
        {
            remainder = (beta * (pred.value.std.array() + L.L_sigma * l) +
                         (L.L_grad_h + L.L_grad_mu).array() * (0.5 * l * l))
                            .matrix();
        }
        else
        {
            remainder = (beta * pred.value.std.array() + L.L_grad_h.array() * (0.5 * l * l) + L.L_g * l).matrix();
        }

        const Eigen::VectorXd center = h_bar + pred.value.mean;
        const Ellipsoid rect = rect_to_ellipsoid(HyperRectangle(Eigen::VectorXd::Zero(p), remainder));
        const Eigen::MatrixXd shape = minkowski_shape(affine_shape, rect.shape());

        if (detail)
        {
            detail->center = center;
            detail->affine_shape = affine_shape;
            detail->remainder = remainder;
            detail->distance = l;
            detail->sigma = pred.value.std;
        }
        return Ellipsoid::from_symmetrized(center, shape);
    }

    std::vector<Ellipsoid> multi_step(const Ellipsoid &R0, std::vector<FeedbackLaw> &laws, const PriorModel &prior,
                                      const GPPosterior &gp, const LipschitzConstants &L, PropagationScheme scheme)
    {
        if (laws.empty())
        {
            throw InvalidInputError("multi_step: at least one control law required");
        }
        std::vector<Ellipsoid> out;
        out.reserve(laws.size());
        const Ellipsoid *current = &R0;
        for (auto &law : laws)
        {
            law.anchor = current->center();
            out.push_back(one_step(*current, law, prior, gp, L, scheme));
            current = &out.back();
        }
        return out;
    }

} // namespace safempc
