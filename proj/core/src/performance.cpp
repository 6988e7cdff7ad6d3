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

#include "safempc/performance.hpp"

#include "safempc/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace safempc
{
    GaussianBelief GaussianBelief::point(const Eigen::VectorXd &x)
    {
        return GaussianBelief{x, Eigen::MatrixXd::Zero(x.size(), x.size())};
    }

    Eigen::MatrixXd clip_psd(const Eigen::MatrixXd &S)
    {
        const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
        if (Eigen::LLT<Eigen::MatrixXd>(sym).info() == Eigen::Success)
        {
            return sym;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
        if (es.info() != Eigen::Success)
        {
            throw InvalidInputError("clip_psd: eigen-decomposition failed");
        }
        if (es.eigenvalues().minCoeff() >= 0.0)
        {
            return sym;
        }
        const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
        return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    }

    GaussianBelief moment_propagate(const GaussianBelief &belief, const Eigen::VectorXd &u, const GPPosterior &gp,
                                    const PriorModel &prior)
    {
        const Eigen::Index p = prior.state_dim();
        const Eigen::Index q = prior.input_dim();
        if (belief.mean.size() != p || belief.cov.rows() != p || belief.cov.cols() != p || u.size() != q)
        {
            throw InvalidInputError("moment_propagate: dimension mismatch");
        }
        Eigen::VectorXd z(p + q);
        z << belief.mean, u;
        const GPFullPrediction pred = gp.predict_with_mean_jacobian(z);
        Eigen::MatrixXd A, B;
        prior.jacobian(belief.mean, u, A, B);
        const Eigen::MatrixXd J = A + pred.jacobians.d_mean.leftCols(p);

        GaussianBelief out;
        out.mean = prior(belief.mean, u) + pred.value.mean;
        Eigen::MatrixXd S = J * belief.cov * J.transpose();
        S.diagonal() += pred.value.std.array().square().matrix();
        out.cov = clip_psd(S);
        if (!out.mean.allFinite() || !out.cov.allFinite())
        {
            throw InvalidInputError("moment_propagate: non-finite belief");
        }
        return out;
    }

    double expected_saturating_cost(const GaussianBelief &belief, const Eigen::VectorXd &x_goal,
                                    const Eigen::MatrixXd &W, Eigen::VectorXd *d_mean, Eigen::MatrixXd *d_cov)
    {
        const Eigen::Index p = belief.mean.size();
        if (x_goal.size() != p || W.rows() != p || W.cols() != p || belief.cov.rows() != p)
        {
            throw InvalidInputError("expected_saturating_cost: dimension mismatch");
        }
        const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(p, p) + belief.cov * W;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
        const double det = lu.determinant();
        if (!(det > 1e-12) || !std::isfinite(det))
        {
            throw InvalidInputError("expected_saturating_cost: I + S W is (nearly) singular");
        }
        Eigen::MatrixXd B = W * lu.inverse();
        B = (0.5 * (B + B.transpose())).eval();
        const Eigen::VectorXd d = belief.mean - x_goal;
        const Eigen::VectorXd b = B * d;
        const double G = std::exp(-0.5 * d.dot(b)) / std::sqrt(det);
        if (d_mean)
        {
            *d_mean = G * b;
        }
        if (d_cov)
        {
            *d_cov = 0.5 * G * (B - b * b.transpose());
        }
        return 1.0 - G;
    }

    std::vector<GaussianBelief> performance_rollout(const GaussianBelief &X0, const Eigen::MatrixXd &inputs,
                                                    const GPPosterior &gp, const PriorModel &prior)
    {
        std::vector<GaussianBelief> beliefs;
        beliefs.reserve(static_cast<std::size_t>(inputs.cols()) + 1);
        beliefs.push_back(X0);
        for (Eigen::Index t = 0; t < inputs.cols(); ++t)
        {
            beliefs.push_back(moment_propagate(beliefs.back(), inputs.col(t), gp, prior));
        }
        return beliefs;
    }

    double performance_cost_gradient(const GaussianBelief &X0, const Eigen::MatrixXd &inputs, const GPPosterior &gp,
                                     const PriorModel &prior, const StageFunction &stage, Eigen::MatrixXd *d_inputs,
                                     Eigen::VectorXd *d_mean0, std::vector<GaussianBelief> *beliefs_out)
    {
        const Eigen::Index p = prior.state_dim();
        const Eigen::Index q = prior.input_dim();
        const Eigen::Index H = inputs.cols();
        if (inputs.rows() != q || X0.mean.size() != p)
        {
            throw InvalidInputError("performance_cost_gradient: dimension mismatch");
        }
        const bool want_grad = d_inputs || d_mean0;
        if (want_grad && !prior.is_linear())
        {
            throw InvalidInputError("performance_cost_gradient: gradients require a linear prior model");
        }

        std::vector<GaussianBelief> beliefs;
        beliefs.reserve(static_cast<std::size_t>(H) + 1);
        beliefs.push_back(X0);
        std::vector<GPFullPrediction> preds;
        std::vector<Eigen::MatrixXd> Js;
        std::vector<Eigen::VectorXd> zs;
        Eigen::MatrixXd A, B;
        for (Eigen::Index t = 0; t < H; ++t)
        {
            const GaussianBelief &X = beliefs.back();
            Eigen::VectorXd z(p + q);
            z << X.mean, inputs.col(t);
            GPFullPrediction pred = want_grad ? gp.predict_full(z) : gp.predict_with_mean_jacobian(z);
            prior.jacobian(X.mean, inputs.col(t), A, B);
            Eigen::MatrixXd J = A + pred.jacobians.d_mean.leftCols(p);
            GaussianBelief next;
            next.mean = prior(X.mean, inputs.col(t)) + pred.value.mean;
            Eigen::MatrixXd S = J * X.cov * J.transpose();
            S.diagonal() += pred.value.std.array().square().matrix();
            next.cov = clip_psd(S);
            if (!next.mean.allFinite() || !next.cov.allFinite())
            {
                throw InvalidInputError("performance_cost_gradient: non-finite belief");
            }
            beliefs.push_back(std::move(next));
            if (want_grad)
            {
                preds.push_back(std::move(pred));
                Js.push_back(std::move(J));
                zs.push_back(std::move(z));
            }
        }

        double total = 0.0;
        std::vector<Eigen::VectorXd> dm(static_cast<std::size_t>(H) + 1);
        std::vector<Eigen::MatrixXd> dS(static_cast<std::size_t>(H) + 1);
        for (Eigen::Index t = 1; t <= H; ++t)
        {
            const auto ti = static_cast<std::size_t>(t);
            total += stage(static_cast<int>(t), beliefs[ti], want_grad ? &dm[ti] : nullptr,
                           want_grad ? &dS[ti] : nullptr);
        }

        if (want_grad)
        {
            Eigen::MatrixXd grad_u = Eigen::MatrixXd::Zero(q, H);
            Eigen::VectorXd m_bar = Eigen::VectorXd::Zero(p);
            Eigen::MatrixXd S_bar = Eigen::MatrixXd::Zero(p, p);
            if (H > 0)
            {
                m_bar = dm[static_cast<std::size_t>(H)];
                S_bar = 0.5 * (dS[static_cast<std::size_t>(H)] + dS[static_cast<std::size_t>(H)].transpose());
            }
            if (H > 0)
            {
                prior.jacobian(X0.mean, inputs.col(0), A, B);
            }
            for (Eigen::Index t = H - 1; t >= 0; --t)
            {
                const auto ti = static_cast<std::size_t>(t);
                const Eigen::MatrixXd &J = Js[ti];
                const Eigen::MatrixXd &S = beliefs[ti].cov;
                const GPFullPrediction &pred = preds[ti];

                Eigen::MatrixXd S_prev = J.transpose() * S_bar * J;
                const Eigen::MatrixXd J_bar = 2.0 * S_bar * J * S;

                Eigen::VectorXd z_bar(p + q);
                z_bar.head(p) = A.transpose() * m_bar;
                z_bar.tail(q) = B.transpose() * m_bar;
                z_bar += pred.jacobians.d_mean.transpose() * m_bar;
                for (Eigen::Index j = 0; j < p; ++j)
                {
                    const double sj = pred.value.std(j);
                    z_bar += (S_bar(j, j) * 2.0 * sj) * pred.jacobians.d_std.row(j).transpose();
                }
                const std::vector<Eigen::MatrixXd> hess = gp.predict_mean_hessians(zs[ti]);
                for (Eigen::Index j = 0; j < p; ++j)
                {
                    z_bar += hess[static_cast<std::size_t>(j)].leftCols(p) * J_bar.row(j).transpose();
                }

                grad_u.col(t) = z_bar.tail(q);
                m_bar = z_bar.head(p);
                if (t >= 1)
                {
                    m_bar += dm[ti];
                    S_prev += dS[ti];
                }
                S_bar = 0.5 * (S_prev + S_prev.transpose());
            }
            if (d_inputs)
            {
                *d_inputs = grad_u;
            }
            if (d_mean0)
            {
                *d_mean0 = m_bar;
            }
        }
        if (beliefs_out)
        {
            *beliefs_out = std::move(beliefs);
        }
        return total;
    }

    // ---------------------------------------------------------------- objectives

    SaturatingCostObjective::SaturatingCostObjective(Eigen::VectorXd x_goal, Eigen::MatrixXd W, double gamma)
        : x_goal_(std::move(x_goal)), W_(std::move(W)), gamma_(gamma)
    {
        if (W_.rows() != x_goal_.size() || W_.cols() != x_goal_.size())
        {
            throw InvalidInputError("SaturatingCostObjective: W must match the goal dimension");
        }
        if (!(gamma_ >= 0.0 && gamma_ < 1.0))
        {
            throw InvalidInputError("SaturatingCostObjective: gamma must lie in [0, 1)");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (W_ + W_.transpose()));
        if (es.eigenvalues().minCoeff() < -1e-12)
        {
            throw InvalidInputError("SaturatingCostObjective: W must be positive semi-definite");
        }
    }

    double SaturatingCostObjective::operator()(int t, const GaussianBelief &belief, Eigen::VectorXd *d_mean,
                                               Eigen::MatrixXd *d_cov) const
    {
        const double w = std::pow(gamma_, t - 1);
        const double c = expected_saturating_cost(belief, x_goal_, W_, d_mean, d_cov);
        if (d_mean)
            *d_mean *= w;
        if (d_cov)
            *d_cov *= w;
        return w * c;
    }

    double SaturatingCostObjective::value(const PlanEvaluation &plan, const GPPosterior &) const
    {
        double total = 0.0;
        for (std::size_t t = 1; t < plan.beliefs.size(); ++t)
        {
            total += (*this)(static_cast<int>(t), plan.beliefs[t], nullptr, nullptr);
        }
        return total;
    }

    CenterDistanceObjective::CenterDistanceObjective(int index, double goal, double weight)
        : index_(index), goal_(goal), weight_(weight)
    {
        if (index_ < 0 || weight_ < 0.0)
        {
            throw InvalidInputError("CenterDistanceObjective: invalid index or weight");
        }
    }

    double CenterDistanceObjective::value(const PlanEvaluation &plan, const GPPosterior &) const
    {
        double total = 0.0;
        for (std::size_t t = 0; t + 1 < plan.ellipsoids.size(); ++t)
        {
            const double e = plan.ellipsoids[t].center()(index_) - goal_;
            total += weight_ * e * e;
        }
        return total;
    }

    double VarianceSumObjective::value(const PlanEvaluation &plan, const GPPosterior &gp) const
    {
        Eigen::VectorXd u0;
        if (plan.k.cols() > 0)
            u0 = plan.k.col(0);
        else if (plan.u_perf.cols() > 0)
            u0 = plan.u_perf.col(0);
        else
            throw InvalidInputError("VarianceSumObjective: plan has no inputs");
        Eigen::VectorXd z(plan.x0.size() + u0.size());
        z << plan.x0, u0;
        return -gp.predict(z).std.sum();
    }

    ConfidenceMinusDeviationObjective::ConfidenceMinusDeviationObjective(Eigen::MatrixXd Q_perf)
        : Q_(std::move(Q_perf))
    {
    }

    double ConfidenceMinusDeviationObjective::value(const PlanEvaluation &plan, const GPPosterior &) const
    {
        double confidence = 0.0;
        for (const auto &X : plan.beliefs)
        {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.cov, Eigen::EigenvaluesOnly);
            confidence += es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
        }
        double deviation = 0.0;
        const std::size_t n = std::min(plan.beliefs.size(), plan.ellipsoids.size());
        for (std::size_t t = 1; t < n; ++t)
        {
            const Eigen::VectorXd e = plan.beliefs[t].mean - plan.ellipsoids[t].center();
            deviation += Q_.size() ? e.dot(Q_ * e) : e.squaredNorm();
        }
        return -(confidence - deviation);
    }

    ObjectivePtr exploration_objective(ExplorationKind kind, const Eigen::MatrixXd &Q_perf)
    {
        switch (kind)
        {
        case ExplorationKind::VarianceSum:
            return std::make_shared<VarianceSumObjective>();
        case ExplorationKind::ConfidenceMinusDeviation:
            return std::make_shared<ConfidenceMinusDeviationObjective>(Q_perf);
        }
        throw InvalidInputError("exploration_objective: unsupported kind");
    }

    MPCProblem assemble_coupled_problem(MPCProblem mpc, int H, int r, ObjectivePtr objective)
    {
        if (H < 0)
        {
            throw InvalidInputError("assemble_coupled_problem: H must be >= 0");
        }
        if (H > 0 && mpc.T > 0 && (r < 1 || r > std::min(mpc.T, H)))
        {
            throw InvalidInputError("assemble_coupled_problem: coupling length must satisfy 1 <= r <= min(T, H)");
        }
        mpc.H = H;
        mpc.r = H > 0 ? r : 0;
        mpc.objective = std::move(objective);
        return mpc;
    }

    // ---------------------------------------------------------------- toy system

    namespace
    {
        void enumerate_sequences(int length, const std::function<void(const std::vector<int> &)> &visit)
        {
            std::vector<int> seq(static_cast<std::size_t>(length), -1);
            while (true)
            {
                visit(seq);
                int i = length - 1;
                while (i >= 0 && seq[static_cast<std::size_t>(i)] == 1)
                {
                    seq[static_cast<std::size_t>(i)] = -1;
                    --i;
                }
                if (i < 0)
                    break;
                ++seq[static_cast<std::size_t>(i)];
            }
        }
    } // namespace

    double ToyPlanner::cost(int x)
    {
        if (x == -1)
            return -2.0;
        if (x == 1)
            return -1.0;
        return 0.0;
    }

    namespace
    {
        double toy_value(int x, const std::vector<int> &seq, double gamma)
        {
            double v = 0.0, w = 1.0;
            for (int u : seq)
            {
                x += u;
                v += w * ToyPlanner::cost(x);
                w *= gamma;
            }
            return v;
        }

        bool toy_safe(int x, const std::vector<int> &seq)
        {
            if (x < 0)
                return false;
            for (int u : seq)
            {
                x += u;
                if (x < 0)
                    return false;
            }
            return true;
        }
    } // namespace

    int ToyPlanner::two_stage_action(int x) const
    {
        std::vector<int> best_perf;
        double best_v = std::numeric_limits<double>::infinity();
        enumerate_sequences(H, [&](const std::vector<int> &s)
                            {
                                const double v = toy_value(x, s, gamma);
                                if (v < best_v)
                                {
                                    best_v = v;
                                    best_perf = s;
                                } });
        const int m = std::min(H, T);
        std::vector<int> best_safe;
        double best_d = std::numeric_limits<double>::infinity();
        enumerate_sequences(T, [&](const std::vector<int> &s)
                            {
                                if (!toy_safe(x, s))
                                    return;
                                double d = 0.0;
                                for (int i = 0; i < m; ++i)
                                {
                                    const double e = s[static_cast<std::size_t>(i)] - best_perf[static_cast<std::size_t>(i)];
                                    d += e * e;
                                }
                                if (d < best_d)
                                {
                                    best_d = d;
                                    best_safe = s;
                                } });
        if (best_safe.empty())
        {
            throw InvalidInputError("ToyPlanner: no safe action sequence");
        }
        return best_safe.front();
    }

    int ToyPlanner::coupled_action(int x) const
    {
        if (r < 1 || r > std::min(T, H))
        {
            throw InvalidInputError("ToyPlanner: coupling length must satisfy 1 <= r <= min(T, H)");
        }
        double best_v = std::numeric_limits<double>::infinity();
        int best_u = 0;
        bool found = false;
        enumerate_sequences(T, [&](const std::vector<int> &s)
                            {
                                if (!toy_safe(x, s))
                                    return;
                                enumerate_sequences(H, [&](const std::vector<int> &perf)
                                                    {
                                                        for (int i = 0; i < r; ++i)
                                                            if (perf[static_cast<std::size_t>(i)] != s[static_cast<std::size_t>(i)])
                                                                return;
                                                        const double v = toy_value(x, perf, gamma);
                                                        if (v < best_v)
                                                        {
                                                            best_v = v;
                                                            best_u = s.front();
                                                            found = true;
                                                        } }); });
        if (!found)
        {
            throw InvalidInputError("ToyPlanner: no safe action sequence");
        }
        return best_u;
    }

    std::vector<int> ToyPlanner::simulate(int x0, int steps, bool coupled) const
    {
        std::vector<int> xs{x0};
        int x = x0;
        for (int i = 0; i < steps; ++i)
        {
            x += coupled ? coupled_action(x) : two_stage_action(x);
            xs.push_back(x);
        }
        return xs;
    }

} // namespace safempc
