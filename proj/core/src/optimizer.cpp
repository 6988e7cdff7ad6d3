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

#include "safempc/optimizer.hpp"

#include <cmath>
#include <limits>

namespace safempc
{
    namespace
    {
        constexpr double kInf = std::numeric_limits<double>::infinity();

        bool try_evaluate(const PenaltyFunction &problem, const Eigen::VectorXd &v, double &f, Eigen::VectorXd &g)
        {
            try
            {
                problem.evaluate(v, f, g);
            }
            catch (const std::exception &)
            {
                return false;
            }
            return std::isfinite(f) && g.allFinite();
        }
    } // namespace

    double penalty_merit(double f, const Eigen::VectorXd &g, double rho, double margin)
    {
        if (!std::isfinite(f) || !g.allFinite())
        {
            return kInf;
        }
        const double viol = (g.array() + margin).max(0.0).square().sum();
        return f + rho * viol;
    }

    double PenaltyFunction::merit(const Eigen::VectorXd &v, double rho, double margin, double fd_step,
                                  Eigen::VectorXd *grad) const
    {
        double f = 0.0;
        Eigen::VectorXd g;
        if (!try_evaluate(*this, v, f, g))
        {
            return kInf;
        }
        const double phi = penalty_merit(f, g, rho, margin);
        if (grad)
        {
            grad->resize(v.size());
            Eigen::VectorXd w = v;
            for (Eigen::Index i = 0; i < v.size(); ++i)
            {
                const double h = fd_step * std::max(1.0, std::abs(v(i)));
                w(i) = v(i) + h;
                double fi = 0.0;
                Eigen::VectorXd gi;
                const double phi_i = try_evaluate(*this, w, fi, gi) ? penalty_merit(fi, gi, rho, margin) : kInf;
                (*grad)(i) = (phi_i - phi) / h;
                w(i) = v(i);
            }
        }
        return phi;
    }

    BfgsResult bfgs_minimize(const MeritFunction &fg, const Eigen::VectorXd &x0, int max_iters, double grad_tol,
                             double step_tol)
    {
        const Eigen::Index n = x0.size();
        BfgsResult out;
        out.x = x0;
        Eigen::VectorXd grad(n);
        out.value = fg(x0, &grad);
        if (!std::isfinite(out.value) || !grad.allFinite())
        {
            return out;
        }
        out.valid = true;

        Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
        bool scaled = false;
        Eigen::VectorXd grad_new(n);
        for (int it = 0; it < max_iters; ++it)
        {
            out.iterations = it + 1;
            if (grad.lpNorm<Eigen::Infinity>() <= grad_tol)
            {
                break;
            }
            Eigen::VectorXd dir = -Hinv * grad;
            double slope = grad.dot(dir);
            if (!(slope < 0.0))
            {
                Hinv.setIdentity();
                dir = -grad;
                slope = -grad.squaredNorm();
            }

            constexpr double c1 = 1e-4;
            double alpha = 1.0;
            double trial = kInf;
            Eigen::VectorXd x_new;
            bool accepted = false;
            for (int ls = 0; ls < 40; ++ls)
            {
                x_new = out.x + alpha * dir;
                trial = fg(x_new, nullptr);
                if (std::isfinite(trial) && trial <= out.value + c1 * alpha * slope)
                {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted)
            {
                if (Hinv.isIdentity())
                {
                    break;
                }
                Hinv.setIdentity();
                scaled = false;
                continue;
            }
            const double value_new = fg(x_new, &grad_new);
            if (!std::isfinite(value_new) || !grad_new.allFinite())
            {
                break;
            }
            const Eigen::VectorXd s = x_new - out.x;
            const Eigen::VectorXd y = grad_new - grad;
            const double decrease = out.value - value_new;
            out.x = x_new;
            out.value = value_new;
            grad = grad_new;

            const double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm())
            {
                if (!scaled)
                {
                    Hinv = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
                    scaled = true;
                }
                const double rho = 1.0 / sy;
                const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
                Hinv = V * Hinv * V.transpose() + rho * s * s.transpose();
            }
            if (s.lpNorm<Eigen::Infinity>() <= step_tol * (1.0 + out.x.lpNorm<Eigen::Infinity>()) ||
                decrease <= 1e-14 * (1.0 + std::abs(out.value)))
            {
                break;
            }
        }
        return out;
    }

    OptimizeResult minimize_penalty(const PenaltyFunction &problem, const Eigen::VectorXd &x0,
                                    const PenaltyConfig &config)
    {
        OptimizeResult out;
        out.x = x0;
        double rho = config.penalty_init;
        for (int stage = 0; stage < std::max(1, config.penalty_stages); ++stage)
        {
            const MeritFunction fg = [&](const Eigen::VectorXd &v, Eigen::VectorXd *grad)
            { return problem.merit(v, rho, config.margin, config.fd_step, grad); };
            const BfgsResult res = bfgs_minimize(fg, out.x, config.max_iters, config.grad_tol, config.step_tol);
            out.iterations += res.iterations;
            out.final_rho = rho;
            if (!res.valid)
            {
                break;
            }
            out.x = res.x;
            if (!try_evaluate(problem, out.x, out.f, out.g))
            {
                out.valid = false;
                return out;
            }
            out.valid = true;
            out.max_violation = out.g.size() ? out.g.maxCoeff() : -kInf;
            if (out.max_violation <= 0.0)
            {
                break;
            }
            rho *= config.penalty_growth;
        }
        if (!out.valid)
        {
            out.valid = try_evaluate(problem, out.x, out.f, out.g);
            out.max_violation = out.valid && out.g.size() ? out.g.maxCoeff() : (out.valid ? -kInf : kInf);
        }
        return out;
    }

} // namespace safempc
