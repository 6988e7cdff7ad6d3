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

#include "safempc/environments.hpp"

#include "safempc/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace safempc
{
    Eigen::VectorXd rk4_step(const ContinuousDynamics &F, const Eigen::VectorXd &x, const Eigen::VectorXd &u,
                             double dt, int substeps)
    {
        if (substeps < 1)
            throw InvalidInputError("rk4_step: substeps must be >= 1");
        const double h = dt / substeps;
        Eigen::VectorXd s = x;
        for (int i = 0; i < substeps; ++i)
        {
            const Eigen::VectorXd k1 = F(s, u);
            const Eigen::VectorXd k2 = F(s + 0.5 * h * k1, u);
            const Eigen::VectorXd k3 = F(s + 0.5 * h * k2, u);
            const Eigen::VectorXd k4 = F(s + h * k3, u);
            s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        return s;
    }

    // ---------------------------------------------------------------- pendulum

    void PendulumParams::validate() const
    {
        if (!(m > 0 && l > 0 && eta >= 0 && g > 0 && u_max > 0))
            throw ConfigError("PendulumParams: parameters must be positive");
    }

    namespace
    {
        template <typename Vec, typename F>
        Vec rk4_fixed(const F &deriv, const Vec &x, double dt, int substeps)
        {
            const double h = dt / substeps;
            Vec s = x;
            for (int i = 0; i < substeps; ++i)
            {
                const Vec k1 = deriv(s);
                const Vec k2 = deriv((s + 0.5 * h * k1).eval());
                const Vec k3 = deriv((s + 0.5 * h * k2).eval());
                const Vec k4 = deriv((s + h * k3).eval());
                s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            return s;
        }

        Eigen::Vector2d pendulum_rhs(const PendulumParams &P, const Eigen::Vector2d &x, double u)
        {
            return {x(1), (P.g * P.m * P.l * std::sin(x(0)) - P.eta * x(1) + u) / (P.m * P.l * P.l)};
        }

        Eigen::Vector4d cartpole_rhs(const CartPoleParams &P, const Eigen::Vector4d &x, double u)
        {
            const double xd = x(1), th = x(2), thd = x(3);
            const double c = std::cos(th), s = std::sin(th);
            // [M+m, -ml c; -m c, ml] [xdd; thdd] = [u - eta xd - ml thd^2 s; m g s]
            const double a11 = P.M + P.m, a12 = -P.m * P.l * c, a21 = -P.m * c, a22 = P.m * P.l;
            const double b1 = u - P.eta * xd - P.m * P.l * thd * thd * s, b2 = P.m * P.g * s;
            const double det = a11 * a22 - a12 * a21;
            if (std::abs(det) < 1e-12)
                throw InvalidInputError("CartPoleParams: singular mass matrix");
            return {xd, (a22 * b1 - a12 * b2) / det, thd, (a11 * b2 - a21 * b1) / det};
        }
    } // namespace

    Eigen::VectorXd PendulumParams::derivative(const Eigen::VectorXd &x, const Eigen::VectorXd &u) const
    {
        return pendulum_rhs(*this, x, u(0));
    }

    Eigen::VectorXd pendulum_step(const Eigen::VectorXd &x, const Eigen::VectorXd &u, const PendulumParams &params,
                                  double dt, int substeps)
    {
        if (substeps < 1 || x.size() != 2 || u.size() != 1)
            throw InvalidInputError("pendulum_step: expects a 2-state, 1-input system and substeps >= 1");
        const double uc = std::clamp(u(0), -params.u_max, params.u_max);
        const Eigen::Vector2d x0 = x;
        return rk4_fixed([&](const Eigen::Vector2d &s) { return pendulum_rhs(params, s, uc); }, x0, dt, substeps);
    }

    // ---------------------------------------------------------------- cart-pole

    void CartPoleParams::validate() const
    {
        if (!(M > 0 && m > 0 && l > 0 && eta >= 0 && g > 0 && u_max > 0 && theta_max > 0))
            throw ConfigError("CartPoleParams: parameters must be positive");
        if (!(x_min < x_max) || x_start < x_min || x_start > x_max)
            throw ConfigError("CartPoleParams: rail bounds must be ordered and contain the start");
    }

    Eigen::VectorXd CartPoleParams::derivative(const Eigen::VectorXd &x, const Eigen::VectorXd &u) const
    {
        return cartpole_rhs(*this, x, u(0));
    }

    Eigen::VectorXd cartpole_step(const Eigen::VectorXd &x, const Eigen::VectorXd &u, const CartPoleParams &params,
                                  double dt, int substeps)
    {
        if (substeps < 1 || x.size() != 4 || u.size() != 1)
            throw InvalidInputError("cartpole_step: expects a 4-state, 1-input system and substeps >= 1");
        const double uc = std::clamp(u(0), -params.u_max, params.u_max);
        const Eigen::Vector4d x0 = x;
        return rk4_fixed([&](const Eigen::Vector4d &s) { return cartpole_rhs(params, s, uc); }, x0, dt, substeps);
    }

    // ---------------------------------------------------------------- linearization and LQR

    LinearModel continuous_jacobians(const ContinuousDynamics &F, const Eigen::VectorXd &x, const Eigen::VectorXd &u,
                                     double step)
    {
        const Eigen::Index p = x.size(), q = u.size();
        LinearModel lin{Eigen::MatrixXd(p, p), Eigen::MatrixXd(p, q)};
        for (Eigen::Index i = 0; i < p; ++i)
        {
            Eigen::VectorXd xp = x, xm = x;
            xp(i) += step;
            xm(i) -= step;
            lin.A.col(i) = (F(xp, u) - F(xm, u)) / (2.0 * step);
        }
        for (Eigen::Index i = 0; i < q; ++i)
        {
            Eigen::VectorXd up = u, um = u;
            up(i) += step;
            um(i) -= step;
            lin.B.col(i) = (F(x, up) - F(x, um)) / (2.0 * step);
        }
        return lin;
    }

    LinearModel zoh_discretize(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B, double dt)
    {
        const Eigen::Index p = A.rows(), q = B.cols();
        Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(p + q, p + q);
        aug.topLeftCorner(p, p) = A * dt;
        aug.topRightCorner(p, q) = B * dt;
        const Eigen::MatrixXd E = aug.exp();
        return {E.topLeftCorner(p, p), E.topRightCorner(p, q)};
    }

    LinearModel linearize_discretize(const ContinuousDynamics &F, const Eigen::VectorXd &x_eq,
                                     const Eigen::VectorXd &u_eq, double dt)
    {
        const LinearModel c = continuous_jacobians(F, x_eq, u_eq);
        return zoh_discretize(c.A, c.B, dt);
    }

    double riccati_residual(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B, const Eigen::MatrixXd &Q,
                            const Eigen::MatrixXd &R, const Eigen::MatrixXd &P)
    {
        const Eigen::MatrixXd BtPA = B.transpose() * P * A;
        const Eigen::MatrixXd G = R + B.transpose() * P * B;
        const Eigen::MatrixXd res = A.transpose() * P * A - P - BtPA.transpose() * G.ldlt().solve(BtPA) + Q;
        return res.cwiseAbs().maxCoeff();
    }

    LqrResult lqr_synthesize(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B, const Eigen::MatrixXd &Q,
                             const Eigen::MatrixXd &R, int max_iters, double tol)
    {
        const Eigen::Index p = A.rows();
        if (A.cols() != p || B.rows() != p || Q.rows() != p || Q.cols() != p || R.rows() != B.cols() ||
            R.cols() != B.cols())
            throw InvalidInputError("lqr_synthesize: dimension mismatch");
        LqrResult out;
        Eigen::MatrixXd P = Q;
        for (int it = 1; it <= max_iters; ++it)
        {
            const Eigen::MatrixXd BtPA = B.transpose() * P * A;
            const Eigen::MatrixXd G = R + B.transpose() * P * B;
            Eigen::MatrixXd next = Q + A.transpose() * P * A - BtPA.transpose() * G.ldlt().solve(BtPA);
            next = 0.5 * (next + next.transpose()).eval();
            const double change = (next - P).cwiseAbs().maxCoeff();
            P = next;
            out.iterations = it;
            if (change <= 0.1 * tol && riccati_residual(A, B, Q, R, P) <= tol)
                break;
        }
        out.P = P;
        out.residual = riccati_residual(A, B, Q, R, P);
        if (!(out.residual <= tol))
            throw ConvergenceError("lqr_synthesize: Riccati iteration did not converge");
        out.K = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
        out.spectral_radius = (A - B * out.K).eigenvalues().cwiseAbs().maxCoeff();
        return out;
    }

    // ---------------------------------------------------------------- safe set

    Polytope whitened_unit_polytope(Eigen::Index dim)
    {
        if (dim < 1)
            throw InvalidInputError("whitened_unit_polytope: dimension must be >= 1");
        std::vector<Eigen::VectorXd> dirs;
        for (Eigen::Index i = 0; i < dim; ++i)
            for (double s : {1.0, -1.0})
            {
                Eigen::VectorXd d = Eigen::VectorXd::Zero(dim);
                d(i) = s;
                dirs.push_back(d);
            }
        for (Eigen::Index i = 0; i < dim; ++i)
            for (Eigen::Index j = i + 1; j < dim; ++j)
                for (double si : {1.0, -1.0})
                    for (double sj : {1.0, -1.0})
                    {
                        Eigen::VectorXd d = Eigen::VectorXd::Zero(dim);
                        d(i) = si;
                        d(j) = sj;
                        dirs.push_back(d.normalized());
                    }
        if (dim >= 3 && dim <= 5)
        {
            for (long mask = 0; mask < (1L << dim); ++mask)
            {
                Eigen::VectorXd d(dim);
                for (Eigen::Index i = 0; i < dim; ++i)
                    d(i) = (mask >> i) & 1 ? -1.0 : 1.0;
                dirs.push_back(d.normalized());
            }
        }
        Eigen::MatrixXd H(static_cast<Eigen::Index>(dirs.size()), dim);
        for (std::size_t i = 0; i < dirs.size(); ++i)
            H.row(static_cast<Eigen::Index>(i)) = dirs[i].transpose();
        const Polytope circumscribed(H, Eigen::VectorXd::Ones(H.rows()));
        double radius = 0.0;
        for (const auto &v : polytope_vertices(circumscribed))
            radius = std::max(radius, v.norm());
        if (!(radius > 0.0))
            throw DegenerateShapeError("whitened_unit_polytope: vertex enumeration failed");
        return Polytope(H, Eigen::VectorXd::Constant(H.rows(), 1.0 / radius));
    }

    namespace
    {
        struct LevelTest
        {
            const Eigen::MatrixXd &K;
            const Eigen::MatrixXd &S;
            const Eigen::MatrixXd &Sinv;
            const Eigen::MatrixXd &Linv_t;
            const DiscreteDynamics &true_step;
            const std::optional<Polytope> &X;
            const Eigen::VectorXd &u_lo;
            const Eigen::VectorXd &u_hi;
            const std::vector<Eigen::VectorXd> &unit_points;
            const SafeSetOptions &options;

            bool operator()(double c) const
            {
                const Eigen::Index p = S.rows();
                if (X)
                {
                    const Ellipsoid E(Eigen::VectorXd::Zero(p), c * Sinv);
                    if (ellipsoid_in_polytope_residuals(E, *X).maxCoeff() > 0.0)
                        return false;
                }
                // the unsaturated backup input must respect the input box on the whole level set
                const Eigen::MatrixXd KSK = K * Sinv * K.transpose();
                for (Eigen::Index i = 0; i < K.rows(); ++i)
                    if (std::sqrt(c * KSK(i, i)) > std::min(u_hi(i), -u_lo(i)))
                        return false;
                const double sc = std::sqrt(c);
                for (const auto &y : unit_points)
                {
                    Eigen::VectorXd x = sc * (Linv_t * y);
                    const double v0 = x.dot(S * x);
                    for (int t = 0; t < options.rollout_steps; ++t)
                    {
                        x = true_step(x, (-K * x).cwiseMax(u_lo).cwiseMin(u_hi));
                        if (!x.allFinite() || (X && X->residuals(x).maxCoeff() > 0.0))
                            return false;
                    }
                    if (x.dot(S * x) > options.convergence_ratio * v0 + 1e-12)
                        return false;
                }
                return true;
            }
        };
    } // namespace

    SafeSet build_safe_set(const Eigen::MatrixXd &K, const Eigen::MatrixXd &S, const DiscreteDynamics &true_step,
                           const std::optional<Polytope> &X, const Eigen::VectorXd &u_lo, const Eigen::VectorXd &u_hi,
                           const SafeSetOptions &options)
    {
        const Eigen::Index p = S.rows();
        if (S.cols() != p || K.cols() != p || u_lo.size() != K.rows() || u_hi.size() != K.rows())
            throw InvalidInputError("build_safe_set: dimension mismatch");
        if (!(options.scale > 0.0 && options.scale <= 1.0) || !(options.level_max > 0.0) || options.samples < 1 ||
            options.rollout_steps < 1)
            throw InvalidInputError("build_safe_set: invalid options");
        const Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success)
            throw DegenerateShapeError("build_safe_set: shape must be positive definite");
        const Eigen::MatrixXd L = llt.matrixL();
        const Eigen::MatrixXd Linv_t = L.transpose().triangularView<Eigen::Upper>().solve(
            Eigen::MatrixXd::Identity(p, p));
        const Eigen::MatrixXd Sinv = Linv_t * Linv_t.transpose();

        // Whitened directions: boundary points first so failing levels are rejected early.
        std::mt19937_64 rng(options.seed);
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> unif(0.2, 1.0);
        std::vector<Eigen::VectorXd> pts;
        for (Eigen::Index j = 0; j < p; ++j)
            for (double s : {1.0, -1.0})
                pts.push_back(s * Eigen::VectorXd::Unit(p, j));
        std::vector<Eigen::VectorXd> inner;
        for (int i = 0; i < options.samples; ++i)
        {
            Eigen::VectorXd y(p);
            for (Eigen::Index j = 0; j < p; ++j)
                y(j) = normal(rng);
            y.normalize();
            if (i % 2 == 1)
                inner.push_back(unif(rng) * y);
            else
                pts.push_back(y);
        }
        pts.insert(pts.end(), inner.begin(), inner.end());

        const LevelTest valid{K, S, Sinv, Linv_t, true_step, X, u_lo, u_hi, pts, options};
        SafeSet out;
        out.S = S;
        double c_ok = 0.0;
        if (valid(options.level_max))
        {
            c_ok = options.level_max;
            out.hit_budget = true;
        }
        else
        {
            double lo = 0.0, hi = options.level_max;
            for (int it = 0; it < options.bisection_iters; ++it)
            {
                const double mid = 0.5 * (lo + hi);
                if (valid(mid))
                    lo = mid;
                else
                    hi = mid;
            }
            c_ok = lo;
        }
        if (!(c_ok > 0.0))
            throw ConvergenceError("build_safe_set: no safe level set found");
        out.level = c_ok;

        const Polytope unit = whitened_unit_polytope(p);
        // y = L' x, rows d'y <= h_unit become (L d)' x <= h_unit * scale * sqrt(c)
        const Eigen::MatrixXd H = unit.H() * L.transpose();
        const Eigen::VectorXd h = unit.h() * (options.scale * std::sqrt(c_ok));
        out.polytope = Polytope(H, h).normalized();
        return out;
    }

    // ---------------------------------------------------------------- EnvSpec

    std::vector<Eigen::MatrixXd> EnvSpec::gains(int T) const
    {
        return std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(std::max(T, 0)), -lqr.K);
    }

    Eigen::VectorXd EnvSpec::model_error(const Eigen::VectorXd &x, const Eigen::VectorXd &u) const
    {
        return true_step(x, u) - (*prior)(x, u);
    }

    bool EnvSpec::state_violated(const Eigen::VectorXd &x, double tol) const
    {
        if (!x.allFinite())
            return true;
        if (!constraints->state())
            return false;
        return constraints->state()->residuals(x).maxCoeff() > tol;
    }

    bool EnvSpec::input_violated(const Eigen::VectorXd &u, double tol) const
    {
        return !u.allFinite() || constraints->control().residuals(u).maxCoeff() > tol;
    }

    namespace
    {
        void finish_env(EnvSpec &env, const Eigen::MatrixXd &Q, const Eigen::MatrixXd &R, double u_max,
                        const std::optional<Polytope> &X, const SafeSetOptions &ss_options,
                        const std::optional<LipschitzConstants> &lipschitz)
        {
            const Eigen::Index p = env.x_start.size();
            const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(p);
            const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
            env.true_linear = linearize_discretize(env.true_derivative, x0, u0, env.dt);
            env.lqr = lqr_synthesize(env.true_linear.A, env.true_linear.B, Q, R);
            if (!(env.lqr.spectral_radius < 1.0))
                throw ConvergenceError("environment: LQR closed loop is not stable");
            env.safe_policy.K = env.lqr.K;
            env.safe_policy.u_lo = Eigen::VectorXd::Constant(1, -u_max);
            env.safe_policy.u_hi = Eigen::VectorXd::Constant(1, u_max);
            const Eigen::MatrixXd S = ss_options.semi_axes
                                          ? Eigen::MatrixXd(ss_options.semi_axes->array().square().inverse().matrix().asDiagonal())
                                          : env.lqr.P;
            env.safe_set = build_safe_set(env.lqr.K, S, env.true_step, X, env.safe_policy.u_lo, env.safe_policy.u_hi,
                                          ss_options);
            const Polytope U = Polytope::box(env.safe_policy.u_lo, env.safe_policy.u_hi);
            env.constraints = std::make_shared<const ConstraintSet>(X, U, env.safe_set.polytope);

            // Model-error region: safe-set bounding box doubled, clipped to X.
            const HyperRectangle box = bounding_box(env.safe_set.polytope);
            Eigen::VectorXd lo = box.center - 2.0 * box.half_widths;
            Eigen::VectorXd hi = box.center + 2.0 * box.half_widths;
            if (X)
            {
                // clip by the axis-aligned rows of X
                for (Eigen::Index r = 0; r < X->rows(); ++r)
                {
                    Eigen::Index j = 0;
                    const double a = X->H().row(r).cwiseAbs().maxCoeff(&j);
                    if (std::abs(a - X->H().row(r).cwiseAbs().sum()) > 1e-12)
                        continue;
                    if (X->H()(r, j) > 0)
                        hi(j) = std::min(hi(j), X->h()(r) / a);
                    else
                        lo(j) = std::max(lo(j), -X->h()(r) / a);
                }
            }
            env.region_lo.resize(p + 1);
            env.region_hi.resize(p + 1);
            env.region_lo << lo, -u_max;
            env.region_hi << hi, u_max;
            env.lipschitz = lipschitz ? *lipschitz : estimate_lipschitz(env);
            env.lipschitz.validate(p);
        }
    } // namespace

    EnvSpec make_pendulum_env(const PendulumEnvConfig &config)
    {
        config.truth.validate();
        if (!(config.dt > 0.0) || config.substeps < 1 || !(config.obs_noise_std >= 0.0) || !(config.prior_mass > 0.0))
            throw ConfigError("pendulum: invalid configuration");
        EnvSpec env;
        env.name = "pendulum";
        env.dt = config.dt;
        env.substeps = config.substeps;
        env.obs_noise_std = config.obs_noise_std;
        const PendulumParams truth = config.truth;
        const double dt = config.dt;
        const int substeps = config.substeps;
        env.true_step = [truth, dt, substeps](const Eigen::VectorXd &x, const Eigen::VectorXd &u)
        { return pendulum_step(x, u, truth, dt, substeps); };
        env.true_derivative = [truth](const Eigen::VectorXd &x, const Eigen::VectorXd &u)
        { return truth.derivative(x, u); };
        PendulumParams wrong = truth;
        wrong.m = config.prior_mass;
        wrong.eta = config.prior_eta;
        const LinearModel prior = linearize_discretize(
            [wrong](const Eigen::VectorXd &x, const Eigen::VectorXd &u) { return wrong.derivative(x, u); },
            Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), dt);
        env.prior = std::make_shared<const PriorModel>(PriorModel::linear(prior.A, prior.B));
        env.x_start = Eigen::VectorXd::Zero(2);
        finish_env(env, config.lqr_q.asDiagonal(), Eigen::MatrixXd::Constant(1, 1, config.lqr_r), truth.u_max,
                   std::nullopt, config.safe_set, config.lipschitz);
        return env;
    }

    EnvSpec make_cartpole_env(const CartPoleEnvConfig &config)
    {
        config.truth.validate();
        if (!(config.dt > 0.0) || config.substeps < 1 || !(config.obs_noise_std >= 0.0) ||
            !(config.prior_pole_mass > 0.0))
            throw ConfigError("cartpole: invalid configuration");
        EnvSpec env;
        env.name = "cartpole";
        env.dt = config.dt;
        env.substeps = config.substeps;
        env.obs_noise_std = config.obs_noise_std;
        const CartPoleParams truth = config.truth;
        const double dt = config.dt;
        const int substeps = config.substeps;
        env.true_step = [truth, dt, substeps](const Eigen::VectorXd &x, const Eigen::VectorXd &u)
        { return cartpole_step(x, u, truth, dt, substeps); };
        env.true_derivative = [truth](const Eigen::VectorXd &x, const Eigen::VectorXd &u)
        { return truth.derivative(x, u); };
        CartPoleParams wrong = truth;
        wrong.m = config.prior_pole_mass;
        wrong.eta = config.prior_eta;
        const LinearModel prior = linearize_discretize(
            [wrong](const Eigen::VectorXd &x, const Eigen::VectorXd &u) { return wrong.derivative(x, u); },
            Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(1), dt);
        env.prior = std::make_shared<const PriorModel>(PriorModel::linear(prior.A, prior.B));
        env.x_start = Eigen::VectorXd::Zero(4);
        env.x_start(0) = truth.x_start;
        Eigen::VectorXd lo(4), hi(4);
        const double inf = std::numeric_limits<double>::infinity();
        lo << truth.x_min, -inf, -truth.theta_max, -inf;
        hi << truth.x_max, inf, truth.theta_max, inf;
        // Only the finite rows: rail and floor.
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(4, 4);
        Eigen::VectorXd h(4);
        H(0, 0) = 1.0;
        h(0) = truth.x_max;
        H(1, 0) = -1.0;
        h(1) = -truth.x_min;
        H(2, 2) = 1.0;
        h(2) = truth.theta_max;
        H(3, 2) = -1.0;
        h(3) = truth.theta_max;
        const Polytope X(H, h);
        finish_env(env, config.lqr_q.asDiagonal(), Eigen::MatrixXd::Constant(1, 1, config.lqr_r), truth.u_max, X,
                   config.safe_set, config.lipschitz);
        if (!env.safe_set.polytope.contains(env.x_start))
            throw ConfigError("cartpole: start state is outside the safe set");
        return env;
    }

    // ---------------------------------------------------------------- diagnostics

    LipschitzConstants estimate_lipschitz(const EnvSpec &env, int points_per_dim, double safety_factor)
    {
        const Eigen::Index p = env.state_dim(), d = env.region_lo.size();
        LipschitzConstants L = LipschitzConstants::zero(p);
        const double step = 1e-5;
        long total = 1;
        for (Eigen::Index i = 0; i < d; ++i)
            total *= points_per_dim;
        Eigen::MatrixXd A, B;
        for (long idx = 0; idx < total; ++idx)
        {
            Eigen::VectorXd z(d);
            long rem = idx;
            for (Eigen::Index i = 0; i < d; ++i)
            {
                const int k = static_cast<int>(rem % points_per_dim);
                rem /= points_per_dim;
                const double frac = points_per_dim > 1 ? static_cast<double>(k) / (points_per_dim - 1) : 0.5;
                z(i) = env.region_lo(i) + frac * (env.region_hi(i) - env.region_lo(i));
            }
            Eigen::MatrixXd J(p, d);
            for (Eigen::Index i = 0; i < d; ++i)
            {
                Eigen::VectorXd zp = z, zm = z;
                zp(i) += step;
                zm(i) -= step;
                J.col(i) = (env.model_error(zp.head(p), zp.tail(d - p)) - env.model_error(zm.head(p), zm.tail(d - p))) /
                           (2.0 * step);
            }
            for (Eigen::Index j = 0; j < p; ++j)
                L.L_g = std::max(L.L_g, J.row(j).norm());
            if (!env.prior->is_linear())
            {
                // Hessian norm bound of h_j from differences of Jacobians.
                env.prior->jacobian(z.head(p), z.tail(d - p), A, B);
                for (Eigen::Index i = 0; i < d; ++i)
                {
                    Eigen::VectorXd zp = z;
                    zp(i) += step;
                    Eigen::MatrixXd Ap, Bp;
                    env.prior->jacobian(zp.head(p), zp.tail(d - p), Ap, Bp);
                    Eigen::MatrixXd dJ(p, d);
                    dJ << (Ap - A) / step, (Bp - B) / step;
                    for (Eigen::Index j = 0; j < p; ++j)
                        L.L_grad_h(j) = std::max(L.L_grad_h(j), dJ.row(j).norm() * std::sqrt(static_cast<double>(d)));
                }
            }
        }
        L.L_g *= safety_factor;
        L.L_grad_h *= safety_factor;
        return L;
    }

    ModelErrorReport model_error_sup_norm(const EnvSpec &env, int samples, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const Eigen::Index p = env.state_dim(), d = env.region_lo.size();
        ModelErrorReport rep;
        rep.per_output = Eigen::VectorXd::Zero(p);
        for (int s = 0; s < samples; ++s)
        {
            Eigen::VectorXd z(d);
            for (Eigen::Index i = 0; i < d; ++i)
                z(i) = env.region_lo(i) + unif(rng) * (env.region_hi(i) - env.region_lo(i));
            const Eigen::VectorXd g = env.model_error(z.head(p), z.tail(d - p));
            rep.per_output = rep.per_output.cwiseMax(g.cwiseAbs());
        }
        rep.sup_norm = rep.per_output.maxCoeff();
        rep.samples = samples;
        return rep;
    }

    Eigen::VectorXd sample_in_polytope(const Polytope &P, std::mt19937_64 &rng, int max_tries)
    {
        return sample_in_polytope(P, bounding_box(P), rng, max_tries);
    }

    Eigen::VectorXd sample_in_polytope(const Polytope &P, const HyperRectangle &box, std::mt19937_64 &rng,
                                       int max_tries)
    {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int t = 0; t < max_tries; ++t)
        {
            Eigen::VectorXd x(box.center.size());
            for (Eigen::Index i = 0; i < x.size(); ++i)
                x(i) = box.center(i) + box.half_widths(i) * unif(rng);
            if (P.contains(x))
                return x;
        }
        throw ConvergenceError("sample_in_polytope: rejection sampling failed");
    }

    SafeSetCheck check_safe_set(const EnvSpec &env, int samples, double seconds, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        const int steps = static_cast<int>(std::lround(seconds / env.dt));
        const Eigen::MatrixXd &P = env.safe_set.S;
        const HyperRectangle box = bounding_box(env.safe_set.polytope);
        SafeSetCheck out;
        out.samples = samples;
        for (int s = 0; s < samples; ++s)
        {
            Eigen::VectorXd x = sample_in_polytope(env.safe_set.polytope, box, rng);
            const double v0 = x.dot(P * x);
            bool violated = false;
            for (int t = 0; t < steps && !violated; ++t)
            {
                const Eigen::VectorXd u = env.safe_policy(x);
                if (env.input_violated(u))
                    violated = true;
                x = env.true_step(x, u);
                if (env.state_violated(x))
                    violated = true;
            }
            if (violated)
            {
                ++out.violations;
                continue;
            }
            const double ratio = v0 > 1e-12 ? x.dot(P * x) / v0 : 0.0;
            out.max_final_ratio = std::max(out.max_final_ratio, ratio);
            if (ratio > 0.5)
                ++out.not_converged;
        }
        return out;
    }

} // namespace safempc
