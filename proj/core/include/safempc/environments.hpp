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

#ifndef SAFEMPC_ENVIRONMENTS_HPP_
#define SAFEMPC_ENVIRONMENTS_HPP_

#include "safempc/constraints.hpp"
#include "safempc/ellipsoid.hpp"
#include "safempc/propagation.hpp"
#include "safempc/safe_mpc.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <memory>
#include <optional>
#include <random>
#include <string>

namespace safempc
{
    /// Continuous-time vector field x_dot = F(x, u).
    using ContinuousDynamics = std::function<Eigen::VectorXd(const Eigen::VectorXd &, const Eigen::VectorXd &)>;
    /// Discrete-time map x_{t+1} = f(x_t, u_t).
    using DiscreteDynamics = std::function<Eigen::VectorXd(const Eigen::VectorXd &, const Eigen::VectorXd &)>;

    /// Classical RK4 over dt with @p substeps equal substeps and zero-order-hold input.
    Eigen::VectorXd rk4_step(const ContinuousDynamics &F, const Eigen::VectorXd &x, const Eigen::VectorXd &u,
                             double dt, int substeps = 1);

    struct PendulumParams
    {
        double m = 0.15;
        double l = 0.5;
        double eta = 0.1;
        double g = 9.81;
        double u_max = 1.0;

        void validate() const;
        /// State (theta, theta_dot), theta = 0 upright.
        Eigen::VectorXd derivative(const Eigen::VectorXd &x, const Eigen::VectorXd &u) const;
    };

    struct CartPoleParams
    {
        double M = 0.5;
        double m = 0.5;
        double l = 0.5;
        double eta = 0.1;
        double g = 9.81;
        double x_min = -10.0;
        double x_max = 3.0;
        double theta_max = std::numbers::pi / 2.0; ///< radians
        double u_max = 5.0;
        double x_start = -2.0;
        double x_goal = 2.6;

        void validate() const;
        /// State (x, x_dot, theta, theta_dot), theta = 0 upright.
        Eigen::VectorXd derivative(const Eigen::VectorXd &x, const Eigen::VectorXd &u) const;
    };

    /// One step of the pendulum with u clamped to [-u_max, u_max].
    Eigen::VectorXd pendulum_step(const Eigen::VectorXd &x, const Eigen::VectorXd &u, const PendulumParams &params,
                                  double dt, int substeps = 10);
    /// One step of the cart-pole with u clamped to [-u_max, u_max].
    Eigen::VectorXd cartpole_step(const Eigen::VectorXd &x, const Eigen::VectorXd &u, const CartPoleParams &params,
                                  double dt, int substeps = 10);

    struct LinearModel
    {
        Eigen::MatrixXd A;
        Eigen::MatrixXd B;
    };

    /// Central-difference Jacobians (A_c, B_c) of a continuous vector field.
    LinearModel continuous_jacobians(const ContinuousDynamics &F, const Eigen::VectorXd &x, const Eigen::VectorXd &u,
                                     double step = 1e-6);

    /// Linearize at (x*, u*) and discretize with a zero-order hold (matrix exponential).
    LinearModel linearize_discretize(const ContinuousDynamics &F, const Eigen::VectorXd &x_eq,
                                     const Eigen::VectorXd &u_eq, double dt);

    /// Zero-order-hold discretization of x_dot = A x + B u.
    LinearModel zoh_discretize(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B, double dt);

    struct LqrResult
    {
        Eigen::MatrixXd K; ///< u = -K x
        Eigen::MatrixXd P;
        double residual = 0.0;
        double spectral_radius = 0.0;
        int iterations = 0;
    };

    /// Residual max |A'PA - P - A'PB (R + B'PB)^-1 B'PA + Q|.
    double riccati_residual(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B, const Eigen::MatrixXd &Q,
                            const Eigen::MatrixXd &R, const Eigen::MatrixXd &P);

    /// Discrete-time infinite-horizon LQR by Riccati iteration. Throws ConvergenceError.
    LqrResult lqr_synthesize(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B, const Eigen::MatrixXd &Q,
                             const Eigen::MatrixXd &R, int max_iters = 200000, double tol = 1e-10);

    struct SafeSetOptions
    {
        double level_max = 1e3; ///< bisection budget on the level c
        int bisection_iters = 20;
        int samples = 300;       ///< sampled points per candidate level (half on the boundary)
        int rollout_steps = 200; ///< closed-loop steps simulated from every sample
        double convergence_ratio = 0.2; ///< required decrease of x'Sx over the rollout
        double scale = 0.9;      ///< polytope vertices lie on the level set scaled by this factor
        std::uint64_t seed = 7;
        /// Semi-axes of an axis-aligned shape S = diag(1 / a^2); the LQR cost matrix P when unset.
        std::optional<Eigen::VectorXd> semi_axes;
    };

    struct SafeSet
    {
        Polytope polytope = Polytope::box(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0));
        double level = 0.0; ///< c in {x : x'Sx <= c}
        Eigen::MatrixXd S;
        bool hit_budget = false;
    };

    /// Unit-level half-space directions in whitened coordinates, scaled so every vertex lies within radius 1.
    Polytope whitened_unit_polytope(Eigen::Index dim);

    /**
     * @brief Largest level set of x'Sx on which -Kx respects the input box and whose sampled states all
     * stay inside X under the clamped closed loop x+ = f(x, clamp(-Kx)) and converge, followed by a
     * polytopic inner approximation.
     */
    SafeSet build_safe_set(const Eigen::MatrixXd &K, const Eigen::MatrixXd &S, const DiscreteDynamics &true_step,
                           const std::optional<Polytope> &X, const Eigen::VectorXd &u_lo, const Eigen::VectorXd &u_hi,
                           const SafeSetOptions &options = {});

    /// A concrete control problem: ground truth, prior, backup controller, safe set and constraints.
    struct EnvSpec
    {
        std::string name;
        double dt = 0.05;
        int substeps = 10;
        double obs_noise_std = 1e-3;
        DiscreteDynamics true_step;           ///< clamps its input
        ContinuousDynamics true_derivative;
        std::shared_ptr<const PriorModel> prior;
        LinearModel true_linear;
        LqrResult lqr;
        SafePolicy safe_policy;
        SafeSet safe_set;
        std::shared_ptr<const ConstraintSet> constraints;
        LipschitzConstants lipschitz;
        Eigen::VectorXd x_start;
        Eigen::VectorXd region_lo; ///< sampling box for model-error and Lipschitz estimates (state and input)
        Eigen::VectorXd region_hi;

        Eigen::Index state_dim() const { return x_start.size(); }
        Eigen::Index input_dim() const { return safe_policy.K.rows(); }
        /// Pre-specified feedback gains -K_lqr for a horizon T.
        std::vector<Eigen::MatrixXd> gains(int T) const;
        /// Model error g = f - h at z = (x, u).
        Eigen::VectorXd model_error(const Eigen::VectorXd &x, const Eigen::VectorXd &u) const;
        bool state_violated(const Eigen::VectorXd &x, double tol = 0.0) const;
        bool input_violated(const Eigen::VectorXd &u, double tol = 1e-9) const;
    };

    struct PendulumEnvConfig
    {
        PendulumParams truth;
        double prior_mass = 0.1;
        double prior_eta = 0.0;
        Eigen::Vector2d lqr_q = Eigen::Vector2d(1.0, 2.0);
        double lqr_r = 20.0;
        double dt = 0.05;
        int substeps = 10;
        double obs_noise_std = 1e-3;
        SafeSetOptions safe_set;
        std::optional<LipschitzConstants> lipschitz;
    };

    struct CartPoleEnvConfig
    {
        CartPoleParams truth;
        double prior_pole_mass = 0.4;
        double prior_eta = 0.0;
        Eigen::Vector4d lqr_q = Eigen::Vector4d(4.0, 8.0, 12.0, 2.0);
        double lqr_r = 40.0;
        double dt = 0.05;
        int substeps = 10;
        double obs_noise_std = 1e-3;
        SafeSetOptions safe_set = []
        {
            SafeSetOptions o;
            o.semi_axes = Eigen::Vector4d(2.9, 0.6, 0.15, 0.6);
            o.level_max = 2.0;
            return o;
        }();
        std::optional<LipschitzConstants> lipschitz;
    };

    EnvSpec make_pendulum_env(const PendulumEnvConfig &config = {});
    EnvSpec make_cartpole_env(const CartPoleEnvConfig &config = {});

    /// Lipschitz defaults by coarse grid sampling of finite-difference gradients over the region box.
    LipschitzConstants estimate_lipschitz(const EnvSpec &env, int points_per_dim = 5, double safety_factor = 1.5);

    struct ModelErrorReport
    {
        double sup_norm = 0.0; ///< max over samples of |g|_inf
        Eigen::VectorXd per_output;
        int samples = 0;
    };

    /// Sampled sup-norm of g = f - h over the region box.
    ModelErrorReport model_error_sup_norm(const EnvSpec &env, int samples = 2000, std::uint64_t seed = 1);

    struct SafeSetCheck
    {
        int samples = 0;
        int violations = 0;       ///< state or input constraint violations along the rollouts
        int not_converged = 0;    ///< rollouts whose final Lyapunov value did not decrease
        double max_final_ratio = 0.0;
    };

    /// Simulate @p samples states drawn uniformly in X_safe under the backup policy for @p seconds.
    SafeSetCheck check_safe_set(const EnvSpec &env, int samples = 1000, double seconds = 10.0, std::uint64_t seed = 3);

    /// Uniform sample in a bounded polytope by rejection from its bounding box.
    Eigen::VectorXd sample_in_polytope(const Polytope &P, std::mt19937_64 &rng, int max_tries = 100000);

    /// Same, with a precomputed bounding box of @p P.
    Eigen::VectorXd sample_in_polytope(const Polytope &P, const HyperRectangle &box, std::mt19937_64 &rng,
                                       int max_tries = 100000);

} // namespace safempc

#endif // SAFEMPC_ENVIRONMENTS_HPP_
