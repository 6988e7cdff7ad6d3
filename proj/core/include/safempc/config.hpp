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

#ifndef SAFEMPC_CONFIG_HPP_
#define SAFEMPC_CONFIG_HPP_

#include "safempc/environments.hpp"
#include "safempc/gp.hpp"
#include "safempc/propagation.hpp"
#include "safempc/safe_mpc.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace safempc
{
    enum class ExperimentKind
    {
        StaticExploration,
        DynamicExploration,
        EpisodicRL,
        CautiousBaseline,
        CertifyEnv
    };

    /// CLI verb names: explore-static, explore-dynamic, rl, baseline, certify-env.
    ExperimentKind experiment_kind_from_string(const std::string &name);
    std::string to_string(ExperimentKind kind);

    struct GPConfig
    {
        std::string kernel = "sum";
        Eigen::VectorXd lengthscales = Eigen::VectorXd::Constant(1, 1.0); ///< one per GP input; broadcast when of size 1
        double signal_variance = 1e-2;
        Eigen::VectorXd linear_weights = Eigen::VectorXd::Constant(1, 1e-3); ///< one per GP input; broadcast when of size 1
        /// Per-output standard deviation multipliers applied to both kernel parts; empty means 1.
        Eigen::VectorXd output_scales;
        double noise_std = -1.0;        ///< negative: use the environment's observation noise
        double beta = 2.0;
        int budget = 150;

        /// Identical kernel for every output dimension.
        std::vector<KernelSpec> kernels(Eigen::Index input_dim, Eigen::Index output_dim) const;
    };

    struct MpcConfig
    {
        std::vector<int> T_values{2};
        std::vector<int> H_values{15};
        int r = 1;
        PropagationScheme scheme = PropagationScheme::MeanLinearized;
        double gamma = 0.95;
        Eigen::VectorXd W_diag;      ///< saturating-cost weights
        double c_rl = 0.1;           ///< center-distance weight when H = 0
        double kappa = 2.0;          ///< chance-constraint multiplier of the baseline
        Eigen::VectorXd Q_perf_diag; ///< deviation weights for dynamic exploration
        /// Lipschitz constants of the GP mean gradient and std (mean-linearized scheme).
        double L_grad_mu = 0.0;
        double L_sigma = 0.0;
    };

    struct RunConfig
    {
        int iterations = 100; ///< exploration iterations
        int n0 = 25;          ///< initial safe samples
        int n_steps = 50;
        int n_episodes = 8;
        int repetitions = 6;
        std::uint64_t seed = 0;
        double cost_weight = 0.1; ///< C_ep = sum cost_weight * (x_cart - goal)^2
        int certify_samples = 1000;
        double certify_seconds = 10.0;
    };

    struct ExperimentConfig
    {
        ExperimentKind kind = ExperimentKind::EpisodicRL;
        std::string env_name = "cartpole";
        PendulumEnvConfig pendulum;
        CartPoleEnvConfig cartpole;
        GPConfig gp;
        MpcConfig mpc;
        SolverConfig solver;
        RunConfig run;

        void validate() const;
        EnvSpec make_env() const;
        /// Noise std of the GP likelihood.
        double noise_std(const EnvSpec &env) const;
        std::vector<KernelSpec> kernels(const EnvSpec &env) const;
        /// Lipschitz constants for the propagation: environment defaults plus the GP constants.
        LipschitzConstants lipschitz(const EnvSpec &env) const;
    };

    /// Parse a JSON document; keys absent from it keep their defaults. When @p full is set, the
    /// optional "full" object is merged over the document first (paper-scale settings).
    ExperimentConfig parse_config(const std::string &json_text, bool full = false);
    ExperimentConfig load_config(const std::string &path, bool full = false);

    /// Effective configuration as canonical JSON (sorted keys, angles in degrees).
    std::string to_json(const ExperimentConfig &config, int indent = 2);

    std::uint64_t fnv1a64(std::string_view data);
    /// FNV-1a hash of the compact canonical JSON, as 16 hex digits.
    std::string config_hash(const ExperimentConfig &config);

} // namespace safempc

#endif // SAFEMPC_CONFIG_HPP_
