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

#ifndef SAFEMPC_EXPERIMENTS_HPP_
#define SAFEMPC_EXPERIMENTS_HPP_

#include "safempc/config.hpp"
#include "safempc/environments.hpp"
#include "safempc/gp.hpp"
#include "safempc/results.hpp"
#include "safempc/safe_mpc.hpp"

#include <functional>
#include <memory>
#include <random>
#include <string>

namespace safempc
{
    struct ExperimentOptions
    {
        /// Progress messages (one line each); ignored when empty.
        std::function<void(const std::string &)> log;
        /// Probability of skipping the solver at a step (fallback injection).
        double force_infeasible_probability = 0.0;
    };

    /// Noisy observation of the next state: f(x, u) + N(0, noise^2 I).
    Eigen::VectorXd observe(const EnvSpec &env, const Eigen::VectorXd &x, const Eigen::VectorXd &u,
                            std::mt19937_64 &rng);

    /// GP training target for an observed transition: y = x_next - h(x, u).
    Eigen::VectorXd training_target(const EnvSpec &env, const Eigen::VectorXd &x, const Eigen::VectorXd &u,
                                    const Eigen::VectorXd &x_next);

    /// n0 samples (x_i, pi_safe(x_i)) with x_i uniform in X_safe.
    Dataset initial_safe_samples(const EnvSpec &env, int n0, double noise_std, std::mt19937_64 &rng);

    /// Posterior on the data (prior when empty), sub-selected by maximum variance beyond @p budget points.
    std::shared_ptr<const GPPosterior> fit_model(const Dataset &data, const std::vector<KernelSpec> &kernels,
                                                 double beta, int budget);

    /// Safety problem at x_t for horizon T with an optional performance trajectory of length H.
    MPCProblem make_problem(const ExperimentConfig &cfg, const EnvSpec &env, int T, int H,
                            std::shared_ptr<const GPPosterior> gp, ObjectivePtr objective, const Eigen::VectorXd &x_t);

    /// Cart-pole objective: expected saturating cost for H > 0, center distance for H = 0.
    ObjectivePtr rl_objective(const ExperimentConfig &cfg, const EnvSpec &env, int H);

    /// C_ep = sum_t weight * (x_t[index] - goal)^2 over the visited states.
    double episode_cost(const std::vector<Eigen::VectorXd> &states, Eigen::Index index, double goal, double weight);

    RunRecord run_static_exploration(const ExperimentConfig &cfg, const ExperimentOptions &options = {});
    RunRecord run_dynamic_exploration(const ExperimentConfig &cfg, const ExperimentOptions &options = {});
    RunRecord run_episodic_rl(const ExperimentConfig &cfg, const ExperimentOptions &options = {});
    RunRecord run_cautious_baseline(const ExperimentConfig &cfg, const ExperimentOptions &options = {});
    /// LQR, safe set and model-error diagnostics; violations of the safe-set check count as failures.
    RunRecord run_certify_env(const ExperimentConfig &cfg, const ExperimentOptions &options = {});

    /// Dispatch on cfg.kind.
    RunRecord run_experiment(const ExperimentConfig &cfg, const ExperimentOptions &options = {});

} // namespace safempc

#endif // SAFEMPC_EXPERIMENTS_HPP_
