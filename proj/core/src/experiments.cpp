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

#include "safempc/experiments.hpp"

#include "safempc/errors.hpp"
#include "safempc/performance.hpp"

#include <cmath>
#include <limits>

namespace safempc
{
    Eigen::VectorXd observe(const EnvSpec &env, const Eigen::VectorXd &x, const Eigen::VectorXd &u,
                            std::mt19937_64 &rng)
    {
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::VectorXd next = env.true_step(x, u);
        if (env.obs_noise_std > 0.0)
            for (Eigen::Index i = 0; i < next.size(); ++i)
                next(i) += env.obs_noise_std * normal(rng);
        return next;
    }

    Eigen::VectorXd training_target(const EnvSpec &env, const Eigen::VectorXd &x, const Eigen::VectorXd &u,
                                    const Eigen::VectorXd &x_next)
    {
        return x_next - (*env.prior)(x, u);
    }

    Dataset initial_safe_samples(const EnvSpec &env, int n0, double noise_std, std::mt19937_64 &rng)
    {
        const Eigen::Index p = env.state_dim(), q = env.input_dim();
        Dataset data = Dataset::empty(p + q, p, noise_std);
        const HyperRectangle box = bounding_box(env.safe_set.polytope);
        for (int i = 0; i < n0; ++i)
        {
            const Eigen::VectorXd x = sample_in_polytope(env.safe_set.polytope, box, rng);
            const Eigen::VectorXd u = env.safe_policy(x);
            Eigen::VectorXd z(p + q);
            z << x, u;
            data.append(z, training_target(env, x, u, observe(env, x, u, rng)));
        }
        return data;
    }

    std::shared_ptr<const GPPosterior> fit_model(const Dataset &data, const std::vector<KernelSpec> &kernels,
                                                 double beta, int budget)
    {
        if (data.size() == 0)
            return std::make_shared<const GPPosterior>(
                GPPosterior::prior(data.input_dim(), kernels, data.noise_std, beta));
        if (data.size() > budget)
            return std::make_shared<const GPPosterior>(
                GPPosterior::fit(max_variance_subselect(data, kernels, budget), kernels, beta));
        return std::make_shared<const GPPosterior>(GPPosterior::fit(data, kernels, beta));
    }

    MPCProblem make_problem(const ExperimentConfig &cfg, const EnvSpec &env, int T, int H,
                            std::shared_ptr<const GPPosterior> gp, ObjectivePtr objective, const Eigen::VectorXd &x_t)
    {
        MPCProblem problem;
        problem.T = T;
        problem.x_t = x_t;
        problem.prior = env.prior;
        problem.gp = std::move(gp);
        problem.lipschitz = cfg.lipschitz(env);
        problem.scheme = cfg.mpc.scheme;
        problem.constraints = env.constraints;
        problem.gains = env.gains(T);
        problem.objective = std::move(objective);
        problem.safe_policy = env.safe_policy;
        problem.H = H;
        problem.r = (H > 0 && T > 0) ? std::min({cfg.mpc.r, T, H}) : 1;
        return problem;
    }

    ObjectivePtr rl_objective(const ExperimentConfig &cfg, const EnvSpec &env, int H)
    {
        const double goal = cfg.cartpole.truth.x_goal;
        if (H == 0)
            return std::make_shared<const CenterDistanceObjective>(0, goal, cfg.mpc.c_rl);
        const Eigen::Index p = env.state_dim();
        Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
        if (cfg.mpc.W_diag.size() == p)
            w = cfg.mpc.W_diag;
        else if (cfg.mpc.W_diag.size() == 0)
            w(0) = cfg.mpc.c_rl;
        else
            throw ConfigError("mpc.W_diag: expected one weight per state");
        Eigen::VectorXd x_goal = Eigen::VectorXd::Zero(p);
        x_goal(0) = goal;
        return std::make_shared<const SaturatingCostObjective>(x_goal, Eigen::MatrixXd(w.asDiagonal()),
                                                               cfg.mpc.gamma);
    }

    double episode_cost(const std::vector<Eigen::VectorXd> &states, Eigen::Index index, double goal, double weight)
    {
        double c = 0.0;
        for (const auto &x : states)
            c += weight * (x(index) - goal) * (x(index) - goal);
        return c;
    }

    namespace
    {
        std::uint64_t seed_for(std::uint64_t base, const std::string &label, int repetition)
        {
            std::uint64_t s = base ^ fnv1a64(label);
            s += 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(repetition + 1);
            s ^= s >> 31;
            return s;
        }

        RunRecord new_record(const ExperimentConfig &cfg)
        {
            RunRecord r;
            r.experiment = to_string(cfg.kind);
            r.config_json = to_json(cfg, -1);
            r.config_hash = config_hash(cfg);
            r.seed = cfg.run.seed;
            return r;
        }

        void say(const ExperimentOptions &o, const std::string &msg)
        {
            if (o.log)
                o.log(msg);
        }

        Eigen::VectorXd concat(const Eigen::VectorXd &a, const Eigen::VectorXd &b)
        {
            Eigen::VectorXd z(a.size() + b.size());
            z << a, b;
            return z;
        }

        void require_env(const ExperimentConfig &cfg, const char *name, const char *what)
        {
            if (cfg.env_name != name)
                throw ConfigError(std::string(what) + " requires env.name = '" + name + "'");
        }
    } // namespace

    // ---------------------------------------------------------------- exploration

    RunRecord run_static_exploration(const ExperimentConfig &cfg, const ExperimentOptions &options)
    {
        cfg.validate();
        const EnvSpec env = cfg.make_env();
        const auto kernels = cfg.kernels(env);
        const double noise = cfg.noise_std(env);
        RunRecord record = new_record(cfg);
        const auto objective = exploration_objective(ExplorationKind::VarianceSum);
        for (int T : cfg.mpc.T_values)
        {
            if (T < 1)
                throw ConfigError("explore-static: T must be >= 1");
            const std::string label = "T" + std::to_string(T);
            for (int rep = 0; rep < cfg.run.repetitions; ++rep)
            {
                std::mt19937_64 rng(seed_for(cfg.run.seed, label, rep));
                Dataset data = initial_safe_samples(env, cfg.run.n0, noise, rng);
                auto gp = fit_model(data, kernels, cfg.gp.beta, cfg.gp.budget);
                double mi = mutual_information(kernels, data.inputs, noise);
                record.traces.push_back({label, T, 0, rep, 0, mi, static_cast<int>(data.size()), true});
                EpisodeRecord ep{label, T, 0, rep, 0, std::numeric_limits<double>::quiet_NaN(), false, 0, 0};
                for (int it = 1; it <= cfg.run.iterations; ++it)
                {
                    MPCProblem problem = make_problem(cfg, env, T, 0, gp, objective, env.x_start);
                    problem.optimize_initial_state = true;
                    SolverConfig sc = cfg.solver;
                    sc.seed = rng();
                    const SafetyPlan plan = solve(problem, std::nullopt, sc);
                    StepRecord step;
                    step.setting = label;
                    step.repetition = rep;
                    step.step = it;
                    step.feasible = plan.feasible;
                    step.state = plan.x0.size() ? plan.x0 : env.x_start;
                    step.input = Eigen::VectorXd::Zero(env.input_dim());
                    ++ep.steps;
                    if (plan.feasible)
                    {
                        const Eigen::VectorXd u = env.safe_policy.clamp(plan.first_input());
                        step.input = u;
                        const Eigen::VectorXd next = observe(env, plan.x0, u, rng);
                        data.append(concat(plan.x0, u), training_target(env, plan.x0, u, next));
                        gp = fit_model(data, kernels, cfg.gp.beta, cfg.gp.budget);
                        mi = mutual_information(kernels, data.inputs, noise);
                    }
                    else
                        ++ep.infeasible_steps;
                    record.steps.push_back(step);
                    record.traces.push_back({label, T, 0, rep, it, mi, static_cast<int>(data.size()), plan.feasible});
                }
                record.episodes.push_back(ep);
                say(options, "explore-static " + label + " rep " + std::to_string(rep) + ": MI " + std::to_string(mi));
            }
        }
        record.settings = summarize(record.episodes, record.traces);
        return record;
    }

    RunRecord run_dynamic_exploration(const ExperimentConfig &cfg, const ExperimentOptions &options)
    {
        cfg.validate();
        const EnvSpec env = cfg.make_env();
        const auto kernels = cfg.kernels(env);
        const double noise = cfg.noise_std(env);
        const Eigen::Index p = env.state_dim();
        RunRecord record = new_record(cfg);
        Eigen::MatrixXd Q_perf = Eigen::MatrixXd::Identity(p, p);
        if (cfg.mpc.Q_perf_diag.size() == p)
            Q_perf = cfg.mpc.Q_perf_diag.asDiagonal();
        else if (cfg.mpc.Q_perf_diag.size() != 0)
            throw ConfigError("mpc.Q_perf_diag: expected one weight per state");

        for (int T : cfg.mpc.T_values)
        {
            if (T < 1)
                throw ConfigError("explore-dynamic: T must be >= 1");
            for (int H : cfg.mpc.H_values)
            {
                const bool perf = H > 0;
                const std::string label =
                    "T" + std::to_string(T) + (perf ? "_perf_H" + std::to_string(H) : std::string("_standard"));
                const ObjectivePtr objective =
                    perf ? exploration_objective(ExplorationKind::ConfidenceMinusDeviation, Q_perf)
                         : exploration_objective(ExplorationKind::VarianceSum);
                for (int rep = 0; rep < cfg.run.repetitions; ++rep)
                {
                    std::mt19937_64 rng(seed_for(cfg.run.seed, "T" + std::to_string(T), rep));
                    std::uniform_real_distribution<double> unif(0.0, 1.0);
                    Dataset data = initial_safe_samples(env, cfg.run.n0, noise, rng);
                    auto gp = fit_model(data, kernels, cfg.gp.beta, cfg.gp.budget);
                    double mi = mutual_information(kernels, data.inputs, noise);
                    record.traces.push_back({label, T, H, rep, 0, mi, static_cast<int>(data.size()), true});
                    const SafeMpcController controller(T, env.safe_policy);
                    ControllerState state = controller.initial_state();
                    Eigen::VectorXd x = env.x_start;
                    EpisodeRecord ep{label, T, H, rep, 0, std::numeric_limits<double>::quiet_NaN(), false, 0, 0};
                    for (int it = 1; it <= cfg.run.iterations; ++it)
                    {
                        const MPCProblem problem = make_problem(cfg, env, T, H, gp, objective, x);
                        SolverConfig sc = cfg.solver;
                        sc.seed = rng();
                        const bool force = unif(rng) < options.force_infeasible_probability;
                        const StepResult res = controller.step(state, problem, sc, force);
                        const Eigen::VectorXd x_next = env.true_step(x, res.u);
                        const bool violation = env.input_violated(res.u) || env.state_violated(x_next);
                        record.steps.push_back(
                            {label, rep, 0, it, x, res.u, res.feasible, res.safe_policy_applied, res.age, violation});
                        ++ep.steps;
                        if (!res.feasible)
                            ++ep.infeasible_steps;
                        if (violation)
                        {
                            ep.failed = true;
                            break;
                        }
                        Eigen::VectorXd noisy = x_next;
                        std::normal_distribution<double> normal;
                        for (Eigen::Index i = 0; i < noisy.size(); ++i)
                            noisy(i) += env.obs_noise_std * normal(rng);
                        data.append(concat(x, res.u), training_target(env, x, res.u, noisy));
                        gp = fit_model(data, kernels, cfg.gp.beta, cfg.gp.budget);
                        mi = mutual_information(kernels, data.inputs, noise);
                        record.traces.push_back({label, T, H, rep, it, mi, static_cast<int>(data.size()), res.feasible});
                        x = x_next;
                    }
                    record.episodes.push_back(ep);
                    say(options, "explore-dynamic " + label + " rep " + std::to_string(rep) + ": MI " +
                                     std::to_string(mi) + (ep.failed ? " (violation)" : ""));
                }
            }
        }
        record.settings = summarize(record.episodes, record.traces);
        return record;
    }

    // ---------------------------------------------------------------- reinforcement learning

    namespace
    {
        /// One rollout of n_steps from the start state; returns the episode record and appends its samples.
        EpisodeRecord rollout(const ExperimentConfig &cfg, const EnvSpec &env, int T, int H, const std::string &label,
                              int rep, int episode, const std::shared_ptr<const GPPosterior> &gp,
                              const ObjectivePtr &objective, Dataset &samples, std::mt19937_64 &rng,
                              const ExperimentOptions &options, RunRecord &record)
        {
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            std::normal_distribution<double> normal;
            EpisodeRecord ep{label, T, H, rep, episode, 0.0, false, 0, 0};
            Eigen::VectorXd x = env.x_start;
            std::vector<Eigen::VectorXd> states{x};
            const SafeMpcController *controller = nullptr;
            std::optional<SafeMpcController> owned;
            ControllerState state;
            if (T > 0)
            {
                owned.emplace(T, env.safe_policy);
                controller = &*owned;
                state = controller->initial_state();
            }
            Eigen::MatrixXd last_perf;
            for (int t = 0; t < cfg.run.n_steps; ++t)
            {
                MPCProblem problem = make_problem(cfg, env, T, H, gp, objective, x);
                SolverConfig sc = cfg.solver;
                sc.seed = rng();
                StepRecord step;
                step.setting = label;
                step.repetition = rep;
                step.episode = episode;
                step.step = t;
                step.state = x;
                if (T > 0)
                {
                    const bool force = unif(rng) < options.force_infeasible_probability;
                    const StepResult res = controller->step(state, problem, sc, force);
                    step.input = res.u;
                    step.feasible = res.feasible;
                    step.safe_policy_applied = res.safe_policy_applied;
                    step.plan_age = res.age;
                }
                else
                {
                    // performance-only planning with chance constraints and no fallback
                    problem.chance_kappa = cfg.mpc.kappa;
                    std::optional<PlanGuess> warm;
                    if (last_perf.cols() == H)
                    {
                        PlanGuess g;
                        g.x0 = x;
                        g.k.resize(env.input_dim(), 0);
                        g.u_perf = last_perf;
                        if (H > 1)
                        {
                            g.u_perf.leftCols(H - 1) = last_perf.rightCols(H - 1).eval();
                        }
                        warm = g;
                    }
                    const SafetyPlan plan = solve(problem, warm, sc);
                    Eigen::VectorXd u = Eigen::VectorXd::Zero(env.input_dim());
                    if (plan.u_perf.cols() > 0)
                    {
                        u = plan.u_perf.col(0);
                        last_perf = plan.u_perf;
                    }
                    else if (warm)
                    {
                        u = warm->u_perf.col(0);
                        last_perf = warm->u_perf;
                    }
                    step.input = env.safe_policy.clamp(u);
                    step.feasible = plan.feasible;
                }
                const Eigen::VectorXd x_next = env.true_step(x, step.input);
                step.violation = env.input_violated(step.input) || env.state_violated(x_next);
                record.steps.push_back(step);
                ++ep.steps;
                if (!step.feasible)
                    ++ep.infeasible_steps;
                if (step.violation)
                {
                    ep.failed = true;
                    break;
                }
                Eigen::VectorXd noisy = x_next;
                for (Eigen::Index i = 0; i < noisy.size(); ++i)
                    noisy(i) += env.obs_noise_std * normal(rng);
                samples.append(concat(x, step.input), training_target(env, x, step.input, noisy));
                x = x_next;
                states.push_back(x);
            }
            ep.cost = ep.failed ? std::numeric_limits<double>::quiet_NaN()
                                : episode_cost(states, 0, cfg.cartpole.truth.x_goal, cfg.run.cost_weight);
            return ep;
        }

        RunRecord run_episodes(const ExperimentConfig &cfg, const ExperimentOptions &options, bool baseline)
        {
            cfg.validate();
            require_env(cfg, "cartpole", baseline ? "baseline" : "rl");
            const EnvSpec env = cfg.make_env();
            const auto kernels = cfg.kernels(env);
            const double noise = cfg.noise_std(env);
            const Eigen::Index p = env.state_dim(), q = env.input_dim();
            RunRecord record = new_record(cfg);
            record.safempc_mode = !baseline;
            std::vector<std::pair<int, int>> grid;
            if (baseline)
            {
                for (int H : cfg.mpc.H_values)
                {
                    if (H < 1)
                        throw ConfigError("baseline: H must be >= 1");
                    grid.emplace_back(0, H);
                }
            }
            else
            {
                for (int T : cfg.mpc.T_values)
                {
                    if (T < 1)
                        throw ConfigError("rl: T must be >= 1");
                    for (int H : cfg.mpc.H_values)
                        grid.emplace_back(T, H);
                }
            }
            for (const auto &[T, H] : grid)
            {
                const std::string label = baseline ? "baseline_H" + std::to_string(H)
                                                   : "T" + std::to_string(T) + "_H" + std::to_string(H);
                const ObjectivePtr objective = rl_objective(cfg, env, H);
                for (int rep = 0; rep < cfg.run.repetitions; ++rep)
                {
                    std::mt19937_64 rng(seed_for(cfg.run.seed, label, rep));
                    Dataset data = Dataset::empty(p + q, p, noise);
                    auto gp = fit_model(data, kernels, cfg.gp.beta, cfg.gp.budget);
                    for (int episode = 0; episode < cfg.run.n_episodes; ++episode)
                    {
                        Dataset samples = Dataset::empty(p + q, p, noise);
                        const EpisodeRecord ep =
                            rollout(cfg, env, T, H, label, rep, episode, gp, objective, samples, rng, options, record);
                        record.episodes.push_back(ep);
                        say(options, record.experiment + " " + label + " rep " + std::to_string(rep) + " episode " +
                                         std::to_string(episode) + ": " +
                                         (ep.failed ? std::string("FAILED") : "C_ep " + std::to_string(ep.cost)) +
                                         ", infeasible " + std::to_string(ep.infeasible_steps));
                        if (samples.size() > 0)
                        {
                            data.append(samples);
                            gp = fit_model(data, kernels, cfg.gp.beta, cfg.gp.budget);
                        }
                    }
                }
            }
            record.settings = summarize(record.episodes, record.traces);
            return record;
        }
    } // namespace

    RunRecord run_episodic_rl(const ExperimentConfig &cfg, const ExperimentOptions &options)
    {
        return run_episodes(cfg, options, false);
    }

    RunRecord run_cautious_baseline(const ExperimentConfig &cfg, const ExperimentOptions &options)
    {
        return run_episodes(cfg, options, true);
    }

    // ---------------------------------------------------------------- environment certification

    RunRecord run_certify_env(const ExperimentConfig &cfg, const ExperimentOptions &options)
    {
        cfg.validate();
        const EnvSpec env = cfg.make_env();
        RunRecord record = new_record(cfg);
        const SafeSetCheck check = check_safe_set(env, cfg.run.certify_samples, cfg.run.certify_seconds, cfg.run.seed);
        const ModelErrorReport g = model_error_sup_norm(env, 2000, cfg.run.seed + 1);
        double vertex_level = 0.0;
        for (const auto &v : polytope_vertices(env.safe_set.polytope))
            vertex_level = std::max(vertex_level, v.dot(env.safe_set.S * v) / env.safe_set.level);
        record.diagnostics = {{"lqr_residual", env.lqr.residual},
                              {"lqr_spectral_radius", env.lqr.spectral_radius},
                              {"safe_set_level", env.safe_set.level},
                              {"safe_set_rows", static_cast<double>(env.safe_set.polytope.rows())},
                              {"safe_set_max_vertex_level_ratio", vertex_level},
                              {"safe_set_samples", static_cast<double>(check.samples)},
                              {"safe_set_violations", static_cast<double>(check.violations)},
                              {"safe_set_not_converged", static_cast<double>(check.not_converged)},
                              {"model_error_sup_norm", g.sup_norm},
                              {"lipschitz_L_g", env.lipschitz.L_g}};
        for (Eigen::Index j = 0; j < g.per_output.size(); ++j)
            record.diagnostics.emplace_back("model_error_sup_norm_" + std::to_string(j), g.per_output(j));
        EpisodeRecord ep{"certify_" + env.name, 1, 0, 0, 0, 0.0, check.violations > 0 || vertex_level > 1.0 + 1e-9,
                         check.samples, check.not_converged};
        record.episodes.push_back(ep);
        say(options, "certify-env " + env.name + ": level " + std::to_string(env.safe_set.level) + ", violations " +
                         std::to_string(check.violations) + ", model error sup " + std::to_string(g.sup_norm));
        record.settings = summarize(record.episodes, record.traces);
        return record;
    }

    RunRecord run_experiment(const ExperimentConfig &cfg, const ExperimentOptions &options)
    {
        switch (cfg.kind)
        {
        case ExperimentKind::StaticExploration:
            return run_static_exploration(cfg, options);
        case ExperimentKind::DynamicExploration:
            return run_dynamic_exploration(cfg, options);
        case ExperimentKind::EpisodicRL:
            return run_episodic_rl(cfg, options);
        case ExperimentKind::CautiousBaseline:
            return run_cautious_baseline(cfg, options);
        case ExperimentKind::CertifyEnv:
            return run_certify_env(cfg, options);
        }
        throw ConfigError("unknown experiment kind");
    }

} // namespace safempc
