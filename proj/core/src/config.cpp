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

#include "safempc/config.hpp"

#include "safempc/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace safempc
{
    using nlohmann::json;

    ExperimentKind experiment_kind_from_string(const std::string &name)
    {
        if (name == "explore-static")
            return ExperimentKind::StaticExploration;
        if (name == "explore-dynamic")
            return ExperimentKind::DynamicExploration;
        if (name == "rl")
            return ExperimentKind::EpisodicRL;
        if (name == "baseline")
            return ExperimentKind::CautiousBaseline;
        if (name == "certify-env")
            return ExperimentKind::CertifyEnv;
        throw ConfigError("unknown experiment kind '" + name + "'");
    }

    std::string to_string(ExperimentKind kind)
    {
        switch (kind)
        {
        case ExperimentKind::StaticExploration:
            return "explore-static";
        case ExperimentKind::DynamicExploration:
            return "explore-dynamic";
        case ExperimentKind::EpisodicRL:
            return "rl";
        case ExperimentKind::CautiousBaseline:
            return "baseline";
        case ExperimentKind::CertifyEnv:
            return "certify-env";
        }
        return "unknown";
    }

    namespace
    {
        Eigen::VectorXd broadcast(const Eigen::VectorXd &v, Eigen::Index n, const char *what)
        {
            if (v.size() == n)
                return v;
            if (v.size() == 1)
                return Eigen::VectorXd::Constant(n, v(0));
            throw ConfigError(std::string("gp.") + what + ": expected 1 or " + std::to_string(n) + " values");
        }

        // ---------------------------------------------------------------- JSON helpers

        template <typename T>
        void read(const json &j, const char *key, T &out)
        {
            if (!j.contains(key))
                return;
            try
            {
                out = j.at(key).get<T>();
            }
            catch (const json::exception &e)
            {
                throw ConfigError(std::string("config key '") + key + "': " + e.what());
            }
        }

        void read_vector(const json &j, const char *key, Eigen::VectorXd &out)
        {
            if (!j.contains(key))
                return;
            std::vector<double> v;
            read(j, key, v);
            out = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        }

        json vec(const Eigen::VectorXd &v)
        {
            return json(std::vector<double>(v.data(), v.data() + v.size()));
        }

        json object(const json &parent, const char *key)
        {
            if (!parent.contains(key))
                return json::object();
            if (!parent.at(key).is_object())
                throw ConfigError(std::string("config key '") + key + "' must be an object");
            return parent.at(key);
        }

        void read_safe_set(const json &j, SafeSetOptions &o)
        {
            read(j, "level_max", o.level_max);
            read(j, "bisection_iters", o.bisection_iters);
            read(j, "samples", o.samples);
            read(j, "rollout_steps", o.rollout_steps);
            read(j, "convergence_ratio", o.convergence_ratio);
            read(j, "scale", o.scale);
            read(j, "seed", o.seed);
            if (j.contains("semi_axes"))
            {
                if (j.at("semi_axes").is_null())
                    o.semi_axes.reset();
                else
                {
                    Eigen::VectorXd a;
                    read_vector(j, "semi_axes", a);
                    o.semi_axes = a;
                }
            }
        }

        json write_safe_set(const SafeSetOptions &o)
        {
            json j;
            j["level_max"] = o.level_max;
            j["bisection_iters"] = o.bisection_iters;
            j["samples"] = o.samples;
            j["rollout_steps"] = o.rollout_steps;
            j["convergence_ratio"] = o.convergence_ratio;
            j["scale"] = o.scale;
            j["seed"] = o.seed;
            j["semi_axes"] = o.semi_axes ? vec(*o.semi_axes) : json(nullptr);
            return j;
        }

        void read_lipschitz(const json &j, std::optional<LipschitzConstants> &out, Eigen::Index p)
        {
            if (!j.contains("lipschitz") || j.at("lipschitz").is_null())
                return;
            const json l = j.at("lipschitz");
            LipschitzConstants L = LipschitzConstants::zero(p);
            read_vector(l, "L_grad_h", L.L_grad_h);
            read(l, "L_g", L.L_g);
            read_vector(l, "L_grad_mu", L.L_grad_mu);
            read(l, "L_sigma", L.L_sigma);
            L.validate(p);
            out = L;
        }

        json write_lipschitz(const std::optional<LipschitzConstants> &L)
        {
            if (!L)
                return nullptr;
            json j;
            j["L_grad_h"] = vec(L->L_grad_h);
            j["L_g"] = L->L_g;
            j["L_grad_mu"] = vec(L->L_grad_mu);
            j["L_sigma"] = L->L_sigma;
            return j;
        }

        void read_env(const json &env, ExperimentConfig &c)
        {
            read(env, "name", c.env_name);
            if (c.env_name == "pendulum")
            {
                PendulumEnvConfig &e = c.pendulum;
                read(env, "dt", e.dt);
                read(env, "substeps", e.substeps);
                read(env, "obs_noise_std", e.obs_noise_std);
                const json params = object(env, "params");
                read(params, "m", e.truth.m);
                read(params, "l", e.truth.l);
                read(params, "eta", e.truth.eta);
                read(params, "g", e.truth.g);
                read(params, "u_max", e.truth.u_max);
                const json prior = object(env, "prior");
                read(prior, "mass", e.prior_mass);
                read(prior, "eta", e.prior_eta);
                const json lqr = object(env, "lqr");
                Eigen::VectorXd q = e.lqr_q;
                read_vector(lqr, "q", q);
                if (q.size() != 2)
                    throw ConfigError("env.lqr.q: pendulum expects 2 weights");
                e.lqr_q = q;
                read(lqr, "r", e.lqr_r);
                read_safe_set(object(env, "safe_set"), e.safe_set);
                read_lipschitz(env, e.lipschitz, 2);
            }
            else if (c.env_name == "cartpole")
            {
                CartPoleEnvConfig &e = c.cartpole;
                read(env, "dt", e.dt);
                read(env, "substeps", e.substeps);
                read(env, "obs_noise_std", e.obs_noise_std);
                const json params = object(env, "params");
                read(params, "M", e.truth.M);
                read(params, "m", e.truth.m);
                read(params, "l", e.truth.l);
                read(params, "eta", e.truth.eta);
                read(params, "g", e.truth.g);
                read(params, "x_min", e.truth.x_min);
                read(params, "x_max", e.truth.x_max);
                if (params.contains("theta_max_deg"))
                {
                    double deg = 0.0;
                    read(params, "theta_max_deg", deg);
                    e.truth.theta_max = deg * std::numbers::pi / 180.0;
                }
                read(params, "u_max", e.truth.u_max);
                read(params, "x_start", e.truth.x_start);
                read(params, "x_goal", e.truth.x_goal);
                const json prior = object(env, "prior");
                read(prior, "pole_mass", e.prior_pole_mass);
                read(prior, "eta", e.prior_eta);
                const json lqr = object(env, "lqr");
                Eigen::VectorXd q = e.lqr_q;
                read_vector(lqr, "q", q);
                if (q.size() != 4)
                    throw ConfigError("env.lqr.q: cartpole expects 4 weights");
                e.lqr_q = q;
                read(lqr, "r", e.lqr_r);
                read_safe_set(object(env, "safe_set"), e.safe_set);
                read_lipschitz(env, e.lipschitz, 4);
            }
            else
                throw ConfigError("env.name must be 'pendulum' or 'cartpole'");
        }

        json write_env(const ExperimentConfig &c)
        {
            json env;
            env["name"] = c.env_name;
            if (c.env_name == "pendulum")
            {
                const PendulumEnvConfig &e = c.pendulum;
                env["dt"] = e.dt;
                env["substeps"] = e.substeps;
                env["obs_noise_std"] = e.obs_noise_std;
                env["params"] = {{"m", e.truth.m}, {"l", e.truth.l}, {"eta", e.truth.eta}, {"g", e.truth.g},
                                 {"u_max", e.truth.u_max}};
                env["prior"] = {{"mass", e.prior_mass}, {"eta", e.prior_eta}};
                env["lqr"] = {{"q", vec(e.lqr_q)}, {"r", e.lqr_r}};
                env["safe_set"] = write_safe_set(e.safe_set);
                env["lipschitz"] = write_lipschitz(e.lipschitz);
            }
            else
            {
                const CartPoleEnvConfig &e = c.cartpole;
                env["dt"] = e.dt;
                env["substeps"] = e.substeps;
                env["obs_noise_std"] = e.obs_noise_std;
                env["params"] = {{"M", e.truth.M},
                                 {"m", e.truth.m},
                                 {"l", e.truth.l},
                                 {"eta", e.truth.eta},
                                 {"g", e.truth.g},
                                 {"x_min", e.truth.x_min},
                                 {"x_max", e.truth.x_max},
                                 {"theta_max_deg", e.truth.theta_max * 180.0 / std::numbers::pi},
                                 {"u_max", e.truth.u_max},
                                 {"x_start", e.truth.x_start},
                                 {"x_goal", e.truth.x_goal}};
                env["prior"] = {{"pole_mass", e.prior_pole_mass}, {"eta", e.prior_eta}};
                env["lqr"] = {{"q", vec(e.lqr_q)}, {"r", e.lqr_r}};
                env["safe_set"] = write_safe_set(e.safe_set);
                env["lipschitz"] = write_lipschitz(e.lipschitz);
            }
            return env;
        }

        json to_json_object(const ExperimentConfig &c)
        {
            json j;
            j["experiment"] = to_string(c.kind);
            j["env"] = write_env(c);
            j["gp"] = {{"kernel", c.gp.kernel},
                       {"lengthscales", vec(c.gp.lengthscales)},
                       {"signal_variance", c.gp.signal_variance},
                       {"linear_weights", vec(c.gp.linear_weights)},
                       {"output_scales", vec(c.gp.output_scales)},
                       {"noise_std", c.gp.noise_std},
                       {"beta", c.gp.beta},
                       {"budget", c.gp.budget}};
            j["mpc"] = {{"T", c.mpc.T_values},
                        {"H", c.mpc.H_values},
                        {"r", c.mpc.r},
                        {"scheme", to_string(c.mpc.scheme)},
                        {"gamma", c.mpc.gamma},
                        {"W_diag", vec(c.mpc.W_diag)},
                        {"c_rl", c.mpc.c_rl},
                        {"kappa", c.mpc.kappa},
                        {"Q_perf_diag", vec(c.mpc.Q_perf_diag)},
                        {"L_grad_mu", c.mpc.L_grad_mu},
                        {"L_sigma", c.mpc.L_sigma}};
            const SolverConfig &s = c.solver;
            j["solver"] = {{"multistarts", s.multistarts},
                           {"max_iters", s.penalty.max_iters},
                           {"penalty_init", s.penalty.penalty_init},
                           {"penalty_growth", s.penalty.penalty_growth},
                           {"penalty_stages", s.penalty.penalty_stages},
                           {"margin", s.penalty.margin},
                           {"grad_tol", s.penalty.grad_tol},
                           {"fd_step", s.penalty.fd_step},
                           {"tol_feas", s.tol_feas},
                           {"use_warm_start", s.use_warm_start},
                           {"use_safe_start", s.use_safe_start},
                           {"initial_state_spread", s.initial_state_spread}};
            const RunConfig &r = c.run;
            j["run"] = {{"iterations", r.iterations},
                        {"n0", r.n0},
                        {"n_steps", r.n_steps},
                        {"n_episodes", r.n_episodes},
                        {"repetitions", r.repetitions},
                        {"seed", r.seed},
                        {"cost_weight", r.cost_weight},
                        {"certify_samples", r.certify_samples},
                        {"certify_seconds", r.certify_seconds}};
            return j;
        }

        ExperimentConfig from_json_object(const json &j)
        {
            ExperimentConfig c;
            if (j.contains("experiment"))
            {
                std::string kind;
                read(j, "experiment", kind);
                c.kind = experiment_kind_from_string(kind);
            }
            read_env(object(j, "env"), c);

            const json gp = object(j, "gp");
            read(gp, "kernel", c.gp.kernel);
            read_vector(gp, "lengthscales", c.gp.lengthscales);
            read(gp, "signal_variance", c.gp.signal_variance);
            read_vector(gp, "linear_weights", c.gp.linear_weights);
            read_vector(gp, "output_scales", c.gp.output_scales);
            read(gp, "noise_std", c.gp.noise_std);
            read(gp, "beta", c.gp.beta);
            read(gp, "budget", c.gp.budget);

            const json mpc = object(j, "mpc");
            read(mpc, "T", c.mpc.T_values);
            read(mpc, "H", c.mpc.H_values);
            read(mpc, "r", c.mpc.r);
            if (mpc.contains("scheme"))
            {
                std::string scheme;
                read(mpc, "scheme", scheme);
                c.mpc.scheme = propagation_scheme_from_string(scheme);
            }
            read(mpc, "gamma", c.mpc.gamma);
            read_vector(mpc, "W_diag", c.mpc.W_diag);
            read(mpc, "c_rl", c.mpc.c_rl);
            read(mpc, "kappa", c.mpc.kappa);
            read_vector(mpc, "Q_perf_diag", c.mpc.Q_perf_diag);
            read(mpc, "L_grad_mu", c.mpc.L_grad_mu);
            read(mpc, "L_sigma", c.mpc.L_sigma);

            const json solver = object(j, "solver");
            SolverConfig &s = c.solver;
            read(solver, "multistarts", s.multistarts);
            read(solver, "max_iters", s.penalty.max_iters);
            read(solver, "penalty_init", s.penalty.penalty_init);
            read(solver, "penalty_growth", s.penalty.penalty_growth);
            read(solver, "penalty_stages", s.penalty.penalty_stages);
            read(solver, "margin", s.penalty.margin);
            read(solver, "grad_tol", s.penalty.grad_tol);
            read(solver, "fd_step", s.penalty.fd_step);
            read(solver, "tol_feas", s.tol_feas);
            read(solver, "use_warm_start", s.use_warm_start);
            read(solver, "use_safe_start", s.use_safe_start);
            read(solver, "initial_state_spread", s.initial_state_spread);

            const json run = object(j, "run");
            RunConfig &r = c.run;
            read(run, "iterations", r.iterations);
            read(run, "n0", r.n0);
            read(run, "n_steps", r.n_steps);
            read(run, "n_episodes", r.n_episodes);
            read(run, "repetitions", r.repetitions);
            read(run, "seed", r.seed);
            read(run, "cost_weight", r.cost_weight);
            read(run, "certify_samples", r.certify_samples);
            read(run, "certify_seconds", r.certify_seconds);
            s.seed = r.seed;
            c.validate();
            return c;
        }
    } // namespace

    std::vector<KernelSpec> GPConfig::kernels(Eigen::Index input_dim, Eigen::Index output_dim) const
    {
        const KernelFamily family = kernel_family_from_string(kernel);
        KernelSpec spec;
        switch (family)
        {
        case KernelFamily::Linear:
            spec = KernelSpec::linear(broadcast(linear_weights, input_dim, "linear_weights"));
            break;
        case KernelFamily::Matern52:
            spec = KernelSpec::matern52(broadcast(lengthscales, input_dim, "lengthscales"), signal_variance);
            break;
        case KernelFamily::Sum:
            spec = KernelSpec::sum(broadcast(linear_weights, input_dim, "linear_weights"),
                                   broadcast(lengthscales, input_dim, "lengthscales"), signal_variance);
            break;
        }
        spec.validate(input_dim);
        if (output_scales.size() == 0)
            return std::vector<KernelSpec>(static_cast<std::size_t>(output_dim), spec);
        if (output_scales.size() != output_dim || (output_scales.array() <= 0.0).any())
            throw ConfigError("gp.output_scales: expected one positive value per state");
        std::vector<KernelSpec> out;
        for (Eigen::Index j = 0; j < output_dim; ++j)
        {
            KernelSpec k = spec;
            const double s2 = output_scales(j) * output_scales(j);
            k.signal_variance *= s2;
            if (k.linear_weights.size() > 0)
                k.linear_weights *= s2;
            out.push_back(std::move(k));
        }
        return out;
    }

    void ExperimentConfig::validate() const
    {
        if (env_name != "pendulum" && env_name != "cartpole")
            throw ConfigError("env.name must be 'pendulum' or 'cartpole'");
        if (!(gp.beta >= 0.0) || gp.budget < 1)
            throw ConfigError("gp: beta must be >= 0 and budget >= 1");
        if (mpc.T_values.empty() || mpc.H_values.empty())
            throw ConfigError("mpc: T and H lists must be non-empty");
        for (int T : mpc.T_values)
            if (T < 0)
                throw ConfigError("mpc.T: horizons must be >= 0");
        for (int H : mpc.H_values)
            if (H < 0)
                throw ConfigError("mpc.H: horizons must be >= 0");
        if (mpc.r < 1)
            throw ConfigError("mpc.r must be >= 1");
        if (!(mpc.gamma >= 0.0 && mpc.gamma < 1.0))
            throw ConfigError("mpc.gamma must lie in [0, 1)");
        if (!(mpc.kappa >= 0.0) || !(mpc.L_grad_mu >= 0.0) || !(mpc.L_sigma >= 0.0) || !(mpc.c_rl >= 0.0))
            throw ConfigError("mpc: kappa, c_rl and Lipschitz constants must be >= 0");
        if ((mpc.W_diag.array() < 0.0).any() || (mpc.Q_perf_diag.array() < 0.0).any())
            throw ConfigError("mpc: W_diag and Q_perf_diag must be nonnegative");
        if (solver.multistarts < 1 || solver.penalty.max_iters < 1 || !(solver.tol_feas > 0.0))
            throw ConfigError("solver: multistarts, max_iters and tol_feas must be positive");
        if (run.iterations < 0 || run.n0 < 1 || run.n_steps < 1 || run.n_episodes < 1 || run.repetitions < 1 ||
            run.certify_samples < 1 || !(run.certify_seconds > 0.0))
            throw ConfigError("run: counts must be >= 1 (iterations >= 0)");
    }

    EnvSpec ExperimentConfig::make_env() const
    {
        return env_name == "pendulum" ? make_pendulum_env(pendulum) : make_cartpole_env(cartpole);
    }

    double ExperimentConfig::noise_std(const EnvSpec &env) const
    {
        return gp.noise_std > 0.0 ? gp.noise_std : env.obs_noise_std;
    }

    std::vector<KernelSpec> ExperimentConfig::kernels(const EnvSpec &env) const
    {
        return gp.kernels(env.state_dim() + env.input_dim(), env.state_dim());
    }

    LipschitzConstants ExperimentConfig::lipschitz(const EnvSpec &env) const
    {
        LipschitzConstants L = env.lipschitz;
        if (mpc.L_grad_mu > 0.0)
            L.L_grad_mu = Eigen::VectorXd::Constant(env.state_dim(), mpc.L_grad_mu);
        if (mpc.L_sigma > 0.0)
            L.L_sigma = mpc.L_sigma;
        return L;
    }

    ExperimentConfig parse_config(const std::string &json_text, bool full)
    {
        json j;
        try
        {
            j = json::parse(json_text, nullptr, true, true);
        }
        catch (const json::exception &e)
        {
            throw ConfigError(std::string("config: invalid JSON: ") + e.what());
        }
        if (!j.is_object())
            throw ConfigError("config: top level must be an object");
        if (full && j.contains("full"))
            j.merge_patch(j.at("full"));
        j.erase("full");
        return from_json_object(j);
    }

    ExperimentConfig load_config(const std::string &path, bool full)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("config: cannot open '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str(), full);
    }

    std::string to_json(const ExperimentConfig &config, int indent)
    {
        return to_json_object(config).dump(indent);
    }

    std::uint64_t fnv1a64(std::string_view data)
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : data)
        {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::string config_hash(const ExperimentConfig &config)
    {
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(to_json(config, -1));
        return os.str();
    }

} // namespace safempc
