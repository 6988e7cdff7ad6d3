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
#include "safempc/experiments.hpp"
#include "safempc/results.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace
{
    struct Invocation
    {
        std::string config_path;
        std::optional<std::uint64_t> seed;
        std::string out_dir;
        bool full = false;
        bool quiet = false;
        double force_infeasible = 0.0;
    };

    void add_common(CLI::App *verb, Invocation &inv)
    {
        verb->add_option("--config", inv.config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        verb->add_option("--seed", inv.seed, "Base seed; overrides run.seed in the config");
        verb->add_option("--out", inv.out_dir, "Output directory for CSV/JSON results")->required();
        verb->add_flag("--full", inv.full, "Merge the config's \"full\" block (full-scale grids and iteration counts)");
        verb->add_flag("-q,--quiet", inv.quiet, "Suppress progress lines");
        verb->add_option("--force-infeasible", inv.force_infeasible,
                         "Probability of skipping the solver at a step (fallback testing)")
            ->check(CLI::Range(0.0, 1.0));
    }

    int run(safempc::ExperimentKind kind, const Invocation &inv)
    {
        using namespace safempc;
        ExperimentConfig cfg = load_config(inv.config_path, inv.full);
        if (cfg.kind != kind)
            throw ConfigError("config '" + inv.config_path + "' is for '" + to_string(cfg.kind) + "', not '" +
                              to_string(kind) + "'");
        if (inv.seed)
        {
            cfg.run.seed = *inv.seed;
            cfg.solver.seed = *inv.seed;
        }
        const auto t0 = std::chrono::steady_clock::now();
        ExperimentOptions options;
        options.force_infeasible_probability = inv.force_infeasible;
        if (!inv.quiet)
            options.log = [t0](const std::string &line)
            {
                const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::fprintf(stderr, "[%8.1fs] %s\n", s, line.c_str());
            };
        const RunRecord record = run_experiment(cfg, options);
        emit_results(record, inv.out_dir);

        for (const auto &s : record.settings)
        {
            std::printf("%-20s rollouts %3d  failures %3d (%5.1f%%)", s.setting.c_str(), s.rollouts, s.failures,
                        100.0 * s.failure_ratio);
            if (s.final_cost_count > 0)
                std::printf("  final C_ep %9.3f", s.final_cost_mean);
            if (!s.mi_mean.empty())
                std::printf("  final MI %8.4f", s.final_mi_mean);
            std::printf("\n");
        }
        for (const auto &[name, value] : record.diagnostics)
            std::printf("%-36s %.6g\n", name.c_str(), value);

        const int violations = record.safety_violations();
        if (violations > 0)
        {
            std::fprintf(stderr, "safety violations: %d\n", violations);
            return 3;
        }
        return 0;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Safe learning-based MPC experiment driver"};
    app.require_subcommand(1);
    Invocation inv;
    const std::pair<const char *, safempc::ExperimentKind> verbs[] = {
        {"explore-static", safempc::ExperimentKind::StaticExploration},
        {"explore-dynamic", safempc::ExperimentKind::DynamicExploration},
        {"rl", safempc::ExperimentKind::EpisodicRL},
        {"baseline", safempc::ExperimentKind::CautiousBaseline},
        {"certify-env", safempc::ExperimentKind::CertifyEnv},
    };
    const char *help[] = {
        "Pendulum exploration with the initial state optimized each iteration",
        "Pendulum exploration in closed loop, with and without a performance trajectory",
        "Cart-pole episodic learning with the safety controller",
        "Cart-pole episodic learning with chance constraints and no safety trajectory",
        "Check LQR, safe set and model error bounds of an environment",
    };
    std::vector<std::pair<CLI::App *, safempc::ExperimentKind>> subs;
    for (std::size_t i = 0; i < std::size(verbs); ++i)
    {
        CLI::App *verb = app.add_subcommand(verbs[i].first, help[i]);
        add_common(verb, inv);
        subs.emplace_back(verb, verbs[i].second);
    }
    CLI11_PARSE(app, argc, argv);

    try
    {
        for (const auto &[verb, kind] : subs)
            if (verb->parsed())
                return run(kind, inv);
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
