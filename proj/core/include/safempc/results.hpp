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

#ifndef SAFEMPC_RESULTS_HPP_
#define SAFEMPC_RESULTS_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace safempc
{
    /// Version of the CSV/JSON result schema (see docs/results_schema.md).
    inline constexpr int kResultsSchemaVersion = 1;

    struct StepRecord
    {
        std::string setting;
        int repetition = 0;
        int episode = 0;
        int step = 0;
        Eigen::VectorXd state; ///< state at which the input was applied
        Eigen::VectorXd input;
        bool feasible = false;
        bool safe_policy_applied = false;
        int plan_age = 0;
        bool violation = false;
    };

    struct EpisodeRecord
    {
        std::string setting;
        int T = 0;
        int H = 0;
        int repetition = 0;
        int episode = 0;
        double cost = 0.0; ///< NaN for failed rollouts
        bool failed = false;
        int steps = 0;
        int infeasible_steps = 0;
    };

    struct TracePoint
    {
        std::string setting;
        int T = 0;
        int H = 0;
        int repetition = 0;
        int iteration = 0;
        double mutual_information = 0.0;
        int samples = 0;
        bool feasible = false;
    };

    struct SettingSummary
    {
        std::string setting;
        int T = 0;
        int H = 0;
        int rollouts = 0;
        int failures = 0;
        double failure_ratio = 0.0;
        /// Mean C_ep per episode index over successful rollouts (NaN when none succeeded).
        std::vector<double> episode_cost_mean;
        double final_cost_mean = 0.0;
        int final_cost_count = 0;
        /// Mean mutual information per iteration over repetitions.
        std::vector<double> mi_mean;
        double final_mi_mean = 0.0;
        int infeasible_steps = 0;
    };

    struct RunRecord
    {
        std::string experiment;
        std::string config_hash;
        std::string config_json;
        std::uint64_t seed = 0;
        bool safempc_mode = true; ///< false for the cautious baseline
        std::vector<StepRecord> steps;
        std::vector<EpisodeRecord> episodes;
        std::vector<TracePoint> traces;
        std::vector<SettingSummary> settings; ///< filled by summarize()
        std::vector<std::pair<std::string, double>> diagnostics;

        /// Failed rollouts in settings with a safety trajectory (T >= 1).
        int safety_violations() const;
    };

    /// Aggregate episodes and traces into per-setting summaries (order of first appearance).
    std::vector<SettingSummary> summarize(const std::vector<EpisodeRecord> &episodes,
                                          const std::vector<TracePoint> &traces);

    void write_steps_csv(const RunRecord &record, std::ostream &os);
    void write_episodes_csv(const RunRecord &record, std::ostream &os);
    void write_traces_csv(const RunRecord &record, std::ostream &os);
    std::string summary_json(const RunRecord &record);

    std::vector<EpisodeRecord> read_episodes_csv(std::istream &is);
    std::vector<TracePoint> read_traces_csv(std::istream &is);

    /// Write steps.csv, episodes.csv, traces.csv, summary.json and config.json into @p out_dir.
    void emit_results(const RunRecord &record, const std::string &out_dir);

} // namespace safempc

#endif // SAFEMPC_RESULTS_HPP_
