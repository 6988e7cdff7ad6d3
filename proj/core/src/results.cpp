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

#include "safempc/results.hpp"

#include "safempc/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace safempc
{
    using nlohmann::json;

    int RunRecord::safety_violations() const
    {
        if (!safempc_mode)
            return 0;
        int n = 0;
        for (const auto &e : episodes)
            if (e.failed && e.T >= 1)
                ++n;
        return n;
    }

    std::vector<SettingSummary> summarize(const std::vector<EpisodeRecord> &episodes,
                                          const std::vector<TracePoint> &traces)
    {
        std::vector<SettingSummary> out;
        std::map<std::string, std::size_t> index;
        auto slot = [&](const std::string &name, int T, int H) -> SettingSummary &
        {
            auto it = index.find(name);
            if (it == index.end())
            {
                index[name] = out.size();
                SettingSummary s;
                s.setting = name;
                s.T = T;
                s.H = H;
                out.push_back(s);
                return out.back();
            }
            return out[it->second];
        };

        std::map<std::string, std::map<int, std::pair<double, int>>> costs;
        std::map<std::string, int> last_episode;
        for (const auto &e : episodes)
        {
            SettingSummary &s = slot(e.setting, e.T, e.H);
            ++s.rollouts;
            s.infeasible_steps += e.infeasible_steps;
            if (e.failed)
                ++s.failures;
            else if (std::isfinite(e.cost))
            {
                auto &acc = costs[e.setting][e.episode];
                acc.first += e.cost;
                ++acc.second;
            }
            auto &le = last_episode.try_emplace(e.setting, e.episode).first->second;
            le = std::max(le, e.episode);
        }
        std::map<std::string, std::map<int, std::pair<double, int>>> mi;
        for (const auto &t : traces)
        {
            slot(t.setting, t.T, t.H);
            auto &acc = mi[t.setting][t.iteration];
            acc.first += t.mutual_information;
            ++acc.second;
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (auto &s : out)
        {
            s.failure_ratio = s.rollouts > 0 ? static_cast<double>(s.failures) / s.rollouts : 0.0;
            s.final_cost_mean = nan;
            if (auto it = last_episode.find(s.setting); it != last_episode.end())
            {
                for (int ep = 0; ep <= it->second; ++ep)
                {
                    const auto &acc = costs[s.setting][ep];
                    s.episode_cost_mean.push_back(acc.second > 0 ? acc.first / acc.second : nan);
                }
                const auto &fin = costs[s.setting][it->second];
                s.final_cost_count = fin.second;
                s.final_cost_mean = fin.second > 0 ? fin.first / fin.second : nan;
            }
            s.final_mi_mean = nan;
            if (auto it = mi.find(s.setting); it != mi.end())
            {
                for (const auto &[iter, acc] : it->second)
                {
                    (void)iter;
                    s.mi_mean.push_back(acc.first / acc.second);
                }
                s.final_mi_mean = s.mi_mean.back();
            }
        }
        return out;
    }

    namespace
    {
        void header(const RunRecord &r, std::ostream &os)
        {
            os << "# safempc-results schema=" << kResultsSchemaVersion << " experiment=" << r.experiment
               << " config_hash=" << r.config_hash << " seed=" << r.seed << "\n";
        }

        std::vector<std::string> split(const std::string &line)
        {
            std::vector<std::string> out;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
                out.push_back(cell);
            return out;
        }

        double to_double(const std::string &s)
        {
            if (s.empty() || s.find("nan") != std::string::npos || s.find("NaN") != std::string::npos)
                return std::numeric_limits<double>::quiet_NaN();
            return std::stod(s);
        }

        /// Rows of a results CSV (comment lines skipped) keyed by column name.
        std::vector<std::map<std::string, std::string>> read_rows(std::istream &is)
        {
            std::vector<std::map<std::string, std::string>> rows;
            std::vector<std::string> cols;
            std::string line;
            while (std::getline(is, line))
            {
                if (line.empty() || line[0] == '#')
                    continue;
                const auto cells = split(line);
                if (cols.empty())
                {
                    cols = cells;
                    continue;
                }
                if (cells.size() != cols.size())
                    throw InvalidInputError("results CSV: row width does not match the header");
                std::map<std::string, std::string> row;
                for (std::size_t i = 0; i < cols.size(); ++i)
                    row[cols[i]] = cells[i];
                rows.push_back(std::move(row));
            }
            return rows;
        }

        json number(double v)
        {
            return std::isfinite(v) ? json(v) : json(nullptr);
        }

        json numbers(const std::vector<double> &v)
        {
            json a = json::array();
            for (double x : v)
                a.push_back(number(x));
            return a;
        }
    } // namespace

    void write_steps_csv(const RunRecord &r, std::ostream &os)
    {
        header(r, os);
        const Eigen::Index p = r.steps.empty() ? 0 : r.steps.front().state.size();
        const Eigen::Index q = r.steps.empty() ? 0 : r.steps.front().input.size();
        os << "setting,repetition,episode,step";
        for (Eigen::Index i = 0; i < p; ++i)
            os << ",x_" << i;
        for (Eigen::Index i = 0; i < q; ++i)
            os << ",u_" << i;
        os << ",feasible,safe_policy,plan_age,violation\n";
        os.precision(17);
        for (const auto &s : r.steps)
        {
            os << s.setting << ',' << s.repetition << ',' << s.episode << ',' << s.step;
            for (Eigen::Index i = 0; i < p; ++i)
                os << ',' << s.state(i);
            for (Eigen::Index i = 0; i < q; ++i)
                os << ',' << s.input(i);
            os << ',' << s.feasible << ',' << s.safe_policy_applied << ',' << s.plan_age << ',' << s.violation
               << "\n";
        }
    }

    void write_episodes_csv(const RunRecord &r, std::ostream &os)
    {
        header(r, os);
        os << "setting,T,H,repetition,episode,cost,failed,steps,infeasible_steps\n";
        os.precision(17);
        for (const auto &e : r.episodes)
            os << e.setting << ',' << e.T << ',' << e.H << ',' << e.repetition << ',' << e.episode << ','
               << e.cost << ','
               << e.failed << ',' << e.steps << ',' << e.infeasible_steps << "\n";
    }

    void write_traces_csv(const RunRecord &r, std::ostream &os)
    {
        header(r, os);
        os << "setting,T,H,repetition,iteration,mutual_information,samples,feasible\n";
        os.precision(17);
        for (const auto &t : r.traces)
            os << t.setting << ',' << t.T << ',' << t.H << ',' << t.repetition << ',' << t.iteration << ','
               << t.mutual_information << ',' << t.samples << ',' << t.feasible << "\n";
    }

    std::vector<EpisodeRecord> read_episodes_csv(std::istream &is)
    {
        std::vector<EpisodeRecord> out;
        for (const auto &row : read_rows(is))
        {
            EpisodeRecord e;
            e.setting = row.at("setting");
            e.T = std::stoi(row.at("T"));
            e.H = std::stoi(row.at("H"));
            e.repetition = std::stoi(row.at("repetition"));
            e.episode = std::stoi(row.at("episode"));
            e.cost = to_double(row.at("cost"));
            e.failed = row.at("failed") == "1";
            e.steps = std::stoi(row.at("steps"));
            e.infeasible_steps = std::stoi(row.at("infeasible_steps"));
            out.push_back(e);
        }
        return out;
    }

    std::vector<TracePoint> read_traces_csv(std::istream &is)
    {
        std::vector<TracePoint> out;
        for (const auto &row : read_rows(is))
        {
            TracePoint t;
            t.setting = row.at("setting");
            t.T = std::stoi(row.at("T"));
            t.H = std::stoi(row.at("H"));
            t.repetition = std::stoi(row.at("repetition"));
            t.iteration = std::stoi(row.at("iteration"));
            t.mutual_information = to_double(row.at("mutual_information"));
            t.samples = std::stoi(row.at("samples"));
            t.feasible = row.at("feasible") == "1";
            out.push_back(t);
        }
        return out;
    }

    std::string summary_json(const RunRecord &r)
    {
        json j;
        j["schema_version"] = kResultsSchemaVersion;
        j["experiment"] = r.experiment;
        j["config_hash"] = r.config_hash;
        j["seed"] = r.seed;
        j["safempc_mode"] = r.safempc_mode;
        j["safety_violations"] = r.safety_violations();
        json settings = json::array();
        for (const auto &s : summarize(r.episodes, r.traces))
        {
            settings.push_back({{"setting", s.setting},
                                {"T", s.T},
                                {"H", s.H},
                                {"rollouts", s.rollouts},
                                {"failures", s.failures},
                                {"failure_ratio", number(s.failure_ratio)},
                                {"episode_cost_mean", numbers(s.episode_cost_mean)},
                                {"final_cost_mean", number(s.final_cost_mean)},
                                {"final_cost_count", s.final_cost_count},
                                {"mi_mean", numbers(s.mi_mean)},
                                {"final_mi_mean", number(s.final_mi_mean)},
                                {"infeasible_steps", s.infeasible_steps}});
        }
        j["settings"] = settings;
        json diag = json::object();
        for (const auto &[k, v] : r.diagnostics)
            diag[k] = number(v);
        j["diagnostics"] = diag;
        return j.dump(2);
    }

    void emit_results(const RunRecord &record, const std::string &out_dir)
    {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec)
            throw Error("emit_results: cannot create '" + out_dir + "': " + ec.message());
        auto open = [&](const std::string &name)
        {
            std::ofstream os(fs::path(out_dir) / name);
            if (!os)
                throw Error("emit_results: cannot write '" + name + "'");
            return os;
        };
        {
            auto os = open("steps.csv");
            write_steps_csv(record, os);
        }
        {
            auto os = open("episodes.csv");
            write_episodes_csv(record, os);
        }
        {
            auto os = open("traces.csv");
            write_traces_csv(record, os);
        }
        {
            auto os = open("summary.json");
            os << summary_json(record) << "\n";
        }
        {
            auto os = open("config.json");
            json cfg = record.config_json.empty() ? json::object() : json::parse(record.config_json);
            json wrapped = {{"schema_version", kResultsSchemaVersion},
                            {"config_hash", record.config_hash},
                            {"config", cfg}};
            os << wrapped.dump(2) << "\n";
        }
    }

} // namespace safempc
