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

#include "safempc/safe_mpc.hpp"

#include "safempc/errors.hpp"
#include "safempc/performance.hpp"

#include <cmath>
#include <random>

namespace safempc
{
    namespace
    {
        constexpr double kInf = std::numeric_limits<double>::infinity();

        struct Layout
        {
            Eigen::Index p = 0, q = 0;
            int T = 0, H = 0, r = 0;
            bool x0 = false;

            explicit Layout(const MPCProblem &problem)
                : p(problem.state_dim()), q(problem.input_dim()), T(problem.T), H(problem.H),
                  r(problem.coupled_inputs()), x0(problem.optimize_initial_state)
            {
            }

            Eigen::Index x0_size() const { return x0 ? p : 0; }
            Eigen::Index k_offset() const { return x0_size(); }
            Eigen::Index perf_offset() const { return k_offset() + T * q; }
            Eigen::Index size() const { return perf_offset() + (H - r) * q; }

            Eigen::VectorXd pack(const PlanGuess &guess) const
            {
                Eigen::VectorXd v(size());
                if (x0)
                    v.head(p) = guess.x0;
                for (int t = 0; t < T; ++t)
                    v.segment(k_offset() + t * q, q) = guess.k.col(t);
                for (int t = r; t < H; ++t)
                    v.segment(perf_offset() + (t - r) * q, q) = guess.u_perf.col(t);
                return v;
            }

            PlanGuess unpack(const Eigen::VectorXd &v, const Eigen::VectorXd &x_t) const
            {
                PlanGuess g;
                g.x0 = x0 ? Eigen::VectorXd(v.head(p)) : x_t;
                g.k.resize(q, T);
                for (int t = 0; t < T; ++t)
                    g.k.col(t) = v.segment(k_offset() + t * q, q);
                g.u_perf.resize(q, H);
                for (int t = 0; t < H; ++t)
                    g.u_perf.col(t) = t < r ? Eigen::VectorXd(g.k.col(t))
                                            : Eigen::VectorXd(v.segment(perf_offset() + (t - r) * q, q));
                return g;
            }
        };

        /// Safety trajectory only (no performance chain).
        void propagate_safety(const MPCProblem &problem, const Eigen::VectorXd &x0, const Eigen::MatrixXd &k,
                              PlanEvaluation &plan)
        {
            plan.ellipsoids.clear();
            plan.laws.clear();
            if (problem.T == 0)
            {
                return;
            }
            plan.ellipsoids.reserve(static_cast<std::size_t>(problem.T) + 1);
            plan.ellipsoids.push_back(Ellipsoid::point(x0));
            for (int t = 0; t < problem.T; ++t)
            {
                const auto ti = static_cast<std::size_t>(t);
                plan.laws.emplace_back(problem.gains[ti], k.col(t), plan.ellipsoids.back().center());
                plan.ellipsoids.push_back(one_step(plan.ellipsoids.back(), plan.laws.back(), *problem.prior,
                                                   *problem.gp, problem.lipschitz, problem.scheme));
            }
        }

        bool needs_beliefs(const MPCProblem &problem)
        {
            return problem.H > 0 && (problem.objective->needs_performance_chain() || problem.chance_kappa);
        }

        /// Soft input bounds on uncoupled performance inputs and chance constraints on the beliefs.
        Eigen::VectorXd auxiliary_residuals(const MPCProblem &problem, const PlanEvaluation &plan)
        {
            const Polytope &U = problem.constraints->control();
            const int r = problem.coupled_inputs();
            std::vector<double> out;
            if (problem.bound_performance_inputs)
            {
                for (int t = r; t < problem.H; ++t)
                {
                    const Eigen::VectorXd res = U.residuals(plan.u_perf.col(t));
                    out.insert(out.end(), res.data(), res.data() + res.size());
                }
            }
            if (problem.chance_kappa && problem.constraints->state() && !plan.beliefs.empty())
            {
                const Polytope &X = *problem.constraints->state();
                for (std::size_t t = 1; t < plan.beliefs.size(); ++t)
                {
                    const auto &B = plan.beliefs[t];
                    for (Eigen::Index i = 0; i < X.rows(); ++i)
                    {
                        const Eigen::VectorXd a = X.H().row(i).transpose();
                        const double sd = std::sqrt(std::max(0.0, a.dot(B.cov * a)));
                        out.push_back(a.dot(B.mean) + *problem.chance_kappa * sd - X.h()(i));
                    }
                }
            }
            return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
        }

        class MpcPenalty : public PenaltyFunction
        {
        public:
            explicit MpcPenalty(const MPCProblem &problem) : problem_(problem), layout_(problem)
            {
                analytic_ = problem.H > 0 && problem.prior->is_linear() &&
                            problem.objective->performance_stage_cost() != nullptr;
            }

            Eigen::Index dim() const override { return layout_.size(); }

            void evaluate(const Eigen::VectorXd &v, double &f, Eigen::VectorXd &g) const override
            {
                const PlanEvaluation plan = evaluate_plan(problem_, layout_.unpack(v, problem_.x_t));
                f = problem_.objective->value(plan, *problem_.gp);
                const Eigen::VectorXd gs = problem_.T > 0 ? safety_residuals(problem_, plan).residuals
                                                          : Eigen::VectorXd(0);
                const Eigen::VectorXd ga = auxiliary_residuals(problem_, plan);
                g.resize(gs.size() + ga.size());
                g << gs, ga;
            }

            double merit(const Eigen::VectorXd &v, double rho, double margin, double fd_step,
                         Eigen::VectorXd *grad) const override
            {
                if (!analytic_)
                {
                    return PenaltyFunction::merit(v, rho, margin, fd_step, grad);
                }
                try
                {
                    return analytic_merit(v, rho, margin, fd_step, grad);
                }
                catch (const std::exception &)
                {
                    return kInf;
                }
            }

        private:
            double safety_penalty(const Eigen::VectorXd &x0, const Eigen::MatrixXd &k, double rho,
                                  double margin) const
            {
                if (problem_.T == 0)
                    return 0.0;
                PlanEvaluation plan;
                plan.x0 = x0;
                plan.k = k;
                propagate_safety(problem_, x0, k, plan);
                return penalty_merit(0.0, safety_residuals(problem_, plan).residuals, rho, margin);
            }

            double analytic_merit(const Eigen::VectorXd &v, double rho, double margin, double fd_step,
                                  Eigen::VectorXd *grad) const
            {
                const Layout &L = layout_;
                const PlanGuess vars = L.unpack(v, problem_.x_t);
                const Polytope &U = problem_.constraints->control();

                // safety chain
                const double phi_safe = safety_penalty(vars.x0, vars.k, rho, margin);
                if (!std::isfinite(phi_safe))
                    return kInf;

                // soft input bounds (linear in the inputs)
                double phi_bounds = 0.0;
                Eigen::MatrixXd d_bounds = Eigen::MatrixXd::Zero(L.q, L.H);
                if (problem_.bound_performance_inputs)
                {
                    for (int t = L.r; t < L.H; ++t)
                    {
                        const Eigen::VectorXd act = (U.residuals(vars.u_perf.col(t)).array() + margin).max(0.0);
                        phi_bounds += rho * act.squaredNorm();
                        d_bounds.col(t) = 2.0 * rho * U.H().transpose() * act;
                    }
                }

                // performance chain with the chance-constraint penalty folded into the stage cost
                const StageCost &stage_cost = *problem_.objective->performance_stage_cost();
                const std::optional<Polytope> &X = problem_.constraints->state();
                const std::optional<double> kappa = problem_.chance_kappa;
                const StageFunction stage = [&](int t, const GaussianBelief &B, Eigen::VectorXd *dm,
                                                Eigen::MatrixXd *dS)
                {
                    double c = stage_cost(t, B, dm, dS);
                    if (kappa && X)
                    {
                        for (Eigen::Index i = 0; i < X->rows(); ++i)
                        {
                            const Eigen::VectorXd a = X->H().row(i).transpose();
                            const double var = std::max(0.0, a.dot(B.cov * a));
                            const double sd = std::sqrt(var);
                            const double act = a.dot(B.mean) + *kappa * sd - X->h()(i) + margin;
                            if (act <= 0.0)
                                continue;
                            c += rho * act * act;
                            if (dm)
                                *dm += 2.0 * rho * act * a;
                            if (dS && sd > 1e-12)
                                *dS += (2.0 * rho * act * *kappa / (2.0 * sd)) * a * a.transpose();
                        }
                    }
                    return c;
                };
                Eigen::MatrixXd d_inputs;
                Eigen::VectorXd d_m0;
                const double phi_perf =
                    performance_cost_gradient(GaussianBelief::point(vars.x0), vars.u_perf, *problem_.gp,
                                              *problem_.prior, stage, grad ? &d_inputs : nullptr,
                                              grad && L.x0 ? &d_m0 : nullptr);
                const double phi = phi_safe + phi_bounds + phi_perf;
                if (!std::isfinite(phi))
                    return kInf;

                if (grad)
                {
                    grad->setZero(v.size());
                    d_inputs += d_bounds;
                    if (L.x0)
                        grad->head(L.p) += d_m0;
                    for (int t = 0; t < L.H; ++t)
                    {
                        if (t < L.r)
                            grad->segment(L.k_offset() + t * L.q, L.q) += d_inputs.col(t);
                        else
                            grad->segment(L.perf_offset() + (t - L.r) * L.q, L.q) += d_inputs.col(t);
                    }
                    // Safety residual penalty: finite differences over (x0, k), only when active.
                    if (phi_safe > 0.0)
                    {
                        Eigen::VectorXd w = v;
                        const Eigen::Index n_safe = L.perf_offset();
                        for (Eigen::Index i = 0; i < n_safe; ++i)
                        {
                            const double h = fd_step * std::max(1.0, std::abs(v(i)));
                            w(i) = v(i) + h;
                            const PlanGuess wi = L.unpack(w, problem_.x_t);
                            double phi_i = kInf;
                            try
                            {
                                phi_i = safety_penalty(wi.x0, wi.k, rho, margin);
                            }
                            catch (const std::exception &)
                            {
                            }
                            (*grad)(i) += (phi_i - phi_safe) / h;
                            w(i) = v(i);
                        }
                    }
                    if (!grad->allFinite())
                        return kInf;
                }
                return phi;
            }

            const MPCProblem &problem_;
            Layout layout_;
            bool analytic_ = false;
        };

        HyperRectangle control_box(const MPCProblem &problem)
        {
            return bounding_box(problem.constraints->control());
        }

        Eigen::VectorXd uniform_in(const HyperRectangle &box, double spread, std::mt19937_64 &rng)
        {
            std::uniform_real_distribution<double> unif(-1.0, 1.0);
            Eigen::VectorXd x(box.center.size());
            for (Eigen::Index i = 0; i < x.size(); ++i)
                x(i) = box.center(i) + spread * box.half_widths(i) * unif(rng);
            return x;
        }
    } // namespace

    // ---------------------------------------------------------------- SafePolicy

    Eigen::VectorXd SafePolicy::clamp(const Eigen::VectorXd &u) const
    {
        return u.cwiseMax(u_lo).cwiseMin(u_hi);
    }

    Eigen::VectorXd SafePolicy::operator()(const Eigen::VectorXd &x) const
    {
        return clamp(-K * x);
    }

    // ---------------------------------------------------------------- problem

    int MPCProblem::coupled_inputs() const
    {
        if (H <= 0 || T <= 0)
            return 0;
        return std::min({r, T, H});
    }

    void MPCProblem::validate() const
    {
        if (!prior || !gp || !constraints || !objective)
            throw InvalidInputError("MPCProblem: prior, gp, constraints and objective are required");
        const Eigen::Index p = state_dim(), q = input_dim();
        if (T < 0 || H < 0 || (T == 0 && H == 0))
            throw InvalidInputError("MPCProblem: need T >= 1 or a performance trajectory");
        if (x_t.size() != p || !x_t.allFinite())
            throw InvalidInputError("MPCProblem: current state must be finite with state dimension");
        if (static_cast<int>(gains.size()) != T)
            throw InvalidInputError("MPCProblem: one feedback gain per safety step required");
        for (const auto &K : gains)
            if (K.rows() != q || K.cols() != p)
                throw InvalidInputError("MPCProblem: feedback gains must be q x p");
        if (gp->input_dim() != p + q || gp->output_dim() != p)
            throw InvalidInputError("MPCProblem: GP dimensions do not match the prior model");
        if (constraints->state_dim() != p || constraints->input_dim() != q)
            throw InvalidInputError("MPCProblem: constraint dimensions do not match the prior model");
        if (H > 0 && T > 0 && (r < 1 || r > std::min(T, H)))
            throw InvalidInputError("MPCProblem: coupling length must satisfy 1 <= r <= min(T, H)");
        if (safe_policy.K.rows() != q || safe_policy.K.cols() != p)
            throw InvalidInputError("MPCProblem: safe policy gain must be q x p");
        lipschitz.validate(p);
    }

    std::string ResidualReport::worst_label() const
    {
        if (worst_index < 0 || worst_index >= static_cast<int>(labels.size()))
            return "";
        return labels[static_cast<std::size_t>(worst_index)];
    }

    Eigen::VectorXd SafetyPlan::first_input() const
    {
        if (!laws.empty())
            return laws.front()(x0);
        if (u_perf.cols() > 0)
            return u_perf.col(0);
        throw InvalidInputError("SafetyPlan: empty plan");
    }

    PlanEvaluation evaluate_plan(const MPCProblem &problem, const PlanGuess &vars)
    {
        PlanEvaluation plan;
        plan.x0 = problem.optimize_initial_state ? vars.x0 : problem.x_t;
        plan.k = vars.k;
        const int r = problem.coupled_inputs();
        plan.u_perf = vars.u_perf;
        for (int t = 0; t < r; ++t)
            plan.u_perf.col(t) = plan.k.col(t);
        propagate_safety(problem, plan.x0, plan.k, plan);
        if (needs_beliefs(problem))
            plan.beliefs = performance_rollout(GaussianBelief::point(plan.x0), plan.u_perf, *problem.gp, *problem.prior);
        return plan;
    }

    ResidualReport safety_residuals(const MPCProblem &problem, const PlanEvaluation &plan)
    {
        ResidualReport report;
        std::vector<double> values;
        auto add = [&](const Eigen::VectorXd &res, const std::string &prefix)
        {
            for (Eigen::Index i = 0; i < res.size(); ++i)
            {
                values.push_back(res(i));
                report.labels.push_back(prefix + "[" + std::to_string(i) + "]");
            }
        };
        const ConstraintSet &C = *problem.constraints;
        if (problem.optimize_initial_state && C.state())
            add(C.state()->residuals(plan.x0), "state_0");
        for (int t = 0; t < problem.T; ++t)
        {
            const auto ti = static_cast<std::size_t>(t);
            add(control_residuals(plan.ellipsoids[ti], plan.laws[ti], C.control()), "control_" + std::to_string(t));
            if (t >= 1)
                add(state_residuals(plan.ellipsoids[ti], C.state()), "state_" + std::to_string(t));
        }
        if (problem.T > 0)
            add(terminal_residuals(plan.ellipsoids.back(), C.safe()), "terminal");
        report.residuals = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
        if (report.residuals.size())
        {
            Eigen::Index idx = 0;
            report.max_residual = report.residuals.maxCoeff(&idx);
            report.worst_index = static_cast<int>(idx);
        }
        return report;
    }

    ResidualReport certify(const SafetyPlan &plan, const MPCProblem &problem)
    {
        PlanEvaluation eval;
        eval.x0 = plan.x0;
        Eigen::MatrixXd k(problem.input_dim(), static_cast<Eigen::Index>(plan.laws.size()));
        for (std::size_t t = 0; t < plan.laws.size(); ++t)
            k.col(static_cast<Eigen::Index>(t)) = plan.laws[t].k;
        eval.k = k;
        if (static_cast<int>(plan.laws.size()) != problem.T)
        {
            ResidualReport bad;
            bad.max_residual = kInf;
            return bad;
        }
        try
        {
            eval.ellipsoids.push_back(Ellipsoid::point(plan.x0));
            for (std::size_t t = 0; t < plan.laws.size(); ++t)
            {
                eval.laws.emplace_back(plan.laws[t].K, plan.laws[t].k, eval.ellipsoids.back().center());
                eval.ellipsoids.push_back(one_step(eval.ellipsoids.back(), eval.laws.back(), *problem.prior,
                                                   *problem.gp, problem.lipschitz, problem.scheme));
            }
            return safety_residuals(problem, eval);
        }
        catch (const std::exception &)
        {
            ResidualReport bad;
            bad.max_residual = kInf;
            return bad;
        }
    }

    PlanGuess safe_policy_guess(const MPCProblem &problem, const Eigen::VectorXd &x0)
    {
        const Eigen::Index p = problem.state_dim(), q = problem.input_dim();
        PlanGuess g;
        g.x0 = x0;
        g.k.resize(q, problem.T);
        g.u_perf.resize(q, problem.H);
        Eigen::VectorXd m = x0;
        for (int t = 0; t < std::max(problem.T, problem.H); ++t)
        {
            const Eigen::VectorXd u = problem.safe_policy(m);
            if (t < problem.T)
                g.k.col(t) = u;
            if (t < problem.H)
                g.u_perf.col(t) = u;
            Eigen::VectorXd z(p + q);
            z << m, u;
            m = (*problem.prior)(m, u) + problem.gp->predict(z).mean;
        }
        return g;
    }

    SafetyPlan solve(const MPCProblem &problem, const std::optional<PlanGuess> &warm_start, const SolverConfig &config)
    {
        problem.validate();
        const Layout layout(problem);
        std::mt19937_64 rng(config.seed);

        std::vector<PlanGuess> starts;
        if (config.use_warm_start && warm_start)
            starts.push_back(*warm_start);
        if (config.use_safe_start)
        {
            try
            {
                starts.push_back(safe_policy_guess(problem, problem.x_t));
            }
            catch (const std::exception &)
            {
            }
        }
        const HyperRectangle ubox = control_box(problem);
        std::optional<HyperRectangle> xbox;
        if (problem.optimize_initial_state)
            xbox = bounding_box(problem.constraints->safe());
        const int n_random = std::max(0, config.multistarts - static_cast<int>(starts.size()));
        for (int s = 0; s < n_random; ++s)
        {
            PlanGuess g;
            g.x0 = xbox ? uniform_in(*xbox, config.initial_state_spread, rng) : problem.x_t;
            g.k.resize(layout.q, problem.T);
            g.u_perf.resize(layout.q, problem.H);
            for (int t = 0; t < problem.T; ++t)
                g.k.col(t) = uniform_in(ubox, 1.0, rng);
            for (int t = 0; t < problem.H; ++t)
                g.u_perf.col(t) = uniform_in(ubox, 1.0, rng);
            starts.push_back(std::move(g));
        }

        const MpcPenalty penalty(problem);
        SafetyPlan best;
        double best_violation = kInf;
        for (std::size_t s = 0; s < starts.size(); ++s)
        {
            SafetyPlan plan;
            try
            {
                const PlanGuess &g = starts[s];
                if (g.k.cols() != problem.T || g.u_perf.cols() != problem.H ||
                    (problem.optimize_initial_state && g.x0.size() != layout.p))
                    continue;
                const OptimizeResult res = minimize_penalty(penalty, layout.pack(g), config.penalty);
                if (!res.valid)
                    continue;
                const PlanEvaluation eval = evaluate_plan(problem, layout.unpack(res.x, problem.x_t));
                plan.x0 = eval.x0;
                plan.laws = eval.laws;
                plan.ellipsoids = eval.ellipsoids;
                plan.u_perf = eval.u_perf;
                plan.beliefs = eval.beliefs;
                plan.objective = problem.objective->value(eval, *problem.gp);
                const Eigen::VectorXd aux = auxiliary_residuals(problem, eval);
                plan.aux_violation = aux.size() ? std::max(0.0, aux.maxCoeff()) : 0.0;
                plan.start_index = static_cast<int>(s);
                plan.iterations = res.iterations;
                if (problem.T > 0)
                {
                    plan.report = certify(plan, problem);
                    plan.certified = plan.report.max_residual <= config.tol_feas;
                    plan.feasible = plan.certified;
                }
                else
                {
                    plan.feasible = plan.aux_violation <= config.tol_feas;
                }
            }
            catch (const std::exception &)
            {
                continue;
            }
            if (!std::isfinite(plan.objective))
                continue;
            const double violation = std::max(problem.T > 0 ? plan.report.max_residual : 0.0,
                                               problem.T > 0 ? 0.0 : plan.aux_violation);
            const bool better = plan.feasible ? (!best.feasible || plan.objective < best.objective)
                                              : (!best.feasible && violation < best_violation);
            if (better)
            {
                best_violation = violation;
                best = std::move(plan);
            }
        }
        if (best.x0.size() == 0)
            best.x0 = problem.x_t;
        return best;
    }

    // ---------------------------------------------------------------- controller

    SafeMpcController::SafeMpcController(int T, SafePolicy policy) : T_(T), policy_(std::move(policy))
    {
        if (T_ < 1)
            throw InvalidInputError("SafeMpcController: horizon must be >= 1");
    }

    ControllerState SafeMpcController::initial_state() const
    {
        ControllerState state;
        state.plan.assign(static_cast<std::size_t>(T_), PlanEntry{});
        return state;
    }

    PlanGuess SafeMpcController::warm_start(const ControllerState &state, const MPCProblem &problem) const
    {
        const Eigen::Index p = problem.state_dim(), q = problem.input_dim();
        PlanGuess g = safe_policy_guess(problem, problem.x_t);
        Eigen::VectorXd m = problem.x_t;
        for (int t = 0; t < T_; ++t)
        {
            const std::size_t src = static_cast<std::size_t>(t) + 1;
            Eigen::VectorXd u;
            if (src < state.plan.size() && !state.plan[src].safe_policy)
                u = state.plan[src].law(m);
            else
                u = policy_(m);
            g.k.col(t) = u;
            Eigen::VectorXd z(p + q);
            z << m, u;
            m = (*problem.prior)(m, u) + problem.gp->predict(z).mean;
        }
        if (state.last_u_perf.cols() == problem.H && problem.H > 1)
        {
            g.u_perf.leftCols(problem.H - 1) = state.last_u_perf.rightCols(problem.H - 1);
            g.u_perf.col(problem.H - 1) = state.last_u_perf.col(problem.H - 1);
        }
        return g;
    }

    StepResult SafeMpcController::step(ControllerState &state, const MPCProblem &problem, const SolverConfig &config,
                                       bool force_infeasible) const
    {
        if (problem.T != T_ || static_cast<int>(state.plan.size()) != T_)
            throw InvalidInputError("SafeMpcController::step: horizon mismatch");
        StepResult result;
        if (!force_infeasible)
        {
            SolverConfig cfg = config;
            cfg.seed = config.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(state.steps + 1);
            std::optional<PlanGuess> warm;
            try
            {
                warm = warm_start(state, problem);
            }
            catch (const std::exception &)
            {
            }
            result.plan = solve(problem, warm, cfg);
        }
        result.feasible = result.plan.feasible && result.plan.certified;
        if (result.feasible)
        {
            for (int t = 0; t < T_; ++t)
            {
                const auto ti = static_cast<std::size_t>(t);
                state.plan[ti].safe_policy = false;
                state.plan[ti].law = result.plan.laws[ti];
            }
            state.age = 0;
            state.last_u_perf = result.plan.u_perf;
        }
        else
        {
            state.plan.erase(state.plan.begin());
            state.plan.push_back(PlanEntry{});
            ++state.age;
            if (state.last_u_perf.cols() > 1)
            {
                const Eigen::Index H = state.last_u_perf.cols();
                const Eigen::MatrixXd shifted = state.last_u_perf.rightCols(H - 1);
                state.last_u_perf.leftCols(H - 1) = shifted;
            }
        }
        const PlanEntry &first = state.plan.front();
        result.safe_policy_applied = first.safe_policy;
        result.u = policy_.clamp(first.safe_policy ? Eigen::VectorXd(-policy_.K * problem.x_t)
                                                   : first.law(problem.x_t));
        result.age = state.age;
        ++state.steps;
        return result;
    }

} // namespace safempc
