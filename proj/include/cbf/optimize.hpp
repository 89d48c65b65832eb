#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cbf/cost.hpp"

namespace cbf {

/// Distributed optimal-control problem: steer the state toward the
/// references in `cost` by a control acting through cost.D.
struct ControlProblem {
    GridSpec grid;
    CbfParams params;
    ForcingSpec f;
    SpectralVecField u0;
    CostConfig cost;
    double T = 0.25;
    double dt = 1e-3;

    int n_steps() const { return static_cast<int>(std::llround(T / dt)); }
    size_t n_nodes() const { return static_cast<size_t>(n_steps()) + 1; }

    FieldSeries zero_control() const {
        return FieldSeries(n_nodes(), SpectralVecField(grid));
    }
};

/// Weighted inner product on control vectors (trapezoid-in-time for
/// distributed controls, plain H for a single initial-data field).
struct ControlMetric {
    std::vector<double> w;

    static ControlMetric trapezoid(size_t n_nodes, double dt) {
        ControlMetric m;
        m.w = detail::trapezoid_weights(n_nodes);
        for (auto& v : m.w) v *= dt;
        return m;
    }
    static ControlMetric single() { return ControlMetric{{1.0}}; }

    double dot(const FieldSeries& a, const FieldSeries& b) const {
        double acc = 0.0;
        for (size_t k = 0; k < w.size(); ++k)
            acc += w[k] * inner_product(a[k], b[k], Space::H);
        return acc;
    }
    double norm(const FieldSeries& a) const { return std::sqrt(std::max(0.0, dot(a, a))); }
};

inline void axpy(double a, const FieldSeries& x, FieldSeries& y) {
    for (size_t k = 0; k < y.size(); ++k) y[k].add_scaled(a, x[k]);
}

struct GradientEval {
    double cost = 0.0;
    FieldSeries grad;          // gradient density: 2 w_control U + D* pbar
    double pontryagin = 0.0;   // minimum-principle residual at this iterate
    ForwardResult fwd;
    AdjointSolution adj;
};

/// Time-integrated defect of the minimum principle,
/// int w_control || U + D* p / (2 w_control) ||^2 dt; zero exactly when the
/// first-order condition U = -D* p / (2 w_control) holds at every node.
inline double pontryagin_residual(const FieldSeries& U, const AdjointSolution& adj,
                                  const CostConfig& cfg, double dt) {
    cfg.validate();
    const size_t n_nodes = adj.source_dual.size();
    const auto c = detail::trapezoid_weights(n_nodes);
    const DealiasRule rule = adj.p.grid.dealias_rule;
    double acc = 0.0;
    for (size_t k = 0; k < n_nodes; ++k) {
        SpectralVecField v = cfg.D.apply_adjoint(adj.source_dual[k], rule);
        v *= 1.0 / (2.0 * cfg.w_control);
        if (!U.empty()) v += U[k];
        acc += c[k] * dt * norm_H2(v);
    }
    return cfg.w_control * acc;
}

inline GradientEval cost_and_gradient(const ControlProblem& prob, const FieldSeries& U) {
    GradientEval ev;
    ev.fwd = solve_forward(prob.u0, prob.params, prob.cost.D, U, prob.f, prob.T, prob.dt, 1);
    ev.cost = evaluate_cost(ev.fwd.traj, U, prob.cost, prob.params);
    const AdjointSpec spec = cost_adjoint_spec(ev.fwd.traj, prob.cost, prob.params);
    ev.adj = solve_adjoint(ev.fwd.traj, prob.params, spec);
    const DealiasRule rule = effective_rule(prob.grid, prob.params.r);
    const size_t n_nodes = prob.n_nodes();
    ev.grad.reserve(n_nodes);
    for (size_t k = 0; k < n_nodes; ++k) {
        SpectralVecField g = prob.cost.D.apply_adjoint(ev.adj.source_dual[k], rule);
        if (!U.empty()) g.add_scaled(2.0 * prob.cost.w_control, U[k]);
        ev.grad.push_back(std::move(g));
    }
    ev.pontryagin = pontryagin_residual(U, ev.adj, prob.cost, prob.dt);
    return ev;
}

/// Spec surface: the cost gradient as a time series in the control space.
inline FieldSeries gradient_distributed(const FieldSeries& controls, const ControlProblem& prob) {
    return cost_and_gradient(prob, controls).grad;
}

enum class OptimMethod { GradientDescent, NonlinearCG, LBFGS };

struct OptimizerConfig {
    OptimMethod method = OptimMethod::LBFGS;
    int lbfgs_memory = 10;
    double armijo_c1 = 1e-4;
    double backtrack_rho = 0.5;
    int max_backtracks = 40;
    double grad_tol = 1e-6; // relative to the initial gradient norm
    int max_iters = 100;
    uint64_t seed = 0;

    void validate() const {
        if (!(armijo_c1 > 0 && armijo_c1 < 1))
            throw std::invalid_argument("OptimizerConfig: need 0 < c1 < 1");
        if (!(backtrack_rho > 0 && backtrack_rho < 1))
            throw std::invalid_argument("OptimizerConfig: need 0 < rho < 1");
    }
};

struct OptimIterate {
    int iter = 0;
    double cost = 0.0;
    double grad_norm = 0.0;
    double step = 0.0;
    double pontryagin = 0.0;
};

struct OptimReport {
    std::vector<OptimIterate> history;
    std::string termination;
    double wall_seconds = 0.0;
    double final_cost = 0.0;
    double final_grad_norm = 0.0;
    double final_pontryagin = 0.0;
};

namespace detail {

struct EvalPoint {
    double cost = 0.0;
    FieldSeries grad;
    double pontryagin = 0.0;
};

/// Armijo-backtracked descent with GD, Polak-Ribiere CG, or limited-memory
/// BFGS directions, all in the supplied control metric. `value` is a
/// cost-only evaluation, `value_grad` the full one.
inline std::pair<FieldSeries, OptimReport>
minimize(const std::function<double(const FieldSeries&)>& value,
         const std::function<EvalPoint(const FieldSeries&)>& value_grad, FieldSeries U,
         const OptimizerConfig& cfg, const ControlMetric& metric) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    OptimReport report;

    EvalPoint cur = value_grad(U);
    double gnorm = metric.norm(cur.grad);
    const double gnorm0 = gnorm;
    report.history.push_back({0, cur.cost, gnorm, 0.0, cur.pontryagin});

    std::deque<FieldSeries> mem_s, mem_y;
    std::deque<double> mem_rho;
    FieldSeries prev_grad;
    FieldSeries prev_dir;
    double prev_step = 0.0;

    const double tol = cfg.grad_tol * std::max(gnorm0, 1e-300);
    int iter = 0;
    int plateau = 0;
    if (gnorm <= tol || gnorm == 0.0) {
        report.termination = "converged_at_start";
    }
    while (report.termination.empty() && iter < cfg.max_iters) {
        // search direction d with <g, d> > 0; iterate moves along -d
        FieldSeries d;
        if (cfg.method == OptimMethod::LBFGS && !mem_s.empty()) {
            d = cur.grad;
            std::vector<double> a(mem_s.size());
            for (size_t i = mem_s.size(); i-- > 0;) {
                a[i] = mem_rho[i] * metric.dot(mem_s[i], d);
                axpy(-a[i], mem_y[i], d);
            }
            const double yy = metric.dot(mem_y.back(), mem_y.back());
            const double sy = 1.0 / mem_rho.back();
            const double h0 = sy / std::max(yy, 1e-300);
            for (auto& fk : d) fk *= h0;
            for (size_t i = 0; i < mem_s.size(); ++i) {
                const double b = mem_rho[i] * metric.dot(mem_y[i], d);
                axpy(a[i] - b, mem_s[i], d);
            }
        } else if (cfg.method == OptimMethod::NonlinearCG && !prev_grad.empty()) {
            FieldSeries diff = cur.grad;
            axpy(-1.0, prev_grad, diff);
            const double pg2 = metric.dot(prev_grad, prev_grad);
            const double beta = std::max(0.0, metric.dot(cur.grad, diff) / std::max(pg2, 1e-300));
            d = cur.grad;
            axpy(beta, prev_dir, d);
        } else {
            d = cur.grad;
        }
        double gd = metric.dot(cur.grad, d);
        if (!(gd > 0.0)) { // not a descent direction; fall back to steepest
            d = cur.grad;
            gd = gnorm * gnorm;
        }

        double step;
        if (cfg.method == OptimMethod::LBFGS && !mem_s.empty())
            step = 1.0;
        else if (prev_step > 0.0)
            step = prev_step / cfg.backtrack_rho;
        else
            step = 1.0 / std::max(gnorm, 1.0);

        bool accepted = false;
        double new_cost = 0.0;
        FieldSeries trial;
        for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
            trial = U;
            axpy(-step, d, trial);
            new_cost = value(trial);
            if (new_cost <= cur.cost - cfg.armijo_c1 * step * gd) {
                accepted = true;
                break;
            }
            step *= cfg.backtrack_rho;
        }
        if (!accepted) {
            report.termination = "line_search_failure";
            break;
        }

        FieldSeries s = trial;
        axpy(-1.0, U, s);
        prev_grad = cur.grad;
        prev_dir = d;
        prev_step = step;
        const double prev_cost = cur.cost;
        U = std::move(trial);
        cur = value_grad(U);
        cur.cost = new_cost;
        // decreases at rounding level mean the iteration has stalled
        if (prev_cost - new_cost <=
            16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(new_cost), 1e-300))
            ++plateau;
        else
            plateau = 0;
        gnorm = metric.norm(cur.grad);
        ++iter;
        report.history.push_back({iter, cur.cost, gnorm, step, cur.pontryagin});

        FieldSeries y = cur.grad;
        axpy(-1.0, prev_grad, y);
        const double sy = metric.dot(s, y);
        if (sy > 1e-300) {
            mem_s.push_back(std::move(s));
            mem_y.push_back(std::move(y));
            mem_rho.push_back(1.0 / sy);
            if (static_cast<int>(mem_s.size()) > cfg.lbfgs_memory) {
                mem_s.pop_front();
                mem_y.pop_front();
                mem_rho.pop_front();
            }
        }

        if (gnorm <= tol)
            report.termination = "gradient_tolerance";
        else if (plateau >= 2)
            report.termination = "cost_plateau";
    }
    if (report.termination.empty()) report.termination = "max_iterations";

    report.final_cost = cur.cost;
    report.final_grad_norm = gnorm;
    report.final_pontryagin = cur.pontryagin;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(U), std::move(report)};
}

} // namespace detail

/// Minimizes the distributed-control cost starting from U_init.
inline std::pair<FieldSeries, OptimReport> optimize_distributed(const ControlProblem& prob,
                                                                FieldSeries U_init,
                                                                const OptimizerConfig& cfg) {
    prob.cost.validate();
    const ControlMetric metric = ControlMetric::trapezoid(prob.n_nodes(), prob.dt);
    auto value = [&prob](const FieldSeries& U) {
        const auto fwd = solve_forward(prob.u0, prob.params, prob.cost.D, U, prob.f, prob.T,
                                       prob.dt, 1);
        return evaluate_cost(fwd.traj, U, prob.cost, prob.params);
    };
    auto value_grad = [&prob](const FieldSeries& U) {
        GradientEval ev = cost_and_gradient(prob, U);
        return detail::EvalPoint{ev.cost, std::move(ev.grad), ev.pontryagin};
    };
    return detail::minimize(value, value_grad, std::move(U_init), cfg, metric);
}

/// Second-order quadratic form at an optimal pair (r = 3): the perturbed
/// state z is solved with control U* + dU, u = z - u*, and
///   Q = w_track int ||u||^2 + w_enstrophy int ||grad u||^2
///     + w_control int ||dU||^2 + w_terminal ||u(T)||^2
///     - int <B(u,u), p> - beta int <2(u*.u)u + |u|^2 (u + u*), p>.
/// Nonnegative over feasible perturbations when (u*, U*) is optimal.
/// `scale_out`, when given, receives the positive quadratic part of Q, the
/// magnitude against which second-order slack is judged.
inline double second_order_form(const ControlProblem& prob, const FieldSeries& U_star,
                                const Trajectory& u_star_traj, const AdjointSolution& adj,
                                const FieldSeries& perturb_U, double* scale_out = nullptr) {
    if (prob.params.r != 3)
        throw std::invalid_argument("second_order_form: defined for r = 3 only");
    const size_t n_nodes = prob.n_nodes();
    if (perturb_U.size() != n_nodes)
        throw std::invalid_argument("second_order_form: perturbation not aligned");
    FieldSeries W = U_star.empty() ? prob.zero_control() : U_star;
    axpy(1.0, perturb_U, W);
    const auto pert = solve_forward(prob.u0, prob.params, prob.cost.D, W, prob.f, prob.T,
                                    prob.dt, 1);
    const auto c = detail::trapezoid_weights(n_nodes);
    const double dt = prob.dt;
    const auto& w = prob.cost;

    detail::StateSampler star(u_star_traj, prob.params);
    double quad = 0.0, bterm = 0.0, cterm = 0.0, ctrl = 0.0;
    for (size_t k = 0; k < n_nodes; ++k) {
        const SpectralVecField& ustar =
            k < static_cast<size_t>(u_star_traj.n_steps)
                ? star.step_data(static_cast<int>(k)).u
                : u_star_traj.final_state();
        const SpectralVecField u = pert.traj.stored[k] - ustar;
        quad += c[k] * dt * (w.w_track * norm_H2(u) + w.w_enstrophy * norm_V2(u));
        ctrl += c[k] * dt * w.w_control * norm_H2(perturb_U[k]);
        const SpectralVecField& p = adj.source_dual[k];
        bterm += c[k] * dt * trilinear_b(u, u, p);
        if (prob.params.beta != 0.0) {
            const PhysicalVecField up = to_physical(u);
            const PhysicalVecField sp = to_physical(ustar);
            const PhysicalVecField pp = to_physical(p);
            double acc = 0.0;
            for (size_t i = 0; i < up.size(); ++i) {
                const double su = sp.comp[0][i] * up.comp[0][i] + sp.comp[1][i] * up.comp[1][i];
                const double m2 = up.comp[0][i] * up.comp[0][i] + up.comp[1][i] * up.comp[1][i];
                for (int j = 0; j < 2; ++j)
                    acc += (2.0 * su * up.comp[j][i] +
                            m2 * (up.comp[j][i] + sp.comp[j][i])) *
                           pp.comp[j][i];
            }
            cterm += c[k] * dt * prob.params.beta * acc * prob.grid.cell_area();
        }
    }
    const double uT2 = norm_H2(pert.traj.final_state() - u_star_traj.final_state());
    if (scale_out) *scale_out = quad + ctrl + w.w_terminal * uT2;
    return quad + ctrl + w.w_terminal * uT2 - bterm - cterm;
}

struct MultistartResult {
    double T = 0.0;
    double max_pairwise_distance = 0.0;
    double optimum_norm = 0.0;
    double relative_spread = 0.0;
    std::vector<OptimReport> reports;
};

namespace detail {

/// Worker-thread cap from CBF_THREADS (>= 1); unset or invalid means serial.
inline int env_thread_cap() {
    const char* v = std::getenv("CBF_THREADS");
    if (!v) return 1;
    const int n = std::atoi(v);
    return n >= 1 ? n : 1;
}

} // namespace detail

/// Optimizes from n_starts random initial controls for each horizon in
/// T_list and reports the spread of the optima; small-T horizons should
/// collapse to a single optimum. Starts are independent and run on up to
/// CBF_THREADS workers; results are identical regardless of the schedule.
inline std::vector<MultistartResult>
multistart_uniqueness(const std::function<ControlProblem(double)>& make_problem,
                      const std::vector<double>& T_list, int n_starts,
                      const OptimizerConfig& opt_cfg, double start_amplitude = 1.0) {
    if (n_starts < 1) throw std::invalid_argument("multistart_uniqueness: need n_starts >= 1");
    for (size_t i = 1; i < T_list.size(); ++i)
        if (!(T_list[i] > T_list[i - 1]))
            throw std::invalid_argument("multistart_uniqueness: T_list must be increasing");
    std::vector<MultistartResult> out;
    for (double T : T_list) {
        const ControlProblem prob = make_problem(T);
        MultistartResult res;
        res.T = T;
        std::vector<FieldSeries> optima(static_cast<size_t>(n_starts));
        res.reports.resize(static_cast<size_t>(n_starts));
        auto run_start = [&](int s) {
            SpectralVecField seed_field = random_divfree_field(
                prob.grid, opt_cfg.seed + 1000 * static_cast<uint64_t>(s) + 17, 2.0);
            const double nf = norm_H(seed_field);
            if (nf > 0) seed_field *= start_amplitude / nf;
            FieldSeries U0(prob.n_nodes(), seed_field);
            auto [U, rep] = optimize_distributed(prob, std::move(U0), opt_cfg);
            optima[static_cast<size_t>(s)] = std::move(U);
            res.reports[static_cast<size_t>(s)] = std::move(rep);
        };
        const int workers = std::min(detail::env_thread_cap(), n_starts);
        if (workers <= 1) {
            for (int s = 0; s < n_starts; ++s) run_start(s);
        } else {
            std::atomic<int> next{0};
            std::vector<std::thread> pool;
            pool.reserve(static_cast<size_t>(workers));
            for (int w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (int s = next.fetch_add(1); s < n_starts; s = next.fetch_add(1))
                        run_start(s);
                });
            for (auto& t : pool) t.join();
        }
        const ControlMetric metric = ControlMetric::trapezoid(prob.n_nodes(), prob.dt);
        res.optimum_norm = metric.norm(optima.front());
        for (size_t i = 0; i < optima.size(); ++i)
            for (size_t j = i + 1; j < optima.size(); ++j) {
                FieldSeries d = optima[i];
                axpy(-1.0, optima[j], d);
                res.max_pairwise_distance = std::max(res.max_pairwise_distance, metric.norm(d));
            }
        res.relative_spread =
            res.max_pairwise_distance / std::max(res.optimum_norm, 1e-30);
        out.push_back(std::move(res));
    }
    return out;
}

} // namespace cbf
