#pragma once

#include <utility>

#include "cbf/optimize.hpp"

namespace cbf {

/// Initial-data assimilation setup: recover u(0) from a measured trajectory.
/// Measurements are stored at every solver step. The recovered datum
/// minimizes
///   J(U) = w_init ||U||_H^2 + w_track int ||u - u_M||^2
///        + w_enstrophy int ||u||_V^2 + w_terminal ||u(T) - u_M_f||^2.
struct AssimConfig {
    FieldSeries u_M;
    SpectralVecField u_M_f;
    double noise_level = 0.0;
    double w_track = 0.5;
    double w_enstrophy = 0.5;
    double w_terminal = 0.5;
    double w_init = 1e-4; // 1/2 recovers the unscaled functional
    double T = 0.25;
    double dt = 1e-3;

    void validate() const {
        if (noise_level < 0) throw std::invalid_argument("AssimConfig: noise_level >= 0");
        if (w_track < 0 || w_enstrophy < 0 || w_terminal < 0)
            throw std::invalid_argument("AssimConfig: weights must be nonnegative");
        if (!(w_init > 0)) throw std::invalid_argument("AssimConfig: w_init must be positive");
    }

    size_t n_nodes() const { return static_cast<size_t>(std::llround(T / dt)) + 1; }

    CostConfig tracking_cost() const {
        CostConfig c;
        c.u_d = u_M;
        c.u_f = u_M_f;
        c.w_track = w_track;
        c.w_enstrophy = w_enstrophy;
        c.w_terminal = w_terminal;
        c.w_control = 1.0; // unused by the initial-data functional
        return c;
    }
};

/// Twin-experiment data: forward-solve from a known truth and perturb every
/// stored state by noise_level * ||state|| times a unit random field.
inline AssimConfig generate_twin_data(const SpectralVecField& truth_u0, const CbfParams& params,
                                      const ForcingSpec& f, double T, double dt,
                                      double noise_level, uint64_t seed) {
    if (noise_level < 0) throw std::invalid_argument("generate_twin_data: noise_level >= 0");
    const auto fwd = solve_forward(truth_u0, params, ControlOperatorD::identity(), {}, f, T, dt, 1);
    AssimConfig cfg;
    cfg.noise_level = noise_level;
    cfg.T = T;
    cfg.dt = dt;
    cfg.u_M.reserve(fwd.traj.stored.size());
    for (size_t k = 0; k < fwd.traj.stored.size(); ++k) {
        SpectralVecField m = fwd.traj.stored[k];
        if (noise_level > 0.0) {
            SpectralVecField g = random_divfree_field(m.grid, seed + 31 * k + 1, 2.0);
            const double gn = norm_H(g);
            if (gn > 0) g *= 1.0 / gn;
            m.add_scaled(noise_level * norm_H(fwd.traj.stored[k]), g);
        }
        cfg.u_M.push_back(std::move(m));
    }
    cfg.u_M_f = cfg.u_M.back();
    return cfg;
}

struct AssimGradientEval {
    double cost = 0.0;
    SpectralVecField grad;   // 2 w_init U + p(0)
    double stationarity = 0.0; // || 2 w_init U + p(0) ||_H, same quantity as ||grad||
    ForwardResult fwd;
    AdjointSolution adj;
};

inline AssimGradientEval assimilation_cost_and_gradient(const SpectralVecField& U,
                                                        const AssimConfig& cfg,
                                                        const CbfParams& params,
                                                        const ForcingSpec& f) {
    cfg.validate();
    AssimGradientEval ev;
    ev.fwd = solve_forward(U, params, ControlOperatorD::identity(), {}, f, cfg.T, cfg.dt, 1);
    const CostConfig tracking = cfg.tracking_cost();
    ev.cost = cfg.w_init * norm_H2(U) +
              evaluate_cost(ev.fwd.traj, {}, tracking, params);
    const AdjointSpec spec = cost_adjoint_spec(ev.fwd.traj, tracking, params);
    ev.adj = solve_adjoint(ev.fwd.traj, params, spec);
    // p(0) is the exact dual of the initial datum, so this is the exact
    // gradient of the discrete functional.
    ev.grad = ev.adj.initial();
    ev.grad.add_scaled(2.0 * cfg.w_init, conform(U, effective_rule(U.grid, params.r)));
    ev.stationarity = norm_H(ev.grad);
    return ev;
}

/// Recovers the initial datum by descent from u0_start (zero field if empty).
inline std::pair<SpectralVecField, OptimReport>
assimilate(const AssimConfig& cfg, const CbfParams& params, const ForcingSpec& f,
           const OptimizerConfig& opt_cfg, const GridSpec& grid,
           const SpectralVecField* u0_start = nullptr) {
    cfg.validate();
    if (!cfg.u_M.empty() && cfg.u_M.size() != cfg.n_nodes())
        throw std::invalid_argument("assimilate: measurements not aligned to solver nodes");
    auto value = [&](const FieldSeries& U) {
        const auto fwd = solve_forward(U[0], params, ControlOperatorD::identity(), {}, f, cfg.T,
                                       cfg.dt, 1);
        return cfg.w_init * norm_H2(U[0]) +
               evaluate_cost(fwd.traj, {}, cfg.tracking_cost(), params);
    };
    auto value_grad = [&](const FieldSeries& U) {
        AssimGradientEval ev = assimilation_cost_and_gradient(U[0], cfg, params, f);
        detail::EvalPoint pt;
        pt.cost = ev.cost;
        pt.grad = FieldSeries{std::move(ev.grad)};
        pt.pontryagin = ev.stationarity * ev.stationarity / (4.0 * cfg.w_init);
        return pt;
    };
    FieldSeries U0{u0_start ? *u0_start : SpectralVecField(grid)};
    auto [U, report] =
        detail::minimize(value, value_grad, std::move(U0), opt_cfg, ControlMetric::single());
    return {std::move(U[0]), std::move(report)};
}

/// Second-order form of the initial-data problem: same as the distributed
/// one with the control integral replaced by w_init ||dU||^2, the
/// perturbation entering through the initial datum.
inline double assimilation_second_order_form(const AssimConfig& cfg, const CbfParams& params,
                                             const ForcingSpec& f,
                                             const SpectralVecField& U_star,
                                             const Trajectory& u_star_traj,
                                             const AdjointSolution& adj,
                                             const SpectralVecField& perturb_U) {
    if (params.r != 3)
        throw std::invalid_argument("assimilation_second_order_form: r = 3 only");
    const auto pert = solve_forward(U_star + perturb_U, params, ControlOperatorD::identity(), {},
                                    f, cfg.T, cfg.dt, 1);
    const size_t n_nodes = cfg.n_nodes();
    const auto c = detail::trapezoid_weights(n_nodes);
    detail::StateSampler star(u_star_traj, params);
    double quad = 0.0, bterm = 0.0, cterm = 0.0;
    for (size_t k = 0; k < n_nodes; ++k) {
        const SpectralVecField& ustar =
            k < static_cast<size_t>(u_star_traj.n_steps)
                ? star.step_data(static_cast<int>(k)).u
                : u_star_traj.final_state();
        const SpectralVecField u = pert.traj.stored[k] - ustar;
        quad += c[k] * cfg.dt * (cfg.w_track * norm_H2(u) + cfg.w_enstrophy * norm_V2(u));
        const SpectralVecField& p = adj.source_dual[k];
        bterm += c[k] * cfg.dt * trilinear_b(u, u, p);
        if (params.beta != 0.0) {
            const PhysicalVecField up = to_physical(u);
            const PhysicalVecField sp = to_physical(ustar);
            const PhysicalVecField pp = to_physical(p);
            double acc = 0.0;
            for (size_t i = 0; i < up.size(); ++i) {
                const double su = sp.comp[0][i] * up.comp[0][i] + sp.comp[1][i] * up.comp[1][i];
                const double m2 = up.comp[0][i] * up.comp[0][i] + up.comp[1][i] * up.comp[1][i];
                for (int j = 0; j < 2; ++j)
                    acc += (2.0 * su * up.comp[j][i] + m2 * (up.comp[j][i] + sp.comp[j][i])) *
                           pp.comp[j][i];
            }
            cterm += c[k] * cfg.dt * params.beta * acc * u.grid.cell_area();
        }
    }
    const double uT2 = norm_H2(pert.traj.final_state() - u_star_traj.final_state());
    return quad + cfg.w_init * norm_H2(perturb_U) + cfg.w_terminal * uT2 - bterm - cterm;
}

} // namespace cbf
