#pragma once

#include <stdexcept>

#include "cbf/adjoint.hpp"

namespace cbf {

inline bool is_unset(const SpectralVecField& f) { return f.comp[0].empty(); }

/// Tracking-type cost
///   J = w_track int ||u - u_d||_H^2 + w_enstrophy int ||u||_V^2
///     + w_control int ||U||_U^2 + w_terminal ||u(T) - u_f||_H^2,
/// quadratic in the control. With every weight at 1/2 the adjoint data
/// reduce to the unscaled forms (u - u_d) + A u and u(T) - u_f. Empty
/// u_d / u_f mean zero targets.
struct CostConfig {
    FieldSeries u_d;
    SpectralVecField u_f;
    ControlOperatorD D;
    double w_track = 0.5;
    double w_enstrophy = 0.5;
    double w_control = 0.5;
    double w_terminal = 0.5;

    void validate() const {
        if (w_track < 0 || w_enstrophy < 0 || w_control < 0 || w_terminal < 0)
            throw std::invalid_argument("CostConfig: weights must be nonnegative");
        // coercivity in the control (quadratic h with kappa_1 = w_control > 0)
        if (!(w_control > 0))
            throw std::invalid_argument("CostConfig: w_control must be positive");
    }
};

namespace detail {

/// Visits u_k for every node k of a trajectory, recomputing through
/// checkpoints when needed. fn(k, u_k).
template <class F>
void for_each_node(const Trajectory& traj, const CbfParams& params, F&& fn) {
    const int N = traj.n_steps;
    if (traj.stores_all()) {
        for (int k = 0; k <= N; ++k) fn(static_cast<size_t>(k), traj.stored[k]);
        return;
    }
    StateSampler sampler(traj, params);
    for (int k = 0; k < N; ++k) fn(static_cast<size_t>(k), sampler.step_data(k).u);
    fn(static_cast<size_t>(N), traj.final_state());
}

} // namespace detail

inline double evaluate_cost(const Trajectory& traj, const FieldSeries& controls,
                            const CostConfig& cfg, const CbfParams& params) {
    cfg.validate();
    const size_t n_nodes = static_cast<size_t>(traj.n_steps) + 1;
    if (!cfg.u_d.empty() && cfg.u_d.size() != n_nodes)
        throw std::invalid_argument("evaluate_cost: u_d not aligned to trajectory");
    if (!controls.empty() && controls.size() != n_nodes)
        throw std::invalid_argument("evaluate_cost: controls not aligned to trajectory");
    const auto c = detail::trapezoid_weights(n_nodes);
    const double dt = traj.dt;
    double track = 0.0, enst = 0.0;
    detail::for_each_node(traj, params, [&](size_t k, const SpectralVecField& u) {
        if (cfg.w_track != 0.0)
            track += c[k] * dt *
                     (cfg.u_d.empty() ? norm_H2(u) : norm_H2(u - cfg.u_d[k]));
        if (cfg.w_enstrophy != 0.0) enst += c[k] * dt * norm_V2(u);
    });
    double ctrl = 0.0;
    if (cfg.w_control != 0.0 && !controls.empty()) {
        for (size_t k = 0; k < n_nodes; ++k) ctrl += c[k] * dt * norm_H2(controls[k]);
    }
    double term = 0.0;
    if (cfg.w_terminal != 0.0) {
        term = is_unset(cfg.u_f) ? norm_H2(traj.final_state())
                                 : norm_H2(traj.final_state() - cfg.u_f);
    }
    return cfg.w_track * track + cfg.w_enstrophy * enst + cfg.w_control * ctrl +
           cfg.w_terminal * term;
}

/// Adjoint data generated by differentiating the discrete cost in the state:
/// h_k = 2 w_track (u_k - u_d,k) + 2 w_enstrophy A u_k,
/// p_T = 2 w_terminal (u(T) - u_f).
inline AdjointSpec cost_adjoint_spec(const Trajectory& traj, const CostConfig& cfg,
                                     const CbfParams& params) {
    const size_t n_nodes = static_cast<size_t>(traj.n_steps) + 1;
    AdjointSpec spec;
    spec.rhs.assign(n_nodes, SpectralVecField(traj.grid));
    detail::for_each_node(traj, params, [&](size_t k, const SpectralVecField& u) {
        SpectralVecField h(traj.grid);
        if (cfg.w_track != 0.0) {
            h = cfg.u_d.empty() ? u : u - cfg.u_d[k];
            h *= 2.0 * cfg.w_track;
        }
        if (cfg.w_enstrophy != 0.0) h.add_scaled(2.0 * cfg.w_enstrophy, stokes_A(u));
        spec.rhs[k] = std::move(h);
    });
    SpectralVecField pT =
        is_unset(cfg.u_f) ? traj.final_state() : traj.final_state() - cfg.u_f;
    pT *= 2.0 * cfg.w_terminal;
    spec.terminal = std::move(pT);
    return spec;
}

} // namespace cbf
