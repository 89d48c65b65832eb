#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "cbf/forward.hpp"

namespace cbf {

namespace detail {

/// M(u) w = conform(B(u, w) + B(w, u) + beta C'(u) w), evaluated with frozen
/// samples of the state u. This is the Jacobian of the forward nonlinear rhs.
inline SpectralVecField linearized_op(const StateData& ud, const SpectralVecField& w,
                                      const CbfParams& params, DealiasRule rule) {
    const auto& up = ud.phys;
    const PhysicalVecField wp = to_physical(w);
    const GradientSamples gw = gradient_samples(w);
    PhysicalVecField out(up.grid);
    const double beta = params.beta;
    const int r = params.r;
    double guard = 0.0;
    if (beta != 0.0 && r == 2) {
        double maxmag2 = 0.0;
        for (size_t i = 0; i < up.size(); ++i)
            maxmag2 = std::max(maxmag2,
                               up.comp[0][i] * up.comp[0][i] + up.comp[1][i] * up.comp[1][i]);
        guard = 1e-12 * std::sqrt(maxmag2);
    }
    for (size_t i = 0; i < up.size(); ++i) {
        double cw0 = 0.0, cw1 = 0.0;
        if (beta != 0.0) {
            const double m2 = up.comp[0][i] * up.comp[0][i] + up.comp[1][i] * up.comp[1][i];
            const double dot = up.comp[0][i] * wp.comp[0][i] + up.comp[1][i] * wp.comp[1][i];
            if (r == 1) {
                cw0 = wp.comp[0][i];
                cw1 = wp.comp[1][i];
            } else if (r == 2) {
                const double mag = std::sqrt(m2);
                const double q = mag < guard ? 0.0 : dot / mag;
                cw0 = mag * wp.comp[0][i] + q * up.comp[0][i];
                cw1 = mag * wp.comp[1][i] + q * up.comp[1][i];
            } else {
                cw0 = m2 * wp.comp[0][i] + 2.0 * dot * up.comp[0][i];
                cw1 = m2 * wp.comp[1][i] + 2.0 * dot * up.comp[1][i];
            }
        }
        for (int j = 0; j < 2; ++j) {
            const double adv_uw =
                up.comp[0][i] * gw.grad[0][j][i] + up.comp[1][i] * gw.grad[1][j][i];
            const double adv_wu =
                wp.comp[0][i] * ud.grad.grad[0][j][i] + wp.comp[1][i] * ud.grad.grad[1][j][i];
            out.comp[j][i] = adv_uw + adv_wu + beta * (j == 0 ? cw0 : cw1);
        }
    }
    return conform(to_spectral(out), rule);
}

/// H-adjoint of linearized_op at the same state:
/// M(u)^T p = conform(-(u . grad) p + (grad u)^T p + beta C'(u) p).
inline SpectralVecField linearized_op_adjoint(const StateData& ud, const SpectralVecField& p,
                                              const CbfParams& params, DealiasRule rule) {
    const auto& up = ud.phys;
    const PhysicalVecField pp = to_physical(p);
    const GradientSamples gp = gradient_samples(p);
    PhysicalVecField out(up.grid);
    const double beta = params.beta;
    const int r = params.r;
    double guard = 0.0;
    if (beta != 0.0 && r == 2) {
        double maxmag2 = 0.0;
        for (size_t i = 0; i < up.size(); ++i)
            maxmag2 = std::max(maxmag2,
                               up.comp[0][i] * up.comp[0][i] + up.comp[1][i] * up.comp[1][i]);
        guard = 1e-12 * std::sqrt(maxmag2);
    }
    for (size_t i = 0; i < up.size(); ++i) {
        double cp0 = 0.0, cp1 = 0.0;
        if (beta != 0.0) {
            const double m2 = up.comp[0][i] * up.comp[0][i] + up.comp[1][i] * up.comp[1][i];
            const double dot = up.comp[0][i] * pp.comp[0][i] + up.comp[1][i] * pp.comp[1][i];
            if (r == 1) {
                cp0 = pp.comp[0][i];
                cp1 = pp.comp[1][i];
            } else if (r == 2) {
                const double mag = std::sqrt(m2);
                const double q = mag < guard ? 0.0 : dot / mag;
                cp0 = mag * pp.comp[0][i] + q * up.comp[0][i];
                cp1 = mag * pp.comp[1][i] + q * up.comp[1][i];
            } else {
                cp0 = m2 * pp.comp[0][i] + 2.0 * dot * up.comp[0][i];
                cp1 = m2 * pp.comp[1][i] + 2.0 * dot * up.comp[1][i];
            }
        }
        for (int j = 0; j < 2; ++j) {
            const double adv =
                up.comp[0][i] * gp.grad[0][j][i] + up.comp[1][i] * gp.grad[1][j][i];
            const double gt =
                ud.grad.grad[j][0][i] * pp.comp[0][i] + ud.grad.grad[j][1][i] * pp.comp[1][i];
            out.comp[j][i] = -adv + gt + beta * (j == 0 ? cp0 : cp1);
        }
    }
    return conform(to_spectral(out), rule);
}

} // namespace detail

/// Solves the linearized system along a stored state trajectory with the
/// same integrating-factor Heun stepping; the Jacobian is evaluated at the
/// forward solve's own node and stage values, so the result is the exact
/// derivative of the discrete forward map.
inline Trajectory solve_linearized(const Trajectory& state_traj, const CbfParams& params,
                                   const SpectralVecField& w0, const FieldSeries& g) {
    params.validate();
    const size_t n_nodes = static_cast<size_t>(state_traj.n_steps) + 1;
    if (!g.empty() && g.size() != n_nodes)
        throw std::invalid_argument("solve_linearized: source series not aligned");
    detail::StateSampler sampler(state_traj, params);
    const Stepper& st = sampler.stepper();
    const DealiasRule rule = st.rule();
    const double dt = state_traj.dt;

    FieldSeries gc;
    if (!g.empty()) {
        gc.reserve(n_nodes);
        for (const auto& gk : g) gc.push_back(conform(gk, rule));
    }

    Trajectory out;
    out.grid = state_traj.grid;
    out.dt = dt;
    out.n_steps = state_traj.n_steps;
    out.checkpoint_stride = 1;
    out.stored.reserve(n_nodes);

    SpectralVecField w = conform(w0, rule);
    out.stored.push_back(w);
    for (int k = 0; k < state_traj.n_steps; ++k) {
        const auto& sd = sampler.step_data(k);
        SpectralVecField k1 = detail::linearized_op(sd.u_data, w, params, rule);
        k1 *= -1.0;
        if (!gc.empty()) k1 += gc[k];
        SpectralVecField stage = w;
        stage.add_scaled(dt, k1);
        st.apply_efac(stage);
        SpectralVecField k2 = detail::linearized_op(sd.stage_data, stage, params, rule);
        k2 *= -1.0;
        if (!gc.empty()) k2 += gc[k + 1];
        SpectralVecField next = w;
        next.add_scaled(0.5 * dt, k1);
        st.apply_efac(next);
        next.add_scaled(0.5 * dt, k2);
        w = std::move(next);
        const double h2 = norm_H2(w);
        if (!std::isfinite(h2) || h2 > 1e24) throw BlowupError(k + 1);
        out.stored.push_back(w);
    }
    return out;
}

/// Errors e(tau) = sup_t || u_{U + tau U'} - u_U - tau w ||_H / tau of the
/// Gateaux limit, one entry per tau.
inline std::vector<double> gateaux_errors(const SpectralVecField& u0, const CbfParams& params,
                                          const ControlOperatorD& D, const ForcingSpec& f,
                                          const FieldSeries& U_base, const FieldSeries& U_dir,
                                          double T, double dt,
                                          const std::vector<double>& tau_list) {
    const auto base = solve_forward(u0, params, D, U_base, f, T, dt, 1);
    const size_t n_nodes = static_cast<size_t>(base.traj.n_steps) + 1;
    if (U_dir.size() != n_nodes)
        throw std::invalid_argument("gateaux_errors: direction series not aligned");
    const DealiasRule rule = effective_rule(u0.grid, params.r);
    FieldSeries g;
    g.reserve(n_nodes);
    for (const auto& Uk : U_dir) g.push_back(D.apply(Uk, rule));
    const Trajectory w = solve_linearized(base.traj, params, SpectralVecField(u0.grid), g);

    std::vector<double> errs;
    errs.reserve(tau_list.size());
    for (double tau : tau_list) {
        FieldSeries Up = U_base.empty() ? FieldSeries(n_nodes, SpectralVecField(u0.grid))
                                        : U_base;
        for (size_t k = 0; k < n_nodes; ++k) Up[k].add_scaled(tau, U_dir[k]);
        const auto pert = solve_forward(u0, params, D, Up, f, T, dt, 1);
        double worst = 0.0;
        for (size_t k = 0; k < n_nodes; ++k) {
            SpectralVecField d = pert.traj.stored[k] - base.traj.stored[k];
            d.add_scaled(-tau, w.stored[k]);
            worst = std::max(worst, norm_H(d));
        }
        errs.push_back(worst / tau);
    }
    return errs;
}

/// Log-log slope of e(tau) against tau (least squares). Returns +infinity
/// when every error vanishes, i.e. the map is already exactly linear.
inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    size_t m = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (y[i] <= 0.0) continue;
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    if (m < 2) return std::numeric_limits<double>::infinity();
    const double denom = m * sxx - sx * sx;
    return (m * sxy - sx * sy) / denom;
}

inline double gateaux_check(const SpectralVecField& u0, const CbfParams& params,
                            const ControlOperatorD& D, const ForcingSpec& f,
                            const FieldSeries& U_base, const FieldSeries& U_dir, double T,
                            double dt, const std::vector<double>& tau_list) {
    if (tau_list.size() < 3)
        throw std::invalid_argument("gateaux_check: need at least 3 tau values");
    for (size_t i = 1; i < tau_list.size(); ++i)
        if (!(tau_list[i] < tau_list[i - 1]))
            throw std::invalid_argument("gateaux_check: tau_list must be decreasing");
    const auto errs = gateaux_errors(u0, params, D, f, U_base, U_dir, T, dt, tau_list);
    bool all_zero = true;
    for (double e : errs) all_zero = all_zero && e < 1e-300;
    if (all_zero) return std::numeric_limits<double>::infinity();
    return fit_loglog_slope(tau_list, errs);
}

/// Slack of the computable linearized energy bound
/// sup_t ||w||_H^2 <= (||w0||^2 + (2/mu) lambda1^{-1} int ||g||_H^2)
///                    * exp((4/mu) int ||u||_V^2).
inline double linearized_energy_margin(const EnergyLedger& state_ledger,
                                       const CbfParams& params, const Trajectory& w_traj,
                                       const FieldSeries& g) {
    const double dt = w_traj.dt;
    double g2 = 0.0;
    if (!g.empty()) {
        std::vector<double> gn(g.size());
        for (size_t k = 0; k < g.size(); ++k) gn[k] = norm_H2(g[k]);
        g2 = detail::trapezoid(gn, dt);
    }
    std::vector<double> uv(state_ledger.viscous.size());
    for (size_t k = 0; k < uv.size(); ++k) uv[k] = state_ledger.viscous[k] / params.mu;
    const double expo = std::exp(std::min(700.0, 4.0 / params.mu * detail::trapezoid(uv, dt)));
    const double lam = w_traj.grid.lambda1();
    const double bound =
        (norm_H2(w_traj.initial()) + 2.0 / (params.mu * lam) * g2) * expo;
    double sup = 0.0;
    for (const auto& w : w_traj.stored) sup = std::max(sup, norm_H2(w));
    return bound - sup;
}

} // namespace cbf
