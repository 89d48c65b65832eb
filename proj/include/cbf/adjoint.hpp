#pragma once

#include <cmath>
#include <vector>

#include "cbf/linearized.hpp"

namespace cbf {

/// Terminal condition and right-hand side of the backward adjoint system.
struct AdjointSpec {
    SpectralVecField terminal;
    FieldSeries rhs; // one field per node, or empty for zero
};

/// Result of a backward adjoint sweep.
///
/// `p` holds the adjoint states: p.stored[k] is the exact dual of the
/// linearized state at node k for the functional
///   F(w) = <w(T), p_T> + sum_k c_k dt <w_k, h_k>       (trapezoid weights c_k),
/// so p.stored[0] is exactly dF/dw0. `source_dual[k]` is the dual of the
/// node-k linearized source divided by c_k dt; it converges to the continuous
/// adjoint p(t_k) and is the series that enters source pairings, gradients
/// and the minimum-principle residual.
struct AdjointSolution {
    Trajectory p;
    FieldSeries source_dual;

    const SpectralVecField& initial() const { return p.stored.front(); }
};

namespace detail {

inline std::vector<double> trapezoid_weights(size_t n_nodes) {
    std::vector<double> c(n_nodes, 1.0);
    if (!c.empty()) c.front() = c.back() = 0.5;
    return c;
}

} // namespace detail

/// Exact stage-by-stage transpose of the linearized integrating-factor Heun
/// step, marching t: T -> 0. C'(u) is pointwise self-adjoint and appears
/// unchanged; B' transposes to its closed form -(u.grad)p + (grad u)^T p.
inline AdjointSolution solve_adjoint(const Trajectory& state_traj, const CbfParams& params,
                                     const AdjointSpec& spec) {
    params.validate();
    const int N = state_traj.n_steps;
    const size_t n_nodes = static_cast<size_t>(N) + 1;
    if (!spec.rhs.empty() && spec.rhs.size() != n_nodes)
        throw std::invalid_argument("solve_adjoint: rhs series not aligned");
    detail::StateSampler sampler(state_traj, params);
    const Stepper& st = sampler.stepper();
    const DealiasRule rule = st.rule();
    const double dt = state_traj.dt;
    const auto c = detail::trapezoid_weights(n_nodes);

    FieldSeries h;
    if (!spec.rhs.empty()) {
        h.reserve(n_nodes);
        for (const auto& hk : spec.rhs) h.push_back(conform(hk, rule));
    }

    AdjointSolution sol;
    sol.p.grid = state_traj.grid;
    sol.p.dt = dt;
    sol.p.n_steps = N;
    sol.p.checkpoint_stride = 1;
    sol.p.stored.assign(n_nodes, SpectralVecField(state_traj.grid));
    sol.source_dual.assign(n_nodes, SpectralVecField(state_traj.grid));

    SpectralVecField lambda = conform(spec.terminal, rule);
    if (!h.empty()) lambda.add_scaled(c[n_nodes - 1] * dt, h[n_nodes - 1]);
    sol.p.stored[n_nodes - 1] = lambda;

    for (int k = N - 1; k >= 0; --k) {
        const auto& sd = sampler.step_data(k);
        // transpose of: stage = E(w + dt k1); w+ = E w + dt/2 (E k1 + k2)
        SpectralVecField bhat = 0.5 * dt * lambda;
        const SpectralVecField s =
            detail::linearized_op_adjoint(sd.stage_data, bhat, params, rule);
        SpectralVecField ahat = 0.5 * dt * lambda;
        ahat.add_scaled(-dt, s);
        st.apply_efac(ahat);
        SpectralVecField next = lambda - s;
        st.apply_efac(next);
        next -= detail::linearized_op_adjoint(sd.u_data, ahat, params, rule);

        sol.source_dual[static_cast<size_t>(k) + 1] += bhat;
        sol.source_dual[static_cast<size_t>(k)] += ahat;

        lambda = std::move(next);
        if (!h.empty()) lambda.add_scaled(c[static_cast<size_t>(k)] * dt, h[k]);
        const double h2 = norm_H2(lambda);
        if (!std::isfinite(h2) || h2 > 1e24) throw BlowupError(k);
        sol.p.stored[static_cast<size_t>(k)] = lambda;
    }

    for (size_t k = 0; k < n_nodes; ++k) sol.source_dual[k] *= 1.0 / (c[k] * dt);
    return sol;
}

/// Defect of the discrete duality identity
///   <w(T), p_T> + sum c dt <w, h> = <w0, p(0)> + sum c dt <g, pbar>,
/// normalized by the largest participating term. Exact transposition keeps
/// this at rounding level.
inline double duality_check(const Trajectory& state_traj, const CbfParams& params,
                            const SpectralVecField& w0, const FieldSeries& g,
                            const AdjointSpec& spec) {
    const size_t n_nodes = static_cast<size_t>(state_traj.n_steps) + 1;
    const double dt = state_traj.dt;
    const auto c = detail::trapezoid_weights(n_nodes);
    const DealiasRule rule = effective_rule(state_traj.grid, params.r);

    const Trajectory w = solve_linearized(state_traj, params, w0, g);
    const AdjointSolution adj = solve_adjoint(state_traj, params, spec);

    double term_wh = 0.0;
    if (!spec.rhs.empty())
        for (size_t k = 0; k < n_nodes; ++k)
            term_wh += c[k] * dt *
                       inner_product(w.stored[k], conform(spec.rhs[k], rule), Space::H);
    const double term_wt = inner_product(w.final_state(), conform(spec.terminal, rule), Space::H);
    const double term_w0 = inner_product(conform(w0, rule), adj.initial(), Space::H);
    double term_gp = 0.0;
    if (!g.empty())
        for (size_t k = 0; k < n_nodes; ++k)
            term_gp +=
                c[k] * dt * inner_product(conform(g[k], rule), adj.source_dual[k], Space::H);

    const double lhs = term_wt + term_wh;
    const double rhs = term_w0 + term_gp;
    const double scale = std::max({std::abs(term_wt), std::abs(term_wh), std::abs(term_w0),
                                   std::abs(term_gp), 1e-30});
    return std::abs(lhs - rhs) / scale;
}

/// Slack of the computable backward bound
/// sup_t ||p||_H^2 <= (||p_T||^2 + (2/mu) lambda1^{-1} int ||h||_H^2)
///                    * exp((4/mu) int ||u*||_V^2).
inline double adjoint_bound_margin(const EnergyLedger& state_ledger, const CbfParams& params,
                                   const AdjointSolution& adj, const AdjointSpec& spec) {
    const double dt = adj.p.dt;
    double h2 = 0.0;
    if (!spec.rhs.empty()) {
        std::vector<double> hn(spec.rhs.size());
        for (size_t k = 0; k < spec.rhs.size(); ++k) hn[k] = norm_H2(spec.rhs[k]);
        h2 = detail::trapezoid(hn, dt);
    }
    std::vector<double> uv(state_ledger.viscous.size());
    for (size_t k = 0; k < uv.size(); ++k) uv[k] = state_ledger.viscous[k] / params.mu;
    const double expo = std::exp(std::min(700.0, 4.0 / params.mu * detail::trapezoid(uv, dt)));
    const double lam = adj.p.grid.lambda1();
    const double bound = (norm_H2(spec.terminal) + 2.0 / (params.mu * lam) * h2) * expo;
    double sup = 0.0;
    for (const auto& p : adj.p.stored) sup = std::max(sup, norm_H2(p));
    return bound - sup;
}

/// Direct backward integration of the continuous adjoint equation with the
/// same integrating-factor Heun scheme; used to cross-check that the discrete
/// adjoint recovers the continuous one at O(dt^2).
inline Trajectory solve_adjoint_continuous(const Trajectory& state_traj, const CbfParams& params,
                                           const AdjointSpec& spec) {
    params.validate();
    const int N = state_traj.n_steps;
    const size_t n_nodes = static_cast<size_t>(N) + 1;
    if (!spec.rhs.empty() && spec.rhs.size() != n_nodes)
        throw std::invalid_argument("solve_adjoint_continuous: rhs series not aligned");
    detail::StateSampler sampler(state_traj, params);
    const Stepper& st = sampler.stepper();
    const DealiasRule rule = st.rule();
    const double dt = state_traj.dt;

    Trajectory out;
    out.grid = state_traj.grid;
    out.dt = dt;
    out.n_steps = N;
    out.checkpoint_stride = 1;
    out.stored.assign(n_nodes, SpectralVecField(state_traj.grid));

    auto rhs_at = [&](size_t k) -> SpectralVecField {
        if (spec.rhs.empty()) return SpectralVecField(state_traj.grid);
        return conform(spec.rhs[k], rule);
    };
    // State data at node k: step k's own node value, or the final state.
    detail::StateData final_data = detail::make_state_data(state_traj.final_state());
    auto state_data_at = [&](int k) -> const detail::StateData& {
        return k == N ? final_data : sampler.step_data(k).u_data;
    };

    SpectralVecField q = conform(spec.terminal, rule);
    out.stored[n_nodes - 1] = q;
    for (int k = N - 1; k >= 0; --k) {
        // march backward: dq/ds = -(mu A + alpha) q - M(u)^T q + h, s = T - t
        SpectralVecField k1 = detail::linearized_op_adjoint(state_data_at(k + 1), q, params, rule);
        k1 *= -1.0;
        k1 += rhs_at(static_cast<size_t>(k) + 1);
        SpectralVecField stage = q;
        stage.add_scaled(dt, k1);
        st.apply_efac(stage);
        SpectralVecField k2 =
            detail::linearized_op_adjoint(state_data_at(k), stage, params, rule);
        k2 *= -1.0;
        k2 += rhs_at(static_cast<size_t>(k));
        SpectralVecField next = q;
        next.add_scaled(0.5 * dt, k1);
        st.apply_efac(next);
        next.add_scaled(0.5 * dt, k2);
        q = std::move(next);
        out.stored[static_cast<size_t>(k)] = q;
    }
    return out;
}

} // namespace cbf
