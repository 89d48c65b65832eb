#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cbf/assimilate.hpp"
#include "cbf/benchmarks.hpp"

namespace cbf {

struct CheckResult {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool leq = true; // pass iff value <= bound, otherwise value >= bound
    bool pass = false;
};

struct VerifyOptions {
    GridSpec grid{32, 2.0 * std::numbers::pi, DealiasRule::OneHalf};
    CbfParams params{0.5, 0.1, 1.0, 3};
    uint64_t seed = 1;
    int n_fields = 20;
    int n_pairs = 40;
    bool global_monotonicity = true;
    double T = 0.05;
    double dt = 1e-3;
};

namespace detail {

inline void push_leq(std::vector<CheckResult>& out, const std::string& name, double value,
                     double bound) {
    out.push_back({name, value, bound, true, value <= bound});
}

inline void push_geq(std::vector<CheckResult>& out, const std::string& name, double value,
                     double bound) {
    out.push_back({name, value, bound, false, value >= bound});
}

} // namespace detail

/// Runs the full invariant suite: every provable identity and inequality of
/// the operator theory plus the solver, adjoint and gradient diagnostics.
inline std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt) {
    using detail::push_geq;
    using detail::push_leq;
    std::vector<CheckResult> out;
    const GridSpec& g = opt.grid;
    const CbfParams& P = opt.params;
    const DealiasRule rule = g.dealias_rule;
    uint64_t seed = opt.seed;
    auto field = [&](double decay = 2.0) { return random_divfree_field(g, seed++, decay); };
    auto unit_field = [&](double decay = 2.0) {
        SpectralVecField f = field(decay);
        const double n = norm_H(f);
        if (n > 0) f *= 1.0 / n;
        return f;
    };

    // --- spectral core ---------------------------------------------------
    {
        double round_trip = 0.0, parseval = 0.0, div = 0.0, idem = 0.0, selfadj = 0.0,
               poincare = 1e300, av = 0.0;
        for (int i = 0; i < opt.n_fields; ++i) {
            const SpectralVecField u = field();
            const SpectralVecField back = to_spectral(to_physical(u));
            round_trip = std::max(round_trip, norm_H(back - u) / norm_H(u));

            const PhysicalVecField ph = to_physical(u);
            double quad = 0.0;
            for (size_t q = 0; q < ph.size(); ++q)
                quad += ph.comp[0][q] * ph.comp[0][q] + ph.comp[1][q] * ph.comp[1][q];
            quad *= g.cell_area();
            parseval = std::max(parseval, std::abs(quad - norm_H2(u)) / norm_H2(u));

            // non-solenoidal input: add a gradient part, then project
            SpectralVecField v = u;
            const SpectralVecField w = field();
            for (int c = 0; c < 2; ++c)
                for (size_t q = 0; q < v.size(); ++q) v.comp[c][q] += 0.5 * w.comp[c][q];
            const SpectralVecField pv = leray_project(v);
            div = std::max(div, max_divergence(pv) / std::max(1e-30, norm_H(pv)));
            idem = std::max(idem, norm_H(leray_project(pv) - pv) / std::max(1e-30, norm_H(pv)));
            const double ip1 = inner_product(leray_project(v), w, Space::H);
            const double ip2 = inner_product(v, leray_project(w), Space::H);
            selfadj = std::max(selfadj,
                               std::abs(ip1 - ip2) / std::max(1e-30, norm_H(v) * norm_H(w)));

            poincare = std::min(poincare, norm_V2(u) - g.lambda1() * norm_H2(u));
            av = std::max(av, std::abs(inner_product(stokes_A(u), u, Space::H) - norm_V2(u)) /
                                  norm_V2(u));
        }
        push_leq(out, "transform round trip", round_trip, 1e-13);
        push_leq(out, "Parseval spectral vs quadrature", parseval, 1e-12);
        push_leq(out, "projection divergence", div, 1e-12);
        push_leq(out, "projection idempotent", idem, 1e-12);
        push_leq(out, "projection self-adjoint", selfadj, 1e-12);
        push_geq(out, "Poincare margin", poincare, -1e-14);
        push_leq(out, "<Au,u> = |u|_V^2", av, 1e-12);
    }

    // --- trilinear form ---------------------------------------------------
    {
        double anti = 0.0, bvv = 0.0, agree = 0.0, holder = 1e300;
        for (int i = 0; i < opt.n_fields; ++i) {
            const SpectralVecField u = unit_field(), v = unit_field(), w = unit_field();
            const double scale = norm_V(u) * norm_V(v) * norm_V(w) + 1.0;
            anti = std::max(anti,
                            std::abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) / scale);
            bvv = std::max(bvv, std::abs(trilinear_b(u, v, v)) / scale);
            agree = std::max(
                agree,
                std::abs(trilinear_b(u, v, w) -
                         inner_product(convection_B(u, v, rule), w, Space::H)) /
                    scale);
            holder = std::min(holder, norm(u, Space::L4) * norm_V(v) * norm(w, Space::L4) -
                                          std::abs(trilinear_b(u, v, w)));
        }
        push_leq(out, "b antisymmetry", anti, 1e-11);
        push_leq(out, "b(u,v,v) = 0", bvv, 1e-11);
        push_leq(out, "b = <B(u,v),w>", agree, 1e-12);
        push_geq(out, "b Holder-Ladyzhenskaya margin", holder, -1e-12);
    }

    // --- absorption operator, per r ---------------------------------------
    for (int r = 1; r <= 3; ++r) {
        double cid = 0.0, cpos = 1e300, mono = 1e300, dnb = 1e300;
        for (int i = 0; i < opt.n_fields; ++i) {
            const SpectralVecField u = unit_field(), v = unit_field();
            const double lr = std::pow(norm_Lp(u, r + 1.0), r + 1.0);
            cid = std::max(cid, std::abs(inner_product(absorption_C(u, r), u, Space::H) - lr) /
                                    std::max(1e-30, lr));
            cpos = std::min(cpos, inner_product(C_prime(u, v, r), v, Space::H));
            mono = std::min(mono, absorption_monotonicity_margin(u, v, r));
            dnb = std::min(dnb, absorption_difference_bound_margin(u, v, r));
        }
        const std::string rs = " (r=" + std::to_string(r) + ")";
        push_leq(out, "<C(u),u> = |u|^{r+1}" + rs, cid, 1e-10);
        push_geq(out, "C' positivity" + rs, cpos, -1e-12);
        push_geq(out, "absorption monotonicity" + rs, mono, -1e-10);
        push_geq(out, "absorption norm bound" + rs, dnb, -1e-10);
    }

    // --- Gateaux derivatives and Taylor exactness --------------------------
    {
        const SpectralVecField u = unit_field(), v = unit_field(), w = unit_field();
        const std::vector<double> taus{1e-2, 1e-3, 1e-4, 1e-5};
        for (int r = 2; r <= 3; ++r) {
            std::vector<double> errs;
            for (double tau : taus) {
                SpectralVecField utv = u;
                utv.add_scaled(tau, v);
                SpectralVecField diff = absorption_C(utv, r) - absorption_C(u, r);
                diff *= 1.0 / tau;
                diff -= C_prime(u, v, r);
                errs.push_back(norm_H(diff));
            }
            push_geq(out, "C' finite-difference slope (r=" + std::to_string(r) + ")",
                     fit_loglog_slope(taus, errs), 0.9);
        }
        {
            std::vector<double> errs;
            for (double tau : taus) {
                SpectralVecField utv = u;
                utv.add_scaled(tau, w);
                SpectralVecField diff =
                    convection_B(utv, utv, rule) - convection_B(u, u, rule);
                diff *= 1.0 / tau;
                diff -= B_prime(u, w, rule);
                errs.push_back(norm_H(diff));
            }
            push_geq(out, "B' finite-difference slope", fit_loglog_slope(taus, errs), 0.9);
        }
        push_leq(out, "C'' symmetry",
                 norm_H(C_double_prime(u, v, w) - C_double_prime(u, w, v)), 1e-14);
        push_leq(out, "cubic Taylor identity", cubic_taylor_residual(u, v), 1e-11);
        double dual = 0.0;
        for (int i = 0; i < opt.n_fields; ++i) {
            const SpectralVecField a = unit_field(), q = unit_field(), p = unit_field();
            dual = std::max(dual,
                            std::abs(inner_product(B_prime(a, q, rule), p, Space::H) -
                                     inner_product(q, B_prime_adjoint(a, p, rule), Space::H)));
        }
        push_leq(out, "B' adjoint duality", dual, 1e-11);
    }

    // --- monotonicity of G -------------------------------------------------
    {
        double local = 1e300, global = 1e300, energy = 0.0;
        for (int i = 0; i < opt.n_pairs; ++i) {
            const SpectralVecField u = unit_field(), v = unit_field();
            const double N = norm(v, Space::L4);
            const double scale = norm_V2(u - v) + 1.0;
            local = std::min(local,
                             monotonicity_check(u, v, P, MonotonicityMode::Local, N) / scale);
            if (opt.global_monotonicity && P.critical_monotone())
                global = std::min(
                    global, monotonicity_check(u, v, P, MonotonicityMode::Global) / scale);
            const double gu = inner_product(G_apply(u, P), u, Space::H);
            const double rhs = P.mu * norm_V2(u) + P.alpha * norm_H2(u) +
                               P.beta * std::pow(norm_Lp(u, P.r + 1.0), P.r + 1.0);
            energy = std::max(energy, std::abs(gu - rhs) / std::max(1e-30, rhs));
        }
        push_geq(out, "local monotonicity margin", local, -1e-10);
        if (opt.global_monotonicity && P.critical_monotone())
            push_geq(out, "global monotonicity margin", global, -1e-10);
        push_leq(out, "<G(u),u> energy identity", energy, 1e-10);
    }

    // --- forward solver -----------------------------------------------------
    {
        bench::DecayBenchmark exact_decay{g, P, 1.0, 0.0};
        CbfParams lin = P;
        lin.beta = 0.0;
        exact_decay.params = lin;
        push_leq(out, "pure decay integrated exactly", exact_decay.run_error(0.12, 2e-3),
                 1e-12);

        bench::DecayBenchmark manufactured{g, P, 1.0, 6.0};
        std::vector<double> dts{4e-3, 2e-3, 1e-3}, errs;
        for (double dt : dts) errs.push_back(manufactured.run_error(0.12, dt));
        const double slope = fit_loglog_slope(dts, errs);
        push_geq(out, "decay benchmark order (lower)", slope, 1.8);
        push_leq(out, "decay benchmark order (upper)", slope, 2.2);

        const SpectralVecField u0 = unit_field();
        std::vector<double> eres;
        for (double dt : dts) {
            const auto fr = solve_forward(u0, P, ControlOperatorD::identity(), {},
                                          ForcingSpec::none(), 0.12, dt, 10);
            eres.push_back(energy_equality_residual(fr.traj, fr.ledger));
        }
        const double eslope = fit_loglog_slope(dts, eres);
        push_geq(out, "energy equality order (lower)", eslope, 1.8);
        push_leq(out, "energy equality order (upper)", eslope, 2.2);

        const size_t nn = static_cast<size_t>(std::llround(opt.T / opt.dt)) + 1;
        FieldSeries U(nn, 0.3 * unit_field());
        const ForcingSpec fc = ForcingSpec::constant_field(0.5 * unit_field());
        const auto fr =
            solve_forward(u0, P, ControlOperatorD::identity(), U, fc, opt.T, opt.dt, 10);
        push_geq(out, "a-priori bound margin / K_T",
                 apriori_bound_check(fr.traj, fr.ledger) / std::max(1e-30, fr.ledger.K_T),
                 -1e-6);
        push_leq(out, "forced energy equality residual",
                 energy_equality_residual(fr.traj, fr.ledger), 1e-4);
    }

    // --- linearized / adjoint ------------------------------------------------
    {
        const SpectralVecField u0 = unit_field();
        const size_t nn = static_cast<size_t>(std::llround(opt.T / opt.dt)) + 1;
        const auto fr = solve_forward(u0, P, ControlOperatorD::identity(), {},
                                      ForcingSpec::none(), opt.T, opt.dt, 10);

        // superposition
        const SpectralVecField w0a = unit_field(), w0b = unit_field();
        FieldSeries ga(nn, 0.7 * unit_field()), gb(nn, 0.4 * unit_field());
        SpectralVecField w0c = 0.3 * w0a;
        w0c.add_scaled(-1.1, w0b);
        FieldSeries gc(nn, SpectralVecField(g));
        for (size_t k = 0; k < nn; ++k) {
            gc[k] = 0.3 * ga[k];
            gc[k].add_scaled(-1.1, gb[k]);
        }
        const auto wa = solve_linearized(fr.traj, P, w0a, ga);
        const auto wb = solve_linearized(fr.traj, P, w0b, gb);
        const auto wc = solve_linearized(fr.traj, P, w0c, gc);
        double sup = 0.0, wnorm = 0.0;
        for (size_t k = 0; k < nn; ++k) {
            SpectralVecField d = 0.3 * wa.stored[k];
            d.add_scaled(-1.1, wb.stored[k]);
            d -= wc.stored[k];
            sup = std::max(sup, norm_H(d));
            wnorm = std::max(wnorm, norm_H(wc.stored[k]));
        }
        push_leq(out, "linearized superposition", sup / std::max(1e-30, wnorm), 1e-11);
        push_geq(out, "linearized energy bound margin",
                 linearized_energy_margin(fr.ledger, P, wa, ga), 0.0);

        // duality across r
        for (int r = 1; r <= 3; ++r) {
            CbfParams pr = P;
            pr.r = r;
            const auto frr = solve_forward(u0, pr, ControlOperatorD::identity(), {},
                                           ForcingSpec::none(), opt.T, opt.dt, 10);
            AdjointSpec spec;
            spec.terminal = unit_field();
            spec.rhs.assign(nn, 0.8 * unit_field());
            FieldSeries gsrc(nn, 0.6 * unit_field());
            push_leq(out, "discrete duality (r=" + std::to_string(r) + ")",
                     duality_check(frr.traj, pr, unit_field(), gsrc, spec), 1e-11);
            if (r == P.r) {
                const auto adj = solve_adjoint(frr.traj, pr, spec);
                push_geq(out, "adjoint energy bound margin",
                         adjoint_bound_margin(frr.ledger, pr, adj, spec), 0.0);
            }
        }

        // continuous-adjoint consistency: the source duals approach the
        // directly integrated continuous adjoint at second order
        {
            std::vector<double> dts{2e-3, 1e-3, 5e-4}, gaps;
            const SpectralVecField hf = unit_field(3.0), tf = unit_field(3.0);
            for (double dt : dts) {
                const auto frr = solve_forward(u0, P, ControlOperatorD::identity(), {},
                                               ForcingSpec::none(), 0.1, dt, 10);
                const size_t m = static_cast<size_t>(frr.traj.n_steps) + 1;
                AdjointSpec spec;
                spec.terminal = tf;
                spec.rhs.reserve(m);
                for (size_t k = 0; k < m; ++k)
                    spec.rhs.push_back(std::cos(3.0 * k * dt) * hf);
                const auto adj = solve_adjoint(frr.traj, P, spec);
                const auto q = solve_adjoint_continuous(frr.traj, P, spec);
                double worst = 0.0;
                for (size_t k = 1; k + 1 < m; ++k)
                    worst = std::max(worst, norm_H(adj.source_dual[k] - q.stored[k]));
                gaps.push_back(worst);
            }
            push_geq(out, "continuous-adjoint consistency order",
                     fit_loglog_slope(dts, gaps), 1.8);
        }

        // Gateaux differentiability of the control-to-state map
        FieldSeries Ub(nn, SpectralVecField(g)), Ud(nn, unit_field());
        push_geq(out, "control-to-state Gateaux slope",
                 gateaux_check(u0, P, ControlOperatorD::identity(), ForcingSpec::none(), Ub,
                               Ud, opt.T, opt.dt, {1e-2, 1e-3, 1e-4, 1e-5}),
                 0.9);

        // control-to-state Lipschitz constant stable under tau-halving
        {
            const auto base = solve_forward(u0, P, ControlOperatorD::identity(), Ub,
                                            ForcingSpec::none(), opt.T, opt.dt, 1);
            auto sup_diff = [&](double tau) {
                FieldSeries Ut(nn, SpectralVecField(g));
                for (size_t k = 0; k < nn; ++k) Ut[k].add_scaled(tau, Ud[k]);
                const auto pert = solve_forward(u0, P, ControlOperatorD::identity(), Ut,
                                                ForcingSpec::none(), opt.T, opt.dt, 1);
                double worst = 0.0;
                for (size_t k = 0; k < nn; ++k)
                    worst = std::max(
                        worst, norm_H(pert.traj.stored[k] - base.traj.stored[k]));
                return worst;
            };
            const double c1 = sup_diff(1e-2) / 1e-2;
            const double c2 = sup_diff(5e-3) / 5e-3;
            push_leq(out, "control-to-state Lipschitz stability",
                     std::abs(c1 - c2) / std::max(1e-30, c1), 0.05);
        }
    }

    // --- gradients and optimality ---------------------------------------------
    {
        const SpectralVecField u0 = unit_field();
        ControlProblem prob;
        prob.grid = g;
        prob.params = P;
        prob.u0 = u0;
        prob.T = opt.T;
        prob.dt = opt.dt;
        const size_t nn = prob.n_nodes();
        FieldSeries Uref(nn, 0.3 * unit_field());
        const auto ref = solve_forward(u0, P, prob.cost.D, Uref, ForcingSpec::none(), prob.T,
                                       prob.dt, 1);
        prob.cost.u_d = ref.traj.stored;
        prob.cost.u_f = ref.traj.final_state();

        FieldSeries U(nn, 0.1 * unit_field());
        const auto ev = cost_and_gradient(prob, U);
        const ControlMetric metric = ControlMetric::trapezoid(nn, prob.dt);

        const FieldSeries dU(nn, unit_field());
        const double gd = metric.dot(ev.grad, dU);
        const double tau = 1e-4;
        FieldSeries Up = U, Um = U;
        axpy(tau, dU, Up);
        axpy(-tau, dU, Um);
        const auto fp =
            solve_forward(u0, P, prob.cost.D, Up, prob.f, prob.T, prob.dt, 1);
        const auto fm =
            solve_forward(u0, P, prob.cost.D, Um, prob.f, prob.T, prob.dt, 1);
        const double fd = (evaluate_cost(fp.traj, Up, prob.cost, P) -
                           evaluate_cost(fm.traj, Um, prob.cost, P)) /
                          (2.0 * tau);
        push_leq(out, "FD gradient agreement (distributed)",
                 std::abs(gd - fd) / std::max(1e-30, std::abs(gd)), 1e-7);

        const double pr = pontryagin_residual(U, ev.adj, prob.cost, prob.dt);
        const double gn2 = metric.dot(ev.grad, ev.grad);
        push_leq(out, "Pontryagin residual vs gradient norm",
                 std::abs(4.0 * prob.cost.w_control * pr - gn2) / std::max(1e-30, gn2),
                 1e-10);

        // initial-data gradient
        auto acfg = generate_twin_data(u0, P, ForcingSpec::none(), opt.T, opt.dt, 0.0,
                                       opt.seed + 999);
        acfg.w_enstrophy = 0.0;
        const SpectralVecField U0g = 0.5 * unit_field();
        const auto aev = assimilation_cost_and_gradient(U0g, acfg, P, ForcingSpec::none());
        const SpectralVecField dU0 = unit_field();
        const double agd = inner_product(aev.grad, dU0, Space::H);
        SpectralVecField U0p = U0g, U0m = U0g;
        U0p.add_scaled(tau, dU0);
        U0m.add_scaled(-tau, dU0);
        const double afd =
            (assimilation_cost_and_gradient(U0p, acfg, P, ForcingSpec::none()).cost -
             assimilation_cost_and_gradient(U0m, acfg, P, ForcingSpec::none()).cost) /
            (2.0 * tau);
        push_leq(out, "FD gradient agreement (initial data)",
                 std::abs(agd - afd) / std::max(1e-30, std::abs(agd)), 1e-7);
    }

    return out;
}

} // namespace cbf
