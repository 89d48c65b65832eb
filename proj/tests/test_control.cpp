#include <catch2/catch_amalgamated.hpp>

#include "cbf/optimize.hpp"

using namespace cbf;

namespace {

const GridSpec kGrid{32, 2.0 * std::numbers::pi, DealiasRule::OneHalf};
const CbfParams kParams{0.5, 0.1, 1.0, 3};

SpectralVecField unit_random(uint64_t seed, double decay = 2.0) {
    SpectralVecField u = random_divfree_field(kGrid, seed, decay);
    u *= 1.0 / norm_H(u);
    return u;
}

/// Tracking problem whose reference trajectory is reachable: u_d comes from a
/// run driven by a known control. The control penalty is kept small so the
/// attainable cost sits well below the zero-control cost.
ControlProblem tracking_problem(double T, double w_enstrophy = 0.0,
                                double w_control = 1e-3) {
    ControlProblem prob;
    prob.grid = kGrid;
    prob.params = kParams;
    prob.u0 = unit_random(1);
    prob.T = T;
    prob.dt = 1e-3;
    prob.cost.w_enstrophy = w_enstrophy;
    prob.cost.w_control = w_control;
    const FieldSeries Uref(prob.n_nodes(), unit_random(2));
    const auto ref =
        solve_forward(prob.u0, prob.params, prob.cost.D, Uref, prob.f, prob.T, prob.dt, 1);
    prob.cost.u_d = ref.traj.stored;
    prob.cost.u_f = ref.traj.final_state();
    return prob;
}

} // namespace

TEST_CASE("control operators are self-adjoint and bounded", "[control]") {
    const SpectralVecField u = unit_random(11), v = unit_random(12);
    const DealiasRule rule = kGrid.dealias_rule;

    std::vector<ControlOperatorD> ops;
    ops.push_back(ControlOperatorD::identity());
    ops.push_back(ControlOperatorD::low_mode_mask(kGrid, 3));
    std::vector<double> disk(static_cast<size_t>(kGrid.size()), 0.0);
    for (int ix = 0; ix < kGrid.n; ++ix)
        for (int iy = 0; iy < kGrid.n; ++iy)
            if (ix < kGrid.n / 2) disk[static_cast<size_t>(ix) * kGrid.n + iy] = 1.0;
    ops.push_back(ControlOperatorD::region(kGrid, disk));

    for (const auto& D : ops) {
        const double lhs = inner_product(D.apply(u, rule), v, Space::H);
        const double rhs = inner_product(u, D.apply_adjoint(v, rule), Space::H);
        REQUIRE(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
        REQUIRE(norm_H(D.apply(u, rule)) <= D.norm_bound() * norm_H(u) * (1.0 + 1e-12));
    }
    REQUIRE(ops[0].norm_bound() == 1.0);
    REQUIRE(norm_H(ops[0].apply(u, rule) - u) <= 1e-14);

    std::vector<double> bad(static_cast<size_t>(kGrid.size()), 2.0);
    REQUIRE_THROWS_AS(ControlOperatorD::region(kGrid, bad), std::invalid_argument);
    std::vector<double> asym(static_cast<size_t>(kGrid.size()), 0.0);
    asym[kGrid.n + 2] = 1.0; // not even under k -> -k
    REQUIRE_THROWS_AS(ControlOperatorD::spectral(kGrid, asym), std::invalid_argument);
}

TEST_CASE("cost of a perfectly tracked run is zero", "[control]") {
    const double T = 0.02, dt = 1e-3;
    const auto fwd = solve_forward(unit_random(21), kParams, ControlOperatorD::identity(), {},
                                   ForcingSpec::none(), T, dt, 1);
    CostConfig cfg;
    cfg.u_d = fwd.traj.stored;
    cfg.u_f = fwd.traj.final_state();
    cfg.w_enstrophy = 0.0;
    REQUIRE(evaluate_cost(fwd.traj, {}, cfg, kParams) == 0.0);
}

TEST_CASE("cost of the zero run equals the tracked reference energy", "[control]") {
    const double T = 0.02, dt = 1e-3;
    const auto fwd = solve_forward(SpectralVecField(kGrid), kParams,
                                   ControlOperatorD::identity(), {}, ForcingSpec::none(), T,
                                   dt, 1);
    const size_t nn = static_cast<size_t>(fwd.traj.n_steps) + 1;
    CostConfig cfg;
    cfg.w_enstrophy = 0.0;
    cfg.w_terminal = 0.0;
    for (size_t k = 0; k < nn; ++k) cfg.u_d.push_back(std::cos(0.1 * k) * unit_random(22));
    // independent quadrature of w_track int |u_d|^2
    std::vector<double> series(nn);
    for (size_t k = 0; k < nn; ++k) series[k] = norm_H2(cfg.u_d[k]);
    const double expect = cfg.w_track * detail::trapezoid(series, dt);
    const double got = evaluate_cost(fwd.traj, {}, cfg, kParams);
    REQUIRE(std::abs(got - expect) <= 1e-12 * expect);
}

TEST_CASE("cost recomputed through checkpoints matches the stored-node value", "[control]") {
    const double T = 0.05, dt = 1e-3;
    const SpectralVecField u0 = unit_random(23);
    const size_t nn = 51;
    const FieldSeries U(nn, 0.3 * unit_random(24));
    const auto fine = solve_forward(u0, kParams, ControlOperatorD::identity(), U,
                                    ForcingSpec::none(), T, dt, 1);
    const auto coarse = solve_forward(u0, kParams, ControlOperatorD::identity(), U,
                                      ForcingSpec::none(), T, dt, 10);
    CostConfig cfg;
    cfg.u_d.assign(nn, unit_random(25));
    cfg.u_f = unit_random(26);
    const double a = evaluate_cost(fine.traj, U, cfg, kParams);
    const double b = evaluate_cost(coarse.traj, U, cfg, kParams);
    REQUIRE(std::abs(a - b) <= 1e-12 * a);
    REQUIRE_THROWS_AS(evaluate_cost(fine.traj, FieldSeries(3, SpectralVecField(kGrid)), cfg,
                                    kParams),
                      std::invalid_argument);
    CostConfig invalid;
    invalid.w_control = 0.0;
    REQUIRE_THROWS_AS(invalid.validate(), std::invalid_argument);
}

TEST_CASE("gradient vanishes at a perfectly tracked optimum", "[control]") {
    ControlProblem prob;
    prob.grid = kGrid;
    prob.params = kParams;
    prob.u0 = unit_random(31);
    prob.T = 0.02;
    prob.dt = 1e-3;
    prob.cost.w_enstrophy = 0.0; // pure tracking: the zero control is optimal
    const auto ref = solve_forward(prob.u0, prob.params, prob.cost.D, {}, prob.f, prob.T,
                                   prob.dt, 1);
    prob.cost.u_d = ref.traj.stored;
    prob.cost.u_f = ref.traj.final_state();
    const auto ev = cost_and_gradient(prob, prob.zero_control());
    for (const auto& gk : ev.grad) REQUIRE(norm_H(gk) == 0.0);
    REQUIRE(ev.pontryagin == 0.0);

    auto [U, report] = optimize_distributed(prob, prob.zero_control(), OptimizerConfig{});
    REQUIRE(report.termination == "converged_at_start");
    REQUIRE(report.history.size() == 1);
}

TEST_CASE("gradient reduces to the control penalty when state weights vanish", "[control]") {
    ControlProblem prob;
    prob.grid = kGrid;
    prob.params = kParams;
    prob.u0 = unit_random(32);
    prob.T = 0.02;
    prob.dt = 1e-3;
    prob.cost.w_track = 0.0;
    prob.cost.w_enstrophy = 0.0;
    prob.cost.w_terminal = 0.0;
    FieldSeries U(prob.n_nodes(), 0.7 * unit_random(33));
    const auto ev = cost_and_gradient(prob, U);
    for (size_t k = 0; k < U.size(); ++k) {
        SpectralVecField expect = 2.0 * prob.cost.w_control * U[k];
        REQUIRE(norm_H(ev.grad[k] - expect) <= 1e-14);
    }
}

TEST_CASE("adjoint gradient matches central differences", "[control]") {
    ControlProblem prob = tracking_problem(0.05);
    const size_t nn = prob.n_nodes();
    FieldSeries U(nn, 0.2 * unit_random(34));
    const auto ev = cost_and_gradient(prob, U);
    const ControlMetric metric = ControlMetric::trapezoid(nn, prob.dt);
    const double tau = 1e-4;
    for (uint64_t seed : {35u, 36u, 37u}) {
        const FieldSeries dU(nn, unit_random(seed));
        const double gd = metric.dot(ev.grad, dU);
        FieldSeries Up = U, Um = U;
        axpy(tau, dU, Up);
        axpy(-tau, dU, Um);
        const auto fp =
            solve_forward(prob.u0, prob.params, prob.cost.D, Up, prob.f, prob.T, prob.dt, 1);
        const auto fm =
            solve_forward(prob.u0, prob.params, prob.cost.D, Um, prob.f, prob.T, prob.dt, 1);
        const double fd = (evaluate_cost(fp.traj, Up, prob.cost, prob.params) -
                           evaluate_cost(fm.traj, Um, prob.cost, prob.params)) /
                          (2.0 * tau);
        REQUIRE(std::abs(gd - fd) <= 1e-7 * std::abs(gd));
    }
}

TEST_CASE("adjoint gradients stay exact for masked and regional controls", "[control]") {
    // D* correctness across all operator kinds: FD agreement in the control
    std::vector<ControlOperatorD> ops;
    ops.push_back(ControlOperatorD::low_mode_mask(kGrid, 4));
    std::vector<double> half(static_cast<size_t>(kGrid.size()), 0.0);
    for (int ix = 0; ix < kGrid.n; ++ix)
        for (int iy = 0; iy < kGrid.n; ++iy)
            if (iy < kGrid.n / 2) half[static_cast<size_t>(ix) * kGrid.n + iy] = 1.0;
    ops.push_back(ControlOperatorD::region(kGrid, half));

    for (const auto& D : ops) {
        ControlProblem prob = tracking_problem(0.03);
        prob.cost.D = D;
        const size_t nn = prob.n_nodes();
        FieldSeries U(nn, 0.2 * unit_random(71));
        const auto ev = cost_and_gradient(prob, U);
        const ControlMetric metric = ControlMetric::trapezoid(nn, prob.dt);
        const FieldSeries dU(nn, unit_random(72));
        const double gd = metric.dot(ev.grad, dU);
        const double tau = 1e-4;
        FieldSeries Up = U, Um = U;
        axpy(tau, dU, Up);
        axpy(-tau, dU, Um);
        const auto fp =
            solve_forward(prob.u0, prob.params, D, Up, prob.f, prob.T, prob.dt, 1);
        const auto fm =
            solve_forward(prob.u0, prob.params, D, Um, prob.f, prob.T, prob.dt, 1);
        const double fd = (evaluate_cost(fp.traj, Up, prob.cost, prob.params) -
                           evaluate_cost(fm.traj, Um, prob.cost, prob.params)) /
                          (2.0 * tau);
        REQUIRE(std::abs(gd - fd) <= 1e-7 * std::abs(gd));
    }
}

TEST_CASE("minimum-principle residual: closed forms and gradient identity", "[control]") {
    ControlProblem prob = tracking_problem(0.05);
    const size_t nn = prob.n_nodes();
    FieldSeries U(nn, 0.2 * unit_random(38));
    const auto ev = cost_and_gradient(prob, U);

    // U = -D* p / (2 w_control) has zero residual
    FieldSeries Ustar;
    for (size_t k = 0; k < nn; ++k) {
        SpectralVecField f =
            prob.cost.D.apply_adjoint(ev.adj.source_dual[k], kGrid.dealias_rule);
        f *= -1.0 / (2.0 * prob.cost.w_control);
        Ustar.push_back(std::move(f));
    }
    const double scale = pontryagin_residual({}, ev.adj, prob.cost, prob.dt);
    REQUIRE(pontryagin_residual(Ustar, ev.adj, prob.cost, prob.dt) <= 1e-25 * scale);

    // U = 0, D = identity: residual = int |p|^2 / (4 w_control)
    std::vector<double> pn(nn);
    for (size_t k = 0; k < nn; ++k) pn[k] = norm_H2(ev.adj.source_dual[k]);
    const double expect = detail::trapezoid(pn, prob.dt) / (4.0 * prob.cost.w_control);
    REQUIRE(std::abs(scale - expect) <= 1e-12 * expect);

    // residual and squared gradient norm agree up to the algebraic factor
    const ControlMetric metric = ControlMetric::trapezoid(nn, prob.dt);
    const double gn2 = metric.dot(ev.grad, ev.grad);
    REQUIRE(std::abs(4.0 * prob.cost.w_control * ev.pontryagin - gn2) <= 1e-10 * gn2);
}

TEST_CASE("gradient descent satisfies the Armijo decrease at every step", "[control]") {
    ControlProblem prob = tracking_problem(0.03);
    OptimizerConfig cfg;
    cfg.method = OptimMethod::GradientDescent;
    cfg.max_iters = 8;
    auto [U, report] = optimize_distributed(prob, prob.zero_control(), cfg);
    REQUIRE(report.history.size() >= 2);
    for (size_t i = 1; i < report.history.size(); ++i) {
        const auto& prev = report.history[i - 1];
        const auto& cur = report.history[i];
        REQUIRE(cur.cost <= prev.cost);
        REQUIRE(cur.cost <=
                prev.cost - cfg.armijo_c1 * cur.step * prev.grad_norm * prev.grad_norm +
                    1e-14 * prev.cost);
    }
}

TEST_CASE("tracking optimization reduces the cost by an order of magnitude", "[control]") {
    ControlProblem prob = tracking_problem(0.1);
    OptimizerConfig cfg;
    cfg.max_iters = 60;
    cfg.grad_tol = 1e-8;
    auto [U, report] = optimize_distributed(prob, prob.zero_control(), cfg);
    REQUIRE(report.history.size() <= 101);
    REQUIRE(report.final_cost <= 0.1 * report.history.front().cost);
    // converged point: Pontryagin residual consistent with the gradient norm
    const double gn2 = report.final_grad_norm * report.final_grad_norm;
    REQUIRE(std::abs(4.0 * prob.cost.w_control * report.final_pontryagin - gn2) <=
            1e-10 * std::max(gn2, 1e-30));
}

TEST_CASE("optimizer methods agree on the reachable tracking problem", "[control]") {
    ControlProblem prob = tracking_problem(0.02);
    OptimizerConfig cfg;
    cfg.max_iters = 25;
    cfg.grad_tol = 1e-6;
    std::vector<double> finals;
    for (OptimMethod m :
         {OptimMethod::GradientDescent, OptimMethod::NonlinearCG, OptimMethod::LBFGS}) {
        cfg.method = m;
        auto [U, report] = optimize_distributed(prob, prob.zero_control(), cfg);
        finals.push_back(report.final_cost);
        for (size_t i = 1; i < report.history.size(); ++i)
            REQUIRE(report.history[i].cost <= report.history[i - 1].cost);
    }
    REQUIRE(finals[2] <= finals[0] * (1.0 + 1e-9)); // LBFGS no worse than GD
}

TEST_CASE("second-order form vanishes at zero perturbation and stays nonnegative "
          "at the optimum",
          "[control]") {
    ControlProblem prob = tracking_problem(0.05);
    OptimizerConfig cfg;
    cfg.max_iters = 80;
    cfg.grad_tol = 1e-10;
    auto [Ustar, report] = optimize_distributed(prob, prob.zero_control(), cfg);
    const auto ev = cost_and_gradient(prob, Ustar);

    const FieldSeries zero(prob.n_nodes(), SpectralVecField(kGrid));
    REQUIRE(second_order_form(prob, Ustar, ev.fwd.traj, ev.adj, zero) == 0.0);

    for (uint64_t seed : {41u, 42u, 43u, 44u}) {
        FieldSeries dU(prob.n_nodes(), 0.3 * unit_random(seed));
        double scale = 0.0;
        const double Q = second_order_form(prob, Ustar, ev.fwd.traj, ev.adj, dU, &scale);
        REQUIRE(Q >= -1e-6 * scale);
    }
    CbfParams r2 = kParams;
    r2.r = 2;
    ControlProblem bad = prob;
    bad.params = r2;
    REQUIRE_THROWS_AS(second_order_form(bad, Ustar, ev.fwd.traj, ev.adj, zero),
                      std::invalid_argument);
}

TEST_CASE("second-order form loses its cubic term when beta vanishes", "[control]") {
    // with beta = 0 only the quadratic part and the convection pairing remain
    ControlProblem prob = tracking_problem(0.02);
    CbfParams ns = kParams;
    ns.beta = 0.0;
    prob.params = ns;
    const FieldSeries U0 = prob.zero_control();
    const auto ev = cost_and_gradient(prob, U0);
    const FieldSeries dU(prob.n_nodes(), 0.4 * unit_random(45));
    double scale = 0.0;
    const double Q = second_order_form(prob, U0, ev.fwd.traj, ev.adj, dU, &scale);
    // independent assembly of the Navier-Stokes form from the primitives
    const auto pert =
        solve_forward(prob.u0, ns, prob.cost.D, dU, prob.f, prob.T, prob.dt, 1);
    const auto c = detail::trapezoid_weights(prob.n_nodes());
    double expect = 0.0;
    for (size_t k = 0; k < prob.n_nodes(); ++k) {
        const SpectralVecField u = pert.traj.stored[k] - ev.fwd.traj.stored[k];
        expect += c[k] * prob.dt *
                  (prob.cost.w_track * norm_H2(u) + prob.cost.w_enstrophy * norm_V2(u) +
                   prob.cost.w_control * norm_H2(dU[k]) -
                   trilinear_b(u, u, ev.adj.source_dual[k]));
    }
    expect += prob.cost.w_terminal *
              norm_H2(pert.traj.final_state() - ev.fwd.traj.final_state());
    REQUIRE(std::abs(Q - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
}

TEST_CASE("multistart runs are deterministic and collapse for small T", "[control]") {
    auto make_problem = [&](double T) { return tracking_problem(T); };
    OptimizerConfig cfg;
    cfg.max_iters = 60;
    cfg.grad_tol = 1e-10;
    cfg.seed = 7;
    const auto single = multistart_uniqueness(make_problem, {0.02}, 1, cfg, 0.5);
    REQUIRE(single.front().max_pairwise_distance == 0.0);

    const auto a = multistart_uniqueness(make_problem, {0.02}, 2, cfg, 0.5);
    const auto b = multistart_uniqueness(make_problem, {0.02}, 2, cfg, 0.5);
    REQUIRE(a.front().relative_spread == b.front().relative_spread);
    REQUIRE(a.front().relative_spread <= 1e-6);
    REQUIRE_THROWS_AS(multistart_uniqueness(make_problem, {0.02, 0.01}, 2, cfg),
                      std::invalid_argument);

    // the CBF_THREADS worker cap does not change the result
    setenv("CBF_THREADS", "2", 1);
    const auto c = multistart_uniqueness(make_problem, {0.02}, 2, cfg, 0.5);
    unsetenv("CBF_THREADS");
    REQUIRE(c.front().relative_spread == a.front().relative_spread);
    REQUIRE(c.front().max_pairwise_distance == a.front().max_pairwise_distance);
}
