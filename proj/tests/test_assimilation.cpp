#include <catch2/catch_amalgamated.hpp>

#include "cbf/assimilate.hpp"

using namespace cbf;

namespace {

const GridSpec kGrid{32, 2.0 * std::numbers::pi, DealiasRule::OneHalf};
const CbfParams kParams{0.5, 0.1, 1.0, 3};

SpectralVecField unit_random(uint64_t seed, double decay = 3.0) {
    SpectralVecField u = random_divfree_field(kGrid, seed, decay);
    u *= 1.0 / norm_H(u);
    return u;
}

} // namespace

TEST_CASE("twin data reproduces the truth at zero noise", "[assim]") {
    const SpectralVecField truth = unit_random(1);
    const auto cfg = generate_twin_data(truth, kParams, ForcingSpec::none(), 0.02, 1e-3, 0.0, 9);
    const auto fwd = solve_forward(truth, kParams, ControlOperatorD::identity(), {},
                                   ForcingSpec::none(), 0.02, 1e-3, 1);
    REQUIRE(cfg.u_M.size() == fwd.traj.stored.size());
    for (size_t k = 0; k < cfg.u_M.size(); ++k)
        REQUIRE(norm_H(cfg.u_M[k] - fwd.traj.stored[k]) == 0.0);
    REQUIRE(norm_H(cfg.u_M_f - fwd.traj.final_state()) == 0.0);
}

TEST_CASE("twin data is reproducible and carries the requested noise", "[assim]") {
    const SpectralVecField truth = unit_random(2);
    const auto a = generate_twin_data(truth, kParams, ForcingSpec::none(), 0.02, 1e-3, 1e-2, 5);
    const auto b = generate_twin_data(truth, kParams, ForcingSpec::none(), 0.02, 1e-3, 1e-2, 5);
    const auto clean =
        generate_twin_data(truth, kParams, ForcingSpec::none(), 0.02, 1e-3, 0.0, 5);
    for (size_t k = 0; k < a.u_M.size(); ++k) {
        REQUIRE(norm_H(a.u_M[k] - b.u_M[k]) == 0.0);
        const double rel = norm_H(a.u_M[k] - clean.u_M[k]) / norm_H(clean.u_M[k]);
        REQUIRE(rel >= 0.5e-2);
        REQUIRE(rel <= 2e-2);
    }
    REQUIRE_THROWS_AS(
        generate_twin_data(truth, kParams, ForcingSpec::none(), 0.02, 1e-3, -0.1, 5),
        std::invalid_argument);
}

TEST_CASE("assimilation gradient matches finite differences", "[assim]") {
    auto cfg = generate_twin_data(unit_random(3), kParams, ForcingSpec::none(), 0.05, 1e-3,
                                  0.0, 11);
    cfg.w_enstrophy = 0.0;
    const SpectralVecField U = 0.5 * unit_random(4);
    const auto ev = assimilation_cost_and_gradient(U, cfg, kParams, ForcingSpec::none());
    REQUIRE(ev.stationarity == norm_H(ev.grad)); // same quantity by construction
    const double tau = 1e-4;
    for (uint64_t seed : {5u, 6u}) {
        const SpectralVecField dU = unit_random(seed);
        const double gd = inner_product(ev.grad, dU, Space::H);
        SpectralVecField Up = U, Um = U;
        Up.add_scaled(tau, dU);
        Um.add_scaled(-tau, dU);
        const double fd =
            (assimilation_cost_and_gradient(Up, cfg, kParams, ForcingSpec::none()).cost -
             assimilation_cost_and_gradient(Um, cfg, kParams, ForcingSpec::none()).cost) /
            (2.0 * tau);
        REQUIRE(std::abs(gd - fd) <= 1e-7 * std::abs(gd));
    }
}

TEST_CASE("at the truth the gradient is pure regularization", "[assim]") {
    // zero-noise data from the same solver: the tracking terms vanish
    // identically and only 2 w_init u0 remains
    const SpectralVecField truth = unit_random(31);
    auto cfg = generate_twin_data(truth, kParams, ForcingSpec::none(), 0.02, 1e-3, 0.0, 33);
    cfg.w_enstrophy = 0.0;
    const auto ev = assimilation_cost_and_gradient(truth, cfg, kParams, ForcingSpec::none());
    SpectralVecField expect = truth;
    expect *= 2.0 * cfg.w_init;
    REQUIRE(norm_H(ev.grad - expect) <= 1e-15);
}

TEST_CASE("zero measurements recover the zero initial datum", "[assim]") {
    AssimConfig cfg;
    cfg.T = 0.02;
    cfg.dt = 1e-3;
    cfg.u_M.assign(cfg.n_nodes(), SpectralVecField(kGrid));
    cfg.u_M_f = SpectralVecField(kGrid);
    cfg.w_enstrophy = 0.0;
    auto [u0, report] =
        assimilate(cfg, kParams, ForcingSpec::none(), OptimizerConfig{}, kGrid);
    REQUIRE(norm_H(u0) == 0.0);
    REQUIRE(report.termination == "converged_at_start");
}

TEST_CASE("zero-noise twin experiment recovers the truth", "[assim]") {
    const SpectralVecField truth = unit_random(7);
    auto cfg = generate_twin_data(truth, kParams, ForcingSpec::none(), 0.1, 1e-3, 0.0, 13);
    cfg.w_enstrophy = 0.0;
    cfg.w_init = 1e-4;
    OptimizerConfig opt;
    opt.max_iters = 60;
    opt.grad_tol = 1e-9;
    auto [u0, report] = assimilate(cfg, kParams, ForcingSpec::none(), opt, kGrid);
    const double rel = norm_H(u0 - truth) / norm_H(truth);
    REQUIRE(rel <= 5e-2);
    for (size_t i = 1; i < report.history.size(); ++i)
        REQUIRE(report.history[i].cost <= report.history[i - 1].cost);
}

TEST_CASE("misaligned measurements are rejected", "[assim]") {
    AssimConfig cfg;
    cfg.T = 0.02;
    cfg.dt = 1e-3;
    cfg.u_M.assign(7, SpectralVecField(kGrid));
    REQUIRE_THROWS_AS(assimilate(cfg, kParams, ForcingSpec::none(), OptimizerConfig{}, kGrid),
                      std::invalid_argument);
    AssimConfig bad;
    bad.w_init = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("initial-data second-order form is nonnegative at the optimum", "[assim]") {
    const SpectralVecField truth = unit_random(8);
    auto cfg = generate_twin_data(truth, kParams, ForcingSpec::none(), 0.05, 1e-3, 0.0, 17);
    cfg.w_enstrophy = 0.0;
    cfg.w_init = 1e-3;
    OptimizerConfig opt;
    opt.max_iters = 60;
    opt.grad_tol = 1e-10;
    auto [u0, report] = assimilate(cfg, kParams, ForcingSpec::none(), opt, kGrid);
    const auto ev = assimilation_cost_and_gradient(u0, cfg, kParams, ForcingSpec::none());
    for (uint64_t seed : {21u, 22u, 23u}) {
        const SpectralVecField dU = 0.3 * unit_random(seed);
        const double Q = assimilation_second_order_form(cfg, kParams, ForcingSpec::none(), u0,
                                                        ev.fwd.traj, ev.adj, dU);
        REQUIRE(Q >= -1e-6 * std::max(1.0, std::abs(Q)));
    }
}
