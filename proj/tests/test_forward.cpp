#include <catch2/catch_amalgamated.hpp>

#include "cbf/benchmarks.hpp"
#include "cbf/linearized.hpp"

using namespace cbf;

namespace {

const GridSpec kGrid{32, 2.0 * std::numbers::pi, DealiasRule::OneHalf};
const CbfParams kParams{0.5, 0.1, 1.0, 3};

SpectralVecField unit_random(uint64_t seed, double decay = 2.0) {
    SpectralVecField u = random_divfree_field(kGrid, seed, decay);
    u *= 1.0 / norm_H(u);
    return u;
}

} // namespace

TEST_CASE("pure shear decay is integrated exactly", "[forward]") {
    CbfParams lin = kParams;
    lin.beta = 0.0;
    bench::DecayBenchmark b{kGrid, lin, 1.4, 0.0};
    REQUIRE(b.run_error(0.2, 2e-3) <= 1e-12);

    // kinetic ledger column tracks e^{-2(mu+alpha)t} E0
    const auto fr = solve_forward(b.exact(0.0), lin, ControlOperatorD::identity(), {},
                                  ForcingSpec::none(), 0.2, 2e-3, 10);
    const double e0 = fr.ledger.kinetic.front();
    for (size_t k = 0; k < fr.ledger.n_nodes(); ++k) {
        const double expect = std::exp(-2.0 * b.rate() * fr.ledger.t[k]) * e0;
        REQUIRE(std::abs(fr.ledger.kinetic[k] - expect) <= 1e-11 * e0);
    }
}

TEST_CASE("zero data stays zero", "[forward]") {
    const auto fr = solve_forward(SpectralVecField(kGrid), kParams,
                                  ControlOperatorD::identity(), {}, ForcingSpec::none(), 0.05,
                                  1e-3, 10);
    for (const auto& u : fr.traj.stored) REQUIRE(norm_H(u) == 0.0);
    REQUIRE(energy_equality_residual(fr.traj, fr.ledger) == 0.0);
    REQUIRE(fr.ledger.K_T == 0.0);
    REQUIRE(apriori_bound_check(fr.traj, fr.ledger) == 0.0);
}

TEST_CASE("unforced energy decays monotonically", "[forward]") {
    const auto fr = solve_forward(unit_random(1), kParams, ControlOperatorD::identity(), {},
                                  ForcingSpec::none(), 0.1, 1e-3, 10);
    for (size_t k = 1; k < fr.ledger.n_nodes(); ++k)
        REQUIRE(fr.ledger.kinetic[k] <= fr.ledger.kinetic[k - 1] * (1.0 + 1e-14));
}

TEST_CASE("manufactured decay benchmark converges at second order", "[forward]") {
    bench::DecayBenchmark b{kGrid, kParams, 1.0, 6.0};
    const std::vector<double> dts{4e-3, 2e-3, 1e-3};
    std::vector<double> errs;
    for (double dt : dts) errs.push_back(b.run_error(0.12, dt));
    const double slope = fit_loglog_slope(dts, errs);
    REQUIRE(slope >= 1.8);
    REQUIRE(slope <= 2.2);
}

TEST_CASE("energy equality residual converges at second order", "[forward]") {
    const SpectralVecField u0 = unit_random(2);
    const std::vector<double> dts{4e-3, 2e-3, 1e-3};
    std::vector<double> errs;
    for (double dt : dts) {
        const auto fr = solve_forward(u0, kParams, ControlOperatorD::identity(), {},
                                      ForcingSpec::none(), 0.12, dt, 10);
        errs.push_back(energy_equality_residual(fr.traj, fr.ledger));
    }
    const double slope = fit_loglog_slope(dts, errs);
    REQUIRE(slope >= 1.8);
    REQUIRE(slope <= 2.2);
}

TEST_CASE("forced run: equality residual small, a-priori bound honored", "[forward]") {
    const SpectralVecField u0 = unit_random(3);
    const size_t nn = 501;
    FieldSeries U(nn, 0.4 * unit_random(4));
    const ForcingSpec f = ForcingSpec::constant_field(0.6 * unit_random(5));
    const auto fr =
        solve_forward(u0, kParams, ControlOperatorD::identity(), U, f, 0.5, 1e-3, 10);
    REQUIRE(energy_equality_residual(fr.traj, fr.ledger) <= 1e-4);
    REQUIRE(apriori_bound_check(fr.traj, fr.ledger) >= -1e-6 * fr.ledger.K_T);
    // iterates stay solenoidal and mean-free
    for (const auto& u : fr.traj.stored) {
        REQUIRE(max_divergence(u) <= 1e-12 * norm_H(u));
        REQUIRE(std::abs(u.at(0, 0, 0)) == 0.0);
        REQUIRE(std::abs(u.at(1, 0, 0)) == 0.0);
    }
}

TEST_CASE("checkpoint stride divides the step count with endpoints stored", "[forward]") {
    REQUIRE(effective_stride(100, 10) == 10);
    REQUIRE(effective_stride(100, 7) == 5);
    REQUIRE(effective_stride(97, 10) == 1);
    const auto fr = solve_forward(unit_random(6), kParams, ControlOperatorD::identity(), {},
                                  ForcingSpec::none(), 0.05, 1e-3, 7);
    REQUIRE(fr.traj.checkpoint_stride == 5);
    REQUIRE(fr.traj.n_stored() == 11);
    REQUIRE(fr.traj.is_stored(0));
    REQUIRE(fr.traj.is_stored(50));
    REQUIRE_THROWS_AS(fr.traj.at_step(3), std::invalid_argument);
}

TEST_CASE("solver rejects bad inputs and reports blowup", "[forward]") {
    const SpectralVecField u0 = unit_random(7);
    REQUIRE_THROWS_AS(solve_forward(u0, kParams, ControlOperatorD::identity(), {},
                                    ForcingSpec::none(), 0.05, 1.3e-3, 10),
                      std::invalid_argument);
    FieldSeries misaligned(13, SpectralVecField(kGrid));
    REQUIRE_THROWS_AS(solve_forward(u0, kParams, ControlOperatorD::identity(), misaligned,
                                    ForcingSpec::none(), 0.05, 1e-3, 10),
                      std::invalid_argument);
    try {
        solve_forward(2e12 * u0, kParams, ControlOperatorD::identity(), {},
                      ForcingSpec::none(), 0.05, 1e-3, 10);
        FAIL("expected blowup");
    } catch (const BlowupError& e) {
        REQUIRE(e.step == 0);
    }
}

TEST_CASE("control-to-state map is Lipschitz in the control", "[forward]") {
    const SpectralVecField u0 = unit_random(8);
    const size_t nn = 51;
    const FieldSeries Ud(nn, unit_random(9));
    auto sup_diff = [&](double tau) {
        FieldSeries U(nn, SpectralVecField(kGrid));
        for (auto& f : U) f.add_scaled(tau, Ud[0]);
        const auto base = solve_forward(u0, kParams, ControlOperatorD::identity(), {},
                                        ForcingSpec::none(), 0.05, 1e-3, 1);
        const auto pert = solve_forward(u0, kParams, ControlOperatorD::identity(), U,
                                        ForcingSpec::none(), 0.05, 1e-3, 1);
        double worst = 0.0;
        for (size_t k = 0; k < nn; ++k)
            worst = std::max(worst, norm_H(pert.traj.stored[k] - base.traj.stored[k]));
        return worst;
    };
    const double c1 = sup_diff(1e-2) / 1e-2;
    const double c2 = sup_diff(5e-3) / 5e-3;
    REQUIRE(std::abs(c1 - c2) / c1 < 0.05); // constant stable under tau-halving

    // explicit bound: sup ||du||^2 <= (2 tau^2 / mu) |D|^2 int |U|^2 e^{8 K_T / mu^2}
    const double tau = 1e-2;
    const auto base = solve_forward(u0, kParams, ControlOperatorD::identity(), {},
                                    ForcingSpec::none(), 0.05, 1e-3, 1);
    const double dnorm2 = 1.0 / kGrid.lambda1(); // |D|_{L(U,V')}^2 for identity
    std::vector<double> un(nn, norm_H2(Ud[0]));
    const double intU = detail::trapezoid(un, 1e-3);
    const double bound = 2.0 * tau * tau / kParams.mu * dnorm2 * intU *
                         std::exp(8.0 * base.ledger.K_T / (kParams.mu * kParams.mu));
    const double sup = sup_diff(tau);
    REQUIRE(sup * sup <= bound);
}
