#include <catch2/catch_amalgamated.hpp>

#include "cbf/linearized.hpp"
#include "cbf/operators.hpp"

using namespace cbf;

namespace {

const GridSpec kGrid{32, 2.0 * std::numbers::pi, DealiasRule::OneHalf};

SpectralVecField unit_random(uint64_t seed, double decay = 2.0) {
    SpectralVecField u = random_divfree_field(kGrid, seed, decay);
    u *= 1.0 / norm_H(u);
    return u;
}

SpectralVecField sine_y(double a) {
    SpectralVecField u(kGrid); // a (sin y, 0)
    u.at(0, 0, 1) = Complex(0.0, -0.5 * a);
    u.at(0, 0, kGrid.n - 1) = Complex(0.0, 0.5 * a);
    return u;
}

} // namespace

TEST_CASE("CbfParams validation and criticality flag", "[operators]") {
    CbfParams p{1.0, 0.0, 0.5, 3};
    p.validate();
    REQUIRE(p.critical_monotone());
    p.beta = 0.4;
    REQUIRE_FALSE(p.critical_monotone());
    p.r = 2;
    p.beta = 10.0;
    REQUIRE_FALSE(p.critical_monotone());
    p.mu = -1.0;
    REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
    p.mu = 1.0;
    p.r = 4;
    REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("Stokes operator scales modes by |k|^2", "[operators]") {
    SpectralVecField u(kGrid);
    // mode k = (1,2) with uhat perpendicular to k: (2, -1)
    u.at(0, 1, 2) = Complex(2.0, 0.5);
    u.at(1, 1, 2) = Complex(-1.0, -0.25);
    u.at(0, kGrid.n - 1, kGrid.n - 2) = std::conj(u.at(0, 1, 2));
    u.at(1, kGrid.n - 1, kGrid.n - 2) = std::conj(u.at(1, 1, 2));
    const SpectralVecField au = stokes_A(u);
    REQUIRE(au.at(0, 1, 2) == 5.0 * u.at(0, 1, 2));
    REQUIRE(au.at(1, 1, 2) == 5.0 * u.at(1, 1, 2));
    REQUIRE(norm_H(stokes_A(SpectralVecField(kGrid))) == 0.0);

    const SpectralVecField a = unit_random(41), b = unit_random(42);
    const double s1 = inner_product(stokes_A(a), b, Space::H);
    const double s2 = inner_product(a, stokes_A(b), Space::H);
    REQUIRE(std::abs(s1 - s2) <= 1e-12 * std::abs(s1));
}

TEST_CASE("self-advection of a shear mode vanishes", "[operators]") {
    const SpectralVecField u = sine_y(1.3);
    REQUIRE(norm_H(convection_B(u, u)) <= 1e-12);
}

TEST_CASE("trilinear form: antisymmetry, zero diagonal, operator agreement", "[operators]") {
    for (uint64_t seed : {51u, 52u, 53u}) {
        const SpectralVecField u = unit_random(seed), v = unit_random(seed + 10),
                               w = unit_random(seed + 20);
        const double scale = norm_V(u) * norm_V(v) * norm_V(w);
        REQUIRE(std::abs(trilinear_b(u, v, v)) <= 1e-11 * scale);
        REQUIRE(std::abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) <= 1e-11 * scale);
        REQUIRE(std::abs(trilinear_b(u, v, w) -
                         inner_product(convection_B(u, v), w, Space::H)) <= 1e-12 * scale);
        // Holder bound |b(u,v,w)| <= |u|_L4 |v|_V |w|_L4
        REQUIRE(std::abs(trilinear_b(u, v, w)) <=
                norm(u, Space::L4) * norm_V(v) * norm(w, Space::L4) + 1e-12 * scale);
    }
    const SpectralVecField z(kGrid);
    REQUIRE(trilinear_b(z, unit_random(1), unit_random(2)) == 0.0);
    REQUIRE(trilinear_b(unit_random(1), z, unit_random(2)) == 0.0);
}

TEST_CASE("convection is bilinear", "[operators]") {
    const SpectralVecField u = unit_random(61), v = unit_random(62), w = unit_random(63);
    SpectralVecField combo = 0.7 * v;
    combo.add_scaled(-2.0, w);
    SpectralVecField expect = 0.7 * convection_B(u, v);
    expect.add_scaled(-2.0, convection_B(u, w));
    REQUIRE(norm_H(convection_B(u, combo) - expect) <= 1e-12 * norm_H(expect));
}

TEST_CASE("absorption pointwise kernels", "[operators]") {
    // |u|^2 u at u = (2, 0)
    const Vec2 c = absorption_pointwise({2.0, 0.0}, 3);
    REQUIRE(c.x == 8.0);
    REQUIRE(c.y == 0.0);
    // C'(u) v at u = (1,0), v = (0,1), r = 3: |u|^2 v + 2 (u.v) u = (0,1)
    const Vec2 d = absorption_derivative_pointwise({1.0, 0.0}, {0.0, 1.0}, 3);
    REQUIRE(d.x == 0.0);
    REQUIRE(d.y == 1.0);
    // C''(u)(v,w) at u = (1,0), v = w = (0,1): 2 (w.v) u = (2,0)
    const Vec2 e = absorption_second_pointwise({1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0});
    REQUIRE(e.x == 2.0);
    REQUIRE(e.y == 0.0);
    // r = 2 at u = 0 is defined as 0
    const Vec2 f = absorption_derivative_pointwise({0.0, 0.0}, {3.0, 4.0}, 2);
    REQUIRE(f.x == 0.0);
    REQUIRE(f.y == 0.0);
}

TEST_CASE("cubic absorption of a shear mode has the sin^3 spectrum", "[operators]") {
    // |u|^2 u for u = a (sin y, 0) is a^3 (sin^3 y, 0), and
    // sin^3 y = (3 sin y - sin 3y) / 4
    const double a = 1.7;
    const SpectralVecField cu = absorption_C(sine_y(a), 3);
    const double a3 = a * a * a;
    REQUIRE(std::abs(cu.at(0, 0, 1) - Complex(0.0, -3.0 * a3 / 8.0)) < 1e-13 * a3);
    REQUIRE(std::abs(cu.at(0, 0, 3) - Complex(0.0, a3 / 8.0)) < 1e-13 * a3);
    REQUIRE(std::abs(cu.at(1, 0, 1)) < 1e-14);
}

TEST_CASE("absorption identities per exponent", "[operators]") {
    for (int r = 1; r <= 3; ++r) {
        for (uint64_t seed : {71u, 72u, 73u}) {
            const SpectralVecField u = unit_random(seed), v = unit_random(seed + 7);
            if (r == 1) REQUIRE(norm_H(absorption_C(u, 1) - u) <= 1e-13);
            const double lr = std::pow(norm_Lp(u, r + 1.0), r + 1.0);
            REQUIRE(std::abs(inner_product(absorption_C(u, r), u, Space::H) - lr) <=
                    1e-10 * lr);
            REQUIRE(inner_product(C_prime(u, v, r), v, Space::H) >= -1e-12);
            REQUIRE(absorption_monotonicity_margin(u, v, r) >= -1e-10);
            REQUIRE(absorption_difference_bound_margin(u, v, r) >= -1e-10);
        }
    }
    REQUIRE_THROWS_AS(absorption_C(unit_random(1), 4), std::invalid_argument);
    REQUIRE_THROWS_AS(C_prime(unit_random(1), unit_random(2), 0), std::invalid_argument);
}

TEST_CASE("Gateaux derivative of C by finite differences", "[operators]") {
    const SpectralVecField u = unit_random(81), v = unit_random(82);
    const std::vector<double> taus{1e-2, 1e-3, 1e-4, 1e-5};
    for (int r = 2; r <= 3; ++r) {
        std::vector<double> errs;
        for (double tau : taus) {
            SpectralVecField utv = u;
            utv.add_scaled(tau, v);
            SpectralVecField d = absorption_C(utv, r) - absorption_C(u, r);
            d *= 1.0 / tau;
            d -= C_prime(u, v, r);
            errs.push_back(norm_H(d));
        }
        REQUIRE(fit_loglog_slope(taus, errs) >= 0.9);
    }
    // r = 1 is exactly linear
    SpectralVecField utv = u;
    utv.add_scaled(1e-3, v);
    SpectralVecField d = absorption_C(utv, 1) - absorption_C(u, 1);
    d *= 1e3;
    d -= C_prime(u, v, 1);
    REQUIRE(norm_H(d) <= 1e-10);
}

TEST_CASE("second derivative symmetry and exact cubic Taylor identity", "[operators]") {
    const SpectralVecField u = unit_random(91), v = unit_random(92), w = unit_random(93);
    REQUIRE(norm_H(C_double_prime(u, v, w) - C_double_prime(u, w, v)) <= 1e-14);
    for (uint64_t seed : {94u, 95u, 96u}) {
        const SpectralVecField a = unit_random(seed), b = unit_random(seed + 40);
        REQUIRE(cubic_taylor_residual(a, b) <= 1e-11);
    }
}

TEST_CASE("B' is the derivative of the quadratic convection", "[operators]") {
    const SpectralVecField u = unit_random(101), w = unit_random(102);
    const DealiasRule rule = kGrid.dealias_rule;
    // bilinearity: B'(u)u = 2 B(u,u), B'(0)w = 0
    SpectralVecField diff = B_prime(u, u) - 2.0 * convection_B(u, u);
    REQUIRE(norm_H(diff) <= 1e-13);
    REQUIRE(norm_H(B_prime(SpectralVecField(kGrid), w)) == 0.0);
    // exact quadratic remainder: (B(u+tau w) - B(u)) / tau - B'(u)w = tau B(w,w)
    const double bww = norm_H(convection_B(w, w));
    std::vector<double> taus{1e-2, 1e-3, 1e-4}, errs;
    for (double tau : taus) {
        SpectralVecField utw = u;
        utw.add_scaled(tau, w);
        SpectralVecField d = convection_B(utw, utw, rule) - convection_B(u, u, rule);
        d *= 1.0 / tau;
        d -= B_prime(u, w, rule);
        errs.push_back(norm_H(d));
        REQUIRE(std::abs(norm_H(d) - tau * bww) <= 1e-9 * tau * bww + 1e-14);
    }
    REQUIRE(fit_loglog_slope(taus, errs) >= 0.9);
}

TEST_CASE("B' adjoint satisfies the duality identity", "[operators]") {
    for (uint64_t seed : {111u, 112u, 113u}) {
        const SpectralVecField u = unit_random(seed), q = unit_random(seed + 3),
                               p = unit_random(seed + 6);
        const double lhs = inner_product(B_prime(u, q), p, Space::H);
        const double rhs = inner_product(q, B_prime_adjoint(u, p), Space::H);
        REQUIRE(std::abs(lhs - rhs) <= 1e-11 * std::max(1.0, std::abs(lhs)));
    }
    REQUIRE(norm_H(B_prime_adjoint(SpectralVecField(kGrid), unit_random(1))) == 0.0);
    // consistency with b-antisymmetry at p = u:
    // <B'(u)q, u> = b(u,q,u) + b(q,u,u) = b(u,q,u)
    const SpectralVecField u = unit_random(114), q = unit_random(115);
    const double via_adj = inner_product(q, B_prime_adjoint(u, u), Space::H);
    REQUIRE(std::abs(via_adj - trilinear_b(u, q, u)) <= 1e-11);
}

TEST_CASE("G assembles its parts and satisfies the energy identity", "[operators]") {
    CbfParams p{0.7, 0.0, 0.0, 3};
    const SpectralVecField u = sine_y(0.9); // B(u) = 0, beta = 0
    REQUIRE(norm_H(G_apply(u, p) - 0.7 * stokes_A(u)) <= 1e-13);

    p = CbfParams{0.7, 0.3, 1.2, 3};
    const SpectralVecField v = unit_random(121);
    SpectralVecField lin = G_apply(v, p) - convection_B(v, v);
    lin.add_scaled(-p.beta, absorption_C(v, p.r));
    SpectralVecField expect = p.mu * stokes_A(v);
    expect.add_scaled(p.alpha, v);
    REQUIRE(norm_H(lin - expect) <= 1e-12 * norm_H(expect));

    const double gu = inner_product(G_apply(v, p), v, Space::H);
    const double rhs = p.mu * norm_V2(v) + p.alpha * norm_H2(v) +
                       p.beta * std::pow(norm_Lp(v, p.r + 1.0), p.r + 1.0);
    REQUIRE(std::abs(gu - rhs) <= 1e-10 * rhs);
}

TEST_CASE("monotonicity margins", "[operators]") {
    const CbfParams p{1.0, 0.1, 1.0, 3}; // 2 beta mu = 2 >= 1
    REQUIRE(p.critical_monotone());
    const SpectralVecField u = unit_random(131);
    REQUIRE(monotonicity_check(u, u, p, MonotonicityMode::Global) == 0.0);
    REQUIRE(monotonicity_check(u, u, p, MonotonicityMode::Absorption) == 0.0);
    REQUIRE(monotonicity_check(u, u, p, MonotonicityMode::Local, norm(u, Space::L4)) >=
            -1e-12);
    for (uint64_t seed : {132u, 133u, 134u}) {
        const SpectralVecField a = unit_random(seed), b = unit_random(seed + 50);
        const double scale = norm_V2(a - b);
        REQUIRE(monotonicity_check(a, b, p, MonotonicityMode::Global) >= -1e-10 * scale);
        const double N = norm(b, Space::L4);
        REQUIRE(monotonicity_check(a, b, p, MonotonicityMode::Local, N) >= -1e-10 * scale);
    }
    CbfParams sub = p;
    sub.beta = 0.2; // 2 beta mu < 1
    REQUIRE_THROWS_AS(monotonicity_check(u, unit_random(2), sub, MonotonicityMode::Global),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(
        monotonicity_check(u, unit_random(2), p, MonotonicityMode::Local, 1e-9),
        std::invalid_argument);
}
