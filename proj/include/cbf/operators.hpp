#pragma once

#include <cmath>
#include <stdexcept>

#include "cbf/spectral.hpp"

namespace cbf {

/// Coefficients of the convective Brinkman-Forchheimer model.
struct CbfParams {
    double mu = 1.0;    // Brinkman (effective viscosity), > 0
    double alpha = 0.0; // Darcy damping, >= 0
    double beta = 0.0;  // Forchheimer absorption, >= 0
    int r = 3;          // absorption exponent, in {1, 2, 3}

    void validate() const {
        if (!(mu > 0.0)) throw std::invalid_argument("CbfParams: mu must be positive");
        if (alpha < 0.0 || beta < 0.0)
            throw std::invalid_argument("CbfParams: alpha and beta must be nonnegative");
        if (r < 1 || r > 3) throw std::invalid_argument("CbfParams: r must be 1, 2 or 3");
    }

    // r = 3 with 2 beta mu >= 1 makes G globally monotone.
    bool critical_monotone() const { return r == 3 && 2.0 * beta * mu >= 1.0; }
};

/// Band every nonlinear product is truncated to for these parameters: the
/// cubic absorption term needs the OneHalf rule, quadratic terms the grid's.
inline DealiasRule effective_rule(const GridSpec& grid, int r) {
    if (r == 3) return DealiasRule::OneHalf;
    return grid.dealias_rule;
}

/// Stokes operator: mode-wise multiplication by |k|^2 (physical wavenumbers).
inline SpectralVecField stokes_A(const SpectralVecField& u) {
    const int n = u.n();
    const double kunit2 = u.grid.wavenumber_unit() * u.grid.wavenumber_unit();
    SpectralVecField out = u;
    for (int ix = 0; ix < n; ++ix) {
        const double kx = signed_freq(ix, n);
        for (int iy = 0; iy < n; ++iy) {
            const double k2 = kunit2 * (kx * kx + signed_freq(iy, n) * signed_freq(iy, n));
            out.at(0, ix, iy) *= k2;
            out.at(1, ix, iy) *= k2;
        }
    }
    return out;
}

/// Pointwise value of a two-component sample; the absorption nonlinearity and
/// its Gateaux derivatives act through these kernels before projection.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// |u|^{r-1} u
inline Vec2 absorption_pointwise(const Vec2& u, int r) {
    const double m2 = u.x * u.x + u.y * u.y;
    const double w = r == 1 ? 1.0 : (r == 2 ? std::sqrt(m2) : m2);
    return {w * u.x, w * u.y};
}

/// Derivative of the absorption kernel in direction v. For r = 2 the u/|u|
/// factor is zero where |u| < guard.
inline Vec2 absorption_derivative_pointwise(const Vec2& u, const Vec2& v, int r,
                                            double guard = 0.0) {
    if (r == 1) return v;
    const double m2 = u.x * u.x + u.y * u.y;
    const double dot = u.x * v.x + u.y * v.y;
    if (r == 2) {
        const double mag = std::sqrt(m2);
        const double q = mag < guard || mag == 0.0 ? 0.0 : dot / mag;
        return {mag * v.x + q * u.x, mag * v.y + q * u.y};
    }
    return {m2 * v.x + 2.0 * dot * u.x, m2 * v.y + 2.0 * dot * u.y};
}

/// Second derivative at r = 3: 2[(u.w) v + (u.v) w + (w.v) u].
inline Vec2 absorption_second_pointwise(const Vec2& u, const Vec2& v, const Vec2& w) {
    const double uw = u.x * w.x + u.y * w.y;
    const double uv = u.x * v.x + u.y * v.y;
    const double wv = w.x * v.x + w.y * v.y;
    return {2.0 * (uw * v.x + uv * w.x + wv * u.x), 2.0 * (uw * v.y + uv * w.y + wv * u.y)};
}

namespace detail {

inline PhysicalVecField advect_samples(const PhysicalVecField& u, const GradientSamples& gv) {
    PhysicalVecField out(u.grid);
    for (int j = 0; j < 2; ++j)
        for (size_t i = 0; i < u.size(); ++i)
            out.comp[j][i] = u.comp[0][i] * gv.grad[0][j][i] + u.comp[1][i] * gv.grad[1][j][i];
    return out;
}

} // namespace detail

/// B(u, v) = P((u . grad) v), pseudo-spectral with dealiasing.
inline SpectralVecField convection_B(const SpectralVecField& u, const SpectralVecField& v,
                                     DealiasRule rule) {
    u.check_same_grid(v);
    const PhysicalVecField up = to_physical(u);
    const auto gv = detail::gradient_samples(v);
    return conform(to_spectral(detail::advect_samples(up, gv)), rule);
}

inline SpectralVecField convection_B(const SpectralVecField& u, const SpectralVecField& v) {
    return convection_B(u, v, u.grid.dealias_rule);
}

inline SpectralVecField convection_B(const SpectralVecField& u) { return convection_B(u, u); }

/// b(u, v, w) = integral of (u . grad) v . w, evaluated by grid quadrature.
/// Independent of convection_B; the two agree to rounding on band-limited
/// divergence-free fields.
inline double trilinear_b(const SpectralVecField& u, const SpectralVecField& v,
                          const SpectralVecField& w) {
    u.check_same_grid(v);
    u.check_same_grid(w);
    const PhysicalVecField up = to_physical(u);
    const PhysicalVecField wp = to_physical(w);
    const auto gv = detail::gradient_samples(v);
    double acc = 0.0;
    for (int j = 0; j < 2; ++j)
        for (size_t i = 0; i < up.size(); ++i)
            acc += (up.comp[0][i] * gv.grad[0][j][i] + up.comp[1][i] * gv.grad[1][j][i]) *
                   wp.comp[j][i];
    return acc * u.grid.cell_area();
}

/// C(u) = P(|u|^(r-1) u).
inline SpectralVecField absorption_C(const SpectralVecField& u, int r, DealiasRule rule) {
    if (r < 1 || r > 3) throw std::invalid_argument("absorption_C: r must be 1, 2 or 3");
    const PhysicalVecField up = to_physical(u);
    PhysicalVecField out(u.grid);
    for (size_t i = 0; i < up.size(); ++i) {
        const Vec2 c = absorption_pointwise({up.comp[0][i], up.comp[1][i]}, r);
        out.comp[0][i] = c.x;
        out.comp[1][i] = c.y;
    }
    return conform(to_spectral(out), rule);
}

inline SpectralVecField absorption_C(const SpectralVecField& u, int r) {
    return absorption_C(u, r, effective_rule(u.grid, r));
}

/// Gateaux derivative C'(u) v. For r = 2 the u/|u| factor is taken as zero
/// where |u| < 1e-12 max|u|, matching the operator's value at u = 0.
inline SpectralVecField C_prime(const SpectralVecField& u, const SpectralVecField& v, int r,
                                DealiasRule rule) {
    if (r < 1 || r > 3) throw std::invalid_argument("C_prime: r must be 1, 2 or 3");
    u.check_same_grid(v);
    if (r == 1) return conform(v, rule);
    const PhysicalVecField up = to_physical(u);
    const PhysicalVecField vp = to_physical(v);
    PhysicalVecField out(u.grid);
    double guard = 0.0;
    if (r == 2) {
        double maxmag2 = 0.0;
        for (size_t i = 0; i < up.size(); ++i)
            maxmag2 = std::max(maxmag2,
                               up.comp[0][i] * up.comp[0][i] + up.comp[1][i] * up.comp[1][i]);
        guard = 1e-12 * std::sqrt(maxmag2);
    }
    for (size_t i = 0; i < up.size(); ++i) {
        const Vec2 c = absorption_derivative_pointwise({up.comp[0][i], up.comp[1][i]},
                                                       {vp.comp[0][i], vp.comp[1][i]}, r, guard);
        out.comp[0][i] = c.x;
        out.comp[1][i] = c.y;
    }
    return conform(to_spectral(out), rule);
}

inline SpectralVecField C_prime(const SpectralVecField& u, const SpectralVecField& v, int r) {
    return C_prime(u, v, r, effective_rule(u.grid, r));
}

/// Second Gateaux derivative at r = 3:
/// C''(u)(v (x) w) = 2 P[(u.w) v + (u.v) w + (w.v) u]. Symmetric in (v, w).
inline SpectralVecField C_double_prime(const SpectralVecField& u, const SpectralVecField& v,
                                       const SpectralVecField& w,
                                       DealiasRule rule = DealiasRule::OneHalf) {
    u.check_same_grid(v);
    u.check_same_grid(w);
    const PhysicalVecField up = to_physical(u);
    const PhysicalVecField vp = to_physical(v);
    const PhysicalVecField wp = to_physical(w);
    PhysicalVecField out(u.grid);
    for (size_t i = 0; i < up.size(); ++i) {
        const Vec2 c = absorption_second_pointwise({up.comp[0][i], up.comp[1][i]},
                                                   {vp.comp[0][i], vp.comp[1][i]},
                                                   {wp.comp[0][i], wp.comp[1][i]});
        out.comp[0][i] = c.x;
        out.comp[1][i] = c.y;
    }
    return conform(to_spectral(out), rule);
}

/// B'(u) w = B(u, w) + B(w, u).
inline SpectralVecField B_prime(const SpectralVecField& u, const SpectralVecField& w,
                                DealiasRule rule) {
    return convection_B(u, w, rule) + convection_B(w, u, rule);
}

inline SpectralVecField B_prime(const SpectralVecField& u, const SpectralVecField& w) {
    return B_prime(u, w, u.grid.dealias_rule);
}

/// (B'(u))* p = P(-(u . grad) p + (grad u)^T p), the H-adjoint of B'(u).
inline SpectralVecField B_prime_adjoint(const SpectralVecField& u, const SpectralVecField& p,
                                        DealiasRule rule) {
    u.check_same_grid(p);
    const PhysicalVecField up = to_physical(u);
    const PhysicalVecField pp = to_physical(p);
    const auto gu = detail::gradient_samples(u);
    const auto gp = detail::gradient_samples(p);
    PhysicalVecField out(u.grid);
    for (size_t i = 0; i < up.size(); ++i) {
        for (int c = 0; c < 2; ++c) {
            const double adv =
                up.comp[0][i] * gp.grad[0][c][i] + up.comp[1][i] * gp.grad[1][c][i];
            const double gt =
                gu.grad[c][0][i] * pp.comp[0][i] + gu.grad[c][1][i] * pp.comp[1][i];
            out.comp[c][i] = -adv + gt;
        }
    }
    return conform(to_spectral(out), rule);
}

inline SpectralVecField B_prime_adjoint(const SpectralVecField& u, const SpectralVecField& p) {
    return B_prime_adjoint(u, p, u.grid.dealias_rule);
}

/// G(u) = mu A u + B(u) + alpha u + beta C(u).
inline SpectralVecField G_apply(const SpectralVecField& u, const CbfParams& params) {
    params.validate();
    SpectralVecField out = stokes_A(u);
    out *= params.mu;
    out += convection_B(u, u, u.grid.dealias_rule);
    out.add_scaled(params.alpha, u);
    if (params.beta != 0.0) out.add_scaled(params.beta, absorption_C(u, params.r));
    return out;
}

/// Quadrature of |u|^(r-1) |w|^2, the weighted norms of the absorption
/// inequalities; evaluated pointwise pre-projection.
inline double weighted_norm2(const SpectralVecField& u, const SpectralVecField& w, int r) {
    const PhysicalVecField up = to_physical(u);
    const PhysicalVecField wp = to_physical(w);
    double acc = 0.0;
    for (size_t i = 0; i < up.size(); ++i) {
        const double um2 = up.comp[0][i] * up.comp[0][i] + up.comp[1][i] * up.comp[1][i];
        const double wm2 = wp.comp[0][i] * wp.comp[0][i] + wp.comp[1][i] * wp.comp[1][i];
        const double wt = r == 1 ? 1.0 : (r == 2 ? std::sqrt(um2) : um2);
        acc += wt * wm2;
    }
    return acc * u.grid.cell_area();
}

/// Slack of the absorption monotonicity bound:
/// <C(u)-C(v), u-v> - 1/2 || |u|^((r-1)/2) (u-v) ||^2 - 1/2 || |v|^... ||^2.
inline double absorption_monotonicity_margin(const SpectralVecField& u,
                                             const SpectralVecField& v, int r) {
    const SpectralVecField d = u - v;
    const SpectralVecField cd = absorption_C(u, r) - absorption_C(v, r);
    const double lhs = inner_product(cd, d, Space::H);
    return lhs - 0.5 * weighted_norm2(u, d, r) - 0.5 * weighted_norm2(v, d, r);
}

/// Slack of || u-v ||_{L^(r+1)}^(r+1) <= c_r (weighted norms), with
/// c_r = 2^(r-2) for r = 3 and 1 for r in {1, 2}.
inline double absorption_difference_bound_margin(const SpectralVecField& u, const SpectralVecField& v,
                                     int r) {
    const SpectralVecField d = u - v;
    const double cr = r == 3 ? 2.0 : 1.0;
    const double lhs = std::pow(norm_Lp(d, r + 1.0), r + 1.0);
    return cr * (weighted_norm2(u, d, r) + weighted_norm2(v, d, r)) - lhs;
}

/// Residual of the exact cubic expansion at r = 3:
/// C(u+v) = C(u) + C'(u) v + 1/2 C''(u)(v (x) v) + P(|v|^2 v).
inline double cubic_taylor_residual(const SpectralVecField& u, const SpectralVecField& v) {
    const DealiasRule rule = DealiasRule::OneHalf;
    SpectralVecField rhs = absorption_C(u, 3, rule);
    rhs += C_prime(u, v, 3, rule);
    rhs.add_scaled(0.5, C_double_prime(u, v, v, rule));
    rhs += absorption_C(v, 3, rule);
    return norm_H(absorption_C(u + v, 3, rule) - rhs);
}

enum class MonotonicityMode { Local, Global, Absorption };

/// Left-minus-right slack of the requested monotonicity inequality;
/// nonnegative values confirm it.
inline double monotonicity_check(const SpectralVecField& u, const SpectralVecField& v,
                                 const CbfParams& params, MonotonicityMode mode,
                                 double N = 0.0) {
    params.validate();
    switch (mode) {
        case MonotonicityMode::Local: {
            const double v4 = norm(v, Space::L4);
            if (v4 > N * (1.0 + 1e-12))
                throw std::invalid_argument("monotonicity_check: v outside the L4 ball");
            const SpectralVecField d = u - v;
            const double pairing =
                inner_product(G_apply(u, params) - G_apply(v, params), d, Space::H);
            const double mu3 = params.mu * params.mu * params.mu;
            return pairing + 27.0 / (32.0 * mu3) * N * N * N * N * norm_H2(d);
        }
        case MonotonicityMode::Global: {
            if (!params.critical_monotone())
                throw std::invalid_argument(
                    "monotonicity_check: global mode needs r = 3 and 2 beta mu >= 1");
            const SpectralVecField d = u - v;
            return inner_product(G_apply(u, params) - G_apply(v, params), d, Space::H);
        }
        case MonotonicityMode::Absorption:
            return absorption_monotonicity_margin(u, v, params.r);
    }
    throw std::invalid_argument("monotonicity_check: unknown mode");
}

} // namespace cbf
