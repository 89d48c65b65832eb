#pragma once

#include <cmath>
#include <random>
#include <stdexcept>

#include "cbf/fft.hpp"
#include "cbf/field.hpp"
#include "cbf/grid.hpp"

namespace cbf {

enum class Space { H, V, L4, Lr1 };

/// Physical samples from series coefficients (inverse DFT, real part kept).
inline PhysicalVecField to_physical(const SpectralVecField& u) {
    const int n = u.n();
    PhysicalVecField out(u.grid);
    std::vector<Complex> buf(u.size());
    for (int c = 0; c < 2; ++c) {
        buf = u.comp[c];
        detail::fft_backward(n, buf.data());
        for (size_t i = 0; i < buf.size(); ++i) out.comp[c][i] = buf[i].real();
    }
    return out;
}

/// Series coefficients from samples; forward DFT scaled by 1/n^2 so that
/// integral of f equals L^2 * fhat(0).
inline SpectralVecField to_spectral(const PhysicalVecField& u) {
    const int n = u.n();
    if (u.size() != static_cast<size_t>(u.grid.size()))
        throw std::invalid_argument("to_spectral: sample count does not match grid");
    if (!u.all_finite()) throw std::invalid_argument("to_spectral: non-finite samples");
    SpectralVecField out(u.grid);
    const double scale = 1.0 / (static_cast<double>(n) * n);
    for (int c = 0; c < 2; ++c) {
        for (size_t i = 0; i < u.size(); ++i) out.comp[c][i] = Complex(u.comp[c][i], 0.0);
        detail::fft_forward(n, out.comp[c].data());
        for (auto& z : out.comp[c]) z *= scale;
    }
    return out;
}

/// Restore exact conjugate symmetry (projects out the rounding-level
/// imaginary residue a forward transform of real data leaves behind).
inline void symmetrize(SpectralVecField& u) {
    const int n = u.n();
    for (int c = 0; c < 2; ++c) {
        auto& a = u.comp[c];
        for (int ix = 0; ix < n; ++ix) {
            const int jx = (n - ix) % n;
            for (int iy = 0; iy < n; ++iy) {
                const int jy = (n - iy) % n;
                const size_t idx = static_cast<size_t>(ix) * n + iy;
                const size_t jdx = static_cast<size_t>(jx) * n + jy;
                if (idx < jdx) {
                    const Complex m = 0.5 * (a[idx] + std::conj(a[jdx]));
                    a[idx] = m;
                    a[jdx] = std::conj(m);
                } else if (idx == jdx) {
                    a[idx] = Complex(a[idx].real(), 0.0);
                }
            }
        }
    }
}

/// Zero every mode outside the rule's retained band (includes Nyquist lines).
inline void dealias(SpectralVecField& u, DealiasRule rule) {
    const int n = u.n();
    const int K = dealias_cutoff(n, rule);
    for (int ix = 0; ix < n; ++ix) {
        const int kx = signed_freq(ix, n);
        for (int iy = 0; iy < n; ++iy) {
            const int ky = signed_freq(iy, n);
            if (std::abs(kx) > K || std::abs(ky) > K) {
                u.at(0, ix, iy) = Complex{};
                u.at(1, ix, iy) = Complex{};
            }
        }
    }
}

/// Helmholtz-Hodge projection, mode-wise P(k) = I - k k^T / |k|^2, plus
/// removal of the mean mode. Idempotent and self-adjoint in H.
inline SpectralVecField leray_project(const SpectralVecField& in) {
    const int n = in.n();
    SpectralVecField out = in;
    for (int ix = 0; ix < n; ++ix) {
        const double kx = signed_freq(ix, n);
        for (int iy = 0; iy < n; ++iy) {
            const double ky = signed_freq(iy, n);
            const double k2 = kx * kx + ky * ky;
            Complex& a = out.at(0, ix, iy);
            Complex& b = out.at(1, ix, iy);
            if (k2 == 0.0) {
                a = Complex{};
                b = Complex{};
                continue;
            }
            const Complex d = (kx * a + ky * b) / k2;
            a -= kx * d;
            b -= ky * d;
        }
    }
    return out;
}

/// Truncate to the given rule's band, project, and re-symmetrize: the
/// postprocessing applied to every nonlinear product.
inline SpectralVecField conform(const SpectralVecField& in, DealiasRule rule) {
    SpectralVecField out = leray_project(in);
    dealias(out, rule);
    symmetrize(out);
    return out;
}

inline double inner_product(const SpectralVecField& u, const SpectralVecField& v, Space space) {
    u.check_same_grid(v);
    if (space != Space::H && space != Space::V)
        throw std::invalid_argument("inner_product: space must be H or V");
    const int n = u.n();
    const double kunit2 = u.grid.wavenumber_unit() * u.grid.wavenumber_unit();
    double acc = 0.0;
    for (int ix = 0; ix < n; ++ix) {
        const double kx = signed_freq(ix, n);
        for (int iy = 0; iy < n; ++iy) {
            const double ky = signed_freq(iy, n);
            const size_t idx = static_cast<size_t>(ix) * n + iy;
            double term = (u.comp[0][idx] * std::conj(v.comp[0][idx])).real() +
                          (u.comp[1][idx] * std::conj(v.comp[1][idx])).real();
            if (space == Space::V) term *= kunit2 * (kx * kx + ky * ky);
            acc += term;
        }
    }
    return u.grid.area() * acc;
}

/// L^p norm by uniform-grid quadrature of |u(x)|^p.
inline double norm_Lp(const SpectralVecField& u, double p) {
    const PhysicalVecField ph = to_physical(u);
    double acc = 0.0;
    for (size_t i = 0; i < ph.size(); ++i) {
        const double m2 = ph.comp[0][i] * ph.comp[0][i] + ph.comp[1][i] * ph.comp[1][i];
        acc += std::pow(m2, 0.5 * p);
    }
    return std::pow(acc * u.grid.cell_area(), 1.0 / p);
}

inline double norm(const SpectralVecField& u, Space space, int r = 0) {
    switch (space) {
        case Space::H:
            return std::sqrt(std::max(0.0, inner_product(u, u, Space::H)));
        case Space::V:
            return std::sqrt(std::max(0.0, inner_product(u, u, Space::V)));
        case Space::L4:
            return norm_Lp(u, 4.0);
        case Space::Lr1:
            if (r < 1 || r > 3) throw std::invalid_argument("norm: Lr1 needs r in {1,2,3}");
            return norm_Lp(u, r + 1.0);
    }
    throw std::invalid_argument("norm: unsupported space tag");
}

inline double norm_H(const SpectralVecField& u) { return norm(u, Space::H); }
inline double norm_V(const SpectralVecField& u) { return norm(u, Space::V); }

inline double norm_H2(const SpectralVecField& u) { return inner_product(u, u, Space::H); }
inline double norm_V2(const SpectralVecField& u) { return inner_product(u, u, Space::V); }

/// Max pointwise speed; used by the advective CFL heuristic.
inline double max_speed(const SpectralVecField& u) {
    const PhysicalVecField ph = to_physical(u);
    double m = 0.0;
    for (size_t i = 0; i < ph.size(); ++i) {
        const double m2 = ph.comp[0][i] * ph.comp[0][i] + ph.comp[1][i] * ph.comp[1][i];
        m = std::max(m, m2);
    }
    return std::sqrt(m);
}

inline double suggest_dt(const GridSpec& grid, const SpectralVecField& u0) {
    const double s = max_speed(u0);
    return s > 0.0 ? 0.5 * grid.dx() / s : 0.5 * grid.dx();
}

/// Worst divergence across modes, |k . uhat(k)|, relative to the field scale.
inline double max_divergence(const SpectralVecField& u) {
    const int n = u.n();
    double m = 0.0;
    for (int ix = 0; ix < n; ++ix) {
        const double kx = signed_freq(ix, n);
        for (int iy = 0; iy < n; ++iy) {
            const double ky = signed_freq(iy, n);
            const Complex d = kx * u.at(0, ix, iy) + ky * u.at(1, ix, iy);
            m = std::max(m, std::abs(d));
        }
    }
    return m;
}

namespace detail {

inline uint64_t splitmix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace detail

/// Deterministic random divergence-free test field, mode amplitudes
/// proportional to |k|^(-decay_exponent) inside the grid's dealias band.
/// Each mode draws from its own (seed, k)-keyed stream, so refining the grid
/// extends the field with new tail modes without reshuffling existing ones.
inline SpectralVecField random_divfree_field(const GridSpec& grid, uint64_t seed,
                                             double decay_exponent) {
    grid.validate();
    if (decay_exponent < 0.0)
        throw std::invalid_argument("random_divfree_field: decay_exponent must be >= 0");
    const int n = grid.n;
    const int K = dealias_cutoff(grid);
    SpectralVecField u(grid);
    for (int kx = -K; kx <= K; ++kx) {
        for (int ky = -K; ky <= K; ++ky) {
            // fill each conjugate pair once, from its lexicographically positive half
            if (kx < 0 || (kx == 0 && ky <= 0)) continue;
            std::mt19937_64 rng(detail::splitmix64(
                detail::splitmix64(seed ^ static_cast<uint64_t>(kx + (1 << 16))) ^
                static_cast<uint64_t>(ky + (1 << 16))));
            std::normal_distribution<double> normal(0.0, 1.0);
            const double kk = std::sqrt(static_cast<double>(kx * kx + ky * ky));
            const double amp = std::pow(kk, -decay_exponent);
            Complex a(normal(rng), normal(rng));
            Complex b(normal(rng), normal(rng));
            a *= amp * 0.5;
            b *= amp * 0.5;
            // project onto the plane orthogonal to k
            const double k2 = kx * kx + ky * ky;
            const Complex d = (static_cast<double>(kx) * a + static_cast<double>(ky) * b) / k2;
            a -= static_cast<double>(kx) * d;
            b -= static_cast<double>(ky) * d;
            const int ix = (kx + n) % n;
            const int iy = (ky + n) % n;
            const int jx = (n - ix) % n;
            const int jy = (n - iy) % n;
            u.at(0, ix, iy) = a;
            u.at(1, ix, iy) = b;
            u.at(0, jx, jy) = std::conj(a);
            u.at(1, jx, jy) = std::conj(b);
        }
    }
    return u;
}

namespace detail {

/// Samples of the four partial derivatives d_i u_j of a spectral field.
struct GradientSamples {
    // grad[i][j] holds d_i u_j
    std::array<std::array<std::vector<double>, 2>, 2> grad;
};

inline GradientSamples gradient_samples(const SpectralVecField& u) {
    const int n = u.n();
    const double kunit = u.grid.wavenumber_unit();
    GradientSamples out;
    std::vector<Complex> buf(u.size());
    for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
            for (int ix = 0; ix < n; ++ix) {
                const double kx = signed_freq(ix, n);
                for (int iy = 0; iy < n; ++iy) {
                    const double ky = signed_freq(iy, n);
                    const double ki = kunit * (i == 0 ? kx : ky);
                    buf[static_cast<size_t>(ix) * n + iy] =
                        Complex(0.0, ki) * u.at(j, ix, iy);
                }
            }
            detail::fft_backward(n, buf.data());
            auto& g = out.grad[i][j];
            g.resize(buf.size());
            for (size_t q = 0; q < buf.size(); ++q) g[q] = buf[q].real();
        }
    }
    return out;
}

} // namespace detail

} // namespace cbf
