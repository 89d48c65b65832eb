#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "cbf/grid.hpp"

namespace cbf {

using Complex = std::complex<double>;

/// Two-component velocity field in Fourier representation. Coefficients are
/// Fourier-series coefficients: u(x) = sum_k uhat(k) exp(i (2pi/L) k . x).
/// Valid fields are conjugate-symmetric, divergence-free and mean-zero;
/// construction helpers in spectral.hpp enforce this.
struct SpectralVecField {
    GridSpec grid;
    std::array<std::vector<Complex>, 2> comp;

    SpectralVecField() = default;
    explicit SpectralVecField(const GridSpec& g) : grid(g) {
        comp[0].assign(static_cast<size_t>(g.size()), Complex{});
        comp[1].assign(static_cast<size_t>(g.size()), Complex{});
    }

    int n() const { return grid.n; }
    size_t size() const { return comp[0].size(); }

    Complex& at(int c, int ix, int iy) { return comp[c][static_cast<size_t>(ix) * grid.n + iy]; }
    const Complex& at(int c, int ix, int iy) const {
        return comp[c][static_cast<size_t>(ix) * grid.n + iy];
    }

    SpectralVecField& operator+=(const SpectralVecField& o) {
        check_same_grid(o);
        for (int c = 0; c < 2; ++c)
            for (size_t i = 0; i < size(); ++i) comp[c][i] += o.comp[c][i];
        return *this;
    }
    SpectralVecField& operator-=(const SpectralVecField& o) {
        check_same_grid(o);
        for (int c = 0; c < 2; ++c)
            for (size_t i = 0; i < size(); ++i) comp[c][i] -= o.comp[c][i];
        return *this;
    }
    SpectralVecField& operator*=(double a) {
        for (int c = 0; c < 2; ++c)
            for (size_t i = 0; i < size(); ++i) comp[c][i] *= a;
        return *this;
    }

    /// this += a * o
    void add_scaled(double a, const SpectralVecField& o) {
        check_same_grid(o);
        for (int c = 0; c < 2; ++c)
            for (size_t i = 0; i < size(); ++i) comp[c][i] += a * o.comp[c][i];
    }

    void set_zero() {
        for (int c = 0; c < 2; ++c)
            for (auto& z : comp[c]) z = Complex{};
    }

    void check_same_grid(const SpectralVecField& o) const {
        if (!(grid == o.grid)) throw std::invalid_argument("grid mismatch between fields");
    }
};

inline SpectralVecField operator+(SpectralVecField a, const SpectralVecField& b) { return a += b; }
inline SpectralVecField operator-(SpectralVecField a, const SpectralVecField& b) { return a -= b; }
inline SpectralVecField operator*(double s, SpectralVecField a) { return a *= s; }

/// Real samples of a two-component field on the uniform grid, row-major
/// (ix * n + iy), node (ix, iy) at position (ix, iy) * L / n.
struct PhysicalVecField {
    GridSpec grid;
    std::array<std::vector<double>, 2> comp;

    PhysicalVecField() = default;
    explicit PhysicalVecField(const GridSpec& g) : grid(g) {
        comp[0].assign(static_cast<size_t>(g.size()), 0.0);
        comp[1].assign(static_cast<size_t>(g.size()), 0.0);
    }

    int n() const { return grid.n; }
    size_t size() const { return comp[0].size(); }

    double& at(int c, int ix, int iy) { return comp[c][static_cast<size_t>(ix) * grid.n + iy]; }
    const double& at(int c, int ix, int iy) const {
        return comp[c][static_cast<size_t>(ix) * grid.n + iy];
    }

    bool all_finite() const {
        for (int c = 0; c < 2; ++c)
            for (double v : comp[c])
                if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Time series of fields on uniform solver nodes t_k = k * dt.
using FieldSeries = std::vector<SpectralVecField>;

} // namespace cbf
