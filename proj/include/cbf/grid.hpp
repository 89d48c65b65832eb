#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cbf {

/// Which wavenumber band nonlinear products are truncated to.
/// TwoThirds removes aliasing exactly for quadratic products,
/// OneHalf for cubic ones.
enum class DealiasRule { TwoThirds, OneHalf };

/// Uniform n-by-n grid on the periodic square [0, L)^2.
struct GridSpec {
    int n = 32;
    double length = 2.0 * std::numbers::pi;
    DealiasRule dealias_rule = DealiasRule::TwoThirds;

    void validate() const {
        if (n < 8 || n % 2 != 0)
            throw std::invalid_argument("GridSpec: n must be even and >= 8");
        if (!(length > 0.0))
            throw std::invalid_argument("GridSpec: length must be positive");
    }

    // Smallest Stokes eigenvalue on mean-zero fields.
    double lambda1() const {
        const double k0 = 2.0 * std::numbers::pi / length;
        return k0 * k0;
    }

    // Scale factor from integer lattice frequencies to physical wavenumbers.
    double wavenumber_unit() const { return 2.0 * std::numbers::pi / length; }

    double dx() const { return length / n; }
    double cell_area() const { return dx() * dx(); }
    double area() const { return length * length; }
    int size() const { return n * n; }

    bool operator==(const GridSpec& o) const {
        return n == o.n && length == o.length && dealias_rule == o.dealias_rule;
    }
};

/// Signed lattice frequency of DFT index i (Nyquist maps to -n/2).
inline int signed_freq(int i, int n) { return i < n / 2 ? i : i - n; }

/// Largest |k| kept by a dealias rule: 3K < n (quadratic) or 4K < n (cubic).
inline int dealias_cutoff(int n, DealiasRule rule) {
    return rule == DealiasRule::TwoThirds ? (n - 1) / 3 : (n - 1) / 4;
}

inline int dealias_cutoff(const GridSpec& g) { return dealias_cutoff(g.n, g.dealias_rule); }

} // namespace cbf
