#pragma once

#include <cmath>

#include "cbf/forward.hpp"

namespace cbf::bench {

/// a * (sin y, 0): a single-mode divergence-free field whose self-advection
/// vanishes identically.
inline SpectralVecField sine_mode(const GridSpec& grid, double amplitude) {
    SpectralVecField u(grid);
    const int n = grid.n;
    u.at(0, 0, 1) = Complex(0.0, -0.5 * amplitude);
    u.at(0, 0, n - 1) = Complex(0.0, 0.5 * amplitude);
    return u;
}

/// Closed-form decay benchmark u(t) = a0 cos(omega t) e^{-(mu+alpha)t} (sin y, 0)
/// on the L = 2pi torus, driven by the forcing that makes it an exact
/// solution. With omega = 0 and beta = 0 the integrating-factor scheme
/// reproduces it exactly; with omega > 0 the explicit stages see a genuine
/// time-dependent source and converge at second order.
struct DecayBenchmark {
    GridSpec grid;
    CbfParams params;
    double a0 = 1.0;
    double omega = 6.0;

    double rate() const { return params.mu + params.alpha; }
    double amplitude(double t) const { return a0 * std::cos(omega * t) * std::exp(-rate() * t); }
    SpectralVecField exact(double t) const { return sine_mode(grid, amplitude(t)); }

    ForcingSpec forcing(double T, double dt) const {
        const int N = static_cast<int>(std::llround(T / dt));
        FieldSeries f;
        f.reserve(static_cast<size_t>(N) + 1);
        for (int k = 0; k <= N; ++k) {
            const double t = k * dt;
            // adot + (mu + alpha) a, the defect of the linear decay
            const double m = -a0 * omega * std::sin(omega * t) * std::exp(-rate() * t);
            SpectralVecField fk = sine_mode(grid, m);
            if (params.beta != 0.0)
                fk.add_scaled(params.beta, absorption_C(exact(t), params.r));
            f.push_back(std::move(fk));
        }
        return ForcingSpec::time_series(f);
    }

    /// Sup-in-time error of the computed trajectory, relative to the
    /// initial-state norm.
    double run_error(double T, double dt) const {
        const auto fr = solve_forward(exact(0.0), params, ControlOperatorD::identity(), {},
                                      forcing(T, dt), T, dt, 1);
        const double scale = std::abs(a0) * std::sqrt(2.0) * std::numbers::pi;
        double worst = 0.0;
        for (int k = 0; k <= fr.traj.n_steps; ++k)
            worst = std::max(worst, norm_H(fr.traj.stored[k] - exact(k * dt)) / scale);
        return worst;
    }
};

} // namespace cbf::bench
