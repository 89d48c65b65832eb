#pragma once

#include <stdexcept>
#include <vector>

#include "cbf/field.hpp"

namespace cbf {

/// Uniform-dt time series of states. Snapshots are kept every
/// checkpoint_stride steps (stride always divides n_steps, so storage is
/// uniform and both endpoints are present); intermediate states are
/// recomputed by forward sub-integration. `sources` keeps the conformed
/// per-node forcing-plus-control fields the run was driven by, which is what
/// segment recomputation needs.
struct Trajectory {
    GridSpec grid;
    double dt = 0.0;
    int n_steps = 0;
    int checkpoint_stride = 1;
    std::vector<SpectralVecField> stored; // states at steps 0, s, 2s, ..., n_steps
    FieldSeries sources;                  // n_steps + 1 entries, may be empty

    bool stores_all() const { return checkpoint_stride == 1; }
    int n_stored() const { return static_cast<int>(stored.size()); }
    double time_at(int step) const { return dt * step; }
    double final_time() const { return dt * n_steps; }

    bool is_stored(int step) const { return step % checkpoint_stride == 0 && step <= n_steps; }

    const SpectralVecField& at_step(int step) const {
        if (!is_stored(step)) throw std::invalid_argument("Trajectory: step not stored");
        return stored.at(static_cast<size_t>(step / checkpoint_stride));
    }

    const SpectralVecField& initial() const { return stored.front(); }
    const SpectralVecField& final_state() const { return stored.back(); }

    /// Checkpoint step index at or below the given step.
    int checkpoint_before(int step) const { return (step / checkpoint_stride) * checkpoint_stride; }
};

/// Largest divisor of n_steps not exceeding the requested stride; keeps the
/// stored snapshots uniformly spaced with both endpoints present.
inline int effective_stride(int n_steps, int requested) {
    if (n_steps <= 0) return 1;
    int s = std::max(1, std::min(requested, n_steps));
    while (n_steps % s != 0) --s;
    return s;
}

} // namespace cbf
