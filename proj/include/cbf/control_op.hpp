#pragma once

#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cbf/spectral.hpp"

namespace cbf {

/// Bounded linear control-to-force operator D. All three kinds are
/// self-adjoint on divergence-free band-limited fields: Identity trivially,
/// SpectralMask because the multiplier is real and even in k, and
/// RegionIndicator because mask-then-project pairs symmetrically.
struct ControlOperatorD {
    enum class Kind { Identity, SpectralMask, RegionIndicator };

    Kind kind = Kind::Identity;
    // SpectralMask: value per mode, in [0, 1], even under k -> -k.
    std::vector<double> spectral_mask;
    // RegionIndicator: physical mask samples in [0, 1].
    std::vector<double> region_mask;

    static ControlOperatorD identity() { return {}; }

    static ControlOperatorD spectral(const GridSpec& grid, std::vector<double> mask) {
        if (mask.size() != static_cast<size_t>(grid.size()))
            throw std::invalid_argument("ControlOperatorD: mask size does not match grid");
        ControlOperatorD d;
        d.kind = Kind::SpectralMask;
        d.spectral_mask = std::move(mask);
        const int n = grid.n;
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy) {
                const double m = d.spectral_mask[static_cast<size_t>(ix) * n + iy];
                if (m < 0.0 || m > 1.0)
                    throw std::invalid_argument("ControlOperatorD: mask values must be in [0,1]");
                const int jx = (n - ix) % n, jy = (n - iy) % n;
                if (m != d.spectral_mask[static_cast<size_t>(jx) * n + jy])
                    throw std::invalid_argument(
                        "ControlOperatorD: spectral mask must be even under k -> -k");
            }
        return d;
    }

    /// Mask below the given |k|_inf radius (closed under k -> -k by construction).
    static ControlOperatorD low_mode_mask(const GridSpec& grid, int radius) {
        const int n = grid.n;
        std::vector<double> mask(static_cast<size_t>(grid.size()), 0.0);
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy) {
                const int kx = signed_freq(ix, n), ky = signed_freq(iy, n);
                if (std::max(std::abs(kx), std::abs(ky)) <= radius)
                    mask[static_cast<size_t>(ix) * n + iy] = 1.0;
            }
        return spectral(grid, std::move(mask));
    }

    static ControlOperatorD region(const GridSpec& grid, std::vector<double> mask) {
        if (mask.size() != static_cast<size_t>(grid.size()))
            throw std::invalid_argument("ControlOperatorD: mask size does not match grid");
        for (double m : mask)
            if (m < 0.0 || m > 1.0)
                throw std::invalid_argument("ControlOperatorD: mask values must be in [0,1]");
        ControlOperatorD d;
        d.kind = Kind::RegionIndicator;
        d.region_mask = std::move(mask);
        return d;
    }

    SpectralVecField apply(const SpectralVecField& u, DealiasRule rule) const {
        switch (kind) {
            case Kind::Identity:
                return conform(u, rule);
            case Kind::SpectralMask: {
                SpectralVecField out = u;
                for (int c = 0; c < 2; ++c)
                    for (size_t i = 0; i < out.size(); ++i) out.comp[c][i] *= spectral_mask[i];
                return conform(out, rule);
            }
            case Kind::RegionIndicator: {
                PhysicalVecField ph = to_physical(u);
                for (int c = 0; c < 2; ++c)
                    for (size_t i = 0; i < ph.size(); ++i) ph.comp[c][i] *= region_mask[i];
                return conform(to_spectral(ph), rule);
            }
        }
        throw std::logic_error("ControlOperatorD: unknown kind");
    }

    /// D* = D on the divergence-free band space.
    SpectralVecField apply_adjoint(const SpectralVecField& p, DealiasRule rule) const {
        return apply(p, rule);
    }

    /// Operator norm on H (upper bound for RegionIndicator).
    double norm_bound() const {
        switch (kind) {
            case Kind::Identity:
                return 1.0;
            case Kind::SpectralMask:
                return spectral_mask.empty()
                           ? 0.0
                           : *std::max_element(spectral_mask.begin(), spectral_mask.end());
            case Kind::RegionIndicator:
                return region_mask.empty()
                           ? 0.0
                           : *std::max_element(region_mask.begin(), region_mask.end());
        }
        return 0.0;
    }
};

/// External forcing: absent, constant in time, or one field per solver node.
struct ForcingSpec {
    enum class Kind { None, Constant, Series };

    Kind kind = Kind::None;
    SpectralVecField constant;
    FieldSeries series;

    static ForcingSpec none() { return {}; }
    static ForcingSpec constant_field(SpectralVecField f) {
        ForcingSpec s;
        s.kind = Kind::Constant;
        s.constant = std::move(f);
        return s;
    }
    static ForcingSpec time_series(FieldSeries f) {
        ForcingSpec s;
        s.kind = Kind::Series;
        s.series = std::move(f);
        return s;
    }

    bool empty() const { return kind == Kind::None; }

    void check_alignment(size_t n_nodes) const {
        if (kind == Kind::Series && series.size() != n_nodes)
            throw std::invalid_argument("ForcingSpec: series not aligned to solver nodes");
    }

    const SpectralVecField* at(size_t k) const {
        switch (kind) {
            case Kind::None:
                return nullptr;
            case Kind::Constant:
                return &constant;
            case Kind::Series:
                return &series.at(k);
        }
        return nullptr;
    }
};

} // namespace cbf
