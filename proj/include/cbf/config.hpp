#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbf/assimilate.hpp"
#include "cbf/verify.hpp"

namespace cbf {

/// Declarative run configuration, read from a single JSON document.
/// Every key is optional; defaults give a small r = 3 benchmark setup.
/// Per-section seeds default to fixed offsets from the base seed so that
/// `--seed` reshuffles the whole run coherently.
struct RunConfig {
    uint64_t seed = 1;
    GridSpec grid{32, 2.0 * std::numbers::pi, DealiasRule::OneHalf};
    CbfParams params{0.5, 0.1, 1.0, 3};

    double T = 0.25;
    double dt = 1e-3;
    int checkpoint_stride = 10;

    struct RandomField {
        std::string kind = "random"; // random | zero | shear
        std::optional<uint64_t> seed;
        double decay = 3.0;
        double amplitude = 1.0;
    };
    RandomField initial;
    RandomField forcing{"zero", std::nullopt, 3.0, 0.0};
    RandomField reference_control{"random", std::nullopt, 2.0, 0.3};
    RandomField truth{"random", std::nullopt, 3.0, 1.0};

    struct ControlOpConfig {
        std::string kind = "identity"; // identity | low-modes | region-disk
        int radius = 4;                // low-modes: |k|_inf cutoff
        double disk_radius = 0.3;      // region-disk: radius as a fraction of L
        double center_x = 0.5, center_y = 0.5; // fractions of L
    };
    ControlOpConfig control;

    double w_track = 0.5, w_enstrophy = 0.5, w_control = 0.5, w_terminal = 0.5;

    OptimizerConfig optimizer;

    struct AssimSection {
        double noise_level = 0.0;
        double w_init = 1e-4;
        double w_track = 0.5, w_enstrophy = 0.0, w_terminal = 0.5;
    };
    AssimSection assimilation;

    struct VerifySection {
        int n_fields = 12;
        int n_pairs = 24;
        bool global_monotonicity = true;
    };
    VerifySection verify;

    uint64_t derived_seed(const RandomField& f, uint64_t offset) const {
        return f.seed ? *f.seed : seed + offset;
    }

    SpectralVecField make_field(const RandomField& f, uint64_t offset) const {
        if (f.kind == "zero" || f.amplitude == 0.0) return SpectralVecField(grid);
        if (f.kind == "shear") return bench::sine_mode(grid, f.amplitude);
        SpectralVecField u = random_divfree_field(grid, derived_seed(f, offset), f.decay);
        const double n = norm_H(u);
        if (n > 0) u *= f.amplitude / n;
        return u;
    }

    SpectralVecField initial_field() const { return make_field(initial, 11); }
    ForcingSpec forcing_spec() const {
        if (forcing.kind == "zero" || forcing.amplitude == 0.0) return ForcingSpec::none();
        return ForcingSpec::constant_field(make_field(forcing, 23));
    }

    ControlOperatorD control_operator() const {
        if (control.kind == "identity") return ControlOperatorD::identity();
        if (control.kind == "low-modes")
            return ControlOperatorD::low_mode_mask(grid, control.radius);
        if (control.kind == "region-disk") {
            const int n = grid.n;
            std::vector<double> mask(static_cast<size_t>(grid.size()), 0.0);
            const double cx = control.center_x * grid.length;
            const double cy = control.center_y * grid.length;
            const double rad = control.disk_radius * grid.length;
            for (int ix = 0; ix < n; ++ix)
                for (int iy = 0; iy < n; ++iy) {
                    // nearest periodic image distance
                    double dx = std::abs(ix * grid.dx() - cx);
                    double dy = std::abs(iy * grid.dx() - cy);
                    dx = std::min(dx, grid.length - dx);
                    dy = std::min(dy, grid.length - dy);
                    if (dx * dx + dy * dy <= rad * rad)
                        mask[static_cast<size_t>(ix) * n + iy] = 1.0;
                }
            return ControlOperatorD::region(grid, std::move(mask));
        }
        throw std::invalid_argument("unknown control operator kind: " + control.kind);
    }

    CostConfig cost_config() const {
        CostConfig c;
        c.D = control_operator();
        c.w_track = w_track;
        c.w_enstrophy = w_enstrophy;
        c.w_control = w_control;
        c.w_terminal = w_terminal;
        return c;
    }

    int n_steps() const { return static_cast<int>(std::llround(T / dt)); }

    /// Returns human-readable diagnostics; empty means the config is valid.
    std::vector<std::string> validate(bool wants_global_monotonicity = false) const {
        std::vector<std::string> bad;
        auto expect = [&](bool ok, const std::string& msg) {
            if (!ok) bad.push_back(msg);
        };
        expect(grid.n >= 8 && grid.n % 2 == 0, "grid.n must be even and >= 8");
        expect(grid.length > 0, "grid.length must be positive");
        expect(params.mu > 0, "params.mu must be positive");
        expect(params.alpha >= 0 && params.beta >= 0,
               "params.alpha and params.beta must be nonnegative");
        expect(params.r >= 1 && params.r <= 3, "params.r must be 1, 2 or 3");
        expect(T > 0 && dt > 0, "time.T and time.dt must be positive");
        if (T > 0 && dt > 0)
            expect(std::abs(T / dt - std::llround(T / dt)) <= 1e-9 * std::max(1.0, T / dt),
                   "time.T / time.dt must be an integer");
        expect(checkpoint_stride >= 1, "time.checkpoint_stride must be >= 1");
        expect(w_track >= 0 && w_enstrophy >= 0 && w_terminal >= 0,
               "cost weights must be nonnegative");
        expect(w_control > 0, "cost.w_control must be positive");
        expect(assimilation.w_init > 0, "assimilation.w_init must be positive");
        expect(assimilation.noise_level >= 0, "assimilation.noise_level must be nonnegative");
        expect(optimizer.grad_tol > 0, "optimizer.grad_tol must be positive");
        expect(optimizer.max_iters >= 0, "optimizer.max_iters must be nonnegative");
        expect(optimizer.armijo_c1 > 0 && optimizer.armijo_c1 < 1,
               "optimizer.armijo_c1 must be in (0,1)");
        expect(optimizer.backtrack_rho > 0 && optimizer.backtrack_rho < 1,
               "optimizer.backtrack_rho must be in (0,1)");
        if (wants_global_monotonicity && verify.global_monotonicity)
            expect(params.r == 3 && 2.0 * params.beta * params.mu >= 1.0,
                   "global monotonicity checks need r = 3 and 2 beta mu >= 1");
        const std::string ck = control.kind;
        expect(ck == "identity" || ck == "low-modes" || ck == "region-disk",
               "control.kind must be identity, low-modes or region-disk");
        for (const RandomField* f : {&initial, &forcing, &reference_control, &truth})
            expect(f->kind == "random" || f->kind == "zero" || f->kind == "shear",
                   "field kind must be random, zero or shear");
        return bad;
    }
};

namespace detail {

inline DealiasRule parse_rule(const std::string& s) {
    if (s == "two-thirds") return DealiasRule::TwoThirds;
    if (s == "one-half") return DealiasRule::OneHalf;
    throw std::invalid_argument("grid.dealias must be 'two-thirds' or 'one-half'");
}

inline OptimMethod parse_method(const std::string& s) {
    if (s == "gd" || s == "gradient-descent") return OptimMethod::GradientDescent;
    if (s == "ncg" || s == "nonlinear-cg") return OptimMethod::NonlinearCG;
    if (s == "lbfgs") return OptimMethod::LBFGS;
    throw std::invalid_argument("optimizer.method must be gd, ncg or lbfgs");
}

inline void parse_random_field(const nlohmann::json& j, RunConfig::RandomField& f) {
    if (j.contains("kind")) f.kind = j.at("kind").get<std::string>();
    if (j.contains("seed")) f.seed = j.at("seed").get<uint64_t>();
    if (j.contains("decay")) f.decay = j.at("decay").get<double>();
    if (j.contains("amplitude")) f.amplitude = j.at("amplitude").get<double>();
}

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.contains("n")) c.grid.n = g.at("n").get<int>();
        if (g.contains("length")) c.grid.length = g.at("length").get<double>();
        if (g.contains("dealias"))
            c.grid.dealias_rule = detail::parse_rule(g.at("dealias").get<std::string>());
    }
    if (j.contains("params")) {
        const auto& p = j.at("params");
        if (p.contains("mu")) c.params.mu = p.at("mu").get<double>();
        if (p.contains("alpha")) c.params.alpha = p.at("alpha").get<double>();
        if (p.contains("beta")) c.params.beta = p.at("beta").get<double>();
        if (p.contains("r")) c.params.r = p.at("r").get<int>();
    }
    if (j.contains("time")) {
        const auto& t = j.at("time");
        if (t.contains("T")) c.T = t.at("T").get<double>();
        if (t.contains("dt")) c.dt = t.at("dt").get<double>();
        if (t.contains("checkpoint_stride"))
            c.checkpoint_stride = t.at("checkpoint_stride").get<int>();
    }
    if (j.contains("initial")) detail::parse_random_field(j.at("initial"), c.initial);
    if (j.contains("forcing")) detail::parse_random_field(j.at("forcing"), c.forcing);
    if (j.contains("control")) {
        const auto& d = j.at("control");
        if (d.contains("kind")) c.control.kind = d.at("kind").get<std::string>();
        if (d.contains("radius")) c.control.radius = d.at("radius").get<int>();
        if (d.contains("disk_radius")) c.control.disk_radius = d.at("disk_radius").get<double>();
        if (d.contains("center_x")) c.control.center_x = d.at("center_x").get<double>();
        if (d.contains("center_y")) c.control.center_y = d.at("center_y").get<double>();
    }
    if (j.contains("cost")) {
        const auto& w = j.at("cost");
        if (w.contains("w_track")) c.w_track = w.at("w_track").get<double>();
        if (w.contains("w_enstrophy")) c.w_enstrophy = w.at("w_enstrophy").get<double>();
        if (w.contains("w_control")) c.w_control = w.at("w_control").get<double>();
        if (w.contains("w_terminal")) c.w_terminal = w.at("w_terminal").get<double>();
        if (w.contains("reference_control"))
            detail::parse_random_field(w.at("reference_control"), c.reference_control);
    }
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        if (o.contains("method"))
            c.optimizer.method = detail::parse_method(o.at("method").get<std::string>());
        if (o.contains("memory")) c.optimizer.lbfgs_memory = o.at("memory").get<int>();
        if (o.contains("grad_tol")) c.optimizer.grad_tol = o.at("grad_tol").get<double>();
        if (o.contains("max_iters")) c.optimizer.max_iters = o.at("max_iters").get<int>();
        if (o.contains("armijo_c1")) c.optimizer.armijo_c1 = o.at("armijo_c1").get<double>();
        if (o.contains("backtrack_rho"))
            c.optimizer.backtrack_rho = o.at("backtrack_rho").get<double>();
        if (o.contains("max_backtracks"))
            c.optimizer.max_backtracks = o.at("max_backtracks").get<int>();
    }
    if (j.contains("assimilation")) {
        const auto& a = j.at("assimilation");
        if (a.contains("noise_level"))
            c.assimilation.noise_level = a.at("noise_level").get<double>();
        if (a.contains("w_init")) c.assimilation.w_init = a.at("w_init").get<double>();
        if (a.contains("w_track")) c.assimilation.w_track = a.at("w_track").get<double>();
        if (a.contains("w_enstrophy"))
            c.assimilation.w_enstrophy = a.at("w_enstrophy").get<double>();
        if (a.contains("w_terminal"))
            c.assimilation.w_terminal = a.at("w_terminal").get<double>();
        if (a.contains("truth")) detail::parse_random_field(a.at("truth"), c.truth);
    }
    if (j.contains("verify")) {
        const auto& v = j.at("verify");
        if (v.contains("fields")) c.verify.n_fields = v.at("fields").get<int>();
        if (v.contains("pairs")) c.verify.n_pairs = v.at("pairs").get<int>();
        if (v.contains("global_monotonicity"))
            c.verify.global_monotonicity = v.at("global_monotonicity").get<bool>();
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config file: " + path);
    nlohmann::json j;
    is >> j;
    return parse_config(j);
}

} // namespace cbf
