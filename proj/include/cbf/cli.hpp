#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbf/config.hpp"
#include "cbf/io.hpp"

namespace cbf {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failed_checks = 1;
inline constexpr int exit_bad_config = 2;
inline constexpr int exit_blowup = 3;

namespace detail {

inline int run_verify(const RunConfig& cfg, const std::string&) {
    VerifyOptions opt;
    opt.grid = cfg.grid;
    opt.params = cfg.params;
    opt.seed = cfg.seed + 41;
    opt.n_fields = cfg.verify.n_fields;
    opt.n_pairs = cfg.verify.n_pairs;
    opt.global_monotonicity = cfg.verify.global_monotonicity;
    const auto results = run_verify_suite(opt);
    size_t failed = 0;
    std::printf("%-46s %14s %14s  %s\n", "check", "value", "bound", "status");
    for (const auto& r : results) {
        std::printf("%-46s %14.6e %s %10.3e  %s\n", r.name.c_str(), r.value,
                    r.leq ? "<=" : ">=", r.bound, r.pass ? "PASS" : "FAIL");
        if (!r.pass) ++failed;
    }
    std::printf("%zu checks, %zu failed\n", results.size(), failed);
    return failed == 0 ? exit_ok : exit_failed_checks;
}

inline int run_simulate(const RunConfig& cfg, const std::string& out_dir) {
    const SpectralVecField u0 = cfg.initial_field();
    const auto fr = solve_forward(u0, cfg.params, cfg.control_operator(), {},
                                  cfg.forcing_spec(), cfg.T, cfg.dt, cfg.checkpoint_stride);
    save_trajectory(out_dir + "/trajectory.cbf", fr.traj);
    write_energy_csv(out_dir + "/energy.csv", fr.ledger);
    std::printf("simulated %d steps, final |u|_H = %.6e, equality residual = %.3e\n",
                fr.traj.n_steps, norm_H(fr.traj.final_state()),
                energy_equality_residual(fr.traj, fr.ledger));
    return exit_ok;
}

inline int run_optimize(const RunConfig& cfg, const std::string& out_dir) {
    ControlProblem prob;
    prob.grid = cfg.grid;
    prob.params = cfg.params;
    prob.f = cfg.forcing_spec();
    prob.u0 = cfg.initial_field();
    prob.cost = cfg.cost_config();
    prob.T = cfg.T;
    prob.dt = cfg.dt;
    // reference trajectory generated by a known control; the optimizer then
    // steers toward it from zero
    const size_t nn = prob.n_nodes();
    const FieldSeries Uref(nn, cfg.make_field(cfg.reference_control, 37));
    const auto ref =
        solve_forward(prob.u0, prob.params, prob.cost.D, Uref, prob.f, prob.T, prob.dt, 1);
    prob.cost.u_d = ref.traj.stored;
    prob.cost.u_f = ref.traj.final_state();

    auto [U, report] = optimize_distributed(prob, prob.zero_control(), cfg.optimizer);
    write_report_csv(out_dir + "/report.csv", report);
    save_fields(out_dir + "/optimal_control.cbf", U, prob.dt);
    std::printf("optimize: %s after %zu iterates, cost %.6e -> %.6e, |grad| = %.3e, "
                "pontryagin = %.3e (%.2fs)\n",
                report.termination.c_str(), report.history.size(),
                report.history.front().cost, report.final_cost, report.final_grad_norm,
                report.final_pontryagin, report.wall_seconds);
    return exit_ok;
}

inline int run_assimilate(const RunConfig& cfg, const std::string& out_dir) {
    const SpectralVecField truth = cfg.make_field(cfg.truth, 53);
    AssimConfig acfg = generate_twin_data(truth, cfg.params, cfg.forcing_spec(), cfg.T, cfg.dt,
                                          cfg.assimilation.noise_level, cfg.seed + 67);
    acfg.w_track = cfg.assimilation.w_track;
    acfg.w_enstrophy = cfg.assimilation.w_enstrophy;
    acfg.w_terminal = cfg.assimilation.w_terminal;
    acfg.w_init = cfg.assimilation.w_init;

    auto [u0_est, report] =
        assimilate(acfg, cfg.params, cfg.forcing_spec(), cfg.optimizer, cfg.grid);
    write_report_csv(out_dir + "/report.csv", report);
    save_field(out_dir + "/initial_estimate.cbf", u0_est);
    const double rel = norm_H(u0_est - truth) / std::max(1e-30, norm_H(truth));
    std::printf("assimilate: %s after %zu iterates, cost %.6e -> %.6e, recovery error = "
                "%.4e (%.2fs)\n",
                report.termination.c_str(), report.history.size(),
                report.history.front().cost, report.final_cost, rel, report.wall_seconds);
    return exit_ok;
}

} // namespace detail

/// Entry point shared by the binary and the tests. argv excludes the
/// program name.
inline int run_cli(const std::vector<std::string>& argv) {
    CLI::App app{"pseudo-spectral solver and adjoint optimal-control toolkit for the 2D "
                 "convective Brinkman-Forchheimer equations"};
    app.require_subcommand(1);
    std::string config_path, out_dir = ".";
    uint64_t seed = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "base seed override");
    auto* sub_verify = app.add_subcommand("verify", "run the invariant suite");
    auto* sub_simulate = app.add_subcommand("simulate", "integrate the state equation");
    auto* sub_optimize = app.add_subcommand("optimize", "solve the tracking control problem");
    auto* sub_assim = app.add_subcommand("assimilate", "recover the initial datum");
    for (auto* sub : {sub_verify, sub_simulate, sub_optimize, sub_assim}) sub->fallthrough();

    try {
        // CLI11's vector overload takes the arguments reversed, program name excluded
        std::vector<std::string> rev(argv.rbegin(), argv.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return exit_bad_config;
    }
    seed_given = seed_opt->count() > 0;

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return exit_bad_config;
    }
    if (seed_given) cfg.seed = seed;

    const auto problems = cfg.validate(sub_verify->parsed());
    if (!problems.empty()) {
        for (const auto& p : problems) std::fprintf(stderr, "config error: %s\n", p.c_str());
        return exit_bad_config;
    }

    try {
        std::filesystem::create_directories(out_dir);
        if (sub_verify->parsed()) return detail::run_verify(cfg, out_dir);
        if (sub_simulate->parsed()) return detail::run_simulate(cfg, out_dir);
        if (sub_optimize->parsed()) return detail::run_optimize(cfg, out_dir);
        if (sub_assim->parsed()) return detail::run_assimilate(cfg, out_dir);
    } catch (const BlowupError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return exit_blowup;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_failed_checks;
    }
    return exit_bad_config;
}

} // namespace cbf
