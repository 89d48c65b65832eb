#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbf/control_op.hpp"
#include "cbf/operators.hpp"
#include "cbf/trajectory.hpp"

namespace cbf {

struct BlowupError : std::runtime_error {
    int step;
    explicit BlowupError(int s)
        : std::runtime_error("numerical blowup at step " + std::to_string(s)), step(s) {}
};

namespace detail {

/// Frozen samples of a state, shared by the nonlinear rhs and the
/// linearized/adjoint operators evaluated at that state.
struct StateData {
    PhysicalVecField phys;
    GradientSamples grad;
};

inline StateData make_state_data(const SpectralVecField& u) {
    return StateData{to_physical(u), gradient_samples(u)};
}

} // namespace detail

/// One integrating-factor Heun step: the stiff linear part
/// exp(-(mu |k|^2 + alpha) dt) is integrated exactly per mode, the nonlinear
/// part -B(u) - beta C(u) + source is explicit two-stage.
class Stepper {
  public:
    Stepper(const GridSpec& grid, const CbfParams& params, double dt)
        : grid_(grid), params_(params), dt_(dt), rule_(effective_rule(grid, params.r)) {
        grid_.validate();
        params_.validate();
        if (!(dt > 0.0)) throw std::invalid_argument("Stepper: dt must be positive");
        const int n = grid.n;
        const double kunit2 = grid.wavenumber_unit() * grid.wavenumber_unit();
        efac_.resize(static_cast<size_t>(grid.size()));
        for (int ix = 0; ix < n; ++ix) {
            const double kx = signed_freq(ix, n);
            for (int iy = 0; iy < n; ++iy) {
                const double ky = signed_freq(iy, n);
                efac_[static_cast<size_t>(ix) * n + iy] =
                    std::exp(-(params.mu * kunit2 * (kx * kx + ky * ky) + params.alpha) * dt);
            }
        }
    }

    const GridSpec& grid() const { return grid_; }
    const CbfParams& params() const { return params_; }
    double dt() const { return dt_; }
    DealiasRule rule() const { return rule_; }

    void apply_efac(SpectralVecField& u) const {
        for (int c = 0; c < 2; ++c)
            for (size_t i = 0; i < u.size(); ++i) u.comp[c][i] *= efac_[i];
    }

    /// N(u) = conform(-(u.grad)u - beta |u|^(r-1) u); source terms are added
    /// by the caller. Reuses precomputed samples of u.
    SpectralVecField nonlinear(const detail::StateData& ud) const {
        const auto& up = ud.phys;
        PhysicalVecField rhs(grid_);
        const double beta = params_.beta;
        const int r = params_.r;
        for (size_t i = 0; i < up.size(); ++i) {
            double w = 0.0;
            if (beta != 0.0) {
                const double m2 =
                    up.comp[0][i] * up.comp[0][i] + up.comp[1][i] * up.comp[1][i];
                w = beta * (r == 1 ? 1.0 : (r == 2 ? std::sqrt(m2) : m2));
            }
            for (int j = 0; j < 2; ++j) {
                const double adv = up.comp[0][i] * ud.grad.grad[0][j][i] +
                                   up.comp[1][i] * ud.grad.grad[1][j][i];
                rhs.comp[j][i] = -adv - w * up.comp[j][i];
            }
        }
        return conform(to_spectral(rhs), rule_);
    }

    /// The predictor value of the step from u; its Jacobian is where the
    /// exact discrete tangent evaluates the second stage.
    SpectralVecField predict_stage(const SpectralVecField& u, const detail::StateData& ud,
                                   const SpectralVecField* src_n) const {
        SpectralVecField k1 = nonlinear(ud);
        if (src_n) k1 += *src_n;
        SpectralVecField stage = u;
        stage.add_scaled(dt_, k1);
        apply_efac(stage);
        return stage;
    }

    /// Advances u by one step. `stage` receives the predictor value and
    /// `stage_data` its samples (shared with the corrector evaluation).
    SpectralVecField step(const SpectralVecField& u, const detail::StateData& ud,
                          const SpectralVecField* src_n, const SpectralVecField* src_np1,
                          SpectralVecField& stage, detail::StateData& stage_data) const {
        SpectralVecField k1 = nonlinear(ud);
        if (src_n) k1 += *src_n;
        stage = u;
        stage.add_scaled(dt_, k1);
        apply_efac(stage);
        stage_data = detail::make_state_data(stage);
        SpectralVecField k2 = nonlinear(stage_data);
        if (src_np1) k2 += *src_np1;
        SpectralVecField out = u;
        out.add_scaled(0.5 * dt_, k1);
        apply_efac(out);
        out.add_scaled(0.5 * dt_, k2);
        return out;
    }

    SpectralVecField step(const SpectralVecField& u, const detail::StateData& ud,
                          const SpectralVecField* src_n, const SpectralVecField* src_np1,
                          SpectralVecField& stage) const {
        detail::StateData scratch;
        return step(u, ud, src_n, src_np1, stage, scratch);
    }

  private:
    GridSpec grid_;
    CbfParams params_;
    double dt_;
    DealiasRule rule_;
    std::vector<double> efac_;
};

/// Scalar time series recorded along a forward solve, in the grouping of the
/// energy equality: d/dt ||u||^2 + 2(mu ||u||_V^2 + alpha ||u||^2 +
/// beta ||u||_{L^{r+1}}^{r+1}) = 2 <f, u> + 2 <DU, u>.
struct EnergyLedger {
    std::vector<double> t;
    std::vector<double> kinetic;           // ||u||_H^2
    std::vector<double> viscous;           // mu ||u||_V^2
    std::vector<double> darcy;             // alpha ||u||_H^2
    std::vector<double> forchheimer;       // beta ||u||_{L^{r+1}}^{r+1}
    std::vector<double> work_f;            // <f, u>
    std::vector<double> work_du;           // <DU, u>
    std::vector<double> equality_residual; // running normalized residual
    double K_T = 0.0;

    size_t n_nodes() const { return t.size(); }
};

namespace detail {

inline double trapezoid(const std::vector<double>& y, double dt, size_t upto) {
    if (upto == 0) return 0.0;
    double acc = 0.5 * (y[0] + y[upto]);
    for (size_t i = 1; i < upto; ++i) acc += y[i];
    return acc * dt;
}

inline double trapezoid(const std::vector<double>& y, double dt) {
    return y.empty() ? 0.0 : trapezoid(y, dt, y.size() - 1);
}

} // namespace detail

struct ForwardResult {
    Trajectory traj;
    EnergyLedger ledger;
};

/// Integrates the controlled state equation from u0 over [0, T].
/// `controls` is either empty or one field per node; `T / dt` must be an
/// integer count of steps.
inline ForwardResult solve_forward(const SpectralVecField& u0, const CbfParams& params,
                                   const ControlOperatorD& D, const FieldSeries& controls,
                                   const ForcingSpec& f, double T, double dt,
                                   int checkpoint_stride = 10) {
    params.validate();
    if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("solve_forward: need T, dt > 0");
    const double steps_real = T / dt;
    const int n_steps = static_cast<int>(std::llround(steps_real));
    if (n_steps < 1 || std::abs(steps_real - n_steps) > 1e-9 * std::max(1.0, steps_real))
        throw std::invalid_argument("solve_forward: T / dt must be an integer");
    const size_t n_nodes = static_cast<size_t>(n_steps) + 1;
    if (!controls.empty() && controls.size() != n_nodes)
        throw std::invalid_argument("solve_forward: control series not aligned to nodes");
    f.check_alignment(n_nodes);

    const Stepper stepper(u0.grid, params, dt);
    const DealiasRule rule = stepper.rule();

    // Conformed per-node sources; f and DU kept separately for the ledger.
    FieldSeries fs, dus;
    if (!f.empty()) {
        fs.reserve(n_nodes);
        for (size_t k = 0; k < n_nodes; ++k) fs.push_back(conform(*f.at(k), rule));
    }
    if (!controls.empty()) {
        dus.reserve(n_nodes);
        for (size_t k = 0; k < n_nodes; ++k) dus.push_back(D.apply(controls[k], rule));
    }
    FieldSeries sources;
    if (!fs.empty() || !dus.empty()) {
        sources.reserve(n_nodes);
        for (size_t k = 0; k < n_nodes; ++k) {
            if (!fs.empty() && !dus.empty())
                sources.push_back(fs[k] + dus[k]);
            else
                sources.push_back(!fs.empty() ? fs[k] : dus[k]);
        }
    }

    Trajectory traj;
    traj.grid = u0.grid;
    traj.dt = dt;
    traj.n_steps = n_steps;
    traj.checkpoint_stride = effective_stride(n_steps, checkpoint_stride);
    traj.sources = sources;

    EnergyLedger ledger;
    auto record = [&](size_t k, const SpectralVecField& u) {
        ledger.t.push_back(dt * static_cast<double>(k));
        const double h2 = norm_H2(u);
        ledger.kinetic.push_back(h2);
        ledger.viscous.push_back(params.mu * norm_V2(u));
        ledger.darcy.push_back(params.alpha * h2);
        ledger.forchheimer.push_back(
            params.beta == 0.0 ? 0.0
                               : params.beta * std::pow(norm_Lp(u, params.r + 1.0),
                                                        params.r + 1.0));
        ledger.work_f.push_back(fs.empty() ? 0.0 : inner_product(fs[k], u, Space::H));
        ledger.work_du.push_back(dus.empty() ? 0.0 : inner_product(dus[k], u, Space::H));
        if (!std::isfinite(h2) || h2 > 1e24) throw BlowupError(static_cast<int>(k));
    };

    SpectralVecField u = conform(u0, rule);
    traj.stored.push_back(u);
    record(0, u);

    // running trapezoid sums for the equality residual
    double acc_diss = 0.0, acc_work = 0.0;
    const double k0 = ledger.kinetic[0];
    auto dissipation = [&](size_t k) {
        return 2.0 * (ledger.viscous[k] + ledger.darcy[k] + ledger.forchheimer[k]);
    };
    auto workrate = [&](size_t k) { return 2.0 * (ledger.work_f[k] + ledger.work_du[k]); };
    ledger.equality_residual.push_back(0.0);

    SpectralVecField stage(u.grid);
    for (int k = 0; k < n_steps; ++k) {
        const SpectralVecField* sn = sources.empty() ? nullptr : &sources[k];
        const SpectralVecField* snp = sources.empty() ? nullptr : &sources[k + 1];
        u = stepper.step(u, detail::make_state_data(u), sn, snp, stage);
        record(k + 1, u);
        acc_diss += 0.5 * dt * (dissipation(k) + dissipation(k + 1));
        acc_work += 0.5 * dt * (workrate(k) + workrate(k + 1));
        ledger.equality_residual.push_back(
            std::abs(ledger.kinetic[k + 1] + acc_diss - k0 - acc_work) / (k0 + 1.0));
        if (traj.is_stored(k + 1)) traj.stored.push_back(u);
    }

    // A-priori bound constant: V' norms realized as lambda1^{-1/2} ||.||_H.
    const double lam = u0.grid.lambda1();
    double f2 = 0.0, u2 = 0.0;
    if (!fs.empty()) {
        std::vector<double> fn(n_nodes);
        for (size_t k = 0; k < n_nodes; ++k) fn[k] = norm_H2(fs[k]);
        f2 = detail::trapezoid(fn, dt);
    }
    if (!controls.empty()) {
        std::vector<double> un(n_nodes);
        for (size_t k = 0; k < n_nodes; ++k) un[k] = norm_H2(controls[k]);
        u2 = detail::trapezoid(un, dt);
    }
    const double dnorm = D.norm_bound();
    ledger.K_T = k0 + 2.0 / (params.mu * lam) * f2 +
                 2.0 / (params.mu * lam) * dnorm * dnorm * u2;

    return ForwardResult{std::move(traj), std::move(ledger)};
}

/// Normalized defect of the energy equality at the final time.
inline double energy_equality_residual(const Trajectory& traj, const EnergyLedger& ledger) {
    if (ledger.n_nodes() != static_cast<size_t>(traj.n_steps) + 1)
        throw std::invalid_argument("energy_equality_residual: ledger does not match trajectory");
    return ledger.equality_residual.back();
}

/// K_T minus the largest value of the a-priori bounded quantity; nonnegative
/// up to discretization slack.
inline double apriori_bound_check(const Trajectory& traj, const EnergyLedger& ledger) {
    const double dt = traj.dt;
    double worst = 0.0;
    double acc_v = 0.0, acc_d = 0.0, acc_f = 0.0;
    for (size_t k = 0; k < ledger.n_nodes(); ++k) {
        if (k > 0) {
            acc_v += 0.5 * dt * (ledger.viscous[k - 1] + ledger.viscous[k]);
            acc_d += 0.5 * dt * (ledger.darcy[k - 1] + ledger.darcy[k]);
            acc_f += 0.5 * dt * (ledger.forchheimer[k - 1] + ledger.forchheimer[k]);
        }
        worst = std::max(worst, ledger.kinetic[k] + acc_v + 2.0 * acc_d + 2.0 * acc_f);
    }
    return ledger.K_T - worst;
}

namespace detail {

struct StepData {
    SpectralVecField u;
    SpectralVecField stage;
    StateData u_data;
    StateData stage_data;
};

/// Serves per-step states and predictor stages along a stored trajectory,
/// recomputing one checkpoint segment at a time.
class StateSampler {
  public:
    StateSampler(const Trajectory& traj, const CbfParams& params)
        : traj_(traj), stepper_(traj.grid, params, traj.dt) {}

    const Stepper& stepper() const { return stepper_; }

    /// Data for step k (uses u_k and its stage value), 0 <= k < n_steps.
    const StepData& step_data(int k) {
        if (k < 0 || k >= traj_.n_steps)
            throw std::invalid_argument("StateSampler: step out of range");
        const int seg = traj_.checkpoint_before(k);
        if (seg != cache_begin_) load_segment(seg);
        return cache_.at(static_cast<size_t>(k - seg));
    }

  private:
    void load_segment(int begin) {
        const int end = std::min(begin + traj_.checkpoint_stride, traj_.n_steps);
        cache_.clear();
        cache_.reserve(static_cast<size_t>(end - begin));
        SpectralVecField u = traj_.at_step(begin);
        for (int j = begin; j < end; ++j) {
            StepData d;
            d.u = u;
            d.u_data = make_state_data(d.u);
            const SpectralVecField* sn = traj_.sources.empty() ? nullptr : &traj_.sources[j];
            if (traj_.is_stored(j + 1)) {
                // the corrector is already stored; only the predictor is needed
                d.stage = stepper_.predict_stage(d.u, d.u_data, sn);
                d.stage_data = make_state_data(d.stage);
                u = traj_.at_step(j + 1);
            } else {
                const SpectralVecField* snp =
                    traj_.sources.empty() ? nullptr : &traj_.sources[j + 1];
                u = stepper_.step(d.u, d.u_data, sn, snp, d.stage, d.stage_data);
            }
            cache_.push_back(std::move(d));
        }
        cache_begin_ = begin;
    }

    const Trajectory& traj_;
    Stepper stepper_;
    std::vector<StepData> cache_;
    int cache_begin_ = -1;
};

} // namespace detail

} // namespace cbf
