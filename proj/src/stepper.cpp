#include "phasefield/stepper.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "phasefield/errors.hpp"

namespace phasefield {

namespace {

constexpr double kFourPiSq = kDomainLength * kDomainLength;

double stab_weight(long k_sq, double s_op) {
    if (s_op == 1.0) return static_cast<double>(k_sq);
    if (s_op == 2.0) return static_cast<double>(k_sq) * k_sq;
    return std::pow(static_cast<double>(k_sq), s_op);
}

void check_step_inputs(const StepperState& state, double nu,
                       const StabilizationPlan& plan) {
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
    if (!(state.tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (plan.A < 0.0) throw std::invalid_argument("A must be nonnegative");
    if (!(plan.s_op >= 1.0)) throw std::invalid_argument("s_op must be at least 1");
    validate(state.field.grid());
}

void check_finite(const SpectralField& f, long step) {
    for (const auto& z : f.coeffs())
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw DivergenceError(
                "non-finite coefficient at step " + std::to_string(step), step);
}

void check_finite(const PhysicalField& v, long step) {
    for (double x : v.values())
        if (!std::isfinite(x))
            throw DivergenceError(
                "non-finite point value at step " + std::to_string(step), step);
}

// ||d||_2 and ||grad d||_2 for d = a - b, accumulated in spectral space.
std::pair<double, double> diff_norms(const SpectralField& a,
                                     const SpectralField& b) {
    const GridSpec& grid = a.grid();
    long double sum = 0.0L, grad_sum = 0.0L;
    for (int i = 0; i < grid.M; ++i) {
        const int k1 = grid.wavenumber(i);
        for (int j = 0; j < grid.M; ++j) {
            const int k2 = grid.wavenumber(j);
            const std::size_t idx = static_cast<std::size_t>(i) * grid.M + j;
            const double d = std::norm(a.coeffs()[idx] - b.coeffs()[idx]);
            sum += d;
            grad_sum += static_cast<double>(k1 * k1 + k2 * k2) * d;
        }
    }
    return {std::sqrt(static_cast<double>(sum)) / kDomainLength,
            std::sqrt(static_cast<double>(grad_sum)) / kDomainLength};
}

// Per-mode semi-implicit solve shared by both models: the nonlinear term
// enters through forcing_hat, already multiplied by its own symbol.
SpectralField solve_modes(const SpectralField& u, const SpectralField& forcing_hat,
                          double nu, double tau, const StabilizationPlan& plan,
                          const StepOptions& options, long next_step) {
    const GridSpec& grid = u.grid();
    SpectralField next(grid);
    for (int i = 0; i < grid.M; ++i) {
        const int k1 = grid.wavenumber(i);
        for (int j = 0; j < grid.M; ++j) {
            const int k2 = grid.wavenumber(j);
            if (!grid.in_cutoff(k1, k2)) continue;
            const long k_sq = static_cast<long>(k1) * k1 + static_cast<long>(k2) * k2;
            const double k_sq_d = static_cast<double>(k_sq);
            const double stab = stab_weight(k_sq, plan.s_op);
            const std::size_t idx = static_cast<std::size_t>(i) * grid.M + j;
            const std::complex<double> num =
                (1.0 + plan.A * tau * stab) * u.coeffs()[idx] +
                tau * forcing_hat.coeffs()[idx];
            const double denom =
                1.0 + nu * tau * k_sq_d * k_sq_d + plan.A * tau * stab;
            next.coeffs()[idx] = num / denom;
        }
    }
    if (options.enforce_mean_zero) next.at(0, 0) = 0.0;
    check_finite(next, next_step);
    return next;
}

struct ChWork {
    PhysicalField u_phys;
    SpectralField rhs_hat;  // Lap P_N f(u), the full explicit forcing
    SpectralField next;
};

ChWork ch_core(const StepperState& state, double nu, const StabilizationPlan& plan,
               Nonlinearity nonlinearity, const StepOptions& options) {
    const GridSpec& grid = state.field.grid();
    check_finite(state.field, state.step);
    ChWork w{to_physical(state.field), SpectralField(grid), SpectralField(grid)};
    check_finite(w.u_phys, state.step + 1);
    if (nonlinearity == Nonlinearity::Full) {
        const PhysicalField force = double_well_derivative(w.u_phys);
        check_finite(force, state.step + 1);
        w.rhs_hat = laplacian(project(to_spectral(force)));
    }
    w.next = solve_modes(state.field, w.rhs_hat, nu, state.tau, plan, options,
                         state.step + 1);
    return w;
}

struct MbeWork {
    PhysicalField px, py;   // grad h on the collocation grid
    SpectralField rhs_hat;  // P_N div g(grad h)
    SpectralField next;
};

MbeWork mbe_core(const StepperState& state, double nu, const StabilizationPlan& plan,
                 Nonlinearity nonlinearity, const StepOptions& options) {
    const GridSpec& grid = state.field.grid();
    check_finite(state.field, state.step);
    auto [gx_hat, gy_hat] = gradient(state.field);
    MbeWork w{to_physical(gx_hat), to_physical(gy_hat), SpectralField(grid),
              SpectralField(grid)};
    check_finite(w.px, state.step + 1);
    check_finite(w.py, state.step + 1);
    if (nonlinearity == Nonlinearity::Full) {
        auto [fx, fy] = slope_selection_flux(w.px, w.py);
        check_finite(fx, state.step + 1);
        check_finite(fy, state.step + 1);
        w.rhs_hat = project(divergence(to_spectral(fx), to_spectral(fy)));
    }
    w.next = solve_modes(state.field, w.rhs_hat, nu, state.tau, plan, options,
                         state.step + 1);
    return w;
}

double residual_norm(const SpectralField& before, const SpectralField& after,
                     const SpectralField& rhs_hat, double nu, double tau,
                     const StabilizationPlan& plan) {
    const GridSpec& grid = before.grid();
    long double sum = 0.0L;
    for (int i = 0; i < grid.M; ++i) {
        const int k1 = grid.wavenumber(i);
        for (int j = 0; j < grid.M; ++j) {
            const int k2 = grid.wavenumber(j);
            const long k_sq = static_cast<long>(k1) * k1 + static_cast<long>(k2) * k2;
            const double k_sq_d = static_cast<double>(k_sq);
            const std::size_t idx = static_cast<std::size_t>(i) * grid.M + j;
            const std::complex<double> d =
                after.coeffs()[idx] - before.coeffs()[idx];
            const std::complex<double> r =
                d / tau + nu * k_sq_d * k_sq_d * after.coeffs()[idx] +
                plan.A * stab_weight(k_sq, plan.s_op) * d -
                rhs_hat.coeffs()[idx];
            sum += std::norm(r);
        }
    }
    return std::sqrt(static_cast<double>(sum)) / kDomainLength;
}

double sup_magnitude(const PhysicalField& vx, const PhysicalField& vy) {
    double m = 0.0;
    for (std::size_t i = 0; i < vx.values().size(); ++i)
        m = std::max(m, std::hypot(vx.values()[i], vy.values()[i]));
    return m;
}

}  // namespace

std::pair<StepperState, StepDiagnostics> step_cahn_hilliard(
    const StepperState& state, double nu, const StabilizationPlan& plan,
    Nonlinearity nonlinearity, const StepOptions& options) {
    check_step_inputs(state, nu, plan);
    const double tau = state.tau;
    ChWork w = ch_core(state, nu, plan, nonlinearity, options);

    StepperState next{std::move(w.next), state.step + 1,
                      tau * static_cast<double>(state.step + 1), tau};

    StepDiagnostics diag;
    const double grad_before = norm(state.field, NormKind::Hdot1);
    diag.energy_before =
        0.5 * nu * grad_before * grad_before + double_well_integral(w.u_phys);
    diag.linf_before = sup_norm(w.u_phys);

    const PhysicalField next_phys = to_physical(next.field);
    const double grad_after = norm(next.field, NormKind::Hdot1);
    diag.energy_after =
        0.5 * nu * grad_after * grad_after + double_well_integral(next_phys);
    diag.linf_after = sup_norm(next_phys);

    auto [diff, grad_diff] = diff_norms(next.field, state.field);
    diag.diff_l2 = diff;
    diag.diff_grad_l2 = grad_diff;
    diag.residual =
        residual_norm(state.field, next.field, w.rhs_hat, nu, tau, plan);
    return {std::move(next), diag};
}

std::pair<StepperState, StepDiagnostics> step_mbe(
    const StepperState& state, double nu, const StabilizationPlan& plan,
    Nonlinearity nonlinearity, const StepOptions& options) {
    check_step_inputs(state, nu, plan);
    const double tau = state.tau;
    MbeWork w = mbe_core(state, nu, plan, nonlinearity, options);

    StepperState next{std::move(w.next), state.step + 1,
                      tau * static_cast<double>(state.step + 1), tau};

    StepDiagnostics diag;
    const double lap_before = norm(state.field, NormKind::Hdots, 2.0);
    diag.energy_before =
        0.5 * nu * lap_before * lap_before + slope_well_integral(w.px, w.py);
    diag.linf_before = sup_magnitude(w.px, w.py);

    auto [ngx, ngy] = gradient(next.field);
    const PhysicalField npx = to_physical(ngx);
    const PhysicalField npy = to_physical(ngy);
    const double lap_after = norm(next.field, NormKind::Hdots, 2.0);
    diag.energy_after =
        0.5 * nu * lap_after * lap_after + slope_well_integral(npx, npy);
    diag.linf_after = sup_magnitude(npx, npy);

    auto [diff, grad_diff] = diff_norms(next.field, state.field);
    diag.diff_l2 = diff;
    diag.diff_grad_l2 = grad_diff;
    diag.residual =
        residual_norm(state.field, next.field, w.rhs_hat, nu, tau, plan);
    return {std::move(next), diag};
}

std::pair<StepperState, StepDiagnostics> step(const StepperState& state,
                                              const ModelConfig& config,
                                              const StabilizationPlan& plan,
                                              const StepOptions& options) {
    return config.kind == ModelKind::CahnHilliard
               ? step_cahn_hilliard(state, config.nu, plan, config.nonlinearity,
                                    options)
               : step_mbe(state, config.nu, plan, config.nonlinearity, options);
}

RunRecord run(const SpectralField& init, const ModelConfig& config,
              const StabilizationPlan& plan, double tau, long n_steps,
              const RunHooks& hooks, const StepOptions& options) {
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be at least 1");
    const GridSpec& grid = init.grid();
    validate(grid);

    SpectralField u0 = project(init);
    if (options.enforce_mean_zero) u0.at(0, 0) = 0.0;

    RunRecord record;
    record.params = RunParams{config.kind, config.nu,      grid.N,
                              grid.M,      grid.cutoff,    tau,
                              plan.A,      plan.beta,      plan.s_op,
                              std::nullopt};
    record.initial_energy = energy(config, u0);
    record.initial_mass = mass(u0);
    record.initial_linf = config.kind == ModelKind::CahnHilliard
                              ? sup_norm(to_physical(u0))
                              : sup_gradient_norm(u0);
    record.rows.reserve(static_cast<std::size_t>(n_steps));

    const double energy_cap = 1e12 * std::max(1.0, record.initial_energy);
    StepperState state{std::move(u0), 0, 0.0, tau};
    for (long n = 1; n <= n_steps; ++n) {
        StepperState next{SpectralField(grid), 0, 0.0, tau};
        StepDiagnostics diag;
        try {
            auto result = step(state, config, plan, options);
            next = std::move(result.first);
            diag = result.second;
        } catch (const DivergenceError& e) {
            record.diverged = true;
            record.divergence_step = e.step();
            break;
        }
        if (!std::isfinite(diag.energy_after) || diag.energy_after > energy_cap) {
            record.diverged = true;
            record.divergence_step = next.step;
            break;
        }
        if (hooks.on_step) hooks.on_step(state, next, diag);
        record.rows.push_back(RunRow{next.step, next.time, diag.energy_after,
                                     mass(next.field), diag.linf_after,
                                     diag.diff_l2, diag.residual,
                                     diag.lemma_margin});
        state = std::move(next);
    }
    return record;
}

StepperState advance(const SpectralField& init, const ModelConfig& config,
                     const StabilizationPlan& plan, double tau, long n_steps,
                     const StepOptions& options) {
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (n_steps < 0) throw std::invalid_argument("n_steps must be nonnegative");
    validate(init.grid());

    SpectralField u0 = project(init);
    if (options.enforce_mean_zero) u0.at(0, 0) = 0.0;
    StepperState state{std::move(u0), 0, 0.0, tau};
    check_step_inputs(state, config.nu, plan);
    for (long n = 0; n < n_steps; ++n) {
        SpectralField next =
            config.kind == ModelKind::CahnHilliard
                ? ch_core(state, config.nu, plan, config.nonlinearity, options).next
                : mbe_core(state, config.nu, plan, config.nonlinearity, options).next;
        state.field = std::move(next);
        state.step += 1;
        state.time = tau * static_cast<double>(state.step);
    }
    return state;
}

namespace {

void require_mode_in_band(const GridSpec& grid, const std::array<int, 2>& mode) {
    if (mode[0] == 0 && mode[1] == 0)
        throw std::invalid_argument("initial mode must be nonzero");
    if (!grid.in_cutoff(mode[0], mode[1]))
        throw GridError("initial mode (" + std::to_string(mode[0]) + ", " +
                        std::to_string(mode[1]) + ") outside the cutoff");
}

// Accumulates v at k and conj(v) at -k; valid for 0 < |k| <= N < M/2.
void add_mode(SpectralField& f, const std::array<int, 2>& mode,
              std::complex<double> v) {
    f.at(mode[0], mode[1]) += v;
    f.at(-mode[0], -mode[1]) += std::conj(v);
}

}  // namespace

SpectralField make_initial(const InitialCondition& init, const GridSpec& grid) {
    validate(grid);
    SpectralField field(grid);
    const double half_area = 0.5 * kFourPiSq;  // (2*pi)^2 / 2

    if (const auto* random = std::get_if<RandomBandlimited>(&init)) {
        if (random->band < 1 || random->band > grid.N)
            throw std::invalid_argument("band must lie in [1, N]");
        if (!(random->amplitude >= 0.0))
            throw std::invalid_argument("amplitude must be nonnegative");
        std::mt19937_64 rng(random->seed);
        // Explicit bit mapping keeps the draw sequence platform-independent.
        auto symmetric_unit = [&rng]() {
            return 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
        };
        for (int k1 = 0; k1 <= random->band; ++k1) {
            const int lo = k1 == 0 ? 1 : -random->band;
            for (int k2 = lo; k2 <= random->band; ++k2) {
                if (!grid.in_cutoff(k1, k2, random->band)) continue;
                const double re = symmetric_unit();
                const double im = symmetric_unit();
                add_mode(field, {k1, k2}, {re, im});
            }
        }
        const double sup = sup_norm(to_physical(field));
        const double scale = sup > 0.0 ? random->amplitude / sup : 0.0;
        for (auto& z : field.coeffs()) z *= scale;
        return field;
    }

    if (const auto* single = std::get_if<SingleMode>(&init)) {
        require_mode_in_band(grid, single->mode);
        // a*sin(k.x) has f_hat(k) = -i*a*(2*pi)^2/2.
        add_mode(field, single->mode, {0.0, -single->amplitude * half_area});
        return field;
    }

    if (const auto* two = std::get_if<TwoMode>(&init)) {
        require_mode_in_band(grid, two->mode);
        require_mode_in_band(grid, two->mode2);
        add_mode(field, two->mode, {0.0, -two->amplitude * half_area});
        // a*cos(k.x) has f_hat(k) = a*(2*pi)^2/2.
        add_mode(field, two->mode2, {two->amplitude2 * half_area, 0.0});
        return field;
    }

    const auto& smooth = std::get<SmoothExponential>(init);
    if (!(smooth.kappa >= 0.0))
        throw std::invalid_argument("kappa must be nonnegative");
    if (!(smooth.amplitude >= 0.0))
        throw std::invalid_argument("amplitude must be nonnegative");
    PhysicalField samples(grid);
    const double h = grid.grid_spacing();
    for (int i = 0; i < grid.M; ++i) {
        const double x = h * i;
        for (int j = 0; j < grid.M; ++j) {
            const double y = h * j;
            samples.value(i, j) =
                smooth.amplitude *
                std::exp(smooth.kappa * (std::cos(x) + std::sin(y) - 2.0));
        }
    }
    return project(to_spectral(samples));
}

}  // namespace phasefield
