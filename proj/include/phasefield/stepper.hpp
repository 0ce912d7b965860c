#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <variant>

#include "phasefield/models.hpp"
#include "phasefield/run_record.hpp"

namespace phasefield {

struct StepperState {
    SpectralField field;
    long step = 0;
    double time = 0.0;
    double tau = 0.0;
};

// Per-step diagnostics.  For Cahn-Hilliard linf_* is ||u||_inf; for MBE it is
// ||grad h||_inf (the sup that controls stability there).
struct StepDiagnostics {
    double energy_before = 0.0;
    double energy_after = 0.0;
    double diff_l2 = 0.0;       // ||u^{n+1} - u^n||_2
    double diff_grad_l2 = 0.0;  // ||grad(u^{n+1} - u^n)||_2
    double linf_before = 0.0;
    double linf_after = 0.0;
    double residual = 0.0;  // L2 norm of the scheme identity remainder
    double lemma_margin = std::numeric_limits<double>::quiet_NaN();
};

struct StepOptions {
    // Pins coeff(0) of every produced state to exactly 0.  The semi-implicit
    // update leaves the k = 0 mode untouched anyway; this guards against a
    // non-mean-zero initial state leaking through a run.
    bool enforce_mean_zero = true;
};

// One step of the stabilized semi-implicit scheme for Cahn-Hilliard:
//   (u' - u)/tau = -nu*Lap^2 u' - A*(-Lap)^{s_op}(u' - u) + Lap P_N f(u)
// solved mode by mode.  Throws DivergenceError on non-finite output.
std::pair<StepperState, StepDiagnostics> step_cahn_hilliard(
    const StepperState& state, double nu, const StabilizationPlan& plan,
    Nonlinearity nonlinearity = Nonlinearity::Full, const StepOptions& options = {});

// Same splitting for the MBE equation:
//   (h' - h)/tau = -nu*Lap^2 h' - A*(-Lap)^{s_op}(h' - h) + P_N div g(grad h)
std::pair<StepperState, StepDiagnostics> step_mbe(
    const StepperState& state, double nu, const StabilizationPlan& plan,
    Nonlinearity nonlinearity = Nonlinearity::Full, const StepOptions& options = {});

std::pair<StepperState, StepDiagnostics> step(const StepperState& state,
                                              const ModelConfig& config,
                                              const StabilizationPlan& plan,
                                              const StepOptions& options = {});

struct RunHooks {
    // Called after each accepted step, before the row is recorded; may fill
    // diagnostics.lemma_margin.
    std::function<void(const StepperState& prev, const StepperState& next,
                       StepDiagnostics& diagnostics)>
        on_step;
};

// Marches n_steps from P_N(init) (mean removed), recording one row per step.
// A non-finite state or energy above 1e12 * max(1, E0) stops the run early
// with the partial record flagged as diverged.
RunRecord run(const SpectralField& init, const ModelConfig& config,
              const StabilizationPlan& plan, double tau, long n_steps,
              const RunHooks& hooks = {}, const StepOptions& options = {});

// Marches n_steps from P_N(init) without per-step diagnostics and returns the
// final state; a non-finite state raises DivergenceError instead of being
// recorded.  Used by the convergence studies, where only endpoints matter.
StepperState advance(const SpectralField& init, const ModelConfig& config,
                     const StabilizationPlan& plan, double tau, long n_steps,
                     const StepOptions& options = {});

// Seeded band-limited field with independent coefficients, rescaled so
// ||u0||_inf equals amplitude; mean-zero by construction.
struct RandomBandlimited {
    std::uint64_t seed = 0;
    double amplitude = 1.0;
    int band = 1;
};

// amplitude * sin(k . x)
struct SingleMode {
    std::array<int, 2> mode{1, 0};
    double amplitude = 1.0;
};

// amplitude * sin(mode . x) + amplitude2 * cos(mode2 . x)
struct TwoMode {
    std::array<int, 2> mode{1, 0};
    double amplitude = 1.0;
    std::array<int, 2> mode2{0, 1};
    double amplitude2 = 1.0;
};

// amplitude * exp(kappa*(cos x + sin y) - 2*kappa): smooth but not
// band-limited, with sup equal to amplitude and Fourier tails decaying like
// Bessel coefficients.  The spatial-convergence probe.
struct SmoothExponential {
    double kappa = 4.0;
    double amplitude = 1.0;
};

using InitialCondition =
    std::variant<RandomBandlimited, SingleMode, TwoMode, SmoothExponential>;

SpectralField make_initial(const InitialCondition& init, const GridSpec& grid);

}  // namespace phasefield
