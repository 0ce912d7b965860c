#pragma once

#include <optional>
#include <span>
#include <vector>

#include "phasefield/run_record.hpp"
#include "phasefield/stepper.hpp"

namespace phasefield {

struct MonotoneReport {
    bool pass = true;
    long first_violation_step = -1;  // -1 when no violation
    double max_increase = 0.0;       // largest E_{n+1} - E_n, clamped at 0
};

// Checks E_{n+1} <= E_n + tol along a recorded run, including the
// initial-energy -> first-row transition. A diverged record fails.
MonotoneReport check_energy_monotone(const RunRecord& record, double tol);

// Slack (RHS - LHS) in the per-step energy inequality of the
// Laplacian-stabilized scheme; nonnegative up to round-off when
// (before, after) are consecutive states of a run with s_op = 1.
double energy_inequality_margin_ch(const SpectralField& before,
                                   const SpectralField& after, double nu,
                                   double tau, double A);
double energy_inequality_margin_mbe(const SpectralField& before,
                                    const SpectralField& after, double nu,
                                    double tau, double A);

// Same margin assembled from the diagnostics a step already computed,
// avoiding any re-transform.  Only meaningful for s_op = 1 plans.
double step_margin_from_diagnostics(ModelKind kind,
                                    const StepDiagnostics& diagnostics,
                                    double nu, double tau, double A);

// Upper bound from the discrete Gronwall inequality: for nonnegative
// sequences with (y_{n+1} - y_n)/tau <= alpha_n y_n + beta_n,
//   y_m <= exp(tau*sum_{n<m} alpha_n) y_0
//          + tau*sum_{k<m} exp(tau*sum_{k<j<m} alpha_j) beta_k.
double discrete_gronwall_bound(double y0, std::span<const double> alpha,
                               std::span<const double> beta, double tau,
                               long m);

// ||f||_inf / (||f||_{H^1_dot} * log(3 + ||f||_{H^s})) for mean-zero f;
// bounded uniformly over nonzero fields when s > 1. Zero field maps to 0.
double log_interp_ratio(const SpectralField& f, double s = 1.5);

// run() with a hook that fills each row's lemma_margin from the step
// diagnostics (s_op = 1 plans only; NaN otherwise).
RunRecord run_instrumented(const SpectralField& init, const ModelConfig& config,
                           const StabilizationPlan& plan, double tau,
                           long n_steps, const StepOptions& options = {});
RunRecord run_instrumented(const InitialCondition& init,
                           const GridSpec& grid, const ModelConfig& config,
                           const StabilizationPlan& plan, double tau,
                           long n_steps, const StepOptions& options = {});

enum class ScanParameter { Beta, DirectA };

struct StabilityScanRequest {
    ModelConfig config;
    GridSpec grid;
    InitialCondition init;
    std::vector<double> taus;
    std::vector<double> values;  // beta ladder or direct A ladder
    ScanParameter parameter = ScanParameter::Beta;
    double s_op = 1.0;
    long n_steps = 200;
    double tol_factor = 1e-10;  // monotone tolerance = tol_factor*max(1, E_0)
};

struct ScanCell {
    double tau = 0.0;
    double value = 0.0;  // the scanned parameter (beta or A)
    double A = 0.0;      // resolved coefficient actually used
    bool monotone = false;
    long first_violation_step = -1;
    double final_energy = 0.0;
    bool diverged = false;
};

// Runs every (tau, value) pair; cells are ordered taus-major, values-minor.
std::vector<ScanCell> stability_scan(const StabilityScanRequest& request);

// Smallest scanned value whose run at the given tau stayed monotone.
std::optional<ScanCell> minimal_stable_cell(std::span<const ScanCell> cells,
                                            double tau);

struct RatePoint {
    double resolution = 0.0;  // tau for temporal studies
    double error = 0.0;
};

struct RateEstimate {
    std::vector<RatePoint> points;
    double fitted_order = 0.0;  // NaN when fewer than 3 points
    double r_squared = 0.0;
};

// Least-squares slope of log(error) against log(resolution); requires
// positive errors and at least 3 points for a fit.
RateEstimate fit_rate(std::span<const RatePoint> points);

struct TemporalStudy {
    ModelConfig config;
    GridSpec grid;
    InitialCondition init;
    std::vector<double> taus;  // strictly decreasing, each dividing t_final
    double t_final = 0.0;
    std::optional<StabilizationPlan> plan;  // resolved from beta when absent
    double beta = 1.0;
    int refinement = 16;  // reference tau = min(taus)/refinement
};

// Self-convergence in time at fixed resolution: errors at t_final against a
// refined-step reference (or the exact semigroup when the model is linear
// and unstabilized), measured in L2 for Cahn-Hilliard and H^1_dot for the
// slope-selection model.
RateEstimate temporal_convergence(const TemporalStudy& study);

struct SpatialStudy {
    ModelConfig config;
    std::vector<int> resolutions;  // strictly increasing cutoff radii
    InitialCondition init;
    double tau = 0.0;
    double t_final = 0.0;
    std::optional<StabilizationPlan> plan;
    double beta = 1.0;
    Cutoff cutoff = Cutoff::EuclideanBall;
    int reference_scale = 2;  // N_ref = reference_scale*max(resolutions)
    int refinement = 16;      // reference tau = tau/refinement
};

struct SpatialPoint {
    int resolution = 0;
    double error = 0.0;
};

struct SpatialResult {
    std::vector<SpatialPoint> points;
    // observed_orders[i] = log(e_i/e_{i+1}) / log(N_{i+1}/N_i)
    std::vector<double> observed_orders;
    bool superalgebraic = false;
    int reference_resolution = 0;
    double reference_tau = 0.0;
};

// Self-convergence in space at fixed (small) time step: all runs start from
// the cutoff-truncation of one reference initial state and are compared to a
// finer-grid, finer-step reference at t_final. Decay is flagged
// superalgebraic when the observed orders grow along the pre-floor pairs.
SpatialResult spatial_convergence(const SpatialStudy& study);

// Worker cap for the parallel studies: PHASEFIELD_THREADS when set to a
// positive integer, hardware concurrency otherwise.
int thread_cap();

}  // namespace phasefield
