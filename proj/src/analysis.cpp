#include "phasefield/analysis.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "phasefield/errors.hpp"
#include "phasefield/spectral.hpp"

namespace phasefield {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// RHS - LHS of the per-step inequality, from precomputed pieces.  diff is
// ||d||_2 for Cahn-Hilliard and ||grad d||_2 for MBE; sup_* likewise
// ||u||_inf or ||grad h||_inf.
double margin_from_parts(ModelKind kind, double energy_before,
                         double energy_after, double diff, double sup_before,
                         double sup_after, double nu, double tau, double A) {
    const double damping = A + 0.5 + std::sqrt(2.0 * nu / tau);
    const double lhs = energy_after - energy_before + damping * diff * diff;
    const double rhs =
        kind == ModelKind::CahnHilliard
            ? diff * diff *
                  (sup_before * sup_before + 0.5 * sup_after * sup_after)
            : diff * diff * 1.5 *
                  std::max(sup_before * sup_before, sup_after * sup_after);
    return rhs - lhs;
}

void check_margin_inputs(const SpectralField& before, const SpectralField& after,
                         double nu, double tau, double A) {
    if (!(before.grid() == after.grid()))
        throw GridError("margin needs both states on the same grid");
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (A < 0.0) throw std::invalid_argument("A must be nonnegative");
}

SpectralField field_difference(const SpectralField& a, const SpectralField& b) {
    SpectralField d(a.grid());
    for (std::size_t i = 0; i < d.coeffs().size(); ++i)
        d.coeffs()[i] = a.coeffs()[i] - b.coeffs()[i];
    return d;
}

template <class F>
void parallel_for(std::size_t n, F&& fn) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& worker : pool) worker.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Steps per run for a step size that must tile [0, t_final] exactly.
long steps_for(double tau, double t_final) {
    const long m = std::lround(t_final / tau);
    if (m < 1 || std::abs(static_cast<double>(m) * tau - t_final) >
                     1e-9 * std::max(t_final, 1.0))
        throw std::invalid_argument("tau must divide t_final");
    return m;
}

}  // namespace

MonotoneReport check_energy_monotone(const RunRecord& record, double tol) {
    MonotoneReport report;
    double previous = record.initial_energy;
    for (const RunRow& row : record.rows) {
        const double increase = row.energy - previous;
        if (increase > report.max_increase) report.max_increase = increase;
        if (increase > tol && report.first_violation_step < 0)
            report.first_violation_step = row.step;
        previous = row.energy;
    }
    if (record.diverged && report.first_violation_step < 0)
        report.first_violation_step = record.divergence_step;
    report.pass = !record.diverged && report.first_violation_step < 0;
    return report;
}

double energy_inequality_margin_ch(const SpectralField& before,
                                   const SpectralField& after, double nu,
                                   double tau, double A) {
    check_margin_inputs(before, after, nu, tau, A);
    const PhysicalField phys_before = to_physical(before);
    const PhysicalField phys_after = to_physical(after);
    const double diff = norm(field_difference(after, before), NormKind::L2);
    return margin_from_parts(ModelKind::CahnHilliard,
                             cahn_hilliard_energy(before, nu),
                             cahn_hilliard_energy(after, nu), diff,
                             sup_norm(phys_before), sup_norm(phys_after), nu,
                             tau, A);
}

double energy_inequality_margin_mbe(const SpectralField& before,
                                    const SpectralField& after, double nu,
                                    double tau, double A) {
    check_margin_inputs(before, after, nu, tau, A);
    const double grad_diff =
        norm(field_difference(after, before), NormKind::Hdot1);
    return margin_from_parts(ModelKind::Mbe, mbe_energy(before, nu),
                             mbe_energy(after, nu), grad_diff,
                             sup_gradient_norm(before),
                             sup_gradient_norm(after), nu, tau, A);
}

double discrete_gronwall_bound(double y0, std::span<const double> alpha,
                               std::span<const double> beta, double tau,
                               long m) {
    if (m < 1) throw std::invalid_argument("m must be at least 1");
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (!(y0 >= 0.0)) throw std::invalid_argument("y0 must be nonnegative");
    const std::size_t n = static_cast<std::size_t>(m);
    if (alpha.size() < n || beta.size() < n)
        throw std::invalid_argument("alpha and beta need at least m entries");
    for (std::size_t k = 0; k < n; ++k)
        if (!(alpha[k] >= 0.0) || !(beta[k] >= 0.0))
            throw std::invalid_argument(
                "alpha and beta entries must be nonnegative");

    long double suffix = 0.0L;  // tau * sum_{j in (k, m)} alpha_j
    long double forced = 0.0L;
    for (std::size_t k = n; k-- > 0;) {
        forced += std::exp(suffix) * static_cast<long double>(beta[k]);
        suffix += static_cast<long double>(tau) * alpha[k];
    }
    return static_cast<double>(std::exp(suffix) * y0 +
                               static_cast<long double>(tau) * forced);
}

double log_interp_ratio(const SpectralField& f, double s) {
    if (!(s > 1.0)) throw std::invalid_argument("s must exceed 1");
    double max_abs = 0.0;
    for (const auto& z : f.coeffs()) max_abs = std::max(max_abs, std::abs(z));
    if (std::abs(f.coeff(0, 0)) > 1e-13 * std::max(1.0, max_abs))
        throw MeanZeroError("log-interpolation ratio needs a mean-zero field");
    if (max_abs == 0.0) return 0.0;
    const double h1 = norm(f, NormKind::Hdot1);
    if (h1 == 0.0) return 0.0;
    const double sup = sup_norm(to_physical(f));
    const double hs = norm(f, NormKind::Hs, s);
    return sup / (h1 * std::log(3.0 + hs));
}

double step_margin_from_diagnostics(ModelKind kind,
                                    const StepDiagnostics& diagnostics,
                                    double nu, double tau, double A) {
    const double diff = kind == ModelKind::CahnHilliard
                            ? diagnostics.diff_l2
                            : diagnostics.diff_grad_l2;
    return margin_from_parts(kind, diagnostics.energy_before,
                             diagnostics.energy_after, diff,
                             diagnostics.linf_before, diagnostics.linf_after,
                             nu, tau, A);
}

RunRecord run_instrumented(const SpectralField& init, const ModelConfig& config,
                           const StabilizationPlan& plan, double tau,
                           long n_steps, const StepOptions& options) {
    RunHooks hooks;
    if (plan.s_op == 1.0) {
        // The inequality is specific to Laplacian-type stabilization.
        hooks.on_step = [&config, &plan, tau](const StepperState&,
                                              const StepperState&,
                                              StepDiagnostics& diag) {
            diag.lemma_margin = step_margin_from_diagnostics(
                config.kind, diag, config.nu, tau, plan.A);
        };
    }
    return run(init, config, plan, tau, n_steps, hooks, options);
}

RunRecord run_instrumented(const InitialCondition& init, const GridSpec& grid,
                           const ModelConfig& config,
                           const StabilizationPlan& plan, double tau,
                           long n_steps, const StepOptions& options) {
    RunRecord record = run_instrumented(make_initial(init, grid), config, plan,
                                        tau, n_steps, options);
    if (const auto* random = std::get_if<RandomBandlimited>(&init))
        record.params.seed = random->seed;
    return record;
}

std::vector<ScanCell> stability_scan(const StabilityScanRequest& request) {
    validate(request.grid);
    if (request.taus.empty())
        throw std::invalid_argument("scan needs at least one tau");
    for (double tau : request.taus)
        if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (request.values.empty())
        throw std::invalid_argument("scan needs at least one parameter value");
    if (request.n_steps < 1)
        throw std::invalid_argument("n_steps must be at least 1");

    const SpectralField init = make_initial(request.init, request.grid);
    std::vector<StabilizationPlan> plans;
    plans.reserve(request.values.size());
    for (double value : request.values) {
        if (request.parameter == ScanParameter::Beta)
            plans.push_back(StabilizationPlan::resolve(request.config, init,
                                                       value, request.s_op));
        else
            plans.push_back(StabilizationPlan::direct(value, request.s_op));
    }

    std::vector<ScanCell> cells(request.taus.size() * request.values.size());
    parallel_for(cells.size(), [&](std::size_t idx) {
        const std::size_t ti = idx / request.values.size();
        const std::size_t vi = idx % request.values.size();
        const double tau = request.taus[ti];
        const RunRecord record = run(init, request.config, plans[vi], tau,
                                     request.n_steps);
        const double tol =
            request.tol_factor * std::max(1.0, record.initial_energy);
        const MonotoneReport report = check_energy_monotone(record, tol);
        cells[idx] = ScanCell{tau,
                              request.values[vi],
                              plans[vi].A,
                              report.pass,
                              report.first_violation_step,
                              record.rows.empty() ? record.initial_energy
                                                  : record.rows.back().energy,
                              record.diverged};
    });
    return cells;
}

std::optional<ScanCell> minimal_stable_cell(std::span<const ScanCell> cells,
                                            double tau) {
    std::optional<ScanCell> best;
    for (const ScanCell& cell : cells) {
        if (cell.tau != tau || !cell.monotone) continue;
        if (!best || cell.value < best->value) best = cell;
    }
    return best;
}

RateEstimate fit_rate(std::span<const RatePoint> points) {
    RateEstimate estimate;
    estimate.points.assign(points.begin(), points.end());
    estimate.fitted_order = kNaN;
    estimate.r_squared = kNaN;
    if (points.size() < 3) return estimate;
    for (const RatePoint& p : points)
        if (!(p.resolution > 0.0) || !(p.error > 0.0))
            throw std::invalid_argument(
                "rate fit needs positive resolutions and errors");

    const double n = static_cast<double>(points.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (const RatePoint& p : points) {
        mean_x += std::log(p.resolution);
        mean_y += std::log(p.error);
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const RatePoint& p : points) {
        const double dx = std::log(p.resolution) - mean_x;
        const double dy = std::log(p.error) - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0)
        throw std::invalid_argument("rate fit needs distinct resolutions");
    estimate.fitted_order = sxy / sxx;
    const double ss_res = syy - estimate.fitted_order * sxy;
    estimate.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return estimate;
}

RateEstimate temporal_convergence(const TemporalStudy& study) {
    validate(study.grid);
    if (study.taus.empty())
        throw std::invalid_argument("study needs at least one tau");
    if (!(study.t_final > 0.0))
        throw std::invalid_argument("t_final must be positive");
    if (study.refinement < 2)
        throw std::invalid_argument("refinement must be at least 2");
    std::vector<long> steps(study.taus.size());
    for (std::size_t i = 0; i < study.taus.size(); ++i) {
        if (!(study.taus[i] > 0.0))
            throw std::invalid_argument("tau must be positive");
        if (i > 0 && !(study.taus[i] < study.taus[i - 1]))
            throw std::invalid_argument("taus must be strictly decreasing");
        steps[i] = steps_for(study.taus[i], study.t_final);
    }

    SpectralField init = make_initial(study.init, study.grid);
    init.at(0, 0) = 0.0;  // match the state the runs actually start from
    const StabilizationPlan plan =
        study.plan.has_value()
            ? *study.plan
            : StabilizationPlan::resolve(study.config, init, study.beta);

    std::vector<SpectralField> finals(study.taus.size(),
                                      SpectralField(study.grid));
    SpectralField reference(study.grid);
    const bool analytic_reference =
        study.config.nonlinearity == Nonlinearity::None && plan.A == 0.0;
    if (analytic_reference) {
        // Pure bilaplacian flow: the semigroup exp(-nu*|k|^4*T) is exact, and
        // comparing to it keeps the fitted slope free of reference bias.
        SpectralField u0 = project(init);
        u0.at(0, 0) = 0.0;
        const double nu = study.config.nu;
        const double t_final = study.t_final;
        reference = apply_multiplier(u0, [nu, t_final](int k1, int k2) {
            const double k_sq = static_cast<double>(k1) * k1 +
                                static_cast<double>(k2) * k2;
            return std::exp(-nu * k_sq * k_sq * t_final);
        });
        parallel_for(study.taus.size(), [&](std::size_t i) {
            finals[i] = advance(init, study.config, plan, study.taus[i],
                                steps[i])
                            .field;
        });
    } else {
        const double tau_ref = study.taus.back() / study.refinement;
        const long steps_ref = steps.back() * study.refinement;
        parallel_for(study.taus.size() + 1, [&](std::size_t i) {
            if (i < study.taus.size())
                finals[i] = advance(init, study.config, plan, study.taus[i],
                                    steps[i])
                                .field;
            else
                reference =
                    advance(init, study.config, plan, tau_ref, steps_ref).field;
        });
    }

    const NormKind metric = study.config.kind == ModelKind::CahnHilliard
                                ? NormKind::L2
                                : NormKind::Hdot1;
    std::vector<RatePoint> points(study.taus.size());
    for (std::size_t i = 0; i < study.taus.size(); ++i)
        points[i] = RatePoint{study.taus[i],
                              distance(finals[i], reference, metric)};
    return fit_rate(points);
}

SpatialResult spatial_convergence(const SpatialStudy& study) {
    if (study.resolutions.empty())
        throw std::invalid_argument("study needs at least one resolution");
    for (std::size_t i = 0; i < study.resolutions.size(); ++i) {
        if (study.resolutions[i] < 1)
            throw std::invalid_argument("resolutions must be positive");
        if (i > 0 && study.resolutions[i] <= study.resolutions[i - 1])
            throw std::invalid_argument(
                "resolutions must be strictly increasing");
    }
    if (!(study.tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (!(study.t_final > 0.0))
        throw std::invalid_argument("t_final must be positive");
    if (study.refinement < 2)
        throw std::invalid_argument("refinement must be at least 2");
    if (study.reference_scale < 2)
        throw std::invalid_argument("reference_scale must be at least 2");
    const long steps = steps_for(study.tau, study.t_final);

    const int n_ref = study.reference_scale * study.resolutions.back();
    const GridSpec grid_ref = GridSpec::make(n_ref, study.cutoff);
    SpectralField init_ref = make_initial(study.init, grid_ref);
    init_ref.at(0, 0) = 0.0;
    const StabilizationPlan plan =
        study.plan.has_value()
            ? *study.plan
            : StabilizationPlan::resolve(study.config, init_ref, study.beta);

    SpatialResult result;
    result.reference_resolution = n_ref;
    result.reference_tau = study.tau / study.refinement;

    const std::size_t n_runs = study.resolutions.size();
    std::vector<SpectralField> finals(n_runs, SpectralField(GridSpec::make(1)));
    SpectralField reference(grid_ref);
    parallel_for(n_runs + 1, [&](std::size_t i) {
        if (i < n_runs) {
            const GridSpec grid =
                GridSpec::make(study.resolutions[i], study.cutoff);
            finals[i] = advance(regrid(init_ref, grid), study.config, plan,
                                study.tau, steps)
                            .field;
        } else {
            reference = advance(init_ref, study.config, plan,
                                result.reference_tau,
                                steps * study.refinement)
                            .field;
        }
    });

    const NormKind metric = study.config.kind == ModelKind::CahnHilliard
                                ? NormKind::L2
                                : NormKind::Hdot1;
    result.points.resize(n_runs);
    for (std::size_t i = 0; i < n_runs; ++i)
        result.points[i] = SpatialPoint{study.resolutions[i],
                                        distance(finals[i], reference, metric)};

    // Observed order between neighbours.  The smallest error marks the
    // temporal/round-off floor; pairs with both endpoints clearly above it
    // (a decade guard) must show growing orders for the decay to count as
    // faster than any fixed power.
    double floor_level = result.points[0].error;
    for (const SpatialPoint& p : result.points)
        floor_level = std::min(floor_level, p.error);
    const auto above_floor = [&](std::size_t i) {
        return result.points[i].error > 8.0 * floor_level;
    };
    std::vector<double> clean_orders;
    for (std::size_t i = 0; i + 1 < n_runs; ++i) {
        const double e0 = result.points[i].error;
        const double e1 = result.points[i + 1].error;
        const double ratio = static_cast<double>(study.resolutions[i + 1]) /
                             study.resolutions[i];
        result.observed_orders.push_back(std::log(e0 / e1) / std::log(ratio));
        if (above_floor(i) && above_floor(i + 1))
            clean_orders.push_back(result.observed_orders.back());
    }
    result.superalgebraic = clean_orders.size() >= 2;
    for (std::size_t i = 0; result.superalgebraic && i < clean_orders.size();
         ++i) {
        if (!(clean_orders[i] > 0.0)) result.superalgebraic = false;
        if (i + 1 < clean_orders.size() &&
            !(clean_orders[i] < clean_orders[i + 1]))
            result.superalgebraic = false;
    }
    return result;
}

int thread_cap() {
    if (const char* env = std::getenv("PHASEFIELD_THREADS")) {
        char* end = nullptr;
        const long value = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && value > 0)
            return static_cast<int>(value);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace phasefield
