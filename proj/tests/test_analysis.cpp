#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <vector>

#include "phasefield/analysis.hpp"
#include "phasefield/errors.hpp"
#include "phasefield/spectral.hpp"
#include "test_support.hpp"

using namespace phasefield;
using phasefield::testing::random_field;
using phasefield::testing::rel_diff;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPiSq = kPi * kPi;

RunRecord synthetic_record(double initial_energy,
                           const std::vector<double>& energies) {
    RunRecord record;
    record.initial_energy = initial_energy;
    long step = 0;
    for (double e : energies) {
        ++step;
        record.rows.push_back(
            RunRow{step, 0.01 * step, e, 0.0, 1.0, 0.0, 0.0, 0.0});
    }
    return record;
}

// Energy of a*sin(x1) under either model (they coincide for this state):
// nu*a^2*pi^2 + (3/8)a^4*pi^2 - a^2*pi^2 + pi^2.
double single_mode_energy(double a, double nu) {
    return nu * a * a * kPiSq + 0.375 * a * a * a * a * kPiSq -
           a * a * kPiSq + kPiSq;
}

}  // namespace

TEST_CASE("monotone check accepts a decreasing energy series") {
    const RunRecord record = synthetic_record(5.0, {4.0, 3.5, 3.5, 1.0});
    const MonotoneReport report = check_energy_monotone(record, 1e-10);
    CHECK(report.pass);
    CHECK(report.first_violation_step == -1);
    CHECK(report.max_increase == 0.0);
}

TEST_CASE("monotone check flags the first increase above tolerance") {
    const RunRecord record = synthetic_record(5.0, {4.0, 4.5, 4.2, 4.9});
    const MonotoneReport report = check_energy_monotone(record, 1e-10);
    CHECK_FALSE(report.pass);
    CHECK(report.first_violation_step == 2);
    CHECK(report.max_increase == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("monotone check covers the initial-energy transition") {
    const RunRecord record = synthetic_record(3.0, {3.2, 3.1});
    const MonotoneReport report = check_energy_monotone(record, 1e-10);
    CHECK_FALSE(report.pass);
    CHECK(report.first_violation_step == 1);
}

TEST_CASE("monotone check tolerates increases below the tolerance") {
    const RunRecord record = synthetic_record(3.0, {3.0 + 1e-12, 2.0});
    const MonotoneReport report = check_energy_monotone(record, 1e-10);
    CHECK(report.pass);
    CHECK(report.max_increase > 0.0);
}

TEST_CASE("monotone check fails a diverged record") {
    RunRecord record = synthetic_record(3.0, {2.0, 1.0});
    record.diverged = true;
    record.divergence_step = 3;
    const MonotoneReport report = check_energy_monotone(record, 1e-10);
    CHECK_FALSE(report.pass);
    CHECK(report.first_violation_step == 3);
}

TEST_CASE("Cahn-Hilliard margin matches the closed form on sine states") {
    const GridSpec grid = GridSpec::make(8);
    const double a = 0.5, b = 0.4, nu = 1.0, tau = 0.1, A = 2.0;
    SpectralField before(grid), after(grid);
    before.set_mode(1, 0, {0.0, -a * 2.0 * kPiSq});  // a*sin(x1)
    after.set_mode(1, 0, {0.0, -b * 2.0 * kPiSq});

    const double diff_sq = 2.0 * kPiSq * (b - a) * (b - a);
    const double damping = A + 0.5 + std::sqrt(2.0 * nu / tau);
    const double expected =
        diff_sq * (a * a + 0.5 * b * b) -
        (single_mode_energy(b, nu) - single_mode_energy(a, nu) +
         damping * diff_sq);
    const double margin = energy_inequality_margin_ch(before, after, nu, tau, A);
    CHECK(rel_diff(margin, expected) < 1e-11);
}

TEST_CASE("MBE margin matches the closed form on sine states") {
    const GridSpec grid = GridSpec::make(8);
    const double a = 0.7, b = 0.55, nu = 0.3, tau = 0.05, A = 1.5;
    SpectralField before(grid), after(grid);
    before.set_mode(1, 0, {0.0, -a * 2.0 * kPiSq});
    after.set_mode(1, 0, {0.0, -b * 2.0 * kPiSq});

    // |k| = 1, so the gradient difference norm equals the L2 difference norm.
    const double diff_sq = 2.0 * kPiSq * (b - a) * (b - a);
    const double damping = A + 0.5 + std::sqrt(2.0 * nu / tau);
    const double expected =
        diff_sq * 1.5 * std::max(a * a, b * b) -
        (single_mode_energy(b, nu) - single_mode_energy(a, nu) +
         damping * diff_sq);
    const double margin =
        energy_inequality_margin_mbe(before, after, nu, tau, A);
    CHECK(rel_diff(margin, expected) < 1e-11);
}

TEST_CASE("margin rejects mismatched grids and bad parameters") {
    const GridSpec g1 = GridSpec::make(8);
    const GridSpec g2 = GridSpec::make(16);
    const SpectralField f1(g1), f2(g2);
    CHECK_THROWS_AS(energy_inequality_margin_ch(f1, f2, 1.0, 0.1, 0.0),
                    GridError);
    const SpectralField g(g1);
    CHECK_THROWS_AS(energy_inequality_margin_ch(f1, g, 0.0, 0.1, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(energy_inequality_margin_mbe(f1, g, 1.0, 0.0, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(energy_inequality_margin_mbe(f1, g, 1.0, 0.1, -1.0),
                    std::invalid_argument);
}

TEST_CASE("instrumented runs record nonnegative margins that match the "
          "field-level computation") {
    const GridSpec grid = GridSpec::make(12);
    const ModelConfig config{ModelKind::CahnHilliard, 0.5, Nonlinearity::Full};
    const InitialCondition init = RandomBandlimited{11, 0.8, 5};
    const SpectralField u0 = make_initial(init, grid);
    const StabilizationPlan plan = StabilizationPlan::resolve(config, u0, 1.0);
    const double tau = 0.01;
    const long n_steps = 12;

    const RunRecord record =
        run_instrumented(init, grid, config, plan, tau, n_steps);
    REQUIRE(record.rows.size() == static_cast<std::size_t>(n_steps));
    CHECK(record.params.seed.has_value());
    CHECK(*record.params.seed == 11);
    const double floor = -1e-10 * (1.0 + record.initial_energy);
    for (const RunRow& row : record.rows) CHECK(row.lemma_margin >= floor);

    // Replay the march by hand and recompute one margin from the raw states.
    SpectralField state0 = project(u0);
    state0.at(0, 0) = 0.0;
    StepperState state{std::move(state0), 0, 0.0, tau};
    for (int n = 0; n < 3; ++n) state = step(state, config, plan).first;
    const StepperState next = step(state, config, plan).first;
    const double replayed = energy_inequality_margin_ch(
        state.field, next.field, config.nu, tau, plan.A);
    CHECK(rel_diff(replayed, record.rows[3].lemma_margin) < 1e-9);
}

TEST_CASE("MBE instrumented margins stay above the round-off floor") {
    const GridSpec grid = GridSpec::make(12);
    const ModelConfig config{ModelKind::Mbe, 0.5, Nonlinearity::Full};
    const InitialCondition init = RandomBandlimited{23, 0.8, 5};
    const SpectralField h0 = make_initial(init, grid);
    const StabilizationPlan plan = StabilizationPlan::resolve(config, h0, 1.0);
    const RunRecord record =
        run_instrumented(init, grid, config, plan, 0.02, 10);
    REQUIRE(record.rows.size() == 10);
    const double floor = -1e-10 * (1.0 + record.initial_energy);
    for (const RunRow& row : record.rows) CHECK(row.lemma_margin >= floor);
}

TEST_CASE("biharmonic-type stabilization leaves the margin column unset") {
    const GridSpec grid = GridSpec::make(8);
    const ModelConfig config{ModelKind::CahnHilliard, 1.0, Nonlinearity::Full};
    const InitialCondition init = RandomBandlimited{5, 0.5, 3};
    const StabilizationPlan plan = StabilizationPlan::direct(2.0, 2.0);
    const RunRecord record = run_instrumented(init, grid, config, plan, 0.01, 4);
    REQUIRE(!record.rows.empty());
    for (const RunRow& row : record.rows) CHECK(std::isnan(row.lemma_margin));
}

TEST_CASE("Gronwall bound reduces to y0 + tau*sum(beta) when alpha vanishes") {
    const std::vector<double> alpha(8, 0.0);
    const std::vector<double> beta(8, 0.25);
    const double bound = discrete_gronwall_bound(0.5, alpha, beta, 0.25, 8);
    CHECK(bound == doctest::Approx(0.5 + 0.25 * 8 * 0.25).epsilon(1e-15));
}

TEST_CASE("Gronwall bound matches the constant-coefficient closed form") {
    // Dyadic tau and alpha keep every partial sum exact, so the only
    // difference from the closed form is the exp rounding itself.
    const double tau = 0.25, a = 0.5, b = 0.75, y0 = 2.0;
    const long m = 12;
    const std::vector<double> alpha(m, a), beta(m, b);
    const double bound = discrete_gronwall_bound(y0, alpha, beta, tau, m);
    const double growth = std::exp(tau * a);
    long double tail = 0.0L;  // sum_k exp(tau*a*(m-1-k))
    for (long k = 0; k < m; ++k) tail += std::pow(growth, static_cast<double>(k));
    const double expected =
        std::pow(growth, static_cast<double>(m)) * y0 +
        tau * b * static_cast<double>(tail);
    CHECK(rel_diff(bound, expected) < 1e-14);
}

TEST_CASE("Gronwall bound dominates sequences built from the recursion") {
    std::mt19937_64 rng(77);
    auto unit = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };
    for (int trial = 0; trial < 100; ++trial) {
        const long m = 1 + static_cast<long>(rng() % 50);
        const double tau = 0.01 + 0.99 * unit();
        std::vector<double> alpha(m), beta(m);
        for (long k = 0; k < m; ++k) {
            alpha[k] = 0.01 + 0.99 * unit();
            beta[k] = unit();
        }
        const double y0 = unit();
        // March the recursion with per-step slack, so y_m is an admissible
        // sequence value rather than the extremal one.
        double y = y0;
        for (long k = 0; k < m; ++k)
            y += tau * (alpha[k] * y + beta[k]) * unit();
        const double bound = discrete_gronwall_bound(y0, alpha, beta, tau, m);
        CHECK(y <= bound * (1.0 + 1e-12));
    }
}

TEST_CASE("Gronwall bound validates its inputs") {
    const std::vector<double> ok(4, 0.5);
    CHECK_THROWS_AS(discrete_gronwall_bound(1.0, ok, ok, 0.1, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(discrete_gronwall_bound(1.0, ok, ok, 0.1, 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(discrete_gronwall_bound(-1.0, ok, ok, 0.1, 4),
                    std::invalid_argument);
    CHECK_THROWS_AS(discrete_gronwall_bound(1.0, ok, ok, 0.0, 4),
                    std::invalid_argument);
    std::vector<double> negative(4, 0.5);
    negative[2] = -0.1;
    CHECK_THROWS_AS(discrete_gronwall_bound(1.0, negative, ok, 0.1, 4),
                    std::invalid_argument);
}

TEST_CASE("log-interpolation ratio is zero for the zero field and rejects "
          "bad inputs") {
    const GridSpec grid = GridSpec::make(8);
    const SpectralField zero(grid);
    CHECK(log_interp_ratio(zero) == 0.0);
    CHECK_THROWS_AS(log_interp_ratio(zero, 1.0), std::invalid_argument);
    SpectralField with_mean(grid);
    with_mean.at(0, 0) = 4.0 * kPiSq;
    CHECK_THROWS_AS(log_interp_ratio(with_mean), MeanZeroError);
}

TEST_CASE("log-interpolation ratio matches the assembled norms on a sine") {
    const GridSpec grid = GridSpec::make(8);
    SpectralField f(grid);
    f.set_mode(1, 0, {0.0, -2.0 * kPiSq});  // sin(x1), sup = 1
    const double h1 = norm(f, NormKind::Hdot1);
    const double hs = norm(f, NormKind::Hs, 1.5);
    const double expected = 1.0 / (h1 * std::log(3.0 + hs));
    CHECK(rel_diff(log_interp_ratio(f), expected) < 1e-12);
}

TEST_CASE("log-interpolation ratio stays bounded over random fields") {
    const GridSpec grid = GridSpec::make(16);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SpectralField f = random_field(grid, 100 + seed, 16);
        const double ratio = log_interp_ratio(f);
        CHECK(ratio > 0.0);
        CHECK(ratio < 2.0);
    }
}

TEST_CASE("rate fit recovers an exact power law") {
    std::vector<RatePoint> points;
    for (double tau : {0.1, 0.05, 0.025, 0.0125})
        points.push_back({tau, 0.6 * std::pow(tau, 1.37)});
    const RateEstimate est = fit_rate(points);
    CHECK(rel_diff(est.fitted_order, 1.37) < 1e-12);
    CHECK(est.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(est.points.size() == 4);
}

TEST_CASE("rate fit reports NaN below three points and validates data") {
    const std::vector<RatePoint> two{{0.1, 0.01}, {0.05, 0.005}};
    const RateEstimate est = fit_rate(two);
    CHECK(std::isnan(est.fitted_order));
    CHECK(est.points.size() == 2);
    const std::vector<RatePoint> zero_err{{0.1, 0.0}, {0.05, 1.0}, {0.025, 1.0}};
    CHECK_THROWS_AS(fit_rate(zero_err), std::invalid_argument);
    const std::vector<RatePoint> same{{0.1, 1.0}, {0.1, 0.5}, {0.1, 0.25}};
    CHECK_THROWS_AS(fit_rate(same), std::invalid_argument);
}

TEST_CASE("stability scan covers the parameter grid in order") {
    StabilityScanRequest request;
    request.config = ModelConfig{ModelKind::CahnHilliard, 1.0,
                                 Nonlinearity::Full};
    request.grid = GridSpec::make(8);
    request.init = RandomBandlimited{3, 1.0, 4};
    request.taus = {0.01, 0.1};
    request.values = {0.5, 1.0};
    request.n_steps = 30;
    const std::vector<ScanCell> cells = stability_scan(request);
    REQUIRE(cells.size() == 4);
    CHECK(cells[0].tau == 0.01);
    CHECK(cells[0].value == 0.5);
    CHECK(cells[1].value == 1.0);
    CHECK(cells[2].tau == 0.1);
    for (const ScanCell& cell : cells) {
        CHECK(cell.A > 0.0);
        CHECK(cell.monotone);
        CHECK(cell.first_violation_step == -1);
        CHECK_FALSE(cell.diverged);
        CHECK(std::isfinite(cell.final_energy));
    }
    // Same beta resolves to the same A across taus.
    CHECK(cells[0].A == cells[2].A);
    CHECK(cells[1].A > cells[0].A);
}

TEST_CASE("direct-A scan echoes the raw coefficient") {
    StabilityScanRequest request;
    request.config = ModelConfig{ModelKind::CahnHilliard, 1.0,
                                 Nonlinearity::Full};
    request.grid = GridSpec::make(8);
    request.init = RandomBandlimited{3, 0.8, 4};
    request.taus = {0.01};
    request.values = {0.0, 40.0};
    request.parameter = ScanParameter::DirectA;
    request.n_steps = 10;
    const std::vector<ScanCell> cells = stability_scan(request);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].A == 0.0);
    CHECK(cells[1].A == 40.0);
    for (const ScanCell& cell : cells)
        CHECK((cell.monotone == (cell.first_violation_step == -1) ||
               cell.diverged));
}

TEST_CASE("stability scan validates its request") {
    StabilityScanRequest request;
    request.config = ModelConfig{ModelKind::CahnHilliard, 1.0,
                                 Nonlinearity::Full};
    request.grid = GridSpec::make(8);
    request.init = RandomBandlimited{3, 0.8, 4};
    request.values = {1.0};
    CHECK_THROWS_AS(stability_scan(request), std::invalid_argument);  // no taus
    request.taus = {0.01};
    request.values.clear();
    CHECK_THROWS_AS(stability_scan(request), std::invalid_argument);
    request.values = {1.0};
    request.n_steps = 0;
    CHECK_THROWS_AS(stability_scan(request), std::invalid_argument);
}

TEST_CASE("minimal stable cell picks the smallest monotone value per tau") {
    std::vector<ScanCell> cells;
    cells.push_back(ScanCell{0.1, 0.25, 5.0, false, 3, 9.0, false});
    cells.push_back(ScanCell{0.1, 0.5, 10.0, true, -1, 4.0, false});
    cells.push_back(ScanCell{0.1, 1.0, 20.0, true, -1, 4.0, false});
    cells.push_back(ScanCell{0.2, 1.0, 20.0, false, 1, 50.0, true});
    const auto best = minimal_stable_cell(cells, 0.1);
    REQUIRE(best.has_value());
    CHECK(best->value == 0.5);
    CHECK_FALSE(minimal_stable_cell(cells, 0.2).has_value());
    CHECK_FALSE(minimal_stable_cell(cells, 0.3).has_value());
}

TEST_CASE("temporal study against the exact semigroup reproduces the "
          "per-step closed form") {
    TemporalStudy study;
    study.config = ModelConfig{ModelKind::CahnHilliard, 0.5,
                               Nonlinearity::None};
    study.grid = GridSpec::make(8);
    study.init = SingleMode{{1, 0}, 1.0};
    study.taus = {0.02, 0.01, 0.005, 0.0025};
    study.t_final = 0.1;
    study.plan = StabilizationPlan::direct(0.0);
    const RateEstimate est = temporal_convergence(study);
    REQUIRE(est.points.size() == 4);
    // Mode |k| = 1: each step multiplies by 1/(1 + nu*tau), and the exact
    // flow by exp(-nu*T); the L2 error follows in closed form.
    const double sine_l2 = std::sqrt(2.0) * kPi;
    for (const RatePoint& p : est.points) {
        const long m = std::lround(study.t_final / p.resolution);
        const double numeric =
            std::pow(1.0 + study.config.nu * p.resolution,
                     -static_cast<double>(m));
        const double exact = std::exp(-study.config.nu * study.t_final);
        const double expected = std::abs(numeric - exact) * sine_l2;
        CHECK(rel_diff(p.error, expected) < 1e-10);
    }
    CHECK(est.fitted_order == doctest::Approx(1.0).epsilon(0.02));
    CHECK(est.r_squared > 0.999);
}

TEST_CASE("nonlinear temporal study shows first-order self-convergence") {
    TemporalStudy study;
    study.config = ModelConfig{ModelKind::Mbe, 0.5, Nonlinearity::Full};
    study.grid = GridSpec::make(8);
    study.init = RandomBandlimited{9, 0.5, 3};
    study.taus = {4e-3, 2e-3, 1e-3};
    study.t_final = 0.04;
    const RateEstimate est = temporal_convergence(study);
    REQUIRE(est.points.size() == 3);
    CHECK(est.fitted_order > 0.8);
    CHECK(est.fitted_order < 1.2);
    CHECK(est.r_squared > 0.99);
}

TEST_CASE("temporal study validates step sizes") {
    TemporalStudy study;
    study.config = ModelConfig{ModelKind::CahnHilliard, 1.0,
                               Nonlinearity::Full};
    study.grid = GridSpec::make(8);
    study.init = SingleMode{{1, 0}, 1.0};
    study.t_final = 0.1;
    study.taus = {0.03};  // does not tile [0, 0.1]
    CHECK_THROWS_AS(temporal_convergence(study), std::invalid_argument);
    study.taus = {0.01, 0.02};  // not decreasing
    CHECK_THROWS_AS(temporal_convergence(study), std::invalid_argument);
    study.taus = {0.01};
    study.refinement = 1;
    CHECK_THROWS_AS(temporal_convergence(study), std::invalid_argument);
}

TEST_CASE("smooth exponential profile has Bessel-product coefficients") {
    const GridSpec grid = GridSpec::make(16);
    const SpectralField f =
        make_initial(SmoothExponential{4.0, 1.0}, grid);
    const double two_pi = 2.0 * kPi;
    auto expected = [&](int k1, int k2) {
        return std::exp(-8.0) * two_pi * std::cyl_bessel_i(std::abs(k1), 4.0) *
               two_pi * std::cyl_bessel_i(std::abs(k2), 4.0);
    };
    CHECK(rel_diff(std::abs(f.coeff(0, 0)), expected(0, 0)) < 1e-10);
    CHECK(rel_diff(std::abs(f.coeff(1, 0)), expected(1, 0)) < 1e-10);
    CHECK(rel_diff(std::abs(f.coeff(2, 3)), expected(2, 3)) < 1e-10);
    CHECK(rel_diff(std::abs(f.coeff(-4, 2)), expected(-4, 2)) < 1e-10);
    // The collocation grid straddles the continuum peak at (0, pi/2), so the
    // discrete sup sits slightly below the normalized amplitude.
    const double sup = sup_norm(to_physical(f));
    CHECK(sup <= 1.0 + 1e-12);
    CHECK(sup > 0.99);
    CHECK_THROWS_AS(make_initial(SmoothExponential{-1.0, 1.0}, grid),
                    std::invalid_argument);
}

TEST_CASE("spatial study sees accelerating decay for the smooth profile") {
    // Small nu and a direct modest A keep the step-size error floor far
    // below the truncation tails of the kappa = 6 profile on this ladder.
    SpatialStudy study;
    study.config = ModelConfig{ModelKind::CahnHilliard, 1e-3,
                               Nonlinearity::Full};
    study.resolutions = {3, 4, 6, 10};
    study.init = SmoothExponential{6.0, 0.05};
    study.tau = 1e-5;
    study.t_final = 2e-5;
    study.plan = StabilizationPlan::direct(0.1);
    const SpatialResult result = spatial_convergence(study);
    REQUIRE(result.points.size() == 4);
    CHECK(result.reference_resolution == 20);
    CHECK(result.reference_tau == doctest::Approx(1e-5 / 16));
    for (std::size_t i = 0; i + 1 < result.points.size(); ++i)
        CHECK(result.points[i].error > result.points[i + 1].error);
    REQUIRE(result.observed_orders.size() == 3);
    CHECK(result.observed_orders[0] > 1.0);
    CHECK(result.observed_orders[1] > result.observed_orders[0]);
    CHECK(result.superalgebraic);
}

TEST_CASE("spatial study validates its ladder") {
    SpatialStudy study;
    study.config = ModelConfig{ModelKind::CahnHilliard, 1.0,
                               Nonlinearity::Full};
    study.init = SmoothExponential{};
    study.tau = 1e-5;
    study.t_final = 1e-4;
    study.resolutions = {};
    CHECK_THROWS_AS(spatial_convergence(study), std::invalid_argument);
    study.resolutions = {8, 8};
    CHECK_THROWS_AS(spatial_convergence(study), std::invalid_argument);
    study.resolutions = {8, 16};
    study.tau = 3e-5;  // does not tile [0, 1e-4]
    CHECK_THROWS_AS(spatial_convergence(study), std::invalid_argument);
}

TEST_CASE("thread cap honours the environment override") {
    const char* saved = std::getenv("PHASEFIELD_THREADS");
    const std::string restore = saved ? saved : "";
    setenv("PHASEFIELD_THREADS", "3", 1);
    CHECK(thread_cap() == 3);
    setenv("PHASEFIELD_THREADS", "0", 1);
    CHECK(thread_cap() >= 1);
    if (saved)
        setenv("PHASEFIELD_THREADS", restore.c_str(), 1);
    else
        unsetenv("PHASEFIELD_THREADS");
}
