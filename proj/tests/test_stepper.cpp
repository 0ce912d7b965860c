#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "phasefield/errors.hpp"
#include "phasefield/stepper.hpp"
#include "test_support.hpp"

using namespace phasefield;
using phasefield::testing::random_field;
using phasefield::testing::rel_diff;

namespace {

constexpr double kPiSq = std::numbers::pi * std::numbers::pi;
constexpr double kFourPiSq = 4.0 * kPiSq;
const std::complex<double> kSinCoeff(0.0, -0.5 * kFourPiSq);  // of sin(k.x) at k
const std::complex<double> kCosCoeff(0.5 * kFourPiSq, 0.0);   // of cos(k.x) at k

StepperState state_from(SpectralField field, double tau) {
    return StepperState{std::move(field), 0, 0.0, tau};
}

}  // namespace

TEST_CASE("one Cahn-Hilliard step from eps*sin(x1) matches the trig oracle") {
    // f(u) = u^3 - u with u = eps*sin(x1) expands over sin(x1) and sin(3*x1):
    // sin^3 = (3 sin - sin3)/4, so the step touches exactly two mode pairs.
    const GridSpec grid = GridSpec::make(8);
    const double eps = 0.8, tau = 0.01, nu = 0.7, A = 1.3;

    SpectralField u0(grid);
    u0.set_mode(1, 0, eps * kSinCoeff);
    auto [next, diag] = step_cahn_hilliard(state_from(std::move(u0), tau), nu,
                                           StabilizationPlan::direct(A));

    const std::complex<double> f1 = (0.75 * eps * eps * eps - eps) * kSinCoeff;
    const std::complex<double> f3 = -(0.25 * eps * eps * eps) * kSinCoeff;
    const std::complex<double> expected1 =
        ((1.0 + A * tau) * (eps * kSinCoeff) - tau * 1.0 * f1) /
        (1.0 + nu * tau + A * tau);
    const std::complex<double> expected3 =
        (-tau * 9.0 * f3) / (1.0 + nu * tau * 81.0 + A * tau * 9.0);

    CHECK(std::abs(next.field.coeff(1, 0) - expected1) < 1e-12 * kFourPiSq);
    CHECK(std::abs(next.field.coeff(-1, 0) - std::conj(expected1)) <
          1e-12 * kFourPiSq);
    CHECK(std::abs(next.field.coeff(3, 0) - expected3) < 1e-12 * kFourPiSq);

    double elsewhere = 0.0;
    for (int a = 0; a < grid.M; ++a)
        for (int b = 0; b < grid.M; ++b) {
            const int k1 = grid.wavenumber(a);
            const int k2 = grid.wavenumber(b);
            if (k2 == 0 && (std::abs(k1) == 1 || std::abs(k1) == 3)) continue;
            elsewhere = std::max(elsewhere, std::abs(next.field.coeff(k1, k2)));
        }
    CHECK(elsewhere < 1e-12 * kFourPiSq);

    CHECK(next.step == 1);
    CHECK(next.time == tau);
    CHECK(diag.energy_before > diag.energy_after);  // dissipative at these params
}

TEST_CASE("one MBE step from eps*sin(x1) matches the trig oracle") {
    // grad h = (eps*cos(x1), 0); g1 = (eps^2 cos^2 - 1) eps cos expands over
    // cos(x1), cos(3*x1); forcing = d/dx1 g1 -> i*k1*g1_hat.
    const GridSpec grid = GridSpec::make(8);
    const double eps = 0.9, tau = 0.02, nu = 0.4, A = 1.1;

    SpectralField h0(grid);
    h0.set_mode(1, 0, eps * kSinCoeff);
    auto [next, diag] = step_mbe(state_from(std::move(h0), tau), nu,
                                 StabilizationPlan::direct(A));

    const std::complex<double> g1 = (0.75 * eps * eps * eps - eps) * kCosCoeff;
    const std::complex<double> g3 = (0.25 * eps * eps * eps) * kCosCoeff;
    const std::complex<double> i_unit(0.0, 1.0);
    const std::complex<double> expected1 =
        ((1.0 + A * tau) * (eps * kSinCoeff) + tau * i_unit * 1.0 * g1) /
        (1.0 + nu * tau + A * tau);
    const std::complex<double> expected3 =
        (tau * i_unit * 3.0 * g3) / (1.0 + nu * tau * 81.0 + A * tau * 9.0);

    CHECK(std::abs(next.field.coeff(1, 0) - expected1) < 1e-12 * kFourPiSq);
    CHECK(std::abs(next.field.coeff(3, 0) - expected3) < 1e-12 * kFourPiSq);
    CHECK(std::abs(next.field.coeff(-3, 0) - std::conj(expected3)) <
          1e-12 * kFourPiSq);
    CHECK(diag.linf_before == doctest::Approx(eps).epsilon(1e-12));
}

TEST_CASE("linearized growth factor matches the per-mode filter") {
    const GridSpec grid = GridSpec::make(8);
    const double eps = 1e-4, tau = 0.05, nu = 0.3, A = 2.0;
    for (auto [k1, k2] : {std::pair{1, 0}, {2, 1}, {0, 3}}) {
        SpectralField u0(grid);
        u0.set_mode(k1, k2, eps * kSinCoeff);
        auto [next, diag] = step_cahn_hilliard(state_from(std::move(u0), tau), nu,
                                               StabilizationPlan::direct(A));
        const double k_sq = k1 * k1 + k2 * k2;
        const double predicted = (1.0 + A * tau * k_sq + tau * k_sq) /
                                 (1.0 + nu * tau * k_sq * k_sq + A * tau * k_sq);
        const std::complex<double> ratio =
            next.field.coeff(k1, k2) / (eps * kSinCoeff);
        CHECK(std::abs(ratio - predicted) < 10.0 * eps * eps);
    }
}

TEST_CASE("s_op = 1 and s_op = 2 coincide exactly when A = 0") {
    const GridSpec grid = GridSpec::make(8);
    const SpectralField u0 = random_field(grid, 21, 8);
    for (bool mbe : {false, true}) {
        const ModelConfig config{mbe ? ModelKind::Mbe : ModelKind::CahnHilliard, 0.5};
        auto [a, diag_a] = step(state_from(u0, 0.01), config,
                                StabilizationPlan::direct(0.0, 1.0));
        auto [b, diag_b] = step(state_from(u0, 0.01), config,
                                StabilizationPlan::direct(0.0, 2.0));
        for (std::size_t i = 0; i < a.field.coeffs().size(); ++i)
            CHECK(a.field.coeffs()[i] == b.field.coeffs()[i]);
    }
}

TEST_CASE("scheme residual vanishes against an operator-built oracle") {
    const GridSpec grid = GridSpec::make(8);
    std::uint64_t seed = 0;
    for (double tau : {1e-3, 1e-2, 0.5}) {
        for (double nu : {1.0, 0.05}) {
            for (double A : {0.0, 3.7}) {
                const SpectralField u0 = random_field(grid, ++seed, 8);
                const auto plan = StabilizationPlan::direct(A);
                auto [next, diag] =
                    step_cahn_hilliard(state_from(u0, tau), nu, plan);

                // Rebuild the residual through public operators only.
                const SpectralField force = project(
                    to_spectral(double_well_derivative(to_physical(u0))));
                SpectralField r(grid);
                for (int a = 0; a < grid.M; ++a)
                    for (int b = 0; b < grid.M; ++b) {
                        const int k1 = grid.wavenumber(a);
                        const int k2 = grid.wavenumber(b);
                        const double k_sq = k1 * k1 + k2 * k2;
                        const std::complex<double> d =
                            next.field.coeff(k1, k2) - u0.coeff(k1, k2);
                        r.at(k1, k2) = d / tau +
                                       nu * k_sq * k_sq * next.field.coeff(k1, k2) +
                                       A * k_sq * d + k_sq * force.coeff(k1, k2);
                    }
                const double r_norm = norm(r, NormKind::L2);
                const double bound =
                    1e-10 * (1.0 + norm(next.field, NormKind::L2) / tau);
                CHECK(r_norm <= bound);
                CHECK(rel_diff(r_norm, diag.residual) < 1e-9);
            }
        }
    }
}

TEST_CASE("MBE residual vanishes against an operator-built oracle") {
    const GridSpec grid = GridSpec::make(8);
    const double tau = 0.02, nu = 0.3, A = 1.7;
    const SpectralField h0 = random_field(grid, 55, 8);
    auto [next, diag] = step_mbe(state_from(h0, tau), nu,
                                 StabilizationPlan::direct(A));

    auto [gx, gy] = gradient(h0);
    auto [fx, fy] = slope_selection_flux(to_physical(gx), to_physical(gy));
    const SpectralField forcing =
        project(divergence(to_spectral(fx), to_spectral(fy)));
    SpectralField r(grid);
    for (int a = 0; a < grid.M; ++a)
        for (int b = 0; b < grid.M; ++b) {
            const int k1 = grid.wavenumber(a);
            const int k2 = grid.wavenumber(b);
            const double k_sq = k1 * k1 + k2 * k2;
            const std::complex<double> d =
                next.field.coeff(k1, k2) - h0.coeff(k1, k2);
            r.at(k1, k2) = d / tau + nu * k_sq * k_sq * next.field.coeff(k1, k2) +
                           A * k_sq * d - forcing.coeff(k1, k2);
        }
    const double r_norm = norm(r, NormKind::L2);
    CHECK(r_norm <= 1e-10 * (1.0 + norm(next.field, NormKind::L2) / tau));
    CHECK(rel_diff(r_norm, diag.residual) < 1e-9);
}

TEST_CASE("zero initial state stays zero with energy pi^2") {
    const GridSpec grid = GridSpec::make(8);
    const ModelConfig config{ModelKind::CahnHilliard, 1.0};
    const RunRecord record = run(SpectralField(grid), config,
                                 StabilizationPlan::direct(2.0), 0.1, 20);
    CHECK(record.rows.size() == 20);
    CHECK_FALSE(record.diverged);
    CHECK(rel_diff(record.initial_energy, kPiSq) < 1e-13);
    for (const auto& row : record.rows) {
        CHECK(rel_diff(row.energy, kPiSq) < 1e-13);
        CHECK(row.diff_l2 == 0.0);
        CHECK(row.mass == 0.0);
        CHECK(row.residual == 0.0);
    }
}

TEST_CASE("run records step/time ladders and parameter echoes") {
    const GridSpec grid = GridSpec::make(6, 36, Cutoff::Square);
    const ModelConfig config{ModelKind::Mbe, 0.25};
    const SpectralField init = make_initial(RandomBandlimited{3, 1.0, 4}, grid);
    const auto plan = StabilizationPlan::resolve(config, init, 1.5, 2.0);
    const RunRecord record = run(init, config, plan, 0.01, 15);

    CHECK(record.rows.size() == 15);
    for (std::size_t i = 0; i < record.rows.size(); ++i) {
        CHECK(record.rows[i].step == static_cast<long>(i) + 1);
        CHECK(record.rows[i].time == doctest::Approx(0.01 * (i + 1)).epsilon(1e-14));
        if (i > 0) CHECK(record.rows[i].time > record.rows[i - 1].time);
    }
    CHECK(record.params.model == ModelKind::Mbe);
    CHECK(record.params.nu == 0.25);
    CHECK(record.params.N == 6);
    CHECK(record.params.M == 36);
    CHECK(record.params.cutoff == Cutoff::Square);
    CHECK(record.params.tau == 0.01);
    CHECK(record.params.A == plan.A);
    CHECK(record.params.beta.has_value());
    CHECK(record.params.s_op == 2.0);
}

TEST_CASE("mean-zero enforcement pins the mass to exactly zero") {
    const GridSpec grid = GridSpec::make(8);
    const ModelConfig config{ModelKind::CahnHilliard, 0.5};
    const SpectralField init = make_initial(RandomBandlimited{9, 1.0, 6}, grid);

    const RunRecord on = run(init, config, StabilizationPlan::direct(2.0), 0.01, 50);
    for (const auto& row : on.rows) CHECK(row.mass == 0.0);

    StepOptions relaxed;
    relaxed.enforce_mean_zero = false;
    const RunRecord off = run(init, config, StabilizationPlan::direct(2.0), 0.01,
                              50, {}, relaxed);
    for (const auto& row : off.rows) CHECK(std::abs(row.mass) <= 1e-13 * row.step);
}

TEST_CASE("without enforcement a nonzero mean is transported unchanged") {
    // The k = 0 mode sits in the kernel of every Fourier multiplier in the
    // scheme, so its coefficient is algebraically untouched.
    const GridSpec grid = GridSpec::make(8);
    SpectralField init = make_initial(SingleMode{{2, 1}, 0.5}, grid);
    init.at(0, 0) = 0.3 * kFourPiSq;
    StepOptions relaxed;
    relaxed.enforce_mean_zero = false;
    StepperState state = state_from(std::move(init), 0.01);
    for (int n = 0; n < 25; ++n) {
        auto [next, diag] =
            step_cahn_hilliard(state, 1.0, StabilizationPlan::direct(2.0),
                               Nonlinearity::Full, relaxed);
        state = std::move(next);
    }
    CHECK(std::abs(mass(state.field) - 0.3 * kFourPiSq) <= 25 * 1e-13 * kFourPiSq);
}

TEST_CASE("runaway states abort the run with a flagged partial record") {
    const GridSpec grid = GridSpec::make(8);
    const ModelConfig config{ModelKind::CahnHilliard, 1e-4};
    const SpectralField init = make_initial(RandomBandlimited{4, 30.0, 6}, grid);
    const RunRecord record =
        run(init, config, StabilizationPlan::direct(0.0), 50.0, 200);
    CHECK(record.diverged);
    CHECK(record.divergence_step >= 1);
    CHECK(record.rows.size() < 200);
}

TEST_CASE("a non-finite intermediate raises a divergence error with the step") {
    const GridSpec grid = GridSpec::make(6, 36);
    SpectralField init(grid);
    init.set_mode(1, 0, {1e200, 0.0});  // cubic overflows in physical space
    StepperState state = state_from(std::move(init), 0.01);
    state.step = 7;
    try {
        step_cahn_hilliard(state, 1.0, StabilizationPlan::direct(1.0));
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.step() == 8);
    }
}

TEST_CASE("single-mode and two-mode initial data sample exactly") {
    const GridSpec grid = GridSpec::make(8);
    const double h = grid.grid_spacing();

    const SpectralField s = make_initial(SingleMode{{2, 1}, 0.7}, grid);
    const PhysicalField sv = to_physical(s);
    for (int i = 0; i < grid.M; i += 5)
        for (int j = 0; j < grid.M; j += 5)
            CHECK(std::abs(sv.value(i, j) - 0.7 * std::sin(2 * h * i + h * j)) <
                  1e-12);

    const SpectralField t =
        make_initial(TwoMode{{1, 0}, 0.5, {0, 2}, 0.25}, grid);
    const PhysicalField tv = to_physical(t);
    for (int i = 0; i < grid.M; i += 5)
        for (int j = 0; j < grid.M; j += 5)
            CHECK(std::abs(tv.value(i, j) - 0.5 * std::sin(h * i) -
                           0.25 * std::cos(2 * h * j)) < 1e-12);
}

TEST_CASE("random initial data: seeded determinism, band, and amplitude") {
    const GridSpec grid = GridSpec::make(12, 52);
    const SpectralField a = make_initial(RandomBandlimited{42, 1.0, 5}, grid);
    const SpectralField b = make_initial(RandomBandlimited{42, 1.0, 5}, grid);
    for (std::size_t i = 0; i < a.coeffs().size(); ++i)
        CHECK(a.coeffs()[i] == b.coeffs()[i]);

    const SpectralField c = make_initial(RandomBandlimited{43, 1.0, 5}, grid);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.coeffs().size(); ++i)
        diff = std::max(diff, std::abs(a.coeffs()[i] - c.coeffs()[i]));
    CHECK(diff > 1e-3);

    CHECK(rel_diff(norm(a, NormKind::Linf), 1.0) < 1e-12);
    CHECK(a.coeff(0, 0) == std::complex<double>(0.0));
    for (int k1 = -12; k1 <= 12; ++k1)
        for (int k2 = -12; k2 <= 12; ++k2)
            if (k1 * k1 + k2 * k2 > 25)
                CHECK(a.coeff(k1, k2) == std::complex<double>(0.0));

    const SpectralField zero = make_initial(RandomBandlimited{42, 0.0, 5}, grid);
    CHECK(norm(zero, NormKind::L2) == 0.0);
}

TEST_CASE("initial-condition validation") {
    const GridSpec grid = GridSpec::make(8);
    CHECK_THROWS_AS(make_initial(RandomBandlimited{1, 1.0, 0}, grid),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_initial(RandomBandlimited{1, 1.0, 9}, grid),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_initial(RandomBandlimited{1, -1.0, 4}, grid),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_initial(SingleMode{{0, 0}, 1.0}, grid),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_initial(SingleMode{{8, 8}, 1.0}, grid), GridError);
    CHECK_THROWS_AS(make_initial(TwoMode{{1, 0}, 1.0, {9, 0}, 1.0}, grid),
                    GridError);
}

TEST_CASE("step validation rejects bad parameters") {
    const GridSpec grid = GridSpec::make(8);
    const StepperState state = state_from(SpectralField(grid), 0.01);
    CHECK_THROWS_AS(
        step_cahn_hilliard(state, -1.0, StabilizationPlan::direct(1.0)),
        std::invalid_argument);
    CHECK_THROWS_AS(
        step_cahn_hilliard(state_from(SpectralField(grid), -0.1), 1.0,
                           StabilizationPlan::direct(1.0)),
        std::invalid_argument);
    StabilizationPlan bad = StabilizationPlan::direct(1.0);
    bad.A = -2.0;
    CHECK_THROWS_AS(step_cahn_hilliard(state, 1.0, bad), std::invalid_argument);
    CHECK_THROWS_AS(run(SpectralField(grid), ModelConfig{}, bad, 0.01, 10),
                    std::invalid_argument);
    CHECK_THROWS_AS(run(SpectralField(grid), ModelConfig{},
                        StabilizationPlan::direct(1.0), 0.01, 0),
                    std::invalid_argument);
}

TEST_CASE("linear diagnostic switch reproduces the closed-form decay") {
    const GridSpec grid = GridSpec::make(8);
    const double nu = 0.5, tau = 1e-3;
    const long m = 100;
    SpectralField init(grid);
    init.set_mode(1, 0, 0.6 * kSinCoeff);
    init.set_mode(2, 1, 0.4 * kCosCoeff);

    const ModelConfig linear{ModelKind::CahnHilliard, nu, Nonlinearity::None};
    StepperState state{init, 0, 0.0, tau};
    for (long n = 0; n < m; ++n)
        state = step(state, linear, StabilizationPlan::direct(0.0)).first;

    // Backward-Euler filter per mode: (1 + nu*tau*|k|^4)^{-m}; |(2,1)|^4 = 25.
    const double f1 = std::pow(1.0 + nu * tau * 1.0, -static_cast<double>(m));
    const double f25 = std::pow(1.0 + nu * tau * 25.0, -static_cast<double>(m));
    CHECK(std::abs(state.field.coeff(1, 0) - 0.6 * kSinCoeff * f1) <
          1e-12 * kFourPiSq);
    CHECK(std::abs(state.field.coeff(2, 1) - 0.4 * kCosCoeff * f25) <
          1e-12 * kFourPiSq);
}
