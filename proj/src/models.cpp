#include "phasefield/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "phasefield/errors.hpp"

namespace phasefield {

namespace {

void require_matching(const PhysicalField& a, const PhysicalField& b) {
    if (!(a.grid() == b.grid()))
        throw GridError("fields live on different grids");
}

}  // namespace

PhysicalField double_well_derivative(const PhysicalField& u) {
    PhysicalField out(u.grid());
    auto src = u.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = src[i] * src[i] * src[i] - src[i];
    return out;
}

std::pair<PhysicalField, PhysicalField> slope_selection_flux(
    const PhysicalField& px, const PhysicalField& py) {
    require_matching(px, py);
    PhysicalField gx(px.grid());
    PhysicalField gy(px.grid());
    auto vx = px.values();
    auto vy = py.values();
    auto ox = gx.values();
    auto oy = gy.values();
    for (std::size_t i = 0; i < vx.size(); ++i) {
        const double factor = vx[i] * vx[i] + vy[i] * vy[i] - 1.0;
        ox[i] = factor * vx[i];
        oy[i] = factor * vy[i];
    }
    return {std::move(gx), std::move(gy)};
}

double double_well_integral(const PhysicalField& u) {
    const double cell = u.grid().grid_spacing() * u.grid().grid_spacing();
    long double well = 0.0L;
    for (double x : u.values()) {
        const double d = x * x - 1.0;
        well += 0.25 * d * d;
    }
    return static_cast<double>(well) * cell;
}

double slope_well_integral(const PhysicalField& px, const PhysicalField& py) {
    require_matching(px, py);
    const double cell = px.grid().grid_spacing() * px.grid().grid_spacing();
    auto vx = px.values();
    auto vy = py.values();
    long double well = 0.0L;
    for (std::size_t i = 0; i < vx.size(); ++i) {
        const double d = vx[i] * vx[i] + vy[i] * vy[i] - 1.0;
        well += 0.25 * d * d;
    }
    return static_cast<double>(well) * cell;
}

double cahn_hilliard_energy(const SpectralField& u, double nu) {
    const double grad = norm(u, NormKind::Hdot1);
    return 0.5 * nu * grad * grad + double_well_integral(to_physical(u));
}

double mbe_energy(const SpectralField& h, double nu) {
    const double lap = norm(h, NormKind::Hdots, 2.0);
    auto [gx, gy] = gradient(h);
    return 0.5 * nu * lap * lap +
           slope_well_integral(to_physical(gx), to_physical(gy));
}

double energy(const ModelConfig& config, const SpectralField& field) {
    return config.kind == ModelKind::CahnHilliard
               ? cahn_hilliard_energy(field, config.nu)
               : mbe_energy(field, config.nu);
}

double mass(const SpectralField& f) { return f.coeff(0, 0).real(); }

double sup_gradient_norm(const SpectralField& f) {
    auto [gx, gy] = gradient(f);
    const PhysicalField px = to_physical(gx);
    const PhysicalField py = to_physical(gy);
    auto vx = px.values();
    auto vy = py.values();
    double m = 0.0;
    for (std::size_t i = 0; i < vx.size(); ++i)
        m = std::max(m, std::hypot(vx[i], vy[i]));
    return m;
}

StabilizationPlan StabilizationPlan::resolve(const ModelConfig& config,
                                             const SpectralField& init,
                                             double beta, double s_op) {
    if (!(config.nu > 0.0))
        throw std::invalid_argument("nu must be positive, got " +
                                    std::to_string(config.nu));
    if (!(beta > 0.0))
        throw std::invalid_argument("beta must be positive, got " +
                                    std::to_string(beta));
    if (!(s_op >= 1.0))
        throw std::invalid_argument("s_op must be at least 1");
    const double sup = config.kind == ModelKind::CahnHilliard
                           ? sup_norm(to_physical(init))
                           : sup_gradient_norm(init);
    const double log_nu = std::log(config.nu);
    StabilizationPlan plan;
    plan.A = beta * (sup * sup + log_nu * log_nu / config.nu + 1.0);
    plan.beta = beta;
    plan.s_op = s_op;
    return plan;
}

StabilizationPlan StabilizationPlan::direct(double A, double s_op) {
    if (A < 0.0) throw std::invalid_argument("A must be nonnegative");
    if (!(s_op >= 1.0))
        throw std::invalid_argument("s_op must be at least 1");
    StabilizationPlan plan;
    plan.A = A;
    plan.s_op = s_op;
    return plan;
}

}  // namespace phasefield
