#pragma once

#include <optional>

#include "phasefield/field.hpp"
#include "phasefield/spectral.hpp"

namespace phasefield {

enum class ModelKind {
    CahnHilliard,  // du/dt = Laplacian(-nu*Laplacian(u) + u^3 - u)
    Mbe,           // dh/dt = -nu*Laplacian^2(h) + div((|grad h|^2 - 1) grad h)
};

// Diagnostic switch: None drops the nonlinear force entirely, leaving the
// linear equation du/dt = -nu*Laplacian^2(u) with a closed-form solution.
enum class Nonlinearity { Full, None };

struct ModelConfig {
    ModelKind kind = ModelKind::CahnHilliard;
    double nu = 1.0;
    Nonlinearity nonlinearity = Nonlinearity::Full;
};

// Derivative of the double-well potential F(u) = (u^2 - 1)^2 / 4, pointwise.
PhysicalField double_well_derivative(const PhysicalField& u);

// Slope-selection flux g(z) = (|z|^2 - 1) z evaluated at z = (px, py).
std::pair<PhysicalField, PhysicalField> slope_selection_flux(
    const PhysicalField& px, const PhysicalField& py);

// integral of F(u) = (u^2 - 1)^2 / 4 by collocation quadrature; exact for
// band-limited u on a quartic-dealiased grid.
double double_well_integral(const PhysicalField& u);

// integral of (|z|^2 - 1)^2 / 4 for z = (px, py).
double slope_well_integral(const PhysicalField& px, const PhysicalField& py);

// E(u) = (nu/2) ||grad u||_2^2 + integral of F(u).
double cahn_hilliard_energy(const SpectralField& u, double nu);

// E(h) = (nu/2) ||Laplacian h||_2^2 + integral of (|grad h|^2 - 1)^2 / 4.
double mbe_energy(const SpectralField& h, double nu);

double energy(const ModelConfig& config, const SpectralField& field);

// Total mass, i.e. the integral of the field: real part of coeff(0).
double mass(const SpectralField& f);

// max over the grid of the pointwise Euclidean gradient magnitude.
double sup_gradient_norm(const SpectralField& f);

// Stabilization strength for the semi-implicit splitting.  The resolved form
// follows A = beta * (S^2 + |log nu|^2 / nu + 1) where S is ||u0||_inf for
// Cahn-Hilliard and ||grad h0||_inf for MBE.  s_op selects the stabilizing
// operator -A*(-Laplacian)^{s_op} (1 = Laplacian-type, 2 = biharmonic-type).
struct StabilizationPlan {
    double A = 0.0;
    std::optional<double> beta;  // set when A came from the formula
    double s_op = 1.0;

    static StabilizationPlan resolve(const ModelConfig& config,
                                     const SpectralField& init, double beta,
                                     double s_op = 1.0);
    static StabilizationPlan direct(double A, double s_op = 1.0);
};

}  // namespace phasefield
