#pragma once

#include <complex>
#include <utility>

#include "phasefield/field.hpp"

namespace phasefield {

// Inverse transform to point values.  Requires conjugate symmetry (the field
// must represent a real function); throws SymmetryError otherwise.  The
// imaginary residue of the inverse transform must stay below 1e-12 * ||f||_2
// and is discarded.
PhysicalField to_physical(const SpectralField& f);

// Forward transform.  Conjugate symmetry of the result is enforced exactly by
// averaging paired modes, so to_physical(to_spectral(v)) is well defined for
// any finite input.
SpectralField to_spectral(const PhysicalField& v);

// Zeroes every mode outside the cutoff of the given radius/shape.  Requires
// radius < M/2 so the whole band is representable.
SpectralField project(const SpectralField& f, int radius, Cutoff cutoff);
SpectralField project(const SpectralField& f);  // grid's own N and cutoff

// Copies coefficients by wavenumber onto a (possibly coarser or finer) grid,
// keeping only modes inside the target's cutoff.
SpectralField regrid(const SpectralField& f, const GridSpec& target);

// Diagonal Fourier multiplier: g_hat(k) = sigma(k1, k2) * f_hat(k).
template <class Sigma>
SpectralField apply_multiplier(const SpectralField& f, Sigma&& sigma) {
    const GridSpec& grid = f.grid();
    SpectralField out(grid);
    auto src = f.coeffs();
    auto dst = out.coeffs();
    for (int a = 0; a < grid.M; ++a) {
        const int k1 = grid.wavenumber(a);
        for (int b = 0; b < grid.M; ++b) {
            const int k2 = grid.wavenumber(b);
            const std::size_t idx = static_cast<std::size_t>(a) * grid.M + b;
            dst[idx] = sigma(k1, k2) * src[idx];
        }
    }
    return out;
}

SpectralField laplacian(const SpectralField& f);    // multiplier -|k|^2
SpectralField bilaplacian(const SpectralField& f);  // multiplier |k|^4

// Multiplier |k|^s.  For s < 0 the field must be mean-zero (MeanZeroError
// otherwise) and the k = 0 coefficient of the result is set to 0.
SpectralField fractional_laplacian(const SpectralField& f, double s);

// Partial derivative along axis (0 or 1): multiplier i*k_axis.
SpectralField derivative(const SpectralField& f, int axis);

std::pair<SpectralField, SpectralField> gradient(const SpectralField& f);

// div (fx, fy) in Fourier space: i*(k1*fx_hat + k2*fy_hat).
SpectralField divergence(const SpectralField& fx, const SpectralField& fy);

enum class NormKind { L2, Linf, Hdot1, Hs, Hdots };

// Norms on [0, 2*pi)^2 with the (2*pi)^{-2} Plancherel normalization:
//   ||f||_L2^2     = (2*pi)^{-2} sum |f_hat(k)|^2
//   ||f||_Hdots^2  = (2*pi)^{-2} sum |k|^{2s} |f_hat(k)|^2
//   ||f||_Hs^2     = (2*pi)^{-2} sum (1 + |k|^{2s}) |f_hat(k)|^2
// so that ||f||_Hdot1 = ||grad f||_L2 exactly.  Linf evaluates point values.
// Homogeneous norms with s < 0 require a mean-zero field.
double norm(const SpectralField& f, NormKind kind, double s = 0.0);

// L2 inner product (f, g) = (2*pi)^{-2} Re sum f_hat(k) conj(g_hat(k)).
// Grids must match.
double inner(const SpectralField& f, const SpectralField& g);

// Norm of f - g computed by wavenumber, so the fields may live on different
// grid sizes (absent modes count as zero).  Linf is not supported here.
double distance(const SpectralField& f, const SpectralField& g, NormKind kind,
                double s = 0.0);

// max_x |f(x)| over the collocation grid.
double sup_norm(const PhysicalField& v);

}  // namespace phasefield
