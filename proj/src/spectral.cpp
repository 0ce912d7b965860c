#include "phasefield/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phasefield/errors.hpp"
#include "phasefield/fft.hpp"

namespace phasefield {

namespace {

constexpr double kFourPiSq = kDomainLength * kDomainLength;  // (2*pi)^2

double max_abs(std::span<const std::complex<double>> c) {
    double m = 0.0;
    for (const auto& z : c) m = std::max(m, std::abs(z));
    return m;
}

void require_finite(std::span<const std::complex<double>> c) {
    for (const auto& z : c)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw SpectralError("non-finite coefficient");
}

void require_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) throw SpectralError("non-finite point value");
}

// Largest deviation from conjugate symmetry, c(k) vs conj(c(-k)).
double max_asymmetry(const SpectralField& f) {
    const int M = f.grid().M;
    auto c = f.coeffs();
    double worst = 0.0;
    for (int a = 0; a < M; ++a) {
        const int ma = (M - a) % M;
        for (int b = 0; b < M; ++b) {
            const int mb = (M - b) % M;
            const std::size_t i = static_cast<std::size_t>(a) * M + b;
            const std::size_t j = static_cast<std::size_t>(ma) * M + mb;
            if (j < i) continue;
            worst = std::max(worst, std::abs(c[i] - std::conj(c[j])));
        }
    }
    return worst;
}

// Exact Hermitization: replace paired modes by their conjugate average.
void enforce_symmetry(SpectralField& f) {
    const int M = f.grid().M;
    auto c = f.coeffs();
    for (int a = 0; a < M; ++a) {
        const int ma = (M - a) % M;
        for (int b = 0; b < M; ++b) {
            const int mb = (M - b) % M;
            const std::size_t i = static_cast<std::size_t>(a) * M + b;
            const std::size_t j = static_cast<std::size_t>(ma) * M + mb;
            if (j < i) continue;
            if (i == j) {
                c[i] = c[i].real();
            } else {
                const std::complex<double> h = 0.5 * (c[i] + std::conj(c[j]));
                c[i] = h;
                c[j] = std::conj(h);
            }
        }
    }
}

double mode_weight(long k_sq, NormKind kind, double s) {
    switch (kind) {
        case NormKind::L2:
            return 1.0;
        case NormKind::Hdot1:
            return static_cast<double>(k_sq);
        case NormKind::Hdots:
            if (s == 1.0) return static_cast<double>(k_sq);
            if (s == 2.0) return static_cast<double>(k_sq) * k_sq;
            return std::pow(static_cast<double>(k_sq), s);
        case NormKind::Hs:
            if (s == 2.0) return 1.0 + static_cast<double>(k_sq) * k_sq;
            return 1.0 + std::pow(static_cast<double>(k_sq), s);
        case NormKind::Linf:
            break;
    }
    throw std::invalid_argument("Linf has no spectral mode weight");
}

bool needs_mean_zero(NormKind kind, double s) {
    return (kind == NormKind::Hdots || kind == NormKind::Hs) && s < 0.0;
}

void require_mean_zero(const SpectralField& f, const char* what) {
    const double scale = std::max(1.0, max_abs(f.coeffs()));
    if (std::abs(f.coeff(0, 0)) > 1e-13 * scale)
        throw MeanZeroError(std::string(what) + " requires a mean-zero field");
}

}  // namespace

PhysicalField to_physical(const SpectralField& f) {
    require_finite(f.coeffs());
    const GridSpec& grid = f.grid();
    const double asym = max_asymmetry(f);
    const double scale = std::max(1.0, max_abs(f.coeffs()));
    if (asym > 1e-12 * scale)
        throw SymmetryError("field is not conjugate-symmetric (deviation " +
                            std::to_string(asym) + ")");

    const std::size_t n = static_cast<std::size_t>(grid.M) * grid.M;
    std::vector<std::complex<double>> out(n);
    fft_for(grid.M).backward(f.coeffs().data(), out.data());

    PhysicalField result(grid);
    auto v = result.values();
    double imag_residue = 0.0;
    long double sum_sq = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = out[i].real() / kFourPiSq;
        imag_residue = std::max(imag_residue, std::abs(out[i].imag()) / kFourPiSq);
        sum_sq += std::norm(f.coeffs()[i]);
    }
    const double l2 = std::sqrt(static_cast<double>(sum_sq)) / kDomainLength;
    if (imag_residue > 1e-12 * std::max(1.0, l2))
        throw SymmetryError("imaginary residue " + std::to_string(imag_residue) +
                            " exceeds tolerance");
    return result;
}

SpectralField to_spectral(const PhysicalField& v) {
    require_finite(v.values());
    const GridSpec& grid = v.grid();
    const std::size_t n = static_cast<std::size_t>(grid.M) * grid.M;
    std::vector<std::complex<double>> in(n);
    for (std::size_t i = 0; i < n; ++i) in[i] = v.values()[i];

    SpectralField result(grid);
    fft_for(grid.M).forward(in.data(), result.coeffs().data());

    const double h = grid.grid_spacing();
    const double quad = h * h;  // trapezoid weight, turns the DFT sum into the integral
    for (auto& z : result.coeffs()) z *= quad;
    enforce_symmetry(result);
    return result;
}

SpectralField project(const SpectralField& f, int radius, Cutoff cutoff) {
    const GridSpec& grid = f.grid();
    if (radius < 1 || 2 * radius >= grid.M)
        throw GridError("projection radius " + std::to_string(radius) +
                        " outside grid capacity (need 1 <= radius < M/2)");
    GridSpec shape = grid;
    shape.cutoff = cutoff;
    SpectralField out(grid);
    auto src = f.coeffs();
    auto dst = out.coeffs();
    for (int a = 0; a < grid.M; ++a) {
        const int k1 = grid.wavenumber(a);
        for (int b = 0; b < grid.M; ++b) {
            const int k2 = grid.wavenumber(b);
            const std::size_t i = static_cast<std::size_t>(a) * grid.M + b;
            dst[i] = shape.in_cutoff(k1, k2, radius) ? src[i] : 0.0;
        }
    }
    return out;
}

SpectralField project(const SpectralField& f) {
    return project(f, f.grid().N, f.grid().cutoff);
}

SpectralField regrid(const SpectralField& f, const GridSpec& target) {
    validate(target);
    const GridSpec& src = f.grid();
    SpectralField out(target);
    for (int a = 0; a < target.M; ++a) {
        const int k1 = target.wavenumber(a);
        for (int b = 0; b < target.M; ++b) {
            const int k2 = target.wavenumber(b);
            if (!target.in_cutoff(k1, k2)) continue;
            const bool in_src = k1 > -src.M / 2 && k1 <= src.M / 2 &&
                                k2 > -src.M / 2 && k2 <= src.M / 2;
            if (in_src) out.at(k1, k2) = f.coeff(k1, k2);
        }
    }
    return out;
}

SpectralField laplacian(const SpectralField& f) {
    return apply_multiplier(f, [](int k1, int k2) {
        return -static_cast<double>(k1 * k1 + k2 * k2);
    });
}

SpectralField bilaplacian(const SpectralField& f) {
    return apply_multiplier(f, [](int k1, int k2) {
        const double k_sq = static_cast<double>(k1 * k1 + k2 * k2);
        return k_sq * k_sq;
    });
}

SpectralField fractional_laplacian(const SpectralField& f, double s) {
    if (s < 0.0) require_mean_zero(f, "fractional_laplacian with s < 0");
    SpectralField out = apply_multiplier(f, [s](int k1, int k2) {
        const long k_sq = static_cast<long>(k1) * k1 + static_cast<long>(k2) * k2;
        if (k_sq == 0) return s > 0.0 ? 0.0 : 1.0;  // placeholder, zeroed below
        return std::pow(static_cast<double>(k_sq), 0.5 * s);
    });
    out.at(0, 0) = 0.0;
    return out;
}

SpectralField derivative(const SpectralField& f, int axis) {
    if (axis != 0 && axis != 1)
        throw std::invalid_argument("axis must be 0 or 1");
    const GridSpec& grid = f.grid();
    SpectralField out(grid);
    auto src = f.coeffs();
    auto dst = out.coeffs();
    for (int a = 0; a < grid.M; ++a) {
        const int k1 = grid.wavenumber(a);
        for (int b = 0; b < grid.M; ++b) {
            const int k2 = grid.wavenumber(b);
            const double k = axis == 0 ? k1 : k2;
            const std::size_t i = static_cast<std::size_t>(a) * grid.M + b;
            dst[i] = std::complex<double>(0.0, k) * src[i];
        }
    }
    return out;
}

std::pair<SpectralField, SpectralField> gradient(const SpectralField& f) {
    return {derivative(f, 0), derivative(f, 1)};
}

SpectralField divergence(const SpectralField& fx, const SpectralField& fy) {
    if (!(fx.grid() == fy.grid()))
        throw GridError("divergence components live on different grids");
    const GridSpec& grid = fx.grid();
    SpectralField out(grid);
    auto cx = fx.coeffs();
    auto cy = fy.coeffs();
    auto dst = out.coeffs();
    for (int a = 0; a < grid.M; ++a) {
        const int k1 = grid.wavenumber(a);
        for (int b = 0; b < grid.M; ++b) {
            const int k2 = grid.wavenumber(b);
            const std::size_t i = static_cast<std::size_t>(a) * grid.M + b;
            dst[i] = std::complex<double>(0.0, 1.0) *
                     (static_cast<double>(k1) * cx[i] + static_cast<double>(k2) * cy[i]);
        }
    }
    return out;
}

double norm(const SpectralField& f, NormKind kind, double s) {
    if (kind == NormKind::Linf) return sup_norm(to_physical(f));
    if (needs_mean_zero(kind, s)) require_mean_zero(f, "negative-order norm");

    const GridSpec& grid = f.grid();
    auto c = f.coeffs();
    long double sum = 0.0L;
    for (int a = 0; a < grid.M; ++a) {
        const int k1 = grid.wavenumber(a);
        for (int b = 0; b < grid.M; ++b) {
            const int k2 = grid.wavenumber(b);
            const long k_sq = static_cast<long>(k1) * k1 + static_cast<long>(k2) * k2;
            if (k_sq == 0 && needs_mean_zero(kind, s)) continue;
            if (k_sq == 0 && kind == NormKind::Hdots) continue;  // 0^{2s} = 0 for s > 0
            const std::size_t i = static_cast<std::size_t>(a) * grid.M + b;
            sum += mode_weight(k_sq, kind, s) * std::norm(c[i]);
        }
    }
    return std::sqrt(static_cast<double>(sum)) / kDomainLength;
}

double inner(const SpectralField& f, const SpectralField& g) {
    if (!(f.grid() == g.grid()))
        throw GridError("inner product requires matching grids");
    auto cf = f.coeffs();
    auto cg = g.coeffs();
    long double sum = 0.0L;
    for (std::size_t i = 0; i < cf.size(); ++i)
        sum += cf[i].real() * cg[i].real() + cf[i].imag() * cg[i].imag();
    return static_cast<double>(sum) / kFourPiSq;
}

double distance(const SpectralField& f, const SpectralField& g, NormKind kind,
                double s) {
    if (kind == NormKind::Linf) {
        if (!(f.grid() == g.grid()))
            throw GridError("Linf distance requires matching grids");
        SpectralField diff(f.grid());
        for (std::size_t i = 0; i < diff.coeffs().size(); ++i)
            diff.coeffs()[i] = f.coeffs()[i] - g.coeffs()[i];
        return sup_norm(to_physical(diff));
    }

    const SpectralField& fine = f.grid().M >= g.grid().M ? f : g;
    const SpectralField& coarse = f.grid().M >= g.grid().M ? g : f;
    const GridSpec& grid = fine.grid();
    const int mc = coarse.grid().M;
    long double sum = 0.0L;
    for (int a = 0; a < grid.M; ++a) {
        const int k1 = grid.wavenumber(a);
        for (int b = 0; b < grid.M; ++b) {
            const int k2 = grid.wavenumber(b);
            const long k_sq = static_cast<long>(k1) * k1 + static_cast<long>(k2) * k2;
            if (k_sq == 0 && (kind == NormKind::Hdots || needs_mean_zero(kind, s)))
                continue;
            std::complex<double> d = fine.coeff(k1, k2);
            const bool in_coarse = k1 > -mc / 2 && k1 <= mc / 2 &&
                                   k2 > -mc / 2 && k2 <= mc / 2;
            if (in_coarse) d -= coarse.coeff(k1, k2);
            sum += mode_weight(k_sq, kind, s) * std::norm(d);
        }
    }
    return std::sqrt(static_cast<double>(sum)) / kDomainLength;
}

double sup_norm(const PhysicalField& v) {
    double m = 0.0;
    for (double x : v.values()) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace phasefield
