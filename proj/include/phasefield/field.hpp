#pragma once

#include <complex>
#include <span>
#include <vector>

#include "phasefield/grid.hpp"

namespace phasefield {

// Fourier coefficients f_hat(k) of a real field, stored as a dense M x M
// complex array in transform index order (row-major, k = index for
// index <= M/2, index - M otherwise).
//
// Convention: f_hat(k) = integral of f(x) exp(-i k.x) over [0, 2*pi)^2, so
// f(x) = (2*pi)^{-2} * sum_k f_hat(k) exp(i k.x).
class SpectralField {
public:
    explicit SpectralField(const GridSpec& grid)
        : grid_(grid), coef_(static_cast<std::size_t>(grid.M) * grid.M) {}

    const GridSpec& grid() const noexcept { return grid_; }
    int size() const noexcept { return grid_.M; }

    std::span<const std::complex<double>> coeffs() const noexcept { return coef_; }
    std::span<std::complex<double>> coeffs() noexcept { return coef_; }

    // Raw single-entry access by wavenumber; no symmetry maintenance.
    std::complex<double>& at(int k1, int k2) {
        return coef_[flat_index(k1, k2)];
    }
    std::complex<double> coeff(int k1, int k2) const {
        return coef_[flat_index(k1, k2)];
    }

    // Sets f_hat(k) = v and f_hat(-k) = conj(v); for self-conjugate modes
    // (k = -k mod M) only the real part is stored.
    void set_mode(int k1, int k2, std::complex<double> v);

    std::size_t flat_index(int k1, int k2) const noexcept {
        return static_cast<std::size_t>(grid_.index_of(k1)) * grid_.M +
               grid_.index_of(k2);
    }

private:
    GridSpec grid_;
    std::vector<std::complex<double>> coef_;
};

// Point values f(x_ij) on the uniform collocation grid, x_ij = (2*pi*i/M,
// 2*pi*j/M), row-major in i.
class PhysicalField {
public:
    explicit PhysicalField(const GridSpec& grid)
        : grid_(grid), values_(static_cast<std::size_t>(grid.M) * grid.M) {}

    const GridSpec& grid() const noexcept { return grid_; }
    int size() const noexcept { return grid_.M; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    double& value(int i, int j) {
        return values_[static_cast<std::size_t>(i) * grid_.M + j];
    }
    double value(int i, int j) const {
        return values_[static_cast<std::size_t>(i) * grid_.M + j];
    }

private:
    GridSpec grid_;
    std::vector<double> values_;
};

}  // namespace phasefield
