#pragma once

#include <numbers>

namespace phasefield {

inline constexpr double kDomainLength = 2.0 * std::numbers::pi;

// Shape of the retained Fourier band.
enum class Cutoff {
    EuclideanBall,  // |k| <= N
    Square,         // max(|k1|, |k2|) <= N
};

// Spectral cutoff N plus the physical collocation grid size M (per dimension)
// on the periodic square [0, 2*pi)^2.
//
// M >= 4N + 2 keeps cubic nonlinearities alias-free on the retained band and
// makes quartic energy quadratures exact for band-limited fields.
struct GridSpec {
    int N = 0;
    int M = 0;
    Cutoff cutoff = Cutoff::EuclideanBall;

    // Smallest even 7-smooth integer >= 4N + 4 (a transform-friendly size).
    static int default_physical_size(int N);

    static GridSpec make(int N, Cutoff cutoff = Cutoff::EuclideanBall);
    static GridSpec make(int N, int M, Cutoff cutoff = Cutoff::EuclideanBall);

    // Integer wavenumber of a transform row/column index; k in (-M/2, M/2].
    int wavenumber(int index) const noexcept {
        return index <= M / 2 ? index : index - M;
    }

    // Inverse of wavenumber(); valid for k in (-M/2, M/2].
    int index_of(int k) const noexcept { return k >= 0 ? k : k + M; }

    bool in_cutoff(int k1, int k2) const noexcept { return in_cutoff(k1, k2, N); }
    bool in_cutoff(int k1, int k2, int radius) const noexcept;

    double grid_spacing() const noexcept { return kDomainLength / M; }

    bool operator==(const GridSpec&) const = default;
};

// Throws GridError unless N >= 1, M even, and M >= 4N + 2.
void validate(const GridSpec& grid);

}  // namespace phasefield
