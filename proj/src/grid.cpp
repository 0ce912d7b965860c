#include "phasefield/grid.hpp"

#include <cstdlib>
#include <string>

#include "phasefield/errors.hpp"

namespace phasefield {

namespace {

bool is_7smooth(int m) {
    for (int p : {2, 3, 5, 7})
        while (m % p == 0) m /= p;
    return m == 1;
}

}  // namespace

int GridSpec::default_physical_size(int N) {
    int m = 4 * N + 4;  // even for any N
    while (!is_7smooth(m)) m += 2;
    return m;
}

GridSpec GridSpec::make(int N, Cutoff cutoff) {
    return make(N, default_physical_size(N), cutoff);
}

GridSpec GridSpec::make(int N, int M, Cutoff cutoff) {
    GridSpec grid{N, M, cutoff};
    validate(grid);
    return grid;
}

bool GridSpec::in_cutoff(int k1, int k2, int radius) const noexcept {
    if (cutoff == Cutoff::Square)
        return std::abs(k1) <= radius && std::abs(k2) <= radius;
    return static_cast<long>(k1) * k1 + static_cast<long>(k2) * k2 <=
           static_cast<long>(radius) * radius;
}

void validate(const GridSpec& grid) {
    if (grid.N < 1)
        throw GridError("cutoff N must be positive, got " + std::to_string(grid.N));
    if (grid.M % 2 != 0)
        throw GridError("grid size M must be even, got " + std::to_string(grid.M));
    if (grid.M < 4 * grid.N + 2)
        throw GridError("grid size M = " + std::to_string(grid.M) +
                        " too small for alias-free cubics at N = " +
                        std::to_string(grid.N) + " (need M >= 4N + 2)");
}

}  // namespace phasefield
