#include "phasefield/field.hpp"

namespace phasefield {

void SpectralField::set_mode(int k1, int k2, std::complex<double> v) {
    const int M = grid_.M;
    const int i1 = grid_.index_of(k1);
    const int i2 = grid_.index_of(k2);
    const int m1 = (M - i1) % M;  // index of -k1 mod M
    const int m2 = (M - i2) % M;
    if (i1 == m1 && i2 == m2) {
        coef_[static_cast<std::size_t>(i1) * M + i2] = v.real();
    } else {
        coef_[static_cast<std::size_t>(i1) * M + i2] = v;
        coef_[static_cast<std::size_t>(m1) * M + m2] = std::conj(v);
    }
}

}  // namespace phasefield
