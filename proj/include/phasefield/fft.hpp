#pragma once

#include <complex>

namespace phasefield {

// Owns FFTW plans and aligned buffers for unnormalized 2D M x M complex
// transforms.  Plans are created with FFTW_ESTIMATE so planning is
// deterministic; creation is serialized internally (the FFTW planner is not
// thread-safe, execution on distinct plans is).
class Fft2D {
public:
    explicit Fft2D(int M);
    ~Fft2D();

    Fft2D(const Fft2D&) = delete;
    Fft2D& operator=(const Fft2D&) = delete;

    int size() const noexcept { return size_; }

    // out[a,b] = sum_{i,j} in[i,j] exp(-2*pi*i*(a*i + b*j)/M)
    void forward(const std::complex<double>* in, std::complex<double>* out);

    // out[i,j] = sum_{a,b} in[a,b] exp(+2*pi*i*(a*i + b*j)/M)
    void backward(const std::complex<double>* in, std::complex<double>* out);

private:
    int size_;
    void* plan_forward_;
    void* plan_backward_;
    std::complex<double>* buf_in_;
    std::complex<double>* buf_out_;
};

// Per-thread plan cache; the returned reference stays valid for the thread's
// lifetime.
Fft2D& fft_for(int M);

}  // namespace phasefield
