#include "phasefield/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace phasefield {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

Fft2D::Fft2D(int M) : size_(M) {
    if (M < 2) throw std::invalid_argument("transform size must be at least 2");
    const std::size_t n = static_cast<std::size_t>(M) * M;
    buf_in_ = reinterpret_cast<std::complex<double>*>(
        fftw_malloc(n * sizeof(fftw_complex)));
    buf_out_ = reinterpret_cast<std::complex<double>*>(
        fftw_malloc(n * sizeof(fftw_complex)));
    if (!buf_in_ || !buf_out_) throw std::bad_alloc();

    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_forward_ = fftw_plan_dft_2d(
        M, M, reinterpret_cast<fftw_complex*>(buf_in_),
        reinterpret_cast<fftw_complex*>(buf_out_), FFTW_FORWARD, FFTW_ESTIMATE);
    plan_backward_ = fftw_plan_dft_2d(
        M, M, reinterpret_cast<fftw_complex*>(buf_in_),
        reinterpret_cast<fftw_complex*>(buf_out_), FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!plan_forward_ || !plan_backward_)
        throw std::runtime_error("FFTW plan creation failed");
}

Fft2D::~Fft2D() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_forward_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_backward_));
    fftw_free(buf_in_);
    fftw_free(buf_out_);
}

void Fft2D::forward(const std::complex<double>* in, std::complex<double>* out) {
    const std::size_t bytes =
        static_cast<std::size_t>(size_) * size_ * sizeof(std::complex<double>);
    std::memcpy(buf_in_, in, bytes);
    fftw_execute(static_cast<fftw_plan>(plan_forward_));
    std::memcpy(out, buf_out_, bytes);
}

void Fft2D::backward(const std::complex<double>* in, std::complex<double>* out) {
    const std::size_t bytes =
        static_cast<std::size_t>(size_) * size_ * sizeof(std::complex<double>);
    std::memcpy(buf_in_, in, bytes);
    fftw_execute(static_cast<fftw_plan>(plan_backward_));
    std::memcpy(out, buf_out_, bytes);
}

Fft2D& fft_for(int M) {
    thread_local std::map<int, std::unique_ptr<Fft2D>> cache;
    auto& slot = cache[M];
    if (!slot) slot = std::make_unique<Fft2D>(M);
    return *slot;
}

}  // namespace phasefield
