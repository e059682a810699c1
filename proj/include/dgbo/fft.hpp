#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "dgbo/errors.hpp"

namespace dgbo {

using Complex = std::complex<double>;

/// Half spectrum of a real signal: modes m = 0 ... N/2, index-phase convention
/// H_m = sum_j f_j exp(-2 pi i m j / N) (unnormalized).
using HalfSpectrum = std::vector<Complex>;

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Immutable real<->half-complex plan pair for one transform length.
///
/// Plans are created with FFTW_ESTIMATE so that the chosen algorithm, and with
/// it the rounding pattern, is identical from run to run. Execution goes
/// through the new-array interface, which FFTW documents as thread-safe.
class FftPlan {
public:
    explicit FftPlan(std::size_t n) : n_(n) {
        std::vector<double> r(n);
        std::vector<Complex> c(n / 2 + 1);
        std::lock_guard lock(detail::fftw_planner_mutex());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), r.data(),
                                        reinterpret_cast<fftw_complex*>(c.data()), flags);
        backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(c.data()),
                                         r.data(), flags);
        if (!forward_ || !backward_) throw Error("FftPlan: FFTW planning failed");
    }

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    ~FftPlan() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        if (forward_) fftw_destroy_plan(forward_);
        if (backward_) fftw_destroy_plan(backward_);
    }

    std::size_t size() const noexcept { return n_; }

    void forward(const double* in, Complex* out) const {
        // r2c never writes its input.
        fftw_execute_dft_r2c(forward_, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
    }

    /// Unnormalized inverse. Overwrites `in`.
    void backward(Complex* in, double* out) const {
        fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(in), out);
    }

private:
    std::size_t n_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

/// Shared plan for length n; plans are never mutated after construction.
inline const FftPlan& plan_for(std::size_t n) {
    static std::mutex cache_mutex;
    static std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
    std::lock_guard lock(cache_mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<FftPlan>(n);
    return *slot;
}

inline HalfSpectrum forward_half(std::span<const double> f) {
    HalfSpectrum out(f.size() / 2 + 1);
    plan_for(f.size()).forward(f.data(), out.data());
    return out;
}

/// Normalized inverse of forward_half: returns f with f_j = (1/N) sum ... .
inline std::vector<double> inverse_half(HalfSpectrum spec, std::size_t n) {
    if (spec.size() != n / 2 + 1) throw ContractError("inverse_half: spectrum length mismatch");
    std::vector<double> out(n);
    plan_for(n).backward(spec.data(), out.data());
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= inv;
    return out;
}

}  // namespace dgbo
