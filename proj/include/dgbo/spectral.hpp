#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dgbo/errors.hpp"
#include "dgbo/fft.hpp"
#include "dgbo/grid.hpp"

namespace dgbo {

inline void require_alpha(double alpha, const char* where) {
    if (!(alpha >= 1.0 && alpha <= 2.0))
        throw DomainError(std::string(where) + ": alpha must lie in [1, 2], got " + std::to_string(alpha));
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

/// Forward transform to centered, physically phased coefficients.
inline SpectralField transform(const RealField& f) {
    const GridSpec& g = f.grid();
    const std::size_t n = g.size();
    if (f.size() != n) throw ContractError("transform: field length does not match grid");
    const HalfSpectrum h = forward_half(f.values());
    SpectralField out{g, std::vector<Complex>(n)};
    const long half = static_cast<long>(n / 2);
    // F_m = (-1)^m H_m since x_0 = -L.
    for (long m = 0; m <= half; ++m) {
        const Complex v = (m % 2 == 0) ? h[static_cast<std::size_t>(m)] : -h[static_cast<std::size_t>(m)];
        if (m < half) out.at_mode(m) = v;
        if (m > 0) out.at_mode(-m) = std::conj(v);
    }
    out.at_mode(-half) = std::real(out.at_mode(-half));
    return out;
}

/// Inverse transform; returns the real part of the synthesis when the
/// coefficients are not exactly conjugate symmetric.
inline RealField inverse(const SpectralField& F) {
    const GridSpec& g = F.grid;
    const std::size_t n = g.size();
    if (F.coeffs.size() != n) throw ContractError("inverse: coefficient count does not match grid");
    const long half = static_cast<long>(n / 2);
    HalfSpectrum h(n / 2 + 1);
    for (long m = 0; m <= half; ++m) {
        const Complex plus = (m < half) ? F.at_mode(m) : F.at_mode(-half);
        const Complex minus = F.at_mode(m == half ? -half : -m);
        Complex v = 0.5 * (plus + std::conj(minus));
        if (m == 0 || m == half) v = std::real(v);
        h[static_cast<std::size_t>(m)] = (m % 2 == 0) ? v : -v;
    }
    return RealField(g, inverse_half(std::move(h), n));
}

// ---------------------------------------------------------------------------
// Fourier multipliers
// ---------------------------------------------------------------------------

enum class MultiplierKind {
    riesz,       ///< |k|^alpha
    dispersion,  ///< i k |k|^alpha, zero at Nyquist
    half_riesz,  ///< |k|^(alpha/2)
    semigroup,   ///< exp(-|k|^alpha)
};

class FracMultiplier {
public:
    FracMultiplier(double alpha, MultiplierKind kind) : alpha_(alpha), kind_(kind) {
        require_alpha(alpha, "FracMultiplier");
    }

    double alpha() const noexcept { return alpha_; }
    MultiplierKind kind() const noexcept { return kind_; }

    /// Symbol value at wavenumber k; `nyquist` marks the unpaired mode.
    Complex operator()(double k, bool nyquist = false) const {
        const double ak = std::abs(k);
        switch (kind_) {
            case MultiplierKind::riesz:
                return ak == 0.0 ? 0.0 : std::pow(ak, alpha_);
            case MultiplierKind::half_riesz:
                return ak == 0.0 ? 0.0 : std::pow(ak, 0.5 * alpha_);
            case MultiplierKind::dispersion:
                if (nyquist || ak == 0.0) return 0.0;
                return Complex(0.0, k * std::pow(ak, alpha_));
            case MultiplierKind::semigroup:
                return std::exp(-std::pow(ak, alpha_));
        }
        return 0.0;
    }

private:
    double alpha_;
    MultiplierKind kind_;
};

/// Applies a real-symmetric symbol (even real or odd imaginary) through the
/// half spectrum. `symbol(k, nyquist)` is evaluated at k >= 0.
template <class Symbol>
RealField apply_symbol(const RealField& f, Symbol&& symbol) {
    const GridSpec& g = f.grid();
    const std::size_t n = g.size();
    if (f.size() != n) throw ContractError("apply_symbol: field length does not match grid");
    HalfSpectrum h = forward_half(f.values());
    for (std::size_t m = 0; m < h.size(); ++m) {
        const bool nyq = (m == n / 2);
        h[m] *= symbol(g.wavenumber(static_cast<long>(m)), nyq);
    }
    return RealField(g, inverse_half(std::move(h), n));
}

inline RealField apply_multiplier(const RealField& f, const FracMultiplier& mult) {
    return apply_symbol(f, [&](double k, bool nyq) { return mult(k, nyq); });
}

/// Spectral first derivative; the Nyquist mode is dropped.
inline RealField derivative(const RealField& f) {
    return apply_symbol(f, [](double k, bool nyq) { return nyq ? Complex(0.0) : Complex(0.0, k); });
}

inline RealField riesz(const RealField& f, double alpha) {
    return apply_multiplier(f, FracMultiplier(alpha, MultiplierKind::riesz));
}

// ---------------------------------------------------------------------------
// Quadrature and norms
// ---------------------------------------------------------------------------

inline double quadrature(const RealField& f) {
    double s = 0.0;
    for (double v : f.values()) s += v;
    return f.grid().spacing() * s;
}

inline double inner(const RealField& f, const RealField& g) {
    require_same_grid(f.grid(), g.grid(), "inner");
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += f[j] * g[j];
    return f.grid().spacing() * s;
}

inline double l2_norm(const RealField& f) { return std::sqrt(inner(f, f)); }

/// integral of ||D|^s f|^2, evaluated by Parseval on the half spectrum.
inline double homogeneous_seminorm_sq(const RealField& f, double s) {
    const GridSpec& g = f.grid();
    const std::size_t n = g.size();
    const HalfSpectrum h = forward_half(f.values());
    double acc = 0.0;
    for (std::size_t m = 1; m < h.size(); ++m) {
        const double w = (m == n / 2) ? 1.0 : 2.0;
        acc += w * std::pow(g.wavenumber(static_cast<long>(m)), 2.0 * s) * std::norm(h[m]);
    }
    return g.spacing() * acc / static_cast<double>(n);
}

/// sqrt(||f||^2 + ||D|^(alpha/2) f||^2).
inline double h_alpha_half_norm(const RealField& f, double alpha) {
    require_alpha(alpha, "h_alpha_half_norm");
    return std::sqrt(inner(f, f) + homogeneous_seminorm_sq(f, 0.5 * alpha));
}

/// ||f||^2 + ||f'||^2.
inline double h1_norm_sq(const RealField& f) { return inner(f, f) + homogeneous_seminorm_sq(f, 1.0); }

/// Fraction of spectral energy carried by the top 10% of |k|.
inline double spectral_tail_fraction(const RealField& f) {
    const std::size_t n = f.grid().size();
    const HalfSpectrum h = forward_half(f.values());
    const std::size_t cut = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n / 2)));
    double total = 0.0, tail = 0.0;
    for (std::size_t m = 0; m < h.size(); ++m) {
        const double w = (m == 0 || m == n / 2) ? 1.0 : 2.0;
        const double e = w * std::norm(h[m]);
        total += e;
        if (m >= cut) tail += e;
    }
    return total > 0.0 ? tail / total : 0.0;
}

// ---------------------------------------------------------------------------
// Trigonometric interpolation
// ---------------------------------------------------------------------------

/// Evaluates the trigonometric interpolant of a grid function at arbitrary
/// points (periodic continuation). O(N) per point.
class TrigInterpolant {
public:
    explicit TrigInterpolant(const RealField& f) : grid_(f.grid()), spec_(forward_half(f.values())) {}

    const GridSpec& grid() const noexcept { return grid_; }

    double operator()(double x) const {
        const std::size_t n = grid_.size();
        const std::size_t half = n / 2;
        const double dk = grid_.wavenumber(1);
        const double phase = dk * (x - grid_.x(0));
        const Complex step = std::polar(1.0, phase);
        Complex acc = 0.0;
        Complex w = step;
        for (std::size_t m = 1; m < half; ++m) {
            // reseed the recurrence to keep its rounding error O(eps)
            if ((m & 63u) == 0) w = std::polar(1.0, phase * static_cast<double>(m));
            acc += spec_[m] * w;
            w *= step;
        }
        const double nyq = std::real(spec_[half]) * std::cos(phase * static_cast<double>(half));
        return (std::real(spec_[0]) + 2.0 * std::real(acc) + nyq) / static_cast<double>(n);
    }

    std::vector<double> operator()(std::span<const double> xs) const {
        std::vector<double> out(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (*this)(xs[i]);
        return out;
    }

private:
    GridSpec grid_;
    HalfSpectrum spec_;
};

/// amplitude * f(scale * y + shift) sampled at the nodes y of `target`.
inline RealField resample_affine(const TrigInterpolant& f, const GridSpec& target, double scale, double shift,
                                 double amplitude = 1.0) {
    RealField out(target);
    for (std::size_t j = 0; j < target.size(); ++j) out[j] = amplitude * f(scale * target.x(j) + shift);
    return out;
}

inline RealField resample_affine(const RealField& f, const GridSpec& target, double scale, double shift,
                                 double amplitude = 1.0) {
    return resample_affine(TrigInterpolant(f), target, scale, shift, amplitude);
}

/// Band-limited transfer to another point count on the same box (zero padding
/// or truncation of the spectrum).
inline RealField change_resolution(const RealField& f, std::size_t n_new) {
    const GridSpec& g = f.grid();
    const GridSpec target(g.half_length(), n_new);
    if (n_new == g.size()) return f;
    const HalfSpectrum h = forward_half(f.values());
    HalfSpectrum out(n_new / 2 + 1, 0.0);
    const std::size_t keep = std::min(h.size(), out.size());
    const double scale = static_cast<double>(n_new) / static_cast<double>(g.size());
    for (std::size_t m = 0; m < keep; ++m) out[m] = scale * h[m];
    // an unpaired Nyquist coefficient becomes a cosine pair on the finer grid
    if (n_new > g.size()) out[g.size() / 2] *= 0.5;
    if (n_new < g.size()) out[n_new / 2] = 2.0 * std::real(out[n_new / 2]);
    return RealField(target, inverse_half(std::move(out), n_new));
}

// ---------------------------------------------------------------------------
// Stable kernel
// ---------------------------------------------------------------------------

struct KernelCertificate {
    bool even = false;
    bool positive = false;
    bool unimodal = false;
    double resolved_half_width = 0.0;  ///< |x| below which K exceeds the rounding floor
};

/// Checks evenness, positivity and K'(x) < 0 for x > 0 on the resolved domain.
inline KernelCertificate certify_stable_kernel(const RealField& K) {
    const GridSpec& g = K.grid();
    const std::size_t n = g.size();
    const std::size_t o = g.origin_index();
    const double peak = K.max_abs();
    const double floor = 1e-10 * peak;
    KernelCertificate cert;
    double asym = 0.0;
    for (std::size_t j = 1; j < n; ++j) asym = std::max(asym, std::abs(K[j] - K[n - j]));
    cert.even = asym <= 1e-12 * peak;

    std::size_t edge = o;  // last index (x >= 0) inside the resolved domain
    while (edge + 1 < n && K[edge + 1] > floor) ++edge;
    cert.resolved_half_width = g.x(edge);

    bool positive = true;
    for (std::size_t j = 0; j < n; ++j) {
        const bool resolved = std::abs(g.x(j)) <= cert.resolved_half_width;
        if (resolved && !(K[j] > 0.0)) positive = false;
        if (!resolved && K[j] < -floor) positive = false;
    }
    cert.positive = positive;

    bool unimodal = true;
    for (std::size_t j = o + 2; j < edge; ++j)
        if (!(K[j + 1] < K[j])) unimodal = false;
    cert.unimodal = unimodal;
    return cert;
}

/// K with Fourier transform exp(-|xi|^alpha), sampled on the periodic grid
/// (the periodization of the whole-line kernel). Unit mass by construction.
inline RealField stable_kernel(double alpha, const GridSpec& grid) {
    require_alpha(alpha, "stable_kernel");
    SpectralField F{grid, std::vector<Complex>(grid.size())};
    const std::vector<double> k = grid.wavenumbers();
    for (std::size_t i = 0; i < k.size(); ++i) F.coeffs[i] = std::exp(-std::pow(std::abs(k[i]), alpha));
    RealField K = inverse(F);
    K *= 1.0 / grid.spacing();
    const KernelCertificate cert = certify_stable_kernel(K);
    if (!cert.even || !cert.positive || !cert.unimodal)
        throw ResolutionError("stable_kernel: certification failed (even=" + std::to_string(cert.even) +
                              ", positive=" + std::to_string(cert.positive) +
                              ", unimodal=" + std::to_string(cert.unimodal) + "); increase N or L");
    return K;
}

}  // namespace dgbo
