#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dgbo/errors.hpp"

namespace dgbo {

/// Periodic box [-L, L) sampled at N equispaced points x_j = -L + j h.
///
/// Wavenumbers are k_m = pi m / L for m = -N/2 ... N/2-1; the array is
/// antisymmetric except for the Nyquist entry m = -N/2.
class GridSpec {
public:
    GridSpec() = default;

    GridSpec(double half_length, std::size_t n_points)
        : half_length_(half_length), n_(n_points) {
        if (!(half_length > 0.0) || !std::isfinite(half_length))
            throw ContractError("GridSpec: half_length must be positive and finite");
        if (n_points < 4 || (n_points & (n_points - 1)) != 0)
            throw ContractError("GridSpec: n_points must be a power of two >= 4, got " +
                                std::to_string(n_points));
    }

    double half_length() const noexcept { return half_length_; }
    std::size_t size() const noexcept { return n_; }
    double length() const noexcept { return 2.0 * half_length_; }
    double spacing() const noexcept { return 2.0 * half_length_ / static_cast<double>(n_); }
    double x(std::size_t j) const noexcept { return -half_length_ + spacing() * static_cast<double>(j); }

    std::vector<double> points() const {
        std::vector<double> xs(n_);
        for (std::size_t j = 0; j < n_; ++j) xs[j] = x(j);
        return xs;
    }

    /// k_m for signed mode index m.
    double wavenumber(long m) const noexcept { return std::numbers::pi * static_cast<double>(m) / half_length_; }

    /// Wavenumbers in centered order, matching SpectralField::coeffs.
    std::vector<double> wavenumbers() const {
        std::vector<double> k(n_);
        const long half = static_cast<long>(n_ / 2);
        for (long m = -half; m < half; ++m) k[static_cast<std::size_t>(m + half)] = wavenumber(m);
        return k;
    }

    /// |k| of the Nyquist mode, the largest resolved wavenumber.
    double max_wavenumber() const noexcept { return wavenumber(static_cast<long>(n_ / 2)); }

    /// Index of x = 0.
    std::size_t origin_index() const noexcept { return n_ / 2; }

    friend bool operator==(const GridSpec& a, const GridSpec& b) noexcept {
        return a.n_ == b.n_ && a.half_length_ == b.half_length_;
    }

private:
    double half_length_ = 1.0;
    std::size_t n_ = 4;
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where) {
    if (!(a == b)) throw ContractError(std::string(where) + ": grid mismatch");
}

/// Real function sampled on a GridSpec. Value semantics.
class RealField {
public:
    RealField() = default;

    explicit RealField(const GridSpec& grid) : grid_(grid), values_(grid.size(), 0.0) {}

    RealField(const GridSpec& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw ContractError("RealField: value count " + std::to_string(values_.size()) +
                                " does not match grid size " + std::to_string(grid_.size()));
    }

    template <class F>
    static RealField from_function(const GridSpec& grid, F&& f) {
        RealField out(grid);
        for (std::size_t j = 0; j < grid.size(); ++j) out.values_[j] = f(grid.x(j));
        return out;
    }

    const GridSpec& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator[](std::size_t j) noexcept { return values_[j]; }
    double operator[](std::size_t j) const noexcept { return values_[j]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& data() const noexcept { return values_; }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    double max_abs() const noexcept {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Index of the largest |value|.
    std::size_t argmax_abs() const noexcept {
        std::size_t best = 0;
        for (std::size_t j = 1; j < values_.size(); ++j)
            if (std::abs(values_[j]) > std::abs(values_[best])) best = j;
        return best;
    }

    /// Set when the producing computation detected divergence; values may be non-finite.
    bool diverged() const noexcept { return diverged_; }
    void mark_diverged(bool flag = true) noexcept { diverged_ = flag; }

    RealField& operator+=(const RealField& o) {
        require_same_grid(grid_, o.grid_, "RealField::operator+=");
        for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += o.values_[j];
        return *this;
    }
    RealField& operator-=(const RealField& o) {
        require_same_grid(grid_, o.grid_, "RealField::operator-=");
        for (std::size_t j = 0; j < values_.size(); ++j) values_[j] -= o.values_[j];
        return *this;
    }
    RealField& operator*=(double s) noexcept {
        for (double& v : values_) v *= s;
        return *this;
    }

    friend RealField operator+(RealField a, const RealField& b) { return a += b; }
    friend RealField operator-(RealField a, const RealField& b) { return a -= b; }
    friend RealField operator*(RealField a, double s) { return a *= s; }
    friend RealField operator*(double s, RealField a) { return a *= s; }

    /// Pointwise product.
    friend RealField pointwise(const RealField& a, const RealField& b) {
        require_same_grid(a.grid_, b.grid_, "pointwise");
        RealField out(a.grid_);
        for (std::size_t j = 0; j < a.size(); ++j) out.values_[j] = a.values_[j] * b.values_[j];
        return out;
    }

private:
    GridSpec grid_;
    std::vector<double> values_;
    bool diverged_ = false;
};

/// Discrete Fourier coefficients F_m = sum_j f_j exp(-i k_m x_j), centered order m = -N/2 ... N/2-1.
struct SpectralField {
    GridSpec grid;
    std::vector<std::complex<double>> coeffs;

    std::complex<double>& at_mode(long m) { return coeffs[static_cast<std::size_t>(m + static_cast<long>(grid.size() / 2))]; }
    std::complex<double> at_mode(long m) const {
        return coeffs[static_cast<std::size_t>(m + static_cast<long>(grid.size() / 2))];
    }
};

}  // namespace dgbo
