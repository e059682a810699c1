#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dgbo/spectral.hpp"

using namespace dgbo;

namespace {

constexpr double pi = std::numbers::pi;

// Direct O(N^2) evaluation of F_m = sum_j f_j exp(-i k_m x_j), centered order.
std::vector<Complex> dense_dft(const RealField& f) {
    const auto& g = f.grid();
    const long n = static_cast<long>(g.size());
    std::vector<Complex> out(g.size());
    for (long m = -n / 2; m < n / 2; ++m) {
        Complex acc = 0.0;
        for (long j = 0; j < n; ++j) acc += f[j] * std::polar(1.0, -g.wavenumber(m) * g.x(j));
        out[m + n / 2] = acc;
    }
    return out;
}

// Applies symbol(k) by dense DFT and dense synthesis.
template <class S>
RealField dense_multiplier(const RealField& f, S symbol) {
    const auto& g = f.grid();
    const long n = static_cast<long>(g.size());
    auto F = dense_dft(f);
    RealField out(g);
    for (long j = 0; j < n; ++j) {
        Complex acc = 0.0;
        for (long m = -n / 2; m < n / 2; ++m) {
            // the Nyquist mode is treated as a cosine (split evenly between +-N/2)
            const double k = g.wavenumber(m);
            Complex term = symbol(k) * F[m + n / 2] * std::polar(1.0, k * g.x(j));
            if (m == -n / 2) term = symbol(k) * F[0] * std::cos(k * g.x(j));
            acc += term;
        }
        out[j] = acc.real() / static_cast<double>(n);
    }
    return out;
}

RealField random_field(const GridSpec& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    RealField f(g);
    for (std::size_t j = 0; j < g.size(); ++j) f[j] = nd(rng);
    return f;
}

RealField smooth_random_field(const GridSpec& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double c1 = 5.0 * U(rng), w1 = 1.0 + std::abs(U(rng)), c2 = 5.0 * U(rng), a2 = U(rng), k2 = 2.0 * U(rng);
    return RealField::from_function(g, [&](double x) {
        return std::exp(-(x - c1) * (x - c1) / (w1 * w1)) + a2 * std::cos(k2 * x) * std::exp(-(x - c2) * (x - c2) / 4.0);
    });
}

double soliton(double x) { return std::pow(15.0, 0.25) / std::sqrt(std::cosh(2.0 * x)); }

double soliton_prime(double x) { return -soliton(x) * std::tanh(2.0 * x); }

double max_abs_diff(const RealField& a, const RealField& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

}  // namespace

TEST(Grid, RejectsBadSizes) {
    EXPECT_THROW(GridSpec(10.0, 100), ContractError);
    EXPECT_THROW(GridSpec(-1.0, 64), ContractError);
    EXPECT_NO_THROW(GridSpec(10.0, 64));
}

TEST(Grid, Wavenumbers) {
    GridSpec g(10.0, 16);
    auto k = g.wavenumbers();
    EXPECT_DOUBLE_EQ(k[0], -pi * 8 / 10.0);
    for (std::size_t i = 1; i < 16; ++i) EXPECT_NEAR(k[i], -k[16 - i], 1e-15);
    EXPECT_DOUBLE_EQ(g.x(0), -10.0);
    EXPECT_DOUBLE_EQ(g.spacing(), 1.25);
}

TEST(Transform, ZeroMapsToZero) {
    GridSpec g(5.0, 32);
    auto F = transform(RealField(g));
    for (auto c : F.coeffs) EXPECT_EQ(std::abs(c), 0.0);
}

TEST(Transform, SingleCosineHasTwoModes) {
    GridSpec g(7.0, 64);
    auto f = RealField::from_function(g, [](double x) { return std::cos(pi * x / 7.0); });
    auto F = transform(f);
    for (long m = -32; m < 32; ++m) {
        if (m == 1 || m == -1)
            EXPECT_NEAR(std::abs(F.at_mode(m)), 32.0, 1e-12);
        else
            EXPECT_LT(std::abs(F.at_mode(m)), 1e-12);
    }
}

TEST(Transform, MatchesDenseDftAndRoundTrips) {
    GridSpec g(3.0, 256);
    auto f = random_field(g, 7);
    auto F = transform(f);
    auto D = dense_dft(f);
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < D.size(); ++i) {
        scale = std::max(scale, std::abs(D[i]));
        err = std::max(err, std::abs(D[i] - F.coeffs[i]));
    }
    EXPECT_LT(err / scale, 1e-12);
    EXPECT_LT(max_abs_diff(inverse(F), f), 1e-12);
}

TEST(Transform, ParsevalAcrossSizes) {
    for (std::size_t n = 64; n <= 8192; n *= 2) {
        GridSpec g(11.0, n);
        auto f = random_field(g, static_cast<unsigned>(n));
        auto F = transform(f);
        double lhs = 0.0, rhs = 0.0;
        for (double v : f.values()) lhs += v * v;
        for (auto c : F.coeffs) rhs += std::norm(c);
        lhs *= g.spacing();
        rhs *= g.spacing() * g.spacing() / g.length();
        EXPECT_NEAR(lhs / rhs, 1.0, 1e-12) << n;
        EXPECT_LT(max_abs_diff(inverse(F), f), 1e-12 * f.max_abs() * 10) << n;
    }
}

TEST(Transform, LengthMismatchIsContractError) {
    EXPECT_THROW(RealField(GridSpec(1.0, 8), std::vector<double>(7)), ContractError);
}

TEST(Multiplier, DomainChecked) {
    EXPECT_THROW(FracMultiplier(0.5, MultiplierKind::riesz), DomainError);
    EXPECT_THROW(FracMultiplier(2.5, MultiplierKind::riesz), DomainError);
}

TEST(Multiplier, ConstantIsAnnihilated) {
    GridSpec g(5.0, 64);
    auto c = RealField::from_function(g, [](double) { return 3.0; });
    for (double a : {1.0, 1.5, 2.0}) EXPECT_LT(riesz(c, a).max_abs(), 1e-13);
}

TEST(Multiplier, Alpha2IsMinusSecondDerivative) {
    GridSpec g(4.0, 64);
    auto f = RealField::from_function(g, [](double x) { return std::sin(pi * x / 4.0); });
    auto r = riesz(f, 2.0);
    const double c = (pi / 4.0) * (pi / 4.0);
    EXPECT_LT(max_abs_diff(r, f * c), 1e-13);
}

TEST(Multiplier, FractionalMatchesDenseOracle) {
    GridSpec g(10.0, 256);
    auto f = RealField::from_function(g, [](double x) { return std::exp(-x * x); });
    auto r = riesz(f, 1.5);
    auto d = dense_multiplier(f, [](double k) { return Complex(std::pow(std::abs(k), 1.5)); });
    EXPECT_LT(max_abs_diff(r, d), 1e-10);
}

TEST(Multiplier, DispersionMatchesDenseOracle) {
    GridSpec g(10.0, 128);
    auto f = smooth_random_field(g, 3);
    auto r = apply_multiplier(f, FracMultiplier(1.25, MultiplierKind::dispersion));
    auto d = dense_multiplier(f, [&](double k) {
        if (std::abs(std::abs(k) - g.max_wavenumber()) < 1e-12) return Complex(0.0);
        return Complex(0.0, k * std::pow(std::abs(k), 1.25));
    });
    EXPECT_LT(max_abs_diff(r, d), 1e-10 * std::max(1.0, d.max_abs()));
}

TEST(Multiplier, LinearCompositionSelfAdjoint) {
    GridSpec g(12.0, 512);
    auto f = smooth_random_field(g, 11);
    auto h = smooth_random_field(g, 12);
    for (double a : {1.0, 1.3, 1.7, 2.0}) {
        auto lhs = riesz(f * 2.0 + h * (-0.5), a);
        auto rhs = riesz(f, a) * 2.0 + riesz(h, a) * (-0.5);
        EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12 * std::max(1.0, rhs.max_abs()));
        FracMultiplier half(a, MultiplierKind::half_riesz);
        auto twice = apply_multiplier(apply_multiplier(f, half), half);
        EXPECT_LT(max_abs_diff(twice, riesz(f, a)), 1e-12 * std::max(1.0, twice.max_abs()));
        const double ab = inner(riesz(f, a), h), ba = inner(f, riesz(h, a));
        EXPECT_NEAR(ab, ba, 1e-12 * std::max(1.0, std::abs(ab)));
    }
}

TEST(Norms, QuadratureAndInner) {
    GridSpec g(50.0, 128);
    EXPECT_NEAR(quadrature(RealField::from_function(g, [](double) { return 1.0; })), 100.0, 1e-12);
    auto s = RealField::from_function(g, [](double x) { return std::sin(3 * pi * x / 50.0); });
    auto c = RealField::from_function(g, [](double x) { return std::cos(3 * pi * x / 50.0); });
    EXPECT_NEAR(inner(s, c), 0.0, 1e-12);
    EXPECT_THROW(inner(s, RealField(GridSpec(50.0, 64))), ContractError);
}

TEST(Norms, HalfNormOfConstantsAndZero) {
    GridSpec g(8.0, 64);
    EXPECT_EQ(h_alpha_half_norm(RealField(g), 1.5), 0.0);
    auto c = RealField::from_function(g, [](double) { return -2.0; });
    EXPECT_NEAR(h_alpha_half_norm(c, 1.5), 2.0 * std::sqrt(16.0), 1e-12);
}

TEST(Norms, SolitonMassAndH1) {
    GridSpec g(100.0, 4096);
    auto Q = RealField::from_function(g, soliton);
    EXPECT_NEAR(quadrature(pointwise(Q, Q)), std::sqrt(15.0) * pi / 2.0, 1e-6);
    double ref = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double x = g.x(j);
        ref += soliton(x) * soliton(x) + soliton_prime(x) * soliton_prime(x);
    }
    ref *= g.spacing();
    EXPECT_NEAR(h_alpha_half_norm(Q, 2.0), std::sqrt(ref), 1e-6 * std::sqrt(ref));
}

TEST(Interpolation, ReproducesGridValuesAndShifts) {
    GridSpec g(10.0, 256);
    auto f = RealField::from_function(g, [](double x) { return std::exp(-x * x / 2.0) * std::cos(x); });
    TrigInterpolant I(f);
    for (std::size_t j = 0; j < g.size(); j += 17) EXPECT_NEAR(I(g.x(j)), f[j], 1e-12);
    for (double x : {0.123, -3.77, 5.5, 9.99}) EXPECT_NEAR(I(x), std::exp(-x * x / 2.0) * std::cos(x), 1e-12);
    auto shifted = resample_affine(f, g, 1.0, 0.7, 1.0);
    for (std::size_t j = 0; j < g.size(); j += 13) {
        const double x = g.x(j) + 0.7;
        EXPECT_NEAR(shifted[j], std::exp(-x * x / 2.0) * std::cos(x), 1e-11);
    }
}

TEST(Interpolation, ChangeResolutionRoundTrip) {
    GridSpec g(10.0, 128);
    auto f = RealField::from_function(g, [](double x) { return std::exp(-x * x); });
    auto up = change_resolution(f, 512);
    for (std::size_t j = 0; j < 512; j += 7) {
        const double x = up.grid().x(j);
        EXPECT_NEAR(up[j], std::exp(-x * x), 1e-12);
    }
    EXPECT_LT(max_abs_diff(change_resolution(up, 128), f), 1e-13);
}

TEST(StableKernel, GaussianAtAlpha2) {
    GridSpec g(50.0, 4096);
    auto K = stable_kernel(2.0, g);
    double err = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double x = g.x(j);
        err = std::max(err, std::abs(K[j] - std::exp(-x * x / 4.0) / (2.0 * std::sqrt(pi))));
    }
    EXPECT_LT(err, 1e-8);
    EXPECT_NEAR(quadrature(K), 1.0, 1e-8);
}

TEST(StableKernel, PeriodizedPoissonAtAlpha1) {
    GridSpec g(50.0, 4096);
    auto K = stable_kernel(1.0, g);
    const double L = g.half_length();
    double err = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double x = g.x(j);
        if (std::abs(x) > L / 2) continue;
        const double exact = std::sinh(pi / L) / (2.0 * L * (std::cosh(pi / L) - std::cos(pi * x / L)));
        err = std::max(err, std::abs(K[j] / exact - 1.0));
    }
    EXPECT_LT(err, 1e-6);
    EXPECT_NEAR(quadrature(K), 1.0, 1e-8);
}

TEST(StableKernel, CertifiedAcrossAlpha) {
    GridSpec g(50.0, 4096);
    for (double a : {1.0, 1.25, 1.5, 1.75, 2.0}) {
        auto K = stable_kernel(a, g);
        auto cert = certify_stable_kernel(K);
        EXPECT_TRUE(cert.even && cert.positive && cert.unimodal) << a;
        EXPECT_NEAR(quadrature(K), 1.0, 1e-8) << a;
    }
}
