#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgbo/modulation.hpp"

using namespace dgbo;

namespace {

struct Fixture {
    GroundState gs;
    RealField chi0;
};

const Fixture& fx() {
    static const Fixture f = [] {
        Fixture r;
        r.gs = solve_ground_state(2.0, GridSpec(51.2, 2048));
        r.chi0 = ground_mode(LinearizedOperator(r.gs)).vector;
        return r;
    }();
    return f;
}

// Small-grid copy used by the brute-force oracle.
const Fixture& fx_small() {
    static const Fixture f = [] {
        Fixture r;
        r.gs = solve_ground_state(2.0, GridSpec(25.6, 512));
        r.chi0 = ground_mode(LinearizedOperator(r.gs)).vector;
        return r;
    }();
    return f;
}

// <eta, f> evaluated in the original variable:
// lambda^{-1/a} int u(x) f((x - rho)/lambda^{2/a}) dx - <Q, f>.
double pairing_in_x(const RealField& u, const TrigInterpolant& f, double qf, double lambda, double rho, double alpha) {
    const auto& g = u.grid();
    const double s = std::pow(lambda, 2.0 / alpha);
    double acc = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) acc += u[j] * f((g.x(j) - rho) / s);
    return std::pow(lambda, -1.0 / alpha) * acc * g.spacing() - qf;
}

// Exhaustive shrinking-grid minimization of |G|^2 with G computed in x.
std::pair<double, double> oracle_scan(const RealField& u, const Fixture& f, double l0, double r0) {
    const RealField dq = derivative(f.gs.Q);
    const TrigInterpolant idq(dq), ichi(f.chi0);
    const double qdq = inner(f.gs.Q, dq), qchi = inner(f.gs.Q, f.chi0);
    double lw = 0.2, rw = 1.0;
    for (int round = 0; round < 60 && (lw > 1e-10 || rw > 1e-10); ++round) {
        double best = 1e300, bl = l0, br = r0;
        for (int i = -4; i <= 4; ++i)
            for (int j = -4; j <= 4; ++j) {
                const double l = l0 + lw * i / 4.0, r = r0 + rw * j / 4.0;
                const double a = pairing_in_x(u, idq, qdq, l, r, 2.0);
                const double b = pairing_in_x(u, ichi, qchi, l, r, 2.0);
                if (a * a + b * b < best) {
                    best = a * a + b * b;
                    bl = l;
                    br = r;
                }
            }
        l0 = bl;
        r0 = br;
        lw *= 0.5;
        rw *= 0.5;
    }
    return {l0, r0};
}

}  // namespace

TEST(Decompose, ExactSoliton) {
    const auto& f = fx();
    Modulator mod(f.gs, f.chi0);
    const auto st = mod.decompose(f.gs.Q);
    EXPECT_NEAR(st.lambda, 1.0, 1e-12);
    EXPECT_NEAR(st.rho, 0.0, 1e-12);
    EXPECT_LT(st.eta.max_abs(), 1e-10);
    EXPECT_TRUE(st.valid);
}

TEST(Decompose, ScaledTranslatedSoliton) {
    const auto& f = fx();
    Modulator mod(f.gs, f.chi0);
    const auto u = scaled_soliton(f.gs, 1.1, 2.5);
    const auto st = mod.decompose(u);
    EXPECT_NEAR(st.lambda, 1.1, 1e-7);
    EXPECT_NEAR(st.rho, 2.5, 1e-7);
    EXPECT_LT(st.eta_l2, 1e-8);
}

TEST(Decompose, CovarianceAcrossFamily) {
    const auto& f = fx();
    Modulator mod(f.gs, f.chi0);
    const double L = f.gs.grid.half_length();
    for (double l0 : {0.5, 0.8, 1.0, 1.5, 2.0})
        for (double x0 : {-L / 4, -1.3, 0.0, 2.2, L / 4}) {
            const auto st = mod.decompose(scaled_soliton(f.gs, l0, x0));
            EXPECT_NEAR(st.lambda, l0, 1e-7 * l0) << l0 << " " << x0;
            EXPECT_NEAR(st.rho, x0, 1e-7) << l0 << " " << x0;
        }
}

TEST(Decompose, AgreesWithBruteForceScan) {
    const auto& f = fx_small();
    Modulator mod(f.gs, f.chi0);
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int c = 0; c < 20; ++c) {
        const double l0 = 1.0 + 0.1 * U(rng), x0 = 2.0 * U(rng), off = 2.0 * U(rng), w = 1.5 + 0.5 * U(rng);
        const bool odd = c % 2 == 1;
        RealField u = scaled_soliton(f.gs, l0, x0);
        u += RealField::from_function(f.gs.grid, [&](double x) {
            const double y = x - x0 - off;
            return 0.01 * (odd ? y : 1.0) * std::exp(-y * y / (w * w));
        });
        const auto st = mod.decompose(u);
        const auto [ol, orho] = oracle_scan(u, f, l0, x0);
        EXPECT_NEAR(st.lambda, ol, 1e-6) << c;
        EXPECT_NEAR(st.rho, orho, 1e-6) << c;
        const double tol = std::max(1e-12, 1e-10 * st.eta_l2);
        EXPECT_LT(std::abs(st.ortho_residuals[0]), tol);
        EXPECT_LT(std::abs(st.ortho_residuals[1]), tol);
    }
}

TEST(Decompose, FarFieldIsRejected) {
    const auto& f = fx();
    Modulator mod(f.gs, f.chi0);
    auto two = RealField::from_function(f.gs.grid, [&](double x) {
        return explicit_soliton_value(x - 6.0) + explicit_soliton_value(x + 6.0);
    });
    EXPECT_THROW(mod.decompose(two), Error);
    ModulationOptions lax;
    lax.throw_if_far = false;
    lax.scan_fallback = false;
    Modulator soft(f.gs, f.chi0, lax);
    auto bumpy = f.gs.Q + RealField::from_function(f.gs.grid, [](double x) { return 0.8 * std::exp(-(x - 3) * (x - 3)); });
    const auto st = soft.decompose(bumpy);
    EXPECT_FALSE(st.valid);
}

TEST(Beta, Values) {
    const auto& gs = fx().gs;
    EXPECT_NEAR(beta(gs.Q, gs), 0.0, 1e-10);
    EXPECT_NEAR(beta(gs.Q * 1.05, gs), (1.05 * 1.05 - 1.0) * gs.mass(), 1e-6);
    EXPECT_NEAR(beta(gs.Q * 1.05, gs), 0.6235, 1e-3);
    EXPECT_NEAR(beta(scaled_soliton(gs, 1.7, 3.0), gs), beta(gs.Q, gs), 1e-10);
    // negative energy forces a positive mass excess
    const auto u = gs.Q * 1.02;
    ASSERT_LT(conserved(u, 2.0).energy, 0.0);
    EXPECT_GT(beta(u, gs), 0.0);
}

TEST(Renormalize, FixedPointsAndCovariance) {
    const auto& gs = fx().gs;
    const auto r = renormalize(gs.Q, gs);
    EXPECT_NEAR(r.lambda_bar, 1.0, 1e-12);
    EXPECT_LT((r.field - gs.Q).max_abs(), 1e-10);
    const auto r8 = renormalize(scaled_soliton(gs, 0.8, 0.0), gs);
    EXPECT_NEAR(r8.lambda_bar, 0.8, 1e-9);
    EXPECT_LT((r8.field - gs.Q).max_abs(), 1e-7);
}

TEST(Renormalize, GenericBump) {
    const auto& gs = fx().gs;
    auto u = RealField::from_function(gs.grid, [](double x) { return 0.7 * std::exp(-x * x / 3.0) * (1.0 + 0.3 * x); });
    const auto r = renormalize(u, gs);
    EXPECT_NEAR(quadrature(pointwise(r.field, r.field)), quadrature(pointwise(u, u)), 1e-8);
    EXPECT_NEAR(homogeneous_seminorm_sq(r.field, 1.0), homogeneous_seminorm_sq(gs.Q, 1.0), 1e-7);
    // a very light bump rescales to a spike far narrower than the grid spacing
    auto light = RealField::from_function(gs.grid, [](double x) { return 1e-4 * std::exp(-x * x); });
    EXPECT_THROW(renormalize(light, gs), ResolutionError);
}

namespace {

RunRecord run_frames(const RealField& u0, double t_end, double dt, int every) {
    EvolutionConfig c;
    c.alpha = 2.0;
    c.dt = dt;
    c.t_end = t_end;
    c.checkpoint_every = every;
    c.keep_frames = true;
    c.sobolev_growth_limit = 3.0;
    return evolve(u0, c);
}

}  // namespace

TEST(Track, ExactSolitonRun) {
    const auto& f = fx();
    Modulator mod(f.gs, f.chi0);
    const auto rec = run_frames(f.gs.Q, 2.0, 1e-3, 100);
    const auto tr = track(rec.frames, mod);
    ASSERT_FALSE(tr.truncated_at.has_value());
    ASSERT_EQ(tr.size(), 21u);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        EXPECT_NEAR(tr.lambda[i], 1.0, 1e-6);
        EXPECT_NEAR(tr.rho[i], tr.t[i], 1e-6);
        EXPECT_LT(tr.eta_l2[i], 1e-6);
        EXPECT_NEAR(tr.s[i], tr.t[i], 1e-5);
    }
    for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_GT(tr.s[i], tr.s[i - 1]);
}

TEST(Track, PerturbedRunBoundShapeStableUnderRefinement) {
    const auto& f = fx();
    Modulator mod(f.gs, f.chi0);
    RealField u0 = f.gs.Q + RealField::from_function(f.gs.grid, [](double x) { return 0.01 * std::exp(-x * x); });
    const auto a = track(run_frames(u0, 2.0, 2e-3, 50).frames, mod);
    const auto b = track(run_frames(u0, 2.0, 1e-3, 100).frames, mod);
    ASSERT_FALSE(a.truncated_at.has_value());
    ASSERT_FALSE(b.truncated_at.has_value());
    EXPECT_GT(a.fitted_c, 0.0);
    EXPECT_LT(a.fitted_c, 1e3);
    EXPECT_NEAR(a.fitted_c / b.fitted_c, 1.0, 0.05);
    // s reconstructed from lambda agrees with the stored cumulative integral
    for (std::size_t i = 1; i < b.size(); ++i) {
        const double ds = 0.5 * (b.t[i] - b.t[i - 1]) * (std::pow(b.lambda[i - 1], -3.0) + std::pow(b.lambda[i], -3.0));
        EXPECT_NEAR(b.s[i] - b.s[i - 1], ds, 1e-12 * ds);
    }
}

TEST(Track, NegativeEnergyDataLambdaDecreases) {
    const auto& f = fx();
    Modulator mod(f.gs, f.chi0);
    const auto rec = run_frames(f.gs.Q * 1.05, 2.0, 1e-3, 100);
    const auto tr = track(rec.frames, mod);
    ASSERT_GE(tr.size(), 10u);
    EXPECT_LT(tr.lambda.back(), tr.lambda.front());
    EXPECT_LT(tr.lambda.back(), 1.0);
}
