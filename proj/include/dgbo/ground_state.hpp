#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dgbo/dynamics.hpp"
#include "dgbo/errors.hpp"
#include "dgbo/fft.hpp"
#include "dgbo/grid.hpp"
#include "dgbo/spectral.hpp"

namespace dgbo {

/// 15^{1/4} / cosh^{1/2}(2x), the alpha = 2 ground state.
inline double explicit_soliton_value(double x) { return std::pow(15.0, 0.25) / std::sqrt(std::cosh(2.0 * x)); }

inline RealField explicit_soliton(const GridSpec& grid) { return RealField::from_function(grid, explicit_soliton_value); }

/// |v|^{2a} v / (2a+1), the ground-state nonlinearity.
inline RealField ground_state_nonlinearity(const RealField& v, double alpha) {
    const detail::PowerFlux power(alpha);
    const double c = 1.0 / (2.0 * alpha + 1.0);
    RealField out(v.grid());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = c * power(v[j]);
    return out;
}

/// |D|^a Q + Q - Q^{2a+1}/(2a+1).
inline RealField equation_residual(const RealField& q, double alpha) {
    require_alpha(alpha, "equation_residual");
    return riesz(q, alpha) + q - ground_state_nonlinearity(q, alpha);
}

struct PohozaevResiduals {
    double mass_gradient = 0.0;   ///< |int Q^2 - a int |D^{a/2}Q|^2| / int Q^2
    double mass_potential = 0.0;  ///< |int Q^2 - a/((2a+1)(a+1)) int Q^{2a+2}| / int Q^2
    double energy = 0.0;          ///< |E(Q)| / int |D^{a/2}Q|^2

    double max() const { return std::max({mass_gradient, mass_potential, energy}); }
};

struct PetviashviliOptions {
    int max_iters = 2000;
    double step_tol = 1e-12;      ///< successive sup-norm difference
    double residual_tol = 1e-9;   ///< L2 norm of equation_residual
    double sign_tolerance = 1e-3; ///< min(u) below -tol * max(u) counts as sign-indefinite
};

struct GroundState {
    double alpha = 2.0;
    GridSpec grid;
    RealField Q;
    PohozaevResiduals pohozaev;
    double energy_residual = 0.0;       ///< E(Q)
    double equation_residual_l2 = 0.0;
    std::optional<double> decay_exponent_fit;
    int iterations = 0;
    bool converged = false;
    std::vector<double> residual_history;  ///< sup-norm step size per iteration

    double mass() const { return quadrature(pointwise(Q, Q)); }
};

inline double potential_integral(const RealField& v, double alpha) {
    const detail::PowerFlux power(alpha);
    double s = 0.0;
    for (double x : v.values()) s += power.modulus_power(x) * x * x;
    return s * v.grid().spacing();
}

inline PohozaevResiduals pohozaev_check(const RealField& q, double alpha) {
    require_alpha(alpha, "pohozaev_check");
    const double mass = quadrature(pointwise(q, q));
    const double grad = homogeneous_seminorm_sq(q, 0.5 * alpha);
    const double pot = potential_integral(q, alpha);
    if (!(mass > 0.0) || !(grad > 0.0)) throw DomainError("pohozaev_check: zero field");
    PohozaevResiduals r;
    r.mass_gradient = std::abs(mass - alpha * grad) / mass;
    r.mass_potential = std::abs(mass - alpha / ((2.0 * alpha + 1.0) * (alpha + 1.0)) * pot) / mass;
    r.energy = std::abs(grad - pot / ((alpha + 1.0) * (2.0 * alpha + 1.0))) / grad;
    return r;
}

inline PohozaevResiduals pohozaev_check(const GroundState& gs) { return pohozaev_check(gs.Q, gs.alpha); }

namespace detail {

inline void symmetrize(std::vector<double>& u) {
    const std::size_t n = u.size();
    for (std::size_t j = 1; j < n / 2; ++j) {
        const double m = 0.5 * (u[j] + u[n - j]);
        u[j] = m;
        u[n - j] = m;
    }
}

inline void require_single_signed(const std::vector<double>& u, double tol, const char* what) {
    const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
    if (!(*hi > 0.0) || *lo < -tol * *hi)
        throw SeedError(std::string("solve_ground_state: ") + what + " is not single-signed (min " +
                        std::to_string(*lo) + ", max " + std::to_string(*hi) + ")");
}

}  // namespace detail

/// Petviashvili iteration for |D|^a Q + Q = Q^{2a+1}/(2a+1) in the even class.
inline GroundState solve_ground_state(double alpha, const GridSpec& grid, const std::optional<RealField>& seed = std::nullopt,
                                      const PetviashviliOptions& opt = {}) {
    require_alpha(alpha, "solve_ground_state");
    RealField start = seed ? *seed : explicit_soliton(grid);
    if (!(start.grid() == grid)) start = resample_affine(start, grid, 1.0, 0.0, 1.0);
    std::vector<double> u(start.data());
    detail::symmetrize(u);
    detail::require_single_signed(u, opt.sign_tolerance, "seed");

    const std::size_t n = grid.size();
    const std::size_t half = n / 2;
    const double gamma = (2.0 * alpha + 1.0) / (2.0 * alpha);
    const double nl_scale = 1.0 / (2.0 * alpha + 1.0);
    const double h = grid.spacing();
    const detail::PowerFlux power(alpha);
    std::vector<double> denom(half + 1);
    for (std::size_t m = 0; m <= half; ++m) denom[m] = 1.0 + std::pow(grid.wavenumber(static_cast<long>(m)), alpha);

    GroundState gs;
    gs.alpha = alpha;
    gs.grid = grid;
    std::vector<double> nl(n);
    HalfSpectrum uh, nh;
    for (int it = 1; it <= opt.max_iters; ++it) {
        for (std::size_t j = 0; j < n; ++j) nl[j] = nl_scale * power(u[j]);
        uh = forward_half(u);
        nh = forward_half(nl);
        // <(|D|^a + 1) u, u> and <N(u), u> via Parseval on the half spectrum
        double lin = 0.0, non = 0.0;
        for (std::size_t m = 0; m <= half; ++m) {
            const double w = (m == 0 || m == half) ? 1.0 : 2.0;
            lin += w * denom[m] * std::norm(uh[m]);
            non += w * std::real(nh[m] * std::conj(uh[m]));
        }
        lin *= h / static_cast<double>(n);
        non *= h / static_cast<double>(n);
        if (!(non > 0.0)) throw SeedError("solve_ground_state: nonlinear pairing became nonpositive");
        const double factor = std::pow(lin / non, gamma);
        for (std::size_t m = 0; m <= half; ++m) nh[m] *= factor / denom[m];
        std::vector<double> next = inverse_half(std::move(nh), n);
        detail::symmetrize(next);
        double diff = 0.0;
        for (std::size_t j = 0; j < n; ++j) diff = std::max(diff, std::abs(next[j] - u[j]));
        u.swap(next);
        gs.residual_history.push_back(diff);
        if (!std::isfinite(diff)) throw ConvergenceError("solve_ground_state: iterate became non-finite", gs.residual_history);
        detail::require_single_signed(u, opt.sign_tolerance, "iterate");
        gs.iterations = it;
        if (diff < opt.step_tol) {
            RealField q(grid, u);
            const double res = l2_norm(equation_residual(q, alpha));
            if (res < opt.residual_tol) {
                gs.converged = true;
                gs.equation_residual_l2 = res;
                break;
            }
        }
    }
    gs.Q = RealField(grid, std::move(u));
    if (!gs.converged) {
        throw ConvergenceError("solve_ground_state: no convergence after " + std::to_string(opt.max_iters) +
                                   " iterations (last step " + std::to_string(gs.residual_history.back()) + ")",
                               gs.residual_history);
    }
    gs.pohozaev = pohozaev_check(gs.Q, alpha);
    gs.energy_residual = conserved(gs.Q, alpha).energy;
    return gs;
}

/// Grid on which the Pohozaev and linearized identities of the computed profile
/// reach 1e-5 relative accuracy. The algebraic tail |x|^{-(1+a)} makes the
/// periodic-image error grow quickly as alpha decreases, so the box grows with it.
inline GridSpec certification_grid(double alpha) {
    require_alpha(alpha, "certification_grid");
    if (alpha >= 2.0) return GridSpec(100.0, 4096);
    if (alpha >= 1.75) return GridSpec(409.6, 16384);
    if (alpha >= 1.5) return GridSpec(819.2, 32768);
    if (alpha >= 1.25) return GridSpec(1638.4, 65536);
    return GridSpec(6553.6, 524288);
}

/// Solves along a ladder of alpha values, each step seeded by the previous profile.
inline std::vector<GroundState> continuation(const std::vector<double>& alphas, const GridSpec& grid,
                                             const PetviashviliOptions& opt = {}) {
    std::vector<GroundState> out;
    std::optional<RealField> seed;
    for (double a : alphas) {
        out.push_back(solve_ground_state(a, grid, seed, opt));
        seed = out.back().Q;
    }
    return out;
}

/// sqrt of int (f-g)^2 + ((f-g)')^2.
inline double h1_distance(const RealField& f, const RealField& g) { return std::sqrt(h1_norm_sq(f - g)); }

/// lambda0^{-1/a} Q(lambda0^{-2/a}(x - x0)) on `target`, by trigonometric interpolation of Q.
inline RealField scaled_soliton(const GroundState& gs, double lambda0, double x0, const GridSpec& target) {
    if (!(lambda0 > 0.0)) throw DomainError("scaled_soliton: lambda0 must be positive");
    const double s = std::pow(lambda0, -2.0 / gs.alpha), amp = std::pow(lambda0, -1.0 / gs.alpha);
    const TrigInterpolant q(gs.Q);
    const double lq = gs.grid.half_length(), period = target.length();
    // nearest periodic image of x - x0 on the target; arguments outside the box of Q are zero
    RealField out(target);
    for (std::size_t j = 0; j < target.size(); ++j) {
        const double d = target.x(j) - x0;
        const double z = s * (d - period * std::round(d / period));
        if (std::abs(z) < lq) out[j] = amp * q(z);
    }
    return out;
}

inline RealField scaled_soliton(const GroundState& gs, double lambda0, double x0) {
    return scaled_soliton(gs, lambda0, x0, gs.grid);
}

// ---------------------------------------------------------------------------
// Gagliardo-Nirenberg functional
// ---------------------------------------------------------------------------

/// (int |D^{a/2} v|^2)(int v^2)^a / int |v|^{2a+2}.
inline double j1(const RealField& v, double alpha) {
    require_alpha(alpha, "j1");
    const double pot = potential_integral(v, alpha);
    if (!(pot > 0.0)) throw DomainError("j1: zero denominator");
    const double mass = quadrature(pointwise(v, v));
    return homogeneous_seminorm_sq(v, 0.5 * alpha) * std::pow(mass, alpha) / pot;
}

struct GNTrial {
    std::string description;
    double j1 = 0.0;
    double mass = 0.0;
    double energy = 0.0;
    double norm_sq = 0.0;  ///< ||v||^2_{H^{a/2}}
};

struct GNReport {
    double j1_value = 0.0;
    double j1_identity = 0.0;  ///< (int Q^2)^a / ((2a+1)(a+1))
    double sharp_constant = 0.0;
    std::vector<GNTrial> trials;
    bool minimal = true;          ///< j1(Q) <= j1(v) for every trial
    bool energy_nonnegative = true;  ///< E(v) >= -1e-8 ||v||^2 whenever int v^2 <= int Q^2
};

/// Random smooth test field centered in the inner quarter of the box.
inline RealField random_smooth_field(const GridSpec& grid, std::mt19937_64& rng, std::string* description = nullptr) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double span = std::min(8.0, 0.25 * grid.half_length());
    const int kind = static_cast<int>(U(rng) * 3.0) % 3;
    RealField f(grid);
    if (kind == 0) {
        const double c = span * (2.0 * U(rng) - 1.0), w = 0.5 + 3.0 * U(rng);
        f = RealField::from_function(grid, [&](double x) { return std::exp(-(x - c) * (x - c) / (w * w)); });
        if (description) *description = "gaussian";
    } else if (kind == 1) {
        const double c = span * (2.0 * U(rng) - 1.0), w = 1.0 + 3.0 * U(rng), k = 3.0 * U(rng), ph = 6.0 * U(rng);
        f = RealField::from_function(grid, [&](double x) {
            return std::exp(-(x - c) * (x - c) / (w * w)) * std::cos(k * x + ph);
        });
        if (description) *description = "wave packet";
    } else {
        const int bumps = 2 + static_cast<int>(U(rng) * 3.0);
        std::vector<double> cs, ws, as;
        for (int b = 0; b < bumps; ++b) {
            cs.push_back(span * (2.0 * U(rng) - 1.0));
            ws.push_back(0.5 + 2.5 * U(rng));
            as.push_back(2.0 * U(rng) - 0.5);
        }
        f = RealField::from_function(grid, [&](double x) {
            double s = 0.0;
            for (int b = 0; b < bumps; ++b) s += as[b] * std::exp(-(x - cs[b]) * (x - cs[b]) / (ws[b] * ws[b]));
            return s;
        });
        if (description) *description = "sum of " + std::to_string(bumps) + " bumps";
    }
    return f;
}

/// Evaluates j1 on Q and on `trials` random smooth fields, each rescaled to a random
/// mass in (0.2, 1] * int Q^2 so that the sharp energy bound is exercised too.
inline GNReport gn_report(const GroundState& gs, int trials, std::uint64_t seed = 2024) {
    const double alpha = gs.alpha;
    GNReport rep;
    rep.j1_value = j1(gs.Q, alpha);
    const double mq = gs.mass();
    rep.j1_identity = std::pow(mq, alpha) / ((2.0 * alpha + 1.0) * (alpha + 1.0));
    rep.sharp_constant = 1.0 / rep.j1_value;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.2, 1.0);
    for (int t = 0; t < trials; ++t) {
        GNTrial tr;
        RealField v = random_smooth_field(gs.grid, rng, &tr.description);
        const double target = U(rng) * mq;
        v *= std::sqrt(target / quadrature(pointwise(v, v)));
        const Diagnostics d = conserved(v, alpha);
        tr.j1 = j1(v, alpha);
        tr.mass = d.mass;
        tr.energy = d.energy;
        tr.norm_sq = d.sobolev * d.sobolev;
        if (tr.j1 < rep.j1_value) rep.minimal = false;
        if (tr.mass <= mq && tr.energy < -1e-8 * tr.norm_sq) rep.energy_nonnegative = false;
        rep.trials.push_back(std::move(tr));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Tail decay
// ---------------------------------------------------------------------------

/// Least-squares slope of log Q against log x on [L/4, L/2].
inline double decay_fit(const RealField& q) {
    const GridSpec& g = q.grid();
    const double L = g.half_length();
    const double peak = q.max_abs();
    const double floor = 1e-13 * peak;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t count = 0;
    for (std::size_t j = g.origin_index(); j < g.size(); ++j) {
        const double x = g.x(j);
        if (x < 0.25 * L || x > 0.5 * L) continue;
        if (!(q[j] > floor))
            throw ResolutionError("decay_fit: tail at x=" + std::to_string(x) + " is below the noise floor (" +
                                  std::to_string(q[j]) + "); increase L");
        const double lx = std::log(x), ly = std::log(q[j]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++count;
    }
    if (count < 3) throw ResolutionError("decay_fit: tail window holds fewer than 3 points");
    const double nn = static_cast<double>(count);
    return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
}

inline double decay_fit(GroundState& gs) {
    gs.decay_exponent_fit = decay_fit(gs.Q);
    return *gs.decay_exponent_fit;
}

}  // namespace dgbo
