#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "dgbo/dynamics.hpp"
#include "dgbo/errors.hpp"
#include "dgbo/ground_state.hpp"
#include "dgbo/modulation.hpp"
#include "dgbo/spectral.hpp"

namespace dgbo {

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// phi(x) = int_{-inf}^x <s>^{-2r} ds and phi_A(x) = phi(x / A).
///
/// phi is evaluated through the incomplete beta function: with v = 1/(1+x^2),
/// int_{|x|}^inf <s>^{-2r} ds = B(v; r - 1/2, 1/2) / 2, which is accurate in the
/// far tails where a tabulated antiderivative would lose digits.
class Weight {
public:
    Weight(double r, double A, const GridSpec& grid, double alpha) : r_(r), A_(A), alpha_(alpha), grid_(grid) {
        require_alpha(alpha, "build_weight");
        if (!(r > 0.5) || !(r <= 0.5 * (alpha + 1.0) + 1e-15))
            throw DomainError("build_weight: r = " + std::to_string(r) + " outside (1/2, (alpha+1)/2]");
        if (!(A >= 1.0) || !std::isfinite(A)) throw DomainError("build_weight: A must be >= 1");
        total_ = boost::math::beta(r - 0.5, 0.5);
        phi_ = RealField::from_function(grid, [this](double x) { return phi(x); });
        dphi_ = RealField::from_function(grid, [this](double x) { return dphi(x); });
    }

    double r() const noexcept { return r_; }
    double A() const noexcept { return A_; }
    double alpha() const noexcept { return alpha_; }
    const GridSpec& grid() const noexcept { return grid_; }
    /// phi(+inf) = B(1/2, r - 1/2).
    double total() const noexcept { return total_; }

    /// Unscaled profile.
    double base(double x) const {
        const double half_tail = 0.5 * boost::math::beta(r_ - 0.5, 0.5, 1.0 / (1.0 + x * x));
        return x <= 0.0 ? half_tail : total_ - half_tail;
    }
    double base_derivative(double x) const { return std::pow(1.0 + x * x, -r_); }

    double phi(double x) const { return base(x / A_); }
    double dphi(double x) const { return base_derivative(x / A_) / A_; }
    /// (phi_A')^{1/2} = A^{-1/2} <x/A>^{-r}.
    double sqrt_dphi(double x) const { return std::pow(1.0 + (x / A_) * (x / A_), -0.5 * r_) / std::sqrt(A_); }
    /// Leading far-field behaviour phi(-x) ~ x^{1-2r} / (2r - 1) for x -> +inf.
    double tail_leading(double x) const { return std::pow(x / A_, 1.0 - 2.0 * r_) / (2.0 * r_ - 1.0); }

    /// Samples of phi_A and phi_A' centered at the origin of the grid.
    const RealField& phi_samples() const noexcept { return phi_; }
    const RealField& dphi_samples() const noexcept { return dphi_; }

    /// phi_A(x - center) on an arbitrary grid.
    RealField translated(const GridSpec& g, double center) const {
        return RealField::from_function(g, [&](double x) { return phi(x - center); });
    }
    RealField translated_derivative(const GridSpec& g, double center) const {
        return RealField::from_function(g, [&](double x) { return dphi(x - center); });
    }

private:
    double r_, A_, alpha_;
    GridSpec grid_;
    double total_ = 0.0;
    RealField phi_, dphi_;
};

inline Weight build_weight(double r, double A, const GridSpec& grid, double alpha) { return Weight(r, A, grid, alpha); }

/// Indicator of |x| <= (1 - fraction) L: weighted masses ignore the outer strip so
/// that mass wrapping through the periodic seam is not counted on the wrong side.
inline RealField seam_window(const GridSpec& g, double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ContractError("seam_window: fraction must lie in [0, 1)");
    const double edge = (1.0 - fraction) * g.half_length();
    return RealField::from_function(g, [edge](double x) { return std::abs(x) <= edge ? 1.0 : 0.0; });
}

/// int u^2 phi_A(x - center) w(x) dx.
inline double weighted_mass(const RealField& u, const Weight& w, double center, const RealField* window = nullptr) {
    const auto& g = u.grid();
    double acc = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double win = window ? (*window)[j] : 1.0;
        if (win == 0.0) continue;
        acc += u[j] * u[j] * w.phi(g.x(j) - center) * win;
    }
    return acc * g.spacing();
}

// ---------------------------------------------------------------------------
// Kato identity
// ---------------------------------------------------------------------------

/// Right-hand side of d/dt (1/2) int u^2 phi_A(x - c(t)) split term by term.
struct KatoTerms {
    double transport = 0.0;             ///< -(c'/2) int u^2 phi_A'
    double dispersive = 0.0;            ///< int (-|D|^a u)(u_x phi_A + u phi_A')
    double dispersive_transport = 0.0;  ///< int (-|D|^a u) u_x phi_A
    double dispersive_local = 0.0;      ///< int (-|D|^a u) u phi_A'
    double nonlinear = 0.0;             ///< sign/(2(a+1)) int |u|^{2a+2} phi_A'
    double dissipative = 0.0;           ///< || |D|^{a/2}(u (phi_A')^{1/2}) ||^2
    double local_mass = 0.0;            ///< int u^2 phi_A'
    double total() const noexcept { return transport + dispersive + nonlinear; }
};

inline KatoTerms kato_terms(const RealField& u, const Weight& w, double center, double center_velocity, double alpha,
                            Nonlinearity sign = Nonlinearity::focusing) {
    require_alpha(alpha, "kato_terms");
    const auto& g = u.grid();
    const RealField phi = w.translated(g, center);
    const RealField dphi = w.translated_derivative(g, center);
    const RealField root = RealField::from_function(g, [&](double x) { return w.sqrt_dphi(x - center); });
    const RealField lu = riesz(u, alpha) * -1.0;
    const RealField ux = derivative(u);

    KatoTerms k;
    const double h = g.spacing();
    double nl = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        k.local_mass += u[j] * u[j] * dphi[j];
        k.dispersive_transport += lu[j] * ux[j] * phi[j];
        k.dispersive_local += lu[j] * u[j] * dphi[j];
        nl += std::pow(std::abs(u[j]), 2.0 * alpha + 2.0) * dphi[j];
    }
    k.local_mass *= h;
    k.dispersive_transport *= h;
    k.dispersive_local *= h;
    k.dispersive = k.dispersive_transport + k.dispersive_local;
    k.transport = -0.5 * center_velocity * k.local_mass;
    k.nonlinear = focusing_sign(sign) * nl * h / (2.0 * (alpha + 1.0));
    k.dissipative = homogeneous_seminorm_sq(pointwise(u, root), 0.5 * alpha);
    return k;
}

// ---------------------------------------------------------------------------
// Commutator constant and the choice of A
// ---------------------------------------------------------------------------

struct CommutatorCalibration {
    double alpha = 2.0, r = 1.5, A = 1.0;
    double c = 0.0;              ///< max over trials of A^a * residual / int u^2 phi_A'
    std::vector<double> ratios;  ///< per-trial value of the same quotient
    std::vector<double> residuals;  ///< int (-|D|^a u) u phi_A' + || |D|^{a/2}(u sqrt(phi_A')) ||^2
};

/// Fits C in int(-|D|^a u) u phi_A' <= -|| |D|^{a/2}(u sqrt(phi_A')) ||^2 + (C/A^a) int u^2 phi_A'
/// over random smooth fields drawn at the scale of the weight (u(x) = v(x/A)).
inline CommutatorCalibration commutator_constant(double alpha, double r, double A, int trials = 20,
                                                 std::uint64_t seed = 31, std::size_t n = 1024) {
    const GridSpec unit(32.0, n), g(32.0 * A, n);
    const Weight w(r, A, g, alpha);
    std::mt19937_64 rng(seed);
    CommutatorCalibration cal;
    cal.alpha = alpha;
    cal.r = r;
    cal.A = A;
    for (int i = 0; i < trials; ++i) {
        const RealField v = random_smooth_field(unit, rng);
        const RealField u(g, v.data());
        const KatoTerms k = kato_terms(u, w, 0.0, 0.0, alpha);
        const double res = k.dispersive_local + k.dissipative;
        cal.residuals.push_back(res);
        cal.ratios.push_back(std::pow(A, alpha) * res / k.local_mass);
        cal.c = std::max(cal.c, cal.ratios.back());
    }
    return cal;
}

struct ASelection {
    double A = 0.0;
    double c = 0.0;
    double threshold = 0.0;  ///< (1 - mu)/10: keeps rho_t (1 - mu) - C/A^a above half its value when rho_t > 1/5
    std::vector<double> ladder, constants;
    bool satisfied = false;
};

/// Smallest A in {5, 10, 20, 40} with C(A)/A^a below the threshold.
inline ASelection select_A(double alpha, double r, double mu, int trials = 20, std::uint64_t seed = 31) {
    if (!(mu > 0.0 && mu < 1.0)) throw DomainError("select_A: mu must lie in (0, 1)");
    ASelection sel;
    sel.threshold = (1.0 - mu) / 10.0;
    for (double A : {5.0, 10.0, 20.0, 40.0}) {
        const double c = commutator_constant(alpha, r, A, trials, seed).c;
        sel.ladder.push_back(A);
        sel.constants.push_back(c);
        if (!sel.satisfied && c / std::pow(A, alpha) < sel.threshold) {
            sel.A = A;
            sel.c = c;
            sel.satisfied = true;
        }
    }
    if (!sel.satisfied) {
        sel.A = sel.ladder.back();
        sel.c = sel.constants.back();
    }
    return sel;
}

// ---------------------------------------------------------------------------
// Monotonicity checks
// ---------------------------------------------------------------------------

enum class MonotonicityKind { right, left, eta };

inline const char* to_string(MonotonicityKind k) {
    switch (k) {
        case MonotonicityKind::right: return "right";
        case MonotonicityKind::left: return "left";
        case MonotonicityKind::eta: return "eta";
    }
    return "?";
}

struct MonotonicityOptions {
    double mu = 0.5;
    double window_fraction = 0.05;
    std::size_t pair_stride = 1;  ///< use every stride-th track sample
    double t_begin = -std::numeric_limits<double>::infinity();
    double t_end = std::numeric_limits<double>::infinity();
    double roundoff_floor = 1e-12;  ///< verdict tolerance relative to phi_total * int u^2
};

struct MonotonicityReport {
    MonotonicityKind kind = MonotonicityKind::right;
    double x0 = 0.0, mu = 0.5, r = 1.5, A = 1.0;
    double constant = 0.0;      ///< C0 (right/left) or C (eta) used for the error term
    double error_budget = 0.0;  ///< C0 / x0^{2r-1}; for the eta check the largest per-pair error term
    double window_fraction = 0.0;
    double tolerance = 0.0;     ///< absolute roundoff floor applied to the verdict
    std::vector<double> t1, t2, lhs, rhs, slack;
    std::vector<double> deficit;  ///< lhs - (rhs - error term): what the error term has to absorb
    std::vector<double> budget;   ///< error term per pair
    std::vector<bool> verdict;
    double lambda_max = 0.0;
    double rho_t_min = 0.0;
    bool rho_t_bound = false;  ///< rho_t > 1/5 on the window

    std::size_t violations() const { return static_cast<std::size_t>(std::count(verdict.begin(), verdict.end(), false)); }
    bool all_true() const { return violations() == 0; }
    double min_slack() const { return slack.empty() ? 0.0 : *std::min_element(slack.begin(), slack.end()); }
    double max_deficit() const { return deficit.empty() ? 0.0 : *std::max_element(deficit.begin(), deficit.end()); }
};

namespace detail {

/// Track indices inside [t_begin, t_end], thinned by the stride.
inline std::vector<std::size_t> window_indices(const std::vector<double>& frame_t, const ModulationTrack& tr,
                                               const MonotonicityOptions& o) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < frame_t.size(); ++i) {
        if (frame_t[i] < o.t_begin - 1e-12 || frame_t[i] > o.t_end + 1e-12) continue;
        if (i >= tr.size())
            throw WindowError("monotonicity: modulation track ends at frame " + std::to_string(tr.size()) +
                              " inside the requested window" +
                              (tr.truncation_reason.empty() ? std::string() : " (" + tr.truncation_reason + ")"));
        idx.push_back(i);
    }
    std::vector<std::size_t> out;
    const std::size_t stride = std::max<std::size_t>(1, o.pair_stride);
    for (std::size_t k = 0; k < idx.size(); k += stride) out.push_back(idx[k]);
    if (!idx.empty() && out.back() != idx.back()) out.push_back(idx.back());
    if (out.size() < 2) throw WindowError("monotonicity: fewer than two samples in the window");
    return out;
}

inline void check_hypotheses(MonotonicityReport& rep, const ModulationTrack& tr, const std::vector<std::size_t>& idx) {
    const auto rho_t = finite_difference(tr.t, tr.rho);
    rep.lambda_max = 0.0;
    rep.rho_t_min = std::numeric_limits<double>::infinity();
    for (std::size_t i : idx) {
        rep.lambda_max = std::max(rep.lambda_max, tr.lambda[i]);
        rep.rho_t_min = std::min(rep.rho_t_min, rho_t[i]);
    }
    if (rep.lambda_max > 2.0)
        throw DomainError("monotonicity: lambda reaches " + std::to_string(rep.lambda_max) + " > 2 inside the window");
    rep.rho_t_bound = rep.rho_t_min > 0.2;
}

inline void push_pair(MonotonicityReport& rep, double t1, double t2, double lhs, double raw_rhs, double budget) {
    rep.t1.push_back(t1);
    rep.t2.push_back(t2);
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(raw_rhs + budget);
    rep.slack.push_back(raw_rhs + budget - lhs);
    rep.deficit.push_back(lhs - raw_rhs);
    rep.budget.push_back(budget);
    rep.verdict.push_back(lhs <= raw_rhs + budget + rep.tolerance);
}

inline std::vector<double> frame_times(const std::vector<Frame>& frames) {
    std::vector<double> t;
    t.reserve(frames.size());
    for (const auto& f : frames) t.push_back(f.t);
    return t;
}

}  // namespace detail

/// int u^2(t2) phi_A(x - rho(t2) - x0) <= int u^2(t1) phi_A(x - rho(t1) - mu(rho(t2) - rho(t1)) - x0) + C0/x0^{2r-1}.
inline MonotonicityReport check_right_monotonicity(const std::vector<Frame>& frames, const ModulationTrack& tr,
                                                   const Weight& w, double x0, double c0, MonotonicityOptions o = {}) {
    if (!(x0 > 1.0)) throw DomainError("check_right_monotonicity: x0 must exceed 1");
    if (!(o.mu > 0.0 && o.mu < 1.0)) throw DomainError("check_right_monotonicity: mu must lie in (0, 1)");
    const auto idx = detail::window_indices(detail::frame_times(frames), tr, o);
    MonotonicityReport rep;
    rep.kind = MonotonicityKind::right;
    rep.x0 = x0;
    rep.mu = o.mu;
    rep.r = w.r();
    rep.A = w.A();
    rep.constant = c0;
    rep.window_fraction = o.window_fraction;
    rep.error_budget = c0 / std::pow(x0, 2.0 * w.r() - 1.0);
    detail::check_hypotheses(rep, tr, idx);
    const RealField win = seam_window(frames[idx.front()].u.grid(), o.window_fraction);
    rep.tolerance = o.roundoff_floor * w.total() * quadrature(pointwise(frames[idx.front()].u, frames[idx.front()].u));
    for (std::size_t b = 1; b < idx.size(); ++b) {
        const std::size_t i2 = idx[b];
        const double lhs = weighted_mass(frames[i2].u, w, tr.rho[i2] + x0, &win);
        for (std::size_t a = 0; a < b; ++a) {
            const std::size_t i1 = idx[a];
            const double c = tr.rho[i1] + o.mu * (tr.rho[i2] - tr.rho[i1]) + x0;
            detail::push_pair(rep, frames[i1].t, frames[i2].t, lhs, weighted_mass(frames[i1].u, w, c, &win), rep.error_budget);
        }
    }
    return rep;
}

/// int u^2(t2) phi_A(x - rho(t2) + mu(rho(t2) - rho(t1)) + x0) <= int u^2(t1) phi_A(x - rho(t1) + x0) + C0/x0^{2r-1}.
inline MonotonicityReport check_left_monotonicity(const std::vector<Frame>& frames, const ModulationTrack& tr,
                                                  const Weight& w, double x0, double c0, MonotonicityOptions o = {}) {
    if (!(x0 > 1.0)) throw DomainError("check_left_monotonicity: x0 must exceed 1");
    if (!(o.mu > 0.0 && o.mu < 1.0)) throw DomainError("check_left_monotonicity: mu must lie in (0, 1)");
    const auto idx = detail::window_indices(detail::frame_times(frames), tr, o);
    MonotonicityReport rep;
    rep.kind = MonotonicityKind::left;
    rep.x0 = x0;
    rep.mu = o.mu;
    rep.r = w.r();
    rep.A = w.A();
    rep.constant = c0;
    rep.window_fraction = o.window_fraction;
    rep.error_budget = c0 / std::pow(x0, 2.0 * w.r() - 1.0);
    detail::check_hypotheses(rep, tr, idx);
    const RealField win = seam_window(frames[idx.front()].u.grid(), o.window_fraction);
    rep.tolerance = o.roundoff_floor * w.total() * quadrature(pointwise(frames[idx.front()].u, frames[idx.front()].u));
    std::vector<double> rhs_cache(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) rhs_cache[a] = weighted_mass(frames[idx[a]].u, w, tr.rho[idx[a]] - x0, &win);
    for (std::size_t b = 1; b < idx.size(); ++b) {
        const std::size_t i2 = idx[b];
        for (std::size_t a = 0; a < b; ++a) {
            const std::size_t i1 = idx[a];
            const double c = tr.rho[i2] - o.mu * (tr.rho[i2] - tr.rho[i1]) - x0;
            detail::push_pair(rep, frames[i1].t, frames[i2].t, weighted_mass(frames[i2].u, w, c, &win), rhs_cache[a],
                              rep.error_budget);
        }
    }
    return rep;
}

namespace detail {

/// int eta^2(y) [phi_A(lambda^{2/a} y - shift) - phi_A(-shift)] dy.
inline double eta_functional(const RealField& eta, const Weight& w, double lambda, double shift, const RealField& win) {
    const auto& g = eta.grid();
    const double s = std::pow(lambda, 2.0 / w.alpha()), base = w.phi(-shift);
    double acc = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        if (win[j] == 0.0) continue;
        acc += eta[j] * eta[j] * (w.phi(s * g.x(j) - shift) - base);
    }
    return acc * g.spacing();
}

/// int_{s1}^{s2} ||eta(s)||^2 / (x0 + mu (s2 - s))^{2r} ds by the trapezoid rule on the track samples.
inline double eta_error_integral(const ModulationTrack& tr, std::size_t i1, std::size_t i2, double x0, double mu, double r) {
    double acc = 0.0;
    auto f = [&](std::size_t i) { return tr.eta_l2[i] * tr.eta_l2[i] / std::pow(x0 + mu * (tr.s[i2] - tr.s[i]), 2.0 * r); };
    for (std::size_t i = i1; i < i2; ++i) acc += 0.5 * (tr.s[i + 1] - tr.s[i]) * (f(i) + f(i + 1));
    return acc;
}

}  // namespace detail

/// Both sides of the eta monotonicity inequality in the rescaled time s.
inline MonotonicityReport check_eta_monotonicity(const ModulationTrack& tr, const Weight& w, double x0, double c,
                                                 MonotonicityOptions o = {}) {
    if (!(x0 > 1.0)) throw DomainError("check_eta_monotonicity: x0 must exceed 1");
    if (!(o.mu > 0.0 && o.mu < 1.0)) throw DomainError("check_eta_monotonicity: mu must lie in (0, 1)");
    if (tr.eta.size() != tr.size()) throw ContractError("check_eta_monotonicity: track was built without eta frames");
    const auto idx = detail::window_indices(tr.t, tr, o);
    MonotonicityReport rep;
    rep.kind = MonotonicityKind::eta;
    rep.x0 = x0;
    rep.mu = o.mu;
    rep.r = w.r();
    rep.A = w.A();
    rep.constant = c;
    rep.window_fraction = o.window_fraction;
    detail::check_hypotheses(rep, tr, idx);
    const RealField win = seam_window(tr.eta.front().grid(), o.window_fraction);
    double eta_scale = 0.0;
    for (std::size_t i : idx) eta_scale = std::max(eta_scale, tr.eta_l2[i] * tr.eta_l2[i]);
    rep.tolerance = o.roundoff_floor * w.total() * eta_scale;
    for (std::size_t b = 1; b < idx.size(); ++b) {
        const std::size_t i2 = idx[b];
        const double lhs = detail::eta_functional(tr.eta[i2], w, tr.lambda[i2], x0, win);
        for (std::size_t a = 0; a < b; ++a) {
            const std::size_t i1 = idx[a];
            const double shift = x0 + o.mu * (tr.s[i2] - tr.s[i1]);
            const double raw = detail::eta_functional(tr.eta[i1], w, tr.lambda[i1], shift, win);
            const double budget = c * detail::eta_error_integral(tr, i1, i2, x0, o.mu, w.r());
            rep.error_budget = std::max(rep.error_budget, budget);
            detail::push_pair(rep, tr.t[i1], tr.t[i2], lhs, raw, budget);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Calibration of the error constants
// ---------------------------------------------------------------------------

/// Error constants frozen from a reference run for one (mu, r, A).
struct MonotonicityCalibration {
    double alpha = 2.0, mu = 0.5, r = 1.5, A = 5.0;
    double c0 = 0.0;     ///< right/left constant
    double c_eta = 0.0;  ///< eta constant
    double safety = 2.0;
    std::vector<double> x0s;
    std::string reference;
};

/// C0 = safety * max over x0 and pairs of deficit * x0^{2r-1}, for both the right and the left functional.
inline double calibrate_c0(const std::vector<Frame>& frames, const ModulationTrack& tr, const Weight& w,
                           const std::vector<double>& x0s, const MonotonicityOptions& o = {}, double safety = 2.0) {
    double worst = 0.0;
    for (double x0 : x0s) {
        const double scale = std::pow(x0, 2.0 * w.r() - 1.0);
        for (const auto& rep : {check_right_monotonicity(frames, tr, w, x0, 0.0, o), check_left_monotonicity(frames, tr, w, x0, 0.0, o)})
            worst = std::max(worst, rep.max_deficit() * scale);
    }
    return safety * worst;
}

/// C = safety * max over x0 and pairs of deficit / int ||eta||^2 (x0 + mu(s2 - s))^{-2r} ds.
inline double calibrate_eta_constant(const ModulationTrack& tr, const Weight& w, const std::vector<double>& x0s,
                                     const MonotonicityOptions& o = {}, double safety = 2.0) {
    double worst = 0.0;
    for (double x0 : x0s) {
        const auto rep = check_eta_monotonicity(tr, w, x0, 1.0, o);
        for (std::size_t k = 0; k < rep.deficit.size(); ++k)
            if (rep.budget[k] > 0.0 && rep.deficit[k] > 0.0) worst = std::max(worst, rep.deficit[k] / rep.budget[k]);
    }
    return safety * worst;
}

/// Least-squares slope of log|y| against log x.
inline double fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ContractError("fit_power_law: need at least two matching samples");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(std::abs(y[i]) > 0.0)) throw DomainError("fit_power_law: non-positive sample");
        const double lx = std::log(x[i]), ly = std::log(std::abs(y[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace dgbo
