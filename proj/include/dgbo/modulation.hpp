#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dgbo/dynamics.hpp"
#include "dgbo/errors.hpp"
#include "dgbo/ground_state.hpp"
#include "dgbo/linearized.hpp"
#include "dgbo/spectral.hpp"

namespace dgbo {

struct ModulationOptions {
    double closeness = 0.3;       ///< epsilon_0 relative to ||Q||_{H^{a/2}}
    int max_newton = 50;
    double tol_abs = 1e-12;       ///< |G| target when eta is negligible
    double tol_rel = 1e-10;       ///< |G| target relative to ||eta||_{L2}
    bool scan_fallback = true;    ///< grid scan when Newton stalls
    bool throw_if_far = true;     ///< ClosenessError instead of an invalid state
};

struct ModulationState {
    double lambda = 1.0;
    double rho = 0.0;
    RealField eta;
    std::array<double, 2> ortho_residuals{};  ///< <eta, Q'>, <eta, chi0>
    double eta_l2 = 0.0;
    double eta_sobolev = 0.0;
    double eta_weighted = 0.0;  ///< (int eta^2 / (1 + y^2))^{1/2}
    bool valid = false;
    int iterations = 0;
    bool used_scan = false;
};

/// Resampler for v(y) = lambda^{1/a} u(lambda^{2/a} y + rho) on the reference grid.
/// Points farther than one half-period from rho are set to zero, so the
/// periodic copies of u are never counted twice.
class ScaledSampler {
public:
    ScaledSampler(const RealField& u, const GridSpec& reference, double alpha)
        : alpha_(alpha), ref_(reference), period_half_(u.grid().half_length()), u_(u), ux_(derivative(u)) {}

    /// (v, v_y) at (lambda, rho).
    std::pair<RealField, RealField> sample(double lambda, double rho, bool with_derivative) const {
        const double s = std::pow(lambda, 2.0 / alpha_), amp = std::pow(lambda, 1.0 / alpha_);
        RealField v(ref_), vy(ref_);
        for (std::size_t j = 0; j < ref_.size(); ++j) {
            const double dx = s * ref_.x(j);
            if (std::abs(dx) >= period_half_) continue;
            v[j] = amp * u_(dx + rho);
            if (with_derivative) vy[j] = amp * s * ux_(dx + rho);
        }
        return {std::move(v), std::move(vy)};
    }

private:
    double alpha_;
    GridSpec ref_;
    double period_half_;
    TrigInterpolant u_;
    TrigInterpolant ux_;
};

/// Decomposes near-soliton fields as u = lambda^{-1/a}[Q + eta](lambda^{-2/a}(x - rho))
/// with eta orthogonal to Q' and chi0.
class Modulator {
public:
    Modulator(const GroundState& gs, RealField chi0, ModulationOptions opt = {})
        : gs_(gs), chi0_(std::move(chi0)), dq_(derivative(gs.Q)), y_(RealField::from_function(gs.grid, [](double y) { return y; })),
          opt_(opt), q_norm_(h_alpha_half_norm(gs.Q, gs.alpha)) {
        require_same_grid(chi0_.grid(), gs.grid, "Modulator");
    }

    Modulator(const GroundState& gs, const SpectrumReport& rep, ModulationOptions opt = {}) : Modulator(gs, rep.chi0, opt) {}

    const GroundState& ground_state() const noexcept { return gs_; }
    const RealField& chi0() const noexcept { return chi0_; }
    const ModulationOptions& options() const noexcept { return opt_; }

    /// Amplitude/argmax starting point: lambda = (Q(0)/max|u|)^a, rho at the peak.
    std::pair<double, double> default_guess(const RealField& u) const {
        const std::size_t j = u.argmax_abs();
        const double peak = std::abs(u[j]);
        if (!(peak > 0.0)) throw ClosenessError("decompose: zero field");
        return {std::pow(gs_.Q[gs_.grid.origin_index()] / peak, gs_.alpha), u.grid().x(j)};
    }

    /// G(lambda, rho) = (<eta, Q'>, <eta, chi0>).
    std::array<double, 2> residual(const ScaledSampler& s, double lambda, double rho) const {
        RealField eta = s.sample(lambda, rho, false).first - gs_.Q;
        return {inner(eta, dq_), inner(eta, chi0_)};
    }

    ModulationState decompose(const RealField& u, std::optional<std::pair<double, double>> guess = std::nullopt) const {
        if (!u.all_finite()) throw ContractError("decompose: field is not finite");
        const ScaledSampler sampler(u, gs_.grid, gs_.alpha);
        auto [lambda, rho] = guess ? *guess : default_guess(u);
        if (!(lambda > 0.0)) throw ContractError("decompose: lambda guess must be positive");

        ModulationState st;
        bool converged = false;
        auto gnorm = [](const std::array<double, 2>& g) { return std::hypot(g[0], g[1]); };
        for (int it = 0; it < opt_.max_newton; ++it) {
            auto [v, vy] = sampler.sample(lambda, rho, true);
            RealField eta = v - gs_.Q;
            std::array<double, 2> g{inner(eta, dq_), inner(eta, chi0_)};
            st.iterations = it;
            if (gnorm(g) <= std::max(opt_.tol_abs, opt_.tol_rel * l2_norm(eta))) {
                converged = true;
                break;
            }
            // dv/dlambda = Lambda v / lambda, dv/drho = lambda^{-2/a} v_y
            RealField dl(gs_.grid), dr = vy * std::pow(lambda, -2.0 / gs_.alpha);
            for (std::size_t j = 0; j < dl.size(); ++j) dl[j] = (v[j] + 2.0 * y_[j] * vy[j]) / (gs_.alpha * lambda);
            const double a = inner(dl, dq_), b = inner(dr, dq_), c = inner(dl, chi0_), d = inner(dr, chi0_);
            const double det = a * d - b * c;
            if (!(std::abs(det) > 0.0) || !std::isfinite(det)) break;
            const double step_l = (d * g[0] - b * g[1]) / det;
            const double step_r = (-c * g[0] + a * g[1]) / det;
            // damped update: halve until |G| decreases and lambda stays positive
            double t = 1.0;
            const double g0 = gnorm(g);
            bool accepted = false;
            for (int k = 0; k < 30; ++k, t *= 0.5) {
                const double nl = lambda - t * step_l, nr = rho - t * step_r;
                if (!(nl > 0.0)) continue;
                if (gnorm(residual(sampler, nl, nr)) < g0 || k == 29) {
                    lambda = nl;
                    rho = nr;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
        }
        if (!converged) {
            if (!opt_.scan_fallback)
                throw DecompositionError("decompose: Newton did not converge in " + std::to_string(opt_.max_newton) + " iterations");
            auto [sl, sr] = scan(sampler, lambda, rho);
            lambda = sl;
            rho = sr;
            st.used_scan = true;
        }
        finish(st, sampler, lambda, rho);
        if (st.used_scan && gnorm(st.ortho_residuals) > std::max(1e-9, 1e-8 * st.eta_l2))
            throw DecompositionError("decompose: Newton and the fallback scan both failed (|G| = " +
                                     std::to_string(gnorm(st.ortho_residuals)) + ")");
        if (!st.valid && opt_.throw_if_far)
            throw ClosenessError("decompose: ||eta||_{H^{a/2}} = " + std::to_string(st.eta_sobolev) +
                                 " exceeds the closeness ceiling " + std::to_string(opt_.closeness * q_norm_));
        return st;
    }

    /// Brute-force minimization of |G|^2 on a shrinking (lambda, rho) grid around a guess.
    std::pair<double, double> scan(const ScaledSampler& s, double lambda, double rho, double lambda_window = 0.3,
                                   double rho_window = 2.0) const {
        constexpr int kSide = 11;
        for (int round = 0; round < 40 && (lambda_window > 1e-13 * lambda || rho_window > 1e-13); ++round) {
            double best = std::numeric_limits<double>::infinity(), bl = lambda, br = rho;
            for (int i = 0; i < kSide; ++i) {
                const double l = lambda + lambda_window * (2.0 * i / (kSide - 1) - 1.0);
                if (!(l > 0.0)) continue;
                for (int j = 0; j < kSide; ++j) {
                    const double r = rho + rho_window * (2.0 * j / (kSide - 1) - 1.0);
                    const auto g = residual(s, l, r);
                    const double v = g[0] * g[0] + g[1] * g[1];
                    if (v < best) {
                        best = v;
                        bl = l;
                        br = r;
                    }
                }
            }
            lambda = bl;
            rho = br;
            lambda_window *= 0.4;
            rho_window *= 0.4;
        }
        return {lambda, rho};
    }

private:
    void finish(ModulationState& st, const ScaledSampler& s, double lambda, double rho) const {
        st.lambda = lambda;
        st.rho = rho;
        st.eta = s.sample(lambda, rho, false).first - gs_.Q;
        st.ortho_residuals = {inner(st.eta, dq_), inner(st.eta, chi0_)};
        st.eta_l2 = l2_norm(st.eta);
        st.eta_sobolev = h_alpha_half_norm(st.eta, gs_.alpha);
        double w = 0.0;
        for (std::size_t j = 0; j < st.eta.size(); ++j) w += st.eta[j] * st.eta[j] / (1.0 + y_[j] * y_[j]);
        st.eta_weighted = std::sqrt(w * gs_.grid.spacing());
        st.valid = st.eta_sobolev < opt_.closeness * q_norm_;
    }

    GroundState gs_;
    RealField chi0_;
    RealField dq_;
    RealField y_;
    ModulationOptions opt_;
    double q_norm_;
};

// ---------------------------------------------------------------------------
// Tracks
// ---------------------------------------------------------------------------

struct ModulationTrack {
    std::vector<double> t, s, lambda, rho, eta_l2, eta_sobolev, eta_weighted;
    std::vector<double> dlambda_rel;  ///< lambda_s / lambda
    std::vector<double> drho_rel;     ///< rho_s / lambda^{2/a} - 1
    std::vector<double> ortho_max;    ///< max |<eta,Q'>|, |<eta,chi0>| per frame
    std::vector<RealField> eta;       ///< kept when requested
    std::optional<std::size_t> truncated_at;  ///< index of the first frame that failed to decompose
    std::string truncation_reason;
    double fitted_c = 0.0;            ///< max (|lambda_s/lambda| + |rho_s/lambda^{2/a} - 1|) / ||eta||
    double fitted_c_weighted = 0.0;   ///< same against the weighted eta norm
    double alpha = 2.0;

    std::size_t size() const noexcept { return t.size(); }
};

/// d/ds of f sampled at increasing s: centered inside, one-sided at the ends.
inline std::vector<double> finite_difference(const std::vector<double>& s, const std::vector<double>& f) {
    const std::size_t n = s.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    d[0] = (f[1] - f[0]) / (s[1] - s[0]);
    d[n - 1] = (f[n - 1] - f[n - 2]) / (s[n - 1] - s[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (s[i + 1] - s[i - 1]);
    return d;
}

/// Decomposes each frame with warm starts, integrates s = int dt / lambda^{2+2/a}
/// by the trapezoid rule and forms the parameter-derivative estimates.
inline ModulationTrack track(const std::vector<Frame>& frames, const Modulator& mod, bool keep_eta = false) {
    const double alpha = mod.ground_state().alpha;
    ModulationTrack tr;
    tr.alpha = alpha;
    std::optional<std::pair<double, double>> guess;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        ModulationState st;
        try {
            if (frames[i].u.diverged() || !frames[i].u.all_finite()) throw DecompositionError("frame flagged diverged");
            st = mod.decompose(frames[i].u, guess);
        } catch (const Error& e) {
            tr.truncated_at = i;
            tr.truncation_reason = e.what();
            break;
        }
        guess = std::make_pair(st.lambda, st.rho);
        tr.t.push_back(frames[i].t);
        tr.lambda.push_back(st.lambda);
        tr.rho.push_back(st.rho);
        tr.eta_l2.push_back(st.eta_l2);
        tr.eta_sobolev.push_back(st.eta_sobolev);
        tr.eta_weighted.push_back(st.eta_weighted);
        tr.ortho_max.push_back(std::max(std::abs(st.ortho_residuals[0]), std::abs(st.ortho_residuals[1])));
        if (keep_eta) tr.eta.push_back(std::move(st.eta));
    }
    const std::size_t n = tr.t.size();
    tr.s.assign(n, 0.0);
    const double p = 2.0 + 2.0 / alpha;
    for (std::size_t i = 1; i < n; ++i)
        tr.s[i] = tr.s[i - 1] + 0.5 * (tr.t[i] - tr.t[i - 1]) * (std::pow(tr.lambda[i], -p) + std::pow(tr.lambda[i - 1], -p));
    std::vector<double> loglam(n);
    for (std::size_t i = 0; i < n; ++i) loglam[i] = std::log(tr.lambda[i]);
    tr.dlambda_rel = finite_difference(tr.s, loglam);
    const auto rho_s = finite_difference(tr.s, tr.rho);
    tr.drho_rel.resize(n);
    for (std::size_t i = 0; i < n; ++i) tr.drho_rel[i] = rho_s[i] / std::pow(tr.lambda[i], 2.0 / alpha) - 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lhs = std::abs(tr.dlambda_rel[i]) + std::abs(tr.drho_rel[i]);
        if (tr.eta_l2[i] > 1e-10) tr.fitted_c = std::max(tr.fitted_c, lhs / tr.eta_l2[i]);
        if (tr.eta_weighted[i] > 1e-10) tr.fitted_c_weighted = std::max(tr.fitted_c_weighted, lhs / tr.eta_weighted[i]);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Mass excess and renormalization
// ---------------------------------------------------------------------------

/// int u^2 - int Q^2
inline double beta(const RealField& u, const GroundState& gs) { return quadrature(pointwise(u, u)) - gs.mass(); }

struct Renormalized {
    RealField field;
    double lambda_bar = 1.0;
    double gradient_mismatch = 0.0;  ///< relative, of ||D^{a/2} u_bar|| against ||D^{a/2} Q||
    double mass_mismatch = 0.0;      ///< relative, of int u_bar^2 against int u^2
};

/// u_bar(x) = lambda_bar^{1/a} u(lambda_bar^{2/a} x) on the reference grid with
/// lambda_bar = ||D^{a/2} Q|| / ||D^{a/2} u||.
inline Renormalized renormalize(const RealField& u, const GroundState& gs, double tolerance = 1e-8) {
    const double a = gs.alpha;
    const double gu = std::sqrt(homogeneous_seminorm_sq(u, 0.5 * a));
    if (!(gu > 0.0)) throw DomainError("renormalize: ||D^{a/2} u|| vanishes");
    const double gq = std::sqrt(homogeneous_seminorm_sq(gs.Q, 0.5 * a));
    Renormalized r;
    r.lambda_bar = gq / gu;
    const ScaledSampler sampler(u, gs.grid, a);
    r.field = sampler.sample(r.lambda_bar, 0.0, false).first;
    const double mu = quadrature(pointwise(u, u));
    r.gradient_mismatch = std::abs(std::sqrt(homogeneous_seminorm_sq(r.field, 0.5 * a)) - gq) / gq;
    r.mass_mismatch = std::abs(quadrature(pointwise(r.field, r.field)) - mu) / mu;
    if (r.gradient_mismatch > tolerance || r.mass_mismatch > tolerance)
        throw ResolutionError("renormalize: rescaled field not captured by the reference grid (gradient mismatch " +
                              std::to_string(r.gradient_mismatch) + ", mass mismatch " + std::to_string(r.mass_mismatch) + ")");
    return r;
}

}  // namespace dgbo
