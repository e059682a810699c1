#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dgbo/errors.hpp"
#include "dgbo/fft.hpp"
#include "dgbo/grid.hpp"
#include "dgbo/spectral.hpp"

namespace dgbo {

enum class Nonlinearity {
    focusing,    ///< u_t - d_x |D|^a u + |u|^{2a} u_x = 0
    defocusing,  ///< u_t - d_x |D|^a u - |u|^{2a} u_x = 0
};

inline const char* to_string(Nonlinearity s) { return s == Nonlinearity::focusing ? "focusing" : "defocusing"; }

/// +1 for focusing, -1 for defocusing: the sign in front of |u|^{2a+2} in E.
inline double focusing_sign(Nonlinearity s) { return s == Nonlinearity::focusing ? 1.0 : -1.0; }

struct EvolutionConfig {
    double alpha = 2.0;
    Nonlinearity sign = Nonlinearity::focusing;
    double dt = 1e-4;
    double t_end = 1.0;
    double filter_strength = 1.0;  ///< scales the exponent of exp(-36 (|k|/kmax)^36); 0 disables
    int dealias_pad = 2;
    int checkpoint_every = 100;
    double linf_ceiling = 1e6;
    double sobolev_growth_limit = 0.0;  ///< stop when ||u||_{H^{a/2}} exceeds this multiple of its initial value (0: off)
    double tail_threshold = 1e-6;       ///< resolution lost once the top 10% of modes carry this energy fraction
    bool keep_frames = false;           ///< store the state at every checkpoint

    void validate() const {
        require_alpha(alpha, "EvolutionConfig");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("EvolutionConfig: dt must be positive");
        if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("EvolutionConfig: t_end must be positive");
        if (!(filter_strength >= 0.0)) throw ConfigError("EvolutionConfig: filter_strength must be >= 0");
        if (dealias_pad != 1 && dealias_pad != 2) throw ConfigError("EvolutionConfig: dealias_pad must be 1 or 2");
        if (checkpoint_every < 1) throw ConfigError("EvolutionConfig: checkpoint_every must be >= 1");
        if (!(linf_ceiling > 0.0)) throw ConfigError("EvolutionConfig: linf_ceiling must be positive");
    }

    /// dt * kmax^(alpha+1): the largest linear phase rotation per step.
    double stability_margin(const GridSpec& grid) const {
        return dt * std::pow(grid.max_wavenumber(), alpha + 1.0);
    }

    static double default_dt(double alpha, const GridSpec& grid) {
        return 0.2 * std::pow(grid.spacing(), alpha + 1.0) / std::pow(std::numbers::pi, alpha);
    }
};

struct Diagnostics {
    double t = 0.0;
    double mass = 0.0;
    double energy = 0.0;
    double mean = 0.0;
    double sobolev = 0.0;  ///< H^{alpha/2} norm
    double linf = 0.0;
};

enum class RunStatus { completed, diverged, resolution_lost };

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::completed: return "completed";
        case RunStatus::diverged: return "diverged";
        case RunStatus::resolution_lost: return "resolution_lost";
    }
    return "unknown";
}

struct Frame {
    double t = 0.0;
    RealField u;
};

struct RunRecord {
    EvolutionConfig config;
    GridSpec grid;
    std::vector<Diagnostics> samples;
    RealField final_state;
    RunStatus status = RunStatus::completed;
    double status_time = 0.0;  ///< time of divergence / resolution loss, or t_end
    std::string status_reason;
    std::vector<Frame> frames;  ///< filled when config.keep_frames
    double dt_used = 0.0;
};

// ---------------------------------------------------------------------------
// Nonlinear flux
// ---------------------------------------------------------------------------

namespace detail {

/// |u|^{p} u with p = 2 alpha; integer p uses repeated products, otherwise
/// exp(p log|u|) with 0^p = 0.
class PowerFlux {
public:
    explicit PowerFlux(double alpha) : p_(2.0 * alpha) {
        const double r = std::round(p_);
        if (std::abs(p_ - r) < 1e-14) integer_ = static_cast<int>(r);
    }

    double operator()(double u) const {
        const double a = std::abs(u);
        if (integer_ > 0) {
            double v = 1.0;
            for (int i = 0; i < integer_; ++i) v *= a;
            return v * u;
        }
        if (a == 0.0) return 0.0;
        return std::exp(p_ * std::log(a)) * u;
    }

    /// |u|^{p}
    double modulus_power(double u) const {
        const double a = std::abs(u);
        if (integer_ > 0) {
            double v = 1.0;
            for (int i = 0; i < integer_; ++i) v *= a;
            return v;
        }
        return a == 0.0 ? 0.0 : std::exp(p_ * std::log(a));
    }

private:
    double p_;
    int integer_ = 0;
};

}  // namespace detail

/// Spectral-space evaluator of -sign * d_x(|u|^{2a} u)/(2a+1) = -sign |u|^{2a} u_x,
/// with the power evaluated on a `pad`-times finer grid.
class NonlinearFlux {
public:
    NonlinearFlux(const GridSpec& grid, double alpha, int pad, double sign)
        : grid_(grid), alpha_(alpha), pad_(pad), sign_(sign), power_(alpha),
          fine_n_(grid.size() * static_cast<std::size_t>(pad)),
          fine_spec_(fine_n_ / 2 + 1), fine_vals_(fine_n_) {}

    /// out = N(v) on the coarse half spectrum. Records max|u| on the fine grid.
    void operator()(const HalfSpectrum& v, HalfSpectrum& out) const {
        const std::size_t n = grid_.size();
        const std::size_t half = n / 2;
        std::fill(fine_spec_.begin(), fine_spec_.end(), Complex(0.0));
        for (std::size_t m = 0; m < half; ++m) fine_spec_[m] = v[m];
        fine_spec_[half] = (pad_ > 1) ? 0.5 * v[half] : v[half];
        plan_for(fine_n_).backward(fine_spec_.data(), fine_vals_.data());
        const double inv_n = 1.0 / static_cast<double>(n);
        const double c = 1.0 / (2.0 * alpha_ + 1.0);
        double linf = 0.0;
        bool finite = true;
        for (double& u : fine_vals_) {
            u *= inv_n;
            const double a = std::abs(u);
            if (!(a <= std::numeric_limits<double>::max())) finite = false;
            linf = std::max(linf, a);
            u = c * power_(u);
        }
        last_linf_ = finite ? linf : std::numeric_limits<double>::infinity();
        plan_for(fine_n_).forward(fine_vals_.data(), fine_spec_.data());
        const double back = static_cast<double>(n) / static_cast<double>(fine_n_);
        out.resize(half + 1);
        for (std::size_t m = 0; m < half; ++m) {
            const double k = grid_.wavenumber(static_cast<long>(m));
            out[m] = -sign_ * Complex(0.0, k) * (back * fine_spec_[m]);
        }
        out[half] = 0.0;
    }

    double last_linf() const noexcept { return last_linf_; }

private:
    GridSpec grid_;
    double alpha_;
    int pad_;
    double sign_;
    detail::PowerFlux power_;
    std::size_t fine_n_;
    mutable HalfSpectrum fine_spec_;
    mutable std::vector<double> fine_vals_;
    mutable double last_linf_ = 0.0;
};

/// exp(-36 s (|k|/kmax)^36) on the half spectrum.
inline std::vector<double> exponential_filter(const GridSpec& grid, double strength) {
    std::vector<double> f(grid.size() / 2 + 1, 1.0);
    if (strength <= 0.0) return f;
    const double kmax = grid.max_wavenumber();
    for (std::size_t m = 0; m < f.size(); ++m) {
        const double r = grid.wavenumber(static_cast<long>(m)) / kmax;
        f[m] = std::exp(-36.0 * strength * std::pow(r, 36.0));
    }
    return f;
}

/// |u|^{2 alpha} d_x u, computed as d_x(|u|^{2a} u)/(2a+1) with spectral d_x on
/// a `pad`-times finer grid, optionally filtered.
inline RealField nonlinear_term(const RealField& u, double alpha, int pad = 2, double filter_strength = 0.0) {
    require_alpha(alpha, "nonlinear_term");
    if (pad != 1 && pad != 2) throw ConfigError("nonlinear_term: pad must be 1 or 2");
    const GridSpec& g = u.grid();
    NonlinearFlux flux(g, alpha, pad, -1.0);  // -(-1) d_x(...) = +d_x(...)
    HalfSpectrum out;
    flux(forward_half(u.values()), out);
    const auto filt = exponential_filter(g, filter_strength);
    for (std::size_t m = 0; m < out.size(); ++m) out[m] *= filt[m];
    RealField r(g, inverse_half(std::move(out), g.size()));
    if (!r.all_finite()) r.mark_diverged();
    return r;
}

// ---------------------------------------------------------------------------
// Exponential time differencing (fourth order)
// ---------------------------------------------------------------------------

/// ETDRK4 for v_t = c(k) v + N(v) on the half spectrum; phi-function
/// coefficients by contour averaging.
class Etdrk4 {
public:
    Etdrk4(const std::vector<Complex>& symbol, double dt) : dt_(dt) {
        constexpr int kContour = 64;
        const std::size_t n = symbol.size();
        e_.resize(n); e2_.resize(n); q_.resize(n); f1_.resize(n); f2_.resize(n); f3_.resize(n);
        for (std::size_t m = 0; m < n; ++m) {
            const Complex z = dt * symbol[m];
            e_[m] = std::exp(z);
            e2_[m] = std::exp(0.5 * z);
            Complex q = 0.0, a = 0.0, b = 0.0, c = 0.0;
            for (int j = 0; j < kContour; ++j) {
                const double th = 2.0 * std::numbers::pi * (j + 0.5) / kContour;
                const Complex r = z + std::polar(1.0, th);
                const Complex er = std::exp(r);
                const Complex r3 = r * r * r;
                q += (std::exp(0.5 * r) - 1.0) / r;
                a += (-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3;
                b += (2.0 + r + er * (-2.0 + r)) / r3;
                c += (-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3;
            }
            q_[m] = dt * q / double(kContour);
            f1_[m] = dt * a / double(kContour);
            f2_[m] = dt * b / double(kContour);
            f3_[m] = dt * c / double(kContour);
        }
        na_.resize(n); nb_.resize(n); nc_.resize(n); nv_.resize(n); sa_.resize(n); sb_.resize(n); sc_.resize(n);
    }

    double dt() const noexcept { return dt_; }

    template <class Nonlinear>
    void step(HalfSpectrum& v, Nonlinear&& nonlinear) const {
        const std::size_t n = v.size();
        nonlinear(v, nv_);
        for (std::size_t m = 0; m < n; ++m) sa_[m] = e2_[m] * v[m] + q_[m] * nv_[m];
        nonlinear(sa_, na_);
        for (std::size_t m = 0; m < n; ++m) sb_[m] = e2_[m] * v[m] + q_[m] * na_[m];
        nonlinear(sb_, nb_);
        for (std::size_t m = 0; m < n; ++m) sc_[m] = e2_[m] * sa_[m] + q_[m] * (2.0 * nb_[m] - nv_[m]);
        nonlinear(sc_, nc_);
        for (std::size_t m = 0; m < n; ++m)
            v[m] = e_[m] * v[m] + f1_[m] * nv_[m] + 2.0 * f2_[m] * (na_[m] + nb_[m]) + f3_[m] * nc_[m];
    }

private:
    double dt_;
    std::vector<Complex> e_, e2_, q_, f1_, f2_, f3_;
    mutable HalfSpectrum nv_, na_, nb_, nc_, sa_, sb_, sc_;
};

/// i k |k|^alpha on the half spectrum, zero at Nyquist.
inline std::vector<Complex> dispersion_symbol(const GridSpec& grid, double alpha) {
    const FracMultiplier disp(alpha, MultiplierKind::dispersion);
    std::vector<Complex> c(grid.size() / 2 + 1);
    for (std::size_t m = 0; m < c.size(); ++m)
        c[m] = disp(grid.wavenumber(static_cast<long>(m)), m == grid.size() / 2);
    return c;
}

// ---------------------------------------------------------------------------
// Conserved quantities
// ---------------------------------------------------------------------------

/// Mass, energy, mean, H^{alpha/2} norm and sup norm of u.
inline Diagnostics conserved(const RealField& u, double alpha, Nonlinearity sign = Nonlinearity::focusing) {
    require_alpha(alpha, "conserved");
    const detail::PowerFlux power(alpha);
    Diagnostics d;
    const double h = u.grid().spacing();
    double mass = 0.0, mean = 0.0, pot = 0.0;
    for (double v : u.values()) {
        mass += v * v;
        mean += v;
        pot += power.modulus_power(v) * v * v;
    }
    mass *= h;
    mean *= h;
    pot *= h;
    const double grad = homogeneous_seminorm_sq(u, 0.5 * alpha);
    d.mass = mass;
    d.mean = mean;
    d.energy = grad - focusing_sign(sign) * pot / ((alpha + 1.0) * (2.0 * alpha + 1.0));
    d.sobolev = std::sqrt(mass + grad);
    d.linf = u.max_abs();
    return d;
}

// ---------------------------------------------------------------------------
// Evolver
// ---------------------------------------------------------------------------

/// Owns the integrator and its workspaces for one run; not shareable across threads.
class Evolver {
public:
    Evolver(const GridSpec& grid, const EvolutionConfig& cfg)
        : grid_(grid), cfg_(cfg), steps_(count_steps(cfg)), dt_(cfg.t_end / static_cast<double>(steps_)),
          integrator_(dispersion_symbol(grid, cfg.alpha), dt_),
          flux_(grid, cfg.alpha, cfg.dealias_pad, focusing_sign(cfg.sign)),
          filter_(exponential_filter(grid, cfg.filter_strength)) {
        cfg.validate();
    }

    const GridSpec& grid() const noexcept { return grid_; }
    const EvolutionConfig& config() const noexcept { return cfg_; }
    double dt() const noexcept { return dt_; }
    std::size_t step_count() const noexcept { return steps_; }

    /// Advances the half spectrum by one step; the zero mode is untouched.
    void advance(HalfSpectrum& v) const {
        integrator_.step(v, flux_);
        for (std::size_t m = 0; m < v.size(); ++m) v[m] *= filter_[m];
    }

    /// max |u| seen in the last nonlinear evaluation (first stage of the last step).
    double last_linf() const noexcept { return flux_.last_linf(); }

    RealField step(const RealField& u) const {
        require_same_grid(u.grid(), grid_, "Evolver::step");
        HalfSpectrum v = forward_half(u.values());
        advance(v);
        RealField out(grid_, inverse_half(std::move(v), grid_.size()));
        if (!out.all_finite() || out.max_abs() > cfg_.linf_ceiling) out.mark_diverged();
        return out;
    }

    /// Optional observer invoked at every checkpoint with (t, u); return false to stop the run.
    using Observer = std::function<bool(double, const RealField&)>;

    RunRecord evolve(const RealField& u0, const Observer& observer = {}) const {
        require_same_grid(u0.grid(), grid_, "evolve");
        if (!u0.all_finite()) throw ContractError("evolve: initial data is not finite");
        RunRecord rec;
        rec.config = cfg_;
        rec.grid = grid_;
        rec.dt_used = dt_;
        HalfSpectrum v = forward_half(u0.values());
        const Diagnostics d0 = conserved(u0, cfg_.alpha, cfg_.sign);
        rec.samples.push_back(d0);
        if (cfg_.keep_frames) rec.frames.push_back({0.0, u0});
        bool keep_going = observer ? observer(0.0, u0) : true;
        RealField u = u0;
        std::size_t i = 0;
        while (keep_going && i < steps_) {
            advance(v);
            ++i;
            const double t = static_cast<double>(i) * dt_;
            const double linf_fast = std::abs(v[0]) >= 0.0 ? last_linf() : 0.0;
            if (!std::isfinite(linf_fast) || linf_fast > cfg_.linf_ceiling || !std::isfinite(std::abs(v[1]))) {
                rec.status = RunStatus::diverged;
                rec.status_time = t;
                rec.status_reason = "sup norm exceeded ceiling or became non-finite";
                u = RealField(grid_, inverse_half(v, grid_.size()));
                u.mark_diverged();
                break;
            }
            const bool checkpoint = (i % static_cast<std::size_t>(cfg_.checkpoint_every) == 0) || i == steps_;
            if (!checkpoint) continue;
            u = RealField(grid_, inverse_half(v, grid_.size()));
            Diagnostics d = conserved(u, cfg_.alpha, cfg_.sign);
            d.t = t;
            if (!u.all_finite() || d.linf > cfg_.linf_ceiling) {
                rec.status = RunStatus::diverged;
                rec.status_time = t;
                rec.status_reason = "sup norm exceeded ceiling or became non-finite";
                u.mark_diverged();
                break;
            }
            rec.samples.push_back(d);
            if (cfg_.keep_frames) rec.frames.push_back({t, u});
            if (cfg_.sobolev_growth_limit > 0.0 && d.sobolev > cfg_.sobolev_growth_limit * d0.sobolev) {
                rec.status = RunStatus::diverged;
                rec.status_time = t;
                rec.status_reason = "H^{alpha/2} norm growth limit reached";
                break;
            }
            if (spectral_tail_fraction(u) > cfg_.tail_threshold) {
                rec.status = RunStatus::resolution_lost;
                rec.status_time = t;
                rec.status_reason = "spectral tail fraction above threshold";
                break;
            }
            if (observer) keep_going = observer(t, u);
        }
        if (rec.status == RunStatus::completed) {
            rec.status_time = static_cast<double>(i) * dt_;
            if (i == steps_ || rec.samples.back().t != rec.status_time)
                u = RealField(grid_, inverse_half(v, grid_.size()));
        }
        rec.final_state = std::move(u);
        return rec;
    }

private:
    static std::size_t count_steps(const EvolutionConfig& cfg) {
        cfg.validate();
        const double ratio = cfg.t_end / cfg.dt;
        return static_cast<std::size_t>(std::max(1.0, std::ceil(ratio - 1e-9)));
    }

    GridSpec grid_;
    EvolutionConfig cfg_;
    std::size_t steps_;
    double dt_;
    Etdrk4 integrator_;
    NonlinearFlux flux_;
    std::vector<double> filter_;
};

inline RealField step(const RealField& u, const EvolutionConfig& cfg) { return Evolver(u.grid(), cfg).step(u); }

inline RunRecord evolve(const RealField& u0, const EvolutionConfig& cfg) { return Evolver(u0.grid(), cfg).evolve(u0); }

}  // namespace dgbo
