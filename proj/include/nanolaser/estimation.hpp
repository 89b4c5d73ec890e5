#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "dynamics.hpp"
#include "errors.hpp"
#include "least_squares.hpp"
#include "ode.hpp"
#include "parallel.hpp"
#include "spectrogram.hpp"

namespace nanolaser {

// ---------------------------------------------------------------- chirp model

struct ChirpModelParams {
    double alpha_h = 3.05;
    double lambda0 = 920.0;  // nm
    double beta = 0.67;
    double nth_over_p = 0.17;
    double tau_sp = 50.0;     // ps
    double delta_tau = 35.0;  // pulse FWHM, ps
};

inline std::vector<std::string> validate(const ChirpModelParams& p) {
    std::vector<std::string> issues;
    if (!(p.delta_tau > 0.0)) issues.emplace_back("delta_tau: must be > 0");
    if (!(p.tau_sp > 0.0)) issues.emplace_back("tau_sp: must be > 0");
    if (!(p.nth_over_p >= 0.0)) issues.emplace_back("nth_over_p: must be >= 0");
    if (!(p.beta >= 0.0 && p.beta <= 1.0)) issues.emplace_back("beta: must lie in [0, 1]");
    if (!(p.lambda0 > 0.0)) issues.emplace_back("lambda0: must be > 0");
    if (!std::isfinite(p.alpha_h)) issues.emplace_back("alpha_h: must be finite");
    return issues;
}

inline void check(const ChirpModelParams& p) {
    auto issues = validate(p);
    if (!issues.empty()) throw InvalidArgument("invalid chirp model parameters: " + issues.front());
}

inline constexpr double default_chirp_domain = 1.5;

namespace detail {
// alpha lambda^2 / (2 pi c) in pm * ps
inline double chirp_prefactor(const ChirpModelParams& p) {
    return 1000.0 * p.alpha_h * p.lambda0 * p.lambda0 / (2.0 * std::numbers::pi * speed_of_light);
}
inline double chirp_linear(double t, const ChirpModelParams& p) {
    const double s = gaussian_width(p.delta_tau);
    return chirp_prefactor(p) * t / (s * s);
}
inline double chirp_exponential(double t, const ChirpModelParams& p) {
    const double x = t / gaussian_width(p.delta_tau);
    return chirp_prefactor(p) * p.beta * p.nth_over_p / (2.0 * p.tau_sp) * std::exp(x * x);
}
}  // namespace detail

/// Transient wavelength shift in pm for a Gaussian pulse centred at t = 0.
inline double koyama_chirp(double t, const ChirpModelParams& p, double domain_factor = default_chirp_domain) {
    check(p);
    if (!(std::abs(t) <= domain_factor * p.delta_tau))
        throw InvalidArgument("koyama_chirp: |t| exceeds the model domain of " + std::to_string(domain_factor) +
                              " pulse widths");
    return detail::chirp_linear(t, p) + detail::chirp_exponential(t, p);
}

/// Shift accumulated across the central FWHM, pm.
inline double central_redshift(const ChirpModelParams& p) {
    return koyama_chirp(0.5 * p.delta_tau, p) - koyama_chirp(-0.5 * p.delta_tau, p);
}

inline constexpr double transform_limit = 2.0 * std::numbers::ln2 / std::numbers::pi;

inline double tbp_from_alpha(double alpha) {
    if (!(alpha >= 0.0)) throw InvalidArgument("tbp_from_alpha: alpha must be >= 0");
    return transform_limit * std::hypot(1.0, alpha);
}

inline double alpha_from_tbp(double tbp) {
    if (!(tbp >= transform_limit - 1e-12)) throw InvalidArgument("sub-transform-limited input");
    const double r = tbp / transform_limit;
    if (r <= 1.0) return 0.0;
    return std::sqrt((r - 1.0) * (r + 1.0));
}

/// alpha from a measured pulse width [ps] and spectral width [GHz].
inline double alpha_from_widths(double delta_tau_ps, double delta_nu_ghz) {
    if (!(delta_tau_ps > 0.0) || !(delta_nu_ghz > 0.0)) throw InvalidArgument("widths must be > 0");
    return alpha_from_tbp(delta_tau_ps * delta_nu_ghz * 1e-3);
}

// ---------------------------------------------------------------- fit result

struct FitResult {
    std::vector<std::string> names;  // all model parameters, fixed ones included
    std::vector<double> values;
    std::vector<std::string> free;   // order of covariance rows
    Eigen::MatrixXd covariance;
    std::vector<double> std_errors;  // per free parameter
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
    std::vector<std::string> warnings;
    nlohmann::json config;

    double estimate(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return values[i];
        throw InvalidArgument("unknown fit parameter: " + name);
    }
    double std_error(const std::string& name) const {
        for (std::size_t i = 0; i < free.size(); ++i)
            if (free[i] == name) return std_errors[i];
        throw InvalidArgument("parameter not fitted: " + name);
    }
};

namespace detail {
inline std::vector<double> std_errors_of(const Eigen::MatrixXd& c) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < c.rows(); ++i) out.push_back(std::sqrt(std::max(0.0, c(i, i))));
    return out;
}
inline void require_converged(const LMResult& r) {
    if (!r.converged)
        throw FitError(FitError::Kind::did_not_converge,
                       "did not converge after " + std::to_string(r.iterations) + " iterations");
}
}  // namespace detail

// ---------------------------------------------------------------- L-L curves

struct LLPoint {
    double fluence = 0.0;  // uJ/cm^2
    double output = 0.0;   // arbitrary units
};

struct LLCurve {
    std::vector<LLPoint> points;
    double scale = 1.0;  // output units per emitted photon / ps (steady) or per pulse (pulsed)
};

enum class LLMode { steady, pulsed };

inline const char* to_string(LLMode m) { return m == LLMode::steady ? "steady" : "pulsed"; }

inline LLMode ll_mode_from_string(const std::string& s) {
    if (s == "steady") return LLMode::steady;
    if (s == "pulsed") return LLMode::pulsed;
    throw InvalidArgument("unknown L-L mode: " + s + " (expected steady or pulsed)");
}

/// Emission for one fluence. Steady: P/tau_p at the quasi-CW rate.
/// Pulsed: photons per pulse in the last of two 81.8 MHz periods.
inline double ll_output(const LaserParams& p, double fluence, LLMode mode, double pulse_fwhm = 3.0) {
    if (!(fluence >= 0.0)) throw InvalidArgument("fluence must be >= 0");
    if (fluence == 0.0) return 0.0;
    if (mode == LLMode::steady) return steady_state(quasi_cw_rate(p, fluence, pulse_fwhm), p).second / p.tau_p;
    PumpProfile pr{{{50.0, peak_rate_for_fluence(p, fluence)}}, pulse_fwhm, default_period};
    IntegratorConfig cfg;
    cfg.output_dt = 0.25;
    const auto tr = simulate_pulse_response(p, pr, 2, cfg);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < tr.samples.size(); ++k) acc += tr.samples[k].p;
    return acc * tr.dt / p.tau_p;
}

inline LLCurve generate_ll_curve(const LaserParams& p, const std::vector<double>& fluences, LLMode mode,
                                 unsigned threads = 0) {
    check(p);
    if (fluences.empty()) throw InvalidArgument("fluence list is empty");
    for (std::size_t i = 0; i < fluences.size(); ++i) {
        if (!(fluences[i] >= 0.0) || !std::isfinite(fluences[i]))
            throw InvalidArgument("fluences must be finite and >= 0");
        if (i > 0 && !(fluences[i] > fluences[i - 1])) throw InvalidArgument("fluences must be strictly increasing");
    }
    auto out = parallel_map<double>(fluences.size(), threads, [&](std::size_t i) { return ll_output(p, fluences[i], mode); });
    LLCurve c;
    for (std::size_t i = 0; i < fluences.size(); ++i) c.points.push_back({fluences[i], out[i]});
    return c;
}

/// Log-log slope between neighbouring points.
inline std::vector<double> log_log_slopes(const LLCurve& c) {
    std::vector<double> s;
    for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
        const auto& a = c.points[i];
        const auto& b = c.points[i + 1];
        s.push_back(std::log(b.output / a.output) / std::log(b.fluence / a.fluence));
    }
    return s;
}

struct LLFitOptions {
    LLMode mode = LLMode::steady;
    double fluence_cutoff = std::numeric_limits<double>::infinity();  // points above are dropped
    double output_scale = 1.0;  // used when output_scale is not free
    LMOptions lm{};
    unsigned threads = 0;
};

inline constexpr const char* ll_parameter_names[] = {"beta", "eta_pump", "output_scale"};

/// Least squares in log-output space over free ⊆ {beta, eta_pump, output_scale}.
/// The output scale is profiled out in closed form when free.
inline FitResult fit_ll(const LLCurve& data, const LaserParams& initial, const std::vector<std::string>& free,
                        const LLFitOptions& opt = {}) {
    check(initial);
    bool fb = false, fe = false, fs = false;
    for (const auto& f : free) {
        if (f == "beta") fb = true;
        else if (f == "eta_pump") fe = true;
        else if (f == "output_scale") fs = true;
        else throw InvalidArgument("fit_ll: cannot fit '" + f + "' (allowed: beta, eta_pump, output_scale)");
    }
    const int n_free = int(fb) + int(fe) + int(fs);
    if (n_free == 0) throw InvalidArgument("fit_ll: no free parameters");
    if (!(initial.eta_pump > 0.0)) throw InvalidArgument("fit_ll: eta_pump must be > 0");
    if (!(opt.output_scale > 0.0)) throw InvalidArgument("fit_ll: output_scale must be > 0");

    std::vector<double> fl, logy;
    for (std::size_t i = 0; i < data.points.size(); ++i) {
        const auto& pt = data.points[i];
        if (i > 0 && !(pt.fluence > data.points[i - 1].fluence))
            throw InvalidArgument("fit_ll: fluences must be strictly increasing");
        if (pt.fluence > opt.fluence_cutoff) continue;
        if (!(pt.fluence > 0.0) || !(pt.output > 0.0))
            throw InvalidArgument("fit_ll: fluence and output must be > 0 for log-space fitting");
        fl.push_back(pt.fluence);
        logy.push_back(std::log(pt.output));
    }
    const auto m = static_cast<Eigen::Index>(fl.size());
    if (m < 2 * n_free)
        throw FitError(FitError::Kind::insufficient_data,
                       "fit_ll: need at least " + std::to_string(2 * n_free) + " points, have " + std::to_string(m));

    auto model_log = [&](double beta, double eta) {
        LaserParams p = initial;
        p.beta = beta;
        p.eta_pump = eta;
        auto out = parallel_map<double>(fl.size(), opt.threads, [&](std::size_t i) { return ll_output(p, fl[i], opt.mode); });
        Eigen::VectorXd r(m);
        for (Eigen::Index i = 0; i < m; ++i) r[i] = std::log(out[static_cast<std::size_t>(i)]) - logy[static_cast<std::size_t>(i)];
        return r;
    };

    // packed LM vector: [beta] [ln eta]
    constexpr double beta_floor = 1e-6;
    const double ln_eta0 = std::log(initial.eta_pump);
    auto unpack = [&](const Eigen::VectorXd& x, double& beta, double& eta) {
        Eigen::Index k = 0;
        beta = fb ? x[k++] : initial.beta;
        eta = fe ? std::exp(x[k++]) : initial.eta_pump;
    };
    auto offset = [&](const Eigen::VectorXd& r) { return fs ? -r.mean() : std::log(opt.output_scale); };

    const Eigen::Index nx = int(fb) + int(fe);
    LMResult lm;
    double beta = initial.beta, eta = initial.eta_pump;
    if (nx > 0) {
        Eigen::VectorXd x0(nx), lo(nx), hi(nx), typ(nx);
        Eigen::Index k = 0;
        if (fb) {
            x0[k] = std::clamp(initial.beta, beta_floor, 1.0);
            lo[k] = beta_floor;
            hi[k] = 1.0;
            typ[k++] = 0.1;
        }
        if (fe) {
            x0[k] = ln_eta0;
            lo[k] = ln_eta0 - 30.0;
            hi[k] = ln_eta0 + 30.0;
            typ[k++] = 1.0;
        }
        auto resid = [&](const Eigen::VectorXd& x) {
            double b, e;
            unpack(x, b, e);
            Eigen::VectorXd r = model_log(b, e);
            return Eigen::VectorXd(r.array() + offset(r));
        };
        LevenbergMarquardt solver(resid, lo, hi, typ);
        lm = solver.solve(x0, opt.lm);
        detail::require_converged(lm);
        unpack(lm.x, beta, eta);
    }
    Eigen::VectorXd r0 = model_log(beta, eta);
    const double ln_scale = offset(r0);
    Eigen::VectorXd r = r0.array() + ln_scale;
    const double scale = std::exp(ln_scale);

    FitResult res;
    res.names = {"beta", "eta_pump", "output_scale"};
    res.values = {beta, eta, scale};
    for (const char* nm : ll_parameter_names)
        if (std::find(free.begin(), free.end(), nm) != free.end()) res.free.emplace_back(nm);
    res.residual_norm = r.norm();
    res.iterations = lm.iterations;
    res.converged = true;
    res.history = lm.history;

    // covariance in natural units on the un-profiled residual
    {
        const Eigen::Index nf = n_free;
        Eigen::VectorXd x(nf), lo(nf), hi(nf), typ(nf);
        Eigen::Index k = 0;
        if (fb) { x[k] = beta; lo[k] = 0.0; hi[k] = 1.0; typ[k++] = 0.1; }
        if (fe) { x[k] = eta; lo[k] = 0.0; hi[k] = std::numeric_limits<double>::max(); typ[k++] = eta; }
        if (fs) { x[k] = scale; lo[k] = 0.0; hi[k] = std::numeric_limits<double>::max(); typ[k++] = scale; }
        auto full = [&](const Eigen::VectorXd& v) {
            Eigen::Index j = 0;
            const double b = fb ? v[j++] : beta;
            const double e = fe ? v[j++] : eta;
            const double s = fs ? v[j++] : scale;
            Eigen::VectorXd rr = model_log(std::max(b, beta_floor), e);
            return Eigen::VectorXd(rr.array() + std::log(s));
        };
        LevenbergMarquardt jac(full, lo, hi, typ);
        const Eigen::MatrixXd j = jac.jacobian(x, full(x));
        res.covariance = LevenbergMarquardt::covariance(j, r.squaredNorm());
        res.std_errors = detail::std_errors_of(res.covariance);
    }
    if (fb && (beta <= beta_floor * 1.0000001 || beta >= 1.0)) res.warnings.emplace_back("beta estimate at its bound");

    res.config = {{"fit", "ll"},
                  {"mode", to_string(opt.mode)},
                  {"free", res.free},
                  {"points_used", m},
                  {"fluence_cutoff", std::isfinite(opt.fluence_cutoff) ? nlohmann::json(opt.fluence_cutoff) : nlohmann::json(nullptr)},
                  {"max_iterations", opt.lm.max_iterations},
                  {"initial", {{"beta", initial.beta}, {"eta_pump", initial.eta_pump}, {"output_scale", opt.output_scale}}}};
    return res;
}

// ---------------------------------------------------------------- chirp fit

struct ChirpFitOptions {
    bool fit_alpha = false;
    bool use_weights = false;
    double time_offset = 0.0;  // subtracted from trace times (pulse centre)
    double domain_factor = default_chirp_domain;
    LMOptions lm{};
};

inline FitResult fit_chirp(const ChirpTrace& trace, const ChirpModelParams& fixed, const ChirpFitOptions& opt = {}) {
    check(fixed);
    if (trace.delta_lambda_pm.size() != trace.times.size())
        throw InvalidArgument("fit_chirp: trace columns differ in length");
    const bool weighted = opt.use_weights && !trace.weight.empty();
    if (weighted && trace.weight.size() != trace.times.size())
        throw InvalidArgument("fit_chirp: weight column differs in length");

    std::vector<double> t, y, w;
    const double lim = opt.domain_factor * fixed.delta_tau;
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        const double tt = trace.times[i] - opt.time_offset;
        if (std::abs(tt) > lim) continue;
        t.push_back(tt);
        y.push_back(trace.delta_lambda_pm[i]);
        w.push_back(weighted ? std::sqrt(std::max(0.0, trace.weight[i])) : 1.0);
    }
    const auto m = static_cast<Eigen::Index>(t.size());
    if (m < 5)
        throw FitError(FitError::Kind::insufficient_data,
                       "fit_chirp: need at least 5 points inside the model domain, have " + std::to_string(m));

    const Eigen::Index nx = opt.fit_alpha ? 2 : 1;
    auto params_of = [&](const Eigen::VectorXd& x) {
        ChirpModelParams p = fixed;
        p.nth_over_p = x[0];
        if (opt.fit_alpha) p.alpha_h = x[1];
        return p;
    };
    auto resid = [&](const Eigen::VectorXd& x) {
        const auto p = params_of(x);
        Eigen::VectorXd r(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            r[i] = w[k] * (detail::chirp_linear(t[k], p) + detail::chirp_exponential(t[k], p) - y[k]);
        }
        return r;
    };
    Eigen::VectorXd x0(nx), lo(nx), hi(nx), typ(nx);
    x0[0] = std::max(0.0, fixed.nth_over_p);
    lo[0] = 0.0;
    hi[0] = std::numeric_limits<double>::max();
    typ[0] = 0.1;
    if (opt.fit_alpha) {
        x0[1] = std::max(0.0, fixed.alpha_h);
        lo[1] = 0.0;
        hi[1] = std::numeric_limits<double>::max();
        typ[1] = 1.0;
    }
    LevenbergMarquardt solver(resid, lo, hi, typ);
    const LMResult lm = solver.solve(x0, opt.lm);
    detail::require_converged(lm);
    const auto best = params_of(lm.x);

    FitResult res;
    res.names = {"nth_over_p", "alpha_h"};
    res.values = {best.nth_over_p, best.alpha_h};
    res.free = {"nth_over_p"};
    if (opt.fit_alpha) res.free.emplace_back("alpha_h");
    res.covariance = lm.covariance;
    res.std_errors = detail::std_errors_of(lm.covariance);
    res.residual_norm = std::sqrt(lm.cost);
    res.iterations = lm.iterations;
    res.converged = true;
    res.history = lm.history;
    if (opt.fit_alpha)
        res.warnings.emplace_back(
            "alpha_h fitted jointly with nth_over_p: alpha is set only by the odd part of the trace and scales with the "
            "assumed pulse width; prefer the time-bandwidth estimate");
    res.config = {{"fit", "chirp"},
                  {"free", res.free},
                  {"points_used", m},
                  {"use_weights", weighted},
                  {"time_offset", opt.time_offset},
                  {"domain_factor", opt.domain_factor},
                  {"max_iterations", opt.lm.max_iterations},
                  {"fixed",
                   {{"alpha_h", fixed.alpha_h},
                    {"lambda0", fixed.lambda0},
                    {"beta", fixed.beta},
                    {"nth_over_p", fixed.nth_over_p},
                    {"tau_sp", fixed.tau_sp},
                    {"delta_tau", fixed.delta_tau}}}};
    return res;
}

}  // namespace nanolaser
