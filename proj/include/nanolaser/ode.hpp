#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"

namespace nanolaser {

struct IntegratorConfig {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    double output_dt = 0.25;
};

inline void check(const IntegratorConfig& c) {
    if (!(c.rel_tol > 0.0)) throw InvalidArgument("integrator: rel_tol must be > 0");
    if (!(c.abs_tol > 0.0)) throw InvalidArgument("integrator: abs_tol must be > 0");
    if (!(c.max_step > 0.0)) throw InvalidArgument("integrator: max_step must be > 0");
    if (!(c.output_dt > 0.0) || !std::isfinite(c.output_dt)) throw InvalidArgument("integrator: output_dt must be > 0");
}

struct IntegratorStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t evaluations = 0;
};

template <std::size_t Dim>
struct Solution {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<std::array<double, Dim>> samples;
    std::array<double, Dim> final_state{};
    IntegratorStats stats;
};

namespace dp45 {
// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
// Hairer's dense output coefficients
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

// PI step controller
inline constexpr double safety = 0.9;
inline constexpr double beta = 0.04;
inline constexpr double expo1 = 0.2 - beta * 0.75;
inline constexpr double min_factor = 0.2;
inline constexpr double max_factor = 10.0;

inline constexpr double min_step = 1e-9;
inline constexpr double blowup = 1e12;
inline constexpr double negative_slack = 1e-12;
}  // namespace dp45

/// Adaptive Dormand-Prince 5(4) with dense output onto the grid t0 + k*output_dt.
/// Components flagged in `nonneg` follow the clamping rule: values in
/// [-1e-12, 0) become 0, anything lower is an error.
/// With `sample == false` only the final state is kept.
template <std::size_t Dim, class F>
Solution<Dim> integrate_system(F&& f, std::array<double, Dim> y, double t_start, double t_end,
                               const IntegratorConfig& cfg, const std::array<bool, Dim>& nonneg = {},
                               bool sample = true) {
    using Vec = std::array<double, Dim>;
    using namespace dp45;
    check(cfg);
    if (!(t_end > t_start)) throw InvalidArgument("integrate: t_end must be > t_start");
    for (double v : y)
        if (!std::isfinite(v)) throw InvalidArgument("integrate: non-finite initial state");

    Solution<Dim> sol;
    sol.t0 = t_start;
    sol.dt = cfg.output_dt;
    const double span = t_end - t_start;
    const auto n_out = static_cast<std::size_t>(std::floor(span / cfg.output_dt * (1.0 + 1e-12))) + 1;
    if (sample) sol.samples.reserve(n_out);

    auto eval = [&](double t, const Vec& x) {
        ++sol.stats.evaluations;
        return f(t, x);
    };
    auto enforce = [&](Vec& x, double t) {
        for (std::size_t i = 0; i < Dim; ++i) {
            if (!std::isfinite(x[i]) || std::abs(x[i]) > blowup)
                throw NumericalError("state blow-up at t = " + std::to_string(t));
            if (nonneg[i] && x[i] < 0.0) {
                if (x[i] < -negative_slack)
                    throw NumericalError("state blow-up: negative component " + std::to_string(i) + " = " + std::to_string(x[i]) + " at t = " + std::to_string(t));
                x[i] = 0.0;
            }
        }
    };
    auto rms = [&](const Vec& v, const Vec& sc) {
        double s = 0.0;
        for (std::size_t i = 0; i < Dim; ++i) s += (v[i] / sc[i]) * (v[i] / sc[i]);
        return std::sqrt(s / static_cast<double>(Dim));
    };

    enforce(y, t_start);
    Vec k1 = eval(t_start, y);

    // initial step guess
    double h;
    {
        Vec sc;
        for (std::size_t i = 0; i < Dim; ++i) sc[i] = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
        const double dn0 = rms(y, sc);
        const double dn1 = rms(k1, sc);
        double h0 = (dn0 < 1e-10 || dn1 < 1e-10) ? 1e-6 : 0.01 * dn0 / dn1;
        h0 = std::min({h0, cfg.max_step, span});
        Vec y1;
        for (std::size_t i = 0; i < Dim; ++i) y1[i] = y[i] + h0 * k1[i];
        Vec f1 = eval(t_start + h0, y1);
        Vec df;
        for (std::size_t i = 0; i < Dim; ++i) df[i] = f1[i] - k1[i];
        const double dn2 = rms(df, sc) / h0;
        const double der = std::max(std::abs(dn2), dn1);
        const double h1 = der <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / der, 0.2);
        h = std::min({100.0 * h0, h1, cfg.max_step});
    }

    double t = t_start;
    double facold = 1e-4;
    std::size_t next_out = 0;
    auto out_time = [&](std::size_t k) { return t_start + static_cast<double>(k) * cfg.output_dt; };
    if (sample) {
        sol.samples.push_back(y);
        next_out = 1;
    }

    Vec k2, k3, k4, k5, k6, k7, yt, ynew, err;
    bool last = false;
    while (!last) {
        if (h < min_step) throw NumericalError("step underflow at t = " + std::to_string(t));
        if (t + 1.01 * h >= t_end) {
            h = t_end - t;
            last = true;
        }
        for (std::size_t i = 0; i < Dim; ++i) yt[i] = y[i] + h * a21 * k1[i];
        k2 = eval(t + c2 * h, yt);
        for (std::size_t i = 0; i < Dim; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        k3 = eval(t + c3 * h, yt);
        for (std::size_t i = 0; i < Dim; ++i) yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = eval(t + c4 * h, yt);
        for (std::size_t i = 0; i < Dim; ++i)
            yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = eval(t + c5 * h, yt);
        for (std::size_t i = 0; i < Dim; ++i)
            yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        const double tph = last ? t_end : t + h;
        k6 = eval(tph, yt);
        for (std::size_t i = 0; i < Dim; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        k7 = eval(tph, ynew);

        double e = 0.0;
        for (std::size_t i = 0; i < Dim; ++i) {
            err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            e = std::max(e, std::abs(err[i]) / sc);
        }
        if (!std::isfinite(e)) e = std::numeric_limits<double>::max();

        const double fac11 = std::pow(e, expo1);
        if (e <= 1.0) {
            double fac = fac11 / std::pow(facold, beta);
            fac = std::clamp(fac / safety, 1.0 / max_factor, 1.0 / min_factor);
            const double hnew = std::min(h / fac, cfg.max_step);
            facold = std::max(e, 1e-4);
            ++sol.stats.accepted;

            if (sample) {
                Vec r2, r3, r4, r5;
                for (std::size_t i = 0; i < Dim; ++i) {
                    const double ydiff = ynew[i] - y[i];
                    const double bspl = h * k1[i] - ydiff;
                    r2[i] = ydiff;
                    r3[i] = bspl;
                    r4[i] = ydiff - h * k7[i] - bspl;
                    r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
                }
                while (next_out < n_out && (last || out_time(next_out) <= tph)) {
                    const double th = std::min(1.0, (out_time(next_out) - t) / h);
                    const double th1 = 1.0 - th;
                    Vec s;
                    for (std::size_t i = 0; i < Dim; ++i)
                        s[i] = y[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
                    enforce(s, out_time(next_out));
                    sol.samples.push_back(s);
                    ++next_out;
                }
            }

            y = ynew;
            enforce(y, tph);
            k1 = (y == ynew) ? k7 : eval(tph, y);
            t = tph;
            h = hnew;
        } else {
            h /= std::min(1.0 / min_factor, fac11 / safety);
            ++sol.stats.rejected;
            last = false;
        }
    }
    sol.final_state = y;
    return sol;
}

/// Uniformly sampled (N, P, phi) with the pump alongside.
struct Trajectory {
    double t0 = 0.0;
    double dt = 0.25;
    std::vector<State> samples;
    std::vector<double> pump;

    std::size_t size() const { return samples.size(); }
    double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
    double t_end() const { return samples.empty() ? t0 : time(samples.size() - 1); }
};

template <class F>
Trajectory integrate(F&& rhs, const State& y0, double t_start, double t_end, const IntegratorConfig& cfg) {
    auto sys = [&](double t, const std::array<double, 3>& x) {
        const State d = rhs(t, State{x[0], x[1], x[2]});
        return std::array<double, 3>{d.n, d.p, d.phi};
    };
    auto sol = integrate_system<3>(sys, {y0.n, y0.p, y0.phi}, t_start, t_end, cfg, {true, true, false});
    Trajectory tr;
    tr.t0 = sol.t0;
    tr.dt = sol.dt;
    tr.samples.reserve(sol.samples.size());
    for (const auto& s : sol.samples) tr.samples.push_back({s[0], s[1], s[2]});
    return tr;
}

/// Step cap: half the pump FWHM, and inside the explicit stability region of
/// the photon equation (fastest rate 1/tau_p + Gamma g0 N_tr at N = 0).
inline double stable_step(const LaserParams& p, const PumpProfile& pr) {
    const double fastest = 1.0 / p.tau_p + p.gamma_conf * p.g0 * p.n_tr;
    return std::min(0.5 * pr.pulse_fwhm, 2.0 / fastest);
}

/// Tail after the last pulse for a non-repeating profile.
inline double single_shot_span(const LaserParams& p, const PumpProfile& pr) {
    const double last = pr.pulses.empty() ? 0.0 : pr.pulses.back().arrival_time;
    return std::max(0.0, last) + 10.0 * p.tau_sp + 3.0 * pr.pulse_fwhm;
}

/// Response of the dark laser to the pump. With a repetition period the first
/// n_periods - 1 periods are discarded and the last one is reported with
/// times relative to its start, up to report_until.
inline Trajectory simulate_pulse_response(const LaserParams& params, const PumpProfile& profile, int n_periods = 3,
                                          IntegratorConfig cfg = {},
                                          double report_until = std::numeric_limits<double>::infinity()) {
    check(params);
    check(profile);
    if (n_periods < 1) throw InvalidArgument("simulate_pulse_response: n_periods must be >= 1");
    if (!(report_until > 0.0)) throw InvalidArgument("simulate_pulse_response: report_until must be > 0");
    cfg.max_step = std::min(cfg.max_step, stable_step(params, profile));
    check(cfg);

    auto sys = [&](double t, const std::array<double, 3>& x) {
        const State d = rate_rhs(State{x[0], x[1], x[2]}, t, params, profile);
        return std::array<double, 3>{d.n, d.p, d.phi};
    };
    constexpr std::array<bool, 3> mask{true, true, false};

    std::array<double, 3> y{0.0, 0.0, 0.0};
    double start = 0.0;
    double end;
    if (profile.period > 0.0) {
        for (int k = 0; k + 1 < n_periods; ++k) {
            const double a = static_cast<double>(k) * profile.period;
            y = integrate_system<3>(sys, y, a, a + profile.period, cfg, mask, false).final_state;
        }
        start = static_cast<double>(n_periods - 1) * profile.period;
        end = start + profile.period;
    } else {
        end = single_shot_span(params, profile);
    }
    y[2] = 0.0;
    end = std::min(end, start + report_until);
    auto sol = integrate_system<3>(sys, y, start, end, cfg, mask, true);

    Trajectory tr;
    tr.t0 = 0.0;
    tr.dt = cfg.output_dt;
    tr.samples.reserve(sol.samples.size());
    tr.pump.reserve(sol.samples.size());
    for (std::size_t k = 0; k < sol.samples.size(); ++k) {
        const auto& s = sol.samples[k];
        tr.samples.push_back({s[0], s[1], s[2]});
        tr.pump.push_back(pump_rate(profile, start + static_cast<double>(k) * cfg.output_dt));
    }
    return tr;
}

}  // namespace nanolaser
