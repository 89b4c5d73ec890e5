#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace nanolaser {

/// Device and material constants. Densities are normalized (N_tr sets the
/// carrier scale), times are in picoseconds. Defaults are the calibrated
/// paper-default set shipped in configs/.
struct LaserParams {
    double beta = 0.67;
    double tau_sp = 50.0;
    double tau_free = 1000.0;
    double tau_p = 0.05;
    double g0 = 18.0;
    double n_tr = 1.0;
    double gamma_conf = 1.0;
    double eps_sat = 300.0;
    double alpha_h = 3.05;
    double lambda0 = 920.0;
    double eta_pump = 0.14690788720406067;

    double purcell_factor() const { return tau_free / tau_sp; }

    friend bool operator==(const LaserParams&, const LaserParams&) = default;
};

inline LaserParams paper_default() { return LaserParams{}; }

/// Every invariant violation, one message per field.
inline std::vector<std::string> validate(const LaserParams& p) {
    std::vector<std::string> issues;
    auto fail = [&](const char* field, const std::string& rule, double v) {
        issues.push_back(std::string(field) + ": " + rule + " (got " + std::to_string(v) + ")");
    };
    auto finite = [&](const char* field, double v) {
        if (!std::isfinite(v)) {
            fail(field, "must be finite", v);
            return false;
        }
        return true;
    };
    if (finite("beta", p.beta) && (p.beta < 0.0 || p.beta > 1.0)) fail("beta", "must lie in [0, 1]", p.beta);
    if (finite("tau_sp", p.tau_sp) && p.tau_sp <= 0.0) fail("tau_sp", "must be > 0", p.tau_sp);
    if (finite("tau_free", p.tau_free) && p.tau_free < p.tau_sp)
        fail("tau_free", "must be >= tau_sp", p.tau_free);
    if (finite("tau_p", p.tau_p) && p.tau_p <= 0.0) fail("tau_p", "must be > 0", p.tau_p);
    if (finite("g0", p.g0) && p.g0 < 0.0) fail("g0", "must be >= 0", p.g0);
    if (finite("n_tr", p.n_tr) && p.n_tr <= 0.0) fail("n_tr", "must be > 0", p.n_tr);
    if (finite("gamma_conf", p.gamma_conf) && (p.gamma_conf <= 0.0 || p.gamma_conf > 1.0))
        fail("gamma_conf", "must lie in (0, 1]", p.gamma_conf);
    if (finite("eps_sat", p.eps_sat) && p.eps_sat < 0.0) fail("eps_sat", "must be >= 0", p.eps_sat);
    finite("alpha_h", p.alpha_h);
    if (finite("lambda0", p.lambda0) && p.lambda0 <= 0.0) fail("lambda0", "must be > 0", p.lambda0);
    if (finite("eta_pump", p.eta_pump) && p.eta_pump < 0.0) fail("eta_pump", "must be >= 0", p.eta_pump);
    return issues;
}

inline void check(const LaserParams& p) {
    auto issues = validate(p);
    if (!issues.empty()) throw InvalidArgument("invalid laser parameters: " + issues.front());
}

/// Gaussian pump pulse train.
struct PumpPulse {
    double arrival_time = 0.0;  // ps
    double peak_rate = 0.0;     // normalized carriers / ps

    friend bool operator==(const PumpPulse&, const PumpPulse&) = default;
};

struct PumpProfile {
    std::vector<PumpPulse> pulses;
    double pulse_fwhm = 3.0;  // intensity FWHM, ps
    double period = 0.0;      // 0 = single shot

    friend bool operator==(const PumpProfile&, const PumpProfile&) = default;
};

inline constexpr double repetition_period_ps(double rep_rate_mhz) { return 1e6 / rep_rate_mhz; }

/// 81.8 MHz mode-locked source.
inline constexpr double default_period = repetition_period_ps(81.8);

inline std::vector<std::string> validate(const PumpProfile& pr) {
    std::vector<std::string> issues;
    if (!(pr.pulse_fwhm > 0.0) || !std::isfinite(pr.pulse_fwhm)) issues.push_back("pulse_fwhm: must be > 0");
    if (!(pr.period >= 0.0) || !std::isfinite(pr.period)) issues.push_back("period: must be >= 0");
    for (std::size_t i = 0; i < pr.pulses.size(); ++i) {
        const auto& pl = pr.pulses[i];
        std::string tag = "pulses[" + std::to_string(i) + "]";
        if (!(pl.peak_rate >= 0.0) || !std::isfinite(pl.peak_rate)) issues.push_back(tag + ".peak_rate: must be >= 0");
        if (!std::isfinite(pl.arrival_time)) issues.push_back(tag + ".arrival_time: must be finite");
        if (i > 0 && !(pl.arrival_time > pr.pulses[i - 1].arrival_time))
            issues.push_back(tag + ".arrival_time: arrival times must be strictly increasing");
        if (pr.period > 0.0 && (pl.arrival_time < 0.0 || pl.arrival_time >= pr.period))
            issues.push_back(tag + ".arrival_time: must lie in [0, period)");
    }
    return issues;
}

inline void check(const PumpProfile& pr) {
    auto issues = validate(pr);
    if (!issues.empty()) throw InvalidArgument("invalid pump profile: " + issues.front());
}

/// Gaussian width parameter s with exp(-(t/s)^2) having the given FWHM.
inline double gaussian_width(double fwhm) { return fwhm / (2.0 * std::sqrt(std::numbers::ln2)); }

/// Integral of a unit-peak Gaussian pulse, ps.
inline double pulse_area(double fwhm) { return std::sqrt(std::numbers::pi) * gaussian_width(fwhm); }

inline double pump_rate(const PumpProfile& pr, double t) {
    const double s = gaussian_width(pr.pulse_fwhm);
    // contributions below 1e-12 of peak are dropped
    const double cut = s * std::sqrt(std::log(1e12));
    double r = 0.0;
    for (const auto& pl : pr.pulses) {
        const double d = t - pl.arrival_time;
        if (pr.period > 0.0) {
            const auto k0 = static_cast<long long>(std::ceil((d - cut) / pr.period));
            const auto k1 = static_cast<long long>(std::floor((d + cut) / pr.period));
            for (long long k = k0; k <= k1; ++k) {
                const double x = (d - static_cast<double>(k) * pr.period) / s;
                r += pl.peak_rate * std::exp(-x * x);
            }
        } else if (std::abs(d) <= cut) {
            const double x = d / s;
            r += pl.peak_rate * std::exp(-x * x);
        }
    }
    return r;
}

struct State {
    double n = 0.0;
    double p = 0.0;
    double phi = 0.0;

    friend bool operator==(const State&, const State&) = default;
};

inline double n_threshold(const LaserParams& p) {
    if (p.g0 == 0.0 || p.gamma_conf == 0.0) throw InvalidArgument("no stimulated gain: g0 and gamma_conf must be > 0");
    return p.n_tr + 1.0 / (p.gamma_conf * p.g0 * p.tau_p);
}

/// Right-hand side for a given instantaneous pump rate.
inline State rate_rhs(const State& y, double pump, const LaserParams& p) {
    if (!std::isfinite(y.n) || !std::isfinite(y.p) || !std::isfinite(y.phi))
        throw InvalidArgument("rate_rhs: non-finite state");
    const double stim = p.g0 * (y.n - p.n_tr) * y.p / (1.0 + p.eps_sat * y.p);
    const double spont = y.n / p.tau_sp;
    State d;
    d.n = pump - spont - stim;
    d.p = p.gamma_conf * stim - y.p / p.tau_p + p.beta * spont;
    if (p.g0 > 0.0)
        d.phi = 0.5 * p.alpha_h * p.gamma_conf * p.g0 * (y.n - n_threshold(p));
    else
        d.phi = -0.5 * p.alpha_h / p.tau_p;
    return d;
}

inline State rate_rhs(const State& y, double t, const LaserParams& p, const PumpProfile& pr) {
    return rate_rhs(y, pump_rate(pr, t), p);
}

namespace detail {

// Positive root in P of dP/dt = 0 at fixed N.
inline double photon_balance(double n, const LaserParams& p) {
    const double s = p.gamma_conf * p.g0 * (n - p.n_tr);
    const double b = p.beta * n / p.tau_sp;
    const double a2 = p.eps_sat / p.tau_p;
    const double lin = s - 1.0 / p.tau_p + b * p.eps_sat;  // P^2 a2 - lin P - b = 0
    if (a2 == 0.0) return lin < 0.0 ? b / -lin : (b == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    const double disc = std::sqrt(lin * lin + 4.0 * a2 * b);
    return lin > 0.0 ? (lin + disc) / (2.0 * a2) : 2.0 * b / (disc - lin);
}

inline double photon_from_carriers(double n, double pump, const LaserParams& p) {
    const double gr = p.gamma_conf * pump;
    const double loss = (p.gamma_conf - p.beta) * n / p.tau_sp;
    const double linear = std::max(0.0, p.tau_p * (gr - loss));
    if (loss < 0.5 * gr) return linear;
    const double bal = photon_balance(n, p);
    return std::isfinite(bal) ? bal : linear;
}

}  // namespace detail

/// Continuous-wave solution (N, P) for a constant pump rate.
inline std::pair<double, double> steady_state(double pump, const LaserParams& p) {
    check(p);
    if (!(pump >= 0.0) || !std::isfinite(pump)) throw InvalidArgument("steady_state: pump must be finite and >= 0");
    if (pump == 0.0) return {0.0, 0.0};
    if (p.g0 == 0.0) {
        const double n = pump * p.tau_sp;
        return {n, p.beta * n * p.tau_p / p.tau_sp};
    }
    const double d = p.gamma_conf - p.beta;
    const double k = p.gamma_conf * pump * p.tau_sp;
    double n;
    if (p.eps_sat == 0.0) {
        const double a = p.gamma_conf * p.g0;
        const double c = a * n_threshold(p);
        const double b = k * a + d * c + p.beta / p.tau_p;
        const double disc = b * b - 4.0 * d * a * k * c;
        const double q = 0.5 * (b + std::sqrt(std::max(0.0, disc)));
        n = k * c / q;
    } else {
        auto f = [&](double x) {
            const double ph = std::max(0.0, p.tau_p * (p.gamma_conf * pump - d * x / p.tau_sp));
            return pump - x / p.tau_sp - p.g0 * (x - p.n_tr) * ph / (1.0 + p.eps_sat * ph);
        };
        double lo = 0.0;
        double hi = std::max(pump * p.tau_sp, p.n_tr);
        if (d > 0.0) hi = std::min(hi, k / d);
        if (!(f(hi) <= 0.0)) throw NumericalError("steady_state: no physical root");
        for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        n = 0.5 * (lo + hi);
    }
    const double ph = detail::photon_from_carriers(n, pump, p);
    if (!std::isfinite(n) || !std::isfinite(ph) || n < 0.0 || ph < 0.0)
        throw NumericalError("steady_state: no physical root");
    return {n, ph};
}

/// Fluence [uJ/cm^2] whose pulse injects N_th carriers.
inline double threshold_fluence(const LaserParams& p, double pulse_fwhm = 3.0) {
    if (!(p.eta_pump > 0.0)) throw InvalidArgument("threshold_fluence: eta_pump must be > 0");
    return n_threshold(p) / (p.eta_pump * pulse_area(pulse_fwhm));
}

/// Peak generation rate for a fluence in uJ/cm^2.
inline double peak_rate_for_fluence(const LaserParams& p, double fluence) { return p.eta_pump * fluence; }

/// Constant rate delivering the same carriers per spontaneous lifetime as one pulse.
inline double quasi_cw_rate(const LaserParams& p, double fluence, double pulse_fwhm = 3.0) {
    return p.eta_pump * fluence * pulse_area(pulse_fwhm) / p.tau_sp;
}

}  // namespace nanolaser
