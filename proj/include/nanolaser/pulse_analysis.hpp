#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "ode.hpp"

namespace nanolaser {

struct PulseMetrics {
    double fwhm = 0.0;        // ps
    double rise_time = 0.0;   // 10% -> 90% of peak, ps
    double decay_time = 0.0;  // exponential constant on the 90% -> 10% tail, ps
    double peak_value = 0.0;
    double energy = 0.0;      // sum of P dt / tau_p
    double peak_time = 0.0;   // ps
};

/// Closed time interval [from, to].
struct Window {
    double from = -std::numeric_limits<double>::infinity();
    double to = std::numeric_limits<double>::infinity();
};

/// Qualifying peaks must also exceed this fraction of the window maximum.
inline constexpr double peak_floor = 1e-3;

namespace detail {

struct Series {
    double t0;
    double dt;
    std::vector<double> y;
    double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
};

inline Series photon_series(const Trajectory& tr, Window w) {
    if (tr.samples.empty()) throw InvalidArgument("empty trajectory");
    if (!(w.to > w.from)) throw InvalidArgument("empty window");
    const double eps = 1e-9 * tr.dt;
    std::size_t lo = 0;
    if (w.from > tr.t0) lo = static_cast<std::size_t>(std::ceil((w.from - tr.t0) / tr.dt - 1e-9));
    std::size_t hi = tr.samples.size();
    if (w.to < tr.t_end()) hi = static_cast<std::size_t>(std::floor((w.to - tr.t0 + eps) / tr.dt)) + 1;
    hi = std::min(hi, tr.samples.size());
    if (lo >= hi) throw InvalidArgument("window contains no samples");
    Series s{tr.time(lo), tr.dt, {}};
    s.y.reserve(hi - lo);
    for (std::size_t k = lo; k < hi; ++k) s.y.push_back(tr.samples[k].p);
    return s;
}

// Linear interpolation of the level crossing between samples i and j = i +- 1.
inline double crossing(const Series& s, std::size_t i, std::size_t j, double level) {
    const double a = s.y[i], b = s.y[j];
    const double f = (a == b) ? 0.0 : (level - a) / (b - a);
    return s.time(i) + (static_cast<double>(j) - static_cast<double>(i)) * f * s.dt;
}

// First crossing of `level` walking from the peak in direction dir.
inline std::optional<double> edge(const Series& s, std::size_t peak, int dir, double level) {
    std::size_t i = peak;
    while (true) {
        if (dir < 0 && i == 0) return std::nullopt;
        if (dir > 0 && i + 1 >= s.y.size()) return std::nullopt;
        const std::size_t j = dir < 0 ? i - 1 : i + 1;
        if (s.y[j] < level) return crossing(s, i, j, level);
        i = j;
    }
}

}  // namespace detail

/// Metrics of the single pulse in the sampled series.
inline PulseMetrics pulse_metrics(double t0, double dt, std::span<const double> p, double tau_p) {
    if (p.size() < 3) throw InvalidArgument("pulse_metrics: need at least 3 samples");
    if (!(dt > 0.0) || !(tau_p > 0.0)) throw InvalidArgument("pulse_metrics: dt and tau_p must be > 0");
    detail::Series s{t0, dt, std::vector<double>(p.begin(), p.end())};
    const auto& y = s.y;
    const double ymin = *std::min_element(y.begin(), y.end());
    const double ymax = *std::max_element(y.begin(), y.end());
    const double level = std::max(10.0 * ymin, peak_floor * ymax);

    std::size_t peak = 0;
    int count = 0;
    for (std::size_t k = 1; k + 1 < y.size(); ++k) {
        if (!(y[k] > level) || !(y[k] > y[k - 1])) continue;
        std::size_t e = k;  // plateau end
        while (e + 1 < y.size() && y[e + 1] == y[k]) ++e;
        if (e + 1 < y.size() && y[e + 1] < y[k]) {
            ++count;
            if (count == 1 || y[k] > y[peak]) peak = k;
        }
        k = e;
    }
    if (count == 0) throw NumericalError("no pulse found");
    if (count > 1) throw NumericalError("ambiguous pulse: " + std::to_string(count) + " qualifying peaks");

    PulseMetrics m;
    m.peak_value = y[peak];
    m.peak_time = s.time(peak);
    auto need = [](std::optional<double> v) {
        if (!v) throw NumericalError("no pulse found: pulse edge outside the window");
        return *v;
    };
    const double hm = 0.5 * m.peak_value;
    m.fwhm = need(detail::edge(s, peak, +1, hm)) - need(detail::edge(s, peak, -1, hm));
    m.rise_time = need(detail::edge(s, peak, -1, 0.9 * m.peak_value)) -
                  need(detail::edge(s, peak, -1, 0.1 * m.peak_value));

    // log-linear least squares on the trailing 90% -> 10% segment
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t k = peak; k < y.size() && y[k] >= 0.1 * m.peak_value; ++k) {
        if (y[k] > 0.9 * m.peak_value) continue;
        const double x = s.time(k) - m.peak_time;
        const double v = std::log(y[k]);
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
        ++n;
    }
    if (n < 2) throw NumericalError("no pulse found: trailing edge under-resolved");
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (!(slope < 0.0)) throw NumericalError("no pulse found: trailing edge not decaying");
    m.decay_time = -1.0 / slope;

    double acc = 0.0;
    for (double v : y) acc += v;
    m.energy = acc * dt / tau_p;
    return m;
}

inline PulseMetrics pulse_metrics(const Trajectory& tr, Window w, double tau_p) {
    const auto s = detail::photon_series(tr, w);
    return pulse_metrics(s.t0, s.dt, s.y, tau_p);
}

/// On/off contrast in dB from the window maxima of P.
inline double extinction_ratio(const Trajectory& tr, Window on, Window off) {
    const auto a = detail::photon_series(tr, on);
    const auto b = detail::photon_series(tr, off);
    constexpr double floor = 1e-30;
    const double pa = std::max(floor, *std::max_element(a.y.begin(), a.y.end()));
    const double pb = std::max(floor, *std::max_element(b.y.begin(), b.y.end()));
    return 10.0 * std::log10(pa / pb);
}

}  // namespace nanolaser
