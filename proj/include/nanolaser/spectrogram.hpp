#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include "errors.hpp"
#include "ode.hpp"
#include "pulse_analysis.hpp"

namespace nanolaser {

/// Speed of light in nm/ps.
inline constexpr double speed_of_light = 299792.458;

struct Spectrogram {
    std::vector<double> times;        // ps
    std::vector<double> wavelengths;  // nm relative to lambda0, ascending
    std::vector<double> intensity;    // row-major [time][wavelength], max = 1
    double lambda0 = 0.0;
    double window_fwhm = 0.0;
    double scale = 1.0;  // peak of the raw |STFT|^2 before normalization

    std::size_t n_times() const { return times.size(); }
    std::size_t n_wavelengths() const { return wavelengths.size(); }
    double at(std::size_t i, std::size_t j) const { return intensity[i * wavelengths.size() + j]; }
};

struct SpectrogramOptions {
    double window_fwhm = 6.0;  // intensity FWHM of the gate, ps
    std::size_t n_freq = 512;
    double freq_span = 0.0;    // full span in 1/ps; 0 picks it from the instantaneous frequency
    double freq_center = std::numeric_limits<double>::quiet_NaN();
    Window time_range{};
    std::size_t time_stride = 1;
};

/// Spectral FWHM of the Gaussian gate's intensity spectrum, 1/ps.
inline double window_bandwidth(double window_fwhm) {
    return 2.0 * std::numbers::ln2 / (std::numbers::pi * window_fwhm);
}

/// Gabor transform of E = sqrt(P) exp(i phi).
/// The field is shifted to the band centre before sampling, so the band
/// (not the carrier) must fit inside 1/dt.
inline Spectrogram spectrogram(const Trajectory& tr, double lambda0, const SpectrogramOptions& opt = {}) {
    using cd = std::complex<double>;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (tr.samples.size() < 2) throw InvalidArgument("spectrogram: trajectory too short");
    if (!(lambda0 > 0.0)) throw InvalidArgument("spectrogram: lambda0 must be > 0");
    const double tw = opt.window_fwhm;
    const double dt = tr.dt;
    const double duration = tr.t_end() - tr.t0;
    if (!(tw >= 2.0 * dt)) throw InvalidArgument("spectrogram: window too short for the grid");
    if (!(tw <= duration)) throw InvalidArgument("spectrogram: window too long for the trajectory");
    if (opt.n_freq < 3) throw InvalidArgument("spectrogram: need at least 3 frequency bins");
    if (opt.time_stride < 1) throw InvalidArgument("spectrogram: time_stride must be >= 1");

    const std::size_t n = tr.samples.size();
    double pmax = 0.0;
    for (const auto& s : tr.samples) pmax = std::max(pmax, s.p);
    if (!(pmax > 0.0)) throw InvalidArgument("spectrogram: trajectory has no optical power");

    // mean frequency over each step with optical power, from the unwrapped phase
    const double bw = window_bandwidth(tw);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (tr.samples[k].p < 1e-3 * pmax && tr.samples[k + 1].p < 1e-3 * pmax) continue;
        const double nu = (tr.samples[k + 1].phi - tr.samples[k].phi) / (two_pi * dt);
        lo = std::min(lo, nu);
        hi = std::max(hi, nu);
    }
    double center = opt.freq_center;
    double span = opt.freq_span;
    if (std::isnan(center)) center = 0.5 * (lo + hi);
    if (span <= 0.0) span = 2.0 * std::max(hi - center, center - lo) + 6.0 * bw;
    const double nyquist = 0.5 / dt;
    if (std::max(hi - center, center - lo) + 2.0 * bw > nyquist || 0.5 * span > nyquist)
        throw InvalidArgument("spectrogram: optical bandwidth exceeds the sampling rate; resample the trajectory more finely");

    std::vector<cd> field(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& s = tr.samples[k];
        field[k] = std::polar(std::sqrt(std::max(0.0, s.p)), s.phi - two_pi * center * static_cast<double>(k) * dt);
    }

    const double dnu = span / static_cast<double>(opt.n_freq - 1);
    // ascending wavelength = descending frequency
    std::vector<double> nu(opt.n_freq);
    for (std::size_t m = 0; m < opt.n_freq; ++m) nu[m] = center + 0.5 * span - static_cast<double>(m) * dnu;

    const double b = 2.0 * std::numbers::ln2 / (tw * tw);  // |g|^2 has FWHM tw
    const auto half = static_cast<std::ptrdiff_t>(std::ceil(4.0 * tw / dt));
    const std::size_t width = static_cast<std::size_t>(2 * half + 1);
    std::vector<double> gate(width);
    for (std::size_t r = 0; r < width; ++r) {
        const double tau = static_cast<double>(static_cast<std::ptrdiff_t>(r) - half) * dt;
        gate[r] = std::exp(-b * tau * tau) * dt;
    }
    const double bins = std::max({static_cast<double>(width), 16.0 / (dt * bw), 2.0 / (dt * dnu)});
    std::size_t nfft = 1;
    while (static_cast<double>(nfft) < bins) nfft <<= 1;
    const double df = 1.0 / (static_cast<double>(nfft) * dt);
    // interpolation positions on the FFT grid
    std::vector<std::size_t> i0(opt.n_freq);
    std::vector<double> frac(opt.n_freq);
    for (std::size_t m = 0; m < opt.n_freq; ++m) {
        double x = (nu[m] - center) / df;
        const double fl = std::floor(x);
        frac[m] = x - fl;
        auto i = static_cast<std::ptrdiff_t>(fl) % static_cast<std::ptrdiff_t>(nfft);
        if (i < 0) i += static_cast<std::ptrdiff_t>(nfft);
        i0[m] = static_cast<std::size_t>(i);
    }

    Spectrogram sp;
    sp.lambda0 = lambda0;
    sp.window_fwhm = tw;
    sp.wavelengths.resize(opt.n_freq);
    for (std::size_t m = 0; m < opt.n_freq; ++m) sp.wavelengths[m] = -lambda0 * lambda0 * nu[m] / speed_of_light;

    std::vector<std::size_t> cols;
    for (std::size_t k = 0; k < n; k += opt.time_stride) {
        const double t = tr.time(k);
        if (t >= opt.time_range.from && t <= opt.time_range.to) cols.push_back(k);
    }
    if (cols.empty()) throw InvalidArgument("spectrogram: time range contains no samples");
    sp.times.reserve(cols.size());
    sp.intensity.assign(cols.size() * opt.n_freq, 0.0);

    Eigen::FFT<double> fft;
    std::vector<cd> in(nfft), out(nfft);
    std::vector<double> power(nfft);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto j = static_cast<std::ptrdiff_t>(cols[c]);
        sp.times.push_back(tr.time(cols[c]));
        std::fill(in.begin(), in.end(), cd{});
        for (std::size_t r = 0; r < width; ++r) {
            const std::ptrdiff_t k = j + static_cast<std::ptrdiff_t>(r) - half;
            if (k >= 0 && k < static_cast<std::ptrdiff_t>(n)) in[r] = field[static_cast<std::size_t>(k)] * gate[r];
        }
        fft.fwd(out, in);
        for (std::size_t q = 0; q < nfft; ++q) power[q] = std::norm(out[q]);
        double* row = &sp.intensity[c * opt.n_freq];
        for (std::size_t m = 0; m < opt.n_freq; ++m) {
            const std::size_t a = i0[m], a1 = (a + 1) % nfft;
            row[m] = (1.0 - frac[m]) * power[a] + frac[m] * power[a1];
        }
    }
    double mx = 0.0;
    for (double v : sp.intensity) mx = std::max(mx, v);
    sp.scale = mx;
    if (mx > 0.0)
        for (double& v : sp.intensity) v /= mx;
    return sp;
}

struct ChirpTrace {
    std::vector<double> times;            // ps
    std::vector<double> delta_lambda_pm;  // pm
    std::vector<double> weight;           // empty when unweighted

    std::size_t size() const { return times.size(); }
};

namespace detail {

// Vertex offset of the parabola through log intensities at -1, 0, +1.
inline double log_parabola_vertex(double l, double c, double r) {
    if (!(l > 0.0) || !(c > 0.0) || !(r > 0.0)) return 0.0;
    const double a = std::log(l), b = std::log(c), d = std::log(r);
    const double den = a - 2.0 * b + d;
    if (!(den < 0.0)) return 0.0;
    return std::clamp(0.5 * (a - d) / den, -0.5, 0.5);
}

// Half-maximum width of a uniformly sampled profile in samples.
// Crossings solve the log-intensity parabola through the neighbouring samples.
inline double half_max_width(const std::vector<double>& y) {
    const auto it = std::max_element(y.begin(), y.end());
    const auto pk = static_cast<std::size_t>(it - y.begin());
    if (!(*it > 0.0)) throw InvalidArgument("degenerate profile");
    double level = 0.5 * *it;
    if (pk > 0 && pk + 1 < y.size() && y[pk - 1] > 0.0 && y[pk + 1] > 0.0) {
        const double la = std::log(y[pk - 1]), lb = std::log(*it), lc = std::log(y[pk + 1]);
        const double q1 = 0.5 * (lc - la), q2 = 0.5 * (la + lc) - lb;
        if (q2 < 0.0) level = 0.5 * std::exp(lb - q1 * q1 / (4.0 * q2));
    }
    auto cross = [&](int dir) -> double {
        std::size_t i = pk;
        while (true) {
            if ((dir < 0 && i == 0) || (dir > 0 && i + 1 >= y.size()))
                throw InvalidArgument("profile does not fall to half maximum inside the grid");
            const std::size_t j = dir < 0 ? i - 1 : i + 1;
            if (y[j] < level) {
                // samples i (above) and j (below); third point one further inside
                const std::size_t h = dir < 0 ? i + 1 : i - 1;
                const double xi = static_cast<double>(i), xj = static_cast<double>(j);
                double x = xi + (xj - xi) * (level - y[i]) / (y[j] - y[i]);
                if (y[j] > 0.0 && h < y.size() && y[h] > 0.0) {
                    // ln y = q0 + q1 (x - xi) + q2 (x - xi)^2 using points i, j, h
                    const double u = xj - xi, v = static_cast<double>(h) - xi;
                    const double li = std::log(y[i]), lj = std::log(y[j]) - li, lh = std::log(y[h]) - li;
                    const double q2 = (lj / u - lh / v) / (u - v);
                    const double q1 = lj / u - q2 * u;
                    const double target = std::log(level) - li;
                    if (q2 != 0.0) {
                        const double disc = q1 * q1 + 4.0 * q2 * target;
                        if (disc >= 0.0) {
                            const double s = std::sqrt(disc);
                            for (double root : {(-q1 + s) / (2.0 * q2), (-q1 - s) / (2.0 * q2)})
                                if (root * u >= 0.0 && std::abs(root) <= 1.0) {
                                    x = xi + root;
                                    break;
                                }
                        }
                    }
                }
                return x;
            }
            i = j;
        }
    };
    const double left = cross(-1), right = cross(+1);
    const double w = right - left;
    if (w < 2.0) throw InvalidArgument("spectrum narrower than 2 bins");
    return w;
}

}  // namespace detail

/// Sub-bin wavelength of each column maximum for columns above threshold * global max.
inline ChirpTrace peak_wavelength_trace(const Spectrogram& sp, double threshold = 0.05) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("peak_wavelength_trace: threshold must lie in (0, 1)");
    const std::size_t nl = sp.n_wavelengths();
    if (nl < 3) throw InvalidArgument("peak_wavelength_trace: need at least 3 wavelength bins");
    const double dl = sp.wavelengths[1] - sp.wavelengths[0];
    double gmax = 0.0;
    for (double v : sp.intensity) gmax = std::max(gmax, v);
    ChirpTrace out;
    for (std::size_t i = 0; i < sp.n_times(); ++i) {
        const double* row = &sp.intensity[i * nl];
        const auto m = static_cast<std::size_t>(std::max_element(row, row + nl) - row);
        if (!(row[m] >= threshold * gmax) || row[m] <= 0.0) continue;
        double off = 0.0;
        if (m > 0 && m + 1 < nl) off = detail::log_parabola_vertex(row[m - 1], row[m], row[m + 1]);
        out.times.push_back(sp.times[i]);
        out.delta_lambda_pm.push_back(1000.0 * (sp.wavelengths[m] + off * dl));
        out.weight.push_back(row[m]);
    }
    if (out.times.empty()) throw NumericalError("peak_wavelength_trace: no column passes the threshold");
    return out;
}

/// FWHM of the time-integrated spectrum in GHz, gate bandwidth removed in quadrature.
inline double spectral_fwhm(const Spectrogram& sp) {
    const std::size_t nl = sp.n_wavelengths();
    if (nl < 3) throw InvalidArgument("spectral_fwhm: need at least 3 wavelength bins");
    std::vector<double> marg(nl, 0.0);
    for (std::size_t i = 0; i < sp.n_times(); ++i)
        for (std::size_t j = 0; j < nl; ++j) marg[j] += sp.at(i, j);
    const double dl = sp.wavelengths[1] - sp.wavelengths[0];
    const double w_nm = detail::half_max_width(marg) * dl;
    const double measured = w_nm * speed_of_light / (sp.lambda0 * sp.lambda0);  // 1/ps
    const double gate = window_bandwidth(sp.window_fwhm);
    if (!(measured > gate)) throw NumericalError("spectral_fwhm: spectrum not wider than the gate bandwidth");
    return 1000.0 * std::sqrt(measured * measured - gate * gate);
}

/// FWHM of the wavelength-integrated intensity in ps, gate width removed in quadrature.
inline double temporal_fwhm(const Spectrogram& sp) {
    if (sp.n_times() < 3) throw InvalidArgument("temporal_fwhm: need at least 3 time columns");
    const std::size_t nl = sp.n_wavelengths();
    std::vector<double> marg(sp.n_times(), 0.0);
    for (std::size_t i = 0; i < sp.n_times(); ++i)
        for (std::size_t j = 0; j < nl; ++j) marg[i] += sp.at(i, j);
    const double measured = detail::half_max_width(marg) * (sp.times[1] - sp.times[0]);
    if (!(measured > sp.window_fwhm)) throw NumericalError("temporal_fwhm: pulse not longer than the gate");
    return std::sqrt(measured * measured - sp.window_fwhm * sp.window_fwhm);
}

}  // namespace nanolaser
