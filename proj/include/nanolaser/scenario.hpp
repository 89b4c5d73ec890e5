#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "config.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "estimation.hpp"
#include "io.hpp"
#include "ode.hpp"
#include "pulse_analysis.hpp"
#include "spectrogram.hpp"

namespace nanolaser {

inline constexpr const char* tool_version = "0.1.0";

/// Files produced by a scenario plus a machine-readable summary.
struct Artifacts {
    std::vector<std::pair<std::string, std::string>> files;  // relative path, content
    nlohmann::json summary = nlohmann::json::object();
    nlohmann::json options = nlohmann::json::object();
};

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* d = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = d[v & 0xf];
    return s;
}

// ---------------------------------------------------------------- shared pieces

/// Pulses at `lead`, `lead + separation`, ... each at the given multiple of threshold fluence.
inline PumpProfile pulse_train(const ParamsConfig& cfg, double pth_multiple, int count = 1, double separation = 100.0,
                               double lead = 50.0) {
    if (!(pth_multiple >= 0.0)) throw InvalidArgument("pump multiple must be >= 0");
    PumpProfile pr;
    pr.pulse_fwhm = cfg.pump.pulse_fwhm;
    pr.period = cfg.pump.period;
    const double rate = peak_rate_for_fluence(cfg.laser, pth_multiple * threshold_fluence(cfg.laser, pr.pulse_fwhm));
    for (int k = 0; k < count; ++k) pr.pulses.push_back({lead + k * separation, rate});
    check(pr);
    return pr;
}

inline Trajectory trimmed(const Trajectory& tr, double t_max) {
    Trajectory out = tr;
    if (std::isfinite(t_max) && t_max < tr.t_end()) {
        const auto n = static_cast<std::size_t>(std::floor((t_max - tr.t0) / tr.dt + 1e-9)) + 1;
        out.samples.resize(std::min(n, out.samples.size()));
        if (out.pump.size() > out.samples.size()) out.pump.resize(out.samples.size());
    }
    return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    double pth_multiple = 5.0;
    int n_periods = 3;
    double t_max = 1000.0;  // trajectory output is cut here
    double lead = 50.0;
};

inline Artifacts run_simulate(const ParamsConfig& cfg, const SimulateOptions& o) {
    const auto pr = pulse_train(cfg, o.pth_multiple, 1, 0.0, o.lead);
    const auto tr = simulate_pulse_response(cfg.laser, pr, o.n_periods);
    Artifacts a;
    a.options = {{"pth_multiple", o.pth_multiple}, {"n_periods", o.n_periods}, {"t_max_ps", o.t_max}, {"lead_ps", o.lead}};
    a.files.emplace_back("trajectory.csv", trajectory_csv(trimmed(tr, o.t_max)));
    nlohmann::json m = {{"threshold_fluence_uJ_cm2", threshold_fluence(cfg.laser, pr.pulse_fwhm)},
                        {"fluence_uJ_cm2", o.pth_multiple * threshold_fluence(cfg.laser, pr.pulse_fwhm)},
                        {"n_threshold", n_threshold(cfg.laser)},
                        {"purcell_factor", cfg.laser.purcell_factor()},
                        {"definitions", metric_definitions()}};
    if (o.pth_multiple > 0.0) m["pulse"] = to_json(pulse_metrics(tr, {}, cfg.laser.tau_p));
    a.files.emplace_back("metrics.json", m.dump(2) + "\n");
    a.summary = m;
    return a;
}

// ---------------------------------------------------------------- two-pulse

struct TwoPulseOptions {
    double pth_multiple = 5.0;
    double separation = 100.0;
    double lead = 50.0;
    int n_periods = 3;
    double t_max = 1000.0;
};

struct TwoPulseResult {
    PulseMetrics first, second;
    double extinction_ratio_db = 0.0;
    Trajectory trajectory;
};

inline TwoPulseResult two_pulse(const ParamsConfig& cfg, const TwoPulseOptions& o) {
    if (!(o.separation > 20.0)) throw InvalidArgument("two-pulse: separation must exceed 20 ps");
    const auto pr = pulse_train(cfg, o.pth_multiple, 2, o.separation, o.lead);
    TwoPulseResult r;
    r.trajectory = simulate_pulse_response(cfg.laser, pr, o.n_periods);
    const double t1 = o.lead, t2 = o.lead + o.separation;
    const double open = o.separation - 1e-6;
    r.first = pulse_metrics(r.trajectory, {t1 - 10.0, t1 - 10.0 + open}, cfg.laser.tau_p);
    r.second = pulse_metrics(r.trajectory, {t2 - 10.0, t2 - 10.0 + open}, cfg.laser.tau_p);
    r.extinction_ratio_db = extinction_ratio(r.trajectory, {t1 - 10.0, t1 - 10.0 + open}, {t2 - 15.0, t2 - 5.0});
    return r;
}

inline Artifacts run_two_pulse(const ParamsConfig& cfg, const TwoPulseOptions& o) {
    const auto r = two_pulse(cfg, o);
    Artifacts a;
    a.options = {{"pth_multiple", o.pth_multiple}, {"separation_ps", o.separation}, {"lead_ps", o.lead},
                 {"n_periods", o.n_periods},       {"t_max_ps", o.t_max}};
    auto rel = [](double x, double y) { return std::abs(y / x - 1.0); };
    nlohmann::json m = {
        {"arrival_times_ps", {o.lead, o.lead + o.separation}},
        {"pulses", {to_json(r.first), to_json(r.second)}},
        {"extinction_ratio_db", std::round(r.extinction_ratio_db * 10.0) / 10.0},
        {"extinction_ratio_db_exact", r.extinction_ratio_db},
        {"relative_difference",
         {{"fwhm", rel(r.first.fwhm, r.second.fwhm)},
          {"peak_value", rel(r.first.peak_value, r.second.peak_value)},
          {"energy", rel(r.first.energy, r.second.energy)}}},
        {"windows",
         {{"pulse", "[t_k - 10, t_k + separation - 10) ps"}, {"off", "[t_2 - 15, t_2 - 5] ps"}}},
        {"definitions", metric_definitions()}};
    a.files.emplace_back("trajectory.csv", trajectory_csv(trimmed(r.trajectory, o.t_max)));
    a.files.emplace_back("metrics.json", m.dump(2) + "\n");
    a.summary = m;
    return a;
}

// ---------------------------------------------------------------- L-L curve

inline std::vector<double> log_spaced(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2) throw InvalidArgument("log range needs 0 < min < max and at least 2 points");
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return v;
}

struct LLCurveOptions {
    std::vector<double> fluences;
    LLMode mode = LLMode::steady;
    unsigned threads = 0;
};

inline Artifacts run_ll_curve(const ParamsConfig& cfg, const LLCurveOptions& o) {
    if (o.fluences.empty()) throw ConfigError({"fluences: list must not be empty"});
    const auto c = generate_ll_curve(cfg.laser, o.fluences, o.mode, o.threads);
    Artifacts a;
    a.options = {{"fluences_uJ_cm2", o.fluences}, {"mode", to_string(o.mode)}};
    a.files.emplace_back("ll_curve.csv", ll_curve_csv(c));
    a.summary = {{"points", c.points.size()},
                 {"scale", c.scale},
                 {"threshold_fluence_uJ_cm2", threshold_fluence(cfg.laser, cfg.pump.pulse_fwhm)}};
    return a;
}

// ---------------------------------------------------------------- fits

inline Artifacts run_fit_ll(const ParamsConfig& cfg, const LLCurve& data, const std::vector<std::string>& free,
                            const LLFitOptions& o) {
    const auto r = fit_ll(data, cfg.laser, free, o);
    Artifacts a;
    a.options = r.config;
    auto j = to_json(r);
    a.files.emplace_back("fit.json", j.dump(2) + "\n");
    a.summary = j;
    return a;
}

inline ChirpModelParams chirp_params_from(const ParamsConfig& cfg) {
    ChirpModelParams p;
    p.alpha_h = cfg.laser.alpha_h;
    p.lambda0 = cfg.laser.lambda0;
    p.beta = cfg.laser.beta;
    p.tau_sp = cfg.laser.tau_sp;
    return p;
}

inline Artifacts run_fit_chirp(const ChirpTrace& trace, const ChirpModelParams& fixed, const ChirpFitOptions& o) {
    const auto r = fit_chirp(trace, fixed, o);
    Artifacts a;
    a.options = r.config;
    auto j = to_json(r);
    ChirpModelParams best = fixed;
    best.nth_over_p = r.estimate("nth_over_p");
    best.alpha_h = r.estimate("alpha_h");
    j["central_redshift_pm"] = central_redshift(best);
    a.files.emplace_back("fit.json", j.dump(2) + "\n");
    a.summary = j;
    return a;
}

struct ChirpModelOptions {
    int points = 141;
    double domain_factor = default_chirp_domain;
};

inline Artifacts run_chirp_model(const ChirpModelParams& p, const ChirpModelOptions& o) {
    check(p);
    if (o.points < 2) throw InvalidArgument("chirp-model: need at least 2 points");
    ChirpTrace c;
    const double lim = o.domain_factor * p.delta_tau;
    for (int i = 0; i < o.points; ++i) {
        const double t = -lim + 2.0 * lim * i / (o.points - 1);
        c.times.push_back(t);
        c.delta_lambda_pm.push_back(koyama_chirp(t, p, o.domain_factor));
    }
    Artifacts a;
    a.options = {{"alpha_h", p.alpha_h},       {"lambda0", p.lambda0}, {"beta", p.beta},
                 {"nth_over_p", p.nth_over_p}, {"tau_sp", p.tau_sp},   {"delta_tau", p.delta_tau},
                 {"points", o.points},         {"domain_factor", o.domain_factor}};
    a.files.emplace_back("chirp_model.csv", chirp_trace_csv(c));
    a.summary = {{"shift_at_centre_pm", koyama_chirp(0.0, p)},
                 {"central_redshift_pm", central_redshift(p)},
                 {"time_bandwidth_product", tbp_from_alpha(std::abs(p.alpha_h))},
                 {"spectral_fwhm_ghz", 1000.0 * tbp_from_alpha(std::abs(p.alpha_h)) / p.delta_tau}};
    a.files.emplace_back("summary.json", a.summary.dump(2) + "\n");
    return a;
}

// ---------------------------------------------------------------- spectrogram

struct SpectrogramScenarioOptions {
    double pth_multiple = 5.0;
    double window_fwhm = 6.0;
    std::size_t n_freq = 512;
    double threshold = 0.05;
    double lead = 50.0;
    double t_before = 20.0;  // span of the spectrogram around the pump pulse
    double t_after = 150.0;
    int n_periods = 3;
};

/// Central shift across the FWHM from a straight-line fit of the trace, pm.
inline double measured_central_shift(const ChirpTrace& c, double centre, double fwhm) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double x = c.times[i] - centre;
        if (std::abs(x) > 0.5 * fwhm) continue;
        sx += x;
        sy += c.delta_lambda_pm[i];
        sxx += x * x;
        sxy += x * c.delta_lambda_pm[i];
        ++n;
    }
    if (n < 2) throw NumericalError("trace has fewer than 2 points inside the pulse FWHM");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx) * fwhm;
}

/// Sampling step that keeps the instantaneous-frequency band of `tr` within
/// a quarter of the sampling rate; divides the coarse step evenly.
inline double spectral_sampling_step(const Trajectory& tr, const LaserParams& p, double window_fwhm) {
    double pmax = 0.0;
    for (const auto& s : tr.samples) pmax = std::max(pmax, s.p);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : tr.samples) {
        if (s.p < 1e-3 * pmax) continue;
        const double nu = rate_rhs(s, 0.0, p).phi / (2.0 * std::numbers::pi);
        lo = std::min(lo, nu);
        hi = std::max(hi, nu);
    }
    const double band = (hi - lo) + 6.0 * window_bandwidth(window_fwhm);
    const double want = 1.0 / (2.0 * band);
    const double steps = std::ceil(tr.dt / want - 1e-9);
    return tr.dt / std::max(1.0, steps);
}

inline Artifacts run_spectrogram(const ParamsConfig& cfg, const SpectrogramScenarioOptions& o) {
    const auto pr = pulse_train(cfg, o.pth_multiple, 1, 0.0, o.lead);
    const auto tr = simulate_pulse_response(cfg.laser, pr, o.n_periods);
    const auto m = pulse_metrics(tr, {}, cfg.laser.tau_p);
    const double t_stop = o.lead + o.t_after + 8.0 * o.window_fwhm;

    IntegratorConfig fine;
    fine.output_dt = spectral_sampling_step(trimmed(tr, t_stop), cfg.laser, o.window_fwhm);
    const auto win = simulate_pulse_response(cfg.laser, pr, o.n_periods, fine, t_stop);
    SpectrogramOptions so;
    so.window_fwhm = o.window_fwhm;
    so.n_freq = o.n_freq;
    so.time_range = {o.lead - o.t_before, o.lead + o.t_after};
    so.time_stride = static_cast<std::size_t>(std::llround(tr.dt / fine.output_dt));
    const auto sp = spectrogram(win, cfg.laser.lambda0, so);
    const auto trace = peak_wavelength_trace(sp, o.threshold);

    Artifacts a;
    a.options = {{"pth_multiple", o.pth_multiple}, {"window_fwhm_ps", o.window_fwhm}, {"n_freq", o.n_freq},
                 {"threshold", o.threshold},       {"lead_ps", o.lead},              {"t_before_ps", o.t_before},
                 {"t_after_ps", o.t_after},        {"n_periods", o.n_periods},
                 {"sample_dt_ps", fine.output_dt}};
    a.files.emplace_back("spectrogram.csv", spectrogram_csv(sp));
    a.files.emplace_back("spectrogram.bin", spectrogram_binary(sp));
    a.files.emplace_back("chirp_trace.csv", chirp_trace_csv(trace));

    nlohmann::json s = {{"pulse", to_json(m)}, {"definitions", metric_definitions()}};
    try {
        const double dnu = spectral_fwhm(sp);
        s["spectral_fwhm_ghz"] = dnu;
        s["time_bandwidth_product"] = dnu * 1e-3 * m.fwhm;
        if (dnu * 1e-3 * m.fwhm >= transform_limit) s["alpha_from_tbp"] = alpha_from_tbp(dnu * 1e-3 * m.fwhm);
    } catch (const Error& e) {
        s["spectral_fwhm_error"] = e.what();
    }
    ChirpModelParams fixed = chirp_params_from(cfg);
    fixed.delta_tau = m.fwhm;
    ChirpFitOptions fo;
    fo.time_offset = m.peak_time;
    try {
        const auto fit = fit_chirp(trace, fixed, fo);
        ChirpModelParams best = fixed;
        best.nth_over_p = fit.estimate("nth_over_p");
        s["chirp_fit"] = to_json(fit);
        s["fitted_central_redshift_pm"] = central_redshift(best);
        s["model_central_redshift_pm"] = central_redshift(fixed);
        s["measured_central_shift_pm"] = measured_central_shift(trace, m.peak_time, m.fwhm);
    } catch (const Error& e) {
        s["chirp_fit_error"] = e.what();
    }
    a.files.emplace_back("summary.json", s.dump(2) + "\n");
    a.summary = s;
    return a;
}

// ---------------------------------------------------------------- run directory

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Writes every artifact and a run-manifest.json referencing all of them.
inline nlohmann::json write_run(const std::filesystem::path& out_dir, const std::string& scenario,
                                const ParamsConfig& cfg, const std::string& params_source,
                                const std::vector<std::string>& overrides, const Artifacts& a) {
    nlohmann::json effective = {{"scenario", scenario}, {"params", to_json(cfg)}, {"options", a.options}};
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& [name, content] : a.files) {
        write_text(out_dir / name, content);
        outputs.push_back({{"path", name}, {"bytes", content.size()}, {"fnv1a64", hex64(fnv1a(content))}});
    }
    nlohmann::json manifest = {{"tool", "nanolaser"},
                               {"version", tool_version},
                               {"scenario", scenario},
                               {"params_source", params_source},
                               {"overrides", overrides},
                               {"config_hash", hex64(fnv1a(effective.dump()))},
                               {"config", effective},
                               {"outputs", outputs},
                               {"created_utc", utc_timestamp()}};
    write_json(out_dir / "run-manifest.json", manifest);
    return manifest;
}

}  // namespace nanolaser
