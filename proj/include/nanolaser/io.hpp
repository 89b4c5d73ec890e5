#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "errors.hpp"
#include "estimation.hpp"
#include "ode.hpp"
#include "pulse_analysis.hpp"
#include "spectrogram.hpp"

namespace nanolaser {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw IoError("number formatting failed");
    return std::string(buf.data(), end);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw IoError("malformed number: '" + std::string(s) + "'");
    return v;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    const auto text = read_text(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::vector<std::vector<std::string_view>> parse_csv(const std::string& text, std::string_view header,
                                                            const std::string& what) {
    std::vector<std::vector<std::string_view>> rows;
    std::string_view all(text);
    bool first = true;
    const std::size_t cols = split(header).size();
    while (!all.empty()) {
        auto nl = all.find('\n');
        auto line = all.substr(0, nl);
        all.remove_prefix(nl == std::string_view::npos ? all.size() : nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (first) {
            if (line != header) throw IoError(what + ": expected header '" + std::string(header) + "'");
            first = false;
            continue;
        }
        auto f = split(line);
        if (f.size() != cols) throw IoError(what + ": row has " + std::to_string(f.size()) + " fields, expected " + std::to_string(cols));
        rows.push_back(std::move(f));
    }
    if (first) throw IoError(what + ": missing header");
    return rows;
}

}  // namespace detail

// ---------------------------------------------------------------- trajectory

inline constexpr std::string_view trajectory_header = "t_ps,N,P,phi,pump_rate";

inline std::string trajectory_csv(const Trajectory& tr) {
    std::string out(trajectory_header);
    out += '\n';
    for (std::size_t k = 0; k < tr.samples.size(); ++k) {
        const auto& s = tr.samples[k];
        const double pump = k < tr.pump.size() ? tr.pump[k] : 0.0;
        out += format_double(tr.time(k)) + ',' + format_double(s.n) + ',' + format_double(s.p) + ',' +
               format_double(s.phi) + ',' + format_double(pump) + '\n';
    }
    return out;
}

inline Trajectory trajectory_from_csv(const std::string& text) {
    const auto rows = detail::parse_csv(text, trajectory_header, "trajectory CSV");
    if (rows.empty()) throw IoError("trajectory CSV: no samples");
    Trajectory tr;
    tr.t0 = parse_double(rows[0][0]);
    tr.dt = rows.size() > 1 ? parse_double(rows[1][0]) - tr.t0 : 1.0;
    for (const auto& r : rows) {
        tr.samples.push_back({parse_double(r[1]), parse_double(r[2]), parse_double(r[3])});
        tr.pump.push_back(parse_double(r[4]));
    }
    return tr;
}

inline nlohmann::json to_json(const Trajectory& tr) {
    std::vector<double> n, p, phi;
    for (const auto& s : tr.samples) {
        n.push_back(s.n);
        p.push_back(s.p);
        phi.push_back(s.phi);
    }
    return {{"t0_ps", tr.t0}, {"dt_ps", tr.dt}, {"N", n}, {"P", p}, {"phi", phi}, {"pump_rate", tr.pump}};
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
    try {
        Trajectory tr;
        tr.t0 = j.at("t0_ps").get<double>();
        tr.dt = j.at("dt_ps").get<double>();
        const auto n = j.at("N").get<std::vector<double>>();
        const auto p = j.at("P").get<std::vector<double>>();
        const auto phi = j.at("phi").get<std::vector<double>>();
        tr.pump = j.at("pump_rate").get<std::vector<double>>();
        if (p.size() != n.size() || phi.size() != n.size()) throw IoError("trajectory JSON: column lengths differ");
        for (std::size_t k = 0; k < n.size(); ++k) tr.samples.push_back({n[k], p[k], phi[k]});
        return tr;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("trajectory JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------- spectrogram

inline constexpr std::string_view spectrogram_header = "t_ps,dlambda_pm,intensity";

inline std::string spectrogram_csv(const Spectrogram& sp) {
    std::string out(spectrogram_header);
    out += '\n';
    for (std::size_t i = 0; i < sp.n_times(); ++i)
        for (std::size_t j = 0; j < sp.n_wavelengths(); ++j)
            out += format_double(sp.times[i]) + ',' + format_double(1000.0 * sp.wavelengths[j]) + ',' +
                   format_double(sp.at(i, j)) + '\n';
    return out;
}

/// Binary grid: "NLSPEC01", u32 version, u32 reserved, u64 n_t, u64 n_l,
/// f64 lambda0, window_fwhm, scale, then times, wavelengths [nm], intensity
/// (row-major, time-major). All little-endian.
inline constexpr char spectrogram_magic[8] = {'N', 'L', 'S', 'P', 'E', 'C', '0', '1'};
inline constexpr std::uint32_t spectrogram_version = 1;

namespace detail {
template <class T>
void put_le(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
    std::array<char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    out.append(b.data(), b.size());
}
template <class T>
T get_le(std::string_view& in) {
    if (in.size() < sizeof(T)) throw IoError("spectrogram binary: truncated");
    std::array<char, sizeof(T)> b;
    std::memcpy(b.data(), in.data(), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    in.remove_prefix(sizeof(T));
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}
}  // namespace detail

inline std::string spectrogram_binary(const Spectrogram& sp) {
    std::string out(spectrogram_magic, sizeof spectrogram_magic);
    detail::put_le<std::uint32_t>(out, spectrogram_version);
    detail::put_le<std::uint32_t>(out, 0);
    detail::put_le<std::uint64_t>(out, sp.n_times());
    detail::put_le<std::uint64_t>(out, sp.n_wavelengths());
    detail::put_le(out, sp.lambda0);
    detail::put_le(out, sp.window_fwhm);
    detail::put_le(out, sp.scale);
    for (double v : sp.times) detail::put_le(out, v);
    for (double v : sp.wavelengths) detail::put_le(out, v);
    for (double v : sp.intensity) detail::put_le(out, v);
    return out;
}

inline Spectrogram spectrogram_from_binary(const std::string& data) {
    std::string_view in(data);
    if (in.size() < 8 || in.substr(0, 8) != std::string_view(spectrogram_magic, 8))
        throw IoError("spectrogram binary: bad magic");
    in.remove_prefix(8);
    if (detail::get_le<std::uint32_t>(in) != spectrogram_version) throw IoError("spectrogram binary: unsupported version");
    detail::get_le<std::uint32_t>(in);
    const auto nt = detail::get_le<std::uint64_t>(in);
    const auto nl = detail::get_le<std::uint64_t>(in);
    Spectrogram sp;
    sp.lambda0 = detail::get_le<double>(in);
    sp.window_fwhm = detail::get_le<double>(in);
    sp.scale = detail::get_le<double>(in);
    if (in.size() != 8 * (nt + nl + nt * nl)) throw IoError("spectrogram binary: size does not match header");
    for (std::uint64_t i = 0; i < nt; ++i) sp.times.push_back(detail::get_le<double>(in));
    for (std::uint64_t i = 0; i < nl; ++i) sp.wavelengths.push_back(detail::get_le<double>(in));
    sp.intensity.reserve(nt * nl);
    for (std::uint64_t i = 0; i < nt * nl; ++i) sp.intensity.push_back(detail::get_le<double>(in));
    return sp;
}

// ---------------------------------------------------------------- chirp trace

inline constexpr std::string_view chirp_trace_header = "t_ps,dlambda_pm,weight";

inline std::string chirp_trace_csv(const ChirpTrace& c) {
    std::string out(chirp_trace_header);
    out += '\n';
    for (std::size_t i = 0; i < c.size(); ++i) {
        out += format_double(c.times[i]) + ',' + format_double(c.delta_lambda_pm[i]) + ',';
        if (i < c.weight.size()) out += format_double(c.weight[i]);
        out += '\n';
    }
    return out;
}

inline ChirpTrace chirp_trace_from_csv(const std::string& text) {
    const auto rows = detail::parse_csv(text, chirp_trace_header, "chirp trace CSV");
    ChirpTrace c;
    std::size_t with_weight = 0;
    for (const auto& r : rows) {
        c.times.push_back(parse_double(r[0]));
        c.delta_lambda_pm.push_back(parse_double(r[1]));
        if (!r[2].empty()) {
            c.weight.push_back(parse_double(r[2]));
            ++with_weight;
        }
    }
    if (with_weight != 0 && with_weight != rows.size()) throw IoError("chirp trace CSV: weight column partially filled");
    return c;
}

// ---------------------------------------------------------------- L-L curve

inline constexpr std::string_view ll_header = "fluence_uJ_cm2,output_au";

inline std::string ll_curve_csv(const LLCurve& c) {
    std::string out(ll_header);
    out += '\n';
    for (const auto& p : c.points) out += format_double(p.fluence) + ',' + format_double(p.output) + '\n';
    return out;
}

inline LLCurve ll_curve_from_csv(const std::string& text) {
    const auto rows = detail::parse_csv(text, ll_header, "L-L CSV");
    LLCurve c;
    for (const auto& r : rows) c.points.push_back({parse_double(r[0]), parse_double(r[1])});
    return c;
}

// ---------------------------------------------------------------- results

inline nlohmann::json to_json(const PulseMetrics& m) {
    return {{"fwhm_ps", m.fwhm},           {"rise_time_ps", m.rise_time}, {"decay_time_ps", m.decay_time},
            {"peak_value", m.peak_value},  {"energy", m.energy},          {"peak_time_ps", m.peak_time}};
}

inline nlohmann::json metric_definitions() {
    return {{"rise_time", "10% to 90% of peak on the leading edge, linear interpolation"},
            {"decay_time", "exponential constant of a log-linear least-squares fit to the trailing 90% to 10% samples"},
            {"fwhm", "half-maximum crossings, linear interpolation"},
            {"energy", "sum of P dt / tau_p over the window"}};
}

inline nlohmann::json to_json(const FitResult& r) {
    nlohmann::json est = nlohmann::json::object();
    for (std::size_t i = 0; i < r.names.size(); ++i) est[r.names[i]] = r.values[i];
    nlohmann::json se = nlohmann::json::object();
    for (std::size_t i = 0; i < r.free.size(); ++i) se[r.free[i]] = r.std_errors[i];
    std::vector<std::vector<double>> cov;
    for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
        cov.emplace_back();
        for (Eigen::Index j = 0; j < r.covariance.cols(); ++j) cov.back().push_back(r.covariance(i, j));
    }
    return {{"estimates", est},
            {"free", r.free},
            {"std_errors", se},
            {"covariance", cov},
            {"residual_norm", r.residual_norm},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"history", r.history},
            {"warnings", r.warnings},
            {"config", r.config}};
}

}  // namespace nanolaser
