#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dynamics.hpp"
#include "errors.hpp"
#include "io.hpp"

namespace nanolaser {

inline constexpr std::string_view params_schema = "nanolaser-params/1";

inline const std::vector<std::string>& laser_keys() {
    static const std::vector<std::string> k{"beta", "tau_sp", "tau_free", "tau_p",   "g0",      "n_tr",
                                            "gamma_conf", "eps_sat", "alpha_h", "lambda0", "eta_pump"};
    return k;
}

inline const std::vector<std::string>& pump_keys() {
    static const std::vector<std::string> k{"pulses", "pulse_fwhm", "period"};
    return k;
}

inline const std::vector<std::string>& top_level_keys() {
    static const std::vector<std::string> k{"schema", "name", "description", "laser", "pump", "calibration"};
    return k;
}

/// A validated parameter file.
struct ParamsConfig {
    std::string name;
    LaserParams laser;
    PumpProfile pump;  // pulse_fwhm and period; pulses usually empty
    nlohmann::json calibration = nlohmann::json::object();
};

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

/// Closest allowed key within edit distance 2, or empty.
inline std::string suggest(std::string_view key, const std::vector<std::string>& allowed) {
    std::string best;
    std::size_t bd = 3;
    for (const auto& k : allowed) {
        const auto d = edit_distance(key, k);
        if (d < bd) {
            bd = d;
            best = k;
        }
    }
    return best;
}

namespace detail {

inline std::string unknown_key(const std::string& path, const std::string& key, const std::vector<std::string>& allowed) {
    std::string msg = path + key + ": unknown key";
    if (auto s = suggest(key, allowed); !s.empty()) msg += " (did you mean \"" + s + "\"?)";
    return msg;
}

inline void check_keys(const nlohmann::json& obj, const std::string& path, const std::vector<std::string>& allowed,
                       std::vector<std::string>& issues) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            issues.push_back(unknown_key(path, it.key(), allowed));
}

inline bool read_number(const nlohmann::json& obj, const std::string& path, const std::string& key, double& out,
                        std::vector<std::string>& issues, bool required = true) {
    if (!obj.contains(key)) {
        if (required) issues.push_back(path + key + ": missing required key");
        return false;
    }
    const auto& v = obj.at(key);
    if (!v.is_number()) {
        issues.push_back(path + key + ": expected a number");
        return false;
    }
    out = v.get<double>();
    return true;
}

}  // namespace detail

inline nlohmann::json to_json(const LaserParams& p) {
    return {{"beta", p.beta},         {"tau_sp", p.tau_sp},   {"tau_free", p.tau_free},     {"tau_p", p.tau_p},
            {"g0", p.g0},             {"n_tr", p.n_tr},       {"gamma_conf", p.gamma_conf}, {"eps_sat", p.eps_sat},
            {"alpha_h", p.alpha_h},   {"lambda0", p.lambda0}, {"eta_pump", p.eta_pump}};
}

inline nlohmann::json to_json(const PumpProfile& pr) {
    nlohmann::json pulses = nlohmann::json::array();
    for (const auto& p : pr.pulses) pulses.push_back({{"arrival_time", p.arrival_time}, {"peak_rate", p.peak_rate}});
    return {{"pulses", pulses}, {"pulse_fwhm", pr.pulse_fwhm}, {"period", pr.period}};
}

/// Strict read of a LaserParams object; every issue is collected.
inline LaserParams laser_from_json(const nlohmann::json& j, std::vector<std::string>& issues,
                                   const std::string& path = "laser.") {
    LaserParams p;
    if (!j.is_object()) {
        issues.push_back(path.substr(0, path.size() - 1) + ": expected an object");
        return p;
    }
    detail::check_keys(j, path, laser_keys(), issues);
    double* fields[] = {&p.beta, &p.tau_sp, &p.tau_free, &p.tau_p,   &p.g0,      &p.n_tr,
                        &p.gamma_conf, &p.eps_sat, &p.alpha_h, &p.lambda0, &p.eta_pump};
    bool complete = true;
    for (std::size_t i = 0; i < laser_keys().size(); ++i)
        complete &= detail::read_number(j, path, laser_keys()[i], *fields[i], issues);
    if (complete)
        for (const auto& msg : validate(p)) issues.push_back(path + msg);
    return p;
}

inline PumpProfile pump_from_json(const nlohmann::json& j, std::vector<std::string>& issues,
                                  const std::string& path = "pump.") {
    PumpProfile pr;
    pr.period = default_period;
    if (!j.is_object()) {
        issues.push_back(path.substr(0, path.size() - 1) + ": expected an object");
        return pr;
    }
    detail::check_keys(j, path, pump_keys(), issues);
    detail::read_number(j, path, "pulse_fwhm", pr.pulse_fwhm, issues, false);
    detail::read_number(j, path, "period", pr.period, issues, false);
    if (j.contains("pulses")) {
        const auto& ps = j.at("pulses");
        if (!ps.is_array()) {
            issues.push_back(path + "pulses: expected an array");
        } else {
            for (std::size_t i = 0; i < ps.size(); ++i) {
                const std::string p2 = path + "pulses[" + std::to_string(i) + "].";
                if (!ps[i].is_object()) {
                    issues.push_back(p2.substr(0, p2.size() - 1) + ": expected an object");
                    continue;
                }
                detail::check_keys(ps[i], p2, {"arrival_time", "peak_rate"}, issues);
                PumpPulse pl;
                detail::read_number(ps[i], p2, "arrival_time", pl.arrival_time, issues);
                detail::read_number(ps[i], p2, "peak_rate", pl.peak_rate, issues);
                pr.pulses.push_back(pl);
            }
        }
    }
    for (const auto& msg : validate(pr)) issues.push_back(path + msg);
    return pr;
}

/// Full strict-schema report for a parsed document; empty when valid.
inline std::vector<std::string> validate_params_json(const nlohmann::json& j, ParamsConfig* out = nullptr) {
    std::vector<std::string> issues;
    if (!j.is_object()) return {"document: expected a JSON object"};
    detail::check_keys(j, "", top_level_keys(), issues);
    ParamsConfig cfg;
    cfg.pump.period = default_period;
    if (!j.contains("schema"))
        issues.emplace_back("schema: missing required key");
    else if (!j.at("schema").is_string() || j.at("schema").get<std::string>() != params_schema)
        issues.push_back("schema: expected \"" + std::string(params_schema) + "\"");
    if (j.contains("name")) {
        if (j.at("name").is_string())
            cfg.name = j.at("name").get<std::string>();
        else
            issues.emplace_back("name: expected a string");
    }
    if (j.contains("description") && !j.at("description").is_string()) issues.emplace_back("description: expected a string");
    if (!j.contains("laser"))
        issues.emplace_back("laser: missing required key");
    else
        cfg.laser = laser_from_json(j.at("laser"), issues);
    if (j.contains("pump")) cfg.pump = pump_from_json(j.at("pump"), issues);
    if (j.contains("calibration")) {
        if (j.at("calibration").is_object())
            cfg.calibration = j.at("calibration");
        else
            issues.emplace_back("calibration: expected an object");
    }
    if (out) *out = std::move(cfg);
    return issues;
}

inline std::vector<std::string> validate_config(const std::filesystem::path& path) {
    return validate_params_json(read_json(path));
}

inline ParamsConfig load_params(const std::filesystem::path& path) {
    ParamsConfig cfg;
    auto issues = validate_params_json(read_json(path), &cfg);
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return cfg;
}

/// Apply "key=value" overrides; keys are laser fields (optionally "laser."-prefixed)
/// or "pump.pulse_fwhm" / "pump.period".
inline void apply_overrides(ParamsConfig& cfg, const std::vector<std::string>& overrides) {
    std::vector<std::string> issues;
    std::vector<std::string> allowed;
    for (const auto& k : laser_keys()) allowed.push_back(k);
    for (const auto& k : laser_keys()) allowed.push_back("laser." + k);
    allowed.emplace_back("pump.pulse_fwhm");
    allowed.emplace_back("pump.period");

    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) {
            issues.push_back("--set " + ov + ": expected key=value");
            continue;
        }
        std::string key = ov.substr(0, eq);
        double value;
        try {
            value = parse_double(ov.substr(eq + 1));
        } catch (const IoError&) {
            issues.push_back("--set " + key + ": value is not a number");
            continue;
        }
        if (key.starts_with("laser.")) key = key.substr(6);
        const auto& lk = laser_keys();
        if (auto it = std::find(lk.begin(), lk.end(), key); it != lk.end()) {
            nlohmann::json j = to_json(cfg.laser);
            j[key] = value;
            std::vector<std::string> sub;
            cfg.laser = laser_from_json(j, sub);
            for (auto& s : sub) issues.push_back("--set " + s);
        } else if (key == "pump.pulse_fwhm" || key == "pump.period") {
            (key == "pump.period" ? cfg.pump.period : cfg.pump.pulse_fwhm) = value;
            for (const auto& s : validate(cfg.pump)) issues.push_back("--set pump." + s);
        } else {
            issues.push_back(detail::unknown_key("--set ", key, allowed));
        }
    }
    if (!issues.empty()) throw ConfigError(std::move(issues));
}

inline nlohmann::json to_json(const ParamsConfig& c) {
    nlohmann::json pump = to_json(c.pump);
    if (c.pump.pulses.empty()) pump.erase("pulses");
    nlohmann::json j = {{"schema", params_schema}, {"laser", to_json(c.laser)}, {"pump", pump}};
    if (!c.name.empty()) j["name"] = c.name;
    if (!c.calibration.empty()) j["calibration"] = c.calibration;
    return j;
}

}  // namespace nanolaser
