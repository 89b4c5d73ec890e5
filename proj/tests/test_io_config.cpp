#include "catch_amalgamated.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include "nanolaser/config.hpp"
#include "nanolaser/io.hpp"

using namespace nanolaser;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / "nanolaser_test_io";
    fs::create_directories(d);
    return d / name;
}

nlohmann::json good_doc() {
    return nlohmann::json::parse(read_text(fs::path(NANOLASER_SOURCE_DIR) / "configs" / "paper-default.v1.json"));
}

bool has_issue(const std::vector<std::string>& issues, const std::string& s) {
    for (const auto& i : issues)
        if (i.find(s) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("doubles round-trip through text") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-300.0, 300.0);
    for (int k = 0; k < 1000; ++k) {
        const double v = std::ldexp(u(rng), static_cast<int>(u(rng)));
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(parse_double(" +1.5\r") == 1.5);
    CHECK_THROWS_AS(parse_double("1.5x"), IoError);
    CHECK_THROWS_AS(parse_double(""), IoError);
}

TEST_CASE("trajectory CSV and JSON are lossless") {
    Trajectory tr;
    tr.t0 = 0.0;
    tr.dt = 0.25;
    for (int k = 0; k < 50; ++k) {
        tr.samples.push_back({std::exp(-0.1 * k), 1.0 / (k + 3.0), 0.1 * k * k});
        tr.pump.push_back(std::sin(0.3 * k) + 1.0);
    }
    const auto a = trajectory_from_csv(trajectory_csv(tr));
    CHECK(a.samples == tr.samples);
    CHECK(a.pump == tr.pump);
    CHECK(a.dt == tr.dt);
    const auto b = trajectory_from_json(nlohmann::json::parse(to_json(tr).dump()));
    CHECK(b.samples == tr.samples);
    CHECK(b.pump == tr.pump);
    CHECK_THROWS_AS(trajectory_from_json(nlohmann::json{{"t0_ps", 0.0}}), IoError);
}

TEST_CASE("CSV readers reject malformed input") {
    CHECK_THROWS_WITH(trajectory_from_csv("t,N\n1,2\n"), ContainsSubstring("expected header"));
    CHECK_THROWS_AS(trajectory_from_csv(""), IoError);
    CHECK_THROWS_AS(chirp_trace_from_csv("t_ps,dlambda_pm,weight\n1,2\n"), IoError);
    CHECK_THROWS_AS(chirp_trace_from_csv("t_ps,dlambda_pm,weight\n1,2,1\n2,3,\n"), IoError);
    CHECK_THROWS_AS(ll_curve_from_csv("fluence_uJ_cm2,output_au\n1,abc\n"), IoError);
}

TEST_CASE("spectrogram binary round trip") {
    Spectrogram sp;
    sp.times = {0.0, 0.25, 0.5};
    sp.wavelengths = {-0.1, 0.0, 0.1, 0.2};
    for (int k = 0; k < 12; ++k) sp.intensity.push_back(k / 11.0);
    sp.lambda0 = 920.0;
    sp.window_fwhm = 6.0;
    sp.scale = 3.5e-7;
    const auto bin = spectrogram_binary(sp);
    const auto back = spectrogram_from_binary(bin);
    CHECK(back.times == sp.times);
    CHECK(back.wavelengths == sp.wavelengths);
    CHECK(back.intensity == sp.intensity);
    CHECK(back.lambda0 == sp.lambda0);
    CHECK(back.scale == sp.scale);

    std::string bad = bin;
    bad[0] = 'X';
    CHECK_THROWS_WITH(spectrogram_from_binary(bad), ContainsSubstring("bad magic"));
    CHECK_THROWS_AS(spectrogram_from_binary(bin.substr(0, bin.size() - 8)), IoError);
}

TEST_CASE("chirp trace and L-L round trips") {
    ChirpTrace c{{-1.0, 0.0, 1.5}, {-3.25, 0.1, 7.0}, {}};
    auto a = chirp_trace_from_csv(chirp_trace_csv(c));
    CHECK(a.times == c.times);
    CHECK(a.delta_lambda_pm == c.delta_lambda_pm);
    CHECK(a.weight.empty());
    c.weight = {0.5, 1.0, 0.25};
    CHECK(chirp_trace_from_csv(chirp_trace_csv(c)).weight == c.weight);

    LLCurve l;
    l.points = {{0.45, 1e-3}, {4.5, 0.7}, {450.0, 123.456}};
    const auto b = ll_curve_from_csv(ll_curve_csv(l));
    REQUIRE(b.points.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(b.points[i].fluence == l.points[i].fluence);
        CHECK(b.points[i].output == l.points[i].output);
    }
}

TEST_CASE("file helpers report IO errors") {
    const auto p = scratch("x.txt");
    write_text(p, "hello\n");
    CHECK(read_text(p) == "hello\n");
    CHECK_THROWS_AS(read_text(scratch("missing.txt")), IoError);
    write_text(p, "{not json");
    CHECK_THROWS_AS(read_json(p), IoError);
}

TEST_CASE("shipped parameter file loads as the built-in defaults") {
    const auto cfg = load_params(fs::path(NANOLASER_SOURCE_DIR) / "configs" / "paper-default.v1.json");
    CHECK(cfg.laser == paper_default());
    CHECK(cfg.pump.pulse_fwhm == 3.0);
    CHECK_THAT(cfg.pump.period, Catch::Matchers::WithinRel(default_period, 1e-15));
    CHECK(cfg.name == "paper-default");
    CHECK(validate_params_json(to_json(cfg)).empty());
}

TEST_CASE("strict schema reports every issue") {
    auto j = good_doc();
    j["laser"]["beta"] = 1.5;
    j["laser"]["betaa"] = 0.5;
    j["pump"]["period"] = -1.0;
    j["extra"] = 1;
    const auto issues = validate_params_json(j);
    CHECK(has_issue(issues, "laser.beta: must lie in [0, 1]"));
    CHECK(has_issue(issues, "did you mean \"beta\""));
    CHECK(has_issue(issues, "pump.period"));
    CHECK(has_issue(issues, "extra: unknown key"));

    auto k = good_doc();
    k["laser"].erase("tau_p");
    CHECK(has_issue(validate_params_json(k), "laser.tau_p: missing required key"));
    k.erase("schema");
    CHECK(has_issue(validate_params_json(k), "schema: missing required key"));
    k["schema"] = "nanolaser-params/9";
    CHECK(has_issue(validate_params_json(k), "schema: expected"));
    CHECK(!validate_params_json(nlohmann::json::array()).empty());

    const auto path = scratch("bad.json");
    write_json(path, j);
    try {
        load_params(path);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.issues().size() == issues.size());
    }
}

TEST_CASE("key suggestions") {
    CHECK(suggest("betaa", laser_keys()) == "beta");
    CHECK(suggest("tau_spp", laser_keys()) == "tau_sp");
    CHECK(suggest("zzzzzzzz", laser_keys()).empty());
    CHECK(edit_distance("kitten", "sitting") == 3);
}

TEST_CASE("command-line overrides") {
    ParamsConfig cfg;
    cfg.laser = paper_default();
    cfg.pump.period = default_period;
    apply_overrides(cfg, {"beta=0.1", "laser.tau_sp=40", "pump.pulse_fwhm=2"});
    CHECK(cfg.laser.beta == 0.1);
    CHECK(cfg.laser.tau_sp == 40.0);
    CHECK(cfg.pump.pulse_fwhm == 2.0);

    CHECK_THROWS_WITH(apply_overrides(cfg, {"betaa=1"}), ContainsSubstring("did you mean \"beta\""));
    CHECK_THROWS_WITH(apply_overrides(cfg, {"beta=abc"}), ContainsSubstring("not a number"));
    CHECK_THROWS_WITH(apply_overrides(cfg, {"beta"}), ContainsSubstring("expected key=value"));
    CHECK_THROWS_AS(apply_overrides(cfg, {"beta=2"}), ConfigError);
    CHECK_THROWS_AS(apply_overrides(cfg, {"pump.period=-1"}), ConfigError);
}
