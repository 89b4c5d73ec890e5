#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>

#include "nanolaser/estimation.hpp"

using namespace nanolaser;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ChirpTrace model_trace(const ChirpModelParams& p, double step = 0.5) {
    ChirpTrace c;
    for (double t = -1.4 * p.delta_tau; t <= 1.4 * p.delta_tau; t += step) {
        c.times.push_back(t);
        c.delta_lambda_pm.push_back(koyama_chirp(t, p));
    }
    return c;
}

}  // namespace

TEST_CASE("chirp model reference values") {
    const ChirpModelParams p;
    // 40-digit reference evaluations
    CHECK_THAT(koyama_chirp(0.0, p), WithinRel(1.560984701751842, 1e-12));
    CHECK_THAT(koyama_chirp(10.0, p), WithinRel(32.97621523973743, 1e-12));
    CHECK_THAT(koyama_chirp(-20.0, p), WithinRel(-58.17755798806600, 1e-12));
    CHECK_THAT(koyama_chirp(30.0, p), WithinRel(105.0252585817365, 1e-12));
    CHECK_THAT(central_redshift(p), WithinRel(108.5656234708638, 1e-12));
}

TEST_CASE("chirp model is linear in alpha") {
    ChirpModelParams p;
    const double t = GENERATE(-40.0, -7.5, 0.0, 12.0, 50.0);
    const double base = koyama_chirp(t, p);
    p.alpha_h *= 2.0;
    CHECK_THAT(koyama_chirp(t, p), WithinRel(2.0 * base, 1e-14));
    p.alpha_h = 0.0;
    CHECK(koyama_chirp(t, p) == 0.0);
}

TEST_CASE("odd part is the linear term, even part the exponential") {
    const ChirpModelParams p;
    const double t = GENERATE(3.0, 17.5, 35.0, 52.0);
    const double odd = 0.5 * (koyama_chirp(t, p) - koyama_chirp(-t, p));
    const double even = 0.5 * (koyama_chirp(t, p) + koyama_chirp(-t, p));
    CHECK_THAT(odd, WithinRel(detail::chirp_linear(t, p), 1e-12));
    CHECK_THAT(even, WithinRel(detail::chirp_exponential(t, p), 1e-12));
    CHECK_THAT(central_redshift(p), WithinRel(2.0 * detail::chirp_linear(17.5, p), 1e-12));
}

TEST_CASE("chirp model domain and parameters are checked") {
    ChirpModelParams p;
    CHECK_NOTHROW(koyama_chirp(52.5, p));
    CHECK_THROWS_AS(koyama_chirp(52.6, p), InvalidArgument);
    CHECK_NOTHROW(koyama_chirp(60.0, p, 2.0));
    p.delta_tau = 0.0;
    CHECK_THROWS_AS(koyama_chirp(0.0, p), InvalidArgument);
}

TEST_CASE("time-bandwidth relations") {
    CHECK_THAT(transform_limit, WithinRel(0.4412712003053032, 1e-15));
    CHECK_THAT(tbp_from_alpha(3.05), WithinRel(1.416370574579634, 1e-14));
    CHECK_THAT(alpha_from_widths(35.0, 40.5), WithinRel(3.052693424763780, 1e-12));
    CHECK_THAT(1000.0 * tbp_from_alpha(3.05) / 35.0, WithinRel(40.46773070227525, 1e-12));
    CHECK(alpha_from_tbp(transform_limit) == 0.0);
    const double a = GENERATE(0.0, 0.5, 3.05, 7.0);
    CHECK_THAT(alpha_from_tbp(tbp_from_alpha(a)), WithinAbs(a, 1e-12));
    CHECK_THROWS_AS(alpha_from_tbp(0.3), InvalidArgument);
    CHECK_THROWS_AS(tbp_from_alpha(-1.0), InvalidArgument);
    CHECK_THROWS_AS(alpha_from_widths(0.0, 40.0), InvalidArgument);
}

TEST_CASE("chirp fit recovers the exponential amplitude") {
    ChirpModelParams truth;
    truth.nth_over_p = 0.31;
    const auto trace = model_trace(truth);
    ChirpModelParams start = truth;
    start.nth_over_p = 0.05;
    const auto r = fit_chirp(trace, start);
    CHECK(r.converged);
    CHECK_THAT(r.estimate("nth_over_p"), WithinRel(0.31, 1e-6));
    CHECK(r.estimate("alpha_h") == truth.alpha_h);
    CHECK(r.free == std::vector<std::string>{"nth_over_p"});
    CHECK(r.warnings.empty());
    CHECK(r.residual_norm < 1e-6);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
}

TEST_CASE("chirp fit with alpha free") {
    ChirpModelParams truth;
    truth.alpha_h = 2.2;
    ChirpModelParams start;
    const auto r = fit_chirp(model_trace(truth), start, ChirpFitOptions{.fit_alpha = true});
    CHECK_THAT(r.estimate("alpha_h"), WithinRel(2.2, 1e-6));
    CHECK_THAT(r.estimate("nth_over_p"), WithinRel(0.17, 1e-6));
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("alpha_h") != std::string::npos);
}

TEST_CASE("noisy chirp fit stays near the truth") {
    const ChirpModelParams truth;
    auto trace = model_trace(truth);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z(0.0, 2.0);
    for (double& v : trace.delta_lambda_pm) v += z(rng);
    const auto r = fit_chirp(trace, truth);
    CHECK(std::abs(r.estimate("nth_over_p") - 0.17) < 4.0 * r.std_error("nth_over_p"));
    CHECK(r.std_error("nth_over_p") > 0.0);
}

TEST_CASE("weights and offsets") {
    const ChirpModelParams truth;
    auto trace = model_trace(truth);
    for (double& t : trace.times) t += 100.0;
    trace.weight.assign(trace.size(), 1.0);
    const auto r = fit_chirp(trace, truth, ChirpFitOptions{.use_weights = true, .time_offset = 100.0});
    CHECK_THAT(r.estimate("nth_over_p"), WithinRel(0.17, 1e-6));
    CHECK(r.config["use_weights"] == true);
    trace.weight.pop_back();
    CHECK_THROWS_AS(fit_chirp(trace, truth, ChirpFitOptions{.use_weights = true}), InvalidArgument);
}

TEST_CASE("chirp fit needs data inside the domain") {
    ChirpTrace c{{-200.0, 0.0, 1.0, 2.0, 3.0, 300.0}, {0, 0, 0, 0, 0, 0}, {}};
    try {
        fit_chirp(c, ChirpModelParams{});
        FAIL("expected insufficient data");
    } catch (const FitError& e) {
        CHECK(e.kind() == FitError::Kind::insufficient_data);
    }
}

TEST_CASE("steady L-L curve") {
    const auto p = paper_default();
    const auto fl = std::vector<double>{0.45, 4.5, 45.0, 450.0};
    const auto c = generate_ll_curve(p, fl, LLMode::steady, 1);
    REQUIRE(c.points.size() == 4);
    for (std::size_t i = 1; i < c.points.size(); ++i) CHECK(c.points[i].output > c.points[i - 1].output);
    CHECK(log_log_slopes(c).size() == 3);
    CHECK(ll_output(p, 0.0, LLMode::steady) == 0.0);
    CHECK_THROWS_AS(generate_ll_curve(p, {}, LLMode::steady), InvalidArgument);
    CHECK_THROWS_AS(generate_ll_curve(p, {1.0, 1.0}, LLMode::steady), InvalidArgument);
    CHECK_THROWS_AS(ll_output(p, -1.0, LLMode::steady), InvalidArgument);
}

TEST_CASE("unit beta gives a straight L-L line") {
    auto p = paper_default();
    p.beta = 1.0;
    std::vector<double> fl;
    for (int k = 0; k <= 20; ++k) fl.push_back(0.45 * std::pow(10.0, k / 10.0));
    for (double s : log_log_slopes(generate_ll_curve(p, fl, LLMode::steady))) CHECK_THAT(s, WithinAbs(1.0, 1e-6));
}

TEST_CASE("lower beta gives a sharper kink") {
    auto p = paper_default();
    std::vector<double> fl;
    for (int k = 0; k <= 30; ++k) fl.push_back(0.45 * std::pow(10.0, k / 10.0));
    auto max_slope = [&](double beta) {
        p.beta = beta;
        const auto s = log_log_slopes(generate_ll_curve(p, fl, LLMode::steady));
        return *std::max_element(s.begin(), s.end());
    };
    CHECK(max_slope(0.01) > max_slope(0.67));
}

TEST_CASE("pulsed L-L points are thread-count independent") {
    const auto p = paper_default();
    const std::vector<double> fl{2.0, 9.0, 30.0};
    const auto a = generate_ll_curve(p, fl, LLMode::pulsed, 1);
    const auto b = generate_ll_curve(p, fl, LLMode::pulsed, 3);
    for (std::size_t i = 0; i < fl.size(); ++i) {
        CHECK(a.points[i].output == b.points[i].output);
        CHECK(a.points[i].output > 0.0);
    }
    CHECK(a.points[2].output > a.points[1].output);
}

TEST_CASE("L-L fit recovers beta from noiseless data") {
    auto truth = paper_default();
    truth.beta = 0.3;
    std::vector<double> fl;
    for (int k = 0; k <= 20; ++k) fl.push_back(0.45 * std::pow(10.0, k / 7.0));
    auto data = generate_ll_curve(truth, fl, LLMode::steady);
    for (auto& pt : data.points) pt.output *= 2.5;
    const auto r = fit_ll(data, paper_default(), {"beta", "output_scale"});
    CHECK_THAT(r.estimate("beta"), WithinRel(0.3, 1e-6));
    CHECK_THAT(r.estimate("output_scale"), WithinRel(2.5, 1e-6));
    CHECK(r.residual_norm < 1e-6);
    REQUIRE(r.std_errors.size() == 2);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
}

TEST_CASE("L-L fit input checks") {
    const auto p = paper_default();
    LLCurve c;
    for (int k = 1; k <= 6; ++k) c.points.push_back({double(k), double(k)});
    CHECK_THROWS_AS(fit_ll(c, p, {"tau_sp"}), InvalidArgument);
    CHECK_THROWS_AS(fit_ll(c, p, {}), InvalidArgument);
    LLFitOptions cut;
    cut.fluence_cutoff = 2.5;
    try {
        fit_ll(c, p, {"beta", "output_scale"}, cut);
        FAIL("expected insufficient data");
    } catch (const FitError& e) {
        CHECK(e.kind() == FitError::Kind::insufficient_data);
    }
    c.points[2].output = 0.0;
    CHECK_THROWS_AS(fit_ll(c, p, {"beta"}), InvalidArgument);
}
