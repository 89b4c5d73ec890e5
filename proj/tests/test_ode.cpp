#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "nanolaser/dynamics.hpp"
#include "nanolaser/ode.hpp"

using namespace nanolaser;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("exponential decay at default tolerances") {
    auto tau = GENERATE(0.5, 11.0, 50.0);
    auto f = [&](double, const std::array<double, 1>& y) { return std::array<double, 1>{-y[0] / tau}; };
    IntegratorConfig cfg;
    cfg.output_dt = 0.25;
    const auto sol = integrate_system<1>(f, {1.0}, 0.0, 5.0 * tau, cfg);
    double worst = 0.0;
    for (std::size_t k = 0; k < sol.samples.size(); ++k) {
        const double t = sol.t0 + static_cast<double>(k) * sol.dt;
        worst = std::max(worst, std::abs(sol.samples[k][0] / std::exp(-t / tau) - 1.0));
    }
    CHECK(worst < 1e-8);
    CHECK_THAT(sol.final_state[0], WithinRel(std::exp(-5.0), 1e-8));
}

TEST_CASE("constant solution stays constant") {
    auto f = [](double, const std::array<double, 2>&) { return std::array<double, 2>{0.0, 0.0}; };
    const auto sol = integrate_system<2>(f, {3.0, -2.0}, 0.0, 100.0, IntegratorConfig{});
    for (const auto& s : sol.samples) {
        CHECK(s[0] == 3.0);
        CHECK(s[1] == -2.0);
    }
}

TEST_CASE("output grid covers the span") {
    auto f = [](double t, const std::array<double, 1>&) { return std::array<double, 1>{std::cos(t)}; };
    IntegratorConfig cfg;
    cfg.output_dt = 0.1;
    const auto sol = integrate_system<1>(f, {0.0}, 1.0, 11.0, cfg);
    REQUIRE(sol.samples.size() == 101);
    for (std::size_t k = 0; k < sol.samples.size(); ++k) {
        const double t = 1.0 + 0.1 * static_cast<double>(k);
        CHECK_THAT(sol.samples[k][0], WithinAbs(std::sin(t) - std::sin(1.0), 1e-8));
    }
}

TEST_CASE("dense output is fifth-order accurate") {
    // fixed step through max_step, loose tolerances so the step size is the cap
    auto f = [](double t, const std::array<double, 1>& y) { return std::array<double, 1>{y[0] * std::cos(t)}; };
    auto err = [&](double h) {
        IntegratorConfig cfg;
        cfg.rel_tol = 1.0;
        cfg.abs_tol = 1.0;
        cfg.max_step = h;
        cfg.output_dt = 2.0;
        const auto sol = integrate_system<1>(f, {1.0}, 0.0, 2.0, cfg);
        return std::abs(sol.final_state[0] - std::exp(std::sin(2.0)));
    };
    const double e1 = err(0.1), e2 = err(0.05);
    const double order = std::log2(e1 / e2);
    CHECK(order > 4.5);
    CHECK(order < 5.5);
}

TEST_CASE("repeat integrations are identical") {
    auto f = [](double t, const std::array<double, 2>& y) {
        return std::array<double, 2>{y[1], -y[0] - 0.1 * y[1] + std::sin(3.0 * t)};
    };
    const auto a = integrate_system<2>(f, {1.0, 0.0}, 0.0, 40.0, IntegratorConfig{});
    const auto b = integrate_system<2>(f, {1.0, 0.0}, 0.0, 40.0, IntegratorConfig{});
    CHECK(a.samples == b.samples);
    CHECK(a.stats.accepted == b.stats.accepted);
    CHECK(a.stats.accepted > 0);
}

TEST_CASE("configuration and inputs are checked") {
    auto f = [](double, const std::array<double, 1>& y) { return y; };
    IntegratorConfig bad;
    bad.rel_tol = 0.0;
    CHECK_THROWS_AS(integrate_system<1>(f, {1.0}, 0.0, 1.0, bad), InvalidArgument);
    CHECK_THROWS_AS(integrate_system<1>(f, {1.0}, 1.0, 1.0, IntegratorConfig{}), InvalidArgument);
    CHECK_THROWS_AS(integrate_system<1>(f, {std::nan("")}, 0.0, 1.0, IntegratorConfig{}), InvalidArgument);
}

TEST_CASE("blow-up is reported as a numerical error") {
    auto f = [](double, const std::array<double, 1>& y) { return std::array<double, 1>{y[0] * y[0]}; };
    CHECK_THROWS_AS(integrate_system<1>(f, {1.0}, 0.0, 2.0, IntegratorConfig{}), NumericalError);
}

TEST_CASE("negative values in a non-negative component are an error") {
    auto f = [](double, const std::array<double, 1>&) { return std::array<double, 1>{-1.0}; };
    CHECK_THROWS_AS(integrate_system<1>(f, {1.0}, 0.0, 3.0, IntegratorConfig{}, {true}), NumericalError);
    // without the mask the same system is fine
    const auto sol = integrate_system<1>(f, {1.0}, 0.0, 3.0, IntegratorConfig{});
    CHECK_THAT(sol.final_state[0], WithinAbs(-2.0, 1e-12));
}

TEST_CASE("trajectory wrapper") {
    auto rhs = [](double, const State& y) { return State{-y.n, -2.0 * y.p, 1.0}; };
    const auto tr = integrate(rhs, State{1.0, 1.0, 0.0}, 0.0, 2.0, IntegratorConfig{});
    REQUIRE(tr.size() == 9);
    CHECK_THAT(tr.time(8), WithinAbs(2.0, 1e-15));
    CHECK_THAT(tr.samples[8].n, WithinRel(std::exp(-2.0), 1e-9));
    CHECK_THAT(tr.samples[8].phi, WithinAbs(2.0, 1e-12));
}

TEST_CASE("pulse response of the laser") {
    const auto p = paper_default();
    PumpProfile pr;
    pr.period = default_period;
    pr.pulses = {{50.0, peak_rate_for_fluence(p, 5.0 * threshold_fluence(p))}};

    SECTION("reported period starts at zero with zero phase") {
        const auto tr = simulate_pulse_response(p, pr, 2, IntegratorConfig{}, 400.0);
        CHECK(tr.t0 == 0.0);
        CHECK(tr.samples.front().phi == 0.0);
        CHECK(tr.size() == 1601);
        CHECK(tr.pump.size() == tr.size());
        CHECK_THAT(tr.pump[200], WithinRel(pr.pulses[0].peak_rate, 1e-12));
        for (const auto& s : tr.samples) {
            CHECK(s.n >= 0.0);
            CHECK(s.p >= 0.0);
        }
    }
    SECTION("periodic steady state is reached") {
        const auto a = simulate_pulse_response(p, pr, 2, IntegratorConfig{}, 400.0);
        const auto b = simulate_pulse_response(p, pr, 3, IntegratorConfig{}, 400.0);
        for (std::size_t k = 0; k < a.size(); k += 40) CHECK_THAT(b.samples[k].p, WithinRel(a.samples[k].p, 1e-6));
    }
    SECTION("single shot") {
        PumpProfile one = pr;
        one.period = 0.0;
        const auto tr = simulate_pulse_response(p, one, 1);
        CHECK_THAT(tr.t_end(), WithinAbs(single_shot_span(p, one), 0.25));
        CHECK(tr.samples.back().n < 1e-2);
    }
    SECTION("bad inputs") {
        CHECK_THROWS_AS(simulate_pulse_response(p, pr, 0), InvalidArgument);
        LaserParams bad = p;
        bad.tau_sp = 0.0;
        CHECK_THROWS_AS(simulate_pulse_response(bad, pr), InvalidArgument);
    }
}

TEST_CASE("stable step respects the photon rate") {
    const auto p = paper_default();
    PumpProfile pr;
    CHECK_THAT(stable_step(p, pr), WithinRel(2.0 / (1.0 / 0.05 + 18.0), 1e-15));
    LaserParams slow = p;
    slow.tau_p = 100.0;
    slow.g0 = 0.001;
    CHECK(stable_step(slow, pr) == 1.5);
}
