#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>

#include "nanolaser/least_squares.hpp"

using namespace nanolaser;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) x[i++] = d;
    return x;
}

const double inf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("Rosenbrock minimum") {
    auto f = [](const Eigen::VectorXd& x) { return vec({10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]}); };
    LevenbergMarquardt lm(f, vec({-inf, -inf}), vec({inf, inf}), vec({1.0, 1.0}));
    const auto r = lm.solve(vec({-1.2, 1.0}));
    CHECK(r.converged);
    CHECK_THAT(r.x[0], WithinAbs(1.0, 1e-8));
    CHECK_THAT(r.x[1], WithinAbs(1.0, 1e-8));
}

TEST_CASE("exponential fit recovers parameters and covariance scale") {
    std::vector<double> t, y;
    for (int i = 0; i < 50; ++i) {
        t.push_back(0.2 * i);
        y.push_back(3.0 * std::exp(-0.7 * t.back()) + 0.5);
    }
    auto f = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = x[0] * std::exp(-x[1] * t[i]) + x[2] - y[i];
        return r;
    };
    LevenbergMarquardt lm(f, vec({-inf, 0.0, -inf}), vec({inf, inf, inf}), vec({1.0, 1.0, 1.0}));
    const auto r = lm.solve(vec({1.0, 0.1, 0.0}));
    CHECK_THAT(r.x[0], WithinRel(3.0, 1e-8));
    CHECK_THAT(r.x[1], WithinRel(0.7, 1e-8));
    CHECK_THAT(r.x[2], WithinRel(0.5, 1e-8));
    CHECK(r.covariance.rows() == 3);
    CHECK(r.cost < 1e-20);
}

TEST_CASE("accepted steps never increase the residual norm") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 0.05);
    std::vector<double> t, y;
    for (int i = 0; i < 80; ++i) {
        t.push_back(0.1 * i);
        y.push_back(std::sin(1.3 * t.back() + 0.4) * 2.0 + z(rng));
    }
    auto f = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = x[0] * std::sin(x[1] * t[i] + x[2]) - y[i];
        return r;
    };
    LevenbergMarquardt lm(f, vec({-inf, -inf, -inf}), vec({inf, inf, inf}), vec({1.0, 1.0, 1.0}));
    const auto r = lm.solve(vec({1.0, 1.0, 0.0}));
    REQUIRE(r.history.size() >= 2);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
    CHECK_THAT(std::abs(r.x[1]), WithinAbs(1.3, 0.01));
}

TEST_CASE("bounds are honoured") {
    auto f = [](const Eigen::VectorXd& x) { return vec({x[0] + 2.0}); };
    LevenbergMarquardt lm(f, vec({0.0}), vec({10.0}), vec({1.0}));
    const auto r = lm.solve(vec({5.0}));
    CHECK(r.x[0] == 0.0);
}

TEST_CASE("rank-deficient Jacobian is reported") {
    auto f = [](const Eigen::VectorXd& x) { return vec({x[0] + x[1] - 1.0, 2.0 * (x[0] + x[1]) - 2.0}); };
    LevenbergMarquardt lm(f, vec({-inf, -inf}), vec({inf, inf}), vec({1.0, 1.0}));
    try {
        lm.solve(vec({0.0, 0.0}));
        FAIL("expected a singular Jacobian");
    } catch (const FitError& e) {
        CHECK(e.kind() == FitError::Kind::singular_jacobian);
    }
}

TEST_CASE("non-finite start is rejected") {
    auto f = [](const Eigen::VectorXd& x) { return vec({std::log(x[0])}); };
    LevenbergMarquardt lm(f, vec({-inf}), vec({inf}), vec({1.0}));
    CHECK_THROWS_AS(lm.solve(vec({-1.0})), FitError);
}

TEST_CASE("covariance of a linear model") {
    // y = a + b x with unit design: (J^T J)^-1 known in closed form
    Eigen::MatrixXd j(4, 2);
    j << 1, 0, 1, 1, 1, 2, 1, 3;
    const auto c = LevenbergMarquardt::covariance(j, 2.0);
    // s^2 = 2 / 2 = 1; (J^T J) = [[4, 6], [6, 14]], det 20
    CHECK_THAT(c(0, 0), WithinRel(14.0 / 20.0, 1e-12));
    CHECK_THAT(c(1, 1), WithinRel(4.0 / 20.0, 1e-12));
    CHECK_THAT(c(0, 1), WithinRel(-6.0 / 20.0, 1e-12));
}
