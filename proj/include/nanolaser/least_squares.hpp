#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace nanolaser {

struct LMOptions {
    int max_iterations = 200;
    double ftol = 1e-15;  // relative cost reduction
    double xtol = 1e-13;  // relative step size
    double gtol = 1e-14;  // scaled gradient
    double initial_lambda = 1e-3;
};

struct LMResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    Eigen::MatrixXd covariance;
    double cost = 0.0;  // sum of squared residuals
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;  // residual norm after each accepted step
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Box-projected Levenberg-Marquardt with forward-difference Jacobians.
class LevenbergMarquardt {
public:
    LevenbergMarquardt(ResidualFn f, Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::VectorXd typical)
        : f_(std::move(f)), lo_(std::move(lower)), hi_(std::move(upper)), typ_(std::move(typical)) {}

    Eigen::VectorXd project(Eigen::VectorXd x) const {
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo_[i], hi_[i]);
        return x;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const {
        const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
        Eigen::MatrixXd j(r.size(), x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            double h = root_eps * std::max(std::abs(x[k]), typ_[k]);
            Eigen::VectorXd xp = x;
            xp[k] += h;
            if (xp[k] > hi_[k]) {
                h = -h;
                xp[k] = x[k] + h;
            }
            h = xp[k] - x[k];
            j.col(k) = (f_(xp) - r) / h;
        }
        return j;
    }

    LMResult solve(Eigen::VectorXd x, const LMOptions& opt = {}) const {
        LMResult res;
        x = project(std::move(x));
        Eigen::VectorXd r = f_(x);
        check_finite(r);
        double cost = r.squaredNorm();
        double lambda = opt.initial_lambda;
        const Eigen::Index n = x.size();

        int it = 0;
        bool done = false;
        while (!done && it < opt.max_iterations) {
            ++it;
            const Eigen::MatrixXd j = jacobian(x, r);
            const Eigen::MatrixXd a = j.transpose() * j;
            const Eigen::VectorXd g = j.transpose() * r;
            Eigen::VectorXd d = a.diagonal();
            for (Eigen::Index k = 0; k < n; ++k)
                if (!(d[k] > 0.0)) d[k] = 1.0;
            if (scaled_gradient(g, d, cost) < opt.gtol) {
                done = true;
                break;
            }
            bool accepted = false;
            while (!accepted) {
                Eigen::MatrixXd m = a;
                m.diagonal() += lambda * d;
                const Eigen::VectorXd step = m.ldlt().solve(-g);
                const Eigen::VectorXd xn = project(x + step);
                const Eigen::VectorXd dx = xn - x;
                Eigen::VectorXd rn = f_(xn);
                const double cn = all_finite(rn) ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
                if (cn <= cost && step.allFinite()) {
                    const bool small_gain = cost - cn <= opt.ftol * cost;
                    const bool small_step = dx.norm() <= opt.xtol * (x.norm() + opt.xtol);
                    x = xn;
                    r = std::move(rn);
                    cost = cn;
                    lambda = std::max(lambda / 10.0, 1e-12);
                    res.history.push_back(std::sqrt(cost));
                    accepted = true;
                    if (small_gain || small_step) done = true;
                } else {
                    lambda *= 10.0;
                    if (lambda > 1e16) {
                        // no descent direction left at machine precision
                        done = true;
                        break;
                    }
                }
            }
        }
        res.x = x;
        res.residuals = r;
        res.cost = cost;
        res.iterations = it;
        res.converged = done;
        res.jacobian = jacobian(x, r);
        res.covariance = covariance(res.jacobian, cost);
        return res;
    }

    /// s^2 (J^T J)^-1 with s^2 = cost / (m - n).
    static Eigen::MatrixXd covariance(const Eigen::MatrixXd& j, double cost) {
        const Eigen::Index m = j.rows(), n = j.cols();
        if (n == 0) return Eigen::MatrixXd(0, 0);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(j);
        qr.setThreshold(1e-12);
        if (qr.rank() < n) throw FitError(FitError::Kind::singular_jacobian, "singular Jacobian");
        const Eigen::MatrixXd jtj = j.transpose() * j;
        Eigen::MatrixXd inv = jtj.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
        const double s2 = m > n ? cost / static_cast<double>(m - n) : 0.0;
        inv = 0.5 * (inv + inv.transpose());
        return s2 * inv;
    }

private:
    static bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

    static void check_finite(const Eigen::VectorXd& r) {
        if (!r.allFinite()) throw FitError(FitError::Kind::insufficient_data, "residuals not finite at the initial point");
    }

    static double scaled_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& d, double cost) {
        if (cost == 0.0) return 0.0;
        double s = 0.0;
        for (Eigen::Index k = 0; k < g.size(); ++k) s = std::max(s, std::abs(g[k]) / std::sqrt(d[k] * cost));
        return s;
    }

    ResidualFn f_;
    Eigen::VectorXd lo_, hi_, typ_;
};

}  // namespace nanolaser
