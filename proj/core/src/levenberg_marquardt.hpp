#pragma once

// Damped Gauss-Newton with Marquardt's diagonal scaling. The caller works in
// well-scaled coordinates; the model supplies residuals and the analytic
// Jacobian in one call.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>

#include "mxbolo/analysis.hpp"
#include "mxbolo/error.hpp"

namespace mxbolo::detail {

struct LmResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;  ///< s^2 (J^T J)^-1, s^2 = RSS / (m - n)
    double residual_norm = 0.0;
    int iterations = 0;
};

/// Fills r (size m) and J (m x n) at p.
using LmModel = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& J)>;

inline LmResult levenberg_marquardt(const LmModel& model, Eigen::VectorXd p, Eigen::Index m,
                                    const FitOptions& options, const std::string& what) {
    const Eigen::Index n = p.size();
    if (m <= n) {
        throw FitError(what + ": need more data points than parameters");
    }
    Eigen::VectorXd r(m);
    Eigen::MatrixXd J(m, n);
    model(p, r, J);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) {
        throw FitError(what + ": non-finite residual at the initial guess");
    }

    double lambda = options.lambda0;
    bool converged = false;
    int it = 0;
    Eigen::VectorXd r_try(m);
    Eigen::MatrixXd J_try(m, n);
    for (; it < options.max_iterations && !converged; ++it) {
        const Eigen::MatrixXd jtj = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        if ((jtj.diagonal().array() <= 0.0).any()) {
            throw FitError(what + ": singular normal equations (a parameter has no influence on the model)");
        }
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * jtj.diagonal();
            Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
            if (ldlt.info() != Eigen::Success) {
                lambda *= options.lambda_up;
                if (lambda > 1e20) {
                    throw FitError(what + ": singular normal equations");
                }
                continue;
            }
            const Eigen::VectorXd step = ldlt.solve(-g);
            const Eigen::VectorXd p_try = p + step;
            model(p_try, r_try, J_try);
            const double cost_try = r_try.squaredNorm();
            if (std::isfinite(cost_try) && cost_try <= cost) {
                const bool small_step =
                    (step.array().abs() <= options.step_tolerance * (p.array().abs() + 1.0)).all();
                p = p_try;
                r = r_try;
                J = J_try;
                cost = cost_try;
                lambda = std::max(lambda / options.lambda_down, 1e-15);
                accepted = true;
                converged = small_step;
            } else {
                lambda *= options.lambda_up;
                // No descent direction left at any damping: p is a minimum to rounding.
                if (lambda > 1e16) {
                    accepted = true;
                    converged = true;
                }
            }
        }
    }
    if (!converged) {
        throw FitError(what + ": no convergence within " + std::to_string(options.max_iterations) + " iterations");
    }

    LmResult out;
    out.params = p;
    out.iterations = it;
    out.residual_norm = std::sqrt(cost);
    const Eigen::MatrixXd jtj = J.transpose() * J;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (!lu.isInvertible()) {
        throw FitError(what + ": singular normal equations at the solution");
    }
    out.covariance = lu.inverse() * (cost / static_cast<double>(m - n));
    return out;
}

}  // namespace mxbolo::detail
