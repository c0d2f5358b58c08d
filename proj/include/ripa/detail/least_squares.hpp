// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <functional>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

namespace ripa::detail {

using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using JacobianFn = std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)>;

struct LsqResult {
    Eigen::VectorXd x;
    bool converged = false;
    int evaluations = 0;
    double rms = 0;  // root mean square residual at x
};

struct LsqFunctor : Eigen::DenseFunctor<double> {
    LsqFunctor(int inputs, int values, const ResidualFn& f, const JacobianFn& j)
        : Eigen::DenseFunctor<double>(inputs, values), residual(f), jacobian(j) {}
    int operator()(const InputType& x, ValueType& fvec) const {
        residual(x, fvec);
        return 0;
    }
    int df(const InputType& x, JacobianType& fjac) const {
        jacobian(x, fjac);
        return 0;
    }
    const ResidualFn& residual;
    const JacobianFn& jacobian;
};

/// Levenberg-Marquardt with an analytic Jacobian.
inline LsqResult levenberg_marquardt(Eigen::VectorXd x0, int n_values, const ResidualFn& f,
                                     const JacobianFn& j, int max_evaluations = 400, double tol = 1e-14) {
    LsqFunctor functor(static_cast<int>(x0.size()), n_values, f, j);
    Eigen::LevenbergMarquardt<LsqFunctor> lm(functor);
    lm.setMaxfev(max_evaluations);
    lm.setXtol(tol);
    lm.setFtol(tol);
    lm.setGtol(0.0);
    auto status = lm.minimize(x0);
    LsqResult out;
    out.x = x0;
    out.evaluations = static_cast<int>(lm.nfev());
    Eigen::VectorXd r(n_values);
    f(x0, r);
    out.rms = std::sqrt(r.squaredNorm() / std::max(1, n_values));
    using S = Eigen::LevenbergMarquardtSpace::Status;
    out.converged = status == S::RelativeReductionTooSmall || status == S::RelativeErrorTooSmall ||
                    status == S::RelativeErrorAndReductionTooSmall || status == S::CosinusTooSmall ||
                    status == S::FtolTooSmall || status == S::XtolTooSmall || status == S::GtolTooSmall;
    return out;
}

}  // namespace ripa::detail
