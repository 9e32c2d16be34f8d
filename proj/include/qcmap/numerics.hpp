#pragma once

#include <functional>

#include <Eigen/Core>

namespace qcmap {

struct BisectResult {
    double root = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

// Root of f on [lo, hi]; stops when |f| <= tol or the bracket is shorter than
// interval_tol. Throws BracketError when f(lo) and f(hi) share a sign.
BisectResult bisect(const std::function<double(double)>& f, double lo, double hi, double tol,
                    double interval_tol = 1e-14, int max_iterations = 500);

using VectorFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct NonlinearSolveOptions {
    double tol = 1e-10;          // on the max-norm of F
    int max_evaluations = 4000;  // for the hybrid phase
    int polish_iterations = 20;  // Newton steps with a central-difference Jacobian
};

struct NonlinearSolveResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residual;
    int evaluations = 0;
};

// Powell hybrid (dogleg) method with a finite-difference Jacobian, followed by
// damped Newton polishing. Throws SolverFailure with the last iterate and
// residual when max|F| stays above tol.
NonlinearSolveResult solve_nonlinear_system(const VectorFunction& F, const Eigen::VectorXd& x0,
                                            const NonlinearSolveOptions& options = {});

}  // namespace qcmap
