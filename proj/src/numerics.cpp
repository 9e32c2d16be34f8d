#include "qcmap/numerics.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "qcmap/errors.hpp"

namespace qcmap {

BisectResult bisect(const std::function<double(double)>& f, double lo, double hi, double tol, double interval_tol,
                    int max_iterations) {
    if (!(lo <= hi)) throw InvalidArgument("bisection bracket must satisfy lo <= hi", {{"lo", lo}, {"hi", hi}});
    double flo = f(lo), fhi = f(hi);
    if (std::abs(flo) <= tol) return {lo, 0, flo};
    if (std::abs(fhi) <= tol) return {hi, 0, fhi};
    if (!(std::signbit(flo) != std::signbit(fhi)) || std::isnan(flo) || std::isnan(fhi)) throw BracketError(flo, fhi, lo, hi);
    BisectResult r;
    for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        r.root = mid;
        r.residual = fm;
        if (std::abs(fm) <= tol || hi - lo <= interval_tol || mid == lo || mid == hi) return r;
        if (std::signbit(fm) == std::signbit(flo)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return r;
}

namespace {

struct HybridFunctor {
    const VectorFunction& F;
    int* evaluations;

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
        ++*evaluations;
        fvec = F(x);
        for (Eigen::Index i = 0; i < fvec.size(); ++i)
            if (!std::isfinite(fvec[i])) fvec[i] = 1e150;
        return 0;
    }
};

double max_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

Eigen::MatrixXd central_jacobian(const VectorFunction& F, const Eigen::VectorXd& x, int& evaluations) {
    const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd J(x.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        double h = h0 * std::max(1.0, std::abs(x[j]));
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        J.col(j) = (F(xp) - F(xm)) / (xp[j] - xm[j]);
        evaluations += 2;
    }
    return J;
}

}  // namespace

NonlinearSolveResult solve_nonlinear_system(const VectorFunction& F, const Eigen::VectorXd& x0,
                                            const NonlinearSolveOptions& opt) {
    NonlinearSolveResult res;
    res.x = x0;
    HybridFunctor functor{F, &res.evaluations};
    Eigen::HybridNonLinearSolver<HybridFunctor> solver(functor);
    solver.parameters.xtol = 1e-15;
    solver.parameters.maxfev = opt.max_evaluations;
    Eigen::VectorXd x = x0;
    solver.solveNumericalDiff(x);
    if (finite(x)) res.x = x;
    res.residual = F(res.x);
    ++res.evaluations;

    for (int it = 0; it < opt.polish_iterations && !(finite(res.residual) && max_norm(res.residual) <= opt.tol); ++it) {
        if (!finite(res.residual)) break;
        Eigen::MatrixXd J = central_jacobian(F, res.x, res.evaluations);
        Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(-res.residual);
        if (!finite(step)) break;
        double before = res.residual.norm();
        bool improved = false;
        for (double t = 1.0; t > 1e-6; t *= 0.5) {
            Eigen::VectorXd xt = res.x + t * step;
            Eigen::VectorXd ft = F(xt);
            ++res.evaluations;
            if (finite(ft) && ft.norm() < before) {
                res.x = xt;
                res.residual = ft;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }

    if (!finite(res.residual) || max_norm(res.residual) > opt.tol) {
        nlohmann::json xs = nlohmann::json::array(), fs = nlohmann::json::array();
        for (Eigen::Index i = 0; i < res.x.size(); ++i) xs.push_back(res.x[i]);
        for (Eigen::Index i = 0; i < res.residual.size(); ++i) fs.push_back(res.residual[i]);
        throw SolverFailure("nonlinear system did not converge",
                            {{"last_iterate", xs}, {"residual", fs}, {"evaluations", res.evaluations}});
    }
    return res;
}

}  // namespace qcmap
