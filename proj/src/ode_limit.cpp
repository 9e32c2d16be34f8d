#include "qcmap/ode_limit.hpp"

#include <algorithm>
#include <cmath>

#include "qcmap/errors.hpp"
#include "qcmap/kernel_maps.hpp"
#include "qcmap/numerics.hpp"
#include "qcmap/transforms.hpp"

namespace qcmap {

double ode_rhs(double x) {
    x = std::clamp(x, -1.0, 1.0);
    return std::sqrt(std::max(0.0, 1.0 - x * x)) - x * std::acos(x);
}

OdeSolution integrate_psi(double c0, double T, const OdeOptions& opt) {
    if (!(std::abs(c0) <= 1.0)) throw DomainError("initial c value outside [-1, 1]", {{"c0", c0}});
    if (!(T >= 0.0) || !std::isfinite(T)) throw DomainError("integration horizon must be non-negative", {{"T", T}});
    if (!(opt.relative_step > 0.0)) throw InvalidArgument("relative step must be positive");
    OdeSolution s;
    s.c0 = c0;
    s.T = T;
    double hmax = opt.relative_step * std::max(T, 1.0);
    long steps = T == 0.0 ? 0 : static_cast<long>(std::ceil(T / hmax));
    double h = steps ? T / static_cast<double>(steps) : 0.0;
    s.step_size = h;
    double x = c0;
    if (opt.record_trajectory) {
        s.trajectory.reserve(static_cast<std::size_t>(steps) + 1);
    }
    s.trajectory.emplace_back(0.0, x);
    for (long i = 0; i < steps; ++i) {
        double k1 = ode_rhs(x);
        double k2 = ode_rhs(x + 0.5 * h * k1);
        double k3 = ode_rhs(x + 0.5 * h * k2);
        double k4 = ode_rhs(x + h * k3);
        // The flow is monotone and stops at 1; rounding must not break either.
        x = std::clamp(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), x, 1.0);
        double t = (i + 1 == steps) ? T : h * static_cast<double>(i + 1);
        if (opt.record_trajectory || i + 1 == steps) s.trajectory.emplace_back(t, x);
    }
    if (!opt.record_trajectory && s.trajectory.size() > 2) s.trajectory.erase(s.trajectory.begin() + 1, s.trajectory.end() - 1);
    return s;
}

double psi(double c0, double T, const OdeOptions& opt) {
    OdeOptions o = opt;
    o.record_trajectory = false;
    return integrate_psi(c0, T, o).final_value();
}

double find_T(double eta, const OdeOptions& opt) {
    if (!(eta > 0.0 && eta < 1.0)) throw InvalidArgument("eta must lie strictly between 0 and 1", {{"eta", eta}});
    double hi = 1.0;
    while (psi(0.0, hi, opt) < eta) {
        hi *= 2.0;
        if (hi > 1e9) throw NotFound("psi(0, T) does not reach eta", {{"eta", eta}});
    }
    return bisect([&](double T) { return psi(0.0, T, opt) - eta; }, 0.0, hi, 1e-11, 1e-15).root;
}

std::vector<ConvergenceRow> verify_convergence(double eta, const std::vector<int>& depths, const std::vector<double>& c_grid) {
    double T = find_T(eta);
    std::vector<double> limit;
    limit.reserve(c_grid.size());
    for (double c : c_grid) limit.push_back(psi(c, T));
    std::vector<ConvergenceRow> rows;
    for (int L : depths) {
        auto g = build_vanilla(L);
        auto sol = solve_tat_lrelu(g, eta);
        ConvergenceRow row{L, sol.alpha, 0.0};
        auto local = [a = sol.alpha](double c) { return lrelu_c_map(a, c); };
        for (std::size_t i = 0; i < c_grid.size(); ++i)
            row.max_deviation = std::max(row.max_deviation, std::abs(global_c(g, local, c_grid[i]) - limit[i]));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace qcmap
