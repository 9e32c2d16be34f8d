#pragma once

#include <utility>
#include <vector>

namespace qcmap {

struct OdeSolution {
    double c0 = 0.0;
    double T = 0.0;
    double step_size = 0.0;
    std::vector<std::pair<double, double>> trajectory;  // (t, x), endpoints included
    double final_value() const { return trajectory.back().second; }
};

struct OdeOptions {
    double relative_step = 1e-4;  // step <= relative_step * max(T, 1)
    bool record_trajectory = true;
};

// dx/dt = sqrt(1 - x^2) - x acos(x), the infinite-depth limit of the TReLU C map.
double ode_rhs(double x);

OdeSolution integrate_psi(double c0, double T, const OdeOptions& options = {});
double psi(double c0, double T, const OdeOptions& options = {});

// T with psi(0, T) = eta.
double find_T(double eta, const OdeOptions& options = {});

struct ConvergenceRow {
    int depth = 0;
    double alpha = 0.0;
    double max_deviation = 0.0;
};

// For each depth, compares the composed TReLU C map (alpha solved for eta) on
// c_grid against psi(c, find_T(eta)).
std::vector<ConvergenceRow> verify_convergence(double eta, const std::vector<int>& depths, const std::vector<double>& c_grid);

}  // namespace qcmap
