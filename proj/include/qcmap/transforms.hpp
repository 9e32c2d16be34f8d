#pragma once

#include <array>

#include <json.hpp>

#include "qcmap/activations.hpp"
#include "qcmap/kernel_maps.hpp"
#include "qcmap/netgraph.hpp"
#include "qcmap/quadrature.hpp"

namespace qcmap {

struct TatLreluSolution {
    double alpha = 0.0;
    double eta = 0.0;           // requested
    double achieved_eta = 0.0;  // mu0(alpha)
    int bisection_iterations = 0;
};

struct TatSmoothSolution {
    TransformedActivation activation;
    double tau = 0.0;
    double curvature_multiplier = 0.0;  // m in mu2(C''(1)) = m C''(1)
    double target_local_cpp1 = 0.0;     // tau / m
    std::array<double, 3> residuals{};  // Q'(1) - 1, C'(1) - 1, C''(1) - target
    double residual_norm = 0.0;         // max-norm
    int evaluations = 0;
};

struct DksSolution {
    TransformedActivation activation;
    double zeta = 0.0;
    double target_local_cp1 = 0.0;      // m with mu1(m) = zeta
    std::array<double, 3> residuals{};  // Q'(1) - 1, sqrt-free C(0) term, C'(1) - m
    double residual_norm = 0.0;
    int slope_iterations = 0;
    int evaluations = 0;
};

struct EocSolution {
    Activation base;
    double sigma_w = 0.0;
    double sigma_b = 0.0;
    double q_fixed_point = 0.0;
    double fixed_point_residual = 0.0;  // Q(q) - q
    double slope_residual = 0.0;        // C'(1, q, q) - 1
    int iterations = 0;
};

// Maximal c value function: max over candidate subnetworks of U with r the
// leaky ReLU C map of slope alpha, at x = 0.
double mu0(const NetworkGraph& g, const std::vector<SubnetworkRef>& candidates, double alpha);

TatLreluSolution solve_tat_lrelu(const NetworkGraph& g, double eta);
TatSmoothSolution solve_tat_smooth(const NetworkGraph& g, const Activation& base, double tau,
                                   const QuadratureRule& rule = QuadratureRule());
DksSolution solve_dks(const NetworkGraph& g, const Activation& base, double zeta,
                      const QuadratureRule& rule = QuadratureRule());

struct FixedPoint {
    double q = 0.0;
    double residual = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Fixed point of the Q map reached from q_start, with Newton acceleration.
FixedPoint q_fixed_point(const LocalMapParams& p, const QuadratureRule& rule, double q_start = 1.0);

EocSolution solve_eoc_smooth(const Activation& base, double sigma_b, const QuadratureRule& rule = QuadratureRule());
// Leaky ReLU variants sit on the edge of chaos for every q once the weight
// scale gives Q(q) = q; no solve is needed.
EocSolution solve_eoc_lrelu(const Activation& base);

nlohmann::json to_json(const TatLreluSolution& s);
nlohmann::json to_json(const TatSmoothSolution& s);
nlohmann::json to_json(const DksSolution& s);
nlohmann::json to_json(const EocSolution& s);

}  // namespace qcmap
