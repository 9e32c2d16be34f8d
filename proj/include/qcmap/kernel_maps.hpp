#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qcmap/activations.hpp"
#include "qcmap/netgraph.hpp"
#include "qcmap/quadrature.hpp"

namespace qcmap {

struct LocalMapParams {
    TransformedActivation activation;
    double sigma_w = 1.0;
    double sigma_b = 0.0;
};

struct CStats {
    double c0 = 0.0;    // C(0)
    double cp1 = 0.0;   // C'(1)
    double cpp1 = 0.0;  // C''(1), +inf for piecewise-linear activations
    double q1 = 0.0;    // Q(1)
    double qp1 = 0.0;   // Q'(1)
};

// Closed-form C map of a (scaled) leaky ReLU with negative slope alpha.
double lrelu_c_map(double alpha, double c);
double lrelu_c_map_derivative(double alpha, double c);

double local_q(const LocalMapParams& p, const QuadratureRule& rule, double q);
// dQ/dq, by Stein's lemma; needs a smooth activation.
double local_q_derivative(const LocalMapParams& p, const QuadratureRule& rule, double q);
double local_c(const LocalMapParams& p, const QuadratureRule& rule, double c, double q1 = 1.0, double q2 = 1.0);
double local_c_derivative(const LocalMapParams& p, const QuadratureRule& rule, double c, double q1, double q2, int order);

CStats cstats(const LocalMapParams& p, const QuadratureRule& rule);

double global_c(const NetworkGraph& g, const ScalarMap& local, double c0);
// C_f'(c0) by the chain rule over the graph.
double global_c_derivative(const NetworkGraph& g, const ScalarMap& local, const ScalarMap& local_derivative, double c0);

// Local C map at equal q values written as the power series
// C(c) = sum_n b_n c^n, b_n = (sigma_w^2 a_n^2 + [n = 0] sigma_b^2) / Q(q),
// with a_n the normalized Hermite coefficients of z -> phi(sqrt(q) z).
// All b_n are non-negative, and the truncation error on [-1, 1] is at most
// tail_bound().
class CMapSeries {
public:
    explicit CMapSeries(const LocalMapParams& p, double q = 1.0, int max_terms = 96);

    double operator()(double c) const;
    double derivative(double c) const;
    double tail_bound() const noexcept { return tail_; }
    const std::vector<double>& coefficients() const noexcept { return b_; }

private:
    std::vector<double> b_;
    double tail_ = 0.0;
};

// Local C map of an activation at unit q values, with its derivative.
// Untransformed leaky ReLU variants with zero bias use the closed form; other
// activations use CMapSeries when smooth, and 2-D quadrature otherwise.
struct LocalCMap {
    ScalarMap value;
    ScalarMap derivative;
    std::string method;
};

LocalCMap make_local_c_map(const LocalMapParams& p, const QuadratureRule& rule);

}  // namespace qcmap
