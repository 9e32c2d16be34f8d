#include "qcmap/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include "qcmap/errors.hpp"

namespace qcmap {

LegendreRule gauss_legendre(int n) {
    if (n < 1) throw InvalidArgument("quadrature order must be positive", {{"order", n}});
    LegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    if (n == 1) {
        rule.nodes[0] = 0.0;
        rule.weights[0] = 2.0;
        return rule;
    }
    // Golub-Welsch on the Jacobi matrix, then Newton on P_n to polish.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    for (int i = 0; i < n; ++i) {
        double x = eig.eigenvalues()[i];
        double dp = 0.0;
        for (int it = 0; it < 3; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            x -= p1 / dp;
        }
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Enforce exact symmetry.
    for (int i = 0; i < n / 2; ++i) {
        int j = n - 1 - i;
        double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

QuadratureRule::QuadratureRule(int order, double half_width, double panel_width)
    : order_(order), half_width_(half_width), panel_width_(panel_width) {
    if (order < 1) throw InvalidArgument("quadrature order must be positive", {{"order", order}});
    if (!(half_width > 0.0) || !(panel_width > 0.0))
        throw InvalidArgument("quadrature widths must be positive", {{"half_width", half_width}, {"panel_width", panel_width}});
    legendre_ = gauss_legendre(order);
    int panels = static_cast<int>(std::ceil(2.0 * half_width / panel_width - 1e-9));
    grid_.resize(panels + 1);
    for (int p = 0; p <= panels; ++p) grid_[p] = -half_width + 2.0 * half_width * p / panels;
    for_each_node(grid_, [&](double z, double w) {
        nodes_.push_back(z);
        weights_.push_back(w);
    });
    // The truncated tails carry ~1e-23 of mass; renormalize so weights sum to one.
    double total = 0.0;
    for (double w : weights_) total += w;
    for (double& w : weights_) w /= total;
}

void QuadratureRule::panel_edges(const std::vector<double>& breaks, std::vector<double>& edges) const {
    edges = grid_;
    for (double b : breaks)
        if (std::isfinite(b) && b > -half_width_ && b < half_width_) edges.push_back(b);
    std::sort(edges.begin(), edges.end());
    // Drop slivers created by breakpoints that coincide with grid edges.
    std::size_t out = 1;
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i] - edges[out - 1] > 1e-14) edges[out++] = edges[i];
    edges.resize(out);
}

}  // namespace qcmap
