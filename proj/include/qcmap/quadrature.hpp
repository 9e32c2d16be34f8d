#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace qcmap {

// Gauss-Legendre nodes and weights on [-1, 1].
struct LegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
LegendreRule gauss_legendre(int n);

// Expectations against the standard Gaussian density.
//
// The real line is truncated to [-half_width, half_width] and split into
// panels of width panel_width, each integrated with an order-point
// Gauss-Legendre rule weighted by the density. nodes()/weights() expose the
// resulting fixed rule. expect() can additionally split panels at caller
// supplied breakpoints, which is how kinked integrands keep spectral accuracy.
class QuadratureRule {
public:
    static constexpr int kDefaultOrder = 12;

    explicit QuadratureRule(int order = kDefaultOrder, double half_width = 10.0, double panel_width = 1.0);

    int order() const noexcept { return order_; }
    double half_width() const noexcept { return half_width_; }
    double panel_width() const noexcept { return panel_width_; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    // Same layout with twice the points per panel.
    QuadratureRule doubled() const { return QuadratureRule(2 * order_, half_width_, panel_width_); }

    template <class F>
    double expect(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * f(nodes_[i]);
        return s;
    }

    // Breakpoints outside the truncated range are ignored; order does not matter.
    template <class F>
    double expect(F&& f, const std::vector<double>& breaks) const {
        if (breaks.empty()) return expect(f);
        std::vector<double> edges;
        panel_edges(breaks, edges);
        return integrate_edges(f, edges);
    }

    // E[f(z1, z2)] for independent standard normals. inner_breaks(z1, out)
    // fills the breakpoints in z2 for a fixed z1.
    template <class F, class B>
    double expect2(F&& f, const std::vector<double>& outer_breaks, B&& inner_breaks) const {
        std::vector<double> outer_edges, inner, inner_edges;
        panel_edges(outer_breaks, outer_edges);
        double s = 0.0;
        for_each_node(outer_edges, [&](double z1, double w1) {
            inner.clear();
            inner_breaks(z1, inner);
            auto g = [&](double z2) { return f(z1, z2); };
            if (inner.empty()) {
                s += w1 * expect(g);
            } else {
                panel_edges(inner, inner_edges);
                s += w1 * integrate_edges(g, inner_edges);
            }
        });
        return s;
    }

    // Calls visit(z, w) for every node of the rule split at breaks.
    template <class V>
    void for_each(const std::vector<double>& breaks, V&& visit) const {
        std::vector<double> edges;
        panel_edges(breaks, edges);
        for_each_node(edges, visit);
    }

private:
    void panel_edges(const std::vector<double>& breaks, std::vector<double>& edges) const;

    template <class V>
    void for_each_node(const std::vector<double>& edges, V&& visit) const {
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
            double a = edges[p], b = edges[p + 1];
            double mid = 0.5 * (a + b), half = 0.5 * (b - a);
            for (int i = 0; i < order_; ++i) {
                double z = mid + half * legendre_.nodes[i];
                visit(z, half * legendre_.weights[i] * density(z));
            }
        }
    }

    template <class F>
    double integrate_edges(F&& f, const std::vector<double>& edges) const {
        double s = 0.0;
        for_each_node(edges, [&](double z, double w) { s += w * f(z); });
        return s;
    }

    static double density(double z) { return 0.39894228040143267794 * std::exp(-0.5 * z * z); }

    int order_;
    double half_width_;
    double panel_width_;
    LegendreRule legendre_;
    std::vector<double> grid_;  // uniform panel edges
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

}  // namespace qcmap
