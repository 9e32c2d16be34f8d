#include "qcmap/kernel_maps.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "qcmap/errors.hpp"

namespace qcmap {

namespace {

double clamp_c(double c) {
    if (!(std::abs(c) <= 1.0 + 1e-12)) throw DomainError("c value outside [-1, 1]", {{"c", c}});
    return std::clamp(c, -1.0, 1.0);
}

void check_q(double q) {
    if (!(q > 0.0) || !std::isfinite(q)) throw DomainError("q value must be positive", {{"q", q}});
}

std::vector<double> scaled_kinks(const TransformedActivation& a, double scale) {
    std::vector<double> out;
    for (double k : a.kinks()) out.push_back(k / scale);
    return out;
}

// E[phi^(i)(sqrt(q1) z1) phi^(i)(sqrt(q2) (c z1 + s z2))], s = sqrt(1 - c^2).
double expect_pair(const TransformedActivation& a, const QuadratureRule& rule, double c, double q1, double q2, int order) {
    double r1 = std::sqrt(q1), r2 = std::sqrt(q2);
    double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    std::vector<double> outer = scaled_kinks(a, r1);
    if (s == 0.0) {
        for (double k : scaled_kinks(a, r2 * c)) outer.push_back(k);
        return rule.expect([&](double z) { return a.eval(r1 * z, order) * a.eval(r2 * c * z, order); }, outer);
    }
    std::vector<double> base = a.kinks();
    // Near |c| = 1 the inner expectation is a kink smoothed over width s in z1;
    // grade the outer panels geometrically around it.
    if (s < 0.5) {
        for (double k : base) {
            double centre = k / (r2 * c);
            outer.push_back(centre);
            for (double h = 0.5 * s; h < 1.0; h *= 2.0) {
                outer.push_back(centre - h);
                outer.push_back(centre + h);
            }
        }
    }
    return rule.expect2(
        [&](double z1, double z2) { return a.eval(r1 * z1, order) * a.eval(r2 * (c * z1 + s * z2), order); }, outer,
        [&](double z1, std::vector<double>& out) {
            for (double k : base) out.push_back((k / r2 - c * z1) / s);
        });
}

// Q(q) allowing q = 0.
double q_map(const LocalMapParams& p, const QuadratureRule& rule, double q) {
    double r = std::sqrt(q);
    const auto& a = p.activation;
    double m = rule.expect([&](double z) { double v = a.eval(r * z); return v * v; }, scaled_kinks(a, r));
    return p.sigma_w * p.sigma_w * m + p.sigma_b * p.sigma_b;
}

bool closed_form_applies(const LocalMapParams& p) {
    const auto& a = p.activation;
    auto k = a.base.kind();
    bool relu_family = k == ActivationKind::ReLU || k == ActivationKind::LReLU || k == ActivationKind::TReLU;
    return relu_family && a.input_shift == 0.0 && a.output_shift == 0.0 && a.input_scale != 0.0 && p.sigma_b == 0.0 &&
           p.sigma_w > 0.0;
}

}  // namespace

double lrelu_c_map(double alpha, double c) {
    c = clamp_c(c);
    double k = (1.0 - alpha) * (1.0 - alpha) / (std::numbers::pi * (1.0 + alpha * alpha));
    double bracket = std::max(0.0, std::sqrt(1.0 - c * c) - c * std::acos(c));
    return c + k * bracket;
}

double lrelu_c_map_derivative(double alpha, double c) {
    c = clamp_c(c);
    double k = (1.0 - alpha) * (1.0 - alpha) / (std::numbers::pi * (1.0 + alpha * alpha));
    return 1.0 - k * std::acos(c);
}

double local_q(const LocalMapParams& p, const QuadratureRule& rule, double q) {
    check_q(q);
    return q_map(p, rule, q);
}

double local_q_derivative(const LocalMapParams& p, const QuadratureRule& rule, double q) {
    if (!(q >= 0.0)) throw DomainError("q value must be non-negative", {{"q", q}});
    if (!p.activation.smooth()) throw Unsupported("Q map derivative needs a smooth activation");
    double r = std::sqrt(q);
    const auto& a = p.activation;
    double m = rule.expect([&](double z) {
        double d = a.eval(r * z, 1);
        return d * d + a.eval(r * z) * a.eval(r * z, 2);
    });
    return p.sigma_w * p.sigma_w * m;
}

double local_c(const LocalMapParams& p, const QuadratureRule& rule, double c, double q1, double q2) {
    c = clamp_c(c);
    check_q(q1);
    check_q(q2);
    double num = p.sigma_w * p.sigma_w * expect_pair(p.activation, rule, c, q1, q2, 0) + p.sigma_b * p.sigma_b;
    return num / std::sqrt(q_map(p, rule, q1) * q_map(p, rule, q2));
}

double local_c_derivative(const LocalMapParams& p, const QuadratureRule& rule, double c, double q1, double q2, int order) {
    if (order != 1 && order != 2) throw Unsupported("C map derivatives are available for orders 1 and 2", {{"order", order}});
    if (order == 2 && !p.activation.smooth())
        throw Unsupported("second C map derivative of a piecewise-linear activation", {{"activation", p.activation.base.spec()}});
    c = clamp_c(c);
    check_q(q1);
    check_q(q2);
    double e = expect_pair(p.activation, rule, c, q1, q2, order);
    double scale = order == 1 ? std::sqrt(q1 * q2) : q1 * q2;
    return p.sigma_w * p.sigma_w * scale * e / std::sqrt(q_map(p, rule, q1) * q_map(p, rule, q2));
}

CStats cstats(const LocalMapParams& p, const QuadratureRule& rule) {
    const auto& a = p.activation;
    auto kinks = a.kinks();
    double sw2 = p.sigma_w * p.sigma_w;
    CStats s;
    s.q1 = q_map(p, rule, 1.0);
    double mean = rule.expect([&](double z) { return a.eval(z); }, kinks);
    s.qp1 = sw2 * rule.expect([&](double z) { return a.eval(z) * a.eval(z, 1) * z; }, kinks);
    s.cp1 = sw2 * rule.expect([&](double z) { double d = a.eval(z, 1); return d * d; }, kinks) / s.q1;
    if (a.smooth())
        s.cpp1 = sw2 * rule.expect([&](double z) { double d = a.eval(z, 2); return d * d; }) / s.q1;
    else
        s.cpp1 = std::numeric_limits<double>::infinity();
    s.c0 = (sw2 * mean * mean + p.sigma_b * p.sigma_b) / s.q1;
    return s;
}

double global_c(const NetworkGraph& g, const ScalarMap& local, double c0) { return eval_U(g, local, c0); }

double global_c_derivative(const NetworkGraph& g, const ScalarMap& local, const ScalarMap& local_derivative, double c0) {
    return eval_U_with_slope(g, local, local_derivative, c0).slope;
}

CMapSeries::CMapSeries(const LocalMapParams& p, double q, int max_terms) {
    check_q(q);
    if (max_terms < 1) throw InvalidArgument("series needs at least one term", {{"terms", max_terms}});
    const auto& a = p.activation;
    double r = std::sqrt(q);
    QuadratureRule fine(48, 12.0, 1.0);
    std::vector<double> coef(static_cast<std::size_t>(max_terms), 0.0);
    double second = 0.0;
    fine.for_each(scaled_kinks(a, r), [&](double z, double w) {
        double f = a.eval(r * z) * w;
        second += f * a.eval(r * z);
        // Orthonormal probabilists' Hermite polynomials by recurrence.
        double pm = 0.0, pn = 1.0;
        for (int n = 0; n < max_terms; ++n) {
            coef[static_cast<std::size_t>(n)] += f * pn;
            double next = (z * pn - std::sqrt(static_cast<double>(n)) * pm) / std::sqrt(n + 1.0);
            pm = pn;
            pn = next;
        }
    });
    double sw2 = p.sigma_w * p.sigma_w;
    double Q = sw2 * second + p.sigma_b * p.sigma_b;
    b_.resize(coef.size());
    double total = 0.0;
    for (std::size_t n = 0; n < coef.size(); ++n) {
        b_[n] = sw2 * coef[n] * coef[n] / Q;
        if (n == 0) b_[n] += p.sigma_b * p.sigma_b / Q;
        total += b_[n];
    }
    tail_ = std::max(0.0, 1.0 - total);
}

double CMapSeries::operator()(double c) const {
    c = clamp_c(c);
    double s = 0.0;
    for (auto it = b_.rbegin(); it != b_.rend(); ++it) s = s * c + *it;
    return s;
}

double CMapSeries::derivative(double c) const {
    c = clamp_c(c);
    double s = 0.0;
    for (std::size_t n = b_.size() - 1; n >= 1; --n) s = s * c + static_cast<double>(n) * b_[n];
    return s;
}

LocalCMap make_local_c_map(const LocalMapParams& p, const QuadratureRule& rule) {
    if (closed_form_applies(p)) {
        auto k = p.activation.base.kind();
        double alpha = k == ActivationKind::ReLU ? 0.0 : p.activation.base.alpha();
        return {[alpha](double c) { return lrelu_c_map(alpha, c); },
                [alpha](double c) { return lrelu_c_map_derivative(alpha, c); }, "closed-form"};
    }
    if (p.activation.smooth()) {
        auto series = std::make_shared<CMapSeries>(p);
        return {[series](double c) { return (*series)(c); }, [series](double c) { return series->derivative(c); },
                "hermite-series"};
    }
    return {[p, rule](double c) { return local_c(p, rule, c); },
            [p, rule](double c) { return local_c_derivative(p, rule, c, 1.0, 1.0, 1); }, "quadrature"};
}

}  // namespace qcmap
