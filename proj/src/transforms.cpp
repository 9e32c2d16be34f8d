#include "qcmap/transforms.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "qcmap/errors.hpp"
#include "qcmap/numerics.hpp"

namespace qcmap {

double mu0(const NetworkGraph& g, const std::vector<SubnetworkRef>& candidates, double alpha) {
    return eval_M(g, candidates, [alpha](double c) { return lrelu_c_map(alpha, c); }, 0.0);
}

namespace {

void require_nonlinear(const NetworkGraph& g) {
    if (g.count(NodeKind::Nonlinear) == 0) throw InvalidArgument("graph has no nonlinear layer");
}

void require_smooth(const Activation& base) {
    if (!base.smooth()) throw Unsupported("activation '" + base.spec() + "' has no second derivative");
}

// Gaussian moments of the transformed activation with gamma eliminated.
struct Moments {
    double gamma;
    double mean;    // E[phi_hat]
    double qp1;     // E[phi_hat phi_hat' z]
    double cp1;     // E[phi_hat'^2]
    double cpp1;    // E[phi_hat''^2]
};

Moments moments(const Activation& base, const QuadratureRule& rule, double a, double b, double d) {
    double m1 = 0, m2 = 0, mz = 0, d1 = 0, d2 = 0;
    const auto& z = rule.nodes();
    const auto& w = rule.weights();
    for (std::size_t i = 0; i < z.size(); ++i) {
        double u = a * z[i] + b;
        double f = base.eval(u) + d;
        double f1 = base.eval(u, 1);
        double f2 = base.eval(u, 2);
        m1 += w[i] * f;
        m2 += w[i] * f * f;
        mz += w[i] * f * f1 * z[i];
        d1 += w[i] * f1 * f1;
        d2 += w[i] * f2 * f2;
    }
    double g2 = 1.0 / m2;
    return {std::sqrt(g2), std::sqrt(g2) * m1, g2 * a * mz, g2 * a * a * d1, g2 * a * a * a * a * d2};
}

struct SystemSolve {
    Eigen::VectorXd x;
    Eigen::VectorXd residual;
    int evaluations = 0;
};

SystemSolve multi_start(const VectorFunction& F, const Activation& base) {
    std::vector<Eigen::Vector3d> starts = {
        {1.0, 0.0, 0.0},
        {1.0, 0.0, -base.eval(0.0)},
        {1.0, 0.5, -base.eval(0.5)},
        {1.0, -0.5, -base.eval(-0.5)},
        {0.5, 0.0, 0.0},
        {0.5, 0.0, -base.eval(0.0)},
    };
    nlohmann::json attempts = nlohmann::json::array();
    int evaluations = 0;
    for (const auto& s : starts) {
        try {
            auto r = solve_nonlinear_system(F, s);
            return {r.x, r.residual, evaluations + r.evaluations};
        } catch (const SolverFailure& e) {
            evaluations += e.context().value("evaluations", 0);
            attempts.push_back({{"start", {s[0], s[1], s[2]}}, {"failure", e.context()}});
        }
    }
    throw SolverFailure("transform system did not converge from any starting point", {{"attempts", attempts}});
}

TransformedActivation make_transform(const Activation& base, const QuadratureRule& rule, const Eigen::VectorXd& x) {
    Moments m = moments(base, rule, x[0], x[1], x[2]);
    return TransformedActivation(base, x[0], x[1], m.gamma, x[2]);
}

double max_abs(const std::array<double, 3>& r) {
    return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

}  // namespace

TatLreluSolution solve_tat_lrelu(const NetworkGraph& g, double eta) {
    require_nonlinear(g);
    if (!(eta > 0.0 && eta < 1.0))
        throw InvalidArgument("target C_f(0) must lie strictly between 0 and 1", {{"eta", eta}});
    auto candidates = maximization_candidates(g);
    double top = mu0(g, candidates, 0.0);
    if (eta > top) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "unattainable target; max C_f(0)=%.4f", top);
        throw UnattainableTarget(buf, top);
    }
    auto r = bisect([&](double a) { return mu0(g, candidates, a) - eta; }, 0.0, 1.0, 1e-12);
    TatLreluSolution s;
    s.alpha = r.root;
    s.eta = eta;
    s.achieved_eta = mu0(g, candidates, r.root);
    s.bisection_iterations = r.iterations;
    return s;
}

TatSmoothSolution solve_tat_smooth(const NetworkGraph& g, const Activation& base, double tau, const QuadratureRule& rule) {
    require_smooth(base);
    require_nonlinear(g);
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be positive", {{"tau", tau}});
    double m = eval_M(g, [](double x) { return 1.0 + x; }, 0.0);
    if (!(m > 0.0)) throw InvalidArgument("graph has zero curvature multiplier");
    double target = tau / m;
    VectorFunction F = [&](const Eigen::VectorXd& x) {
        Moments mo = moments(base, rule, x[0], x[1], x[2]);
        return Eigen::Vector3d(mo.qp1 - 1.0, mo.cp1 - 1.0, mo.cpp1 - target).eval();
    };
    auto sol = multi_start(F, base);
    TatSmoothSolution s;
    s.activation = make_transform(base, rule, sol.x);
    s.tau = tau;
    s.curvature_multiplier = m;
    s.target_local_cpp1 = target;
    s.residuals = {sol.residual[0], sol.residual[1], sol.residual[2]};
    s.residual_norm = max_abs(s.residuals);
    s.evaluations = sol.evaluations;
    return s;
}

DksSolution solve_dks(const NetworkGraph& g, const Activation& base, double zeta, const QuadratureRule& rule) {
    require_smooth(base);
    require_nonlinear(g);
    if (!(zeta > 1.0) || !std::isfinite(zeta)) throw InvalidArgument("zeta must exceed 1", {{"zeta", zeta}});
    auto candidates = maximization_candidates(g);
    auto slope = bisect(
        [&](double m) { return eval_M(g, candidates, [m](double x) { return m * x; }, 1.0) - zeta; }, 1.0, zeta, 1e-14);
    double m = slope.root;
    VectorFunction F = [&](const Eigen::VectorXd& x) {
        Moments mo = moments(base, rule, x[0], x[1], x[2]);
        return Eigen::Vector3d(mo.qp1 - 1.0, mo.mean, mo.cp1 - m).eval();
    };
    auto sol = multi_start(F, base);
    DksSolution s;
    s.activation = make_transform(base, rule, sol.x);
    s.zeta = zeta;
    s.target_local_cp1 = m;
    s.residuals = {sol.residual[0], sol.residual[1], sol.residual[2]};
    s.residual_norm = max_abs(s.residuals);
    s.slope_iterations = slope.iterations;
    s.evaluations = sol.evaluations;
    return s;
}

FixedPoint q_fixed_point(const LocalMapParams& p, const QuadratureRule& rule, double q_start) {
    auto Q = [&](double q) {
        double r = std::sqrt(q);
        return p.sigma_w * p.sigma_w * rule.expect([&](double z) { double v = p.activation.eval(r * z); return v * v; }) +
               p.sigma_b * p.sigma_b;
    };
    FixedPoint fp;
    double q = q_start;
    double h = Q(q) - q;
    for (fp.iterations = 0; fp.iterations < 10000; ++fp.iterations) {
        if (std::abs(h) <= 1e-12 * std::max(1.0, q)) {
            fp.converged = true;
            break;
        }
        if (!std::isfinite(q) || q > 1e12) break;
        double next = q + h;  // plain iteration q <- Q(q)
        double slope = local_q_derivative(p, rule, q) - 1.0;
        if (slope != 0.0) {
            double newton = std::max(0.0, q - h / slope);
            double hn = Q(newton) - newton;
            if (std::isfinite(hn) && std::abs(hn) < std::abs(h)) {
                q = newton;
                h = hn;
                continue;
            }
        }
        q = next;
        h = Q(q) - q;
    }
    fp.q = q;
    fp.residual = h;
    return fp;
}

EocSolution solve_eoc_smooth(const Activation& base, double sigma_b, const QuadratureRule& rule) {
    require_smooth(base);
    if (!(sigma_b >= 0.0) || !std::isfinite(sigma_b)) throw InvalidArgument("sigma_b must be non-negative", {{"sigma_b", sigma_b}});
    auto chi = [&](double sw, FixedPoint* out) {
        LocalMapParams p{base, sw, sigma_b};
        FixedPoint fp = q_fixed_point(p, rule, 1.0);
        if (out) *out = fp;
        // No finite fixed point: the variance blows up, past the edge of chaos.
        if (!fp.converged) return std::numeric_limits<double>::infinity();
        double r = std::sqrt(std::min(fp.q, 1e12));
        return sw * sw * rule.expect([&](double z) { double d = base.eval(r * z, 1); return d * d; });
    };
    const double lo = 1e-3, hi = 10.0;
    BisectResult r;
    try {
        r = bisect([&](double sw) { return chi(sw, nullptr) - 1.0; }, lo, hi, 1e-13);
    } catch (const BracketError& e) {
        throw NotFound("no edge-of-chaos point for sigma_w in [0.001, 10]",
                       {{"activation", base.spec()}, {"sigma_b", sigma_b}, {"chi_minus_one", {e.f_lo(), e.f_hi()}}});
    }
    FixedPoint fp;
    double c = chi(r.root, &fp);
    if (!fp.converged) throw NotFound("q map has no fixed point at the edge-of-chaos weight scale", {{"sigma_w", r.root}});
    // The bracket can also close on the jump to divergence rather than on a root.
    if (!(std::abs(c - 1.0) <= 1e-8))
        throw NotFound("slope at the q fixed point never reaches 1", {{"sigma_w", r.root}, {"chi_minus_one", c - 1.0}});
    EocSolution s;
    s.base = base;
    s.sigma_w = r.root;
    s.sigma_b = sigma_b;
    s.q_fixed_point = fp.q;
    s.fixed_point_residual = fp.residual;
    s.slope_residual = c - 1.0;
    s.iterations = r.iterations;
    return s;
}

EocSolution solve_eoc_lrelu(const Activation& base) {
    auto k = base.kind();
    if (k != ActivationKind::ReLU && k != ActivationKind::LReLU && k != ActivationKind::TReLU)
        throw InvalidArgument("activation '" + base.spec() + "' is not a leaky ReLU variant");
    double a = k == ActivationKind::ReLU ? 0.0 : base.alpha();
    EocSolution s;
    s.base = base;
    s.sigma_w = std::sqrt(2.0 / (1.0 + a * a)) / base.scale();
    s.sigma_b = 0.0;
    s.q_fixed_point = 1.0;
    return s;
}

namespace {

nlohmann::json transform_params(const TransformedActivation& t) {
    return {{"alpha", t.input_scale}, {"beta", t.input_shift}, {"gamma", t.output_scale}, {"delta", t.output_shift}};
}

}  // namespace

nlohmann::json to_json(const TatLreluSolution& s) {
    return {{"method", "tat-lrelu"},
            {"activation", "trelu"},
            {"alpha", s.alpha},
            {"achieved_eta", s.achieved_eta},
            {"parameters", {{"alpha", s.alpha}}},
            {"targets", {{"eta", s.eta}}},
            {"residuals", {{"eta", s.achieved_eta - s.eta}}},
            {"iterations", s.bisection_iterations}};
}

nlohmann::json to_json(const TatSmoothSolution& s) {
    return {{"method", "tat-smooth"},
            {"activation", s.activation.base.spec()},
            {"parameters", transform_params(s.activation)},
            {"targets", {{"tau", s.tau}, {"curvature_multiplier", s.curvature_multiplier}, {"local_cpp1", s.target_local_cpp1}}},
            {"residuals", {{"q_prime", s.residuals[0]}, {"c_prime", s.residuals[1]}, {"c_double_prime", s.residuals[2]}, {"norm", s.residual_norm}}},
            {"evaluations", s.evaluations}};
}

nlohmann::json to_json(const DksSolution& s) {
    return {{"method", "dks"},
            {"activation", s.activation.base.spec()},
            {"parameters", transform_params(s.activation)},
            {"targets", {{"zeta", s.zeta}, {"local_cp1", s.target_local_cp1}}},
            {"residuals", {{"q_prime", s.residuals[0]}, {"mean", s.residuals[1]}, {"c_prime", s.residuals[2]}, {"norm", s.residual_norm}}},
            {"evaluations", s.evaluations}};
}

nlohmann::json to_json(const EocSolution& s) {
    return {{"method", "eoc"},
            {"activation", s.base.spec()},
            {"parameters", {{"sigma_w", s.sigma_w}, {"sigma_b", s.sigma_b}}},
            {"targets", {{"q_fixed_point", s.q_fixed_point}}},
            {"residuals", {{"q_map", s.fixed_point_residual}, {"c_prime", s.slope_residual}}},
            {"iterations", s.iterations}};
}

}  // namespace qcmap
