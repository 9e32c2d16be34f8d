#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qcmap/errors.hpp"
#include "qcmap/transforms.hpp"

using namespace qcmap;

namespace {

double compose_lrelu(double alpha, int depth, double c) {
    // Plain re-iteration of the closed form, written out independently.
    double k = (1 - alpha) * (1 - alpha) / (std::numbers::pi * (1 + alpha * alpha));
    for (int i = 0; i < depth; ++i) c = c + k * (std::sqrt(1 - c * c) - c * std::acos(c));
    return c;
}

void check_affine_of_base(const TransformedActivation& t) {
    for (double x : {-3.0, -0.4, 0.0, 1.1, 4.0})
        CHECK(t.eval(x) == doctest::Approx(t.output_scale * (t.base.eval(t.input_scale * x + t.input_shift) + t.output_shift))
                               .epsilon(1e-15));
}

}  // namespace

TEST_CASE("TAT leaky ReLU: single layer") {
    auto g = build_vanilla(1);
    auto s = solve_tat_lrelu(g, 1.0 / std::numbers::pi);
    CHECK(std::abs(s.alpha) <= 1e-9);
    try {
        solve_tat_lrelu(g, 0.9);
        FAIL("expected an unattainable target");
    } catch (const UnattainableTarget& e) {
        CHECK(std::abs(e.max_value() - 1.0 / std::numbers::pi) <= 1e-15);
        CHECK(std::string(e.what()).find("0.3183") != std::string::npos);
    }
    CHECK_THROWS_AS(solve_tat_lrelu(g, 0.0), InvalidArgument);
    CHECK_THROWS_AS(solve_tat_lrelu(g, 1.0), InvalidArgument);
    NetworkGraph lin;
    lin.set_output(lin.add_affine(lin.add_input()));
    CHECK_THROWS_AS(solve_tat_lrelu(lin, 0.5), InvalidArgument);
}

TEST_CASE("TAT leaky ReLU: deep vanilla round trip") {
    auto g = build_vanilla(50);
    auto s = solve_tat_lrelu(g, 0.9);
    CHECK(s.alpha > 0.0);
    CHECK(s.alpha < 1.0);
    CHECK(std::abs(s.achieved_eta - 0.9) <= 1e-6);
    CHECK(std::abs(compose_lrelu(s.alpha, 50, 0.0) - 0.9) <= 2e-6);
    CHECK(std::abs(global_c(g, [&](double c) { return lrelu_c_map(s.alpha, c); }, 0.0) - 0.9) <= 2e-6);
    auto again = solve_tat_lrelu(g, 0.9);
    CHECK(again.alpha == s.alpha);
    auto j = to_json(s);
    CHECK(j["method"] == "tat-lrelu");
    CHECK(j["parameters"]["alpha"] == s.alpha);
}

TEST_CASE("TAT leaky ReLU: bracketing endpoints") {
    for (auto g : {build_vanilla(20), build_rescaled_resnet(10, 0.5, 3, true, true)}) {
        auto cands = enumerate_maximal_subnetworks(g);
        CHECK(mu0(g, cands, 1.0) == 0.0);
        CHECK(mu0(g, cands, 0.0) > 0.9);
        auto s = solve_tat_lrelu(g, 0.7);
        CHECK(std::abs(s.achieved_eta - 0.7) <= 1e-6);
    }
}

TEST_CASE("TAT smooth: softplus") {
    auto g = build_vanilla(50);
    auto s = solve_tat_smooth(g, Activation::softplus(), 0.3);
    CHECK(s.curvature_multiplier == doctest::Approx(50.0).epsilon(1e-14));
    CHECK(std::abs(s.target_local_cpp1 - 0.3 / 50) <= 1e-15);
    CHECK(s.residual_norm <= 1e-8);
    CHECK(s.activation.output_scale > 0.0);
    check_affine_of_base(s.activation);
    // Re-verify with a doubled-order rule.
    QuadratureRule fine = QuadratureRule().doubled();
    auto st = cstats({s.activation, 1.0, 0.0}, fine);
    CHECK(std::abs(st.q1 - 1.0) <= 1e-7);
    CHECK(std::abs(st.qp1 - 1.0) <= 1e-7);
    CHECK(std::abs(st.cp1 - 1.0) <= 1e-7);
    CHECK(std::abs(st.cpp1 - 0.3 / 50) <= 1e-7);
    auto again = solve_tat_smooth(g, Activation::softplus(), 0.3);
    CHECK(again.activation.input_scale == s.activation.input_scale);
    CHECK(again.activation.output_shift == s.activation.output_shift);
}

TEST_CASE("TAT smooth: tanh on a transition resnet") {
    double w = 0.6;
    auto g = build_rescaled_resnet(8, w, 3, true, true);
    double L = 8 * 3 + 2;
    auto s = solve_tat_smooth(g, Activation::tanh(), 0.4);
    double m = (L - 6) * (1 - w * w) + 5;
    CHECK(std::abs(s.curvature_multiplier - m) <= 1e-12);
    CHECK(std::abs(s.target_local_cpp1 - 0.4 / m) <= 1e-14);
    CHECK(s.residual_norm <= 1e-8);
    auto st = cstats({s.activation, 1.0, 0.0}, QuadratureRule().doubled());
    CHECK(std::abs(st.cpp1 - 0.4 / m) <= 1e-7);
    CHECK(std::abs(st.cp1 - 1.0) <= 1e-7);
}

TEST_CASE("TAT smooth: identity base") {
    auto s = solve_tat_smooth(build_vanilla(10), Activation::identity(), 1e-12);
    CHECK(s.residual_norm <= 1e-10);
    const auto& t = s.activation;
    // The result is affine, and C''(1) = 0 makes it a pure rescaling.
    CHECK(std::abs(t.eval(0.7) - (t.eval(0.0) + 0.7 * t.eval(0.0, 1))) <= 1e-12);
    CHECK(std::abs(t.eval(0.0)) <= 1e-8);
    CHECK(std::abs(t.eval(1.0) * t.eval(1.0) - 1.0) <= 1e-8);
}

TEST_CASE("smooth solvers reject kinked activations") {
    CHECK_THROWS_AS(solve_tat_smooth(build_vanilla(3), Activation::relu(), 0.3), Unsupported);
    CHECK_THROWS_AS(solve_dks(build_vanilla(3), Activation::trelu(0.2), 1.5), Unsupported);
    CHECK_THROWS_AS(solve_eoc_smooth(Activation::relu(), 0.0), Unsupported);
    CHECK_THROWS_AS(solve_tat_smooth(build_vanilla(3), Activation::tanh(), 0.0), InvalidArgument);
}

TEST_CASE("DKS") {
    for (int L : {5, 50}) {
        auto g = build_vanilla(L);
        auto s = solve_dks(g, Activation::tanh(), 1.5);
        CHECK(std::abs(s.target_local_cp1 - std::pow(1.5, 1.0 / L)) <= 1e-10);
        CHECK(s.residual_norm <= 1e-8);
        check_affine_of_base(s.activation);
        LocalMapParams p{s.activation, 1.0, 0.0};
        auto st = cstats(p, QuadratureRule().doubled());
        CHECK(std::abs(st.q1 - 1.0) <= 1e-7);
        CHECK(std::abs(st.qp1 - 1.0) <= 1e-7);
        CHECK(std::abs(st.cp1 - s.target_local_cp1) <= 1e-7);
        CHECK(std::abs(st.c0) <= 1e-7);
        CMapSeries series(p);
        CHECK(std::abs(global_c(g, [&](double c) { return series(c); }, 0.0)) <= 1e-7);
    }
    auto soft = solve_dks(build_rescaled_resnet(6, 0.5, 3, false, false), Activation::softplus(), 2.0);
    CHECK(soft.residual_norm <= 1e-8);
    CHECK_THROWS_AS(solve_dks(build_vanilla(3), Activation::tanh(), 1.0), InvalidArgument);
    CHECK_THROWS_AS(solve_dks(build_vanilla(3), Activation::tanh(), 0.5), InvalidArgument);
    auto j = to_json(soft);
    CHECK(j["method"] == "dks");
    CHECK(j["parameters"].contains("gamma"));
}

TEST_CASE("DKS slope target on a resnet") {
    double w = 0.5;
    auto g = build_rescaled_resnet(6, w, 3, false, false);
    auto s = solve_dks(g, Activation::softplus(), 2.0);
    double m = s.target_local_cp1;
    double block = w * w + (1 - w * w) * m * m * m;
    CHECK(std::abs(std::pow(block, 6) - 2.0) <= 1e-10);
}

TEST_CASE("q fixed point") {
    QuadratureRule rule;
    LocalMapParams id{Activation::identity(), 1.0, 0.0};
    auto f = q_fixed_point(id, rule);
    CHECK(f.converged);
    CHECK(f.q == 1.0);
    LocalMapParams t{Activation::tanh(), 1.5, 0.3};
    auto ft = q_fixed_point(t, rule, 1.0);
    CHECK(ft.converged);
    CHECK(std::abs(local_q(t, rule, ft.q) - ft.q) <= 1e-11);
    // Plain iteration reaches the same point.
    double q = 1.0;
    for (int i = 0; i < 5000; ++i) q = local_q(t, rule, q);
    CHECK(std::abs(q - ft.q) <= 1e-10);
}

TEST_CASE("EOC smooth") {
    auto id = solve_eoc_smooth(Activation::identity(), 0.0);
    CHECK(std::abs(id.sigma_w - 1.0) <= 1e-12);
    CHECK(std::abs(id.q_fixed_point - 1.0) <= 1e-10);

    QuadratureRule fine = QuadratureRule().doubled();
    for (double sb : {0.02, 0.2}) {
        auto s = solve_eoc_smooth(Activation::tanh(), sb);
        CHECK(std::abs(s.fixed_point_residual) <= 1e-10);
        CHECK(std::abs(s.slope_residual) <= 1e-8);
        LocalMapParams p{Activation::tanh(), s.sigma_w, sb};
        double q = s.q_fixed_point;
        CHECK(std::abs(local_q(p, fine, q) - q) <= 1e-10);
        CHECK(std::abs(local_c_derivative(p, fine, 1.0, q, q, 1) - 1.0) <= 1e-8);
    }
    auto j = to_json(solve_eoc_smooth(Activation::tanh(), 0.1));
    CHECK(j["method"] == "eoc");
    // Softplus slopes stay below 1 on average wherever the q map has a fixed point.
    CHECK_THROWS_AS(solve_eoc_smooth(Activation::softplus(), 0.1), NotFound);
}

TEST_CASE("EOC leaky ReLU needs no solve") {
    QuadratureRule rule;
    auto r = solve_eoc_lrelu(Activation::relu());
    CHECK(std::abs(r.sigma_w - std::numbers::sqrt2) <= 1e-15);
    LocalMapParams p{Activation::relu(), r.sigma_w, 0.0};
    auto st = cstats(p, rule);
    CHECK(std::abs(st.q1 - 1.0) <= 1e-12);
    CHECK(std::abs(st.cp1 - 1.0) <= 1e-12);
    auto t = solve_eoc_lrelu(Activation::trelu(0.4));
    CHECK(std::abs(t.sigma_w - 1.0) <= 1e-15);
    auto l = solve_eoc_lrelu(Activation::lrelu(0.4));
    LocalMapParams pl{Activation::lrelu(0.4), l.sigma_w, 0.0};
    CHECK(std::abs(local_q(pl, rule, 2.5) - 2.5) <= 1e-12);
    CHECK_THROWS_AS(solve_eoc_lrelu(Activation::tanh()), InvalidArgument);
}
