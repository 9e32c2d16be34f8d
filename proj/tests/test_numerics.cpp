#include <doctest.h>

#include <cmath>

#include "qcmap/errors.hpp"
#include "qcmap/numerics.hpp"

using namespace qcmap;

TEST_CASE("bisection") {
    auto r = bisect([](double x) { return x - 0.5; }, 0.0, 1.0, 0.0);
    CHECK(std::abs(r.root - 0.5) <= 1e-14);

    auto c = bisect([](double x) { return std::cos(x) - x; }, 0.0, 1.0, 1e-15);
    // Independent oracle: plain fixed-point iteration of cos.
    double x = 0.5;
    for (int i = 0; i < 2000; ++i) x = std::cos(x);
    CHECK(std::abs(c.root - x) <= 1e-9);
    CHECK(std::abs(c.root - 0.739085) <= 1e-6);
    CHECK(c.iterations > 10);

    CHECK(std::abs(bisect([](double x) { return 0.3 - x; }, 0.0, 1.0, 1e-15).root - 0.3) <= 1e-13);
    CHECK_THROWS_AS(bisect([](double x) { return x; }, 1.0, 0.0, 1e-15), InvalidArgument);
    auto early = bisect([](double x) { return x - 0.5; }, 0.0, 1.0, 0.1);
    CHECK(std::abs(early.residual) <= 0.1);
    CHECK(std::abs(bisect([](double x) { return x; }, 0.0, 1.0, 1e-3).root) == 0.0);
}

TEST_CASE("bisection without a bracket") {
    try {
        bisect([](double x) { return x * x + 1.0; }, 0.0, 1.0, 1e-12);
        FAIL("expected a bracket error");
    } catch (const BracketError& e) {
        CHECK(e.f_lo() == 1.0);
        CHECK(e.f_hi() == 2.0);
        CHECK(e.code() == "bracket-error");
    }
}

TEST_CASE("nonlinear system: linear") {
    Eigen::Vector3d a(0.3, -2.0, 7.5);
    auto r = solve_nonlinear_system([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x - a; }, Eigen::Vector3d::Zero());
    CHECK((r.x - Eigen::VectorXd(a)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(r.residual.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("nonlinear system: Rosenbrock gradient") {
    auto grad = [](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        double x = v[0], y = v[1];
        Eigen::VectorXd g(2);
        g << -2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x);
        return g;
    };
    for (auto x0 : {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.1, -0.1), Eigen::Vector2d(-0.2, 0.3)}) {
        auto r = solve_nonlinear_system(grad, x0);
        CHECK(std::abs(r.x[0] - 1.0) <= 1e-8);
        CHECK(std::abs(r.x[1] - 1.0) <= 1e-8);
    }
}

TEST_CASE("nonlinear system: coupled transcendental") {
    auto F = [](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        Eigen::VectorXd f(3);
        f << std::exp(v[0]) - 2.0, v[0] * v[1] - 1.0, std::sin(v[2]) + v[1] - 2.0;
        return f;
    };
    auto r = solve_nonlinear_system(F, Eigen::Vector3d(0.5, 0.5, 0.5));
    CHECK(std::abs(r.x[0] - std::log(2.0)) <= 1e-10);
    CHECK(std::abs(r.x[1] - 1.0 / std::log(2.0)) <= 1e-10);
    CHECK(F(r.x).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("nonlinear system failure carries diagnostics") {
    auto F = [](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        Eigen::VectorXd f(1);
        f << v[0] * v[0] + 1.0;
        return f;
    };
    try {
        solve_nonlinear_system(F, Eigen::VectorXd::Constant(1, 0.7), {1e-10, 200, 5});
        FAIL("expected solver failure");
    } catch (const SolverFailure& e) {
        CHECK(e.context().contains("last_iterate"));
        CHECK(e.context().contains("residual"));
    }
}
