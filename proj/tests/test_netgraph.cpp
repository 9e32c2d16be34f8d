#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "oracles.hpp"
#include "qcmap/errors.hpp"
#include "qcmap/kernel_maps.hpp"
#include "qcmap/netgraph.hpp"

using namespace qcmap;

namespace {

ScalarMap r2(double cpp) {
    return [cpp](double x) { return cpp + x; };
}

ScalarMap relu_c() {
    return [](double c) { return lrelu_c_map(0.0, c); };
}

std::vector<NetworkGraph> random_graphs(int count, int max_nodes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<NetworkGraph> out;
    for (int i = 0; i < count; ++i) out.push_back(oracle::random_graph(rng, max_nodes));
    return out;
}

using Key = std::tuple<int, int, std::vector<int>>;

std::set<Key> keys(const std::vector<SubnetworkRef>& subs) {
    std::set<Key> s;
    for (const auto& r : subs) {
        auto m = r.members;
        std::sort(m.begin(), m.end());
        s.insert({r.entry, r.exit, m});
    }
    return s;
}

std::set<Key> keys(const std::vector<oracle::BruteSub>& subs) {
    std::set<Key> s;
    for (const auto& r : subs) s.insert({r.entry, r.exit, r.members});
    return s;
}

std::string validation_message(const NetworkGraph& g, int* node = nullptr) {
    try {
        validate_graph(g);
    } catch (const ValidationError& e) {
        if (node) *node = e.node();
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("vanilla construction") {
    auto g1 = build_vanilla(1);
    REQUIRE(g1.size() == 3);
    CHECK(g1.node(0).kind == NodeKind::Input);
    CHECK(g1.node(1).kind == NodeKind::Affine);
    CHECK(g1.node(2).kind == NodeKind::Nonlinear);
    CHECK(g1.output() == 2);
    auto g3 = build_vanilla(3);
    CHECK(g3.count(NodeKind::Nonlinear) == 3);
    CHECK(eval_U(g3, [](double x) { return x + 1; }, 0.0) == 3.0);
    CHECK_THROWS_AS(build_vanilla(0), InvalidArgument);
    CHECK_NOTHROW(validate_graph(build_vanilla(100)));
}

TEST_CASE("resnet construction") {
    auto g = build_rescaled_resnet(6, 0.4, 3, false, false);
    CHECK_NOTHROW(validate_graph(g));
    CHECK(g.count(NodeKind::Nonlinear) == 18);
    CHECK(g.count(NodeKind::NormalizedSum) == 6);
    for (const auto& n : g.nodes()) {
        if (n.kind != NodeKind::NormalizedSum) continue;
        CHECK(n.weights[0] == 0.4);
        CHECK(std::abs(n.weights[1] - std::sqrt(1 - 0.16)) <= 1e-16);
    }
    auto t = build_rescaled_resnet(8, 0.5, 3, true, true);
    CHECK_NOTHROW(validate_graph(t));
    CHECK(t.count(NodeKind::Nonlinear) == 8 * 3 + 4 + 1);
    CHECK_THROWS_AS(build_rescaled_resnet(3, 0.5, 2, true, false), InvalidArgument);
    CHECK_THROWS_AS(build_rescaled_resnet(3, 1.5, 2, false, false), InvalidArgument);
    CHECK_THROWS_AS(build_rescaled_resnet(0, 0.5, 2, false, false), InvalidArgument);
    CHECK_THROWS_AS(build_rescaled_resnet(3, 0.5, 0, false, false), InvalidArgument);
}

TEST_CASE("validation") {
    NetworkGraph ok;
    int in = ok.add_input();
    int a = ok.add_nonlinear(ok.add_affine(in));
    ok.set_output(ok.add_sum({in, a}, {0.6, 0.8}));
    CHECK(validation_message(ok).empty());

    NetworkGraph bad = ok;
    Node s = bad.node(3);
    s.weights = {0.5, 0.5};
    NetworkGraph b2;
    for (int i = 0; i < 3; ++i) b2.add_node(bad.node(i));
    b2.add_node(s);
    b2.set_output(3);
    int node = -2;
    CHECK(validation_message(b2, &node).find("unnormalized sum") != std::string::npos);
    CHECK(node == 3);

    NetworkGraph two;
    int i1 = two.add_input(), i2 = two.add_input();
    two.set_output(two.add_sum({i1, i2}, {0.6, 0.8}));
    CHECK(validation_message(two, &node).find("multiple inputs") != std::string::npos);
    CHECK(node == 1);

    NetworkGraph cyc;
    cyc.add_input();
    cyc.add_node({NodeKind::NormalizedSum, {0, 2}, {0.6, 0.8}});
    cyc.add_node({NodeKind::Nonlinear, {1}, {}});
    cyc.set_output(2);
    CHECK(validation_message(cyc).find("cycle") != std::string::npos);

    NetworkGraph dangling = build_vanilla(2);
    dangling.add_nonlinear(0);
    CHECK(validation_message(dangling, &node).find("does not feed the output") != std::string::npos);
    CHECK(node == 5);

    NetworkGraph arity;
    arity.add_input();
    arity.add_node({NodeKind::Nonlinear, {0, 0}, {}});
    arity.set_output(1);
    CHECK(!validation_message(arity).empty());

    NetworkGraph noout = build_vanilla(2);
    noout.set_output(17);
    CHECK(!validation_message(noout).empty());
}

TEST_CASE("topological order respects predecessors") {
    for (const auto& g : random_graphs(50, 14, 3)) {
        auto order = topological_order(g);
        REQUIRE(order.size() == g.size());
        std::vector<int> pos(g.size());
        for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);
        for (int v = 0; v < static_cast<int>(g.size()); ++v)
            for (int p : g.node(v).preds) CHECK(pos[p] < pos[v]);
    }
}

TEST_CASE("random graphs validate") {
    for (const auto& g : random_graphs(200, 12, 5)) {
        CHECK(g.size() <= 12);
        CHECK_NOTHROW(validate_graph(g));
    }
}

TEST_CASE("subnetwork enumeration matches brute force") {
    for (const auto& g : random_graphs(150, 12, 7)) CHECK(keys(enumerate_subnetworks(g)) == keys(oracle::brute_force_subnetworks(g)));
    auto v = build_vanilla(4);
    CHECK(keys(enumerate_subnetworks(v)) == keys(oracle::brute_force_subnetworks(v)));
    auto r = build_rescaled_resnet(2, 0.5, 2, false, false);
    CHECK(keys(enumerate_subnetworks(r)) == keys(oracle::brute_force_subnetworks(r)));
}

TEST_CASE("maximization candidates") {
    auto small = build_vanilla(5);
    CHECK(small.size() == 11);
    CHECK(maximization_candidates(small).size() == enumerate_subnetworks(small).size());
    auto large = build_vanilla(6);
    CHECK(maximization_candidates(large).size() == 1);
}

TEST_CASE("maximal subnetwork candidates") {
    auto v = build_vanilla(50);
    auto cv = enumerate_maximal_subnetworks(v);
    REQUIRE(cv.size() == 1);
    CHECK(cv[0].entry == 0);
    CHECK(cv[0].exit == v.output());
    CHECK(cv[0].members.size() == v.size() - 1);
    CHECK(enumerate_maximal_subnetworks(build_vanilla(1)).size() == 1);
    auto r = enumerate_maximal_subnetworks(build_rescaled_resnet(10, 0.5, 3, false, false));
    CHECK(r.size() == 2);
    CHECK(r[0].entry == 0);
    // One residual branch: three affine and three nonlinear nodes.
    CHECK(r[1].members.size() == 6);
    CHECK(enumerate_maximal_subnetworks(build_rescaled_resnet(10, 0.5, 3, true, true)).size() >= 2);

    // Every proper subnetwork of a short vanilla net is dominated by the whole.
    auto v4 = build_vanilla(4);
    for (const auto& s : oracle::brute_force_subnetworks(v4))
        CHECK(oracle::brute_U(v4, s, r2(0.7), 0.0) <= eval_M(v4, r2(0.7), 0.0));
}

TEST_CASE("eval_U rules") {
    for (const auto& g : random_graphs(50, 12, 9)) CHECK(std::abs(eval_U(g, [](double x) { return x; }, 0.37) - 0.37) <= 1e-15);
    for (int L : {1, 7, 50}) CHECK(std::abs(eval_U(build_vanilla(L), r2(0.8), 0.0) - L * 0.8) <= 1e-12);
    CHECK(std::abs(eval_U(build_rescaled_resnet(1, 0.0, 1, false, false), r2(0.8), 0.0) - 0.8) <= 1e-15);
    for (double w : {0.0, 0.3, 0.8}) {
        int B = 10, k = 3;
        auto g = build_rescaled_resnet(B, w, k, false, false);
        double L = B * k;
        CHECK(std::abs(eval_U(g, r2(1.3), 0.0) - L * (1 - w * w) * 1.3) <= 1e-12);
        CHECK(std::abs(eval_M(g, r2(1.3), 0.0) - std::max(3.0, L * (1 - w * w)) * 1.3) <= 1e-12);
    }
    for (double w : {0.2, 0.5, 0.9}) {
        auto g = build_rescaled_resnet(8, w, 3, true, true);
        double L = 8 * 3 + 2;
        CHECK(std::abs(eval_U(g, r2(0.6), 0.0) - ((L - 6) * (1 - w * w) + 5) * 0.6) <= 1e-12);
    }
    for (const auto& g : random_graphs(30, 12, 10)) CHECK(eval_M(g, r2(0.0), 0.0) == 0.0);
}

TEST_CASE("eval_U is monotone for monotone r") {
    auto r = relu_c();
    for (const auto& g : random_graphs(40, 12, 11)) {
        double prev = -INFINITY;
        for (int i = 0; i <= 120; ++i) {
            double x = -1.0 + 2.0 * i / 120;
            double u = eval_U(g, r, x);
            CHECK(u >= prev);
            prev = u;
        }
    }
}

TEST_CASE("eval_M against exhaustive subnetwork search") {
    auto m1 = [](double x) { return 1.3 * x; };
    for (const auto& g : random_graphs(200, 12, 13)) {
        auto subs = oracle::brute_force_subnetworks(g);
        for (auto [r, x] : {std::pair<ScalarMap, double>{relu_c(), 0.0}, {relu_c(), -0.5}, {m1, 1.0}, {r2(0.7), 0.0}}) {
            double m = eval_M(g, r, x);
            double best = -INFINITY;
            for (const auto& s : subs) {
                double u = oracle::brute_U(g, s, r, x);
                CHECK(m >= u - 1e-15);
                best = std::max(best, u);
            }
            CHECK(m == best);
            // The pruned candidate set reaches the same maximum up to rounding.
            CHECK(eval_M(g, enumerate_maximal_subnetworks(g), r, x) == doctest::Approx(best).epsilon(1e-14));
        }
    }
}

TEST_CASE("serial composition") {
    auto r = relu_c();
    auto gs = random_graphs(20, 10, 17);
    for (std::size_t i = 0; i + 1 < gs.size(); i += 2) {
        auto c = compose_serial(gs[i], gs[i + 1]);
        CHECK_NOTHROW(validate_graph(c));
        for (double x : {-0.8, 0.0, 0.6})
            CHECK(std::abs(eval_U(c, r, x) - eval_U(gs[i], r, eval_U(gs[i + 1], r, x))) <= 1e-15);
    }
}

TEST_CASE("curvature term scales linearly") {
    for (const auto& g : random_graphs(50, 12, 19)) {
        double a = eval_M(g, r2(0.3), 0.0), b = eval_M(g, r2(1.7), 0.0);
        CHECK(a >= 0.0);
        CHECK(std::abs(a / 0.3 - b / 1.7) <= 1e-12 * (b / 1.7));
    }
}

TEST_CASE("degeneracy measure is strictly decreasing in alpha") {
    auto gs = random_graphs(30, 12, 23);
    gs.push_back(build_vanilla(50));
    gs.push_back(build_rescaled_resnet(10, 0.5, 3, true, true));
    for (const auto& g : gs) {
        auto cands = enumerate_maximal_subnetworks(g);
        double prev = INFINITY;
        for (int i = 0; i < 20; ++i) {
            double a = 0.05 * i;
            double mu = eval_M(g, cands, [a](double c) { return lrelu_c_map(a, c); }, 0.0);
            CHECK(mu < prev);
            prev = mu;
        }
    }
}

TEST_CASE("forward slope") {
    auto r = relu_c();
    auto rp = [](double c) { return lrelu_c_map_derivative(0.0, c); };
    for (const auto& g : random_graphs(20, 12, 29)) {
        auto vs = eval_U_with_slope(g, r, rp, 0.2);
        CHECK(vs.value == eval_U(g, r, 0.2));
        auto f = [&](double x) { return eval_U(g, r, x); };
        CHECK(std::abs(vs.slope - oracle::central_difference(f, 0.2, 1e-6)) <= 1e-7);
    }
}
