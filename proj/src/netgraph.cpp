#include "qcmap/netgraph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <unordered_set>

#include "qcmap/errors.hpp"

namespace qcmap {

NodeId NetworkGraph::add_node(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId NetworkGraph::add_input() { return add_node({NodeKind::Input, {}, {}}); }
NodeId NetworkGraph::add_affine(NodeId pred) { return add_node({NodeKind::Affine, {pred}, {}}); }
NodeId NetworkGraph::add_nonlinear(NodeId pred) { return add_node({NodeKind::Nonlinear, {pred}, {}}); }
NodeId NetworkGraph::add_sum(std::vector<NodeId> preds, std::vector<double> weights) {
    return add_node({NodeKind::NormalizedSum, std::move(preds), std::move(weights)});
}

std::size_t NetworkGraph::count(NodeKind kind) const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.kind == kind; }));
}

const char* kind_name(NodeKind kind) {
    switch (kind) {
        case NodeKind::Input: return "input";
        case NodeKind::Affine: return "affine";
        case NodeKind::Nonlinear: return "nonlinear";
        case NodeKind::NormalizedSum: return "sum";
    }
    return "?";
}

NetworkGraph build_vanilla(int depth) {
    if (depth < 1) throw InvalidArgument("vanilla depth must be at least 1", {{"depth", depth}});
    NetworkGraph g;
    NodeId cur = g.add_input();
    for (int l = 0; l < depth; ++l) cur = g.add_nonlinear(g.add_affine(cur));
    g.set_output(cur);
    return g;
}

NetworkGraph build_rescaled_resnet(const ResNetOptions& opt) {
    if (opt.num_blocks < 1) throw InvalidArgument("resnet needs at least one block", {{"blocks", opt.num_blocks}});
    if (!(std::abs(opt.shortcut_weight) <= 1.0))
        throw InvalidArgument("shortcut weight must satisfy |w| <= 1", {{"w", opt.shortcut_weight}});
    if (opt.branch_nonlinear_count < 1)
        throw InvalidArgument("residual branch needs at least one nonlinear layer", {{"count", opt.branch_nonlinear_count}});
    std::vector<int> transitions = opt.transition_blocks;
    if (opt.with_transitions) {
        if (opt.num_blocks < 4) throw InvalidArgument("transition blocks need at least 4 blocks", {{"blocks", opt.num_blocks}});
        if (transitions.empty())
            for (int i = 0; i < 4; ++i) transitions.push_back(i * opt.num_blocks / 4);
        if (transitions.size() != 4) throw InvalidArgument("exactly 4 transition blocks are required");
        for (int b : transitions)
            if (b < 0 || b >= opt.num_blocks) throw InvalidArgument("transition block index out of range", {{"block", b}});
    } else {
        transitions.clear();
    }

    double w = opt.shortcut_weight;
    double v = std::sqrt(std::max(0.0, 1.0 - w * w));
    NetworkGraph g;
    NodeId cur = g.add_input();
    for (int b = 0; b < opt.num_blocks; ++b) {
        NodeId branch = cur;
        for (int i = 0; i < opt.branch_nonlinear_count; ++i) branch = g.add_nonlinear(g.add_affine(branch));
        NodeId shortcut = cur;
        if (std::find(transitions.begin(), transitions.end(), b) != transitions.end())
            shortcut = g.add_nonlinear(g.add_affine(cur));
        cur = g.add_sum({shortcut, branch}, {w, v});
    }
    if (opt.final_nonlinear) cur = g.add_nonlinear(g.add_affine(cur));
    g.set_output(cur);
    return g;
}

NetworkGraph build_rescaled_resnet(int num_blocks, double shortcut_weight, int branch_nonlinear_count,
                                   bool with_transitions, bool final_nonlinear) {
    ResNetOptions opt;
    opt.num_blocks = num_blocks;
    opt.shortcut_weight = shortcut_weight;
    opt.branch_nonlinear_count = branch_nonlinear_count;
    opt.with_transitions = with_transitions;
    opt.final_nonlinear = final_nonlinear;
    return build_rescaled_resnet(opt);
}

NetworkGraph compose_serial(const NetworkGraph& outer, const NetworkGraph& inner) {
    NetworkGraph g = inner;
    NodeId offset = static_cast<NodeId>(g.size());
    std::vector<NodeId> remap(outer.size(), -1);
    for (std::size_t i = 0; i < outer.size(); ++i) {
        if (outer.nodes()[i].kind == NodeKind::Input) remap[i] = inner.output();
    }
    NodeId next = offset;
    for (std::size_t i = 0; i < outer.size(); ++i)
        if (remap[i] < 0) remap[i] = next++;
    for (std::size_t i = 0; i < outer.size(); ++i) {
        const Node& n = outer.nodes()[i];
        if (n.kind == NodeKind::Input) continue;
        Node copy = n;
        for (NodeId& p : copy.preds) p = remap.at(static_cast<std::size_t>(p));
        g.add_node(std::move(copy));
    }
    g.set_output(remap.at(static_cast<std::size_t>(outer.output())));
    return g;
}

namespace {

std::string node_label(NodeId id) { return "node " + std::to_string(id); }

std::vector<std::vector<NodeId>> successors(const NetworkGraph& g) {
    std::vector<std::vector<NodeId>> succ(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        for (NodeId p : g.nodes()[i].preds) succ[static_cast<std::size_t>(p)].push_back(static_cast<NodeId>(i));
    for (auto& s : succ) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    return succ;
}

// Kahn's algorithm; returns fewer than g.size() ids when a cycle exists.
std::vector<NodeId> kahn(const NetworkGraph& g, const std::vector<std::vector<NodeId>>& succ) {
    std::vector<int> indeg(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::vector<NodeId> preds = g.nodes()[i].preds;
        std::sort(preds.begin(), preds.end());
        indeg[i] = static_cast<int>(std::unique(preds.begin(), preds.end()) - preds.begin());
    }
    std::deque<NodeId> ready;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (indeg[i] == 0) ready.push_back(static_cast<NodeId>(i));
    std::vector<NodeId> order;
    order.reserve(g.size());
    while (!ready.empty()) {
        NodeId u = ready.front();
        ready.pop_front();
        order.push_back(u);
        for (NodeId s : succ[static_cast<std::size_t>(u)])
            if (--indeg[static_cast<std::size_t>(s)] == 0) ready.push_back(s);
    }
    return order;
}

}  // namespace

void validate_graph(const NetworkGraph& g) {
    const auto n = static_cast<NodeId>(g.size());
    if (n == 0) throw ValidationError("empty graph", -1);
    NodeId input = -1;
    for (NodeId i = 0; i < n; ++i) {
        const Node& node = g.node(i);
        for (NodeId p : node.preds)
            if (p < 0 || p >= n) throw ValidationError(node_label(i) + ": unknown predecessor " + std::to_string(p), i);
        switch (node.kind) {
            case NodeKind::Input:
                if (!node.preds.empty()) throw ValidationError(node_label(i) + ": input node has predecessors", i);
                if (input >= 0)
                    throw ValidationError("multiple inputs: " + node_label(input) + " and " + node_label(i), i);
                input = i;
                break;
            case NodeKind::Affine:
            case NodeKind::Nonlinear:
                if (node.preds.size() != 1)
                    throw ValidationError(node_label(i) + ": " + kind_name(node.kind) + " node needs exactly one predecessor", i);
                break;
            case NodeKind::NormalizedSum: {
                if (node.preds.size() < 2) throw ValidationError(node_label(i) + ": sum node needs at least two predecessors", i);
                if (node.weights.size() != node.preds.size())
                    throw ValidationError(node_label(i) + ": sum node has " + std::to_string(node.weights.size()) +
                                              " weights for " + std::to_string(node.preds.size()) + " predecessors",
                                          i);
                double s = 0.0;
                for (double w : node.weights) s += w * w;
                if (!std::isfinite(s) || std::abs(s - 1.0) > 1e-12)
                    throw ValidationError("unnormalized sum at " + node_label(i) + ": squared weights add to " +
                                              std::to_string(s),
                                          i);
                break;
            }
        }
    }
    if (input < 0) throw ValidationError("missing input node", -1);
    if (g.output() < 0 || g.output() >= n) throw ValidationError("output node is not set or out of range", g.output());

    auto succ = successors(g);
    auto order = kahn(g, succ);
    if (order.size() != g.size()) {
        std::vector<char> placed(g.size(), 0);
        for (NodeId u : order) placed[static_cast<std::size_t>(u)] = 1;
        NodeId bad = 0;
        while (placed[static_cast<std::size_t>(bad)]) ++bad;
        throw ValidationError("cycle through " + node_label(bad), bad);
    }

    std::vector<char> seen(g.size(), 0);
    std::vector<NodeId> stack{input};
    seen[static_cast<std::size_t>(input)] = 1;
    while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        for (NodeId s : succ[static_cast<std::size_t>(u)])
            if (!seen[static_cast<std::size_t>(s)]) seen[static_cast<std::size_t>(s)] = 1, stack.push_back(s);
    }
    for (NodeId i = 0; i < n; ++i)
        if (!seen[static_cast<std::size_t>(i)]) throw ValidationError(node_label(i) + " is unreachable from the input", i);

    std::fill(seen.begin(), seen.end(), 0);
    stack = {g.output()};
    seen[static_cast<std::size_t>(g.output())] = 1;
    while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        for (NodeId p : g.node(u).preds)
            if (!seen[static_cast<std::size_t>(p)]) seen[static_cast<std::size_t>(p)] = 1, stack.push_back(p);
    }
    for (NodeId i = 0; i < n; ++i)
        if (!seen[static_cast<std::size_t>(i)]) throw ValidationError(node_label(i) + " does not feed the output", i);
}

std::vector<NodeId> topological_order(const NetworkGraph& g) {
    auto order = kahn(g, successors(g));
    if (order.size() != g.size()) throw ValidationError("graph has a cycle", -1);
    return order;
}

namespace {

double combine_sum(const Node& node, const std::vector<double>& vals) {
    double acc = 0.0;
    for (std::size_t i = 0; i < node.preds.size(); ++i) {
        double w = node.weights[i];
        acc += w * w * vals[static_cast<std::size_t>(node.preds[i])];
    }
    return acc;
}

template <class It>
double eval_nodes(const NetworkGraph& g, It begin, It end, std::vector<double>& vals, const ScalarMap& r) {
    double last = 0.0;
    for (It it = begin; it != end; ++it) {
        NodeId id = *it;
        const Node& node = g.node(id);
        double v = 0.0;
        switch (node.kind) {
            case NodeKind::Input:
                continue;
            case NodeKind::Affine:
                v = vals[static_cast<std::size_t>(node.preds[0])];
                break;
            case NodeKind::Nonlinear:
                v = r(vals[static_cast<std::size_t>(node.preds[0])]);
                break;
            case NodeKind::NormalizedSum:
                v = combine_sum(node, vals);
                break;
        }
        vals[static_cast<std::size_t>(id)] = v;
        last = v;
    }
    return last;
}

}  // namespace

double eval_U(const NetworkGraph& g, const ScalarMap& r, double x) {
    auto order = topological_order(g);
    std::vector<double> vals(g.size(), 0.0);
    for (NodeId id : order)
        if (g.node(id).kind == NodeKind::Input) vals[static_cast<std::size_t>(id)] = x;
    eval_nodes(g, order.begin(), order.end(), vals, r);
    return vals[static_cast<std::size_t>(g.output())];
}

double eval_U(const NetworkGraph& g, const SubnetworkRef& sub, const ScalarMap& r, double x) {
    std::vector<double> vals(g.size(), 0.0);
    vals[static_cast<std::size_t>(sub.entry)] = x;
    eval_nodes(g, sub.members.begin(), sub.members.end(), vals, r);
    return vals[static_cast<std::size_t>(sub.exit)];
}

ValueAndSlope eval_U_with_slope(const NetworkGraph& g, const ScalarMap& r, const ScalarMap& r_prime, double x) {
    auto order = topological_order(g);
    std::vector<double> val(g.size(), 0.0), der(g.size(), 0.0);
    for (NodeId id : order) {
        const Node& node = g.node(id);
        auto i = static_cast<std::size_t>(id);
        switch (node.kind) {
            case NodeKind::Input:
                val[i] = x;
                der[i] = 1.0;
                break;
            case NodeKind::Affine:
                val[i] = val[static_cast<std::size_t>(node.preds[0])];
                der[i] = der[static_cast<std::size_t>(node.preds[0])];
                break;
            case NodeKind::Nonlinear: {
                double in = val[static_cast<std::size_t>(node.preds[0])];
                val[i] = r(in);
                der[i] = r_prime(in) * der[static_cast<std::size_t>(node.preds[0])];
                break;
            }
            case NodeKind::NormalizedSum: {
                val[i] = combine_sum(node, val);
                double d = 0.0;
                for (std::size_t k = 0; k < node.preds.size(); ++k)
                    d += node.weights[k] * node.weights[k] * der[static_cast<std::size_t>(node.preds[k])];
                der[i] = d;
                break;
            }
        }
    }
    auto out = static_cast<std::size_t>(g.output());
    return {val[out], der[out]};
}

namespace {

using Bits = std::vector<std::uint64_t>;

bool test_bit(const Bits& b, std::size_t i) { return (b[i >> 6] >> (i & 63)) & 1u; }
void set_bit(Bits& b, std::size_t i) { b[i >> 6] |= std::uint64_t{1} << (i & 63); }

std::size_t popcount_and(const Bits& a, const Bits& b) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<std::size_t>(std::popcount(a[i] & b[i]));
    return s;
}

// Dominator tree queried by Euler-tour intervals.
struct DomTree {
    std::vector<NodeId> idom;
    std::vector<int> depth, tin, tout;

    bool dominates(NodeId a, NodeId b) const {
        auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
        return tin[ia] <= tin[ib] && tout[ib] <= tout[ia];
    }
};

// Builds the dominator tree rooted at root, visiting nodes in order and
// taking immediate dominators as the tree LCA of each node's parents.
DomTree build_domtree(std::size_t n, NodeId root, const std::vector<NodeId>& order,
                      const std::function<const std::vector<NodeId>&(NodeId)>& parents) {
    DomTree t;
    t.idom.assign(n, -1);
    t.depth.assign(n, 0);
    t.idom[static_cast<std::size_t>(root)] = root;
    for (NodeId v : order) {
        if (v == root) continue;
        NodeId d = -1;
        for (NodeId p : parents(v)) {
            if (t.idom[static_cast<std::size_t>(p)] < 0) continue;
            if (d < 0) {
                d = p;
                continue;
            }
            NodeId a = d, b = p;
            while (a != b) {
                if (t.depth[static_cast<std::size_t>(a)] >= t.depth[static_cast<std::size_t>(b)])
                    a = t.idom[static_cast<std::size_t>(a)];
                else
                    b = t.idom[static_cast<std::size_t>(b)];
            }
            d = a;
        }
        t.idom[static_cast<std::size_t>(v)] = d;
        t.depth[static_cast<std::size_t>(v)] = t.depth[static_cast<std::size_t>(d)] + 1;
    }
    std::vector<std::vector<NodeId>> kids(n);
    for (NodeId v : order)
        if (v != root) kids[static_cast<std::size_t>(t.idom[static_cast<std::size_t>(v)])].push_back(v);
    t.tin.assign(n, 0);
    t.tout.assign(n, 0);
    int clock = 0;
    std::vector<std::pair<NodeId, std::size_t>> stack{{root, 0}};
    t.tin[static_cast<std::size_t>(root)] = clock++;
    while (!stack.empty()) {
        auto& [u, k] = stack.back();
        auto& ch = kids[static_cast<std::size_t>(u)];
        if (k < ch.size()) {
            NodeId c = ch[k++];
            t.tin[static_cast<std::size_t>(c)] = clock++;
            stack.push_back({c, 0});
        } else {
            t.tout[static_cast<std::size_t>(u)] = clock++;
            stack.pop_back();
        }
    }
    return t;
}

struct Analysis {
    std::vector<NodeId> order;
    std::vector<int> position;
    std::vector<std::vector<NodeId>> succ;
    std::vector<Bits> desc, anc;  // reflexive
    DomTree dom, pdom;
    NodeId input = -1;

    explicit Analysis(const NetworkGraph& g) {
        std::size_t n = g.size();
        succ = successors(g);
        order = kahn(g, succ);
        if (order.size() != n) throw ValidationError("graph has a cycle", -1);
        position.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) position[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
        std::size_t words = (n + 63) / 64;
        desc.assign(n, Bits(words, 0));
        anc.assign(n, Bits(words, 0));
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            auto u = static_cast<std::size_t>(*it);
            set_bit(desc[u], u);
            for (NodeId s : succ[u])
                for (std::size_t w = 0; w < words; ++w) desc[u][w] |= desc[static_cast<std::size_t>(s)][w];
        }
        for (NodeId v : order) {
            auto u = static_cast<std::size_t>(v);
            set_bit(anc[u], u);
            for (NodeId p : g.node(v).preds)
                for (std::size_t w = 0; w < words; ++w) anc[u][w] |= anc[static_cast<std::size_t>(p)][w];
        }
        for (NodeId v : order)
            if (g.node(v).kind == NodeKind::Input) input = v;
        dom = build_domtree(n, input, order, [&](NodeId v) -> const std::vector<NodeId>& { return g.node(v).preds; });
        std::vector<NodeId> rev(order.rbegin(), order.rend());
        pdom = build_domtree(n, g.output(), rev, [&](NodeId v) -> const std::vector<NodeId>& {
            return succ[static_cast<std::size_t>(v)];
        });
    }

    bool reaches(NodeId a, NodeId b) const { return test_bit(desc[static_cast<std::size_t>(a)], static_cast<std::size_t>(b)); }

    bool valid(NodeId e, NodeId t) const {
        if (e == t || !dom.dominates(e, t)) return false;
        for (NodeId s : succ[static_cast<std::size_t>(e)])
            if (reaches(s, t) && !pdom.dominates(t, s)) return false;
        return true;
    }

    // Number of members, exit included and entry excluded.
    std::size_t member_count(NodeId e, NodeId t) const {
        return popcount_and(desc[static_cast<std::size_t>(e)], anc[static_cast<std::size_t>(t)]) - 1;
    }

    SubnetworkRef make(NodeId e, NodeId t) const {
        SubnetworkRef s;
        s.entry = e;
        s.exit = t;
        const auto& d = desc[static_cast<std::size_t>(e)];
        const auto& a = anc[static_cast<std::size_t>(t)];
        for (NodeId v : order)
            if (v != e && test_bit(d, static_cast<std::size_t>(v)) && test_bit(a, static_cast<std::size_t>(v)))
                s.members.push_back(v);
        return s;
    }

    // Valid pairs, ordered by exit position then entry position.
    std::vector<std::pair<NodeId, NodeId>> valid_pairs() const {
        std::vector<std::pair<NodeId, NodeId>> out;
        for (NodeId t : order) {
            if (t == input) continue;
            std::vector<NodeId> chain;
            for (NodeId e = dom.idom[static_cast<std::size_t>(t)];; e = dom.idom[static_cast<std::size_t>(e)]) {
                chain.push_back(e);
                if (e == input) break;
            }
            std::sort(chain.begin(), chain.end(), [&](NodeId a, NodeId b) {
                return position[static_cast<std::size_t>(a)] < position[static_cast<std::size_t>(b)];
            });
            for (NodeId e : chain)
                if (valid(e, t)) out.emplace_back(e, t);
        }
        return out;
    }
};

std::uint64_t pair_key(NodeId e, NodeId t) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e)) << 32) | static_cast<std::uint32_t>(t);
}

// Hash-consed shape ids: two subnetworks share an id iff they are equal as
// ordered DAGs (node kinds, sum weights and predecessor order).
class ShapeTable {
public:
    int shape(const NetworkGraph& g, const SubnetworkRef& s) {
        std::map<NodeId, int> local;
        local[s.entry] = 0;
        int last = 0;
        for (NodeId v : s.members) {
            const Node& node = g.node(v);
            Key k{static_cast<int>(node.kind), node.weights, {}};
            for (NodeId p : node.preds) k.children.push_back(local.at(p));
            auto [it, inserted] = ids_.try_emplace(std::move(k), static_cast<int>(ids_.size()) + 1);
            local[v] = it->second;
            last = it->second;
        }
        return last;
    }

private:
    struct Key {
        int kind;
        std::vector<double> weights;
        std::vector<int> children;
        bool operator<(const Key& o) const {
            return std::tie(kind, weights, children) < std::tie(o.kind, o.weights, o.children);
        }
    };
    std::map<Key, int> ids_;
};

}  // namespace

std::vector<SubnetworkRef> enumerate_subnetworks(const NetworkGraph& g) {
    Analysis a(g);
    std::vector<SubnetworkRef> out;
    for (auto [e, t] : a.valid_pairs()) out.push_back(a.make(e, t));
    return out;
}

std::vector<SubnetworkRef> enumerate_maximal_subnetworks(const NetworkGraph& g) {
    Analysis a(g);
    auto pairs = a.valid_pairs();
    std::unordered_set<std::uint64_t> valid;
    std::vector<std::vector<NodeId>> exits_from(g.size()), entries_to(g.size());
    for (auto [e, t] : pairs) {
        valid.insert(pair_key(e, t));
        exits_from[static_cast<std::size_t>(e)].push_back(t);
        entries_to[static_cast<std::size_t>(t)].push_back(e);
    }
    auto composes = [&](NodeId e, NodeId t) {
        std::size_t size = a.member_count(e, t);
        for (NodeId t2 : exits_from[static_cast<std::size_t>(t)])
            if (valid.count(pair_key(e, t2)) && a.member_count(e, t2) == size + a.member_count(t, t2)) return true;
        for (NodeId e2 : entries_to[static_cast<std::size_t>(e)])
            if (valid.count(pair_key(e2, t)) && a.member_count(e2, t) == size + a.member_count(e2, e)) return true;
        return false;
    };

    std::vector<SubnetworkRef> out;
    ShapeTable shapes;
    std::unordered_set<int> seen;
    auto consider = [&](NodeId e, NodeId t) {
        SubnetworkRef s = a.make(e, t);
        if (seen.insert(shapes.shape(g, s)).second) out.push_back(std::move(s));
    };
    consider(a.input, g.output());
    for (auto [e, t] : pairs) {
        if (e == a.input && t == g.output()) continue;
        if (!composes(e, t)) consider(e, t);
    }
    return out;
}

double eval_M(const NetworkGraph& g, const std::vector<SubnetworkRef>& candidates, const ScalarMap& r, double x) {
    double best = -INFINITY;
    for (const auto& s : candidates) best = std::max(best, eval_U(g, s, r, x));
    return best;
}

std::vector<SubnetworkRef> maximization_candidates(const NetworkGraph& g) {
    if (g.size() <= kExhaustiveNodeLimit) return enumerate_subnetworks(g);
    return enumerate_maximal_subnetworks(g);
}

double eval_M(const NetworkGraph& g, const ScalarMap& r, double x) {
    return eval_M(g, maximization_candidates(g), r, x);
}

}  // namespace qcmap
