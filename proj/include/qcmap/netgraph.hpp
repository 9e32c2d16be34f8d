#pragma once

#include <functional>
#include <vector>

namespace qcmap {

using NodeId = int;
using ScalarMap = std::function<double(double)>;

enum class NodeKind { Input, Affine, Nonlinear, NormalizedSum };

struct Node {
    NodeKind kind = NodeKind::Input;
    std::vector<NodeId> preds;
    std::vector<double> weights;  // NormalizedSum only, one per predecessor
};

// Plain DAG description. Construction does not check invariants; call
// validate_graph before handing a graph to the evaluation functions.
class NetworkGraph {
public:
    NodeId add_input();
    NodeId add_affine(NodeId pred);
    NodeId add_nonlinear(NodeId pred);
    NodeId add_sum(std::vector<NodeId> preds, std::vector<double> weights);
    NodeId add_node(Node node);

    void set_output(NodeId id) { output_ = id; }
    NodeId output() const noexcept { return output_; }

    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    std::size_t count(NodeKind kind) const;

private:
    std::vector<Node> nodes_;
    NodeId output_ = -1;
};

const char* kind_name(NodeKind kind);

NetworkGraph build_vanilla(int depth);

struct ResNetOptions {
    int num_blocks = 1;
    double shortcut_weight = 0.0;
    int branch_nonlinear_count = 1;
    bool with_transitions = false;
    bool final_nonlinear = false;
    // Block indices carrying an Affine+Nonlinear shortcut. Empty means four
    // evenly spaced blocks when with_transitions is set.
    std::vector<int> transition_blocks;
};

NetworkGraph build_rescaled_resnet(const ResNetOptions& options);
NetworkGraph build_rescaled_resnet(int num_blocks, double shortcut_weight, int branch_nonlinear_count,
                                   bool with_transitions, bool final_nonlinear);

// Feeds inner's output into outer's input.
NetworkGraph compose_serial(const NetworkGraph& outer, const NetworkGraph& inner);

// Throws ValidationError naming the first offending node.
void validate_graph(const NetworkGraph& g);

// Node ids in an order where every node follows its predecessors.
std::vector<NodeId> topological_order(const NetworkGraph& g);

struct SubnetworkRef {
    NodeId entry = -1;
    NodeId exit = -1;
    std::vector<NodeId> members;  // topologically ordered, entry excluded
};

// Every pair (entry, exit) delimiting a single-entry single-exit sub-DAG.
std::vector<SubnetworkRef> enumerate_subnetworks(const NetworkGraph& g);

// Subnetworks that do not compose, in series, with a neighbour into a larger
// subnetwork, one representative per shape. The whole network comes first.
std::vector<SubnetworkRef> enumerate_maximal_subnetworks(const NetworkGraph& g);

// Candidates eval_M maximizes over. Small graphs use every subnetwork, so the
// maximum is attained by the same floating-point evaluation as an exhaustive
// search; ties broken by rounding would otherwise differ by an ulp.
inline constexpr std::size_t kExhaustiveNodeLimit = 12;
std::vector<SubnetworkRef> maximization_candidates(const NetworkGraph& g);

double eval_U(const NetworkGraph& g, const ScalarMap& r, double x);
double eval_U(const NetworkGraph& g, const SubnetworkRef& sub, const ScalarMap& r, double x);

struct ValueAndSlope {
    double value;
    double slope;
};

// eval_U together with its derivative in x by forward-mode chain rule.
ValueAndSlope eval_U_with_slope(const NetworkGraph& g, const ScalarMap& r, const ScalarMap& r_prime, double x);

// Maximum of eval_U over maximization_candidates. The reduction is exact
// when r is non-decreasing and r(x) >= x on the visited values, which holds for
// C maps, r1(x) = m x with m >= 1 and x >= 0, and r2(x) = C''(1) + x.
double eval_M(const NetworkGraph& g, const ScalarMap& r, double x);
double eval_M(const NetworkGraph& g, const std::vector<SubnetworkRef>& candidates, const ScalarMap& r, double x);

}  // namespace qcmap
