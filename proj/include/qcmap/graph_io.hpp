#pragma once

#include <string>

#include <json.hpp>

#include "qcmap/netgraph.hpp"

namespace qcmap {

// {nodes: [{id, kind, weights?}], edges: [[from, to]], output}. kind is one of
// input, affine, nonlinear, sum; a node's predecessors follow edge order.
NetworkGraph graph_from_json(const nlohmann::json& j);
nlohmann::json graph_to_json(const NetworkGraph& g);
NetworkGraph load_graph_file(const std::string& path);

// vanilla:<L> | resnet:<blocks>:<w>[:transitions] | file:<path.json>.
// resnet blocks carry three nonlinear layers per residual branch; the
// transitions form also appends a final nonlinear layer.
NetworkGraph parse_graph_spec(const std::string& spec);

}  // namespace qcmap
