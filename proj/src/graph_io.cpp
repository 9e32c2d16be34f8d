#include "qcmap/graph_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "qcmap/errors.hpp"

namespace qcmap {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string part;
    std::istringstream in(s);
    while (std::getline(in, part, sep)) out.push_back(part);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

long parse_int(const std::string& text, const std::string& spec) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) throw InvalidArgument("bad integer in graph spec '" + spec + "'");
    return v;
}

double parse_double(const std::string& text, const std::string& spec) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) throw InvalidArgument("bad number in graph spec '" + spec + "'");
    return v;
}

NodeKind parse_kind(const std::string& s) {
    if (s == "input") return NodeKind::Input;
    if (s == "affine") return NodeKind::Affine;
    if (s == "nonlinear") return NodeKind::Nonlinear;
    if (s == "sum") return NodeKind::NormalizedSum;
    throw InvalidArgument("unknown node kind '" + s + "'");
}

}  // namespace

NetworkGraph graph_from_json(const nlohmann::json& j) {
    try {
        std::map<long, NodeId> index;
        NetworkGraph g;
        for (const auto& n : j.at("nodes")) {
            long id = n.at("id").get<long>();
            Node node;
            node.kind = parse_kind(n.at("kind").get<std::string>());
            if (n.contains("weights")) node.weights = n.at("weights").get<std::vector<double>>();
            if (!index.emplace(id, static_cast<NodeId>(g.size())).second)
                throw InvalidArgument("duplicate node id " + std::to_string(id));
            g.add_node(std::move(node));
        }
        auto lookup = [&](long id) {
            auto it = index.find(id);
            if (it == index.end()) throw InvalidArgument("edge references unknown node " + std::to_string(id));
            return it->second;
        };
        std::vector<Node> nodes = g.nodes();
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw InvalidArgument("edges must be [from, to] pairs");
            NodeId from = lookup(e[0].get<long>());
            NodeId to = lookup(e[1].get<long>());
            nodes[static_cast<std::size_t>(to)].preds.push_back(from);
        }
        NetworkGraph out;
        for (auto& n : nodes) out.add_node(std::move(n));
        out.set_output(lookup(j.at("output").get<long>()));
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed graph description: ") + e.what());
    }
}

nlohmann::json graph_to_json(const NetworkGraph& g) {
    nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Node& n = g.nodes()[i];
        nlohmann::json jn{{"id", i}, {"kind", kind_name(n.kind)}};
        if (n.kind == NodeKind::NormalizedSum) jn["weights"] = n.weights;
        nodes.push_back(jn);
        for (NodeId p : n.preds) edges.push_back({p, i});
    }
    return {{"nodes", nodes}, {"edges", edges}, {"output", g.output()}};
}

NetworkGraph load_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open graph file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("graph file '" + path + "' is not valid JSON: " + e.what());
    }
    auto g = graph_from_json(j);
    validate_graph(g);
    return g;
}

NetworkGraph parse_graph_spec(const std::string& spec) {
    if (spec.rfind("file:", 0) == 0) return load_graph_file(spec.substr(5));
    auto parts = split(spec, ':');
    if (parts.size() == 2 && parts[0] == "vanilla") {
        long depth = parse_int(parts[1], spec);
        if (depth < 1 || depth > 1000000) throw InvalidArgument("vanilla depth out of range in '" + spec + "'");
        return build_vanilla(static_cast<int>(depth));
    }
    if ((parts.size() == 3 || parts.size() == 4) && parts[0] == "resnet") {
        long blocks = parse_int(parts[1], spec);
        double w = parse_double(parts[2], spec);
        bool transitions = false;
        if (parts.size() == 4) {
            if (parts[3] != "transitions") throw InvalidArgument("unknown resnet option in '" + spec + "'");
            transitions = true;
        }
        if (blocks < 1 || blocks > 1000000) throw InvalidArgument("resnet block count out of range in '" + spec + "'");
        return build_rescaled_resnet(static_cast<int>(blocks), w, 3, transitions, transitions);
    }
    throw InvalidArgument("unrecognized graph spec '" + spec + "'");
}

}  // namespace qcmap
