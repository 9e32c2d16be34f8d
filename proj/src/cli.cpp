#include "qcmap/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qcmap/errors.hpp"
#include "qcmap/finite_width.hpp"
#include "qcmap/graph_io.hpp"
#include "qcmap/kernel_maps.hpp"
#include "qcmap/ode_limit.hpp"
#include "qcmap/transforms.hpp"

namespace qcmap::cli {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

QuadratureRule default_rule() {
    const char* env = std::getenv("QCMAP_QUAD_ORDER");
    if (!env || !*env) return QuadratureRule();
    char* end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 4096) throw UsageError(std::string("QCMAP_QUAD_ORDER must be a positive integer, got '") + env + "'");
    return QuadratureRule(static_cast<int>(n));
}

TransformedActivation parse_transform(const Activation& base, const std::string& spec) {
    std::vector<double> v;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw UsageError("--transform expects four numbers alpha,beta,gamma,delta");
        }
    }
    if (v.size() != 4) throw UsageError("--transform expects four numbers alpha,beta,gamma,delta");
    return TransformedActivation(base, v[0], v[1], v[2], v[3]);
}

struct Options {
    std::string output;
    // solve
    std::string method, graph, activation;
    std::optional<double> eta, tau, zeta;
    double sigma_b = 0.0;
    // cmap
    std::string transform;
    double from = -1.0, to = 1.0;
    int points = 201;
    // simulate
    int width = 100, depth = 50, trials = 50, pairs = 100, threads = 1;
    std::uint64_t seed = 0;
    std::string init = "gaussian";
    double c0 = 0.0;
    // ode
    std::optional<double> T;
    int samples = 101;
};

std::string solve(const Options& o) {
    QuadratureRule rule = default_rule();
    auto need = [](bool ok, const char* what) {
        if (!ok) throw UsageError(what);
    };
    nlohmann::json j;
    if (o.method == "tat-lrelu") {
        need(!o.graph.empty() && o.eta.has_value(), "tat-lrelu needs --graph and --eta");
        auto g = parse_graph_spec(o.graph);
        j = to_json(solve_tat_lrelu(g, *o.eta));
        j["graph"] = o.graph;
    } else if (o.method == "tat-smooth") {
        need(!o.graph.empty() && o.tau.has_value() && !o.activation.empty(), "tat-smooth needs --graph, --activation and --tau");
        auto g = parse_graph_spec(o.graph);
        j = to_json(solve_tat_smooth(g, Activation::parse(o.activation), *o.tau, rule));
        j["graph"] = o.graph;
    } else if (o.method == "dks") {
        need(!o.graph.empty() && o.zeta.has_value() && !o.activation.empty(), "dks needs --graph, --activation and --zeta");
        auto g = parse_graph_spec(o.graph);
        j = to_json(solve_dks(g, Activation::parse(o.activation), *o.zeta, rule));
        j["graph"] = o.graph;
    } else {
        need(!o.activation.empty(), "eoc needs --activation");
        Activation a = Activation::parse(o.activation);
        if (a.piecewise_linear() && a.kind() != ActivationKind::Identity) {
            if (o.sigma_b != 0.0) throw InvalidArgument("the leaky ReLU edge of chaos needs sigma_b = 0");
            j = to_json(solve_eoc_lrelu(a));
        } else {
            j = to_json(solve_eoc_smooth(a, o.sigma_b, rule));
        }
    }
    return j.dump(2) + "\n";
}

std::string cmap(const Options& o) {
    if (o.points < 2) throw UsageError("--points must be at least 2");
    if (!(o.from >= -1.0 && o.to <= 1.0 && o.from < o.to)) throw UsageError("need -1 <= --from < --to <= 1");
    auto g = parse_graph_spec(o.graph);
    Activation base = Activation::parse(o.activation);
    LocalMapParams p{o.transform.empty() ? TransformedActivation(base) : parse_transform(base, o.transform), 1.0, 0.0};
    LocalCMap local = make_local_c_map(p, default_rule());
    std::string s = "c,C_f\n";
    for (int i = 0; i < o.points; ++i) {
        double c = i + 1 == o.points ? o.to : o.from + (o.to - o.from) * i / (o.points - 1);
        s += fmt(c) + "," + fmt(global_c(g, local.value, c)) + "\n";
    }
    return s;
}

std::string simulate(const Options& o) {
    InitScheme scheme;
    if (o.init == "gaussian")
        scheme = InitScheme::GaussianFanIn;
    else if (o.init == "suo")
        scheme = InitScheme::SUO;
    else
        throw UsageError("--init must be gaussian or suo");
    SimConfig cfg;
    cfg.width = o.width;
    cfg.depth = o.depth;
    cfg.trials = o.trials;
    cfg.pairs_per_trial = o.pairs;
    cfg.seed = o.seed;
    cfg.initial_c = o.c0;
    cfg.threads = o.threads;
    auto g = build_vanilla(o.depth);
    TransformedActivation act;
    if (o.activation.empty()) {
        act = Activation::trelu(solve_tat_lrelu(g, o.eta.value_or(0.9)).alpha);
    } else {
        act = Activation::parse(o.activation);
    }
    auto trace = run_simulation(cfg, act, scheme);
    LocalCMap local = make_local_c_map({act, 1.0, 0.0}, default_rule());
    auto report = compare_to_theory(trace, g, local.value);
    std::ostringstream os;
    write_trace_csv(os, trace, report.theory);
    return os.str();
}

std::string ode(const Options& o) {
    if (o.T.has_value() == o.eta.has_value()) throw UsageError("ode needs exactly one of --T and --eta");
    if (o.samples < 2) throw UsageError("--samples must be at least 2");
    double T = o.T ? *o.T : find_T(*o.eta);
    auto sol = integrate_psi(o.c0, T);
    const auto& tr = sol.trajectory;
    std::string s = "t,x\n";
    std::size_t last = tr.size() - 1;
    std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(o.samples), tr.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = n == 1 ? 0 : (i * last) / (n - 1);
        s += fmt(tr[k].first) + "," + fmt(tr[k].second) + "\n";
    }
    return s;
}

std::string validate(const Options& o) {
    auto g = parse_graph_spec(o.graph);
    validate_graph(g);
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& s : enumerate_maximal_subnetworks(g))
        cands.push_back({{"entry", s.entry}, {"exit", s.exit}, {"size", s.members.size()}});
    nlohmann::json j{{"valid", true},
                     {"nodes", g.size()},
                     {"nonlinear_nodes", g.count(NodeKind::Nonlinear)},
                     {"maximal_subnetworks", cands}};
    return j.dump(2) + "\n";
}

void envelope(std::ostream& err, const std::string& code, const std::string& message, const nlohmann::json& context) {
    err << nlohmann::json{{"error", code}, {"message", message}, {"context", context}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Q/C map calculator and activation transformation solver", "qcmap"};
    app.require_subcommand(1);

    auto* sv = app.add_subcommand("solve", "Solve for activation transformation parameters (JSON)");
    sv->add_option("--method", o.method, "tat-lrelu | tat-smooth | dks | eoc")
        ->required()
        ->check(CLI::IsMember({"tat-lrelu", "tat-smooth", "dks", "eoc"}));
    sv->add_option("--graph", o.graph, "vanilla:<L> | resnet:<blocks>:<w>[:transitions] | file:<path.json>");
    sv->add_option("--activation", o.activation, "relu | lrelu:<a> | trelu:<a> | tanh | softplus | identity");
    sv->add_option("--eta", o.eta, "target C_f(0) for tat-lrelu");
    sv->add_option("--tau", o.tau, "target C_f''(1) for tat-smooth");
    sv->add_option("--zeta", o.zeta, "target C_f'(1) for dks");
    sv->add_option("--sigma-b", o.sigma_b, "bias scale for eoc");

    auto* cm = app.add_subcommand("cmap", "Emit a global C map curve (CSV c,C_f)");
    cm->add_option("--graph", o.graph)->required();
    cm->add_option("--activation", o.activation)->required();
    cm->add_option("--transform", o.transform, "alpha,beta,gamma,delta applied to the activation");
    cm->add_option("--from", o.from, "first c value")->capture_default_str();
    cm->add_option("--to", o.to, "last c value")->capture_default_str();
    cm->add_option("--points", o.points, "number of grid points")->capture_default_str();

    auto* sm = app.add_subcommand("simulate", "Monte-Carlo c values of finite-width vanilla networks (CSV)");
    sm->add_option("--width", o.width)->capture_default_str()->check(CLI::PositiveNumber);
    sm->add_option("--depth", o.depth)->capture_default_str()->check(CLI::PositiveNumber);
    sm->add_option("--trials", o.trials, "independent networks")->capture_default_str()->check(CLI::PositiveNumber);
    sm->add_option("--pairs", o.pairs, "input pairs per network")->capture_default_str()->check(CLI::PositiveNumber);
    sm->add_option("--seed", o.seed)->capture_default_str();
    sm->add_option("--init", o.init, "gaussian | suo")->capture_default_str();
    sm->add_option("--c0", o.c0, "initial c value")->capture_default_str();
    sm->add_option("--activation", o.activation, "defaults to TReLU solved for --eta over the network");
    sm->add_option("--eta", o.eta, "TReLU target C_f(0) (default 0.9)");
    sm->add_option("--threads", o.threads, "worker threads, 0 = all cores")->capture_default_str()->check(CLI::NonNegativeNumber);

    auto* od = app.add_subcommand("ode", "Integrate the infinite-depth C map ODE (CSV t,x)");
    od->add_option("--c0", o.c0, "initial value")->capture_default_str();
    od->add_option("--T", o.T, "integration horizon");
    od->add_option("--eta", o.eta, "pick T with psi(0, T) = eta");
    od->add_option("--samples", o.samples, "trajectory rows")->capture_default_str();

    auto* vg = app.add_subcommand("validate-graph", "Check a graph and list its maximal subnetworks (JSON)");
    vg->add_option("--graph", o.graph)->required();

    for (auto* s : {sv, cm, sm, od, vg}) s->add_option("--output,-o", o.output, "write to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        envelope(err, "usage", e.what(), nlohmann::json::object());
        return 2;
    }

    try {
        std::string text;
        if (sv->parsed())
            text = solve(o);
        else if (cm->parsed())
            text = cmap(o);
        else if (sm->parsed())
            text = simulate(o);
        else if (od->parsed())
            text = ode(o);
        else
            text = validate(o);
        if (o.output.empty()) {
            out << text;
        } else {
            std::ofstream f(o.output, std::ios::binary);
            if (!f) throw Error("io-error", "cannot write '" + o.output + "'");
            f << text;
        }
        return 0;
    } catch (const UsageError& e) {
        envelope(err, "usage", e.what(), nlohmann::json::object());
        return 2;
    } catch (const Error& e) {
        envelope(err, e.code(), e.what(), e.context());
        return 1;
    } catch (const std::exception& e) {
        envelope(err, "internal", e.what(), nlohmann::json::object());
        return 1;
    }
}

}  // namespace qcmap::cli
