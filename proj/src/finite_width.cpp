#include "qcmap/finite_width.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include <Eigen/Dense>

#include "qcmap/errors.hpp"

namespace qcmap {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

Eigen::MatrixXd gaussian(int rows, int cols, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::MatrixXd G(rows, cols);
    for (Eigen::Index j = 0; j < G.cols(); ++j)
        for (Eigen::Index i = 0; i < G.rows(); ++i) G(i, j) = n01(rng);
    return G;
}

// Orthonormal columns distributed uniformly (Haar) on the Stiefel manifold:
// QR of a Gaussian matrix with the signs of R's diagonal moved into Q.
Eigen::MatrixXd haar_frame(int rows, int cols, Rng& rng) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rows, cols, rng));
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    for (int j = 0; j < cols; ++j)
        if (qr.matrixQR()(j, j) < 0) Q.col(j) *= -1.0;
    return Q;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double den = std::sqrt(a.squaredNorm() * b.squaredNorm());
    if (den == 0.0) return 1.0;
    return std::clamp(a.dot(b) / den, -1.0, 1.0);
}

void apply(const TransformedActivation& act, Eigen::MatrixXd& M) {
    M = M.unaryExpr([&](double v) { return act.eval(v); });
}

// Running mean / M2 (Welford), merged with Chan's formula.
struct Moments {
    double n = 0, mean = 0, m2 = 0;
    void add(double x) {
        n += 1;
        double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    void merge(const Moments& o) {
        if (o.n == 0) return;
        double total = n + o.n;
        double d = o.mean - mean;
        mean += d * o.n / total;
        m2 += o.m2 + d * d * n * o.n / total;
        n = total;
    }
};

struct TrialStats {
    std::vector<Moments> c, q;
};

TrialStats run_trial(const SimConfig& cfg, const TransformedActivation& act, InitScheme scheme, int trial) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(trial));
    const int P = cfg.pairs_per_trial, n = 2 * P, d = cfg.width;
    Eigen::MatrixXd X(d, n);
    for (int p = 0; p < P; ++p) {
        auto [a, b] = make_input_pair(d, cfg.initial_c, rng);
        X.col(p) = cfg.input_scale * a;
        X.col(P + p) = cfg.input_scale * b;
    }
    TrialStats st;
    st.c.resize(static_cast<std::size_t>(cfg.depth) + 1);
    st.q.resize(static_cast<std::size_t>(cfg.depth) + 1);
    auto record = [&](int layer) {
        auto l = static_cast<std::size_t>(layer);
        double dim = static_cast<double>(X.rows());
        for (int p = 0; p < P; ++p) {
            st.c[l].add(cosine(X.col(p), X.col(P + p)));
            st.q[l].add(X.col(p).squaredNorm() / dim);
            st.q[l].add(X.col(P + p).squaredNorm() / dim);
        }
    };
    record(0);
    bool implicit = !cfg.explicit_weights && n <= d;
    for (int layer = 1; layer <= cfg.depth; ++layer) {
        Eigen::MatrixXd Y;
        if (implicit) {
            // W X only depends on W through W Q for X = Q R, and W Q has a
            // known law: iid N(0, 1/k) entries, or a Haar frame for square SUO.
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
            Eigen::MatrixXd R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
            if (scheme == InitScheme::GaussianFanIn)
                Y = gaussian(d, n, rng) * R / std::sqrt(static_cast<double>(d));
            else
                Y = haar_frame(d, n, rng) * R;
        } else {
            Y = sample_weight_matrix(scheme, d, static_cast<int>(X.rows()), rng) * X;
        }
        apply(act, Y);
        X = std::move(Y);
        record(layer);
    }
    return st;
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

Eigen::MatrixXd sample_weight_matrix(InitScheme scheme, int m, int k, Rng& rng) {
    if (m < 1 || k < 1) throw InvalidArgument("weight matrix dimensions must be positive", {{"m", m}, {"k", k}});
    if (scheme == InitScheme::GaussianFanIn) return gaussian(m, k, rng) / std::sqrt(static_cast<double>(k));
    double scale = std::max(std::sqrt(static_cast<double>(m) / k), 1.0);
    if (m <= k) return scale * haar_frame(k, m, rng).transpose();
    return scale * haar_frame(m, k, rng);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> make_input_pair(int dim, double c0, Rng& rng) {
    if (!(std::abs(c0) <= 1.0)) throw DomainError("initial c value outside [-1, 1]", {{"c0", c0}});
    if (dim < 1) throw InvalidArgument("input dimension must be positive", {{"dim", dim}});
    Eigen::VectorXd e1 = gaussian(dim, 1, rng);
    e1.normalize();
    Eigen::VectorXd x1 = std::sqrt(static_cast<double>(dim)) * e1;
    if (dim == 1) {
        if (std::abs(c0) != 1.0) throw InvalidArgument("a one-dimensional pair can only have c0 = +-1");
        return {x1, c0 * x1};
    }
    Eigen::VectorXd u;
    do {
        u = gaussian(dim, 1, rng);
        u -= u.dot(e1) * e1;
        u -= u.dot(e1) * e1;
    } while (u.norm() < 1e-8);
    u.normalize();
    Eigen::VectorXd x2 = std::sqrt(static_cast<double>(dim)) * (c0 * e1 + std::sqrt(1.0 - c0 * c0) * u);
    if (c0 == 1.0) x2 = x1;
    return {x1, x2};
}

std::vector<LayerStats> propagate_pair(const TransformedActivation& act, InitScheme scheme, int width, int depth,
                                       const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, Rng& rng) {
    if (x1.size() != x2.size()) throw ShapeMismatch("inputs differ in dimension", {{"x1", x1.size()}, {"x2", x2.size()}});
    if (width < 1 || depth < 0) throw InvalidArgument("width must be positive and depth non-negative");
    Eigen::VectorXd a = x1, b = x2;
    std::vector<LayerStats> out;
    auto record = [&] {
        double dim = static_cast<double>(a.size());
        out.push_back({a.squaredNorm() / dim, b.squaredNorm() / dim, cosine(a, b)});
    };
    record();
    for (int l = 0; l < depth; ++l) {
        Eigen::MatrixXd W = sample_weight_matrix(scheme, width, static_cast<int>(a.size()), rng);
        a = (W * a).unaryExpr([&](double v) { return act.eval(v); });
        b = (W * b).unaryExpr([&](double v) { return act.eval(v); });
        record();
    }
    return out;
}

EmpiricalTrace run_simulation(const SimConfig& cfg, const TransformedActivation& act, InitScheme scheme) {
    if (cfg.width < 1 || cfg.depth < 1 || cfg.trials < 1 || cfg.pairs_per_trial < 1)
        throw InvalidArgument("simulation sizes must be positive",
                              {{"width", cfg.width}, {"depth", cfg.depth}, {"trials", cfg.trials}, {"pairs", cfg.pairs_per_trial}});
    if (!(std::abs(cfg.initial_c) <= 1.0)) throw DomainError("initial c value outside [-1, 1]", {{"c0", cfg.initial_c}});
    if (!(cfg.input_scale > 0.0)) throw InvalidArgument("input scale must be positive");

    std::vector<TrialStats> results(static_cast<std::size_t>(cfg.trials));
    int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, cfg.trials);
    if (threads <= 1) {
        for (int t = 0; t < cfg.trials; ++t) results[static_cast<std::size_t>(t)] = run_trial(cfg, act, scheme, t);
    } else {
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex mu;
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (int t = next++; t < cfg.trials; t = next++) {
                    try {
                        results[static_cast<std::size_t>(t)] = run_trial(cfg, act, scheme, t);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(mu);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    auto layers = static_cast<std::size_t>(cfg.depth) + 1;
    std::vector<Moments> c(layers), q(layers);
    for (const auto& r : results)
        for (std::size_t l = 0; l < layers; ++l) {
            c[l].merge(r.c[l]);
            q[l].merge(r.q[l]);
        }
    EmpiricalTrace trace;
    trace.initial_c = cfg.initial_c;
    trace.samples_per_layer = static_cast<std::size_t>(c[0].n);
    for (std::size_t l = 0; l < layers; ++l) {
        trace.mean_c.push_back(c[l].mean);
        trace.std_c.push_back(c[l].n > 1 ? std::sqrt(std::max(0.0, c[l].m2 / (c[l].n - 1))) : 0.0);
        trace.mean_q.push_back(q[l].mean);
    }
    return trace;
}

DeviationReport compare_to_theory(const EmpiricalTrace& trace, const NetworkGraph& g, const ScalarMap& local) {
    std::size_t depth = g.count(NodeKind::Nonlinear);
    if (g.count(NodeKind::NormalizedSum) != 0) throw ShapeMismatch("theory comparison needs a vanilla graph");
    if (trace.mean_c.size() != depth + 1 || trace.std_c.size() != depth + 1)
        throw ShapeMismatch("trace depth does not match graph depth",
                            {{"trace_layers", trace.mean_c.size()}, {"graph_depth", depth}});
    DeviationReport rep;
    double c = trace.initial_c;
    std::size_t within = 0;
    for (std::size_t l = 0; l <= depth; ++l) {
        if (l > 0) c = local(c);
        rep.theory.push_back(c);
        double dev = std::abs(trace.mean_c[l] - c);
        rep.max_abs_deviation = std::max(rep.max_abs_deviation, dev);
        rep.mean_abs_deviation += dev / static_cast<double>(depth + 1);
        if (dev <= trace.std_c[l]) ++within;
    }
    rep.fraction_within_std = static_cast<double>(within) / static_cast<double>(depth + 1);
    return rep;
}

void write_trace_csv(std::ostream& out, const EmpiricalTrace& trace, const std::vector<double>& theory) {
    out << "layer_index,mean_c,std_c,mean_q,theory_c\n";
    char buf[160];
    for (std::size_t l = 0; l < trace.mean_c.size(); ++l) {
        double th = l < theory.size() ? theory[l] : NAN;
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", l, trace.mean_c[l], trace.std_c[l], trace.mean_q[l], th);
        out << buf;
    }
}

}  // namespace qcmap
