#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "qcmap/activations.hpp"
#include "qcmap/netgraph.hpp"

namespace qcmap {

enum class InitScheme { GaussianFanIn, SUO };

using Rng = std::mt19937_64;

// Independent generator for (seed, stream); streams never depend on scheduling.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

// GaussianFanIn: iid N(0, 1/k). SUO: Haar orthogonal rows (or columns when
// m > k) scaled by max(sqrt(m/k), 1).
Eigen::MatrixXd sample_weight_matrix(InitScheme scheme, int m, int k, Rng& rng);

// Pair with squared norms dim and inner product c0 * dim.
std::pair<Eigen::VectorXd, Eigen::VectorXd> make_input_pair(int dim, double c0, Rng& rng);

struct LayerStats {
    double q1 = 0.0;
    double q2 = 0.0;
    double c = 0.0;
};

// Pushes both inputs through depth fresh combined layers of the given width
// (zero biases). Entry 0 describes the inputs.
std::vector<LayerStats> propagate_pair(const TransformedActivation& act, InitScheme scheme, int width, int depth,
                                       const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, Rng& rng);

struct SimConfig {
    int width = 100;
    int depth = 50;
    int trials = 50;           // independent networks
    int pairs_per_trial = 100;  // fresh input pairs per network
    std::uint64_t seed = 0;
    double initial_c = 0.0;
    double input_scale = 1.0;  // inputs get squared norm input_scale^2 * width
    int threads = 1;           // 0 picks the hardware concurrency
    // Draw every weight matrix explicitly instead of sampling the joint law of
    // the layer outputs directly.
    bool explicit_weights = false;
};

struct EmpiricalTrace {
    double initial_c = 0.0;
    std::vector<double> mean_c, std_c, mean_q;  // length depth + 1
    std::size_t samples_per_layer = 0;
};

EmpiricalTrace run_simulation(const SimConfig& config, const TransformedActivation& act, InitScheme scheme);

struct DeviationReport {
    double max_abs_deviation = 0.0;
    double mean_abs_deviation = 0.0;
    double fraction_within_std = 0.0;
    std::vector<double> theory;
};

// Theory is the local map iterated from initial_c along a vanilla graph.
DeviationReport compare_to_theory(const EmpiricalTrace& trace, const NetworkGraph& g, const ScalarMap& local);

void write_trace_csv(std::ostream& out, const EmpiricalTrace& trace, const std::vector<double>& theory);

}  // namespace qcmap
