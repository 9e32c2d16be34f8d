#pragma once

#include <string>
#include <vector>

namespace qcmap {

enum class ActivationKind { ReLU, LReLU, TReLU, Tanh, SoftPlus, Identity };

// A base nonlinearity. alpha is the negative slope for LReLU/TReLU and unused
// otherwise.
class Activation {
public:
    Activation() = default;

    static Activation relu() { return {ActivationKind::ReLU, 0.0}; }
    static Activation lrelu(double alpha) { return {ActivationKind::LReLU, alpha}; }
    static Activation trelu(double alpha);
    static Activation tanh() { return {ActivationKind::Tanh, 0.0}; }
    static Activation softplus() { return {ActivationKind::SoftPlus, 0.0}; }
    static Activation identity() { return {ActivationKind::Identity, 0.0}; }

    // Parses "relu", "lrelu:0.25", "trelu:0.3", "tanh", "softplus", "identity".
    static Activation parse(const std::string& spec);

    ActivationKind kind() const noexcept { return kind_; }
    double alpha() const noexcept { return alpha_; }

    bool piecewise_linear() const noexcept;
    bool smooth() const noexcept { return !piecewise_linear() || kind_ == ActivationKind::Identity; }

    // Output scale applied on top of LReLU: sqrt(2/(1+alpha^2)) for TReLU, 1 otherwise.
    double scale() const noexcept;

    double eval(double x, int derivative_order = 0) const;

    // Points where the function is not smooth.
    std::vector<double> kinks() const;

    std::string spec() const;

private:
    Activation(ActivationKind k, double a) : kind_(k), alpha_(a) {}

    ActivationKind kind_ = ActivationKind::Identity;
    double alpha_ = 0.0;
};

// x -> output_scale * (base(input_scale * x + input_shift) + output_shift).
// Serialized as alpha, beta, gamma, delta respectively.
struct TransformedActivation {
    Activation base;
    double input_scale = 1.0;
    double input_shift = 0.0;
    double output_scale = 1.0;
    double output_shift = 0.0;

    TransformedActivation() = default;
    TransformedActivation(Activation b) : base(b) {}  // NOLINT: implicit on purpose
    TransformedActivation(Activation b, double alpha, double beta, double gamma, double delta);

    double eval(double x, int derivative_order = 0) const;
    std::vector<double> kinks() const;
    bool smooth() const noexcept { return base.smooth(); }
};

// Recovers ReLU from two LReLU units: (phi_a(x) + a*phi_a(-x)) / (1 - a^2).
double simulate_relu_via_lrelu(double alpha, double x);

}  // namespace qcmap
