#include "qcmap/activations.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "qcmap/errors.hpp"

namespace qcmap {

namespace {

double parse_real(const std::string& text, const std::string& spec) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw InvalidArgument("bad activation parameter in '" + spec + "'");
    }
    if (used != text.size() || !std::isfinite(v)) throw InvalidArgument("bad activation parameter in '" + spec + "'");
    return v;
}

std::string format_real(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Activation Activation::trelu(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("trelu alpha must lie in [0, 1]", {{"alpha", alpha}});
    return {ActivationKind::TReLU, alpha};
}

Activation Activation::parse(const std::string& spec) {
    auto colon = spec.find(':');
    std::string name = spec.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto no_arg = [&] {
        if (colon != std::string::npos) throw InvalidArgument("activation '" + name + "' takes no parameter");
    };
    if (name == "relu") { no_arg(); return relu(); }
    if (name == "tanh") { no_arg(); return tanh(); }
    if (name == "softplus") { no_arg(); return softplus(); }
    if (name == "identity") { no_arg(); return identity(); }
    if (name == "lrelu" || name == "trelu") {
        if (arg.empty()) throw InvalidArgument("activation '" + name + "' needs a slope, e.g. " + name + ":0.25");
        double a = parse_real(arg, spec);
        return name == "lrelu" ? lrelu(a) : trelu(a);
    }
    throw InvalidArgument("unknown activation '" + spec + "'");
}

bool Activation::piecewise_linear() const noexcept {
    switch (kind_) {
        case ActivationKind::ReLU:
        case ActivationKind::LReLU:
        case ActivationKind::TReLU:
        case ActivationKind::Identity:
            return true;
        default:
            return false;
    }
}

double Activation::scale() const noexcept {
    return kind_ == ActivationKind::TReLU ? std::sqrt(2.0 / (1.0 + alpha_ * alpha_)) : 1.0;
}

double Activation::eval(double x, int order) const {
    if (order < 0 || order > 2) throw Unsupported("derivative order must be 0, 1 or 2", {{"order", order}});
    switch (kind_) {
        case ActivationKind::Identity:
            return order == 0 ? x : (order == 1 ? 1.0 : 0.0);
        case ActivationKind::ReLU:
        case ActivationKind::LReLU:
        case ActivationKind::TReLU: {
            if (order == 2) throw Unsupported("second derivative of a piecewise-linear activation", {{"activation", spec()}});
            double slope = kind_ == ActivationKind::ReLU ? 0.0 : alpha_;
            double s = scale();
            if (order == 1) return s * (x >= 0 ? 1.0 : slope);
            return s * (x >= 0 ? x : slope * x);
        }
        case ActivationKind::Tanh: {
            double t = std::tanh(x);
            if (order == 0) return t;
            double d = 1.0 - t * t;
            return order == 1 ? d : -2.0 * t * d;
        }
        case ActivationKind::SoftPlus: {
            if (order == 0) return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
            double s = logistic(x);
            return order == 1 ? s : s * (1.0 - s);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> Activation::kinks() const {
    switch (kind_) {
        case ActivationKind::ReLU:
            return {0.0};
        case ActivationKind::LReLU:
        case ActivationKind::TReLU:
            if (alpha_ == 1.0) return {};
            return {0.0};
        default:
            return {};
    }
}

std::string Activation::spec() const {
    switch (kind_) {
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::LReLU: return "lrelu:" + format_real(alpha_);
        case ActivationKind::TReLU: return "trelu:" + format_real(alpha_);
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::SoftPlus: return "softplus";
        case ActivationKind::Identity: return "identity";
    }
    return "?";
}

TransformedActivation::TransformedActivation(Activation b, double alpha, double beta, double gamma, double delta)
    : base(b), input_scale(alpha), input_shift(beta), output_scale(gamma), output_shift(delta) {
    if (!(gamma > 0.0)) throw InvalidArgument("transform gamma must be positive", {{"gamma", gamma}});
}

double TransformedActivation::eval(double x, int order) const {
    double u = input_scale * x + input_shift;
    if (order == 0) return output_scale * (base.eval(u, 0) + output_shift);
    double chain = order == 1 ? input_scale : input_scale * input_scale;
    return output_scale * chain * base.eval(u, order);
}

std::vector<double> TransformedActivation::kinks() const {
    std::vector<double> out;
    if (input_scale == 0.0) return out;
    for (double k : base.kinks()) out.push_back((k - input_shift) / input_scale);
    return out;
}

double simulate_relu_via_lrelu(double alpha, double x) {
    if (std::abs(alpha) == 1.0) throw InvalidArgument("simulate_relu_via_lrelu needs alpha != +-1", {{"alpha", alpha}});
    auto phi = [alpha](double v) { return v >= 0 ? v : alpha * v; };
    return (phi(x) + alpha * phi(-x)) / (1.0 - alpha * alpha);
}

}  // namespace qcmap
