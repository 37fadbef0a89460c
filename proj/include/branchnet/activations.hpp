#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "branchnet/numerics.hpp"

namespace branchnet {

enum class ActivationKind { Sigmoid, Tanh, ReLU, ELU, Softmax, Identity };

inline const char* to_string(ActivationKind k) {
    switch (k) {
        case ActivationKind::Sigmoid: return "sigmoid";
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::ELU: return "elu";
        case ActivationKind::Softmax: return "softmax";
        case ActivationKind::Identity: return "identity";
    }
    return "?";
}

struct Activation {
    ActivationKind kind = ActivationKind::Identity;
    double alpha = 1.0;  // ELU only, must stay positive

    static Activation sigmoid() { return {ActivationKind::Sigmoid}; }
    static Activation tanh() { return {ActivationKind::Tanh}; }
    static Activation relu() { return {ActivationKind::ReLU}; }
    static Activation elu(double alpha = 1.0) {
        if (alpha <= 0.0) throw std::invalid_argument("Activation::elu: alpha must be positive");
        return {ActivationKind::ELU, alpha};
    }
    static Activation softmax() { return {ActivationKind::Softmax}; }
    static Activation identity() { return {ActivationKind::Identity}; }
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline Vector activate(const Activation& a, const Vector& z) {
    Vector out(z.size());
    switch (a.kind) {
        case ActivationKind::Sigmoid:
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = sigmoid(z[i]);
            break;
        case ActivationKind::Tanh:
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::tanh(z[i]);
            break;
        case ActivationKind::ReLU:
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
            break;
        case ActivationKind::ELU:
            if (a.alpha <= 0.0) throw std::invalid_argument("apply: ELU alpha must be positive");
            for (std::size_t i = 0; i < z.size(); ++i)
                out[i] = z[i] > 0.0 ? z[i] : a.alpha * std::expm1(z[i]);
            break;
        case ActivationKind::Softmax: {
            // max subtraction keeps exp from overflowing
            double mx = -HUGE_VAL;
            for (double v : z) mx = std::max(mx, v);
            double sum = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) {
                out[i] = std::exp(z[i] - mx);
                sum += out[i];
            }
            for (auto& v : out) v /= sum;
            break;
        }
        case ActivationKind::Identity:
            out = z;
            break;
    }
    return out;
}

/// Elementwise derivative evaluated at the pre-activation z.
/// Softmax has no elementwise derivative; it is only supported fused with
/// cross-entropy in the network backward pass.
inline Vector derivative(const Activation& a, const Vector& z) {
    Vector out(z.size());
    switch (a.kind) {
        case ActivationKind::Sigmoid:
            for (std::size_t i = 0; i < z.size(); ++i) {
                const double s = sigmoid(z[i]);
                out[i] = s * (1.0 - s);
            }
            break;
        case ActivationKind::Tanh:
            for (std::size_t i = 0; i < z.size(); ++i) {
                const double t = std::tanh(z[i]);
                out[i] = 1.0 - t * t;
            }
            break;
        case ActivationKind::ReLU:
            // subgradient 0 at exactly 0
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? 1.0 : 0.0;
            break;
        case ActivationKind::ELU:
            for (std::size_t i = 0; i < z.size(); ++i)
                out[i] = z[i] > 0.0 ? 1.0 : a.alpha * std::exp(z[i]);
            break;
        case ActivationKind::Softmax:
            throw std::invalid_argument(
                "derivative: softmax is handled jointly with cross-entropy, "
                "no elementwise derivative exists");
        case ActivationKind::Identity:
            for (auto& v : out) v = 1.0;
            break;
    }
    return out;
}

}  // namespace branchnet
