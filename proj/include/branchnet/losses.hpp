#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "branchnet/numerics.hpp"

namespace branchnet {

enum class LossKind { MSE, MAE, Huber, LogCosh, CrossEntropy };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::MSE: return "mse";
        case LossKind::MAE: return "mae";
        case LossKind::Huber: return "huber";
        case LossKind::LogCosh: return "logcosh";
        case LossKind::CrossEntropy: return "cross_entropy";
    }
    return "?";
}

struct Loss {
    LossKind kind = LossKind::MSE;
    double delta = 1.0;  // Huber only

    static Loss mse() { return {LossKind::MSE}; }
    static Loss mae() { return {LossKind::MAE}; }
    static Loss huber(double delta = 1.0) {
        if (delta <= 0.0) throw std::invalid_argument("Loss::huber: delta must be positive");
        return {LossKind::Huber, delta};
    }
    static Loss log_cosh() { return {LossKind::LogCosh}; }
    static Loss cross_entropy() { return {LossKind::CrossEntropy}; }
};

/// log(cosh(x)). The naive form overflows near |x| ~ 710, so large inputs
/// use |x| + log1p(e^{-2|x|}) - ln 2. That form cancels catastrophically
/// for small |x|, where log1p(cosh(x) - 1) via expm1 is exact instead.
inline double log_cosh(double x) {
    const double a = std::fabs(x);
    if (a < 1.0) return std::log1p(0.5 * (std::expm1(a) + std::expm1(-a)));
    return a + std::log1p(std::exp(-2.0 * a)) - 0.69314718055994530941723212145818;
}

namespace detail {
inline void check_pair(const Vector& y, const Vector& y_pred) {
    if (y.size() != y_pred.size()) {
        throw std::invalid_argument("loss: length mismatch " + std::to_string(y.size()) +
                                    " vs " + std::to_string(y_pred.size()));
    }
    if (y.empty()) throw std::invalid_argument("loss: empty vectors");
}
}  // namespace detail

/// MSE/MAE/Huber are means over elements; logcosh is the plain sum (the
/// training loop divides by batch size when reporting, so traces stay
/// comparable across batch sizes).
inline double loss_value(const Loss& l, const Vector& y, const Vector& y_pred) {
    detail::check_pair(y, y_pred);
    const std::size_t n = y.size();
    double acc = 0.0;
    switch (l.kind) {
        case LossKind::MSE:
            for (std::size_t i = 0; i < n; ++i) {
                const double e = y[i] - y_pred[i];
                acc += e * e;
            }
            return acc / static_cast<double>(n);
        case LossKind::MAE:
            for (std::size_t i = 0; i < n; ++i) acc += std::fabs(y[i] - y_pred[i]);
            return acc / static_cast<double>(n);
        case LossKind::Huber:
            for (std::size_t i = 0; i < n; ++i) {
                const double e = std::fabs(y[i] - y_pred[i]);
                acc += e <= l.delta ? 0.5 * e * e : l.delta * e - 0.5 * l.delta * l.delta;
            }
            return acc / static_cast<double>(n);
        case LossKind::LogCosh:
            for (std::size_t i = 0; i < n; ++i) acc += log_cosh(y[i] - y_pred[i]);
            return acc;
        case LossKind::CrossEntropy:
            for (std::size_t i = 0; i < n; ++i) {
                if (y[i] == 0.0) continue;
                if (y_pred[i] <= 0.0) {
                    throw std::invalid_argument(
                        "cross_entropy: nonpositive predicted probability at the true class");
                }
                acc -= y[i] * std::log(y_pred[i]);
            }
            return acc;
    }
    return 0.0;
}

/// Per-element d(loss)/d(y_pred).
inline Vector loss_gradient(const Loss& l, const Vector& y, const Vector& y_pred) {
    detail::check_pair(y, y_pred);
    const std::size_t n = y.size();
    const double dn = static_cast<double>(n);
    Vector g(n);
    switch (l.kind) {
        case LossKind::MSE:
            for (std::size_t i = 0; i < n; ++i) g[i] = 2.0 * (y_pred[i] - y[i]) / dn;
            break;
        case LossKind::MAE:
            // subgradient 0 at zero residual
            for (std::size_t i = 0; i < n; ++i) {
                const double e = y_pred[i] - y[i];
                g[i] = (e > 0.0 ? 1.0 : e < 0.0 ? -1.0 : 0.0) / dn;
            }
            break;
        case LossKind::Huber:
            for (std::size_t i = 0; i < n; ++i) {
                const double e = y_pred[i] - y[i];
                g[i] = (std::fabs(e) <= l.delta ? e : l.delta * (e > 0.0 ? 1.0 : -1.0)) / dn;
            }
            break;
        case LossKind::LogCosh:
            for (std::size_t i = 0; i < n; ++i) g[i] = std::tanh(y_pred[i] - y[i]);
            break;
        case LossKind::CrossEntropy:
            for (std::size_t i = 0; i < n; ++i) {
                if (y[i] != 0.0 && y_pred[i] <= 0.0) {
                    throw std::invalid_argument(
                        "cross_entropy: nonpositive predicted probability at the true class");
                }
                g[i] = y[i] == 0.0 ? 0.0 : -y[i] / y_pred[i];
            }
            break;
    }
    return g;
}

}  // namespace branchnet
