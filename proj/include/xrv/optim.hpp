#pragma once

// SGD and Adam parameter updates over a LayerParams store. Updates touch
// trainable parameters only; frozen parameters are left bit-identical. A
// trainable parameter without a populated gradient is a contract violation.
// Gradients are cleared after a successful step.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xrv/layers.hpp"

namespace xrv {

enum class OptimizerKind { sgd, adam };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer: " + s + " (expected sgd|adam)");
}

// theta <- theta - lr * grad
template <typename T>
void sgd_step(LayerParams<T>& params, T lr) {
    for (auto& [name, p] : params) {
        if (!p.trainable) continue;
        if (!p.value.has_grad()) throw ContractError("sgd_step: trainable parameter \"" + name + "\" has no gradient");
        auto& data = p.value.data();
        const auto& grad = p.value.grad();
        for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * grad[i];
    }
    for (auto& [name, p] : params) p.value.clear_grad();
}

template <typename T>
struct AdamState {
    struct Slot {
        std::vector<T> m, v;
        std::uint64_t t = 0;
    };
    std::map<std::string, Slot> slots;
};

// Standard Adam with bias correction:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
template <typename T>
void adam_step(LayerParams<T>& params, AdamState<T>& state, T lr,
               T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8)) {
    for (auto& [name, p] : params) {
        if (!p.trainable) continue;
        if (!p.value.has_grad()) throw ContractError("adam_step: trainable parameter \"" + name + "\" has no gradient");

        auto& slot = state.slots[name];
        auto& data = p.value.data();
        const auto& grad = p.value.grad();
        if (slot.m.empty()) {
            slot.m.assign(data.size(), T(0));
            slot.v.assign(data.size(), T(0));
        }
        slot.t += 1;
        const T bc1 = T(1) - std::pow(beta1, static_cast<T>(slot.t));
        const T bc2 = T(1) - std::pow(beta2, static_cast<T>(slot.t));
        for (std::size_t i = 0; i < data.size(); ++i) {
            slot.m[i] = beta1 * slot.m[i] + (T(1) - beta1) * grad[i];
            slot.v[i] = beta2 * slot.v[i] + (T(1) - beta2) * grad[i] * grad[i];
            const T m_hat = slot.m[i] / bc1;
            const T v_hat = slot.v[i] / bc2;
            data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
    for (auto& [name, p] : params) p.value.clear_grad();
}

}  // namespace xrv
