#pragma once

#include <cmath>
#include <vector>

#include "subar/common.hpp"
#include "subar/lstm.hpp"

namespace subar {

/// Adam with bias correction and decoupled weight decay. Moment buffers
/// mirror the parameter tensors of one stack.
struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    std::size_t step_count = 0;

    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState for_params(StackParams& params, double lr, double weight_decay) {
        AdamState s;
        s.learning_rate = lr;
        s.weight_decay = weight_decay;
        for (const auto& t : params.tensors()) {
            s.m.emplace_back(t.size, 0.0);
            s.v.emplace_back(t.size, 0.0);
        }
        return s;
    }
};

/// Rescales all gradients so their global L2 norm does not exceed max_norm.
inline double clip_gradient_norm(StackParams& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& t : grads.tensors()) {
        for (std::size_t i = 0; i < t.size; ++i) sq += t.data[i] * t.data[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (const auto& t : grads.tensors()) {
            for (std::size_t i = 0; i < t.size; ++i) t.data[i] *= scale;
        }
    }
    return norm;
}

/// One bias-corrected update; weight decay is applied directly to the
/// parameters (decoupled from the moment estimates).
inline void adam_step(AdamState& adam, StackParams& params, StackParams& grads) {
    const auto ptensors = params.tensors();
    const auto gtensors = grads.tensors();
    require(adam.m.size() == ptensors.size(), "Adam state does not match parameter layout");
    adam.step_count += 1;
    const double t = static_cast<double>(adam.step_count);
    const double bc1 = 1.0 - std::pow(adam.beta1, t);
    const double bc2 = 1.0 - std::pow(adam.beta2, t);
    for (std::size_t k = 0; k < ptensors.size(); ++k) {
        require(ptensors[k].size == gtensors[k].size && ptensors[k].size == adam.m[k].size(),
                "gradient tensor '", gtensors[k].name, "' shape mismatch");
        double* p = ptensors[k].data;
        const double* g = gtensors[k].data;
        double* m = adam.m[k].data();
        double* v = adam.v[k].data();
        for (std::size_t i = 0; i < ptensors[k].size; ++i) {
            m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
            v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= adam.learning_rate *
                    (m_hat / (std::sqrt(v_hat) + adam.epsilon) + adam.weight_decay * p[i]);
        }
    }
}

} // namespace subar
