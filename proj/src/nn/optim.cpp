#include "anoseg/nn/optim.hpp"

#include "anoseg/error.hpp"

#include <cmath>

namespace anoseg::nn {

AdamState AdamState::for_network(const Network& net, double learning_rate) {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
    AdamState s;
    s.learning_rate = learning_rate;
    for (const auto& block : net.parameter_blocks()) {
        s.m.emplace_back(block.size(), 0.0);
        s.v.emplace_back(block.size(), 0.0);
    }
    return s;
}

void adam_step(AdamState& state, std::span<const std::span<double>> params, const Gradients& grads) {
    if (params.size() != grads.blocks.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
        throw ShapeError("adam: parameter, gradient and moment block counts differ");
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != grads.blocks[b].size() || params[b].size() != state.m[b].size() ||
            params[b].size() != state.v[b].size()) {
            throw ShapeError("adam: block " + std::to_string(b) + " size mismatch");
        }
        for (std::size_t i = 0; i < grads.blocks[b].size(); ++i) {
            if (!std::isfinite(grads.blocks[b][i])) {
                throw NumericError("adam: non-finite gradient in parameter block " + std::to_string(b) + " at index " +
                                   std::to_string(i));
            }
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& m = state.m[b];
        auto& v = state.v[b];
        const auto& g = grads.blocks[b];
        auto p = params[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

} // namespace anoseg::nn
