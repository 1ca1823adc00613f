#pragma once

#include "anoseg/nn/network.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace anoseg::nn {

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    /// Zeroed moments shaped like the network's parameter blocks.
    static AdamState for_network(const Network& net, double learning_rate);
};

/// One bias-corrected ADAM update. Throws NumericError on non-finite gradients
/// before touching any parameter.
void adam_step(AdamState& state, std::span<const std::span<double>> params, const Gradients& grads);

} // namespace anoseg::nn
