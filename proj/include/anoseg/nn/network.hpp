/**
 * @file network.hpp
 * @brief Layer set, sequential network with reverse-mode gradients, weights files.
 *
 * Layer semantics: 3x3 convolutions are stride 1 with zero padding 1 and an
 * optional fused ReLU; max pooling is 2x2 stride 2 (ties go to the first
 * element in raster order); up-sampling is nearest-neighbour x2.
 */
#pragma once

#include "anoseg/nn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace anoseg::nn {

struct Conv3x3 {
    int in_channels = 0;
    int out_channels = 0;
    bool relu = true;
    std::vector<double> weight;  ///< [out][in][3][3]
    std::vector<double> bias;    ///< [out]
};

struct MaxPool2 {};
struct Upsample2 {};
struct Flatten {};

struct FullyConnected {
    int in_features = 0;
    int out_features = 0;
    std::vector<double> weight;  ///< [out][in]
    std::vector<double> bias;
};

struct Softmax {};

using Layer = std::variant<Conv3x3, MaxPool2, Upsample2, Flatten, FullyConnected, Softmax>;

Conv3x3 make_conv(int in_channels, int out_channels, bool relu = true);
FullyConnected make_fc(int in_features, int out_features);

/// Activations recorded by a forward pass, consumed by backward.
struct ForwardTape {
    std::vector<Tensor> inputs;
    std::vector<Tensor> outputs;
    std::vector<std::vector<std::uint32_t>> argmax;  ///< per pooling layer
    bool recorded() const { return !inputs.empty(); }
};

/// Parameter gradients, one block per weight/bias vector in parameter order.
struct Gradients {
    std::vector<std::vector<double>> blocks;

    void zero();
};

struct LayerCounts {
    int convs = 0;
    int relus = 0;
    int pools = 0;
    int upsamples = 0;
    int fully_connected = 0;
    int softmax = 0;
};

class Network {
public:
    Network() = default;
    explicit Network(std::vector<Layer> layers);

    void add(Layer layer) { layers_.push_back(std::move(layer)); }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    bool empty() const { return layers_.empty(); }

    /// Output shape for an input shape; throws ShapeError on incompatibility.
    Shape output_shape(const Shape& input) const;

    Tensor forward(const Tensor& input, ForwardTape* tape = nullptr) const;

    /// Back-propagates @p grad_output through the recorded pass. Parameter
    /// gradients are accumulated into @p grads when non-null. Returns the
    /// gradient w.r.t. the network input (empty when @p need_input_grad is false).
    Tensor backward(const ForwardTape& tape, const Tensor& grad_output, Gradients* grads = nullptr,
                    bool need_input_grad = true) const;

    std::vector<std::span<double>> parameter_blocks();
    std::vector<std::span<const double>> parameter_blocks() const;
    Gradients make_gradients() const;
    std::size_t parameter_count() const;
    LayerCounts counts() const;

    friend bool operator==(const Network& a, const Network& b);

private:
    std::vector<Layer> layers_;
};

/// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
void he_uniform_init(Network& net, std::uint64_t seed);

/// Encoder-decoder: 7 convs (3->9->10->10->10->10->10->3), 3 pools, 3 up-samplings.
Network build_reconstructor(int channels, std::uint64_t seed);

/// Three conv(3x3)+ReLU+pool stages, channels -> 16 -> 16 -> 16.
Network build_feature_stack(int channels, std::uint64_t seed);

/// conv+ReLU+pool x3 (channels->16->32->64), flatten, fully connected, softmax.
Network build_classifier(int n_classes, int input_size, int channels, std::uint64_t seed);

/// Little-endian "ANW1" weights file; see README for the layout.
void save_weights(const std::filesystem::path& path, const Network& net);
Network load_weights(const std::filesystem::path& path);

} // namespace anoseg::nn
