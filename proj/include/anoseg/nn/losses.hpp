#pragma once

#include "anoseg/nn/network.hpp"

#include <cstdint>
#include <filesystem>

namespace anoseg::nn {

/// Frozen convolutional stack used by the feature loss. An empty network acts
/// as the identity map.
class FeatureExtractor {
public:
    /// Three conv+ReLU+pool stages with fixed He-uniform weights.
    static FeatureExtractor builtin(int channels, std::uint64_t seed);
    static FeatureExtractor identity();
    static FeatureExtractor from_file(const std::filesystem::path& path);

    Tensor features(const Tensor& input, ForwardTape* tape = nullptr) const;

    /// Gradient w.r.t. the extractor input for a gradient on its output.
    Tensor input_gradient(const ForwardTape& tape, const Tensor& grad_features) const;

    const Network& network() const { return net_; }
    Shape output_shape(const Shape& input) const { return net_.output_shape(input); }

private:
    explicit FeatureExtractor(Network net) : net_(std::move(net)) {}
    Network net_;
};

struct LossWeights {
    double alpha1 = 0.7;  ///< feature term
    double alpha2 = 0.3;  ///< pixel term

    void validate() const;
};

/// Loss value and its gradient w.r.t. the prediction.
struct LossResult {
    double value = 0.0;
    Tensor grad;
};

/// Mean of (target - prediction)^2 over every element.
LossResult loss_l2(const Tensor& target, const Tensor& prediction);

/// Mean absolute difference of feature maps. Pass @p target_features to reuse
/// a cached f(target).
LossResult loss_feature(const Tensor& target, const Tensor& prediction, const FeatureExtractor& f,
                        const Tensor* target_features = nullptr);

/// alpha1 * L_f + alpha2 * L_2.
LossResult loss_stylization(const Tensor& target, const Tensor& prediction, const FeatureExtractor& f,
                            const LossWeights& w, const Tensor* target_features = nullptr);

/// -(1/b) sum t log max(p, 1e-12); gradient is w.r.t. the probabilities.
LossResult loss_cross_entropy(const Tensor& probs, const Tensor& one_hot);

} // namespace anoseg::nn
