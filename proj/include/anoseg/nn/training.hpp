#pragma once

#include "anoseg/image.hpp"
#include "anoseg/manifest.hpp"
#include "anoseg/nn/losses.hpp"
#include "anoseg/nn/network.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace anoseg::nn {

struct ReconstructorConfig {
    int patch_size = 64;
    double noise_std = 0.05;
    int epochs = 10;
    int batch_size = 8;
    double learning_rate = 1e-3;
    LossWeights weights;
    std::uint64_t seed = 1;
    bool calibrate_bias = true;

    void validate() const;
};

struct TrainingResult {
    Network net;
    std::vector<double> loss_history;  ///< mean loss per epoch
    std::vector<double> bias_offsets;  ///< per-channel correction folded into the output layer
};

/// Shifts the output layer's biases so the mean residual (patch - reconstruction)
/// over clean @p patches is zero per channel. Returns the applied offsets.
/// Noise-trained models otherwise reconstruct clean inputs with a global
/// intensity offset, which the disparity analysis reads as an anomaly.
std::vector<double> calibrate_output_bias(Network& net, std::span<const Image> patches);

/// Called after each epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(int, double)>;

/// Tiles every train-role scan into patches (RGB). When more than
/// @p max_patches are available a seeded subset is kept, in original order.
std::vector<Image> collect_training_patches(const DatasetManifest& manifest, int patch_size, int max_patches,
                                            std::uint64_t seed);

/// Denoising training: input = perturb_gaussian(patch), target = clean patch,
/// objective L_s. Deterministic for a given seed.
TrainingResult train_reconstructor(std::span<const Image> patches, const FeatureExtractor& extractor,
                                   const ReconstructorConfig& cfg, const EpochCallback& on_epoch = {});

/// Patch-wise reconstruction of a whole scan, clamped to [0,1].
Image reconstruct(const Network& net, const Image& scan, int patch_size);

struct ClassifierConfig {
    int input_size = 32;
    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 1e-4;
    std::uint64_t seed = 1;

    void validate() const;
};

struct ClassifierResult {
    Network net;
    std::vector<double> loss_history;
    std::vector<double> accuracy_history;  ///< training accuracy per epoch
};

/// Minimizes cross-entropy over labelled patches; patches are resized to the
/// configured input size.
ClassifierResult train_classifier(std::span<const Image> patches, std::span<const int> labels, int n_classes,
                                  const ClassifierConfig& cfg, const EpochCallback& on_epoch = {});

/// (n, n_classes) probability rows.
Tensor predict_probabilities(const Network& net, std::span<const Image> patches, int input_size);

std::vector<int> predict_labels(const Network& net, std::span<const Image> patches, int input_size);

} // namespace anoseg::nn
