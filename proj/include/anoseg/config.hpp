/**
 * @file config.hpp
 * @brief `key = value` pipeline configuration with range checks.
 *
 * Lines hold one `key = value` pair; `#` starts a comment. Unknown keys,
 * duplicates and out-of-range values raise ConfigError.
 */
#pragma once

#include "anoseg/nn/training.hpp"
#include "anoseg/segmenter.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace anoseg {

struct PipelineConfig {
    std::string profile = "sixray-like";

    // stylization
    double sigma = 5.0;
    double beta = 2.0;
    std::string reference_image;  ///< empty: first train entry of the manifest

    // reconstructor
    int patch_size = 64;
    double noise_std = 0.05;
    double alpha1 = 0.7;
    double alpha2 = 0.3;
    int epochs = 30;
    int batch_size = 8;
    double learning_rate = 1e-3;
    int max_patches = 500;
    bool calibrate_bias = true;
    std::string feature_extractor = "builtin";  ///< "builtin", "identity" or a weights file
    std::uint64_t feature_seed = 7;

    // segmenter
    int clusters = 4;
    int min_area = 0;  ///< 0 = automatic (0.05% of the scan area)
    int opening_radius = 2;
    double noise_ratio = 6.0;
    int kmeans_max_iter = 100;

    // classifier
    int classifier_input = 32;
    int classifier_epochs = 30;
    int classifier_batch_size = 16;
    double classifier_learning_rate = 1e-4;

    // evaluation and execution
    double iou_threshold = 0.5;
    std::uint64_t seed = 1;
    int workers = 0;  ///< 0 = hardware concurrency

    /// Throws ConfigError when any field is out of range.
    void validate() const;

    nn::ReconstructorConfig reconstructor() const;
    nn::ClassifierConfig classifier() const;
    SegmenterConfig segmenter() const;
    StyleSettings style(bool fda) const;
    nn::FeatureExtractor make_feature_extractor() const;
    int resolved_workers() const;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Cluster count the profile implies (4 or 3).
int profile_clusters(std::string_view profile);

/// Relative paths resolve against @p base_dir.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Every key with its effective value; parse_config of the result gives an equal config.
std::string format_config(const PipelineConfig& cfg);

} // namespace anoseg
