/**
 * @file commands.hpp
 * @brief The command-line verbs as library functions.
 *
 * Every command writes `config.resolved` into its output directory. Errors
 * surface as exceptions; ConfigError maps to exit status 2 in the CLI.
 */
#pragma once

#include "anoseg/config.hpp"
#include "anoseg/detections.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace anoseg {

struct CommonOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::filesystem::path out = "run";
    bool fda = false;
};

/// Loads the config file and applies command-line overrides.
PipelineConfig effective_config(const CommonOptions& opts);

/// Reference scan: reference_image when set, else the manifest's first train entry.
Image select_reference(const PipelineConfig& cfg, const DatasetManifest& manifest);

void cmd_train(const CommonOptions& opts, const std::filesystem::path& manifest, std::ostream& log);

void cmd_stylize(const CommonOptions& opts, const std::filesystem::path& input, const std::filesystem::path& reference,
                 const std::filesystem::path& output, std::ostream& log);

void cmd_segment(const CommonOptions& opts, const std::filesystem::path& model, const std::filesystem::path& manifest,
                 const std::optional<std::filesystem::path>& classifier, std::ostream& log);

void cmd_classify_train(const CommonOptions& opts, const std::filesystem::path& manifest, std::ostream& log);

/// With @p detections, labels every detected box (cropped from the stylized
/// scan) and writes a merged detections file; otherwise classifies the
/// manifest's test-entry boxes and reports accuracy.
void cmd_classify(const CommonOptions& opts, const std::filesystem::path& model, const std::filesystem::path& manifest,
                  const std::optional<std::filesystem::path>& detections, std::ostream& log);

void cmd_evaluate(const CommonOptions& opts, const std::filesystem::path& detections,
                  const std::filesystem::path& manifest, std::ostream& log);

enum class SweepAxis { Sigma, Clusters };

struct SweepRow {
    double value = 0.0;
    double mse = 0.0;         ///< sigma axis
    double map = 0.0;         ///< clusters axis
    double f1 = 0.0;          ///< clusters axis
};

/// Sigma axis: MSE between the reconstruction of each stylized test scan and
/// its target (the paired entry of @p targets, else the scan itself).
/// Clusters axis: box mAP and F1 against the manifest ground truth.
std::vector<SweepRow> cmd_sweep(const CommonOptions& opts, const std::filesystem::path& model,
                                const std::filesystem::path& manifest, SweepAxis axis, const std::vector<double>& values,
                                const std::optional<std::filesystem::path>& targets, std::ostream& log);

struct SynthOptions {
    std::string kind = "scans";  ///< "scans" or "patches"
    int count = 125;
    int test_count = 100;
    int size = 128;
    double style_gain = 1.0;
    double style_offset = 0.0;
};

void cmd_synth(const CommonOptions& opts, const SynthOptions& synth, std::ostream& log);

} // namespace anoseg
