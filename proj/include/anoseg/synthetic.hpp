/**
 * @file synthetic.hpp
 * @brief Deterministic synthetic scan generator used in place of real corpora.
 */
#pragma once

#include "anoseg/image.hpp"
#include "anoseg/manifest.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace anoseg {

enum class BackgroundModel { TexturedBlobs, GradientNoise };
enum class AnomalyShape { Disk, Bar, Polygon };

/// Global intensity transform that emulates a different scanner.
struct ScannerStyle {
    double gain = 1.0;
    double offset = 0.0;
};

struct SyntheticSpec {
    int count = 16;             ///< normal training scans
    int test_count = 16;        ///< test scans; every other one is abnormal when shapes are given
    int height = 128;
    int width = 128;
    BackgroundModel background_model = BackgroundModel::TexturedBlobs;
    std::vector<AnomalyShape> anomaly_shapes{AnomalyShape::Disk, AnomalyShape::Bar, AnomalyShape::Polygon};
    double anomaly_intensity_shift = -0.35;
    double background_mean = 0.6;
    double texture_std = 0.05;  ///< std of the background texture field
    int max_anomalies = 3;      ///< abnormal scans receive 1..max_anomalies shapes
    ScannerStyle style;         ///< applied after rendering; does not change the scene
    std::uint64_t seed = 1;

    /// Throws ConfigError when the generator invariants do not hold.
    void validate() const;
};

struct SyntheticSample {
    Image image;
    Role role = Role::Train;
    std::vector<GroundTruth> ground_truth;
    std::string name;  ///< relative file name, e.g. "test/abnormal_0003.png"
};

/// Renders every sample in memory (values quantised to k/255 so files round-trip exactly).
std::vector<SyntheticSample> render_synthetic(const SyntheticSpec& spec);

/// Renders a single scene; shapes are injected when @p shapes is non-empty.
SyntheticSample render_scene(const SyntheticSpec& spec, std::uint64_t scene_seed,
                             const std::vector<AnomalyShape>& shapes);

/// Writes images plus `manifest.txt` under @p out_dir and returns the manifest.
DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Draws a filled shape of the given kind centred at (cx, cy); returns the exact inclusive bbox.
BBox draw_shape(Image& image, AnomalyShape shape, double cx, double cy, double radius, double angle,
                double shift, std::uint64_t seed);

struct PatchClassSpec {
    int classes = 4;
    int per_class = 50;
    int size = 32;
    std::uint64_t seed = 7;
};

struct LabeledPatch {
    Image image;
    int label = 0;
};

/// Class-separable object patches: class k has its own shape and colour signature.
std::vector<LabeledPatch> render_patch_classes(const PatchClassSpec& spec);

/// Writes patches plus `manifest.txt`; each entry's single ground-truth item carries the label.
DatasetManifest generate_patch_classes(const PatchClassSpec& spec, const std::filesystem::path& out_dir,
                                       double train_fraction = 0.8);

} // namespace anoseg
