/**
 * @file segmenter.hpp
 * @brief Disparity clustering, mask cleanup and instance extraction.
 */
#pragma once

#include "anoseg/bbox.hpp"
#include "anoseg/image.hpp"
#include "anoseg/nn/network.hpp"
#include "anoseg/spectral.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace anoseg {

/// Signed per-channel difference stylized - reconstructed (3 channels).
Image disparity_map(const Image& stylized, const Image& reconstructed);

using Point3 = std::array<double, 3>;

struct KMeansResult {
    int clusters = 0;
    std::vector<Point3> centroids;
    std::vector<int> labels;
    double wcss = 0.0;
    std::vector<double> wcss_history;  ///< after every assignment step
    int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations until the labels stop
/// changing or @p max_iter is reached. Empty clusters move to the point
/// farthest from its centroid.
KMeansResult kmeans(std::span<const Point3> points, int clusters, std::uint64_t seed, int max_iter = 100);

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

    bool at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int y, int x, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

struct ClusterSelection {
    BinaryMask mask;            ///< pixels outside the background cluster
    std::vector<double> score;  ///< per pixel ||d|| / sqrt(3)
    int background = 0;
};

/// The cluster whose centroid is nearest the origin is background (ties go to
/// the lower index); everything else is candidate anomaly. With
/// @p noise_ratio > 0, clusters whose centroid norm is below noise_ratio times
/// the median pixel disparity norm are also treated as background.
ClusterSelection select_anomalous_clusters(const Image& disparity, const KMeansResult& km, double noise_ratio = 0.0);

/// Offsets (dy, dx) of the disk dy^2 + dx^2 <= r^2.
std::vector<std::array<int, 2>> disk_offsets(int radius);

/// Pixels outside the image count as background.
BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask opening(const BinaryMask& mask, int radius);

struct InstanceMask {
    int id = 0;
    std::vector<int> pixels;  ///< linear indices y * width + x, raster order
    int width = 0;

    int area() const { return static_cast<int>(pixels.size()); }
};

/// 8-connected components labelled in raster discovery order.
std::vector<InstanceMask> connected_components(const BinaryMask& mask);

/// Opening with a disk, then removal of components smaller than @p min_area.
BinaryMask morphological_cleanup(const BinaryMask& mask, int opening_radius, int min_area);

BBox fit_bbox(const InstanceMask& instance);

struct Detection {
    BBox box;
    double score = 0.0;
    int class_label = -1;  ///< -1 when unclassified
    InstanceMask mask;
};

struct SegmenterConfig {
    int clusters = 4;
    int min_area = 0;  ///< 0 selects 0.05% of the image area
    int opening_radius = 2;
    int max_iter = 100;
    double noise_ratio = 6.0;
    std::uint64_t seed = 1;
    int max_cluster_pixels = 512 * 512;

    void validate() const;
    int resolved_min_area(int height, int width) const;
};

/// Clusters the disparity map and returns the surviving instances.
std::vector<Detection> detect_instances(const Image& disparity, const SegmenterConfig& cfg);

enum class StyleMethod { Gwfs, Fda, None };

struct StyleSettings {
    StyleMethod method = StyleMethod::Gwfs;
    double sigma = 5.0;
    double beta = 2.0;
};

/// Stylizes an RGB scan; the reference is resampled to the scan size.
Image apply_style(const Image& scan, const Image& reference, const StyleSettings& style);

struct SegmentResult {
    Image stylized;
    Image reconstructed;
    Image disparity;
    std::vector<Detection> detections;
};

/// stylize -> reconstruct -> disparity -> cluster -> clean -> instances.
SegmentResult segment_scan(const Image& scan, const nn::Network& model, const Image& reference,
                           const StyleSettings& style, int patch_size, const SegmenterConfig& cfg);

} // namespace anoseg
