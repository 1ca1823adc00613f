/**
 * @file detections.hpp
 * @brief Detections file IO and overlay drawing.
 *
 * Detections use the manifest line layout with a trailing score per item:
 *
 *     test<TAB>path<TAB>k x0 y0 x1 y1 score;k x0 y0 x1 y1 score
 *
 * where k is the class index or -1 when unclassified. Scans without
 * detections keep their line with no third field.
 */
#pragma once

#include "anoseg/image.hpp"
#include "anoseg/metrics.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace anoseg {

struct ScanDetections {
    std::string image_path;
    std::vector<ScoredBox> boxes;

    friend bool operator==(const ScanDetections&, const ScanDetections&) = default;
};

struct DetectionsFile {
    std::vector<std::string> class_names;
    std::vector<ScanDetections> scans;
};

DetectionsFile parse_detections(std::string_view text);
DetectionsFile load_detections(const std::filesystem::path& path);
std::string format_detections(const DetectionsFile& file);
void write_detections(const std::filesystem::path& path, const DetectionsFile& file);

/// Pairs detections with the manifest's test entries by image path. Test
/// entries missing from the file count as scans without detections.
std::vector<ImageRecord> join_with_manifest(const DetectionsFile& detections, const DatasetManifest& manifest);

using Rgb = std::array<double, 3>;

/// One-pixel box outline, clipped to the image.
void draw_box(Image& image, const BBox& box, const Rgb& colour);

/// Draws a non-negative integer in a 3x5 bitmap font at (x, y), scaled by @p scale.
void draw_number(Image& image, int x, int y, int value, const Rgb& colour, int scale = 1);

/// RGB copy of @p scan with each box drawn, labelled with its class index when known.
Image render_overlay(const Image& scan, std::span<const ScoredBox> boxes);

} // namespace anoseg
