/**
 * @file manifest.hpp
 * @brief Line-oriented dataset manifest.
 *
 * Format (UTF-8 text):
 *   #classes: name1,name2,...
 *   role<TAB>path[<TAB>k x0 y0 x1 y1;k x0 y0 x1 y1;...]
 *
 * role is `train` or `test`, paths are relative to the manifest's directory
 * (absolute paths are kept as-is), and each ground-truth item is a class
 * index followed by an inclusive box.
 */
#pragma once

#include "anoseg/bbox.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace anoseg {

enum class Role { Train, Test };

std::string_view to_string(Role role);

struct GroundTruth {
    BBox box;
    int class_label = 0;

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct ManifestEntry {
    std::string image_path;
    Role role = Role::Train;
    std::vector<GroundTruth> ground_truth;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::vector<std::string> class_names;
    std::vector<ManifestEntry> entries;
    /// Directory relative paths resolve against; not serialised.
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const ManifestEntry& entry) const;
    std::vector<const ManifestEntry*> with_role(Role role) const;

    /// Structural equality (ignores base_dir).
    bool same_content(const DatasetManifest& other) const {
        return class_names == other.class_names && entries == other.entries;
    }
};

/// Parses manifest text. Validates everything except file existence.
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});

/// Loads and validates a manifest. With @p check_files, every image must exist.
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);

std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Checks the structural invariants (unique paths, class range, box validity).
void validate_manifest(const DatasetManifest& manifest);

} // namespace anoseg
