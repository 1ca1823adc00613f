#include "anoseg/manifest.hpp"

#include "anoseg/error.hpp"
#include "text_util.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace anoseg {

namespace {

using text::split;
using text::trim;

int parse_int(std::string_view token, int line_no) {
    int value = 0;
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw IoError("manifest line " + std::to_string(line_no) + ": expected integer, got '" + std::string(token) +
                      "'");
    }
    return value;
}

GroundTruth parse_item(std::string_view item, int line_no) {
    std::vector<std::string_view> tokens;
    for (auto tok : split(trim(item), ' ')) {
        if (!tok.empty()) tokens.push_back(tok);
    }
    if (tokens.size() != 5) {
        throw IoError("manifest line " + std::to_string(line_no) + ": ground-truth item needs 'k x0 y0 x1 y1'");
    }
    GroundTruth gt;
    gt.class_label = parse_int(tokens[0], line_no);
    gt.box = {parse_int(tokens[1], line_no), parse_int(tokens[2], line_no), parse_int(tokens[3], line_no),
              parse_int(tokens[4], line_no)};
    return gt;
}

} // namespace

std::string_view to_string(Role role) { return role == Role::Train ? "train" : "test"; }

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
    std::filesystem::path p(entry.image_path);
    return p.is_absolute() ? p : base_dir / p;
}

std::vector<const ManifestEntry*> DatasetManifest::with_role(Role role) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries) {
        if (e.role == role) out.push_back(&e);
    }
    return out;
}

void validate_manifest(const DatasetManifest& manifest) {
    std::set<std::string> seen;
    for (const auto& entry : manifest.entries) {
        if (entry.image_path.empty()) throw IoError("manifest entry with empty path");
        if (!seen.insert(entry.image_path).second) throw IoError("duplicate manifest path: " + entry.image_path);
        for (const auto& gt : entry.ground_truth) {
            if (gt.class_label < 0 || gt.class_label >= static_cast<int>(manifest.class_names.size())) {
                throw IoError("class index " + std::to_string(gt.class_label) + " out of range for " +
                              entry.image_path);
            }
            if (!gt.box.valid() || gt.box.x0 < 0 || gt.box.y0 < 0) {
                throw IoError("invalid bounding box for " + entry.image_path);
            }
        }
    }
}

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    DatasetManifest manifest;
    manifest.base_dir = base_dir;

    int line_no = 0;
    for (auto raw_line : split(text, '\n')) {
        ++line_no;
        if (!raw_line.empty() && raw_line.back() == '\r') raw_line.remove_suffix(1);
        const auto line = trim(raw_line);
        if (line.empty()) continue;
        if (line.front() == '#') {
            constexpr std::string_view header = "#classes:";
            if (line.starts_with(header)) {
                manifest.class_names.clear();
                const auto names = trim(line.substr(header.size()));
                if (!names.empty()) {
                    for (auto name : split(names, ',')) manifest.class_names.emplace_back(trim(name));
                }
            }
            continue;
        }

        const auto fields = split(raw_line, '\t');
        if (fields.size() < 2 || fields.size() > 3) {
            throw IoError("manifest line " + std::to_string(line_no) + ": expected role<TAB>path[<TAB>boxes]");
        }
        ManifestEntry entry;
        const auto role = trim(fields[0]);
        if (role == "train") entry.role = Role::Train;
        else if (role == "test") entry.role = Role::Test;
        else throw IoError("manifest line " + std::to_string(line_no) + ": unknown role '" + std::string(role) + "'");

        entry.image_path = std::string(trim(fields[1]));
        if (fields.size() == 3) {
            for (auto item : split(fields[2], ';')) {
                if (trim(item).empty()) continue;
                entry.ground_truth.push_back(parse_item(item, line_no));
            }
        }
        manifest.entries.push_back(std::move(entry));
    }
    validate_manifest(manifest);
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();

    DatasetManifest manifest = parse_manifest(buffer.str(), path.parent_path());
    if (check_files) {
        for (const auto& entry : manifest.entries) {
            if (!std::filesystem::exists(manifest.resolve(entry))) {
                throw IoError("manifest references missing image " + manifest.resolve(entry).string());
            }
        }
    }
    return manifest;
}

std::string format_manifest(const DatasetManifest& manifest) {
    std::ostringstream out;
    out << "#classes: ";
    for (std::size_t i = 0; i < manifest.class_names.size(); ++i) {
        out << (i ? "," : "") << manifest.class_names[i];
    }
    out << '\n';
    for (const auto& entry : manifest.entries) {
        out << to_string(entry.role) << '\t' << entry.image_path;
        if (!entry.ground_truth.empty()) {
            out << '\t';
            for (std::size_t i = 0; i < entry.ground_truth.size(); ++i) {
                const auto& gt = entry.ground_truth[i];
                out << (i ? ";" : "") << gt.class_label << ' ' << gt.box.x0 << ' ' << gt.box.y0 << ' ' << gt.box.x1
                    << ' ' << gt.box.y1;
            }
        }
        out << '\n';
    }
    return out.str();
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    validate_manifest(manifest);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << format_manifest(manifest);
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace anoseg
