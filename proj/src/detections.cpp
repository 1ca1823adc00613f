#include "anoseg/detections.hpp"

#include "anoseg/error.hpp"
#include "text_util.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace anoseg {

namespace {

template <class T>
T parse_number(std::string_view token, int line_no) {
    T value{};
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw IoError("detections line " + std::to_string(line_no) + ": bad number '" + std::string(token) + "'");
    }
    return value;
}

// 3x5 glyphs for 0-9, one row per 3-bit group, MSB on the left.
constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigits = {{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
}};

constexpr std::array<Rgb, 6> kPalette = {{
    {1.0, 0.1, 0.1}, {0.1, 0.9, 0.1}, {0.2, 0.4, 1.0}, {1.0, 0.8, 0.0}, {0.9, 0.1, 0.9}, {0.0, 0.9, 0.9},
}};

void put(Image& image, int y, int x, const Rgb& colour) {
    if (y < 0 || x < 0 || y >= image.height() || x >= image.width()) return;
    for (int c = 0; c < 3; ++c) image.at(c, y, x) = colour[static_cast<std::size_t>(c)];
}

} // namespace

DetectionsFile parse_detections(std::string_view input) {
    DetectionsFile file;
    int line_no = 0;
    for (auto raw : text::split(input, '\n')) {
        ++line_no;
        const auto line = text::trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            constexpr std::string_view header = "#classes:";
            if (line.starts_with(header)) {
                file.class_names.clear();
                const auto names = text::trim(line.substr(header.size()));
                if (!names.empty()) {
                    for (auto n : text::split(names, ',')) file.class_names.emplace_back(text::trim(n));
                }
            }
            continue;
        }
        const auto fields = text::split(line, '\t');
        if (fields.size() < 2 || fields.size() > 3) {
            throw IoError("detections line " + std::to_string(line_no) + ": expected role<TAB>path[<TAB>boxes]");
        }
        if (text::trim(fields[0]) != "test" && text::trim(fields[0]) != "train") {
            throw IoError("detections line " + std::to_string(line_no) + ": unknown role '" + std::string(fields[0]) + "'");
        }
        ScanDetections scan;
        scan.image_path = std::string(text::trim(fields[1]));
        if (scan.image_path.empty()) throw IoError("detections line " + std::to_string(line_no) + ": empty path");
        if (fields.size() == 3) {
            for (auto item : text::split(fields[2], ';')) {
                const auto tok = text::tokens(item);
                if (tok.empty()) continue;
                if (tok.size() != 6) {
                    throw IoError("detections line " + std::to_string(line_no) + ": item needs 'k x0 y0 x1 y1 score'");
                }
                ScoredBox b;
                b.class_label = parse_number<int>(tok[0], line_no);
                b.box = {parse_number<int>(tok[1], line_no), parse_number<int>(tok[2], line_no),
                         parse_number<int>(tok[3], line_no), parse_number<int>(tok[4], line_no)};
                b.score = parse_number<double>(tok[5], line_no);
                if (!b.box.valid()) throw IoError("detections line " + std::to_string(line_no) + ": inverted box");
                if (b.class_label < -1) throw IoError("detections line " + std::to_string(line_no) + ": bad class index");
                if (!std::isfinite(b.score)) throw IoError("detections line " + std::to_string(line_no) + ": bad score");
                scan.boxes.push_back(b);
            }
        }
        file.scans.push_back(std::move(scan));
    }
    return file;
}

DetectionsFile load_detections(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open detections file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_detections(buf.str());
}

std::string format_detections(const DetectionsFile& file) {
    std::ostringstream out;
    out << "#classes: ";
    for (std::size_t i = 0; i < file.class_names.size(); ++i) out << (i ? "," : "") << file.class_names[i];
    out << '\n';
    char score[32];
    for (const ScanDetections& scan : file.scans) {
        out << "test\t" << scan.image_path;
        if (!scan.boxes.empty()) {
            out << '\t';
            for (std::size_t i = 0; i < scan.boxes.size(); ++i) {
                const ScoredBox& b = scan.boxes[i];
                std::snprintf(score, sizeof score, "%.6f", b.score);
                out << (i ? ";" : "") << b.class_label << ' ' << b.box.x0 << ' ' << b.box.y0 << ' ' << b.box.x1 << ' '
                    << b.box.y1 << ' ' << score;
            }
        }
        out << '\n';
    }
    return out.str();
}

void write_detections(const std::filesystem::path& path, const DetectionsFile& file) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write detections file " + path.string());
    out << format_detections(file);
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<ImageRecord> join_with_manifest(const DetectionsFile& detections, const DatasetManifest& manifest) {
    std::map<std::string, const ScanDetections*> by_path;
    for (const ScanDetections& s : detections.scans) {
        if (!by_path.emplace(s.image_path, &s).second) throw IoError("detections list " + s.image_path + " twice");
    }
    std::vector<ImageRecord> records;
    for (const ManifestEntry* entry : manifest.with_role(Role::Test)) {
        ImageRecord rec;
        rec.ground_truth = entry->ground_truth;
        if (auto it = by_path.find(entry->image_path); it != by_path.end()) {
            rec.predictions = it->second->boxes;
            by_path.erase(it);
        }
        records.push_back(std::move(rec));
    }
    if (!by_path.empty()) {
        throw IoError("detections reference " + by_path.begin()->first + ", which is not a test entry of the manifest");
    }
    return records;
}

void draw_box(Image& image, const BBox& box, const Rgb& colour) {
    if (image.channels() != 3) throw ShapeError("draw_box needs an RGB image");
    for (int x = box.x0; x <= box.x1; ++x) {
        put(image, box.y0, x, colour);
        put(image, box.y1, x, colour);
    }
    for (int y = box.y0; y <= box.y1; ++y) {
        put(image, y, box.x0, colour);
        put(image, y, box.x1, colour);
    }
}

void draw_number(Image& image, int x, int y, int value, const Rgb& colour, int scale) {
    if (image.channels() != 3) throw ShapeError("draw_number needs an RGB image");
    if (value < 0) throw ConfigError("draw_number draws non-negative values only");
    const std::string digits = std::to_string(value);
    for (std::size_t d = 0; d < digits.size(); ++d) {
        const auto& glyph = kDigits[static_cast<std::size_t>(digits[d] - '0')];
        const int ox = x + static_cast<int>(d) * 4 * scale;
        for (int row = 0; row < 5; ++row) {
            for (int col = 0; col < 3; ++col) {
                if (((glyph[static_cast<std::size_t>(row)] >> (2 - col)) & 1) == 0) continue;
                for (int sy = 0; sy < scale; ++sy) {
                    for (int sx = 0; sx < scale; ++sx) put(image, y + row * scale + sy, ox + col * scale + sx, colour);
                }
            }
        }
    }
}

Image render_overlay(const Image& scan, std::span<const ScoredBox> boxes) {
    Image out = to_rgb(scan);
    for (const ScoredBox& b : boxes) {
        const std::size_t slot = b.class_label < 0 ? 0 : static_cast<std::size_t>(b.class_label + 1) % kPalette.size();
        draw_box(out, b.box, kPalette[slot]);
        if (b.class_label >= 0) {
            const int ty = b.box.y0 >= 6 ? b.box.y0 - 6 : b.box.y1 + 2;
            draw_number(out, b.box.x0, ty, b.class_label, kPalette[slot]);
        }
    }
    return out;
}

} // namespace anoseg
