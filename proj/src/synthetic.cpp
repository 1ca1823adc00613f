#include "anoseg/synthetic.hpp"

#include "anoseg/error.hpp"
#include "anoseg/seed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace anoseg {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::vector<double> blob_field(int h, int w, std::mt19937_64& rng) {
    std::vector<double> field(static_cast<std::size_t>(h) * w, 0.0);
    const int blobs = 10 + static_cast<int>(h * w / 1024);
    for (int b = 0; b < blobs; ++b) {
        const double cy = uniform(rng, -0.1 * h, 1.1 * h);
        const double cx = uniform(rng, -0.1 * w, 1.1 * w);
        const double s = uniform(rng, 6.0, 18.0);
        const double amp = uniform(rng, -1.0, 1.0);
        const double inv = 1.0 / (2 * s * s);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
                field[static_cast<std::size_t>(y) * w + x] += amp * std::exp(-d2 * inv);
            }
        }
    }
    return field;
}

std::vector<double> gradient_noise_field(int h, int w, std::mt19937_64& rng) {
    constexpr int cell = 16;
    const int gh = h / cell + 2;
    const int gw = w / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
    for (double& v : lattice) v = uniform(rng, -1.0, 1.0);
    const double angle = uniform(rng, 0.0, 2 * std::numbers::pi);
    const double slope = uniform(rng, 0.5, 1.5);

    std::vector<double> field(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double fy = static_cast<double>(y) / cell;
            const double fx = static_cast<double>(x) / cell;
            const int iy = static_cast<int>(fy);
            const int ix = static_cast<int>(fx);
            // smoothstep interpolation of the value lattice
            auto smooth = [](double t) { return t * t * (3 - 2 * t); };
            const double ty = smooth(fy - iy);
            const double tx = smooth(fx - ix);
            auto at = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * gw + xx]; };
            const double top = at(iy, ix) * (1 - tx) + at(iy, ix + 1) * tx;
            const double bottom = at(iy + 1, ix) * (1 - tx) + at(iy + 1, ix + 1) * tx;
            const double ramp = slope * ((x - w / 2.0) * std::cos(angle) + (y - h / 2.0) * std::sin(angle)) / w;
            field[static_cast<std::size_t>(y) * w + x] = top * (1 - ty) + bottom * ty + ramp;
        }
    }
    return field;
}

void normalise(std::vector<double>& field) {
    double mean = 0;
    for (double v : field) mean += v;
    mean /= static_cast<double>(field.size());
    double var = 0;
    for (double v : field) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(field.size()));
    for (double& v : field) v = sd > 0 ? (v - mean) / sd : 0.0;
}

Image render_background(const SyntheticSpec& spec, std::mt19937_64& rng) {
    std::vector<double> field = spec.background_model == BackgroundModel::TexturedBlobs
                                    ? blob_field(spec.height, spec.width, rng)
                                    : gradient_noise_field(spec.height, spec.width, rng);
    normalise(field);

    // Pseudo-colour: channels share the texture with slightly different responses.
    static constexpr double gains[3] = {1.0, 0.9, 0.8};
    static constexpr double biases[3] = {0.0, 0.05, 0.1};
    Image img(spec.height, spec.width, 3);
    for (int c = 0; c < 3; ++c) {
        auto plane = img.plane(c);
        for (std::size_t i = 0; i < plane.size(); ++i) {
            const double base = spec.background_mean + spec.texture_std * field[i];
            plane[i] = gains[c] * base + biases[c] * (1 - base);
        }
    }
    return img;
}

bool inside_polygon(const std::vector<std::pair<double, double>>& poly, double x, double y) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto [xi, yi] = poly[i];
        const auto [xj, yj] = poly[j];
        if (((yi > y) != (yj > y)) && (x < (xj - xi) * (y - yi) / (yj - yi) + xi)) inside = !inside;
    }
    return inside;
}

void apply_style(Image& img, const ScannerStyle& style) {
    if (style.gain == 1.0 && style.offset == 0.0) return;
    for (double& v : img.data()) v = style.gain * v + style.offset;
}

std::string numbered(const char* prefix, int i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d.png", prefix, i);
    return buf;
}

} // namespace

void SyntheticSpec::validate() const {
    if (count < 1) throw ConfigError("synthetic count must be >= 1");
    if (test_count < 0) throw ConfigError("synthetic test_count must be >= 0");
    if (height < 16 || width < 16) throw ConfigError("synthetic images must be at least 16x16");
    if (texture_std < 0) throw ConfigError("texture_std must be >= 0");
    if (max_anomalies < 1) throw ConfigError("max_anomalies must be >= 1");
    if (!anomaly_shapes.empty() && std::abs(anomaly_intensity_shift) < 3 * texture_std) {
        throw ConfigError("anomaly intensity shift must be at least 3x the background texture std");
    }
}

BBox draw_shape(Image& image, AnomalyShape shape, double cx, double cy, double radius, double angle, double shift,
                std::uint64_t seed) {
    const int h = image.height();
    const int w = image.width();
    std::vector<std::pair<double, double>> poly;
    if (shape == AnomalyShape::Polygon) {
        std::mt19937_64 rng(seed);
        const int vertices = 6 + static_cast<int>(rng() % 3);
        std::vector<double> angles;
        for (int i = 0; i < vertices; ++i) {
            const double jitter = uniform(rng, -0.2, 0.2);
            angles.push_back(angle + (i + 0.5 + jitter) * 2 * std::numbers::pi / vertices);
        }
        for (double a : angles) {
            const double r = radius * uniform(rng, 0.85, 1.0);
            poly.emplace_back(cx + r * std::cos(a), cy + r * std::sin(a));
        }
    }
    // Bars stay within 15 degrees of an axis so they fill most of their box.
    const double quarter = angle / (std::numbers::pi / 2);
    const double bar_angle = std::floor(quarter) * std::numbers::pi / 2 + (quarter - std::floor(quarter) - 0.5) * std::numbers::pi / 6;
    const double half_len = radius;
    const double half_width = std::max(3.0, 0.5 * radius);
    const double ca = std::cos(bar_angle);
    const double sa = std::sin(bar_angle);

    auto covered = [&](int x, int y) {
        const double dx = x - cx;
        const double dy = y - cy;
        switch (shape) {
            case AnomalyShape::Disk: return dx * dx + dy * dy <= radius * radius;
            case AnomalyShape::Bar: {
                const double along = dx * ca + dy * sa;
                const double across = -dx * sa + dy * ca;
                return std::abs(along) <= half_len && std::abs(across) <= half_width;
            }
            case AnomalyShape::Polygon: return inside_polygon(poly, x, y);
        }
        return false;
    };

    BBox box{w, h, -1, -1};
    const int r = static_cast<int>(std::ceil(radius)) + 1;
    for (int y = std::max(0, static_cast<int>(cy) - r); y <= std::min(h - 1, static_cast<int>(cy) + r); ++y) {
        for (int x = std::max(0, static_cast<int>(cx) - r); x <= std::min(w - 1, static_cast<int>(cx) + r); ++x) {
            if (!covered(x, y)) continue;
            for (int c = 0; c < image.channels(); ++c) image.at(c, y, x) += shift;
            box.x0 = std::min(box.x0, x);
            box.y0 = std::min(box.y0, y);
            box.x1 = std::max(box.x1, x);
            box.y1 = std::max(box.y1, y);
        }
    }
    if (!box.valid()) throw ShapeError("shape does not intersect the image");
    return box;
}

SyntheticSample render_scene(const SyntheticSpec& spec, std::uint64_t scene_seed,
                             const std::vector<AnomalyShape>& shapes) {
    std::mt19937_64 rng(scene_seed);
    SyntheticSample sample;
    sample.image = render_background(spec, rng);

    struct Placed {
        double x, y, r;
    };
    std::vector<Placed> placed;
    double background_mean = 0.0;
    for (double v : sample.image.plane(0)) background_mean += v;
    background_mean /= static_cast<double>(sample.image.plane_size());
    const double max_radius = std::min(14.0, std::min(spec.height, spec.width) / 6.0);
    const double min_radius = std::min(8.0, max_radius);
    for (std::size_t k = 0; k < shapes.size(); ++k) {
        // Rejection-sample a centre that keeps shapes apart and inside the frame.
        for (int attempt = 0; attempt < 200; ++attempt) {
            const double r = uniform(rng, min_radius, max_radius);
            const double margin = r + 2;
            const double x = uniform(rng, margin, spec.width - 1 - margin);
            const double y = uniform(rng, margin, spec.height - 1 - margin);
            const bool clear = std::ranges::all_of(placed, [&](const Placed& p) {
                return std::hypot(p.x - x, p.y - y) > p.r + r + 8;
            });
            if (!clear) continue;
            const double angle = uniform(rng, 0.0, std::numbers::pi);
            const std::uint64_t shape_seed = rng();
            Image trial = sample.image;
            const BBox box = draw_shape(trial, shapes[k], std::round(x), std::round(y), r, angle,
                                        spec.anomaly_intensity_shift, shape_seed);
            // Keep only placements whose box stands out from the scene average,
            // so a texture blob cannot hide the anomaly.
            double box_mean = 0.0;
            for (int yy = box.y0; yy <= box.y1; ++yy) {
                for (int xx = box.x0; xx <= box.x1; ++xx) box_mean += trial.at(0, yy, xx);
            }
            box_mean /= static_cast<double>(box.area());
            if (std::abs(box_mean - background_mean) < 0.6 * std::abs(spec.anomaly_intensity_shift)) continue;
            sample.image = std::move(trial);
            sample.ground_truth.push_back({box, static_cast<int>(shapes[k])});
            placed.push_back({x, y, r});
            break;
        }
    }
    apply_style(sample.image, spec.style);
    sample.image = quantize_8bit(sample.image);
    return sample;
}

std::vector<SyntheticSample> render_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::vector<SyntheticSample> samples;
    for (int i = 0; i < spec.count; ++i) {
        SyntheticSample s = render_scene(spec, mix_seed(spec.seed, 0, i), {});
        s.role = Role::Train;
        s.name = "train/" + numbered("normal", i);
        samples.push_back(std::move(s));
    }
    for (int i = 0; i < spec.test_count; ++i) {
        const std::uint64_t scene_seed = mix_seed(spec.seed, 1, i);
        std::vector<AnomalyShape> shapes;
        const bool abnormal = !spec.anomaly_shapes.empty() && i % 2 == 0;
        if (abnormal) {
            std::mt19937_64 pick(mix_seed(spec.seed, 2, i));
            const int n = 1 + static_cast<int>(pick() % spec.max_anomalies);
            for (int k = 0; k < n; ++k) shapes.push_back(spec.anomaly_shapes[pick() % spec.anomaly_shapes.size()]);
        }
        SyntheticSample s = render_scene(spec, scene_seed, shapes);
        s.role = Role::Test;
        s.name = "test/" + numbered(abnormal ? "abnormal" : "normal", i);
        samples.push_back(std::move(s));
    }
    return samples;
}

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
    const auto samples = render_synthetic(spec);
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "train", ec);
    std::filesystem::create_directories(out_dir / "test", ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    DatasetManifest manifest;
    manifest.class_names = {"disk", "bar", "polygon"};
    manifest.base_dir = out_dir;
    for (const auto& s : samples) {
        save_image(out_dir / s.name, s.image);
        manifest.entries.push_back({s.name, s.role, s.ground_truth});
    }
    write_manifest(out_dir / "manifest.txt", manifest);
    return manifest;
}

std::vector<LabeledPatch> render_patch_classes(const PatchClassSpec& spec) {
    if (spec.classes < 2) throw ConfigError("need at least two patch classes");
    if (spec.per_class < 1) throw ConfigError("per_class must be >= 1");
    if (spec.size < 16) throw ConfigError("patch size must be >= 16");

    std::vector<LabeledPatch> out;
    const int s = spec.size;
    for (int k = 0; k < spec.classes; ++k) {
        // Colour signature per class; the first four are fixed, further classes are seeded.
        std::array<double, 3> tint{};
        static constexpr std::array<std::array<double, 3>, 4> base{{
            {0.35, -0.15, -0.15}, {-0.15, 0.35, -0.15}, {-0.15, -0.15, 0.35}, {-0.3, -0.3, -0.3}}};
        if (k < 4) {
            tint = base[k];
        } else {
            std::mt19937_64 trng(mix_seed(spec.seed, 99, k));
            for (double& t : tint) t = uniform(trng, -0.35, 0.35);
        }
        for (int i = 0; i < spec.per_class; ++i) {
            std::mt19937_64 rng(mix_seed(spec.seed, k, i));
            Image img(s, s, 3);
            const double level = uniform(rng, 0.4, 0.6);
            std::normal_distribution<double> grain(0.0, 0.03);
            for (double& v : img.data()) v = level + grain(rng);

            const double cx = s / 2.0 + uniform(rng, -s / 8.0, s / 8.0);
            const double cy = s / 2.0 + uniform(rng, -s / 8.0, s / 8.0);
            const double radius = s * uniform(rng, 0.22, 0.3);
            const auto shape = static_cast<AnomalyShape>(k % 3);
            const double angle = k % 3 == 1 ? (k / 3 % 2) * std::numbers::pi / 2 : uniform(rng, 0.0, std::numbers::pi);
            Image mask(s, s, 1);
            draw_shape(mask, shape, std::round(cx), std::round(cy), radius, angle, 1.0, rng());
            for (int c = 0; c < 3; ++c) {
                for (std::size_t p = 0; p < img.plane_size(); ++p) img.plane(c)[p] += tint[c] * mask.plane(0)[p];
            }
            out.push_back({quantize_8bit(img), k});
        }
    }
    return out;
}

DatasetManifest generate_patch_classes(const PatchClassSpec& spec, const std::filesystem::path& out_dir,
                                       double train_fraction) {
    const auto patches = render_patch_classes(spec);
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "patches", ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    DatasetManifest manifest;
    manifest.base_dir = out_dir;
    for (int k = 0; k < spec.classes; ++k) manifest.class_names.push_back("class" + std::to_string(k));
    const int n_train = static_cast<int>(std::round(train_fraction * spec.per_class));
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const int index_in_class = static_cast<int>(i) % spec.per_class;
        const std::string name = "patches/" + numbered(("c" + std::to_string(patches[i].label)).c_str(), index_in_class);
        save_image(out_dir / name, patches[i].image);
        const Role role = index_in_class < n_train ? Role::Train : Role::Test;
        manifest.entries.push_back({name, role, {{BBox{0, 0, spec.size - 1, spec.size - 1}, patches[i].label}}});
    }
    write_manifest(out_dir / "manifest.txt", manifest);
    return manifest;
}

} // namespace anoseg
