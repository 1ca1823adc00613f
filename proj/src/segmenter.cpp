#include "anoseg/segmenter.hpp"

#include "anoseg/error.hpp"
#include "anoseg/nn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace anoseg {

namespace {

double dist2(const Point3& a, const Point3& b) {
    const double d0 = a[0] - b[0];
    const double d1 = a[1] - b[1];
    const double d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

double norm(const Point3& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }

int nearest(const Point3& p, const std::vector<Point3>& centroids, double* best_d2 = nullptr) {
    int best = 0;
    double best_d = dist2(p, centroids[0]);
    for (int k = 1; k < static_cast<int>(centroids.size()); ++k) {
        const double d = dist2(p, centroids[static_cast<std::size_t>(k)]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    if (best_d2 != nullptr) *best_d2 = best_d;
    return best;
}

std::vector<Point3> kmeanspp_seed(std::span<const Point3> points, int clusters, std::mt19937_64& rng) {
    std::vector<Point3> centroids;
    centroids.reserve(static_cast<std::size_t>(clusters));
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    centroids.push_back(points[pick(rng)]);
    std::vector<double> d2(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) d2[i] = dist2(points[i], centroids[0]);
    while (static_cast<int>(centroids.size()) < clusters) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t chosen = 0;
        if (total > 0.0) {
            const double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            double acc = 0.0;
            chosen = points.size() - 1;
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc += d2[i];
                if (acc > r && d2[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centroids.push_back(points[chosen]);
        for (std::size_t i = 0; i < points.size(); ++i) d2[i] = std::min(d2[i], dist2(points[i], centroids.back()));
    }
    return centroids;
}

std::vector<Point3> disparity_points(const Image& disparity, int stride) {
    std::vector<Point3> pts;
    pts.reserve(static_cast<std::size_t>((disparity.height() + stride - 1) / stride) *
                static_cast<std::size_t>((disparity.width() + stride - 1) / stride));
    for (int y = 0; y < disparity.height(); y += stride) {
        for (int x = 0; x < disparity.width(); x += stride) {
            pts.push_back({disparity.at(0, y, x), disparity.at(1, y, x), disparity.at(2, y, x)});
        }
    }
    return pts;
}

} // namespace

Image disparity_map(const Image& stylized, const Image& reconstructed) {
    if (!stylized.same_shape(reconstructed)) throw ShapeError("disparity: stylized and reconstructed scans differ in shape");
    if (stylized.channels() != 3) throw ShapeError("disparity: expected 3-channel scans");
    Image out(stylized.height(), stylized.width(), 3);
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = stylized.data()[i] - reconstructed.data()[i];
    return out;
}

KMeansResult kmeans(std::span<const Point3> points, int clusters, std::uint64_t seed, int max_iter) {
    if (clusters < 1) throw ConfigError("k-means needs at least one cluster");
    if (max_iter < 1) throw ConfigError("k-means max_iter must be at least 1");
    if (points.size() < static_cast<std::size_t>(clusters)) {
        throw ConfigError("k-means: " + std::to_string(points.size()) + " points for " + std::to_string(clusters) +
                          " clusters");
    }

    std::mt19937_64 rng(seed);
    KMeansResult r;
    r.clusters = clusters;
    r.centroids = kmeanspp_seed(points, clusters, rng);
    r.labels.assign(points.size(), -1);
    std::vector<double> d2(points.size());

    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        double wcss = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const int k = nearest(points[i], r.centroids, &d2[i]);
            if (k != r.labels[i]) {
                r.labels[i] = k;
                changed = true;
            }
            wcss += d2[i];
        }
        r.wcss = wcss;
        r.wcss_history.push_back(wcss);
        r.iterations = iter + 1;
        if (!changed) break;

        std::vector<Point3> sums(static_cast<std::size_t>(clusters), Point3{0, 0, 0});
        std::vector<std::size_t> counts(static_cast<std::size_t>(clusters), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto k = static_cast<std::size_t>(r.labels[i]);
            for (int c = 0; c < 3; ++c) sums[k][static_cast<std::size_t>(c)] += points[i][static_cast<std::size_t>(c)];
            ++counts[k];
        }
        for (std::size_t k = 0; k < sums.size(); ++k) {
            if (counts[k] > 0) {
                for (int c = 0; c < 3; ++c) {
                    r.centroids[k][static_cast<std::size_t>(c)] = sums[k][static_cast<std::size_t>(c)] / static_cast<double>(counts[k]);
                }
                continue;
            }
            // Empty cluster: take the point worst served by its current centroid.
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (d2[i] > far_d) {
                    far_d = d2[i];
                    far = i;
                }
            }
            if (far_d > 0.0) {
                r.centroids[k] = points[far];
                d2[far] = 0.0;
            }
        }
    }
    return r;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::ranges::count_if(bits, [](std::uint8_t b) { return b != 0; }));
}

ClusterSelection select_anomalous_clusters(const Image& disparity, const KMeansResult& km, double noise_ratio) {
    if (disparity.channels() != 3) throw ShapeError("cluster selection expects a 3-channel disparity map");
    const std::size_t n = static_cast<std::size_t>(disparity.height()) * disparity.width();
    if (km.labels.size() != n) throw ShapeError("k-means labels do not cover the disparity map");

    ClusterSelection sel;
    sel.mask = BinaryMask(disparity.height(), disparity.width());
    sel.score.resize(n);
    const auto r = disparity.plane(0);
    const auto g = disparity.plane(1);
    const auto b = disparity.plane(2);
    for (std::size_t i = 0; i < n; ++i) sel.score[i] = std::sqrt(r[i] * r[i] + g[i] * g[i] + b[i] * b[i]) / std::sqrt(3.0);

    std::vector<double> norms;
    for (const Point3& c : km.centroids) norms.push_back(norm(c));
    sel.background = static_cast<int>(std::ranges::min_element(norms) - norms.begin());

    std::vector<bool> anomalous(norms.size(), true);
    anomalous[static_cast<std::size_t>(sel.background)] = false;
    if (noise_ratio > 0.0) {
        std::vector<double> s = sel.score;
        auto mid = s.begin() + static_cast<std::ptrdiff_t>(s.size() / 2);
        std::nth_element(s.begin(), mid, s.end());
        const double floor = noise_ratio * (*mid) * std::sqrt(3.0);
        for (std::size_t k = 0; k < norms.size(); ++k) {
            if (norms[k] < floor) anomalous[k] = false;
        }
    }
    for (std::size_t i = 0; i < n; ++i) sel.mask.bits[i] = anomalous[static_cast<std::size_t>(km.labels[i])] ? 1 : 0;
    return sel;
}

std::vector<std::array<int, 2>> disk_offsets(int radius) {
    if (radius < 0) throw ConfigError("structuring element radius must be non-negative");
    std::vector<std::array<int, 2>> out;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dy * dy + dx * dx <= radius * radius) out.push_back({dy, dx});
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
    const auto se = disk_offsets(radius);
    BinaryMask out(mask.height, mask.width);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(y, x)) continue;
            bool keep = true;
            for (const auto& [dy, dx] : se) {
                const int yy = y + dy;
                const int xx = x + dx;
                if (yy < 0 || yy >= mask.height || xx < 0 || xx >= mask.width || !mask.at(yy, xx)) {
                    keep = false;
                    break;
                }
            }
            if (keep) out.set(y, x);
        }
    }
    return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    const auto se = disk_offsets(radius);
    BinaryMask out(mask.height, mask.width);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(y, x)) continue;
            for (const auto& [dy, dx] : se) {
                const int yy = y + dy;
                const int xx = x + dx;
                if (yy >= 0 && yy < mask.height && xx >= 0 && xx < mask.width) out.set(yy, xx);
            }
        }
    }
    return out;
}

BinaryMask opening(const BinaryMask& mask, int radius) { return dilate(erode(mask, radius), radius); }

std::vector<InstanceMask> connected_components(const BinaryMask& mask) {
    const int h = mask.height;
    const int w = mask.width;
    std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
    std::vector<int> parent;
    auto find = [&](int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[static_cast<std::size_t>(b)] = a;
        else parent[static_cast<std::size_t>(a)] = b;
    };

    // First pass: provisional labels from the already-visited neighbours.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            int current = -1;
            const int nbr[4][2] = {{y, x - 1}, {y - 1, x - 1}, {y - 1, x}, {y - 1, x + 1}};
            for (const auto& [ny, nx] : nbr) {
                if (ny < 0 || nx < 0 || nx >= w) continue;
                const int l = label[static_cast<std::size_t>(ny) * w + nx];
                if (l < 0) continue;
                if (current < 0) current = l;
                else unite(current, l);
            }
            if (current < 0) {
                current = static_cast<int>(parent.size());
                parent.push_back(current);
            }
            label[static_cast<std::size_t>(y) * w + x] = current;
        }
    }

    // Second pass: resolve roots and renumber by first raster appearance.
    std::vector<int> root_to_id(parent.size(), -1);
    std::vector<InstanceMask> out;
    for (int i = 0; i < h * w; ++i) {
        if (label[static_cast<std::size_t>(i)] < 0) continue;
        const int root = find(label[static_cast<std::size_t>(i)]);
        int& id = root_to_id[static_cast<std::size_t>(root)];
        if (id < 0) {
            id = static_cast<int>(out.size());
            out.push_back(InstanceMask{id, {}, w});
        }
        out[static_cast<std::size_t>(id)].pixels.push_back(i);
    }
    return out;
}

BinaryMask morphological_cleanup(const BinaryMask& mask, int opening_radius, int min_area) {
    if (min_area < 1) throw ConfigError("min_area must be at least 1");
    BinaryMask opened = opening(mask, opening_radius);
    for (const InstanceMask& inst : connected_components(opened)) {
        if (inst.area() >= min_area) continue;
        for (int p : inst.pixels) opened.bits[static_cast<std::size_t>(p)] = 0;
    }
    return opened;
}

BBox fit_bbox(const InstanceMask& instance) {
    if (instance.pixels.empty() || instance.width < 1) throw ShapeError("cannot fit a box to an empty mask");
    BBox box{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1};
    for (int p : instance.pixels) {
        const int y = p / instance.width;
        const int x = p % instance.width;
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x);
        box.y1 = std::max(box.y1, y);
    }
    return box;
}

void SegmenterConfig::validate() const {
    if (clusters < 2) throw ConfigError("clusters must be at least 2");
    if (min_area < 0) throw ConfigError("min_area must be positive (or 0 for automatic)");
    if (opening_radius < 0) throw ConfigError("opening_radius must be non-negative");
    if (max_iter < 1) throw ConfigError("k-means max_iter must be at least 1");
    if (!(noise_ratio >= 0.0) || !std::isfinite(noise_ratio)) throw ConfigError("noise_ratio must be non-negative");
    if (max_cluster_pixels < clusters) throw ConfigError("max_cluster_pixels must be at least the cluster count");
}

int SegmenterConfig::resolved_min_area(int height, int width) const {
    if (min_area > 0) return min_area;
    const double area = 0.0005 * static_cast<double>(height) * static_cast<double>(width);
    return std::max(1, static_cast<int>(std::lround(area)));
}

std::vector<Detection> detect_instances(const Image& disparity, const SegmenterConfig& cfg) {
    cfg.validate();
    if (disparity.channels() != 3) throw ShapeError("detect_instances expects a 3-channel disparity map");
    const int h = disparity.height();
    const int w = disparity.width();
    const auto total = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);

    // Large maps are clustered on a strided subsample, then fully assigned.
    int stride = 1;
    while (static_cast<std::size_t>((h + stride - 1) / stride) * static_cast<std::size_t>((w + stride - 1) / stride) >
           static_cast<std::size_t>(cfg.max_cluster_pixels)) {
        ++stride;
    }
    KMeansResult km = kmeans(disparity_points(disparity, stride), cfg.clusters, cfg.seed, cfg.max_iter);
    if (stride > 1) {
        const std::vector<Point3> all = disparity_points(disparity, 1);
        km.labels.resize(total);
        for (std::size_t i = 0; i < total; ++i) km.labels[i] = nearest(all[i], km.centroids);
    }

    const ClusterSelection sel = select_anomalous_clusters(disparity, km, cfg.noise_ratio);
    const BinaryMask clean = morphological_cleanup(sel.mask, cfg.opening_radius, cfg.resolved_min_area(h, w));

    std::vector<Detection> out;
    for (InstanceMask& inst : connected_components(clean)) {
        Detection d;
        d.box = fit_bbox(inst);
        double sum = 0.0;
        for (int p : inst.pixels) sum += sel.score[static_cast<std::size_t>(p)];
        d.score = std::clamp(sum / inst.area(), 0.0, 1.0);
        d.mask = std::move(inst);
        out.push_back(std::move(d));
    }
    return out;
}

Image apply_style(const Image& scan, const Image& reference, const StyleSettings& style) {
    const Image rgb = to_rgb(scan);
    switch (style.method) {
        case StyleMethod::Gwfs: return spectral::stylize_gwfs(rgb, to_rgb(reference), style.sigma);
        case StyleMethod::Fda: return spectral::stylize_fda(rgb, to_rgb(reference), style.beta);
        case StyleMethod::None: return rgb;
    }
    return rgb;
}

SegmentResult segment_scan(const Image& scan, const nn::Network& model, const Image& reference,
                           const StyleSettings& style, int patch_size, const SegmenterConfig& cfg) {
    SegmentResult r;
    r.stylized = apply_style(scan, reference, style);
    r.reconstructed = nn::reconstruct(model, r.stylized, patch_size);
    r.disparity = disparity_map(r.stylized, r.reconstructed);
    r.detections = detect_instances(r.disparity, cfg);
    return r;
}

} // namespace anoseg
