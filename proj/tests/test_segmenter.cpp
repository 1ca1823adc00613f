#include "oracles.hpp"

#include "anoseg/error.hpp"
#include "anoseg/segmenter.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace anoseg;

namespace {

std::vector<Point3> pixels_of(const Image& d) {
    std::vector<Point3> pts(d.plane_size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {d.plane(0)[i], d.plane(1)[i], d.plane(2)[i]};
    return pts;
}

double dist2(const Point3& a, const Point3& b) {
    return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]);
}

BinaryMask random_mask(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int h = 5 + static_cast<int>(rng() % 36);
    const int w = 5 + static_cast<int>(rng() % 36);
    const double density = std::uniform_real_distribution<double>(0.1, 0.7)(rng);
    BinaryMask m(h, w);
    std::bernoulli_distribution on(density);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) m.set(y, x, on(rng));
    }
    return m;
}

Image block_disparity(double value) {
    Image d(64, 64, 3, 0.0);
    for (int c = 0; c < 3; ++c) {
        for (int y = 20; y < 40; ++y) {
            for (int x = 10; x < 30; ++x) d.at(c, y, x) = value;
        }
    }
    return d;
}

} // namespace

TEST(Disparity, Basics) {
    const Image a(8, 8, 3, 0.8);
    const Image b(8, 8, 3, 0.3);
    for (double v : disparity_map(a, a).data()) EXPECT_EQ(v, 0.0);
    for (double v : disparity_map(a, b).data()) EXPECT_NEAR(v, 0.5, 1e-15);

    const Image r1(6, 5, 3, oracle::uniform(90, 0, 1, 1));
    const Image r2(6, 5, 3, oracle::uniform(90, 0, 1, 2));
    const Image d12 = disparity_map(r1, r2);
    const Image d21 = disparity_map(r2, r1);
    for (std::size_t i = 0; i < d12.data().size(); ++i) EXPECT_EQ(d12.data()[i], -d21.data()[i]);
    EXPECT_THROW(disparity_map(a, Image(8, 7, 3)), ShapeError);
}

TEST(KMeans, AsManyClustersAsPoints) {
    const auto v = oracle::uniform(30, -1, 1, 3);
    std::vector<Point3> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({v[3 * i], v[3 * i + 1], v[3 * i + 2]});
    const KMeansResult km = kmeans(pts, 10, 1);
    EXPECT_EQ(km.wcss, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(km.centroids[static_cast<std::size_t>(km.labels[i])], pts[i]);
}

TEST(KMeans, IdenticalPointsSingleCluster) {
    const std::vector<Point3> pts(50, Point3{0.2, -0.1, 0.4});
    const KMeansResult km = kmeans(pts, 1, 1);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(km.centroids[0][c], pts[0][c], 1e-15);
    EXPECT_NEAR(km.wcss, 0.0, 1e-25);
}

TEST(KMeans, SeparatesTwoBlobs) {
    const auto noise = oracle::uniform(600, -0.01, 0.01, 4);
    std::vector<Point3> pts;
    for (int i = 0; i < 200; ++i) {
        const double base = i % 2 == 0 ? 0.0 : 1.0;
        pts.push_back({base + noise[3 * i], base + noise[3 * i + 1], base + noise[3 * i + 2]});
    }
    const KMeansResult km = kmeans(pts, 2, 7);
    for (int i = 0; i < 200; ++i) EXPECT_EQ(km.labels[static_cast<std::size_t>(i)] == km.labels[0], i % 2 == 0);
}

TEST(KMeans, WcssNeverIncreasesAndLabelsAreNearest) {
    for (std::uint64_t run = 0; run < 100; ++run) {
        std::mt19937_64 rng(run);
        const int n = 20 + static_cast<int>(rng() % 300);
        const int c = 2 + static_cast<int>(rng() % 5);
        const auto v = oracle::uniform(static_cast<std::size_t>(3 * n), -1, 1, run + 1000);
        std::vector<Point3> pts;
        for (int i = 0; i < n; ++i) pts.push_back({v[3 * i], v[3 * i + 1] * 0.3, v[3 * i + 2] * 2});
        const KMeansResult km = kmeans(pts, c, run);
        ASSERT_FALSE(km.wcss_history.empty());
        for (std::size_t i = 1; i < km.wcss_history.size(); ++i) {
            ASSERT_LE(km.wcss_history[i], km.wcss_history[i - 1] * (1 + 1e-12)) << "run " << run;
        }
        ASSERT_LT(km.iterations, 100);
        for (int i = 0; i < n; ++i) {
            const double mine = dist2(pts[i], km.centroids[static_cast<std::size_t>(km.labels[i])]);
            for (const Point3& other : km.centroids) ASSERT_LE(mine, dist2(pts[i], other) + 1e-12);
        }
    }
}

TEST(KMeans, DeterministicForSeed) {
    const auto v = oracle::uniform(300, -1, 1, 5);
    std::vector<Point3> pts;
    for (int i = 0; i < 100; ++i) pts.push_back({v[3 * i], v[3 * i + 1], v[3 * i + 2]});
    const KMeansResult a = kmeans(pts, 4, 3);
    const KMeansResult b = kmeans(pts, 4, 3);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_THROW(kmeans(pts, 0, 1), ConfigError);
    EXPECT_THROW(kmeans(pts, 101, 1), ConfigError);
}

TEST(ClusterSelection, DegenerateZeroDisparity) {
    const Image d(32, 32, 3, 0.0);
    const KMeansResult km = kmeans(pixels_of(d), 2, 1);
    const ClusterSelection sel = select_anomalous_clusters(d, km);
    EXPECT_EQ(sel.background, 0);
    EXPECT_TRUE(morphological_cleanup(sel.mask, 2, 10).empty());
}

TEST(ClusterSelection, BlockIsSelected) {
    const Image d = block_disparity(0.6);
    const ClusterSelection sel = select_anomalous_clusters(d, kmeans(pixels_of(d), 2, 1));
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) EXPECT_EQ(sel.mask.at(y, x), y >= 20 && y < 40 && x >= 10 && x < 30);
    }
}

TEST(ClusterSelection, ScalingLeavesSelectionUnchanged) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Image d(32, 40, 3, oracle::uniform(32 * 40 * 3, -0.1, 0.1, seed));
        for (int c = 0; c < 3; ++c) {
            for (int y = 5; y < 15; ++y) {
                for (int x = 5; x < 20; ++x) d.at(c, y, x) += 0.5;
            }
        }
        Image scaled = d;
        for (double& v : scaled.data()) v *= 2.0;
        for (double ratio : {0.0, 6.0}) {
            const auto a = select_anomalous_clusters(d, kmeans(pixels_of(d), 4, seed), ratio);
            const auto b = select_anomalous_clusters(scaled, kmeans(pixels_of(scaled), 4, seed), ratio);
            EXPECT_EQ(a.mask, b.mask) << "seed " << seed << " ratio " << ratio;
        }
    }
}

TEST(Morphology, ErodeAndDilateMatchDirectEvaluation) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const BinaryMask m = random_mask(seed);
        const int r = static_cast<int>(seed % 4);
        ASSERT_EQ(erode(m, r), oracle::erode(m, r)) << seed;
        ASSERT_EQ(dilate(m, r), oracle::dilate(m, r)) << seed;
        ASSERT_EQ(opening(m, r), oracle::dilate(oracle::erode(m, r), r)) << seed;
    }
}

TEST(Morphology, OpeningIsAntiExtensive) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const BinaryMask m = random_mask(seed + 500);
        const BinaryMask out = morphological_cleanup(m, 1 + static_cast<int>(seed % 3), 1 + static_cast<int>(seed % 7));
        for (std::size_t i = 0; i < m.bits.size(); ++i) ASSERT_LE(out.bits[i], m.bits[i]);
    }
}

TEST(Morphology, CleanupExamples) {
    EXPECT_TRUE(morphological_cleanup(BinaryMask(10, 10), 2, 1).empty());

    BinaryMask single(15, 15);
    single.set(7, 7);
    EXPECT_TRUE(morphological_cleanup(single, 0, 20).empty());
    EXPECT_TRUE(morphological_cleanup(single, 2, 1).empty());

    // A disk element rounds a square's corners by the pixels it cannot reach.
    BinaryMask square(40, 40);
    for (int y = 5; y < 35; ++y) {
        for (int x = 5; x < 35; ++x) square.set(y, x);
    }
    const BinaryMask out = morphological_cleanup(square, 2, 1);
    EXPECT_EQ(out, oracle::dilate(oracle::erode(square, 2), 2));
    for (int y = 7; y < 33; ++y) {
        for (int x = 5; x < 35; ++x) EXPECT_TRUE(out.at(y, x) && out.at(x, y));
    }
    EXPECT_EQ(out.count(), 900u - 4 * 3);
    EXPECT_THROW(morphological_cleanup(square, 2, 0), ConfigError);
}

TEST(Components, Examples) {
    EXPECT_TRUE(connected_components(BinaryMask(6, 6)).empty());

    BinaryMask full(7, 9);
    std::ranges::fill(full.bits, 1);
    const auto comps = connected_components(full);
    ASSERT_EQ(comps.size(), 1u);
    EXPECT_EQ(comps[0].area(), 63);

    BinaryMask diag(4, 4);
    diag.set(1, 1);
    diag.set(2, 2);
    EXPECT_EQ(connected_components(diag).size(), 1u);
}

TEST(Components, MatchFloodFillAndPartitionTheMask) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const BinaryMask m = random_mask(seed + 100);
        const auto comps = connected_components(m);
        const auto expected = oracle::flood_fill_components(m);
        ASSERT_EQ(comps.size(), expected.size()) << seed;
        std::vector<int> owner(m.bits.size(), -1);
        for (std::size_t k = 0; k < comps.size(); ++k) {
            ASSERT_EQ(comps[k].pixels, expected[k]) << seed;
            for (int p : comps[k].pixels) {
                ASSERT_EQ(owner[static_cast<std::size_t>(p)], -1);
                owner[static_cast<std::size_t>(p)] = static_cast<int>(k);
            }
        }
        for (std::size_t i = 0; i < m.bits.size(); ++i) ASSERT_EQ(owner[i] >= 0, m.bits[i] != 0);
    }
}

TEST(BoundingBox, Examples) {
    const InstanceMask single{0, {3 * 10 + 4}, 10};
    EXPECT_EQ(fit_bbox(single), (BBox{4, 3, 4, 3}));

    BinaryMask rect(12, 12);
    for (int y = 2; y <= 6; ++y) {
        for (int x = 3; x <= 9; ++x) rect.set(y, x);
    }
    EXPECT_EQ(fit_bbox(connected_components(rect)[0]), (BBox{3, 2, 9, 6}));

    BinaryMask ell(12, 12);
    for (int y = 2; y <= 10; ++y) ell.set(y, 3);
    for (int x = 3; x <= 8; ++x) ell.set(10, x);
    EXPECT_EQ(fit_bbox(connected_components(ell)[0]), (BBox{3, 2, 8, 10}));
}

TEST(BoundingBox, IsMinimal) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const BinaryMask m = random_mask(seed + 200);
        for (const InstanceMask& inst : connected_components(m)) {
            const BBox b = fit_bbox(inst);
            bool top = false, bottom = false, left = false, right = false;
            for (int p : inst.pixels) {
                const int y = p / inst.width;
                const int x = p % inst.width;
                ASSERT_TRUE(x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1);
                top |= y == b.y0;
                bottom |= y == b.y1;
                left |= x == b.x0;
                right |= x == b.x1;
            }
            ASSERT_TRUE(top && bottom && left && right) << seed;
        }
    }
}

TEST(Detection, FindsBlockAndIsDeterministic) {
    Image d = block_disparity(0.6);
    const auto noise = oracle::uniform(d.data().size(), -0.02, 0.02, 9);
    for (std::size_t i = 0; i < noise.size(); ++i) d.data()[i] += noise[i];
    SegmenterConfig cfg;
    const auto dets = detect_instances(d, cfg);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].box, (BBox{10, 20, 29, 39}));
    EXPECT_GT(dets[0].score, 0.0);
    EXPECT_LE(dets[0].score, 1.0);

    const auto again = detect_instances(d, cfg);
    ASSERT_EQ(again.size(), dets.size());
    EXPECT_EQ(again[0].box, dets[0].box);
    EXPECT_EQ(again[0].score, dets[0].score);
}

TEST(Detection, ConfigValidation) {
    SegmenterConfig cfg;
    EXPECT_EQ(cfg.resolved_min_area(100, 100), 5);
    EXPECT_EQ(cfg.resolved_min_area(10, 10), 1);
    cfg.clusters = 1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.clusters = 4;
    cfg.noise_ratio = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SegmentScan, DeterministicEndToEnd) {
    const nn::Network model = nn::build_reconstructor(3, 1);
    Image scan(64, 64, 3, oracle::uniform(64 * 64 * 3, 0.4, 0.6, 3));
    const Image ref(64, 64, 3, 0.5);
    const SegmentResult a = segment_scan(scan, model, ref, {}, 32, {});
    const SegmentResult b = segment_scan(scan, model, ref, {}, 32, {});
    EXPECT_EQ(a.disparity, b.disparity);
    ASSERT_EQ(a.detections.size(), b.detections.size());
    for (std::size_t i = 0; i < a.detections.size(); ++i) EXPECT_EQ(a.detections[i].box, b.detections[i].box);
    EXPECT_TRUE(a.stylized.same_shape(scan));
    EXPECT_TRUE(a.reconstructed.same_shape(scan));
}

TEST(SegmentScan, StyleMethods) {
    const Image scan(32, 32, 1, 0.4);
    const Image ref(16, 16, 3, 0.6);
    EXPECT_EQ(apply_style(scan, ref, {StyleMethod::None}), to_rgb(scan));
    EXPECT_EQ(apply_style(scan, ref, {StyleMethod::Gwfs}).channels(), 3);
    EXPECT_NE(apply_style(scan, ref, {StyleMethod::Fda, 5.0, 2.0}), apply_style(scan, ref, {StyleMethod::Gwfs}));
}
