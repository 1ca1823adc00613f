#include "anoseg/config.hpp"
#include "anoseg/error.hpp"
#include "anoseg/metrics.hpp"
#include "anoseg/nn/training.hpp"
#include "anoseg/synthetic.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace anoseg;
using namespace anoseg::nn;

namespace {

std::vector<Image> normal_patches(int count, int patch_size) {
    SyntheticSpec spec;
    spec.count = (count * patch_size * patch_size + 128 * 128 - 1) / (128 * 128);
    spec.test_count = 0;
    spec.seed = 21;
    std::vector<Image> out;
    for (const SyntheticSample& s : render_synthetic(spec)) {
        for (Image& p : decompose_patches(s.image, patch_size).patches) {
            if (static_cast<int>(out.size()) < count) out.push_back(std::move(p));
        }
    }
    return out;
}

ReconstructorConfig small_config(int epochs) {
    ReconstructorConfig cfg;
    cfg.patch_size = 32;
    cfg.epochs = epochs;
    cfg.seed = 3;
    return cfg;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST(Reconstructor, ZeroEpochsReturnsInitialisation) {
    const auto patches = normal_patches(8, 32);
    ReconstructorConfig cfg = small_config(0);
    const TrainingResult r = train_reconstructor(patches, FeatureExtractor::identity(), cfg);
    EXPECT_TRUE(r.net == build_reconstructor(3, cfg.seed));
    EXPECT_TRUE(r.loss_history.empty());
}

TEST(Reconstructor, ConvergesAndIsReproducible) {
    const auto patches = normal_patches(200, 32);
    ASSERT_EQ(patches.size(), 200u);
    const FeatureExtractor extractor = FeatureExtractor::builtin(3, 7);
    const Network frozen = extractor.network();
    const ReconstructorConfig cfg = small_config(30);

    int callbacks = 0;
    const TrainingResult a = train_reconstructor(patches, extractor, cfg, [&](int epoch, double loss) {
        EXPECT_EQ(epoch, callbacks++);
        EXPECT_GE(loss, 0.0);
    });
    ASSERT_EQ(a.loss_history.size(), 30u);
    EXPECT_EQ(callbacks, 30);
    EXPECT_LE(a.loss_history.back(), 0.5 * a.loss_history.front());
    EXPECT_TRUE(extractor.network() == frozen);

    const TrainingResult b = train_reconstructor(patches, extractor, cfg);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_TRUE(a.net == b.net);
}

TEST(Reconstructor, RejectsBadInput) {
    EXPECT_THROW(train_reconstructor({}, FeatureExtractor::identity(), small_config(1)), ConfigError);
    const std::vector<Image> wrong_size{Image(16, 16, 3)};
    EXPECT_ANY_THROW(train_reconstructor(wrong_size, FeatureExtractor::identity(), small_config(1)));
    ReconstructorConfig bad = small_config(1);
    bad.patch_size = 12;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Reconstructor, BiasCalibrationZeroesMeanResidual) {
    const auto patches = normal_patches(20, 32);
    Network net = build_reconstructor(3, 5);
    const auto first = calibrate_output_bias(net, patches);
    ASSERT_EQ(first.size(), 3u);
    EXPECT_GT(std::abs(first[0]), 1e-6);
    const auto second = calibrate_output_bias(net, patches);
    for (double o : second) EXPECT_NEAR(o, 0.0, 1e-12);

    Network classifier = build_classifier(2, 32, 3, 1);
    EXPECT_THROW(calibrate_output_bias(classifier, patches), ShapeError);
}

TEST(Reconstructor, ReconstructKeepsScanShape) {
    const Network net = build_reconstructor(3, 2);
    const Image scan(70, 45, 3, 0.4);
    const Image out = reconstruct(net, scan, 16);
    EXPECT_EQ(out.height(), 70);
    EXPECT_EQ(out.width(), 45);
    for (double v : out.data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Reconstructor, CollectsSeededSubsetOfTrainPatches) {
    TempDir dir("anoseg_collect_test");
    SyntheticSpec spec;
    spec.count = 4;
    spec.test_count = 2;
    spec.height = 64;
    spec.width = 64;
    const DatasetManifest m = generate_synthetic(spec, dir.path);

    const auto all = collect_training_patches(m, 32, 1000, 1);
    EXPECT_EQ(all.size(), 16u);
    const auto subset = collect_training_patches(m, 32, 5, 1);
    ASSERT_EQ(subset.size(), 5u);
    EXPECT_EQ(collect_training_patches(m, 32, 5, 1).size(), 5u);
    std::size_t cursor = 0;
    for (const Image& p : subset) {
        while (cursor < all.size() && !(all[cursor] == p)) ++cursor;
        ASSERT_LT(cursor, all.size()) << "subset is not an ordered selection of the full set";
        ++cursor;
    }
    const auto again = collect_training_patches(m, 32, 5, 1);
    for (std::size_t i = 0; i < subset.size(); ++i) EXPECT_TRUE(again[i] == subset[i]);
}

TEST(Classifier, SeparatesTwoClasses) {
    PatchClassSpec spec;
    spec.classes = 2;
    spec.per_class = 50;
    const auto data = render_patch_classes(spec);
    std::vector<Image> images;
    std::vector<int> labels;
    for (const LabeledPatch& p : data) {
        images.push_back(p.image);
        labels.push_back(p.label);
    }
    ClassifierConfig cfg = parse_config("").classifier();
    EXPECT_DOUBLE_EQ(cfg.learning_rate, 1e-4);

    cfg.epochs = 0;
    const ClassifierResult untrained = train_classifier(images, labels, 2, cfg);
    const double chance = classification_accuracy(predict_labels(untrained.net, images, cfg.input_size), labels);
    EXPECT_NEAR(chance, 0.5, 0.15);

    cfg.epochs = 30;
    const ClassifierResult trained = train_classifier(images, labels, 2, cfg);
    EXPECT_EQ(trained.accuracy_history.size(), 30u);
    EXPECT_GE(classification_accuracy(predict_labels(trained.net, images, cfg.input_size), labels), 0.95);

    const Tensor probs = predict_probabilities(trained.net, images, cfg.input_size);
    for (int i = 0; i < probs.shape().n; ++i) {
        double sum = 0.0;
        for (double p : probs.sample(i)) sum += p;
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(Classifier, RejectsSingleClassInput) {
    const std::vector<Image> images(4, Image(32, 32, 3, 0.5));
    const std::vector<int> labels(4, 1);
    EXPECT_THROW(train_classifier(images, labels, 2, ClassifierConfig{}), ConfigError);
}
