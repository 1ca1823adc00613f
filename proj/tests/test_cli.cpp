// Drives the anoseg executable end to end through its command line.

#include "anoseg/config.hpp"
#include "anoseg/detections.hpp"
#include "anoseg/image.hpp"
#include "anoseg/manifest.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace anoseg;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::map<std::string, double> read_kv(const fs::path& p) {
    std::map<std::string, double> out;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) out[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
    }
    return out;
}

int count_lines(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) n += line.empty() ? 0 : 1;
    return n;
}

class Cli : public ::testing::Test {
protected:
    static inline fs::path root;
    static inline fs::path config;
    static inline fs::path data;
    static inline fs::path model;

    static int run(const std::string& args) {
        const std::string cmd = std::string(ANOSEG_CLI_PATH) + " " + args + " > " + (root / "last.log").string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    static std::string common() { return "--config " + config.string() + " "; }

    static void SetUpTestSuite() {
        root = fs::temp_directory_path() / ("anoseg_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        config = root / "run.cfg";
        std::ofstream(config) << "patch_size = 32\nepochs = 2\nmax_patches = 16\nclassifier_epochs = 2\nworkers = 1\n";
        data = root / "data";
        ASSERT_EQ(run("synth " + common() + "--count 3 --test-count 4 --size 64 --out " + data.string()), 0);
        ASSERT_EQ(run("train " + common() + "--out " + (root / "train").string() + " " + (data / "manifest.txt").string()), 0);
        model = root / "train" / "model.anw";
        ASSERT_TRUE(fs::exists(model));
    }

    static void TearDownTestSuite() { fs::remove_all(root); }
};

} // namespace

TEST_F(Cli, MissingManifestIsAUsageError) {
    EXPECT_EQ(run("train " + common() + (root / "absent.txt").string()), 2);
    EXPECT_EQ(run("segment " + common()), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, InvalidConfigIsAUsageError) {
    const fs::path bad = root / "bad.cfg";
    std::ofstream(bad) << "sigma = -1\n";
    EXPECT_EQ(run("train --config " + bad.string() + " " + (data / "manifest.txt").string()), 2);
}

TEST_F(Cli, CorruptModelIsARuntimeError) {
    const fs::path junk = root / "junk.anw";
    std::ofstream(junk) << "not a weights file";
    EXPECT_EQ(run("segment " + common() + "--model " + junk.string() + " --out " + (root / "x").string() + " " +
                  (data / "manifest.txt").string()),
              1);
}

TEST_F(Cli, TrainingIsReproducibleAndRecordsConfig) {
    const fs::path again = root / "train2";
    ASSERT_EQ(run("train " + common() + "--out " + again.string() + " " + (data / "manifest.txt").string()), 0);
    EXPECT_EQ(read_file(again / "model.anw"), read_file(model));
    EXPECT_EQ(read_file(again / "history.csv"), read_file(root / "train" / "history.csv"));
    EXPECT_EQ(count_lines(again / "history.csv"), 3);
    EXPECT_EQ(load_config(again / "config.resolved"), load_config(config));
}

TEST_F(Cli, SegmentWritesOverlaysOfInputSize) {
    const fs::path out = root / "seg";
    ASSERT_EQ(run("segment " + common() + "--model " + model.string() + " --out " + out.string() + " " +
                  (data / "manifest.txt").string()),
              0);
    const DatasetManifest m = load_manifest(data / "manifest.txt");
    const DetectionsFile det = load_detections(out / "detections.txt");
    EXPECT_EQ(det.scans.size(), m.with_role(Role::Test).size());
    for (const ManifestEntry* e : m.with_role(Role::Test)) {
        std::string name = e->image_path;
        std::replace(name.begin(), name.end(), '/', '_');
        name = fs::path(name).replace_extension(".png").string();
        const Image overlay = load_image(out / "overlays" / name);
        const Image scan = load_image(m.resolve(*e));
        EXPECT_EQ(overlay.height(), scan.height());
        EXPECT_EQ(overlay.width(), scan.width());
        EXPECT_EQ(overlay.channels(), 3);
    }
}

TEST_F(Cli, EmptyTestSetGivesEmptyDetections) {
    const fs::path only_train = root / "only_train";
    ASSERT_EQ(run("synth " + common() + "--count 2 --test-count 0 --size 32 --out " + only_train.string()), 0);
    const fs::path out = root / "seg_empty";
    ASSERT_EQ(run("segment " + common() + "--model " + model.string() + " --out " + out.string() + " " +
                  (only_train / "manifest.txt").string()),
              0);
    EXPECT_TRUE(load_detections(out / "detections.txt").scans.empty());
}

TEST_F(Cli, EvaluateGroundTruthAndNothing) {
    const DatasetManifest m = load_manifest(data / "manifest.txt");
    DetectionsFile exact;
    DetectionsFile nothing;
    exact.class_names = m.class_names;
    for (const ManifestEntry* e : m.with_role(Role::Test)) {
        ScanDetections s{e->image_path, {}};
        for (const GroundTruth& g : e->ground_truth) s.boxes.push_back({g.box, 1.0, g.class_label});
        exact.scans.push_back(s);
        nothing.scans.push_back({e->image_path, {}});
    }
    write_detections(root / "exact.txt", exact);
    write_detections(root / "nothing.txt", nothing);

    ASSERT_EQ(run("evaluate " + common() + "--out " + (root / "ev1").string() + " " + (root / "exact.txt").string() + " " +
                  (data / "manifest.txt").string()),
              0);
    const auto kv = read_kv(root / "ev1" / "report.kv");
    EXPECT_DOUBLE_EQ(kv.at("map"), 1.0);
    EXPECT_DOUBLE_EQ(kv.at("f1"), 1.0);

    ASSERT_EQ(run("evaluate " + common() + "--out " + (root / "ev2").string() + " " + (root / "nothing.txt").string() + " " +
                  (data / "manifest.txt").string()),
              0);
    EXPECT_EQ(read_kv(root / "ev2" / "report.kv").at("recall"), 0.0);
}

TEST_F(Cli, StylizeIdentityAndSensitivity) {
    const DatasetManifest m = load_manifest(data / "manifest.txt");
    const fs::path scan = m.resolve(*m.with_role(Role::Test).front());
    const fs::path reference = m.resolve(*m.with_role(Role::Train).front());
    const fs::path black = root / "black.png";
    save_image(black, Image(64, 64, 1, 0.0));

    ASSERT_EQ(run("stylize " + common() + scan.string() + " " + black.string() + " " + (root / "id.png").string()), 0);
    const Image in = load_image(scan, true);
    const Image id = load_image(root / "id.png", true);
    ASSERT_EQ(id.data().size(), in.data().size());
    for (std::size_t i = 0; i < in.data().size(); ++i) ASSERT_LE(std::abs(id.data()[i] - in.data()[i]), 1.0 / 255.0 + 1e-12);

    const fs::path sharp = root / "sigma50.cfg";
    std::ofstream(sharp) << "sigma = 50\n";
    ASSERT_EQ(run("stylize " + common() + scan.string() + " " + reference.string() + " " + (root / "s5.png").string()), 0);
    ASSERT_EQ(run("stylize --config " + sharp.string() + " " + scan.string() + " " + reference.string() + " " +
                  (root / "s50.png").string()),
              0);
    ASSERT_EQ(run("stylize " + common() + "--fda " + scan.string() + " " + reference.string() + " " +
                  (root / "fda.png").string()),
              0);
    const Image s5 = load_image(root / "s5.png", true);
    EXPECT_FALSE(s5 == load_image(root / "s50.png", true));
    EXPECT_FALSE(s5 == load_image(root / "fda.png", true));
}

TEST_F(Cli, SweepWritesOneRowPerValue) {
    const std::string tail = " --model " + model.string() + " " + (data / "manifest.txt").string();
    ASSERT_EQ(run("sweep " + common() + "--axis sigma --values 5,10,25,50 --out " + (root / "sw1").string() + tail), 0);
    EXPECT_EQ(count_lines(root / "sw1" / "sweep.txt"), 5);
    ASSERT_EQ(run("sweep " + common() + "--axis clusters --values 3 --out " + (root / "sw2").string() + tail), 0);
    EXPECT_EQ(count_lines(root / "sw2" / "sweep.txt"), 2);
    EXPECT_EQ(run("sweep " + common() + "--axis depth --values 3 --out " + (root / "sw3").string() + tail), 2);
}

TEST_F(Cli, ClassifierTrainAndLabel) {
    const fs::path patches = root / "patches";
    ASSERT_EQ(run("synth " + common() + "--kind patches --count 6 --size 32 --out " + patches.string()), 0);
    EXPECT_NE(run("classify " + common() + "--model " + (root / "absent.anw").string() + " " +
                  (patches / "manifest.txt").string()),
              0);
    ASSERT_EQ(run("classify-train " + common() + "--out " + (root / "ct").string() + " " +
                  (patches / "manifest.txt").string()),
              0);
    ASSERT_EQ(run("classify " + common() + "--model " + (root / "ct" / "classifier.anw").string() + " --out " +
                  (root / "cl").string() + " " + (patches / "manifest.txt").string()),
              0);
    const DatasetManifest m = load_manifest(patches / "manifest.txt");
    std::istringstream in(read_file(root / "cl" / "labels.txt"));
    std::string header;
    std::getline(in, header);
    int predicted = 0;
    int truth = 0;
    int rows = 0;
    while (in >> predicted >> truth) {
        EXPECT_GE(predicted, 0);
        EXPECT_LT(predicted, static_cast<int>(m.class_names.size()));
        ++rows;
    }
    EXPECT_EQ(rows, static_cast<int>(m.with_role(Role::Test).size()));
}
