#include "anoseg/commands.hpp"

#include "anoseg/error.hpp"
#include "anoseg/parallel.hpp"
#include "anoseg/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

namespace anoseg {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

void prepare_run_dir(const CommonOptions& opts, const PipelineConfig& cfg) {
    fs::create_directories(opts.out);
    write_text(opts.out / "config.resolved", format_config(cfg));
}

std::string overlay_name(const std::string& image_path) {
    std::string name = fs::path(image_path).replace_extension().string();
    std::ranges::replace(name, '/', '_');
    std::ranges::replace(name, '\\', '_');
    return name + ".png";
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Side length the classifier was built for, recovered from its dense layer.
int classifier_input_size(const nn::Network& net) {
    for (const nn::Layer& layer : net.layers()) {
        if (const auto* fc = std::get_if<nn::FullyConnected>(&layer)) {
            const int side = static_cast<int>(std::lround(std::sqrt(fc->in_features / 64.0)));
            if (side < 1 || 64 * side * side != fc->in_features) break;
            return side * 8;
        }
    }
    throw IoError("model is not a classifier produced by classify-train");
}

Image crop_box(const Image& scan, const BBox& box) {
    const BBox clipped{std::max(0, box.x0), std::max(0, box.y0), std::min(scan.width() - 1, box.x1),
                       std::min(scan.height() - 1, box.y1)};
    if (!clipped.valid()) throw ShapeError("box lies outside the scan");
    return crop(scan, clipped.x0, clipped.y0, clipped.x1, clipped.y1);
}

struct LabelledCrops {
    std::vector<Image> patches;
    std::vector<int> labels;
};

LabelledCrops crops_for(const DatasetManifest& manifest, Role role) {
    LabelledCrops out;
    for (const ManifestEntry* entry : manifest.with_role(role)) {
        if (entry->ground_truth.empty()) continue;
        const Image scan = load_image(manifest.resolve(*entry), true);
        for (const GroundTruth& gt : entry->ground_truth) {
            out.patches.push_back(crop_box(scan, gt.box));
            out.labels.push_back(gt.class_label);
        }
    }
    return out;
}

void label_boxes(const nn::Network& classifier, const Image& stylized, std::vector<ScoredBox>& boxes) {
    if (boxes.empty()) return;
    std::vector<Image> crops;
    for (const ScoredBox& b : boxes) crops.push_back(crop_box(stylized, b.box));
    const std::vector<int> labels = nn::predict_labels(classifier, crops, classifier_input_size(classifier));
    for (std::size_t i = 0; i < boxes.size(); ++i) boxes[i].class_label = labels[i];
}

std::vector<ScoredBox> to_scored(const std::vector<Detection>& detections) {
    std::vector<ScoredBox> out;
    for (const Detection& d : detections) out.push_back({d.box, d.score, d.class_label});
    return out;
}

} // namespace

PipelineConfig effective_config(const CommonOptions& opts) {
    if (opts.config.empty()) throw ConfigError("--config is required");
    PipelineConfig cfg = load_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.workers) cfg.workers = *opts.workers;
    cfg.validate();
    return cfg;
}

Image select_reference(const PipelineConfig& cfg, const DatasetManifest& manifest) {
    if (!cfg.reference_image.empty()) return load_image(cfg.reference_image, true);
    const auto train = manifest.with_role(Role::Train);
    if (train.empty()) {
        throw ConfigError("no reference image: set reference_image or include a train entry in the manifest");
    }
    return load_image(manifest.resolve(*train.front()), true);
}

void cmd_train(const CommonOptions& opts, const fs::path& manifest_path, std::ostream& log) {
    const PipelineConfig cfg = effective_config(opts);
    const DatasetManifest manifest = load_manifest(manifest_path);
    if (manifest.with_role(Role::Train).empty()) throw ConfigError("manifest has no train entries");
    prepare_run_dir(opts, cfg);

    const auto start = std::chrono::steady_clock::now();
    const std::vector<Image> patches = nn::collect_training_patches(manifest, cfg.patch_size, cfg.max_patches, cfg.seed);
    log << "training on " << patches.size() << " patches of " << cfg.patch_size << "x" << cfg.patch_size << ", "
        << cfg.epochs << " epochs\n";
    const nn::FeatureExtractor extractor = cfg.make_feature_extractor();
    const nn::TrainingResult result = nn::train_reconstructor(
        patches, extractor, cfg.reconstructor(), [&](int epoch, double loss) {
            log << "epoch " << epoch + 1 << "/" << cfg.epochs << "  loss " << fixed(loss, 8) << "\n";
        });

    nn::save_weights(opts.out / "model.anw", result.net);
    std::string csv = "epoch,loss\n";
    for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
        char line[96];
        std::snprintf(line, sizeof line, "%zu,%.17g\n", i + 1, result.loss_history[i]);
        csv += line;
    }
    write_text(opts.out / "history.csv", csv);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log << "parameters: " << result.net.parameter_count() << "\n";
    log << "model written to " << (opts.out / "model.anw").string() << " (" << fixed(secs, 1) << " s)\n";
}

void cmd_stylize(const CommonOptions& opts, const fs::path& input, const fs::path& reference, const fs::path& output,
                 std::ostream& log) {
    const PipelineConfig cfg = effective_config(opts);
    const Image scan = load_image(input, true);
    const Image ref = load_image(reference, true);
    const Image styled = apply_style(scan, ref, cfg.style(opts.fda));
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    save_image(output, styled);
    log << (opts.fda ? "FDA (beta " + fixed(cfg.beta, 3) + ")" : "GW-FS (sigma " + fixed(cfg.sigma, 3) + ")")
        << " stylized image written to " << output.string() << "\n";
}

void cmd_segment(const CommonOptions& opts, const fs::path& model_path, const fs::path& manifest_path,
                 const std::optional<fs::path>& classifier_path, std::ostream& log) {
    const PipelineConfig cfg = effective_config(opts);
    const nn::Network model = nn::load_weights(model_path);
    std::optional<nn::Network> classifier;
    if (classifier_path) classifier = nn::load_weights(*classifier_path);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const auto tests = manifest.with_role(Role::Test);
    prepare_run_dir(opts, cfg);
    fs::create_directories(opts.out / "overlays");

    DetectionsFile file;
    file.class_names = manifest.class_names;
    file.scans.resize(tests.size());
    if (!tests.empty()) {
        const Image reference = select_reference(cfg, manifest);
        const StyleSettings style = cfg.style(opts.fda);
        const SegmenterConfig seg = cfg.segmenter();
        parallel_for(tests.size(), cfg.resolved_workers(), [&](std::size_t i) {
            const ManifestEntry& entry = *tests[i];
            const Image scan = load_image(manifest.resolve(entry), true);
            const SegmentResult r = segment_scan(scan, model, reference, style, cfg.patch_size, seg);
            std::vector<ScoredBox> boxes = to_scored(r.detections);
            if (classifier) label_boxes(*classifier, r.stylized, boxes);
            save_image(opts.out / "overlays" / overlay_name(entry.image_path), render_overlay(scan, boxes));
            file.scans[i] = {entry.image_path, std::move(boxes)};
        });
    }
    write_detections(opts.out / "detections.txt", file);
    std::size_t total = 0;
    std::size_t flagged = 0;
    for (const ScanDetections& s : file.scans) {
        total += s.boxes.size();
        flagged += s.boxes.empty() ? 0 : 1;
    }
    log << "segmented " << tests.size() << " scans: " << total << " detections in " << flagged << " scans\n";
}

void cmd_classify_train(const CommonOptions& opts, const fs::path& manifest_path, std::ostream& log) {
    const PipelineConfig cfg = effective_config(opts);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const LabelledCrops train = crops_for(manifest, Role::Train);
    if (train.patches.empty()) throw ConfigError("manifest has no labelled train entries");
    int n_classes = static_cast<int>(manifest.class_names.size());
    for (int l : train.labels) n_classes = std::max(n_classes, l + 1);
    prepare_run_dir(opts, cfg);

    const nn::ClassifierResult result = nn::train_classifier(
        train.patches, train.labels, n_classes, cfg.classifier(), [&](int epoch, double loss) {
            log << "epoch " << epoch + 1 << "/" << cfg.classifier_epochs << "  loss " << fixed(loss, 6) << "\n";
        });
    nn::save_weights(opts.out / "classifier.anw", result.net);

    std::string csv = "epoch,loss,train_accuracy\n";
    for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
        csv += std::to_string(i + 1) + "," + fixed(result.loss_history[i], 8) + "," + fixed(result.accuracy_history[i]) + "\n";
    }
    write_text(opts.out / "classifier_history.csv", csv);

    std::string report = "classes: " + std::to_string(n_classes) + "\n";
    report += "train patches: " + std::to_string(train.patches.size()) + "\n";
    const double train_acc =
        classification_accuracy(nn::predict_labels(result.net, train.patches, cfg.classifier_input), train.labels);
    report += "train accuracy: " + fixed(train_acc) + "\n";
    const LabelledCrops held = crops_for(manifest, Role::Test);
    if (!held.patches.empty()) {
        const double acc =
            classification_accuracy(nn::predict_labels(result.net, held.patches, cfg.classifier_input), held.labels);
        report += "held-out patches: " + std::to_string(held.patches.size()) + "\n";
        report += "held-out accuracy: " + fixed(acc) + "\n";
    }
    write_text(opts.out / "report.txt", report);
    log << report;
}

void cmd_classify(const CommonOptions& opts, const fs::path& model_path, const fs::path& manifest_path,
                  const std::optional<fs::path>& detections_path, std::ostream& log) {
    const PipelineConfig cfg = effective_config(opts);
    const nn::Network classifier = nn::load_weights(model_path);
    const int input_size = classifier_input_size(classifier);
    const DatasetManifest manifest = load_manifest(manifest_path);
    prepare_run_dir(opts, cfg);

    if (!detections_path) {
        const LabelledCrops held = crops_for(manifest, Role::Test);
        if (held.patches.empty()) throw ConfigError("manifest has no labelled test entries to classify");
        const std::vector<int> predicted = nn::predict_labels(classifier, held.patches, input_size);
        std::string lines = "# predicted\texpected\n";
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            lines += std::to_string(predicted[i]) + "\t" + std::to_string(held.labels[i]) + "\n";
        }
        write_text(opts.out / "labels.txt", lines);
        const std::string report = "patches: " + std::to_string(predicted.size()) +
                                   "\naccuracy: " + fixed(classification_accuracy(predicted, held.labels)) + "\n";
        write_text(opts.out / "report.txt", report);
        log << report;
        return;
    }

    DetectionsFile file = load_detections(*detections_path);
    if (file.class_names.empty()) file.class_names = manifest.class_names;
    std::map<std::string, const ManifestEntry*> entries;
    for (const ManifestEntry& e : manifest.entries) entries.emplace(e.image_path, &e);
    const Image reference = select_reference(cfg, manifest);
    const StyleSettings style = cfg.style(opts.fda);
    fs::create_directories(opts.out / "overlays");
    parallel_for(file.scans.size(), cfg.resolved_workers(), [&](std::size_t i) {
        ScanDetections& scan = file.scans[i];
        const auto it = entries.find(scan.image_path);
        if (it == entries.end()) throw IoError("detections reference " + scan.image_path + ", not in the manifest");
        const Image image = load_image(manifest.resolve(*it->second), true);
        label_boxes(classifier, apply_style(image, reference, style), scan.boxes);
        save_image(opts.out / "overlays" / overlay_name(scan.image_path), render_overlay(image, scan.boxes));
    });
    write_detections(opts.out / "detections.txt", file);
    std::size_t boxes = 0;
    for (const ScanDetections& s : file.scans) boxes += s.boxes.size();
    log << "labelled " << boxes << " detections in " << file.scans.size() << " scans\n";
}

void cmd_evaluate(const CommonOptions& opts, const fs::path& detections_path, const fs::path& manifest_path,
                  std::ostream& log) {
    const PipelineConfig cfg = effective_config(opts);
    const DetectionsFile detections = load_detections(detections_path);
    const DatasetManifest manifest = load_manifest(manifest_path, false);
    const std::vector<ImageRecord> records = join_with_manifest(detections, manifest);
    prepare_run_dir(opts, cfg);
    const MetricReport report = evaluate(records, cfg.iou_threshold);
    write_text(opts.out / "report.txt", report.to_text(manifest.class_names));
    write_text(opts.out / "report.kv", report.to_key_values());
    log << report.to_text(manifest.class_names);
}

std::vector<SweepRow> cmd_sweep(const CommonOptions& opts, const fs::path& model_path, const fs::path& manifest_path,
                                SweepAxis axis, const std::vector<double>& values,
                                const std::optional<fs::path>& targets_path, std::ostream& log) {
    const PipelineConfig cfg = effective_config(opts);
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    const nn::Network model = nn::load_weights(model_path);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const auto tests = manifest.with_role(Role::Test);
    if (tests.empty()) throw ConfigError("sweep needs test entries in the manifest");
    std::optional<DatasetManifest> targets;
    if (targets_path) {
        targets = load_manifest(*targets_path);
        if (targets->with_role(Role::Test).size() != tests.size()) {
            throw ConfigError("target manifest must list as many test entries as the input manifest");
        }
    }
    prepare_run_dir(opts, cfg);
    const Image reference = select_reference(cfg, manifest);

    std::vector<Image> scans(tests.size());
    parallel_for(tests.size(), cfg.resolved_workers(),
                 [&](std::size_t i) { scans[i] = load_image(manifest.resolve(*tests[i]), true); });

    std::vector<SweepRow> rows;
    std::string table;
    if (axis == SweepAxis::Sigma) {
        std::vector<Image> target_images = scans;
        if (targets) {
            const auto t = targets->with_role(Role::Test);
            for (std::size_t i = 0; i < t.size(); ++i) target_images[i] = load_image(targets->resolve(*t[i]), true);
        }
        table = "sigma\tMSE\n";
        for (double v : values) {
            if (!(v > 0.0)) throw ConfigError("sigma values must be positive");
            PipelineConfig c = cfg;
            c.sigma = v;
            std::vector<double> errors(scans.size());
            parallel_for(scans.size(), cfg.resolved_workers(), [&](std::size_t i) {
                const Image styled = apply_style(scans[i], reference, c.style(false));
                errors[i] = mse(nn::reconstruct(model, styled, cfg.patch_size), target_images[i]);
            });
            SweepRow row;
            row.value = v;
            for (double e : errors) row.mse += e / static_cast<double>(errors.size());
            rows.push_back(row);
            table += fixed(v, 3) + "\t" + fixed(row.mse, 4) + "\n";
            log << "sigma " << fixed(v, 3) << "  MSE " << fixed(row.mse, 4) << "\n";
        }
    } else {
        table = "clusters\tmAP\tF1\n";
        for (double v : values) {
            const int k = static_cast<int>(std::lround(v));
            if (k < 2 || std::abs(v - k) > 1e-9) throw ConfigError("cluster values must be integers >= 2");
            SegmenterConfig seg = cfg.segmenter();
            seg.clusters = k;
            std::vector<ImageRecord> records(scans.size());
            parallel_for(scans.size(), cfg.resolved_workers(), [&](std::size_t i) {
                const SegmentResult r = segment_scan(scans[i], model, reference, cfg.style(opts.fda), cfg.patch_size, seg);
                records[i] = {to_scored(r.detections), tests[i]->ground_truth};
            });
            const MetricReport rep = evaluate(records, cfg.iou_threshold);
            SweepRow row;
            row.value = k;
            row.map = rep.ap.map.value_or(0.0);
            row.f1 = rep.box.f1;
            rows.push_back(row);
            table += std::to_string(k) + "\t" + fixed(row.map, 4) + "\t" + fixed(row.f1, 4) + "\n";
            log << "clusters " << k << "  mAP " << fixed(row.map, 4) << "  F1 " << fixed(row.f1, 4) << "\n";
        }
    }
    write_text(opts.out / "sweep.txt", table);
    return rows;
}

void cmd_synth(const CommonOptions& opts, const SynthOptions& synth, std::ostream& log) {
    const PipelineConfig cfg = effective_config(opts);
    if (synth.kind == "scans") {
        SyntheticSpec spec;
        spec.count = synth.count;
        spec.test_count = synth.test_count;
        spec.height = synth.size;
        spec.width = synth.size;
        spec.style = {synth.style_gain, synth.style_offset};
        spec.seed = cfg.seed;
        const DatasetManifest m = generate_synthetic(spec, opts.out);
        log << "wrote " << m.entries.size() << " scans and manifest.txt to " << opts.out.string() << "\n";
    } else if (synth.kind == "patches") {
        PatchClassSpec spec;
        spec.per_class = synth.count;
        spec.size = synth.size;
        spec.seed = cfg.seed;
        const DatasetManifest m = generate_patch_classes(spec, opts.out);
        log << "wrote " << m.entries.size() << " labelled patches and manifest.txt to " << opts.out.string() << "\n";
    } else {
        throw ConfigError("synth kind must be 'scans' or 'patches'");
    }
    write_text(opts.out / "config.resolved", format_config(cfg));
}

} // namespace anoseg
