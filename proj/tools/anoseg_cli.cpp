// anoseg: train, stylize, segment, classify and evaluate X-ray scans from the command line.
#include "anoseg/commands.hpp"
#include "anoseg/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

void add_common(CLI::App* cmd, anoseg::CommonOptions& opts, bool with_out = true) {
    cmd->add_option("--config", opts.config, "pipeline config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--workers", opts.workers, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--fda", opts.fda, "use the FDA baseline instead of GW-FS");
    if (with_out) cmd->add_option("--out", opts.out, "run directory")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised anomaly instance segmentation for X-ray scans"};
    app.require_subcommand(1);

    anoseg::CommonOptions opts;
    std::filesystem::path manifest, model, input, reference, output;
    std::optional<std::filesystem::path> classifier, detections, targets;
    std::string axis = "sigma";
    std::vector<double> values;
    anoseg::SynthOptions synth;

    auto* train = app.add_subcommand("train", "train the reconstructor on the manifest's train scans");
    add_common(train, opts);
    train->add_option("manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);

    auto* stylize = app.add_subcommand("stylize", "stylize one scan against a reference scan");
    add_common(stylize, opts, false);
    stylize->add_option("input", input)->required()->check(CLI::ExistingFile);
    stylize->add_option("reference", reference)->required()->check(CLI::ExistingFile);
    stylize->add_option("output", output)->required();

    auto* segment = app.add_subcommand("segment", "detect anomalous instances in the test scans");
    add_common(segment, opts);
    segment->add_option("--model", model, "reconstructor weights")->required()->check(CLI::ExistingFile);
    segment->add_option("--classifier", classifier, "optional classifier weights")->check(CLI::ExistingFile);
    segment->add_option("manifest", manifest)->required()->check(CLI::ExistingFile);

    auto* ctrain = app.add_subcommand("classify-train", "train the patch classifier on ground-truth boxes");
    add_common(ctrain, opts);
    ctrain->add_option("manifest", manifest)->required()->check(CLI::ExistingFile);

    auto* classify = app.add_subcommand("classify", "label detections or test boxes with a classifier");
    add_common(classify, opts);
    classify->add_option("--model", model, "classifier weights")->required()->check(CLI::ExistingFile);
    classify->add_option("--detections", detections, "detections file to label")->check(CLI::ExistingFile);
    classify->add_option("manifest", manifest)->required()->check(CLI::ExistingFile);

    auto* evaluate = app.add_subcommand("evaluate", "score a detections file against ground truth");
    add_common(evaluate, opts);
    evaluate->add_option("detections", input, "detections file")->required()->check(CLI::ExistingFile);
    evaluate->add_option("manifest", manifest, "ground-truth manifest")->required()->check(CLI::ExistingFile);

    auto* sweep = app.add_subcommand("sweep", "ablation over sigma or the cluster count");
    add_common(sweep, opts);
    sweep->add_option("--model", model, "reconstructor weights")->required()->check(CLI::ExistingFile);
    sweep->add_option("--axis", axis)->check(CLI::IsMember({"sigma", "clusters"}))->capture_default_str();
    sweep->add_option("--values", values, "values to sweep")->required()->delimiter(',');
    sweep->add_option("--targets", targets, "manifest of paired reconstruction targets")->check(CLI::ExistingFile);
    sweep->add_option("manifest", manifest)->required()->check(CLI::ExistingFile);

    auto* gen = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(gen, opts);
    gen->add_option("--kind", synth.kind)->check(CLI::IsMember({"scans", "patches"}))->capture_default_str();
    gen->add_option("--count", synth.count, "train scans, or patches per class")->check(CLI::PositiveNumber);
    gen->add_option("--test-count", synth.test_count, "test scans")->check(CLI::NonNegativeNumber);
    gen->add_option("--size", synth.size, "image side length")->check(CLI::Range(16, 4096));
    gen->add_option("--style-gain", synth.style_gain)->check(CLI::PositiveNumber);
    gen->add_option("--style-offset", synth.style_offset)->check(CLI::Range(-0.5, 0.5));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train) {
            anoseg::cmd_train(opts, manifest, std::cout);
        } else if (*stylize) {
            anoseg::cmd_stylize(opts, input, reference, output, std::cout);
        } else if (*segment) {
            anoseg::cmd_segment(opts, model, manifest, classifier, std::cout);
        } else if (*ctrain) {
            anoseg::cmd_classify_train(opts, manifest, std::cout);
        } else if (*classify) {
            anoseg::cmd_classify(opts, model, manifest, detections, std::cout);
        } else if (*evaluate) {
            anoseg::cmd_evaluate(opts, input, manifest, std::cout);
        } else if (*sweep) {
            const auto a = axis == "sigma" ? anoseg::SweepAxis::Sigma : anoseg::SweepAxis::Clusters;
            anoseg::cmd_sweep(opts, model, manifest, a, values, targets, std::cout);
        } else if (*gen) {
            anoseg::cmd_synth(opts, synth, std::cout);
        }
    } catch (const anoseg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
