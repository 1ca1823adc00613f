// Acceptance run: one pass/fail line per criterion, non-zero exit on any failure.

#include "gradcheck.hpp"
#include "oracles.hpp"

#include "anoseg/config.hpp"
#include "anoseg/metrics.hpp"
#include "anoseg/nn/training.hpp"
#include "anoseg/segmenter.hpp"
#include "anoseg/spectral.hpp"
#include "anoseg/synthetic.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

using namespace anoseg;
using spectral::Complex;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

double max_abs_diff(std::span<const Complex> a, std::span<const Complex> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

Outcome fft_oracle() {
    double fwd = 0.0;
    double inv = 0.0;
    double trip = 0.0;
    std::uint64_t seed = 1;
    for (auto [m, n] : std::vector<std::pair<int, int>>{{8, 8}, {12, 10}, {16, 16}}) {
        const auto x = oracle::uniform(static_cast<std::size_t>(m) * n, -1, 1, seed++);
        const std::vector<Complex> xc(x.begin(), x.end());
        fwd = std::max(fwd, max_abs_diff(spectral::fft2_centered(x, m, n).data, oracle::dft2_centered(xc, m, n)));

        const auto re = oracle::uniform(static_cast<std::size_t>(m) * n, -1, 1, seed++);
        const auto im = oracle::uniform(static_cast<std::size_t>(m) * n, -1, 1, seed++);
        spectral::Spectrum s{m, n, {}};
        for (std::size_t i = 0; i < re.size(); ++i) s.data.emplace_back(re[i], im[i]);
        inv = std::max(inv, max_abs_diff(spectral::ifft2_centered_complex(s), oracle::idft2_centered(s.data, m, n)));

        const auto back = spectral::ifft2_centered(spectral::fft2_centered(x, m, n));
        for (std::size_t i = 0; i < x.size(); ++i) trip = std::max(trip, std::abs(back[i] - x[i]));
    }
    const double worst = std::max({fwd, inv, trip});
    return {worst < 1e-9, fmt("forward %.2e, inverse %.2e, round trip %.2e (limit 1e-9)", fwd, inv, trip)};
}

Outcome stylization_identity() {
    const Image in(40, 36, 3, oracle::uniform(40 * 36 * 3, 0, 1, 5));
    const Image gw = spectral::stylize_gwfs(in, Image(40, 36, 3, 0.0), 5.0, {.clamp = false});
    double gw_err = 0.0;
    double fda_err = 0.0;
    for (std::size_t i = 0; i < in.data().size(); ++i) gw_err = std::max(gw_err, std::abs(gw.data()[i] - in.data()[i]));
    for (double beta : {1.0, 2.0, 8.0}) {
        const Image fda = spectral::stylize_fda(in, in, beta, {.clamp = false});
        for (std::size_t i = 0; i < in.data().size(); ++i) fda_err = std::max(fda_err, std::abs(fda.data()[i] - in.data()[i]));
    }
    return {std::max(gw_err, fda_err) < 1e-9, fmt("GW-FS zero reference %.2e, FDA self reference %.2e (limit 1e-9)", gw_err, fda_err)};
}

Outcome window_property() {
    const int size = 128;
    const spectral::ReferenceMagnitude flat{size, size, {std::vector<double>(size * size, 1.0)}};
    std::vector<double> fractions;
    for (double sigma : {5.0, 10.0, 25.0, 50.0}) {
        const auto s = spectral::stylization_mask(flat, sigma);
        double total = 0.0;
        double outside = 0.0;
        for (int u = 0; u < size; ++u) {
            for (int v = 0; v < size; ++v) {
                const double e = std::pow(s.channels[0][static_cast<std::size_t>(u) * size + v], 2);
                total += e;
                const int du = u - size / 2;
                const int dv = v - size / 2;
                if (du * du + dv * dv > 16) outside += e;
            }
        }
        fractions.push_back(outside / total);
    }
    bool increasing = true;
    for (std::size_t i = 1; i < fractions.size(); ++i) increasing &= fractions[i] > fractions[i - 1];
    return {increasing, fmt("energy outside r=4: %.4f < %.4f < %.4f < %.4f", fractions[0], fractions[1], fractions[2], fractions[3])};
}

Outcome gradient_suite() {
    bool pass = true;
    std::ostringstream detail;
    for (const gradcheck::Case& c : gradcheck::all_cases()) {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) worst = std::max(worst, c.run(seed));
        pass &= worst < 1e-4;
        detail << c.name << " " << fmt("%.1e", worst) << "; ";
    }
    detail << "(5 instances each, limit 1e-4)";
    return {pass, detail.str()};
}

Outcome architecture() {
    const nn::Network net = nn::build_reconstructor(3, 1);
    const nn::LayerCounts counts = net.counts();
    const auto params = static_cast<double>(net.parameter_count());
    bool shapes = true;
    for (int p : {8, 16, 32, 64}) {
        const nn::Tensor x({2, 3, p, p}, oracle::uniform(static_cast<std::size_t>(2 * 3 * p * p), 0, 1, p));
        shapes &= net.forward(x).shape() == x.shape();
    }
    const bool pass = counts.convs == 7 && counts.pools == 3 && counts.upsamples == 3 &&
                      std::abs(params - 4923.0) <= 0.1 * 4923.0 && shapes;
    return {pass, fmt("%d convs, %d pools, %d upsamples, %.0f parameters (4923 +/- 10%%), shape preserving: %s", counts.convs,
                      counts.pools, counts.upsamples, params, shapes ? "yes" : "no")};
}

// Shared by the training, cross-style and end-to-end criteria.
struct Benchmark {
    std::vector<SyntheticSample> samples;
    std::vector<Image> patches;
    Image reference;
    std::optional<nn::Network> model;
};

Benchmark& benchmark() {
    static Benchmark b = [] {
        Benchmark out;
        SyntheticSpec spec;
        spec.count = 125;
        spec.test_count = 100;
        out.samples = render_synthetic(spec);
        for (const SyntheticSample& s : out.samples) {
            if (s.role != Role::Train) continue;
            const Image rgb = to_rgb(s.image);
            if (out.reference.height() == 0) out.reference = rgb;
            for (Image& p : decompose_patches(rgb, 64).patches) out.patches.push_back(std::move(p));
        }
        return out;
    }();
    return b;
}

Outcome training_convergence() {
    Benchmark& b = benchmark();
    const PipelineConfig cfg;
    const nn::FeatureExtractor extractor = cfg.make_feature_extractor();
    const nn::TrainingResult first = nn::train_reconstructor(b.patches, extractor, cfg.reconstructor());
    const nn::TrainingResult second = nn::train_reconstructor(b.patches, extractor, cfg.reconstructor());
    b.model = first.net;
    const double ratio = first.loss_history.back() / first.loss_history.front();
    const bool identical = first.loss_history == second.loss_history;
    return {b.patches.size() == 500 && first.loss_history.size() == 30 && ratio <= 0.5 && identical,
            fmt("%zu patches, %zu epochs, loss %.5f -> %.5f (ratio %.3f, limit 0.5), rerun bitwise identical: %s",
                b.patches.size(), first.loss_history.size(), first.loss_history.front(), first.loss_history.back(), ratio,
                identical ? "yes" : "no")};
}

Outcome cross_style_trend() {
    Benchmark& b = benchmark();
    if (!b.model) return {false, "no trained model"};
    // Style B renders the same scenes as style A with a darker scanner offset.
    SyntheticSpec a;
    a.count = 125;
    a.test_count = 20;
    SyntheticSpec shifted = a;
    shifted.style.offset = -0.04;
    const auto style_a = render_synthetic(a);
    const auto style_b = render_synthetic(shifted);

    std::vector<double> errors;
    for (double sigma : {5.0, 10.0, 25.0, 50.0}) {
        StyleSettings st;
        st.sigma = sigma;
        double sum = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < style_a.size(); ++i) {
            if (style_a[i].role != Role::Test) continue;
            const Image styled = apply_style(to_rgb(style_b[i].image), b.reference, st);
            sum += mse(nn::reconstruct(*b.model, styled, 64), to_rgb(style_a[i].image));
            ++n;
        }
        errors.push_back(sum / n);
    }
    bool increasing = true;
    for (std::size_t i = 1; i < errors.size(); ++i) increasing &= errors[i] > errors[i - 1];
    return {increasing, fmt("MSE sigma 5/10/25/50: %.2f < %.2f < %.2f < %.2f", errors[0], errors[1], errors[2], errors[3])};
}

Outcome end_to_end() {
    Benchmark& b = benchmark();
    if (!b.model) return {false, "no trained model"};
    const PipelineConfig cfg;
    std::vector<ImageRecord> records;
    int abnormal = 0;
    for (const SyntheticSample& s : b.samples) {
        if (s.role != Role::Test) continue;
        abnormal += s.ground_truth.empty() ? 0 : 1;
        const SegmentResult r = segment_scan(s.image, *b.model, b.reference, cfg.style(false), cfg.patch_size, cfg.segmenter());
        ImageRecord rec;
        rec.ground_truth = s.ground_truth;
        for (const Detection& d : r.detections) rec.predictions.push_back({d.box, d.score, d.class_label});
        records.push_back(std::move(rec));
    }
    const MetricReport rep = evaluate(records, 0.3);
    const bool pass = abnormal == 50 && records.size() == 100 && rep.class_agnostic && rep.box.recall >= 0.9 &&
                      rep.box.precision >= 0.8 && rep.scan.f1 >= 0.85;
    return {pass, fmt("%d abnormal + %d normal scans: recall %.3f (>= 0.9), precision %.3f (>= 0.8), scan F1 %.3f (>= 0.85)",
                      abnormal, static_cast<int>(records.size()) - abnormal, rep.box.recall, rep.box.precision, rep.scan.f1)};
}

BinaryMask random_mask(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    BinaryMask m(5 + static_cast<int>(rng() % 40), 5 + static_cast<int>(rng() % 40));
    std::bernoulli_distribution on(std::uniform_real_distribution<double>(0.1, 0.7)(rng));
    for (auto& bit : m.bits) bit = on(rng) ? 1 : 0;
    return m;
}

Outcome clustering_and_geometry() {
    int wcss_ok = 0;
    for (std::uint64_t run = 0; run < 100; ++run) {
        std::mt19937_64 rng(run);
        const int n = 20 + static_cast<int>(rng() % 300);
        const auto v = oracle::uniform(static_cast<std::size_t>(3 * n), -1, 1, run + 5000);
        std::vector<Point3> pts;
        for (int i = 0; i < n; ++i) pts.push_back({v[3 * i], v[3 * i + 1], v[3 * i + 2]});
        const KMeansResult km = kmeans(pts, 2 + static_cast<int>(rng() % 5), run);
        bool ok = !km.wcss_history.empty();
        for (std::size_t i = 1; i < km.wcss_history.size(); ++i) ok &= km.wcss_history[i] <= km.wcss_history[i - 1];
        wcss_ok += ok ? 1 : 0;
    }

    int cc_ok = 0;
    int bbox_ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const BinaryMask m = random_mask(seed + 7000);
        const auto comps = connected_components(m);
        const auto expected = oracle::flood_fill_components(m);
        bool same = comps.size() == expected.size();
        for (std::size_t k = 0; same && k < comps.size(); ++k) same = comps[k].pixels == expected[k];
        cc_ok += same ? 1 : 0;

        bool minimal = true;
        for (const InstanceMask& inst : comps) {
            const BBox b = fit_bbox(inst);
            bool top = false, bottom = false, left = false, right = false;
            for (int p : inst.pixels) {
                const int y = p / inst.width;
                const int x = p % inst.width;
                minimal &= x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1;
                top |= y == b.y0;
                bottom |= y == b.y1;
                left |= x == b.x0;
                right |= x == b.x1;
            }
            minimal &= top && bottom && left && right;
        }
        bbox_ok += minimal ? 1 : 0;
    }

    const double ap = average_precision_from_ranking({true, false, true, true}, 3);
    const bool pass = wcss_ok == 100 && cc_ok == 100 && bbox_ok == 100 && std::abs(ap - 5.0 / 6.0) <= 1e-9;
    return {pass, fmt("wcss monotone %d/100, components %d/100, bbox minimal %d/100, AP %.12f (5/6)", wcss_ok, cc_ok, bbox_ok, ap)};
}

Outcome classifier() {
    PatchClassSpec spec;
    spec.classes = 4;
    spec.per_class = 50;
    spec.size = 32;
    std::vector<Image> train, held;
    std::vector<int> train_labels, held_labels;
    std::vector<int> seen(4, 0);
    for (const LabeledPatch& p : render_patch_classes(spec)) {
        const bool hold = seen[static_cast<std::size_t>(p.label)]++ >= 40;
        (hold ? held : train).push_back(p.image);
        (hold ? held_labels : train_labels).push_back(p.label);
    }
    const nn::ClassifierConfig cfg = PipelineConfig{}.classifier();
    const nn::ClassifierResult r = nn::train_classifier(train, train_labels, 4, cfg);
    const double train_acc = classification_accuracy(nn::predict_labels(r.net, train, cfg.input_size), train_labels);
    const double held_acc = classification_accuracy(nn::predict_labels(r.net, held, cfg.input_size), held_labels);
    return {cfg.learning_rate == 1e-4 && train_acc >= 0.95 && held_acc >= 0.9,
            fmt("lr %.0e, train accuracy %.3f (>= 0.95), held-out accuracy %.3f (>= 0.9) on %zu/%zu patches",
                cfg.learning_rate, train_acc, held_acc, train.size(), held.size())};
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  ///< 0 when no runtime bound applies
    std::function<Outcome()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "FFT oracle", 5, fft_oracle},
        {2, "stylization identity", 1, stylization_identity},
        {3, "window property", 1, window_property},
        {4, "gradient suite", 60, gradient_suite},
        {5, "architecture fidelity", 0, architecture},
        {6, "training convergence", 600, training_convergence},
        {7, "cross-style MSE trend", 900, cross_style_trend},
        {8, "end-to-end detection", 600, end_to_end},
        {9, "clustering and geometry oracles", 0, clustering_and_geometry},
        {10, "classifier", 300, classifier},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.limit_seconds == 0 || seconds < c.limit_seconds;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("criterion %2d %s  %s: %s [%.1f s", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), seconds);
        if (c.limit_seconds > 0) std::printf(", limit %.0f s", c.limit_seconds);
        std::printf("]\n");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
