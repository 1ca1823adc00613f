#include "anoseg/metrics.hpp"

#include "anoseg/error.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace anoseg {

namespace {

std::vector<std::size_t> ranked(std::span<const ScoredBox> predictions) {
    std::vector<std::size_t> order(predictions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return predictions[a].score > predictions[b].score; });
    return order;
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

double mse(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("mse: images differ in shape");
    if (a.data().empty()) throw ShapeError("mse: empty images");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = 255.0 * (a.data()[i] - b.data()[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(a.data().size());
}

double iou(const BBox& a, const BBox& b) {
    if (!a.valid() || !b.valid()) throw ConfigError("iou: invalid box");
    const int ix0 = std::max(a.x0, b.x0);
    const int iy0 = std::max(a.y0, b.y0);
    const int ix1 = std::min(a.x1, b.x1);
    const int iy1 = std::min(a.y1, b.y1);
    if (ix1 < ix0 || iy1 < iy0) return 0.0;
    const double inter = static_cast<double>(ix1 - ix0 + 1) * static_cast<double>(iy1 - iy0 + 1);
    return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

MatchResult match_detections(std::span<const ScoredBox> predictions, std::span<const GroundTruth> ground_truth,
                             double iou_threshold, bool class_agnostic) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("iou threshold must lie in (0, 1]");
    MatchResult r;
    r.prediction_is_tp.assign(predictions.size(), false);
    std::vector<bool> taken(ground_truth.size(), false);
    for (std::size_t p : ranked(predictions)) {
        int best = -1;
        double best_iou = iou_threshold;
        for (std::size_t g = 0; g < ground_truth.size(); ++g) {
            if (taken[g]) continue;
            if (!class_agnostic && ground_truth[g].class_label != predictions[p].class_label) continue;
            const double v = iou(predictions[p].box, ground_truth[g].box);
            if (v > best_iou || (best < 0 && v >= best_iou)) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = true;
            r.prediction_is_tp[p] = true;
            r.pairs.push_back({static_cast<int>(p), best, best_iou});
            ++r.true_positives;
        } else {
            ++r.false_positives;
        }
    }
    r.false_negatives = static_cast<int>(ground_truth.size()) - r.true_positives;
    return r;
}

double average_precision_from_ranking(const std::vector<bool>& hits, int n_ground_truth) {
    if (n_ground_truth <= 0) throw ConfigError("average precision needs at least one ground truth");
    std::vector<double> precision(hits.size());
    int tp = 0;
    for (std::size_t k = 0; k < hits.size(); ++k) {
        tp += hits[k] ? 1 : 0;
        precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    }
    // Monotone envelope from the right.
    for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
    double ap = 0.0;
    for (std::size_t k = 0; k < hits.size(); ++k) {
        if (hits[k]) ap += precision[k] / static_cast<double>(n_ground_truth);
    }
    return ap;
}

std::optional<double> average_precision(std::span<const ImageRecord> images, int class_label, double iou_threshold) {
    const bool pooled = class_label < 0;
    struct Ranked {
        double score;
        bool hit;
    };
    std::vector<Ranked> all;
    int n_gt = 0;
    for (const ImageRecord& img : images) {
        std::vector<ScoredBox> preds;
        std::vector<GroundTruth> gts;
        for (const ScoredBox& p : img.predictions) {
            if (pooled || p.class_label == class_label) preds.push_back(p);
        }
        for (const GroundTruth& g : img.ground_truth) {
            if (pooled || g.class_label == class_label) gts.push_back(g);
        }
        n_gt += static_cast<int>(gts.size());
        const MatchResult m = match_detections(preds, gts, iou_threshold, pooled);
        for (std::size_t i = 0; i < preds.size(); ++i) all.push_back({preds[i].score, m.prediction_is_tp[i]});
    }
    if (n_gt == 0) return std::nullopt;
    std::ranges::stable_sort(all, [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
    std::vector<bool> hits;
    hits.reserve(all.size());
    for (const Ranked& r : all) hits.push_back(r.hit);
    return average_precision_from_ranking(hits, n_gt);
}

ApSummary mean_average_precision(std::span<const ImageRecord> images, double iou_threshold, bool class_agnostic) {
    ApSummary s;
    if (class_agnostic) {
        if (auto ap = average_precision(images, -1, iou_threshold)) {
            s.per_class[-1] = *ap;
            s.map = *ap;
        }
        return s;
    }
    std::vector<int> classes;
    for (const ImageRecord& img : images) {
        for (const GroundTruth& g : img.ground_truth) classes.push_back(g.class_label);
    }
    std::ranges::sort(classes);
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.empty()) return s;
    double sum = 0.0;
    for (int c : classes) {
        const double ap = average_precision(images, c, iou_threshold).value_or(0.0);
        s.per_class[c] = ap;
        sum += ap;
    }
    s.map = sum / static_cast<double>(classes.size());
    return s;
}

Prf1 prf1(int true_positives, int false_positives, int false_negatives) {
    Prf1 r;
    const int pd = true_positives + false_positives;
    const int rd = true_positives + false_negatives;
    r.precision = pd > 0 ? static_cast<double>(true_positives) / pd : 0.0;
    r.recall = rd > 0 ? static_cast<double>(true_positives) / rd : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

double classification_accuracy(std::span<const int> predicted, std::span<const int> expected) {
    if (predicted.size() != expected.size()) throw ShapeError("accuracy: label vectors differ in length");
    if (predicted.empty()) throw ShapeError("accuracy: no labels");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == expected[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

MetricReport evaluate(std::span<const ImageRecord> images, double iou_threshold) {
    MetricReport r;
    r.iou_threshold = iou_threshold;
    r.images = static_cast<int>(images.size());
    // Unlabelled detections can only be scored class-agnostically.
    r.class_agnostic = std::ranges::none_of(images, [](const ImageRecord& img) {
        return std::ranges::any_of(img.predictions, [](const ScoredBox& p) { return p.class_label >= 0; });
    });

    int scan_tp = 0;
    int scan_fp = 0;
    int scan_fn = 0;
    int scan_correct = 0;
    for (const ImageRecord& img : images) {
        const MatchResult m = match_detections(img.predictions, img.ground_truth, iou_threshold, r.class_agnostic);
        r.true_positives += m.true_positives;
        r.false_positives += m.false_positives;
        r.false_negatives += m.false_negatives;
        const bool abnormal = !img.ground_truth.empty();
        const bool flagged = !img.predictions.empty();
        if (abnormal && flagged) ++scan_tp;
        if (!abnormal && flagged) ++scan_fp;
        if (abnormal && !flagged) ++scan_fn;
        if (abnormal == flagged) ++scan_correct;
    }
    r.box = prf1(r.true_positives, r.false_positives, r.false_negatives);
    r.scan = prf1(scan_tp, scan_fp, scan_fn);
    r.scan_accuracy = images.empty() ? 0.0 : static_cast<double>(scan_correct) / static_cast<double>(images.size());
    r.ap = mean_average_precision(images, iou_threshold, r.class_agnostic);
    return r;
}

std::string MetricReport::to_text(std::span<const std::string> class_names) const {
    std::ostringstream out;
    out << "images: " << images << "\n";
    out << "iou threshold: " << fixed(iou_threshold) << (class_agnostic ? " (class-agnostic)" : "") << "\n";
    out << "boxes: TP " << true_positives << "  FP " << false_positives << "  FN " << false_negatives << "\n";
    out << "box precision: " << fixed(box.precision) << "\n";
    out << "box recall: " << fixed(box.recall) << "\n";
    out << "box F1: " << fixed(box.f1) << "\n";
    out << "scan precision: " << fixed(scan.precision) << "\n";
    out << "scan recall: " << fixed(scan.recall) << "\n";
    out << "scan F1: " << fixed(scan.f1) << "\n";
    out << "scan accuracy: " << fixed(scan_accuracy) << "\n";
    for (const auto& [cls, ap] : ap.per_class) {
        std::string name = cls < 0 ? "all" : std::to_string(cls);
        if (cls >= 0 && static_cast<std::size_t>(cls) < class_names.size()) name = class_names[static_cast<std::size_t>(cls)];
        out << "AP[" << name << "]: " << fixed(ap) << "\n";
    }
    out << "mAP: " << (ap.map ? fixed(*ap.map) : std::string("n/a (no ground truth)")) << "\n";
    if (mse) out << "MSE: " << fixed(*mse) << "\n";
    return out.str();
}

std::string MetricReport::to_key_values() const {
    std::ostringstream out;
    out << "images=" << images << "\n";
    out << "iou_threshold=" << fixed(iou_threshold) << "\n";
    out << "class_agnostic=" << (class_agnostic ? 1 : 0) << "\n";
    out << "tp=" << true_positives << "\nfp=" << false_positives << "\nfn=" << false_negatives << "\n";
    out << "precision=" << fixed(box.precision) << "\nrecall=" << fixed(box.recall) << "\nf1=" << fixed(box.f1) << "\n";
    out << "scan_precision=" << fixed(scan.precision) << "\nscan_recall=" << fixed(scan.recall)
        << "\nscan_f1=" << fixed(scan.f1) << "\n";
    out << "scan_accuracy=" << fixed(scan_accuracy) << "\n";
    for (const auto& [cls, ap] : ap.per_class) out << "ap_" << (cls < 0 ? std::string("all") : std::to_string(cls)) << "=" << fixed(ap) << "\n";
    if (ap.map) out << "map=" << fixed(*ap.map) << "\n";
    if (mse) out << "mse=" << fixed(*mse) << "\n";
    return out.str();
}

} // namespace anoseg
