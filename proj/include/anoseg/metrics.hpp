/**
 * @file metrics.hpp
 * @brief Reconstruction error, box matching, AP/mAP, precision/recall/F1, accuracy.
 */
#pragma once

#include "anoseg/bbox.hpp"
#include "anoseg/image.hpp"
#include "anoseg/manifest.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace anoseg {

/// Mean squared difference on the 0-255 scale.
double mse(const Image& a, const Image& b);

/// Inclusive-pixel intersection over union.
double iou(const BBox& a, const BBox& b);

/// A scored box; class_label -1 means unclassified.
struct ScoredBox {
    BBox box;
    double score = 0.0;
    int class_label = -1;

    friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

struct MatchedPair {
    int prediction = 0;    ///< index into the prediction list
    int ground_truth = 0;  ///< index into the ground-truth list
    double iou = 0.0;
};

struct MatchResult {
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
    std::vector<MatchedPair> pairs;
    std::vector<bool> prediction_is_tp;  ///< per prediction, input order
};

/// Greedy matching in descending score order (stable for equal scores). Each
/// prediction takes the unmatched ground truth of the same class with the
/// highest IoU >= @p iou_threshold; ties go to the lower gt index. When
/// @p class_agnostic is set, classes are ignored.
MatchResult match_detections(std::span<const ScoredBox> predictions, std::span<const GroundTruth> ground_truth,
                             double iou_threshold, bool class_agnostic = false);

/// Detections and ground truth for one image.
struct ImageRecord {
    std::vector<ScoredBox> predictions;
    std::vector<GroundTruth> ground_truth;
};

/// All-point interpolated AP over ranked hit flags, given the number of ground truths.
double average_precision_from_ranking(const std::vector<bool>& hits, int n_ground_truth);

/// AP for one class, pooling detections over all images. Returns nullopt when
/// the class has no ground truth. class_label -1 pools everything.
std::optional<double> average_precision(std::span<const ImageRecord> images, int class_label, double iou_threshold);

struct ApSummary {
    std::map<int, double> per_class;
    std::optional<double> map;  ///< absent when no class has ground truth
};

/// AP per class present in the ground truth and their mean. When
/// @p class_agnostic is set, all boxes form a single class (-1).
ApSummary mean_average_precision(std::span<const ImageRecord> images, double iou_threshold, bool class_agnostic);

struct Prf1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

Prf1 prf1(int true_positives, int false_positives, int false_negatives);
inline Prf1 prf1(const MatchResult& m) { return prf1(m.true_positives, m.false_positives, m.false_negatives); }

/// Fraction of equal labels; throws on empty or mismatched input.
double classification_accuracy(std::span<const int> predicted, std::span<const int> expected);

struct MetricReport {
    double iou_threshold = 0.5;
    bool class_agnostic = false;
    int images = 0;
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
    Prf1 box;                    ///< micro-averaged over images and classes
    Prf1 scan;                   ///< abnormal iff at least one detection
    double scan_accuracy = 0.0;
    ApSummary ap;
    std::optional<double> mse;  ///< when reconstructions were compared

    std::string to_text(std::span<const std::string> class_names = {}) const;
    std::string to_key_values() const;
};

MetricReport evaluate(std::span<const ImageRecord> images, double iou_threshold);

} // namespace anoseg
