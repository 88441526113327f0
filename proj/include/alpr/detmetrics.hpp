#pragma once

#include "alpr/box.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace alpr {

/// area(a ∩ b) / area(a ∪ b); 0 for disjoint boxes.
template <typename Scalar>
Scalar iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  if (inter <= Scalar(0)) return Scalar(0);
  return inter / (a.area() + b.area() - inter);
}

/// Threshold for the binary localization accuracy. A hit needs IoU strictly
/// above it, so exactly 0.7 is a miss.
inline constexpr double kHitIouThreshold = 0.7;

inline int binary_hit(double iou_value, double threshold = kHitIouThreshold) {
  return iou_value > threshold ? 1 : 0;
}

struct Detection {
  BoundingBox box;
  double confidence = 1.0;
  int class_id = 0;
};

struct MatchResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<double> matched_ious;  // one per TP, in match order
};

/// Greedy one-to-one matching in descending confidence (ties keep input
/// order). Each prediction takes its best still-unmatched ground truth and is
/// a TP iff that IoU exceeds `iou_threshold`.
MatchResult match_detections(std::span<const Detection> preds, std::span<const BoundingBox> gts,
                             double iou_threshold = kHitIouThreshold);

struct ImageEval {
  std::vector<Detection> preds;
  std::vector<BoundingBox> gts;
};

struct EvalOptions {
  double iou_threshold = kHitIouThreshold;  // TP rule for precision/recall
  double hit_threshold = kHitIouThreshold;  // binary accuracy
  double confidence_cutoff = 0.0;           // predictions below are ignored
};

struct EvalOutcome {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double mean_iou = 0;
  std::size_t n_images = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Largest IoU between any prediction and any ground truth (0 if either is empty).
double best_match_iou(std::span<const Detection> preds, std::span<const BoundingBox> gts);

/// Dataset-level evaluation.
///
/// accuracy: mean per-image binary hit on the best-match IoU. An image without
///   ground truth counts as a hit iff it has no predictions.
/// precision/recall/F1: from TP/FP/FN summed over images; a zero denominator
///   yields 0.
/// mean_iou: summed matched IoU over the total ground-truth count, so every
///   unmatched ground truth contributes 0.
EvalOutcome evaluate_dataset(std::span<const ImageEval> per_image, const EvalOptions& options = {});

struct TimingSummary {
  double mean_ms = 0;
  std::size_t n_samples = 0;
};

TimingSummary timing_summary(std::span<const double> samples_ms);

/// "image_id class confidence x_min y_min x_max y_max" per line, '#' comments
/// allowed. Returns detections grouped by image id.
std::map<std::string, std::vector<Detection>> parse_predictions(std::string_view text);

}  // namespace alpr
