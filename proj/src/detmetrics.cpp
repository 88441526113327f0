#include "alpr/detmetrics.hpp"

#include "alpr/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace alpr {

MatchResult match_detections(std::span<const Detection> preds, std::span<const BoundingBox> gts,
                             double iou_threshold) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });

  MatchResult result;
  std::vector<bool> taken(gts.size(), false);
  for (const std::size_t p : order) {
    double best = 0.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(preds[p].box, gts[g]);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size() && best > iou_threshold) {
      taken[best_gt] = true;
      ++result.tp;
      result.matched_ious.push_back(best);
    } else {
      ++result.fp;
    }
  }
  result.fn = static_cast<std::size_t>(std::count(taken.begin(), taken.end(), false));
  return result;
}

double best_match_iou(std::span<const Detection> preds, std::span<const BoundingBox> gts) {
  double best = 0.0;
  for (const auto& p : preds)
    for (const auto& g : gts) best = std::max(best, iou(p.box, g));
  return best;
}

EvalOutcome evaluate_dataset(std::span<const ImageEval> per_image, const EvalOptions& options) {
  if (per_image.empty()) throw DataError("evaluate_dataset: no images");

  EvalOutcome out;
  out.n_images = per_image.size();
  std::size_t hits = 0;
  std::size_t total_gt = 0;
  double iou_sum = 0.0;
  std::vector<Detection> kept;
  for (const auto& image : per_image) {
    kept.clear();
    for (const auto& d : image.preds)
      if (d.confidence >= options.confidence_cutoff) kept.push_back(d);

    if (image.gts.empty())
      hits += kept.empty() ? 1 : 0;
    else
      hits += static_cast<std::size_t>(binary_hit(best_match_iou(kept, image.gts), options.hit_threshold));

    const MatchResult m = match_detections(kept, image.gts, options.iou_threshold);
    out.tp += m.tp;
    out.fp += m.fp;
    out.fn += m.fn;
    total_gt += image.gts.size();
    for (const double v : m.matched_ious) iou_sum += v;
  }

  const auto ratio = [](double num, double den) { return den > 0 ? num / den : 0.0; };
  out.accuracy = ratio(static_cast<double>(hits), static_cast<double>(out.n_images));
  out.precision = ratio(static_cast<double>(out.tp), static_cast<double>(out.tp + out.fp));
  out.recall = ratio(static_cast<double>(out.tp), static_cast<double>(out.tp + out.fn));
  out.f1 = ratio(2.0 * out.precision * out.recall, out.precision + out.recall);
  out.mean_iou = ratio(iou_sum, static_cast<double>(total_gt));
  return out;
}

TimingSummary timing_summary(std::span<const double> samples_ms) {
  if (samples_ms.empty()) throw DataError("timing_summary: no samples");
  double sum = 0.0;
  for (const double v : samples_ms) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("timing_summary: samples must be finite and nonnegative");
    sum += v;
  }
  return {sum / static_cast<double>(samples_ms.size()), samples_ms.size()};
}

std::map<std::string, std::vector<Detection>> parse_predictions(std::string_view text) {
  std::map<std::string, std::vector<Detection>> out;
  int line_no = 0;
  for (const auto line : detail::lines(text)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = detail::split_ws(t);
    if (f.size() != 7)
      throw ParseError(where, "expected 'image_id class confidence x_min y_min x_max y_max'");
    Detection d;
    const auto cls = detail::parse_int<int>(f[1]);
    if (!cls) throw ParseError(where, "class must be an integer");
    d.class_id = *cls;
    double v[5];
    for (int k = 0; k < 5; ++k) {
      const auto parsed = detail::parse_double(f[k + 2]);
      if (!parsed || !std::isfinite(*parsed)) throw ParseError(where, "non-numeric field '" + std::string(f[k + 2]) + "'");
      v[k] = *parsed;
    }
    if (!(v[0] >= 0.0 && v[0] <= 1.0)) throw ParseError(where, "confidence outside [0,1]");
    d.confidence = v[0];
    d.box = {v[1], v[2], v[3], v[4]};
    if (!d.box.valid()) throw ParseError(where, "box has non-positive area");
    out[std::string(f[0])].push_back(d);
  }
  return out;
}

}  // namespace alpr
