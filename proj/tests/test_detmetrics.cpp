#include "alpr/detmetrics.hpp"
#include "alpr/error.hpp"
#include "alpr/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

#include <cmath>

using namespace alpr;

namespace {

BoundingBox random_box(Rng& rng, double extent) {
  const double x0 = rng.uniform(0, extent), y0 = rng.uniform(0, extent);
  return {x0, y0, x0 + rng.uniform(1, extent / 2), y0 + rng.uniform(1, extent / 2)};
}

// Ten images of 100x100; see the hand tally in the fixture test below.
std::vector<ImageEval> ten_images() {
  const BoundingBox g{10, 10, 50, 50};
  std::vector<ImageEval> v(10);
  for (int i : {0, 1, 2, 3, 4, 5, 9}) v[i].gts = {g};
  v[8].gts = {{0, 0, 20, 20}, {50, 50, 90, 90}};
  v[0].preds = {{g, 0.95, 0}};
  v[1].preds = {{{10, 10, 50, 46}, 0.90, 0}};
  v[2].preds = {{{10, 10, 50, 38}, 0.85, 0}};
  v[4].preds = {{g, 0.90, 0}, {{12, 12, 50, 50}, 0.80, 0}};
  v[5].preds = {{{60, 60, 90, 90}, 0.70, 0}};
  v[7].preds = {{{20, 20, 40, 40}, 0.60, 0}};
  v[8].preds = {{{0, 0, 20, 20}, 0.99, 0}, {{50, 50, 90, 90}, 0.98, 0}};
  v[9].preds = {{{10, 10, 50, 45}, 0.30, 0}};
  return v;
}

}  // namespace

TEST_CASE("iou examples") {
  CHECK(iou(BoundingBox{0, 0, 10, 10}, BoundingBox{0, 0, 10, 10}) == 1.0);
  CHECK(iou(BoundingBox{0, 0, 10, 10}, BoundingBox{5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(BoundingBox{0, 0, 10, 10}, BoundingBox{10, 0, 20, 10}) == 0.0);
  CHECK(iou(Box<float>{0, 0, 2, 2}, Box<float>{1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("binary hit is strict at the threshold") {
  CHECK(binary_hit(0.7) == 0);
  CHECK(binary_hit(std::nextafter(0.7, 1.0)) == 1);
  CHECK(binary_hit(0.5, 0.4) == 1);
}

TEST_CASE("iou properties on random pairs") {
  Rng rng(21);
  for (int n = 0; n < 2000; ++n) {
    const BoundingBox a = random_box(rng, 100), b = random_box(rng, 100);
    const double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == iou(b, a));
    CHECK(iou(a, a) == 1.0);
  }
}

TEST_CASE("iou agrees with a pixel grid") {
  Rng rng(22);
  double worst = 0;
  for (int n = 0; n < 100; ++n) {
    const BoundingBox a = random_box(rng, 100), b = random_box(rng, 100);
    worst = std::max(worst, std::abs(iou(a, b) - oracle::pixel_iou(a, b)));
  }
  CHECK(worst < 0.02);
}

TEST_CASE("matching is greedy by confidence") {
  const std::vector<BoundingBox> gts{{0, 0, 10, 10}};
  const std::vector<Detection> preds{{{0, 0, 10, 9}, 0.5, 0}, {{0, 0, 10, 10}, 0.9, 0}};
  const MatchResult m = match_detections(preds, gts);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 0);
  REQUIRE(m.matched_ious.size() == 1);
  CHECK(m.matched_ious[0] == 1.0);
}

TEST_CASE("matching counts add up") {
  Rng rng(23);
  for (int n = 0; n < 300; ++n) {
    std::vector<BoundingBox> gts;
    std::vector<Detection> preds;
    for (std::size_t i = rng.index(5); i > 0; --i) gts.push_back(random_box(rng, 60));
    for (std::size_t i = rng.index(5); i > 0; --i) preds.push_back({random_box(rng, 60), rng.uniform(), 0});
    const MatchResult m = match_detections(preds, gts);
    CHECK(m.tp + m.fp == preds.size());
    CHECK(m.tp + m.fn == gts.size());
    CHECK(m.matched_ious.size() == m.tp);
  }
}

TEST_CASE("ten image fixture matches the hand tally") {
  const auto images = ten_images();
  const EvalOutcome r = evaluate_dataset(images);
  CHECK(r.n_images == 10);
  CHECK(r.tp == 6);
  CHECK(r.fp == 4);
  CHECK(r.fn == 3);
  CHECK(r.accuracy == doctest::Approx(0.6));
  CHECK(r.precision == doctest::Approx(0.6));
  CHECK(r.recall == doctest::Approx(6.0 / 9.0));
  CHECK(r.f1 == doctest::Approx(12.0 / 19.0));
  CHECK(r.mean_iou == doctest::Approx(5.775 / 9.0));

  EvalOptions cut;
  cut.confidence_cutoff = 0.5;
  const EvalOutcome c = evaluate_dataset(images, cut);
  CHECK(c.tp == 5);
  CHECK(c.fn == 4);
  CHECK(c.accuracy == doctest::Approx(0.5));
}

TEST_CASE("perfect predictions score 1 everywhere") {
  std::vector<ImageEval> images = ten_images();
  for (auto& im : images) {
    im.preds.clear();
    for (const auto& g : im.gts) im.preds.push_back({g, 1.0, 0});
  }
  const EvalOutcome r = evaluate_dataset(images);
  CHECK(r.accuracy == 1.0);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.mean_iou == 1.0);
}

TEST_CASE("zero denominators give zero") {
  std::vector<ImageEval> images(2);
  const EvalOutcome r = evaluate_dataset(images);
  CHECK(r.accuracy == 1.0);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);
  CHECK(r.mean_iou == 0.0);
  CHECK_THROWS_AS(evaluate_dataset({}), DataError);
}

TEST_CASE("timing summary") {
  const std::vector<double> t{10, 20, 30};
  CHECK(timing_summary(t).mean_ms == 20.0);
  CHECK(timing_summary(t).n_samples == 3);
  CHECK_THROWS_AS(timing_summary({}), DataError);
  const std::vector<double> neg{1, -1};
  CHECK_THROWS_AS(timing_summary(neg), DataError);
}

TEST_CASE("prediction file parsing") {
  const auto m = parse_predictions("# c\nimg1 0 0.9 1 2 3 4\nimg1 1 0.5 0 0 5 5\nimg2 0 1 1 1 2 2\n");
  REQUIRE(m.size() == 2);
  CHECK(m.at("img1").size() == 2);
  CHECK(m.at("img1")[1].class_id == 1);
  CHECK(m.at("img2")[0].box == BoundingBox{1, 1, 2, 2});
  try {
    parse_predictions("img1 0 0.9 1 2 3 4\nimg2 0 0.9 1 2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.where() == "line 2");
  }
}
