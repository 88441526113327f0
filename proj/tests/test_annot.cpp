#include "alpr/annot.hpp"
#include "alpr/error.hpp"
#include "alpr/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

#include <cmath>
#include <sstream>

using namespace alpr;

TEST_CASE("voc fixture parses to the expected boxes") {
  ClassTable classes = ClassTable::parse(test::slurp(test::data("classes.txt")));
  Warnings warnings;
  const AnnotatedImage img = parse_voc(test::slurp(test::data("voc/car1.xml")), classes, &warnings);
  CHECK(img.width == 640);
  CHECK(img.height == 480);
  CHECK(img.source_id == "car1.jpg");
  REQUIRE(img.boxes.size() == 2);
  CHECK(img.boxes[0] == LabeledBox{{200, 300, 360, 350}, 0});
  CHECK(img.boxes[1] == LabeledBox{{40, 60, 600, 460}, 1});
  CHECK(warnings.empty());
}

TEST_CASE("voc box beyond the border is clipped with a warning") {
  ClassTable classes = ClassTable::parse(test::slurp(test::data("classes.txt")));
  Warnings warnings;
  const AnnotatedImage img = parse_voc(test::slurp(test::data("voc/sub/car2.xml")), classes, &warnings);
  REQUIRE(img.boxes.size() == 2);
  CHECK(img.boxes[1].box == BoundingBox{250, 200, 320, 240});
  CHECK(warnings.size() == 1);
  CHECK(emit_yolo(img) == test::slurp(test::data("yolo_golden/sub/car2.txt")));
}

TEST_CASE("voc errors name the element") {
  ClassTable classes;
  const std::string missing = "<annotation><size><width>10</width><height>10</height></size>"
                              "<object><name>p</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>5</xmax></bndbox>"
                              "</object></annotation>";
  try {
    parse_voc(missing, classes);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.where()).find("object[1]/bndbox") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_voc("<annotation><size><width>x</width></size></annotation>", classes), ParseError);
  CHECK_THROWS_AS(parse_voc("not xml <", classes), ParseError);
}

TEST_CASE("frozen class table rejects unknown names") {
  ClassTable classes({"plate"}, true);
  const std::string xml = "<annotation><size><width>10</width><height>10</height></size>"
                          "<object><name>bus</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>5</xmax><ymax>5</ymax>"
                          "</bndbox></object></annotation>";
  CHECK_THROWS_AS(parse_voc(xml, classes), DataError);
  ClassTable open;
  CHECK(parse_voc(xml, open).boxes.at(0).class_id == 0);
  CHECK(open.name(0) == "bus");
}

TEST_CASE("voc emit then parse is the identity") {
  ClassTable classes = ClassTable::parse(test::slurp(test::data("classes.txt")));
  const AnnotatedImage img = parse_voc(test::slurp(test::data("voc/car1.xml")), classes);
  CHECK(parse_voc(emit_voc(img, classes, img.source_id), classes) == img);
}

TEST_CASE("yolo example line") {
  const AnnotatedImage img = parse_yolo("0 0.5 0.5 0.25 0.1\n", 640, 480);
  REQUIRE(img.boxes.size() == 1);
  CHECK(img.boxes[0].box.x_min == doctest::Approx(240));
  CHECK(img.boxes[0].box.y_min == doctest::Approx(216));
  CHECK(img.boxes[0].box.x_max == doctest::Approx(400));
  CHECK(img.boxes[0].box.y_max == doctest::Approx(264));
}

TEST_CASE("yolo errors report the line") {
  const auto where = [](const std::string& text) {
    try {
      parse_yolo(text, 100, 100);
    } catch (const ParseError& e) {
      return e.where();
    }
    return std::string("no error");
  };
  CHECK(where("0 0.5 0.5 0.1 0.1\n0 0.5 0.5 0.1\n") == "line 2");
  CHECK(where("0 0.5 x 0.1 0.1\n") == "line 1");
  CHECK(where("0 1.5 0.5 0.1 0.1\n") == "line 1");
  CHECK(where("\n\n0 0.5 0.5 0 0.1\n") == "line 3");
  CHECK(where("-1 0.5 0.5 0.1 0.1\n") == "line 1");
}

TEST_CASE("yolo round trip drift stays below 1e-4 of the dimension") {
  Rng rng(11);
  for (int n = 0; n < 1000; ++n) {
    const int w = 16 + static_cast<int>(rng.index(2000));
    const int h = 16 + static_cast<int>(rng.index(2000));
    AnnotatedImage img{w, h, {}, ""};
    const double x0 = rng.uniform(0, w - 2), y0 = rng.uniform(0, h - 2);
    img.boxes.push_back({{x0, y0, rng.uniform(x0 + 1, w), rng.uniform(y0 + 1, h)}, static_cast<int>(rng.index(3))});
    const AnnotatedImage back = parse_yolo(emit_yolo(img), w, h);
    REQUIRE(back.boxes.size() == 1);
    CHECK(back.boxes[0].class_id == img.boxes[0].class_id);
    CHECK(std::abs(back.boxes[0].box.x_min - img.boxes[0].box.x_min) < 1e-4 * w);
    CHECK(std::abs(back.boxes[0].box.x_max - img.boxes[0].box.x_max) < 1e-4 * w);
    CHECK(std::abs(back.boxes[0].box.y_min - img.boxes[0].box.y_min) < 1e-4 * h);
    CHECK(std::abs(back.boxes[0].box.y_max - img.boxes[0].box.y_max) < 1e-4 * h);
  }
}

TEST_CASE("yolo text round trip is stable") {
  const std::string text = test::slurp(test::data("yolo_golden/car1.txt"));
  CHECK(emit_yolo(parse_yolo(text, 640, 480)) == text);
}

TEST_CASE("clip_to_image drops boxes with nothing left") {
  Warnings w;
  CHECK_FALSE(clip_to_image({120, 10, 150, 20}, 100, 100, "x", &w).has_value());
  CHECK(w.size() == 1);
  const auto kept = clip_to_image({-5, 10, 50, 20}, 100, 100, "x", &w);
  REQUIRE(kept);
  CHECK(kept->x_min == 0);
  CHECK(w.size() == 2);
}

TEST_CASE("mask example and popcount property") {
  const AnnotatedImage one{4, 4, {{{1, 1, 3, 3}, 0}}, ""};
  const PixelMask m = rasterize_mask(one);
  CHECK(m.popcount() == 4);
  CHECK(m.bits(1, 1));
  CHECK(m.bits(2, 2));
  CHECK_FALSE(m.bits(0, 0));
  CHECK_FALSE(m.bits(3, 3));

  Rng rng(5);
  for (int n = 0; n < 200; ++n) {
    AnnotatedImage img{40, 30, {}, ""};
    const int x0 = static_cast<int>(rng.index(39)), y0 = static_cast<int>(rng.index(29));
    const int x1 = x0 + 1 + static_cast<int>(rng.index(static_cast<std::size_t>(40 - x0)));
    const int y1 = y0 + 1 + static_cast<int>(rng.index(static_cast<std::size_t>(30 - y0)));
    img.boxes.push_back({{double(x0), double(y0), double(x1), double(y1)}, 0});
    CHECK(rasterize_mask(img).popcount() == static_cast<std::size_t>((x1 - x0) * (y1 - y0)));
  }
}

TEST_CASE("pgm output") {
  const PixelMask m = rasterize_mask({3, 2, {{{0, 0, 1, 1}, 0}}, ""});
  std::ostringstream out;
  write_pgm(m, out);
  const std::string s = out.str();
  CHECK(s.rfind("P5\n3 2\n255\n", 0) == 0);
  REQUIRE(s.size() == std::string("P5\n3 2\n255\n").size() + 6);
  CHECK(static_cast<unsigned char>(s[s.size() - 6]) == 255);
  CHECK(static_cast<unsigned char>(s.back()) == 0);
}
