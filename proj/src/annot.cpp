#include "alpr/annot.hpp"

#include "alpr/error.hpp"
#include "text_util.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace alpr {

namespace pt = boost::property_tree;

ClassTable::ClassTable(std::vector<std::string> names, bool frozen)
    : names_(std::move(names)), frozen_(frozen) {}

std::optional<int> ClassTable::find(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

int ClassTable::id_of(std::string_view name) {
  if (auto id = find(name)) return *id;
  if (frozen_) throw DataError("unknown class name '" + std::string(name) + "'");
  names_.emplace_back(name);
  return static_cast<int>(names_.size() - 1);
}

const std::string& ClassTable::name(int id) const {
  if (!contains(id)) throw DataError("class id " + std::to_string(id) + " not in class table");
  return names_[static_cast<std::size_t>(id)];
}

ClassTable ClassTable::parse(std::string_view text, bool frozen) {
  std::vector<std::string> names;
  for (auto line : detail::lines(text)) {
    line = detail::trim(line);
    if (!line.empty()) names.emplace_back(line);
  }
  return ClassTable(std::move(names), frozen);
}

std::string ClassTable::to_text() const {
  std::string out;
  for (const auto& n : names_) out += n + "\n";
  return out;
}

std::optional<BoundingBox> clip_to_image(const BoundingBox& box, int width, int height,
                                         std::string_view where, Warnings* warnings) {
  const double w = width;
  const double h = height;
  const BoundingBox clipped = clip(box, w, h);
  const double tol = 1e-5 * std::max(w, h);
  const bool moved = std::abs(clipped.x_min - box.x_min) > tol ||
                     std::abs(clipped.y_min - box.y_min) > tol ||
                     std::abs(clipped.x_max - box.x_max) > tol ||
                     std::abs(clipped.y_max - box.y_max) > tol;
  if (!clipped.valid()) {
    if (warnings) warnings->push_back(std::string(where) + ": box outside image, dropped");
    return std::nullopt;
  }
  if (moved && warnings) warnings->push_back(std::string(where) + ": box clipped to image bounds");
  return clipped;
}

// --- Pascal VOC --------------------------------------------------------------

namespace {

double voc_number(const pt::ptree& node, const std::string& key, const std::string& where) {
  const auto text = node.get_optional<std::string>(key);
  if (!text) throw ParseError(where + "/" + key, "missing element");
  const auto v = detail::parse_double(*text);
  if (!v || !std::isfinite(*v)) throw ParseError(where + "/" + key, "not a number: '" + *text + "'");
  return *v;
}

int voc_dimension(const pt::ptree& size, const std::string& key) {
  const double v = voc_number(size, key, "annotation/size");
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9)
    throw ParseError("annotation/size/" + key, "must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace

AnnotatedImage parse_voc(std::string_view xml, ClassTable& classes, Warnings* warnings) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("line " + std::to_string(e.line()), "malformed XML: " + e.message());
  }

  const auto root = tree.get_child_optional("annotation");
  if (!root) throw ParseError("annotation", "missing root element");
  const auto size = root->get_child_optional("size");
  if (!size) throw ParseError("annotation/size", "missing element");

  AnnotatedImage image;
  image.width = voc_dimension(*size, "width");
  image.height = voc_dimension(*size, "height");
  image.source_id = root->get<std::string>("filename", "");

  int index = 0;
  for (const auto& [tag, object] : *root) {
    if (tag != "object") continue;
    ++index;
    const std::string where = "annotation/object[" + std::to_string(index) + "]";
    const auto name = object.get_optional<std::string>("name");
    if (!name) throw ParseError(where + "/name", "missing element");
    const auto bndbox = object.get_child_optional("bndbox");
    if (!bndbox) throw ParseError(where + "/bndbox", "missing element");

    const std::string bwhere = where + "/bndbox";
    const double xmin = voc_number(*bndbox, "xmin", bwhere);
    const double ymin = voc_number(*bndbox, "ymin", bwhere);
    const double xmax = voc_number(*bndbox, "xmax", bwhere);
    const double ymax = voc_number(*bndbox, "ymax", bwhere);
    const BoundingBox box{xmin - 1.0, ymin - 1.0, xmax, ymax};
    if (!box.valid())
      throw ParseError(bwhere, "box has non-positive area (xmin=" + detail::shortest(xmin) +
                                   ", ymin=" + detail::shortest(ymin) + ", xmax=" +
                                   detail::shortest(xmax) + ", ymax=" + detail::shortest(ymax) + ")");

    const int class_id = classes.id_of(std::string(detail::trim(*name)));
    if (auto clipped = clip_to_image(box, image.width, image.height, where, warnings))
      image.boxes.push_back({*clipped, class_id});
  }
  return image;
}

std::string emit_voc(const AnnotatedImage& image, const ClassTable& classes,
                     std::string_view filename) {
  std::ostringstream out;
  out << "<annotation>\n";
  if (!filename.empty()) out << "  <filename>" << filename << "</filename>\n";
  out << "  <size>\n    <width>" << image.width << "</width>\n    <height>" << image.height
      << "</height>\n    <depth>3</depth>\n  </size>\n";
  for (const auto& lb : image.boxes) {
    out << "  <object>\n    <name>" << classes.name(lb.class_id) << "</name>\n    <bndbox>\n"
        << "      <xmin>" << detail::shortest(lb.box.x_min + 1.0) << "</xmin>\n"
        << "      <ymin>" << detail::shortest(lb.box.y_min + 1.0) << "</ymin>\n"
        << "      <xmax>" << detail::shortest(lb.box.x_max) << "</xmax>\n"
        << "      <ymax>" << detail::shortest(lb.box.y_max) << "</ymax>\n"
        << "    </bndbox>\n  </object>\n";
  }
  out << "</annotation>\n";
  return out.str();
}

// --- YOLO --------------------------------------------------------------------

AnnotatedImage parse_yolo(std::string_view text, int width, int height, Warnings* warnings) {
  if (width <= 0 || height <= 0) throw DataError("image dimensions must be positive");
  AnnotatedImage image;
  image.width = width;
  image.height = height;

  int line_no = 0;
  for (const auto line : detail::lines(text)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != 5)
      throw ParseError(where, "expected 5 fields 'class cx cy w h', got " +
                                  std::to_string(fields.size()));
    const auto class_id = detail::parse_int<int>(fields[0]);
    if (!class_id || *class_id < 0)
      throw ParseError(where, "class id must be a non-negative integer: '" +
                                  std::string(fields[0]) + "'");
    double v[4];
    for (int k = 0; k < 4; ++k) {
      const auto parsed = detail::parse_double(fields[k + 1]);
      if (!parsed) throw ParseError(where, "non-numeric field '" + std::string(fields[k + 1]) + "'");
      if (!(*parsed >= 0.0 && *parsed <= 1.0))
        throw ParseError(where, "value outside [0,1]: '" + std::string(fields[k + 1]) + "'");
      v[k] = *parsed;
    }
    if (v[2] <= 0.0 || v[3] <= 0.0) throw ParseError(where, "box width and height must be positive");

    const BoundingBox box{(v[0] - v[2] / 2) * width, (v[1] - v[3] / 2) * height,
                          (v[0] + v[2] / 2) * width, (v[1] + v[3] / 2) * height};
    if (auto clipped = clip_to_image(box, width, height, where, warnings))
      image.boxes.push_back({*clipped, *class_id});
  }
  return image;
}

YoloRecord to_yolo(const LabeledBox& labeled, int width, int height) {
  const double x0 = std::clamp(labeled.box.x_min / width, 0.0, 1.0);
  const double x1 = std::clamp(labeled.box.x_max / width, 0.0, 1.0);
  const double y0 = std::clamp(labeled.box.y_min / height, 0.0, 1.0);
  const double y1 = std::clamp(labeled.box.y_max / height, 0.0, 1.0);
  return {labeled.class_id, (x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
}

std::string emit_yolo(const AnnotatedImage& image) {
  std::string out;
  for (const auto& lb : image.boxes) {
    const YoloRecord r = to_yolo(lb, image.width, image.height);
    out += std::to_string(r.class_id) + " " + detail::fixed(r.cx, 6) + " " + detail::fixed(r.cy, 6) +
           " " + detail::fixed(r.w, 6) + " " + detail::fixed(r.h, 6) + "\n";
  }
  return out;
}

// --- Masks -------------------------------------------------------------------

PixelMask rasterize_mask(const AnnotatedImage& image) {
  PixelMask mask;
  mask.bits.setConstant(image.height, image.width, false);
  // Pixel j is covered iff lo <= j + 0.5 < hi, i.e. ceil(lo - 0.5) <= j < ceil(hi - 0.5).
  const auto first = [](double lo, int n) {
    return std::clamp(static_cast<int>(std::ceil(lo - 0.5)), 0, n);
  };
  for (const auto& lb : image.boxes) {
    const int c0 = first(lb.box.x_min, image.width);
    const int c1 = first(lb.box.x_max, image.width);
    const int r0 = first(lb.box.y_min, image.height);
    const int r1 = first(lb.box.y_max, image.height);
    if (c1 > c0 && r1 > r0) mask.bits.block(r0, c0, r1 - r0, c1 - c0).setConstant(true);
  }
  return mask;
}

void write_pgm(const PixelMask& mask, std::ostream& out) {
  out << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
  for (Eigen::Index r = 0; r < mask.bits.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.bits.cols(); ++c)
      out.put(mask.bits(r, c) ? static_cast<char>(255) : static_cast<char>(0));
}

}  // namespace alpr
