#pragma once

#include "alpr/box.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace alpr {

using Warnings = std::vector<std::string>;

struct LabeledBox {
  BoundingBox box;
  int class_id = 0;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

/// Ordered class-name table. Ids are positions in the table.
class ClassTable {
 public:
  ClassTable() = default;
  explicit ClassTable(std::vector<std::string> names, bool frozen = false);

  /// Id for `name`. Unknown names are appended unless the table is frozen,
  /// in which case a DataError is thrown.
  int id_of(std::string_view name);
  std::optional<int> find(std::string_view name) const;
  const std::string& name(int id) const;
  bool contains(int id) const { return id >= 0 && static_cast<std::size_t>(id) < names_.size(); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  /// One name per line.
  static ClassTable parse(std::string_view text, bool frozen = true);
  std::string to_text() const;

 private:
  std::vector<std::string> names_;
  bool frozen_ = false;
};

/// Image dimensions plus labeled boxes. Every box lies inside
/// [0,width] x [0,height].
struct AnnotatedImage {
  int width = 0;
  int height = 0;
  std::vector<LabeledBox> boxes;
  std::string source_id;

  friend bool operator==(const AnnotatedImage&, const AnnotatedImage&) = default;
};

/// Normalized YOLO record.
struct YoloRecord {
  int class_id = 0;
  double cx = 0;
  double cy = 0;
  double w = 0;
  double h = 0;
};

/// Binary occupancy mask, row-major, one entry per pixel.
struct PixelMask {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bits;

  int width() const { return static_cast<int>(bits.cols()); }
  int height() const { return static_cast<int>(bits.rows()); }
  std::size_t popcount() const { return static_cast<std::size_t>(bits.count()); }
};

/// Clips `box` to the image. Returns nullopt when nothing of positive area is
/// left. Both events are reported to `warnings` (when given) prefixed by `where`.
std::optional<BoundingBox> clip_to_image(const BoundingBox& box, int width, int height,
                                         std::string_view where, Warnings* warnings);

/// Pascal VOC subset: annotation/size/{width,height} and
/// annotation/object/{name,bndbox/{xmin,ymin,xmax,ymax}}.
///
/// VOC corners are 1-based and inclusive; the min corner is shifted by -1 and
/// the max corner kept, so xmax - xmin + 1 stays the pixel count.
AnnotatedImage parse_voc(std::string_view xml, ClassTable& classes, Warnings* warnings = nullptr);
std::string emit_voc(const AnnotatedImage& image, const ClassTable& classes,
                     std::string_view filename = {});

/// One "class cx cy w h" record per nonempty line, all normalized to [0,1].
AnnotatedImage parse_yolo(std::string_view text, int width, int height,
                          Warnings* warnings = nullptr);
YoloRecord to_yolo(const LabeledBox& labeled, int width, int height);
/// One line per box, six decimals, LF terminated.
std::string emit_yolo(const AnnotatedImage& image);

/// bit(i,j) is set iff the pixel center (j+0.5, i+0.5) lies inside some box.
PixelMask rasterize_mask(const AnnotatedImage& image);
/// Binary PGM (P5), 0 or 255 per pixel.
void write_pgm(const PixelMask& mask, std::ostream& out);

}  // namespace alpr
