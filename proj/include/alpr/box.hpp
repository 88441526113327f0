#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace alpr {

/// Axis-aligned rectangle in continuous pixel coordinates (origin top-left).
/// The box covers [x_min, x_max) x [y_min, y_max).
template <typename Scalar>
struct Box {
  Scalar x_min{};
  Scalar y_min{};
  Scalar x_max{};
  Scalar y_max{};

  Scalar width() const { return x_max - x_min; }
  Scalar height() const { return y_max - y_min; }
  Scalar area() const { return width() * height(); }

  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min < x_max && y_min < y_max;
  }

  bool contains(Scalar x, Scalar y) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max;
  }

  /// Columns are the top-left, top-right, bottom-right and bottom-left corners.
  Eigen::Matrix<Scalar, 2, 4> corners() const {
    Eigen::Matrix<Scalar, 2, 4> c;
    c << x_min, x_max, x_max, x_min,  //
        y_min, y_min, y_max, y_max;
    return c;
  }

  template <typename Other>
  Box<Other> cast() const {
    return {static_cast<Other>(x_min), static_cast<Other>(y_min), static_cast<Other>(x_max),
            static_cast<Other>(y_max)};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

using BoundingBox = Box<double>;

/// Axis-aligned hull of a 2xN point set.
template <typename Derived>
Box<typename Derived::Scalar> hull(const Eigen::MatrixBase<Derived>& points) {
  return {points.row(0).minCoeff(), points.row(1).minCoeff(), points.row(0).maxCoeff(),
          points.row(1).maxCoeff()};
}

template <typename Scalar>
Scalar intersection_area(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const Scalar h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return (w > Scalar(0) && h > Scalar(0)) ? w * h : Scalar(0);
}

/// Clips to [0,width] x [0,height]. The result may be degenerate.
template <typename Scalar>
Box<Scalar> clip(const Box<Scalar>& b, Scalar width, Scalar height) {
  return {std::clamp(b.x_min, Scalar(0), width), std::clamp(b.y_min, Scalar(0), height),
          std::clamp(b.x_max, Scalar(0), width), std::clamp(b.y_max, Scalar(0), height)};
}

template <typename Scalar>
Box<Scalar> translated(const Box<Scalar>& b, Scalar dx, Scalar dy) {
  return {b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy};
}

template <typename Scalar>
Box<Scalar> scaled(const Box<Scalar>& b, Scalar sx, Scalar sy) {
  return {b.x_min * sx, b.y_min * sy, b.x_max * sx, b.y_max * sy};
}

}  // namespace alpr
