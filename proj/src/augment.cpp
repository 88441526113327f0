#include "alpr/augment.hpp"

#include "alpr/detmetrics.hpp"
#include "alpr/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <utility>

namespace alpr {

// --- Presets -----------------------------------------------------------------

void AugmentationPhasePreset::validate() const {
  for (double p : {hflip_p, mosaic_p, mixup_p, copypaste_p})
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("augmentation probabilities must lie in [0,1]");
  for (double m : {rotation_deg, translation_frac, scale_factor, shear_deg, hue_frac, sat_frac, val_frac})
    if (!(m >= 0.0) || !std::isfinite(m)) throw DataError("augmentation magnitudes must be finite and >= 0");
  if (rotation_deg >= 90.0 || shear_deg >= 90.0) throw DataError("rotation and shear must stay below 90 degrees");
  if (scale_factor >= 1.0) throw DataError("scale_factor must be < 1 so the scale stays positive");
}

AugmentationPhasePreset stage1_preset() {
  AugmentationPhasePreset p;
  p.rotation_deg = 8;
  p.translation_frac = 0.15;
  p.scale_factor = 0.7;
  p.shear_deg = 3;
  p.mosaic_p = 1.0;
  p.mixup_p = 0.15;
  p.copypaste_p = 0.40;
  p.hflip_p = 0.50;
  p.hue_frac = 0.01;
  p.sat_frac = 0.80;
  p.val_frac = 0.50;
  return p;
}

AugmentationPhasePreset stage2_preset() {
  AugmentationPhasePreset p;
  p.rotation_deg = 3;
  p.translation_frac = 0.08;
  p.scale_factor = 0.4;
  p.shear_deg = 1;
  p.mosaic_p = 0.70;
  p.mixup_p = 0.08;
  p.copypaste_p = 0.20;
  p.hflip_p = 0.30;
  p.hue_frac = 0.02;
  p.sat_frac = 0.90;
  p.val_frac = 0.70;
  return p;
}

AugmentationPhasePreset parse_preset_overrides(std::string_view text, AugmentationPhasePreset base) {
  using Field = double AugmentationPhasePreset::*;
  static const std::pair<std::string_view, Field> fields[] = {
      {"rotation_deg", &AugmentationPhasePreset::rotation_deg},
      {"translation_frac", &AugmentationPhasePreset::translation_frac},
      {"scale_factor", &AugmentationPhasePreset::scale_factor},
      {"shear_deg", &AugmentationPhasePreset::shear_deg},
      {"hflip_p", &AugmentationPhasePreset::hflip_p},
      {"mosaic_p", &AugmentationPhasePreset::mosaic_p},
      {"mixup_p", &AugmentationPhasePreset::mixup_p},
      {"copypaste_p", &AugmentationPhasePreset::copypaste_p},
      {"hue_frac", &AugmentationPhasePreset::hue_frac},
      {"sat_frac", &AugmentationPhasePreset::sat_frac},
      {"val_frac", &AugmentationPhasePreset::val_frac},
  };
  int line_no = 0;
  for (const auto raw : detail::lines(text)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    auto line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    std::string_view key;
    std::string_view value;
    if (const auto eq = line.find('='); eq != std::string_view::npos) {
      key = detail::trim(line.substr(0, eq));
      value = detail::trim(line.substr(eq + 1));
    } else {
      const auto parts = detail::split_ws(line);
      if (parts.size() != 2) throw ParseError(where, "expected 'key = value'");
      key = parts[0];
      value = parts[1];
    }
    const auto it = std::find_if(std::begin(fields), std::end(fields),
                                 [&](const auto& f) { return f.first == key; });
    if (it == std::end(fields)) throw ParseError(where, "unknown preset field '" + std::string(key) + "'");
    const auto v = detail::parse_double(value);
    if (!v) throw ParseError(where, "not a number: '" + std::string(value) + "'");
    base.*(it->second) = *v;
  }
  base.validate();
  return base;
}

// --- Geometry ----------------------------------------------------------------

namespace {

constexpr std::uint8_t kFill = 114;
constexpr double kMinBoxArea = 1.0;
constexpr double kMinAreaFraction = 0.10;
constexpr double kMaxPasteOverlap = 0.30;
constexpr int kPasteTries = 20;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)); }

RasterImage warp(const RasterImage& src, const Eigen::Affine2d& transform) {
  const int w = src.width();
  const int h = src.height();
  const Eigen::Affine2d inv = transform.inverse();
  RasterImage out;
  for (auto& p : out.planes) p.resize(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector2d s = inv * Eigen::Vector2d(x + 0.5, y + 0.5);
      const double fx = s.x() - 0.5;
      const double fy = s.y() - 0.5;
      const double x0 = std::floor(fx);
      const double y0 = std::floor(fy);
      const double ax = fx - x0;
      const double ay = fy - y0;
      const int ix = static_cast<int>(x0);
      const int iy = static_cast<int>(y0);
      for (int c = 0; c < 3; ++c) {
        const auto tap = [&](int xx, int yy) -> double {
          return (xx >= 0 && xx < w && yy >= 0 && yy < h) ? src.planes[c](yy, xx) : kFill;
        };
        double v = (1 - ax) * (1 - ay) * tap(ix, iy);
        if (ax > 0) v += ax * (1 - ay) * tap(ix + 1, iy);
        if (ay > 0) v += (1 - ax) * ay * tap(ix, iy + 1);
        if (ax > 0 && ay > 0) v += ax * ay * tap(ix + 1, iy + 1);
        out.planes[c](y, x) = to_byte(v);
      }
    }
  }
  return out;
}

void keep_surviving(AnnotatedImage& labels) {
  std::erase_if(labels.boxes, [](const LabeledBox& lb) { return !lb.box.valid() || lb.box.area() < kMinBoxArea; });
}

}  // namespace

Eigen::Affine2d affine_matrix(const AffineParams& params, int width, int height) {
  const double a = radians(params.rotation_deg);
  Eigen::Matrix2d rotation;
  rotation << std::cos(a), std::sin(a), -std::sin(a), std::cos(a);
  Eigen::Matrix2d shear;
  shear << 1.0, std::tan(radians(params.shear_deg)), 0.0, 1.0;
  const Eigen::Vector2d center(width / 2.0, height / 2.0);
  const Eigen::Vector2d shift(params.tx * width, params.ty * height);

  Eigen::Affine2d linear = Eigen::Affine2d::Identity();
  linear.linear() = shear * rotation * params.scale;
  return Eigen::Translation2d(center + shift) * linear * Eigen::Translation2d(-center);
}

std::optional<BoundingBox> transform_box(const BoundingBox& box, const Eigen::Affine2d& transform,
                                         int width, int height) {
  const Eigen::Matrix<double, 2, 4> corners =
      (transform.linear() * box.corners()).colwise() + transform.translation();
  const BoundingBox moved = hull(corners);
  const BoundingBox clipped = clip(moved, static_cast<double>(width), static_cast<double>(height));
  if (!clipped.valid() || clipped.area() < kMinBoxArea || clipped.area() < kMinAreaFraction * moved.area())
    return std::nullopt;
  return clipped;
}

LabeledImage apply_affine(const LabeledImage& sample, const AffineParams& params) {
  if (params.is_identity()) return sample;
  if (!(params.scale > 0.0)) throw DataError("affine scale must be positive");
  const int w = sample.pixels.width();
  const int h = sample.pixels.height();
  const Eigen::Affine2d m = affine_matrix(params, w, h);

  LabeledImage out{sample.labels, warp(sample.pixels, m)};
  out.labels.boxes.clear();
  for (const auto& lb : sample.labels.boxes)
    if (auto b = transform_box(lb.box, m, w, h)) out.labels.boxes.push_back({*b, lb.class_id});
  return out;
}

LabeledImage hflip(const LabeledImage& sample) {
  LabeledImage out = sample;
  for (auto& p : out.pixels.planes) p = p.rowwise().reverse().eval();
  const double w = sample.labels.width;
  for (auto& lb : out.labels.boxes) lb.box = {w - lb.box.x_max, lb.box.y_min, w - lb.box.x_min, lb.box.y_max};
  return out;
}

// --- Photometric -------------------------------------------------------------

namespace {

// r, g, b in [0,1]; h in [0,360).
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double c = mx - mn;
  v = mx;
  s = mx > 0 ? c / mx : 0.0;
  if (c == 0) {
    h = 0;
  } else if (mx == r) {
    h = 60.0 * std::fmod((g - b) / c + 6.0, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / c + 2.0);
  } else {
    h = 60.0 * ((r - g) / c + 4.0);
  }
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace

LabeledImage hsv_jitter(const LabeledImage& sample, double hue_shift, double sat_gain, double val_gain) {
  if (hue_shift == 0 && sat_gain == 1 && val_gain == 1) return sample;
  LabeledImage out = sample;
  const int w = sample.pixels.width();
  const int h = sample.pixels.height();
  const double shift_deg = hue_shift * 360.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double hh, s, v;
      rgb_to_hsv(sample.pixels.planes[0](y, x) / 255.0, sample.pixels.planes[1](y, x) / 255.0,
                 sample.pixels.planes[2](y, x) / 255.0, hh, s, v);
      hh = std::fmod(hh + shift_deg, 360.0);
      if (hh < 0) hh += 360.0;
      s = std::clamp(s * sat_gain, 0.0, 1.0);
      v = std::clamp(v * val_gain, 0.0, 1.0);
      double r, g, b;
      hsv_to_rgb(hh, s, v, r, g, b);
      out.pixels.planes[0](y, x) = to_byte(r * 255.0);
      out.pixels.planes[1](y, x) = to_byte(g * 255.0);
      out.pixels.planes[2](y, x) = to_byte(b * 255.0);
    }
  }
  return out;
}

// --- Resampling and composites -----------------------------------------------

RasterImage resize_bilinear(const RasterImage& image, int width, int height) {
  if (width <= 0 || height <= 0) throw DataError("resize target must be positive");
  if (width == image.width() && height == image.height()) return image;
  const int sw = image.width();
  const int sh = image.height();
  const double kx = static_cast<double>(sw) / width;
  const double ky = static_cast<double>(sh) / height;
  RasterImage out;
  for (auto& p : out.planes) p.resize(height, width);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * ky - 0.5, 0.0, sh - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double ay = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * kx - 0.5, 0.0, sw - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double ax = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const auto& p = image.planes[c];
        const double v = (1 - ay) * ((1 - ax) * p(y0, x0) + ax * p(y0, x1)) +
                         ay * ((1 - ax) * p(y1, x0) + ax * p(y1, x1));
        out.planes[c](y, x) = to_byte(v);
      }
    }
  }
  return out;
}

LabeledImage resize(const LabeledImage& sample, int width, int height) {
  LabeledImage out{sample.labels, resize_bilinear(sample.pixels, width, height)};
  const double sx = static_cast<double>(width) / sample.labels.width;
  const double sy = static_cast<double>(height) / sample.labels.height;
  out.labels.width = width;
  out.labels.height = height;
  for (auto& lb : out.labels.boxes) lb.box = scaled(lb.box, sx, sy);
  keep_surviving(out.labels);
  return out;
}

LabeledImage mosaic_canvas(std::span<const LabeledImage> four, int cx, int cy) {
  if (four.size() != 4) throw DataError("mosaic needs exactly 4 images");
  const int w = four[0].pixels.width();
  const int h = four[0].pixels.height();
  if (cx < 1 || cx >= 2 * w || cy < 1 || cy >= 2 * h) throw DataError("mosaic center outside canvas");

  LabeledImage out;
  out.labels.width = 2 * w;
  out.labels.height = 2 * h;
  out.labels.source_id = four[0].labels.source_id;
  out.pixels = RasterImage::filled(2 * w, 2 * h, kFill, kFill, kFill);

  const int x0[4] = {0, cx, 0, cx};
  const int y0[4] = {0, 0, cy, cy};
  const int qw[4] = {cx, 2 * w - cx, cx, 2 * w - cx};
  const int qh[4] = {cy, cy, 2 * h - cy, 2 * h - cy};
  for (int q = 0; q < 4; ++q) {
    const LabeledImage part = resize(four[q], qw[q], qh[q]);
    for (int c = 0; c < 3; ++c) out.pixels.planes[c].block(y0[q], x0[q], qh[q], qw[q]) = part.pixels.planes[c];
    for (const auto& lb : part.labels.boxes)
      out.labels.boxes.push_back({translated(lb.box, double(x0[q]), double(y0[q])), lb.class_id});
  }
  return out;
}

LabeledImage mosaic(std::span<const LabeledImage> four, double center_jitter, Rng& rng) {
  if (four.size() != 4) throw DataError("mosaic needs exactly 4 images");
  const int w = four[0].pixels.width();
  const int h = four[0].pixels.height();
  const int cx = std::clamp(static_cast<int>(std::lround(w * (1.0 + rng.symmetric(center_jitter)))), 1, 2 * w - 1);
  const int cy = std::clamp(static_cast<int>(std::lround(h * (1.0 + rng.symmetric(center_jitter)))), 1, 2 * h - 1);
  const LabeledImage canvas = mosaic_canvas(four, cx, cy);

  LabeledImage out;
  out.labels.width = w;
  out.labels.height = h;
  out.labels.source_id = canvas.labels.source_id;
  for (int c = 0; c < 3; ++c) {
    const auto& src = canvas.pixels.planes[c];
    auto& dst = out.pixels.planes[c];
    dst.resize(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int sum = src(2 * y, 2 * x) + src(2 * y, 2 * x + 1) + src(2 * y + 1, 2 * x) + src(2 * y + 1, 2 * x + 1);
        dst(y, x) = static_cast<std::uint8_t>((sum + 2) / 4);
      }
  }
  for (const auto& lb : canvas.labels.boxes) out.labels.boxes.push_back({scaled(lb.box, 0.5, 0.5), lb.class_id});
  keep_surviving(out.labels);
  return out;
}

LabeledImage mixup(const LabeledImage& a, const LabeledImage& b, double lambda) {
  if (a.pixels.width() != b.pixels.width() || a.pixels.height() != b.pixels.height())
    throw DataError("mixup inputs must have equal dimensions");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DataError("mixup lambda must lie in [0,1]");
  LabeledImage out = a;
  for (int c = 0; c < 3; ++c) {
    const Eigen::ArrayXXd blended =
        lambda * a.pixels.planes[c].cast<double>() + (1.0 - lambda) * b.pixels.planes[c].cast<double>();
    out.pixels.planes[c] = blended.round().cwiseMax(0.0).cwiseMin(255.0).cast<std::uint8_t>();
  }
  out.labels.boxes.insert(out.labels.boxes.end(), b.labels.boxes.begin(), b.labels.boxes.end());
  return out;
}

LabeledImage copy_paste(const LabeledImage& dst, const LabeledImage& src, Rng& rng) {
  if (src.labels.boxes.empty()) return dst;
  const LabeledBox& pick = src.labels.boxes[rng.index(src.labels.boxes.size())];
  const int sw = src.pixels.width();
  const int sh = src.pixels.height();
  const int c0 = std::clamp(static_cast<int>(std::floor(pick.box.x_min)), 0, sw);
  const int c1 = std::clamp(static_cast<int>(std::ceil(pick.box.x_max)), 0, sw);
  const int r0 = std::clamp(static_cast<int>(std::floor(pick.box.y_min)), 0, sh);
  const int r1 = std::clamp(static_cast<int>(std::ceil(pick.box.y_max)), 0, sh);
  const int cw = c1 - c0;
  const int ch = r1 - r0;
  const int w = dst.pixels.width();
  const int h = dst.pixels.height();
  if (cw <= 0 || ch <= 0 || cw > w || ch > h) return dst;

  for (int attempt = 0; attempt < kPasteTries; ++attempt) {
    const int x = static_cast<int>(rng.index(static_cast<std::size_t>(w - cw + 1)));
    const int y = static_cast<int>(rng.index(static_cast<std::size_t>(h - ch + 1)));
    const BoundingBox placed = translated(pick.box, double(x - c0), double(y - r0));
    const bool clear = std::all_of(dst.labels.boxes.begin(), dst.labels.boxes.end(), [&](const LabeledBox& e) {
      return intersection_area(placed, e.box) < kMaxPasteOverlap * placed.area();
    });
    if (!clear) continue;
    LabeledImage out = dst;
    for (int c = 0; c < 3; ++c) out.pixels.planes[c].block(y, x, ch, cw) = src.pixels.planes[c].block(r0, c0, ch, cw);
    out.labels.boxes.push_back({placed, pick.class_id});
    return out;
  }
  return dst;
}

// --- Pipeline ----------------------------------------------------------------

AugmentedItem augment_item(std::span<const LabeledImage> batch, std::size_t source,
                           const AugmentationPhasePreset& preset, std::uint64_t seed,
                           std::uint64_t stream_index, const PipelineOptions& options) {
  if (source >= batch.size()) throw DataError("augment_item: source index outside batch");
  Rng rng = Rng::stream(seed, stream_index);
  AugmentedItem item{batch[source], {}};
  LabeledImage& s = item.sample;
  AppliedOps& ops = item.applied;

  if (rng.bernoulli(preset.mosaic_p)) {
    const LabeledImage parts[4] = {s, batch[rng.index(batch.size())], batch[rng.index(batch.size())],
                                   batch[rng.index(batch.size())]};
    s = mosaic(parts, options.mosaic_center_jitter, rng);
    ops.mosaic = true;
  }
  if (rng.bernoulli(preset.mixup_p)) {
    const LabeledImage partner = resize(batch[rng.index(batch.size())], s.pixels.width(), s.pixels.height());
    const double lambda =
        options.mixup_beta_alpha ? rng.beta(*options.mixup_beta_alpha, *options.mixup_beta_alpha) : options.mixup_lambda;
    s = mixup(s, partner, lambda);
    ops.mixup = true;
  }
  if (rng.bernoulli(preset.copypaste_p)) {
    s = copy_paste(s, batch[rng.index(batch.size())], rng);
    ops.copy_paste = true;
  }

  ops.affine.rotation_deg = rng.symmetric(preset.rotation_deg);
  ops.affine.tx = rng.symmetric(preset.translation_frac);
  ops.affine.ty = rng.symmetric(preset.translation_frac);
  ops.affine.scale = 1.0 + rng.symmetric(preset.scale_factor);
  ops.affine.shear_deg = rng.symmetric(preset.shear_deg);
  s = apply_affine(s, ops.affine);

  if (rng.bernoulli(preset.hflip_p)) {
    s = hflip(s);
    ops.hflip = true;
  }

  ops.hue_shift = rng.symmetric(preset.hue_frac);
  ops.sat_gain = 1.0 + rng.symmetric(preset.sat_frac);
  ops.val_gain = 1.0 + rng.symmetric(preset.val_frac);
  s = hsv_jitter(s, ops.hue_shift, ops.sat_gain, ops.val_gain);
  return item;
}

std::vector<AugmentedItem> sample_pipeline(std::span<const LabeledImage> batch,
                                           const AugmentationPhasePreset& preset, std::uint64_t seed,
                                           const PipelineOptions& options) {
  if (batch.empty()) throw DataError("sample_pipeline: empty batch");
  preset.validate();
  std::vector<AugmentedItem> out(batch.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(batch.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) out[i] = augment_item(batch, i, preset, seed, i, options);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < batch.size(); i += workers)
            out[i] = augment_item(batch, i, preset, seed, i, options);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace alpr
