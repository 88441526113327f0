#pragma once

#include "alpr/annot.hpp"
#include "alpr/raster.hpp"
#include "alpr/rng.hpp"

#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alpr {

/// Augmentation magnitudes and probabilities for one training phase.
/// Vertical flips and perspective warps are deliberately not representable.
struct AugmentationPhasePreset {
  double rotation_deg = 0;      // rotation drawn from ±rotation_deg
  double translation_frac = 0;  // shift drawn from ±translation_frac of each dimension
  double scale_factor = 0;      // scale drawn from [1 - scale_factor, 1 + scale_factor]
  double shear_deg = 0;         // x-shear drawn from ±shear_deg
  double hflip_p = 0;
  double mosaic_p = 0;
  double mixup_p = 0;
  double copypaste_p = 0;
  double hue_frac = 0;  // hue shift drawn from ±hue_frac of a full turn
  double sat_frac = 0;  // saturation gain drawn from 1 ± sat_frac
  double val_frac = 0;  // value gain drawn from 1 ± val_frac

  void validate() const;
  friend bool operator==(const AugmentationPhasePreset&, const AugmentationPhasePreset&) = default;
};

/// Spatially intensive first phase.
AugmentationPhasePreset stage1_preset();
/// Photometric fine-tuning phase with reduced geometry and composites.
AugmentationPhasePreset stage2_preset();

/// Applies `key = value` (or `key value`) lines over `base`. Keys are the
/// preset field names; `#` starts a comment. Unknown keys are a ParseError.
AugmentationPhasePreset parse_preset_overrides(std::string_view text, AugmentationPhasePreset base);

struct AffineParams {
  double rotation_deg = 0;  // counterclockwise as displayed (y axis down)
  double tx = 0;            // fraction of width
  double ty = 0;            // fraction of height
  double scale = 1;
  double shear_deg = 0;  // x-shear

  bool is_identity() const {
    return rotation_deg == 0 && tx == 0 && ty == 0 && scale == 1 && shear_deg == 0;
  }
};

struct LabeledImage {
  AnnotatedImage labels;
  RasterImage pixels;
};

/// Source-to-destination transform: warp about the image center, then shift.
Eigen::Affine2d affine_matrix(const AffineParams& params, int width, int height);

/// Maps a box through `transform` by its four corners, takes the axis-aligned
/// hull and clips it. The box is dropped when the clipped area is below 1 px²
/// or below 10% of the unclipped hull.
std::optional<BoundingBox> transform_box(const BoundingBox& box, const Eigen::Affine2d& transform,
                                         int width, int height);

/// Bilinear warp; uncovered pixels are filled with gray 114.
LabeledImage apply_affine(const LabeledImage& sample, const AffineParams& params);
LabeledImage hflip(const LabeledImage& sample);
LabeledImage hsv_jitter(const LabeledImage& sample, double hue_shift, double sat_gain, double val_gain);

RasterImage resize_bilinear(const RasterImage& image, int width, int height);
LabeledImage resize(const LabeledImage& sample, int width, int height);

/// Places four samples on a 2W x 2H canvas split at integer point (cx, cy):
/// top-left, top-right, bottom-left, bottom-right. W x H is the first sample's
/// size; each sample is resized to fill its quadrant.
LabeledImage mosaic_canvas(std::span<const LabeledImage> four, int cx, int cy);
/// Mosaic center drawn from W·(1 ± center_jitter), H·(1 ± center_jitter); the
/// canvas is then 2x box-downsampled back to W x H.
LabeledImage mosaic(std::span<const LabeledImage> four, double center_jitter, Rng& rng);

/// lambda·a + (1−lambda)·b per channel, rounded half away from zero; labels
/// of both inputs are kept.
LabeledImage mixup(const LabeledImage& a, const LabeledImage& b, double lambda);

/// Pastes one random source object at a random spot of `dst` whose overlap
/// with every existing box (intersection over the pasted area) is below 0.3.
/// Gives up after 20 placements and returns `dst` unchanged.
LabeledImage copy_paste(const LabeledImage& dst, const LabeledImage& src, Rng& rng);

struct PipelineOptions {
  double mosaic_center_jitter = 0.25;
  double mixup_lambda = 0.5;
  /// When set, lambda is drawn from Beta(alpha, alpha) instead.
  std::optional<double> mixup_beta_alpha;
  /// Worker threads for sample_pipeline. Output does not depend on it.
  unsigned threads = 1;
};

/// What the pipeline did to one item.
struct AppliedOps {
  bool mosaic = false;
  bool mixup = false;
  bool copy_paste = false;  // attempted
  bool hflip = false;
  AffineParams affine;
  double hue_shift = 0;
  double sat_gain = 1;
  double val_gain = 1;
};

struct AugmentedItem {
  LabeledImage sample;
  AppliedOps applied;
};

/// Augments batch[source] with the generator Rng::stream(seed, stream_index):
/// mosaic (3 partners drawn with replacement), mixup, copy-paste, affine,
/// horizontal flip, then HSV jitter, each gated by the preset's probability.
AugmentedItem augment_item(std::span<const LabeledImage> batch, std::size_t source,
                           const AugmentationPhasePreset& preset, std::uint64_t seed,
                           std::uint64_t stream_index, const PipelineOptions& options = {});

/// augment_item for every batch position i with stream index i.
std::vector<AugmentedItem> sample_pipeline(std::span<const LabeledImage> batch,
                                           const AugmentationPhasePreset& preset, std::uint64_t seed,
                                           const PipelineOptions& options = {});

}  // namespace alpr
