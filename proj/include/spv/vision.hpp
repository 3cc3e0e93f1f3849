#pragma once

// Scene preprocessing and scene-to-stimulus encoding.

#include <memory>
#include <string>

#include "spv/frame.hpp"
#include "spv/geometry.hpp"
#include "spv/phosphene.hpp"

namespace spv {

enum class PreprocessKind { None, Edges, Contrast, Mask };

struct PreprocessMode {
  PreprocessKind kind = PreprocessKind::None;
  /// Binary mask for Mask mode; values > 0.5 keep the pixel.
  std::shared_ptr<const Frame> mask;
  /// Where the mask came from (file or directory); informational only.
  std::string mask_path;

  static PreprocessMode none() { return {}; }
  static PreprocessMode edges() { return {PreprocessKind::Edges, nullptr, {}}; }
  static PreprocessMode contrast() { return {PreprocessKind::Contrast, nullptr, {}}; }
  static PreprocessMode with_mask(Frame mask) {
    return {PreprocessKind::Mask, std::make_shared<const Frame>(std::move(mask)), {}};
  }
};

/// Visual-angle offset and in-plane rotation of the implant's line of sight
/// relative to the scene frame.
struct GazeTransform {
  double dx_deg = 0.0;
  double dy_deg = 0.0;
  double rot_deg = 0.0;

  friend bool operator==(const GazeTransform&, const GazeTransform&) = default;
};

void validate(const GazeTransform& gaze);

struct EncoderConfig {
  double source_fov_x_deg = 60.0;
  double source_fov_y_deg = 45.0;
  double sample_radius_frac = 0.5;
  double out_of_frame_value = 0.0;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

void validate(const EncoderConfig& cfg);

Frame edge_enhance(const Frame& f);

/// Maps the 2nd percentile to 0 and the 98th to 1 (linear-interpolated
/// percentiles), clamped. Frames with p2 == p98 come back unchanged.
Frame contrast_stretch(const Frame& f);

Frame apply_mask(const Frame& f, const Frame& mask);

Frame preprocess(const Frame& f, const PreprocessMode& mode);

/// Linear-interpolated percentile (q in [0, 100]) of the frame's values.
double percentile(const Frame& f, double q);

/// Scene position (degrees) seen by a retinal location under `gaze`.
VisualFieldPoint scene_point(RetinalPoint retina, const GazeTransform& gaze);

/// Mean luminance over each electrode's receptive disc in the source frame.
Stimulus encode_frame(const Frame& f, const ElectrodeArray& array,
                      const EncoderConfig& cfg, const GazeTransform& gaze);

}  // namespace spv
