#pragma once

// Frame in, percept out: preprocess -> encode -> render against a prebuilt
// sensitivity map.
//
// A PipelineState is an immutable snapshot. Any number of threads may call
// process_frame on the same state; update_config returns a new snapshot and
// leaves the old one valid for frames already in flight.

#include <cstdint>
#include <memory>

#include "spv/frame.hpp"
#include "spv/geometry.hpp"
#include "spv/phosphene.hpp"
#include "spv/vision.hpp"

namespace spv {

struct BundleConfig {
  AxonGrowthParams growth;
  RetinalPoint od_center = kDefaultOpticDisc;

  friend bool operator==(const BundleConfig&, const BundleConfig&) = default;
};

struct PipelineConfig {
  GridLayout array;
  BundleConfig bundle;
  ModelParams model;
  PreprocessMode preprocess;
  EncoderConfig encoder;
  PerceptGrid grid;
};

/// Throws ValidationError naming the offending stage.
void validate(const PipelineConfig& cfg);

struct StageTimings {
  double preprocess_us = 0.0;
  double encode_us = 0.0;
  double render_us = 0.0;

  double total_us() const { return preprocess_us + encode_us + render_us; }
};

struct FrameReport {
  Frame percept;
  Stimulus stimulus;
  StageTimings timings;
  std::uint64_t generation = 0;
};

class PipelineState {
 public:
  const PipelineConfig& config() const { return *config_; }
  const ElectrodeArray& array() const { return *array_; }
  /// Null for the scoreboard model.
  const AxonBundle* bundle() const { return bundle_.get(); }
  const SensitivityMap& map() const { return *map_; }
  std::uint64_t generation() const { return generation_; }

  /// Shared handles, for checking which stages an update reused.
  const std::shared_ptr<const SensitivityMap>& map_handle() const { return map_; }
  const std::shared_ptr<const AxonBundle>& bundle_handle() const { return bundle_; }
  const std::shared_ptr<const ElectrodeArray>& array_handle() const { return array_; }

 private:
  friend PipelineState build_pipeline(const PipelineConfig&);
  friend PipelineState update_config(const PipelineState&, const PipelineConfig&);

  std::shared_ptr<const PipelineConfig> config_;
  std::shared_ptr<const ElectrodeArray> array_;
  std::shared_ptr<const AxonBundle> bundle_;
  std::shared_ptr<const SensitivityMap> map_;
  std::uint64_t generation_ = 0;
};

PipelineState build_pipeline(const PipelineConfig& cfg);

/// In mask mode a non-null `mask` replaces the configured one for this frame.
FrameReport process_frame(const PipelineState& state, const Frame& f,
                          const GazeTransform& gaze, const Frame* mask = nullptr);

/// Rebuilds only the stages whose inputs changed; generation + 1. On error the
/// previous state is untouched.
PipelineState update_config(const PipelineState& state, const PipelineConfig& cfg);

}  // namespace spv
