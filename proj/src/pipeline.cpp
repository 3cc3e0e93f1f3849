#include "spv/pipeline.hpp"

#include <chrono>

#include "spv/errors.hpp"

namespace spv {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

bool map_inputs_equal(const PipelineConfig& a, const PipelineConfig& b) {
  if (!(a.array == b.array) || !(a.grid == b.grid)) return false;
  const ModelParams& ma = a.model;
  const ModelParams& mb = b.model;
  if (ma.kind != mb.kind || ma.rho_um != mb.rho_um || ma.eps != mb.eps) return false;
  if (ma.kind == ModelKind::AxonMap) {
    return ma.lambda_um == mb.lambda_um && a.bundle == b.bundle;
  }
  return true;
}

std::shared_ptr<const SensitivityMap> make_map(const ElectrodeArray& array,
                                               const AxonBundle* bundle,
                                               const PipelineConfig& cfg) {
  return std::make_shared<const SensitivityMap>(
      build_sensitivity_map(array, bundle, cfg.model, cfg.grid));
}

}  // namespace

void validate(const PipelineConfig& cfg) {
  validate(cfg.array);
  validate(cfg.model);
  validate(cfg.grid);
  validate(cfg.encoder);
  if (cfg.model.kind == ModelKind::AxonMap) {
    validate(cfg.bundle.growth);
    try {
      validate(cfg.bundle.od_center);
    } catch (const ValidationError& e) {
      throw ValidationError("bundle", e.detail());
    }
  }
  if (cfg.preprocess.mask) {
    try {
      validate(*cfg.preprocess.mask);
    } catch (const ValidationError& e) {
      throw ValidationError("preprocess", "mask: " + e.detail());
    }
  }
}

PipelineState build_pipeline(const PipelineConfig& cfg) {
  validate(cfg);
  PipelineState state;
  state.config_ = std::make_shared<const PipelineConfig>(cfg);
  state.array_ = std::make_shared<const ElectrodeArray>(build_grid_array(cfg.array));
  if (cfg.model.kind == ModelKind::AxonMap) {
    state.bundle_ = std::make_shared<const AxonBundle>(
        build_bundle(cfg.bundle.growth, cfg.bundle.od_center));
  }
  state.map_ = make_map(*state.array_, state.bundle_.get(), cfg);
  state.generation_ = 0;
  return state;
}

PipelineState update_config(const PipelineState& state, const PipelineConfig& cfg) {
  validate(cfg);
  const PipelineConfig& old = state.config();

  PipelineState next;
  next.config_ = std::make_shared<const PipelineConfig>(cfg);
  next.array_ = old.array == cfg.array
                    ? state.array_
                    : std::make_shared<const ElectrodeArray>(build_grid_array(cfg.array));
  if (cfg.model.kind == ModelKind::AxonMap) {
    next.bundle_ = state.bundle_ && old.bundle == cfg.bundle
                       ? state.bundle_
                       : std::make_shared<const AxonBundle>(
                             build_bundle(cfg.bundle.growth, cfg.bundle.od_center));
  }
  next.map_ = map_inputs_equal(old, cfg)
                  ? state.map_
                  : make_map(*next.array_, next.bundle_.get(), cfg);
  next.generation_ = state.generation_ + 1;
  return next;
}

FrameReport process_frame(const PipelineState& state, const Frame& f,
                          const GazeTransform& gaze, const Frame* mask) {
  const PipelineConfig& cfg = state.config();
  FrameReport report;
  report.generation = state.generation();

  auto t0 = Clock::now();
  validate(f);
  const Frame pre = mask && cfg.preprocess.kind == PreprocessKind::Mask
                        ? apply_mask(f, *mask)
                        : preprocess(f, cfg.preprocess);
  report.timings.preprocess_us = micros_since(t0);

  t0 = Clock::now();
  report.stimulus = encode_frame(pre, state.array(), cfg.encoder, gaze);
  report.timings.encode_us = micros_since(t0);

  t0 = Clock::now();
  report.percept = render_percept(state.map(), report.stimulus, cfg.model.clamp);
  report.timings.render_us = micros_since(t0);
  return report;
}

}  // namespace spv
