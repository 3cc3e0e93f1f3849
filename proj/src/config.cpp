#include "spv/config.hpp"

#include <array>
#include <set>
#include <string>

#include "spv/errors.hpp"

namespace spv {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError("config", where + ": " + what);
}

// Typed access to one JSON object with default values and unknown-key checks.
class Section {
 public:
  Section(const json& j, std::string name, std::set<std::string> known)
      : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) fail(name_, "expected an object");
    for (const auto& [key, value] : j_.items()) {
      if (!known.contains(key)) fail(name_, "unknown key \"" + key + "\"");
    }
  }

  double number(const char* key, double fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(name_ + "." + key, "expected a number");
    return v.get<double>();
  }

  int integer(const char* key, int fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(name_ + "." + key, "expected an integer");
    const auto n = v.get<long long>();
    if (n < -1000000000LL || n > 1000000000LL) fail(name_ + "." + key, "out of range");
    return static_cast<int>(n);
  }

  std::string string(const char* key, std::string fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(name_ + "." + key, "expected a string");
    return v.get<std::string>();
  }

  std::array<double, 2> pair(const char* key, std::array<double, 2> fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(name_ + "." + key, "expected [x, y]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }

 private:
  const json& j_;
  std::string name_;
};

json point_json(RetinalPoint p) { return json::array({p.x_um, p.y_um}); }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "scoreboard") return ModelKind::Scoreboard;
  if (s == "axon_map") return ModelKind::AxonMap;
  fail("model.kind", "expected \"scoreboard\" or \"axon_map\", got \"" + s + "\"");
}

PreprocessKind parse_preprocess_kind(const std::string& s) {
  if (s == "none") return PreprocessKind::None;
  if (s == "edges") return PreprocessKind::Edges;
  if (s == "contrast") return PreprocessKind::Contrast;
  if (s == "mask") return PreprocessKind::Mask;
  fail("preprocess.mode", "expected none|edges|contrast|mask, got \"" + s + "\"");
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  return kind == ModelKind::Scoreboard ? "scoreboard" : "axon_map";
}

std::string_view preprocess_kind_name(PreprocessKind kind) {
  switch (kind) {
    case PreprocessKind::None:
      return "none";
    case PreprocessKind::Edges:
      return "edges";
    case PreprocessKind::Contrast:
      return "contrast";
    case PreprocessKind::Mask:
      return "mask";
  }
  return "none";
}

json layout_to_json(const GridLayout& l) {
  return {{"rows", l.rows},
          {"cols", l.cols},
          {"pitch_um", l.pitch_um},
          {"rotation_deg", l.rotation_deg},
          {"center_um", point_json(l.center)}};
}

GridLayout layout_from_json(const json& j) {
  const Section s(j, "array", {"rows", "cols", "pitch_um", "rotation_deg", "center_um"});
  GridLayout l;
  l.rows = s.integer("rows", l.rows);
  l.cols = s.integer("cols", l.cols);
  l.pitch_um = s.number("pitch_um", l.pitch_um);
  l.rotation_deg = s.number("rotation_deg", l.rotation_deg);
  const auto c = s.pair("center_um", {l.center.x_um, l.center.y_um});
  l.center = {c[0], c[1]};
  return l;
}

json bundle_to_json(const BundleConfig& b) {
  return {{"r0_um", b.growth.r0_um},
          {"r_max_um", b.growth.r_max_um},
          {"step_um", b.growth.step_um},
          {"b_deg", b.growth.b_deg},
          {"c", b.growth.c},
          {"n_axons", b.growth.n_axons},
          {"od_center_um", point_json(b.od_center)}};
}

BundleConfig bundle_from_json(const json& j) {
  const Section s(j, "bundle",
                  {"r0_um", "r_max_um", "step_um", "b_deg", "c", "n_axons", "od_center_um"});
  BundleConfig b;
  b.growth.r0_um = s.number("r0_um", b.growth.r0_um);
  b.growth.r_max_um = s.number("r_max_um", b.growth.r_max_um);
  b.growth.step_um = s.number("step_um", b.growth.step_um);
  b.growth.b_deg = s.number("b_deg", b.growth.b_deg);
  b.growth.c = s.number("c", b.growth.c);
  b.growth.n_axons = s.integer("n_axons", b.growth.n_axons);
  const auto od = s.pair("od_center_um", {b.od_center.x_um, b.od_center.y_um});
  b.od_center = {od[0], od[1]};
  return b;
}

json config_to_json(const PipelineConfig& cfg) {
  const ModelParams& m = cfg.model;
  const EncoderConfig& e = cfg.encoder;
  const PerceptGrid& g = cfg.grid;
  return {{"schema_version", kConfigSchemaVersion},
          {"array", layout_to_json(cfg.array)},
          {"bundle", bundle_to_json(cfg.bundle)},
          {"model",
           {{"kind", model_kind_name(m.kind)},
            {"rho_um", m.rho_um},
            {"lambda_um", m.lambda_um},
            {"eps", m.eps},
            {"clamp", m.clamp}}},
          {"preprocess",
           {{"mode", preprocess_kind_name(cfg.preprocess.kind)},
            {"mask_path", cfg.preprocess.mask_path}}},
          {"encoder",
           {{"source_fov_deg", json::array({e.source_fov_x_deg, e.source_fov_y_deg})},
            {"sample_radius_frac", e.sample_radius_frac},
            {"out_of_frame_value", e.out_of_frame_value}}},
          {"grid",
           {{"width", g.width},
            {"height", g.height},
            {"fov_deg", json::array({g.fov_x_deg, g.fov_y_deg})}}}};
}

PipelineConfig config_from_json(const json& j) {
  const Section root(j, "config",
                     {"schema_version", "array", "bundle", "model", "preprocess",
                      "encoder", "grid"});
  const int version = root.integer("schema_version", kConfigSchemaVersion);
  if (version != kConfigSchemaVersion) {
    fail("schema_version", "unsupported version " + std::to_string(version));
  }

  PipelineConfig cfg;
  if (root.has("array")) cfg.array = layout_from_json(root.at("array"));
  if (root.has("bundle")) cfg.bundle = bundle_from_json(root.at("bundle"));

  if (root.has("model")) {
    const Section s(root.at("model"), "model",
                    {"kind", "rho_um", "lambda_um", "eps", "clamp"});
    cfg.model.kind = parse_model_kind(
        s.string("kind", std::string(model_kind_name(cfg.model.kind))));
    cfg.model.rho_um = s.number("rho_um", cfg.model.rho_um);
    cfg.model.lambda_um = s.number("lambda_um", cfg.model.lambda_um);
    cfg.model.eps = s.number("eps", cfg.model.eps);
    cfg.model.clamp = s.number("clamp", cfg.model.clamp);
  }
  if (root.has("preprocess")) {
    const Section s(root.at("preprocess"), "preprocess", {"mode", "mask_path"});
    cfg.preprocess.kind = parse_preprocess_kind(s.string("mode", "none"));
    cfg.preprocess.mask_path = s.string("mask_path", "");
  }
  if (root.has("encoder")) {
    const Section s(root.at("encoder"), "encoder",
                    {"source_fov_deg", "sample_radius_frac", "out_of_frame_value"});
    const auto fov = s.pair("source_fov_deg",
                            {cfg.encoder.source_fov_x_deg, cfg.encoder.source_fov_y_deg});
    cfg.encoder.source_fov_x_deg = fov[0];
    cfg.encoder.source_fov_y_deg = fov[1];
    cfg.encoder.sample_radius_frac =
        s.number("sample_radius_frac", cfg.encoder.sample_radius_frac);
    cfg.encoder.out_of_frame_value =
        s.number("out_of_frame_value", cfg.encoder.out_of_frame_value);
  }
  if (root.has("grid")) {
    const Section s(root.at("grid"), "grid", {"width", "height", "fov_deg"});
    cfg.grid.width = s.integer("width", cfg.grid.width);
    cfg.grid.height = s.integer("height", cfg.grid.height);
    const auto fov = s.pair("fov_deg", {cfg.grid.fov_x_deg, cfg.grid.fov_y_deg});
    cfg.grid.fov_x_deg = fov[0];
    cfg.grid.fov_y_deg = fov[1];
  }
  return cfg;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail("override", "expected key=value, got \"" + std::string(assignment) + "\"");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) fail("override", "empty path segment in \"" + path + "\"");
    if (!node->is_object()) fail("override", "\"" + path + "\" descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace spv
