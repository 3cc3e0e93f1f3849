#include "spv/scenes.hpp"

#include <cmath>
#include <string>

#include "spv/errors.hpp"

namespace spv {

std::optional<SceneKind> parse_scene(std::string_view name) {
  if (name == "off") return std::nullopt;
  if (name == "bar") return SceneKind::Bar;
  if (name == "checker") return SceneKind::Checker;
  if (name == "door") return SceneKind::Door;
  throw ValidationError("scene", "expected bar|checker|door|off, got \"" + std::string(name) +
                                     "\"");
}

std::string_view scene_name(SceneKind kind) {
  switch (kind) {
    case SceneKind::Bar:
      return "bar";
    case SceneKind::Checker:
      return "checker";
    case SceneKind::Door:
      return "door";
  }
  return "off";
}

Frame render_scene(SceneKind kind, int width, int height, std::uint64_t tick) {
  Frame f(width, height, 0.0);
  switch (kind) {
    case SceneKind::Bar: {
      // One sweep per 120 ticks, bar width 1/12 of the frame.
      const int bar = std::max(1, width / 12);
      const double phase = static_cast<double>(tick % 120) / 120.0;
      const int left = static_cast<int>(std::floor(phase * (width + bar))) - bar;
      for (int y = 0; y < height; ++y) {
        for (int x = std::max(0, left); x < std::min(width, left + bar); ++x) f.at(x, y) = 1.0;
      }
      break;
    }
    case SceneKind::Checker: {
      const int cell = std::max(1, std::min(width, height) / 6);
      const int flip = static_cast<int>((tick / 15) % 2);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          f.at(x, y) = ((x / cell + y / cell + flip) % 2) ? 1.0 : 0.0;
        }
      }
      break;
    }
    case SceneKind::Door: {
      // Dim wall, darker floor, bright open doorway right of center.
      const int floor_y = height * 3 / 4;
      const int door_w = std::max(1, width / 6);
      const int door_x = width / 2 + width / 10;
      const int door_top = height / 5;
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          double v = y >= floor_y ? 0.1 : 0.3;
          if (x >= door_x && x < door_x + door_w && y >= door_top && y < floor_y) v = 0.9;
          f.at(x, y) = v;
        }
      }
      break;
    }
  }
  return f;
}

}  // namespace spv
