#pragma once

// Synthetic test scenes: a moving bar, a checkerboard and a doorway in a
// dim wall. Deterministic in (kind, size, tick).

#include <cstdint>
#include <optional>
#include <string_view>

#include "spv/frame.hpp"

namespace spv {

enum class SceneKind { Bar, Checker, Door };

/// nullopt for "off"; throws ValidationError (stage "scene") for unknown names.
std::optional<SceneKind> parse_scene(std::string_view name);
std::string_view scene_name(SceneKind kind);

/// Frame number `tick` of the scene. The bar sweeps left to right over 120
/// ticks, the checkerboard reverses phase every 15 ticks and the doorway is
/// static.
Frame render_scene(SceneKind kind, int width, int height, std::uint64_t tick);

}  // namespace spv
