// SPVM layout (little-endian):
//   "SPVM" | version u32 | width u32 | height u32 | n_electrodes u32
//   per pixel: count u16, then count x (electrode u16, weight f32)

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "spv/errors.hpp"
#include "spv/phosphene.hpp"

namespace spv {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'P', 'V', 'M'};

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bits.begin(), bits.end());
  }
  std::memcpy(bytes.data(), bits.data(), sizeof(T));
  out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw IoError("SPVM: unexpected end of data");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  return std::bit_cast<T>(bytes);
}

}  // namespace

void write_sensitivity_map(std::ostream& out, const SensitivityMap& map) {
  const PerceptGrid& g = map.grid();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kSensitivityMapVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.width));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.height));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.array_size()));
  // Weights that underflow f32 are dropped; they contribute nothing at f32
  // precision and the format requires weights in (0, 1].
  std::vector<std::pair<std::uint16_t, float>> kept;
  for (std::size_t p = 0; p < map.pixel_count(); ++p) {
    const auto entries = map.entries(p);
    kept.clear();
    for (std::size_t k = 0; k < entries.weights.size(); ++k) {
      const auto w = static_cast<float>(entries.weights[k]);
      if (w > 0.0f) kept.emplace_back(static_cast<std::uint16_t>(entries.electrodes[k]), w);
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(kept.size()));
    for (const auto& [electrode, weight] : kept) {
      put_le<std::uint16_t>(out, electrode);
      put_le<float>(out, weight);
    }
  }
  if (!out) throw IoError("SPVM: write failed");
}

void write_sensitivity_map(const std::filesystem::path& path, const SensitivityMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_sensitivity_map(out, map);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

// The file does not carry the field of view; imported maps report the
// default extents unless the caller substitutes its own grid.
SensitivityMap read_sensitivity_map(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError("SPVM: bad magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kSensitivityMapVersion) {
    throw IoError("SPVM: unsupported version " + std::to_string(version));
  }
  const auto width = get_le<std::uint32_t>(in);
  const auto height = get_le<std::uint32_t>(in);
  const auto n_electrodes = get_le<std::uint32_t>(in);
  if (width < 1 || height < 1 || width > 4096 || height > 4096) {
    throw IoError("SPVM: bad dimensions");
  }
  if (n_electrodes < 1 || n_electrodes > 65535) {
    throw IoError("SPVM: bad electrode count");
  }

  PerceptGrid grid;
  grid.width = static_cast<int>(width);
  grid.height = static_cast<int>(height);

  const std::size_t n_pixels = static_cast<std::size_t>(width) * height;
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> weights;
  offsets.reserve(n_pixels + 1);
  for (std::size_t p = 0; p < n_pixels; ++p) {
    const auto count = get_le<std::uint16_t>(in);
    for (std::uint16_t k = 0; k < count; ++k) {
      indices.push_back(get_le<std::uint16_t>(in));
      weights.push_back(static_cast<double>(get_le<float>(in)));
    }
    offsets.push_back(static_cast<std::uint32_t>(weights.size()));
  }
  try {
    return SensitivityMap(grid, n_electrodes, std::move(offsets), std::move(indices),
                          std::move(weights));
  } catch (const ValidationError& e) {
    throw IoError(std::string("SPVM: ") + e.what());
  }
}

SensitivityMap read_sensitivity_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_sensitivity_map(in);
}

}  // namespace spv
