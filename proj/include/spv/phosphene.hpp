#pragma once

// Stimulus -> percept models.
//
// Both models reduce to a sparse pixel-by-electrode weight matrix computed
// once per configuration. Rendering a percept is then a clamped sparse
// matrix-vector product whose cost is proportional to the stored entries.

#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <span>
#include <vector>

#include "spv/frame.hpp"
#include "spv/geometry.hpp"
#include "spv/kernels.hpp"

namespace spv {

enum class ModelKind { Scoreboard, AxonMap };

struct ModelParams {
  ModelKind kind = ModelKind::AxonMap;
  double rho_um = 300.0;
  double lambda_um = 1000.0;
  double eps = 1e-3;
  double clamp = 1.0;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

void validate(const ModelParams& params);

/// Output raster of the simulated percept, centered on the fovea.
struct PerceptGrid {
  int width = 96;
  int height = 60;
  double fov_x_deg = 18.0;
  double fov_y_deg = 11.0;

  VisualFieldPoint pixel_visual_field(int x, int y) const;
  RetinalPoint pixel_retina(int x, int y) const {
    return visual_field_to_retina(pixel_visual_field(x, y));
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  friend bool operator==(const PerceptGrid&, const PerceptGrid&) = default;
};

void validate(const PerceptGrid& grid);

/// Per-electrode amplitudes in [0, 1], indexed like the electrode array.
struct Stimulus {
  std::vector<double> amplitudes;

  friend bool operator==(const Stimulus&, const Stimulus&) = default;
};

double scoreboard_weight(const ElectrodeSpec& e, RetinalPoint p, double rho_um);

/// Axon-map weight with a precomputed soma attachment: the best product of
/// electrode proximity and axonal decay over the fiber samples between the
/// soma and the optic disc.
double axonmap_weight(const ElectrodeSpec& e, const AxonTrajectory& fiber,
                      std::size_t soma_point, double rho_um, double lambda_um);

double axonmap_weight(const ElectrodeSpec& e, RetinalPoint p,
                      const AxonBundle& bundle, double rho_um, double lambda_um);

/// Sparse per-pixel (electrode, weight) lists in CSR form, electrodes
/// ascending within each pixel.
class SensitivityMap {
 public:
  struct PixelEntries {
    std::span<const std::uint32_t> electrodes;
    std::span<const double> weights;
  };

  SensitivityMap(PerceptGrid grid, std::size_t array_size,
                 std::vector<std::uint32_t> row_offsets,
                 std::vector<std::uint32_t> electrodes,
                 std::vector<double> weights);

  const PerceptGrid& grid() const { return grid_; }
  std::size_t array_size() const { return array_size_; }
  std::size_t pixel_count() const { return row_offsets_.size() - 1; }
  std::size_t entry_count() const { return weights_.size(); }

  PixelEntries entries(std::size_t pixel) const;

  kernels::CsrView csr() const { return {row_offsets_, electrodes_, weights_}; }
  const kernels::EllMatrix& ell() const { return ell_; }

  /// Content equality (bitwise on weights).
  friend bool operator==(const SensitivityMap& a, const SensitivityMap& b) {
    return a.grid_ == b.grid_ && a.array_size_ == b.array_size_ &&
           a.row_offsets_ == b.row_offsets_ && a.electrodes_ == b.electrodes_ &&
           a.weights_ == b.weights_;
  }

 private:
  PerceptGrid grid_;
  std::size_t array_size_;
  std::vector<std::uint32_t> row_offsets_;
  std::vector<std::uint32_t> electrodes_;
  std::vector<double> weights_;
  kernels::EllMatrix ell_;
};

/// `bundle` is required for AxonMap and must be null for Scoreboard.
SensitivityMap build_sensitivity_map(const ElectrodeArray& array,
                                     const AxonBundle* bundle,
                                     const ModelParams& params,
                                     const PerceptGrid& grid);

/// Per pixel min(clamp, sum_e stim[e] * weight[e]).
Frame render_percept(const SensitivityMap& map, const Stimulus& stim,
                     double clamp = 1.0);

/// Reads/writes the "SPVM" little-endian binary map format (weights as f32).
void write_sensitivity_map(std::ostream& out, const SensitivityMap& map);
void write_sensitivity_map(const std::filesystem::path& path,
                           const SensitivityMap& map);
SensitivityMap read_sensitivity_map(std::istream& in);
SensitivityMap read_sensitivity_map(const std::filesystem::path& path);

inline constexpr std::uint32_t kSensitivityMapVersion = 1;

}  // namespace spv
