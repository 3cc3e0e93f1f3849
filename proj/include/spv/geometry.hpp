#pragma once

// Retinal coordinate systems, implant layouts and nerve-fiber trajectories.
//
// Retinal coordinates are microns on a flattened retina with the fovea at the
// origin. Visual-field coordinates are degrees, x to the right and y up. The
// default eye is the right eye, with the optic disc on the +x side.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spv {

/// Linear retinal magnification, both axes.
inline constexpr double kMicronsPerDegree = 280.0;
inline constexpr double kMaxFieldDeg = 90.0;
inline constexpr double kMaxRetinaUm = 30000.0;

struct VisualFieldPoint {
  double x_deg = 0.0;
  double y_deg = 0.0;
};

struct RetinalPoint {
  double x_um = 0.0;
  double y_um = 0.0;

  friend bool operator==(const RetinalPoint&, const RetinalPoint&) = default;
};

/// Default optic disc center for the right eye (about 15 deg nasal, 2 deg up).
inline constexpr RetinalPoint kDefaultOpticDisc{4200.0, 560.0};

RetinalPoint visual_field_to_retina(VisualFieldPoint p);
VisualFieldPoint retina_to_visual_field(RetinalPoint p);

/// Mirrors x, turning a right-eye geometry into the left eye.
inline RetinalPoint mirror_eye(RetinalPoint p) { return {-p.x_um, p.y_um}; }

void validate(VisualFieldPoint p);
void validate(RetinalPoint p);

double distance(RetinalPoint a, RetinalPoint b);
double distance_squared(RetinalPoint a, RetinalPoint b);

struct ElectrodeSpec {
  std::string name;
  RetinalPoint center;
  double radius_um = 0.0;
};

/// Rectangular lattice descriptor. Row 0 is the top (largest y) row.
struct GridLayout {
  int rows = 6;
  int cols = 10;
  double pitch_um = 575.0;
  double rotation_deg = 0.0;
  RetinalPoint center{};

  friend bool operator==(const GridLayout&, const GridLayout&) = default;
};

void validate(const GridLayout& layout);

class ElectrodeArray {
 public:
  /// Validates the electrode list: non-empty, unique names, positive radii,
  /// centers at least 1 um apart.
  explicit ElectrodeArray(std::vector<ElectrodeSpec> electrodes,
                          std::optional<GridLayout> layout = std::nullopt);

  std::span<const ElectrodeSpec> electrodes() const { return electrodes_; }
  const ElectrodeSpec& operator[](std::size_t i) const { return electrodes_[i]; }
  std::size_t size() const { return electrodes_.size(); }
  const std::optional<GridLayout>& layout() const { return layout_; }

  /// Lattice pitch for grid-generated arrays, otherwise the smallest
  /// center-to-center distance (0 for a single free-standing electrode).
  double pitch_um() const { return pitch_um_; }

 private:
  std::vector<ElectrodeSpec> electrodes_;
  std::optional<GridLayout> layout_;
  double pitch_um_ = 0.0;
};

/// rows*cols electrodes named "R{r}C{c}" in row-major order, radius pitch/4.
ElectrodeArray build_grid_array(const GridLayout& layout);

struct AxonGrowthParams {
  double r0_um = 300.0;
  double r_max_um = 9000.0;
  double step_um = 50.0;
  double b_deg = 3.0;
  double c = 1.5;
  int n_axons = 500;

  friend bool operator==(const AxonGrowthParams&, const AxonGrowthParams&) = default;
};

void validate(const AxonGrowthParams& params);

struct AxonTrajectory {
  double phi0_deg = 0.0;
  std::vector<RetinalPoint> points;  // optic disc outward
  std::vector<double> cum_len_um;    // starts at 0
};

/// +1 for superior fibers (phi0 in (0, 180)), -1 for inferior, 0 on the
/// horizontal through the disc.
int bend_direction(double phi0_deg);

/// dir * sin(|phi0| / 2). Fibers leaving nasally barely bend; those leaving
/// toward the fovea bend most.
double bend_gain(double phi0_deg);

/// Samples the spiral phi(r) = phi0 + gain * b * ((r - r0) / 1000)^c at
/// r = r0, r0 + step, ... <= r_max. Growth stops before the fiber would cross
/// the horizontal raphe on the temporal side of the disc; at least two samples
/// are always kept.
AxonTrajectory grow_axon(double phi0_deg, const AxonGrowthParams& params,
                         RetinalPoint od_center);

struct FiberSample {
  std::size_t trajectory = 0;
  std::size_t point = 0;

  friend bool operator==(const FiberSample&, const FiberSample&) = default;
};

class AxonBundle {
 public:
  AxonBundle(std::vector<AxonTrajectory> trajectories, RetinalPoint od_center,
             AxonGrowthParams params);

  std::span<const AxonTrajectory> trajectories() const { return trajectories_; }
  const AxonTrajectory& operator[](std::size_t i) const { return trajectories_[i]; }
  std::size_t size() const { return trajectories_.size(); }
  RetinalPoint od_center() const { return od_center_; }
  const AxonGrowthParams& params() const { return params_; }
  std::size_t sample_count() const { return flat_.size(); }

  /// Nearest sample to `p`; ties go to the lower trajectory, then lower point.
  FiberSample nearest_sample(RetinalPoint p) const;

 private:
  struct Flat {
    RetinalPoint p;
    std::uint32_t trajectory;
    std::uint32_t point;
  };

  void build_index();

  std::vector<AxonTrajectory> trajectories_;
  RetinalPoint od_center_;
  AxonGrowthParams params_;

  // Uniform bucket grid over all samples, bucket-major.
  std::vector<Flat> flat_;
  std::vector<std::uint32_t> cell_start_;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  double cell_um_ = 100.0;
  int nx_ = 0;
  int ny_ = 0;
};

/// n_axons trajectories with phi0 = -180 + (k + 1) * 360 / n_axons.
AxonBundle build_bundle(const AxonGrowthParams& params,
                        RetinalPoint od_center = kDefaultOpticDisc);

inline FiberSample soma_attach(RetinalPoint p, const AxonBundle& bundle) {
  return bundle.nearest_sample(p);
}

}  // namespace spv
