#include "spv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <tuple>

#include "spv/errors.hpp"

namespace spv {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool finite(double v) { return std::isfinite(v); }

}  // namespace

RetinalPoint visual_field_to_retina(VisualFieldPoint p) {
  return {kMicronsPerDegree * p.x_deg, -kMicronsPerDegree * p.y_deg};
}

VisualFieldPoint retina_to_visual_field(RetinalPoint p) {
  return {p.x_um / kMicronsPerDegree, -p.y_um / kMicronsPerDegree};
}

void validate(VisualFieldPoint p) {
  if (!finite(p.x_deg) || !finite(p.y_deg)) {
    throw ValidationError("geometry", "visual field point is not finite");
  }
  if (std::abs(p.x_deg) > kMaxFieldDeg || std::abs(p.y_deg) > kMaxFieldDeg) {
    throw ValidationError("geometry", "visual field point outside +/-90 deg");
  }
}

void validate(RetinalPoint p) {
  if (!finite(p.x_um) || !finite(p.y_um)) {
    throw ValidationError("geometry", "retinal point is not finite");
  }
  if (std::abs(p.x_um) > kMaxRetinaUm || std::abs(p.y_um) > kMaxRetinaUm) {
    throw ValidationError("geometry", "retinal point outside +/-30000 um");
  }
}

double distance_squared(RetinalPoint a, RetinalPoint b) {
  const double dx = a.x_um - b.x_um;
  const double dy = a.y_um - b.y_um;
  return dx * dx + dy * dy;
}

double distance(RetinalPoint a, RetinalPoint b) {
  return std::sqrt(distance_squared(a, b));
}

// ---------------------------------------------------------------------------
// Electrode arrays

void validate(const GridLayout& layout) {
  if (layout.rows < 1 || layout.cols < 1) {
    throw ValidationError("array", "rows and cols must be >= 1");
  }
  if (!(layout.pitch_um > 0.0) || !finite(layout.pitch_um)) {
    throw ValidationError("array", "pitch_um must be > 0");
  }
  if (!finite(layout.rotation_deg)) {
    throw ValidationError("array", "rotation_deg must be finite");
  }
  if (static_cast<long long>(layout.rows) * layout.cols > 65535) {
    throw ValidationError("array", "at most 65535 electrodes are supported");
  }
  validate(layout.center);
}

ElectrodeArray::ElectrodeArray(std::vector<ElectrodeSpec> electrodes,
                               std::optional<GridLayout> layout)
    : electrodes_(std::move(electrodes)), layout_(std::move(layout)) {
  if (electrodes_.empty()) {
    throw ValidationError("array", "electrode array is empty");
  }
  if (electrodes_.size() > 65535) {
    throw ValidationError("array", "at most 65535 electrodes are supported");
  }
  std::set<std::string_view> names;
  for (const auto& e : electrodes_) {
    validate(e.center);
    if (!(e.radius_um > 0.0) || !finite(e.radius_um)) {
      throw ValidationError("array", "electrode " + e.name + " has radius <= 0");
    }
    if (!names.insert(e.name).second) {
      throw ValidationError("array", "duplicate electrode name " + e.name);
    }
  }

  double min_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < electrodes_.size(); ++i) {
    for (std::size_t j = i + 1; j < electrodes_.size(); ++j) {
      min_d2 = std::min(min_d2, distance_squared(electrodes_[i].center,
                                                 electrodes_[j].center));
    }
  }
  if (min_d2 < 1.0) {
    throw ValidationError("array", "electrodes closer than 1 um");
  }
  if (layout_) {
    pitch_um_ = layout_->pitch_um;
  } else {
    pitch_um_ = std::isinf(min_d2) ? 0.0 : std::sqrt(min_d2);
  }
}

ElectrodeArray build_grid_array(const GridLayout& layout) {
  validate(layout);
  const double theta = layout.rotation_deg * kDegToRad;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double col_mid = 0.5 * (layout.cols - 1);
  const double row_mid = 0.5 * (layout.rows - 1);

  std::vector<ElectrodeSpec> electrodes;
  electrodes.reserve(static_cast<std::size_t>(layout.rows) * layout.cols);
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      const double u = (c - col_mid) * layout.pitch_um;
      const double v = (row_mid - r) * layout.pitch_um;
      RetinalPoint center{layout.center.x_um + cos_t * u - sin_t * v,
                          layout.center.y_um + sin_t * u + cos_t * v};
      electrodes.push_back({"R" + std::to_string(r) + "C" + std::to_string(c),
                            center, layout.pitch_um / 4.0});
    }
  }
  return ElectrodeArray(std::move(electrodes), layout);
}

// ---------------------------------------------------------------------------
// Axon trajectories

void validate(const AxonGrowthParams& p) {
  auto bad = [](const std::string& what) { throw ValidationError("bundle", what); };
  if (!finite(p.r0_um) || !finite(p.r_max_um) || !finite(p.step_um) ||
      !finite(p.b_deg) || !finite(p.c)) {
    bad("growth parameters must be finite");
  }
  if (!(p.r0_um > 0.0)) bad("r0_um must be > 0");
  if (!(p.r0_um < p.r_max_um)) bad("r0_um must be < r_max_um");
  if (!(p.step_um > 0.0)) bad("step_um must be > 0");
  if (p.r_max_um > kMaxRetinaUm) bad("r_max_um must be <= 30000");
  if (p.c < 0.0) bad("c must be >= 0");
  if (p.n_axons < 16) bad("n_axons must be >= 16");
  if ((p.r_max_um - p.r0_um) / p.step_um > 1e6) bad("too many samples per axon");
}

int bend_direction(double phi0_deg) {
  if (phi0_deg > 0.0 && phi0_deg < 180.0) return 1;
  if (phi0_deg < 0.0 && phi0_deg > -180.0) return -1;
  return 0;
}

double bend_gain(double phi0_deg) {
  return bend_direction(phi0_deg) * std::sin(std::abs(phi0_deg) * kDegToRad / 2.0);
}

AxonTrajectory grow_axon(double phi0_deg, const AxonGrowthParams& params,
                         RetinalPoint od_center) {
  validate(params);
  validate(od_center);
  if (!finite(phi0_deg) || phi0_deg <= -180.0 || phi0_deg > 180.0) {
    throw ValidationError("bundle", "phi0_deg must be in (-180, 180]");
  }

  const int dir = bend_direction(phi0_deg);
  const double gain = bend_gain(phi0_deg);
  const auto n_steps = static_cast<std::size_t>(
      std::floor((params.r_max_um - params.r0_um) / params.step_um + 1e-9));

  AxonTrajectory t;
  t.phi0_deg = phi0_deg;
  t.points.reserve(n_steps + 1);
  t.cum_len_um.reserve(n_steps + 1);

  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double r = params.r0_um + static_cast<double>(k) * params.step_um;
    const double bend =
        params.b_deg * std::pow((r - params.r0_um) / 1000.0, params.c);
    const double phi = (phi0_deg + gain * bend) * kDegToRad;
    const RetinalPoint p{od_center.x_um + r * std::cos(phi),
                         od_center.y_um + r * std::sin(phi)};

    if (k >= 2 && p.x_um < od_center.x_um) {
      const bool crosses = (dir > 0 && p.y_um < od_center.y_um) ||
                           (dir < 0 && p.y_um > od_center.y_um);
      if (crosses) break;
    }
    if (t.points.empty()) {
      t.cum_len_um.push_back(0.0);
    } else {
      t.cum_len_um.push_back(t.cum_len_um.back() + distance(t.points.back(), p));
    }
    t.points.push_back(p);
  }
  return t;
}

AxonBundle::AxonBundle(std::vector<AxonTrajectory> trajectories,
                       RetinalPoint od_center, AxonGrowthParams params)
    : trajectories_(std::move(trajectories)),
      od_center_(od_center),
      params_(params) {
  if (trajectories_.empty()) {
    throw ValidationError("bundle", "bundle has no trajectories");
  }
  for (const auto& t : trajectories_) {
    if (t.points.size() < 2 || t.points.size() != t.cum_len_um.size()) {
      throw ValidationError("bundle", "trajectory needs >= 2 samples");
    }
  }
  build_index();
}

void AxonBundle::build_index() {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  std::size_t total = 0;
  for (const auto& t : trajectories_) {
    for (const auto& p : t.points) {
      min_x = std::min(min_x, p.x_um);
      min_y = std::min(min_y, p.y_um);
      max_x = std::max(max_x, p.x_um);
      max_y = std::max(max_y, p.y_um);
    }
    total += t.points.size();
  }
  cell_um_ = std::max(params_.step_um, 100.0);
  origin_x_ = min_x;
  origin_y_ = min_y;
  nx_ = static_cast<int>(std::floor((max_x - min_x) / cell_um_)) + 1;
  ny_ = static_cast<int>(std::floor((max_y - min_y) / cell_um_)) + 1;

  auto cell_of = [&](RetinalPoint p) {
    const int ix = std::clamp(
        static_cast<int>(std::floor((p.x_um - origin_x_) / cell_um_)), 0, nx_ - 1);
    const int iy = std::clamp(
        static_cast<int>(std::floor((p.y_um - origin_y_) / cell_um_)), 0, ny_ - 1);
    return static_cast<std::size_t>(iy) * nx_ + ix;
  };

  const std::size_t n_cells = static_cast<std::size_t>(nx_) * ny_;
  cell_start_.assign(n_cells + 1, 0);
  for (const auto& t : trajectories_) {
    for (const auto& p : t.points) ++cell_start_[cell_of(p) + 1];
  }
  for (std::size_t i = 0; i < n_cells; ++i) cell_start_[i + 1] += cell_start_[i];

  flat_.resize(total);
  std::vector<std::uint32_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (std::uint32_t ti = 0; ti < trajectories_.size(); ++ti) {
    const auto& pts = trajectories_[ti].points;
    for (std::uint32_t pi = 0; pi < pts.size(); ++pi) {
      flat_[cursor[cell_of(pts[pi])]++] = {pts[pi], ti, pi};
    }
  }
}

FiberSample AxonBundle::nearest_sample(RetinalPoint p) const {
  const auto cx = static_cast<long long>(std::floor((p.x_um - origin_x_) / cell_um_));
  const auto cy = static_cast<long long>(std::floor((p.y_um - origin_y_) / cell_um_));
  const long long k_max =
      std::max({std::abs(cx), std::abs(cx - (nx_ - 1)), std::abs(cy),
                std::abs(cy - (ny_ - 1))});

  double best_d2 = std::numeric_limits<double>::infinity();
  std::uint32_t best_t = 0;
  std::uint32_t best_p = 0;

  auto visit = [&](long long ix, long long iy) {
    if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return;
    const std::size_t cell = static_cast<std::size_t>(iy) * nx_ + ix;
    for (std::uint32_t i = cell_start_[cell]; i < cell_start_[cell + 1]; ++i) {
      const Flat& f = flat_[i];
      const double d2 = distance_squared(p, f.p);
      if (std::tie(d2, f.trajectory, f.point) < std::tie(best_d2, best_t, best_p)) {
        best_d2 = d2;
        best_t = f.trajectory;
        best_p = f.point;
      }
    }
  };

  for (long long k = 0; k <= k_max; ++k) {
    // Cells on ring k are at least (k - 1) cells away from p.
    if (k >= 1) {
      const double gap = static_cast<double>(k - 1) * cell_um_;
      if (best_d2 < gap * gap) break;
    }
    if (k == 0) {
      visit(cx, cy);
      continue;
    }
    const long long x_lo = std::max(cx - k, 0LL);
    const long long x_hi = std::min(cx + k, static_cast<long long>(nx_) - 1);
    for (long long ix = x_lo; ix <= x_hi; ++ix) {
      visit(ix, cy - k);
      visit(ix, cy + k);
    }
    const long long y_lo = std::max(cy - k + 1, 0LL);
    const long long y_hi = std::min(cy + k - 1, static_cast<long long>(ny_) - 1);
    for (long long iy = y_lo; iy <= y_hi; ++iy) {
      visit(cx - k, iy);
      visit(cx + k, iy);
    }
  }
  return {best_t, best_p};
}

AxonBundle build_bundle(const AxonGrowthParams& params, RetinalPoint od_center) {
  validate(params);
  std::vector<AxonTrajectory> trajectories;
  trajectories.reserve(static_cast<std::size_t>(params.n_axons));
  const double spacing = 360.0 / params.n_axons;
  for (int k = 0; k < params.n_axons; ++k) {
    const double phi0 = -180.0 + (k + 1) * spacing;
    trajectories.push_back(grow_axon(phi0, params, od_center));
  }
  return AxonBundle(std::move(trajectories), od_center, params);
}

}  // namespace spv
