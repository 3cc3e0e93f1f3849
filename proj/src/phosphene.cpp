#include "spv/phosphene.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "spv/errors.hpp"

namespace spv {

void validate(const ModelParams& p) {
  auto bad = [](const std::string& what) { throw ValidationError("model", what); };
  if (!(p.rho_um > 0.0) || !std::isfinite(p.rho_um)) bad("rho_um must be > 0");
  if (!(p.lambda_um > 0.0) || !std::isfinite(p.lambda_um)) bad("lambda_um must be > 0");
  if (!(p.eps >= 0.0 && p.eps < 1.0)) bad("eps must be in [0, 1)");
  if (!(p.clamp > 0.0) || std::isnan(p.clamp)) bad("clamp must be > 0");
}

VisualFieldPoint PerceptGrid::pixel_visual_field(int x, int y) const {
  return {(x + 0.5) / width * fov_x_deg - 0.5 * fov_x_deg,
          0.5 * fov_y_deg - (y + 0.5) / height * fov_y_deg};
}

void validate(const PerceptGrid& g) {
  auto bad = [](const std::string& what) { throw ValidationError("grid", what); };
  if (g.width < 1 || g.height < 1) bad("width and height must be >= 1");
  if (g.width > 4096 || g.height > 4096) bad("width and height must be <= 4096");
  if (!(g.fov_x_deg > 0.0) || !(g.fov_y_deg > 0.0)) bad("fov extents must be > 0");
  if (g.fov_x_deg > 2 * kMaxFieldDeg || g.fov_y_deg > 2 * kMaxFieldDeg) {
    bad("fov extents must be <= 180 deg");
  }
}

double scoreboard_weight(const ElectrodeSpec& e, RetinalPoint p, double rho_um) {
  return std::exp(-(distance_squared(p, e.center) / (2.0 * rho_um * rho_um)));
}

namespace {

// Smallest exponent d^2/(2 rho^2) + arc^2/(2 lambda^2) over samples from the
// soma back to the disc. Stops once the decay term alone exceeds the best
// exponent, or exceeds `cutoff`.
double min_axon_exponent(RetinalPoint center, const AxonTrajectory& fiber,
                         std::size_t soma, double two_rho2, double two_lambda2,
                         double cutoff) {
  double best = std::numeric_limits<double>::infinity();
  const double soma_len = fiber.cum_len_um[soma];
  for (std::size_t s = soma + 1; s-- > 0;) {
    const double arc = soma_len - fiber.cum_len_um[s];
    const double decay = arc * arc / two_lambda2;
    if (decay > best || decay > cutoff) break;
    const double q = distance_squared(fiber.points[s], center) / two_rho2 + decay;
    if (q < best) best = q;
  }
  return best;
}

}  // namespace

double axonmap_weight(const ElectrodeSpec& e, const AxonTrajectory& fiber,
                      std::size_t soma_point, double rho_um, double lambda_um) {
  const double q = min_axon_exponent(e.center, fiber, soma_point,
                                     2.0 * rho_um * rho_um,
                                     2.0 * lambda_um * lambda_um,
                                     std::numeric_limits<double>::infinity());
  return std::exp(-q);
}

double axonmap_weight(const ElectrodeSpec& e, RetinalPoint p,
                      const AxonBundle& bundle, double rho_um, double lambda_um) {
  const FiberSample soma = soma_attach(p, bundle);
  return axonmap_weight(e, bundle[soma.trajectory], soma.point, rho_um, lambda_um);
}

// ---------------------------------------------------------------------------

SensitivityMap::SensitivityMap(PerceptGrid grid, std::size_t array_size,
                               std::vector<std::uint32_t> row_offsets,
                               std::vector<std::uint32_t> electrodes,
                               std::vector<double> weights)
    : grid_(grid),
      array_size_(array_size),
      row_offsets_(std::move(row_offsets)),
      electrodes_(std::move(electrodes)),
      weights_(std::move(weights)) {
  validate(grid_);
  auto bad = [](const std::string& what) { throw ValidationError("map", what); };
  if (array_size_ < 1 || array_size_ > 65535) bad("array size must be in [1, 65535]");
  if (row_offsets_.size() != grid_.pixel_count() + 1) bad("row offsets do not match grid");
  if (electrodes_.size() != weights_.size()) bad("index/weight length mismatch");
  if (row_offsets_.front() != 0 || row_offsets_.back() != weights_.size()) {
    bad("row offsets do not cover the entry list");
  }
  for (std::size_t r = 0; r + 1 < row_offsets_.size(); ++r) {
    if (row_offsets_[r + 1] < row_offsets_[r]) bad("row offsets must be non-decreasing");
    if (row_offsets_[r + 1] - row_offsets_[r] > 65535) bad("too many entries in one pixel");
  }
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (electrodes_[k] >= array_size_) bad("electrode index out of range");
    if (!(weights_[k] > 0.0 && weights_[k] <= 1.0)) bad("weight outside (0, 1]");
  }
  ell_ = kernels::EllMatrix::from_csr(row_offsets_, electrodes_, weights_);
}

SensitivityMap::PixelEntries SensitivityMap::entries(std::size_t pixel) const {
  const std::size_t begin = row_offsets_[pixel];
  const std::size_t count = row_offsets_[pixel + 1] - begin;
  return {std::span(electrodes_).subspan(begin, count),
          std::span(weights_).subspan(begin, count)};
}

SensitivityMap build_sensitivity_map(const ElectrodeArray& array,
                                     const AxonBundle* bundle,
                                     const ModelParams& params,
                                     const PerceptGrid& grid) {
  validate(params);
  validate(grid);
  if (params.kind == ModelKind::AxonMap && bundle == nullptr) {
    throw ValidationError("model", "axon map model requires an axon bundle");
  }
  if (params.kind == ModelKind::Scoreboard && bundle != nullptr) {
    throw ValidationError("model", "scoreboard model does not take an axon bundle");
  }

  const double two_rho2 = 2.0 * params.rho_um * params.rho_um;
  const double two_lambda2 = 2.0 * params.lambda_um * params.lambda_um;
  // exp(-q) > eps  <=>  q < -log(eps); the margin keeps pruning clear of
  // rounding at the threshold.
  const double cutoff = params.eps > 0.0 ? -std::log(params.eps) + 1e-9
                                         : std::numeric_limits<double>::infinity();

  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> indices;
  std::vector<double> weights;
  offsets.reserve(grid.pixel_count() + 1);
  offsets.push_back(0);

  const auto electrodes = array.electrodes();
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const RetinalPoint p = grid.pixel_retina(x, y);
      if (params.kind == ModelKind::Scoreboard) {
        for (std::size_t e = 0; e < electrodes.size(); ++e) {
          const double w = scoreboard_weight(electrodes[e], p, params.rho_um);
          if (w > params.eps) {
            indices.push_back(static_cast<std::uint32_t>(e));
            weights.push_back(w);
          }
        }
      } else {
        const FiberSample soma = soma_attach(p, *bundle);
        const AxonTrajectory& fiber = (*bundle)[soma.trajectory];
        for (std::size_t e = 0; e < electrodes.size(); ++e) {
          const double q = min_axon_exponent(electrodes[e].center, fiber, soma.point,
                                             two_rho2, two_lambda2, cutoff);
          const double w = std::exp(-q);
          if (w > params.eps) {
            indices.push_back(static_cast<std::uint32_t>(e));
            weights.push_back(w);
          }
        }
      }
      offsets.push_back(static_cast<std::uint32_t>(weights.size()));
    }
  }
  return SensitivityMap(grid, array.size(), std::move(offsets), std::move(indices),
                        std::move(weights));
}

Frame render_percept(const SensitivityMap& map, const Stimulus& stim, double clamp) {
  if (stim.amplitudes.size() != map.array_size()) {
    throw ValidationError("stimulus", "stimulus has " +
                                          std::to_string(stim.amplitudes.size()) +
                                          " amplitudes, map expects " +
                                          std::to_string(map.array_size()));
  }
  for (double a : stim.amplitudes) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw ValidationError("stimulus", "amplitude outside [0, 1]");
    }
  }
  const PerceptGrid& g = map.grid();
  Frame out(g.width, g.height);
  kernels::sparse_matvec_clamped(map.csr(), map.ell(), stim.amplitudes, clamp,
                                 out.values());
  return out;
}

}  // namespace spv
