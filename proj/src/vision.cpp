#include "spv/vision.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "spv/errors.hpp"
#include "spv/kernels.hpp"

namespace spv {

void validate(const GazeTransform& gaze) {
  if (!std::isfinite(gaze.dx_deg) || !std::isfinite(gaze.dy_deg) ||
      !std::isfinite(gaze.rot_deg)) {
    throw ValidationError("gaze", "gaze transform must be finite");
  }
}

void validate(const EncoderConfig& cfg) {
  auto bad = [](const std::string& what) { throw ValidationError("encoder", what); };
  if (!(cfg.source_fov_x_deg > 0.0) || !(cfg.source_fov_y_deg > 0.0) ||
      !std::isfinite(cfg.source_fov_x_deg) || !std::isfinite(cfg.source_fov_y_deg)) {
    bad("source fov extents must be > 0");
  }
  if (!(cfg.sample_radius_frac > 0.0 && cfg.sample_radius_frac <= 2.0)) {
    bad("sample_radius_frac must be in (0, 2]");
  }
  if (!(cfg.out_of_frame_value >= 0.0 && cfg.out_of_frame_value <= 1.0)) {
    bad("out_of_frame_value must be in [0, 1]");
  }
}

Frame edge_enhance(const Frame& f) {
  Frame out(f.width(), f.height());
  kernels::sobel_magnitude(f.values(), f.width(), f.height(), out.values());
  return out;
}

double percentile(const Frame& f, double q) {
  std::vector<double> v(f.values().begin(), f.values().end());
  const double rank = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  if (frac == 0.0 || lo + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + frac * (b - a);
}

Frame contrast_stretch(const Frame& f) {
  const double lo = percentile(f, 2.0);
  const double hi = percentile(f, 98.0);
  if (!(hi > lo)) return f;
  Frame out(f.width(), f.height());
  kernels::affine_clamp(f.values(), lo, hi - lo, out.values());
  return out;
}

Frame apply_mask(const Frame& f, const Frame& mask) {
  if (mask.width() != f.width() || mask.height() != f.height()) {
    throw ValidationError("preprocess", "mask is " + std::to_string(mask.width()) + "x" +
                                            std::to_string(mask.height()) +
                                            ", frame is " + std::to_string(f.width()) +
                                            "x" + std::to_string(f.height()));
  }
  Frame out(f.width(), f.height());
  const auto src = f.values();
  const auto keep = mask.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = keep[i] > 0.5 ? src[i] : 0.0;
  return out;
}

Frame preprocess(const Frame& f, const PreprocessMode& mode) {
  switch (mode.kind) {
    case PreprocessKind::None:
      return f;
    case PreprocessKind::Edges:
      return edge_enhance(f);
    case PreprocessKind::Contrast:
      return contrast_stretch(f);
    case PreprocessKind::Mask:
      if (!mode.mask) throw ValidationError("preprocess", "mask mode without a mask");
      return apply_mask(f, *mode.mask);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

// Double-double accumulator. The mean is exact for constant inputs and
// correctly rounded otherwise (up to the lo-word rounding, which is far
// below double precision for the disc sizes seen here).
class MeanAccumulator {
 public:
  void add(double v) {
    const double s = hi_ + v;
    const double bp = s - hi_;
    const double err = (hi_ - (s - bp)) + (v - bp);
    hi_ = s;
    lo_ += err;
    ++count_;
  }

  void add_repeated(double v, long long times) {
    if (times <= 0) return;
    const double k = static_cast<double>(times);
    const double prod = v * k;
    const double prod_err = std::fma(v, k, -prod);
    add_raw(prod);
    lo_ += prod_err;
    count_ += times;
  }

  long long count() const { return count_; }

  double mean() const {
    const double n = static_cast<double>(count_);
    const double q = hi_ / n;
    const double r = std::fma(-q, n, hi_);
    return q + (r + lo_) / n;
  }

 private:
  void add_raw(double v) {
    const double s = hi_ + v;
    const double bp = s - hi_;
    lo_ += (hi_ - (s - bp)) + (v - bp);
    hi_ = s;
  }

  double hi_ = 0.0;
  double lo_ = 0.0;
  long long count_ = 0;
};

}  // namespace

VisualFieldPoint scene_point(RetinalPoint retina, const GazeTransform& gaze) {
  const VisualFieldPoint v = retina_to_visual_field(retina);
  if (gaze.rot_deg == 0.0) {
    return {v.x_deg + gaze.dx_deg, v.y_deg + gaze.dy_deg};
  }
  const double t = gaze.rot_deg * std::numbers::pi / 180.0;
  const double c = std::cos(t);
  const double s = std::sin(t);
  return {c * v.x_deg - s * v.y_deg + gaze.dx_deg,
          s * v.x_deg + c * v.y_deg + gaze.dy_deg};
}

Stimulus encode_frame(const Frame& f, const ElectrodeArray& array,
                      const EncoderConfig& cfg, const GazeTransform& gaze) {
  validate(cfg);
  validate(gaze);
  const int w = f.width();
  const int h = f.height();
  const double px_per_deg_x = w / cfg.source_fov_x_deg;
  const double px_per_deg_y = h / cfg.source_fov_y_deg;

  double pitch = array.pitch_um();
  if (!(pitch > 0.0)) pitch = 2.0 * array[0].radius_um;
  const double radius_deg = cfg.sample_radius_frac * pitch / kMicronsPerDegree;
  const double rx = radius_deg * px_per_deg_x;
  const double ry = radius_deg * px_per_deg_y;
  const double oof = cfg.out_of_frame_value;

  Stimulus stim;
  stim.amplitudes.reserve(array.size());
  for (const ElectrodeSpec& e : array.electrodes()) {
    const VisualFieldPoint sp = scene_point(e.center, gaze);
    const double cx = (sp.x_deg / cfg.source_fov_x_deg + 0.5) * w - 0.5;
    const double cy = (0.5 - sp.y_deg / cfg.source_fov_y_deg) * h - 0.5;

    auto inside = [&](double i, double j) {
      const double u = (i - cx) / rx;
      const double v = (j - cy) / ry;
      return u * u + v * v <= 1.0;
    };

    MeanAccumulator acc;
    const auto j_lo = static_cast<long long>(std::ceil(cy - ry));
    const auto j_hi = static_cast<long long>(std::floor(cy + ry));
    for (long long j = j_lo; j <= j_hi; ++j) {
      const double v = (static_cast<double>(j) - cy) / ry;
      const double rem = 1.0 - v * v;
      if (rem < 0.0) continue;
      const double half = rx * std::sqrt(rem);
      auto i_lo = static_cast<long long>(std::ceil(cx - half));
      auto i_hi = static_cast<long long>(std::floor(cx + half));
      // Settle the span endpoints on the exact membership predicate.
      while (i_lo <= i_hi && !inside(static_cast<double>(i_lo), static_cast<double>(j))) ++i_lo;
      while (inside(static_cast<double>(i_lo - 1), static_cast<double>(j))) --i_lo;
      while (i_hi >= i_lo && !inside(static_cast<double>(i_hi), static_cast<double>(j))) --i_hi;
      while (inside(static_cast<double>(i_hi + 1), static_cast<double>(j))) ++i_hi;
      if (i_hi < i_lo) continue;

      if (j < 0 || j >= h) {
        acc.add_repeated(oof, i_hi - i_lo + 1);
        continue;
      }
      const long long in_lo = std::max(i_lo, 0LL);
      const long long in_hi = std::min(i_hi, static_cast<long long>(w) - 1);
      if (in_hi < in_lo) {
        acc.add_repeated(oof, i_hi - i_lo + 1);
        continue;
      }
      acc.add_repeated(oof, in_lo - i_lo);
      for (long long i = in_lo; i <= in_hi; ++i) {
        acc.add(f.at(static_cast<int>(i), static_cast<int>(j)));
      }
      acc.add_repeated(oof, i_hi - in_hi);
    }

    if (acc.count() == 0) {
      // Disc smaller than a pixel: nearest pixel center.
      const auto i = static_cast<long long>(std::llround(cx));
      const auto j = static_cast<long long>(std::llround(cy));
      const bool in_frame = i >= 0 && j >= 0 && i < w && j < h;
      acc.add(in_frame ? f.at(static_cast<int>(i), static_cast<int>(j)) : oof);
    }
    stim.amplitudes.push_back(std::clamp(acc.mean(), 0.0, 1.0));
  }
  return stim;
}

}  // namespace spv
