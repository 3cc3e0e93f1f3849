#include <algorithm>
#include <cmath>

#include "spv/kernels.hpp"

namespace spv::kernels::scalar {

namespace {
const double kSobelNorm = 4.0 * std::sqrt(2.0);
}

double sobel_at(const double* up, const double* mid, const double* down,
                int xl, int x, int xr) {
  const double gx = ((up[xr] + 2.0 * mid[xr]) + down[xr]) -
                    ((up[xl] + 2.0 * mid[xl]) + down[xl]);
  const double gy = ((down[xl] + 2.0 * down[x]) + down[xr]) -
                    ((up[xl] + 2.0 * up[x]) + up[xr]);
  return std::min(1.0, std::sqrt(gx * gx + gy * gy) / kSobelNorm);
}

void sobel_magnitude(std::span<const double> in, int width, int height,
                     std::span<double> out) {
  const double* base = in.data();
  for (int y = 0; y < height; ++y) {
    const double* up = base + static_cast<std::size_t>(std::max(y - 1, 0)) * width;
    const double* mid = base + static_cast<std::size_t>(y) * width;
    const double* down =
        base + static_cast<std::size_t>(std::min(y + 1, height - 1)) * width;
    double* dst = out.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      dst[x] = sobel_at(up, mid, down, std::max(x - 1, 0), x,
                        std::min(x + 1, width - 1));
    }
  }
}

void sparse_matvec_clamped(const CsrView& csr, std::span<const double> x,
                           double clamp, std::span<double> out) {
  const std::size_t rows = csr.row_offsets.size() - 1;
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::uint32_t k = csr.row_offsets[r]; k < csr.row_offsets[r + 1]; ++k) {
      acc = acc + csr.weights[k] * x[csr.indices[k]];
    }
    out[r] = std::min(clamp, acc);
  }
}

void affine_clamp(std::span<const double> in, double lo, double range,
                  std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::min(1.0, std::max(0.0, (in[i] - lo) / range));
  }
}

void u8_to_unit(std::span<const std::uint8_t> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] / 255.0;
}

void unit_to_u8(std::span<const double> in, std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, in[i]));
    out[i] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
  }
}

}  // namespace spv::kernels::scalar
