#pragma once

// Data-parallel inner loops with a scalar reference and an AVX2 variant.
//
// Every AVX2 kernel performs the same floating-point operations in the same
// order as its scalar reference (no FMA contraction, same per-pixel
// accumulation order), so both paths produce bitwise identical output. The
// variant is chosen once at startup from CPUID; SPV_ISA=scalar forces the
// reference path.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace spv::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);
bool cpu_supports(Isa isa);
Isa active_isa();
/// Throws std::invalid_argument if the CPU (or build) lacks the ISA.
void set_active_isa(Isa isa);

/// Sliced-ELL layout of a sparse pixel-by-electrode matrix. Pixels are grouped
/// in slices of kLanes; each slice stores `width` columns lane-interleaved and
/// zero-padded (index 0, weight +0.0).
struct EllMatrix {
  static constexpr std::size_t kLanes = 4;

  std::size_t rows = 0;
  std::vector<std::uint32_t> slice_offset;  // first entry of each slice
  std::vector<std::uint32_t> slice_width;
  std::vector<std::uint32_t> index;
  std::vector<double> weight;

  static EllMatrix from_csr(std::span<const std::uint32_t> row_offsets,
                            std::span<const std::uint32_t> indices,
                            std::span<const double> weights);
};

struct CsrView {
  std::span<const std::uint32_t> row_offsets;  // rows + 1
  std::span<const std::uint32_t> indices;
  std::span<const double> weights;
};

/// 3x3 Sobel gradient magnitude with replicate-padded borders, scaled by
/// 1 / (4 sqrt 2) and capped at 1.
void sobel_magnitude(std::span<const double> in, int width, int height,
                     std::span<double> out);

/// out[p] = min(clamp, sum_k weight[p,k] * x[index[p,k]]).
void sparse_matvec_clamped(const CsrView& csr, const EllMatrix& ell,
                           std::span<const double> x, double clamp,
                           std::span<double> out);

/// out = min(1, max(0, (in - lo) / range)).
void affine_clamp(std::span<const double> in, double lo, double range,
                  std::span<double> out);

/// out = in / 255.
void u8_to_unit(std::span<const std::uint8_t> in, std::span<double> out);

/// out = floor(min(1, max(0, in)) * 255 + 0.5).
void unit_to_u8(std::span<const double> in, std::span<std::uint8_t> out);

namespace scalar {
void sobel_magnitude(std::span<const double> in, int width, int height,
                     std::span<double> out);
void sparse_matvec_clamped(const CsrView& csr, std::span<const double> x,
                           double clamp, std::span<double> out);
void affine_clamp(std::span<const double> in, double lo, double range,
                  std::span<double> out);
void u8_to_unit(std::span<const std::uint8_t> in, std::span<double> out);
void unit_to_u8(std::span<const double> in, std::span<std::uint8_t> out);

/// Single Sobel output pixel; shared by both variants for border pixels.
double sobel_at(const double* up, const double* mid, const double* down,
                int xl, int x, int xr);
}  // namespace scalar

#if defined(SPV_HAVE_AVX2)
namespace avx2 {
void sobel_magnitude(std::span<const double> in, int width, int height,
                     std::span<double> out);
void sparse_matvec_clamped(const EllMatrix& ell, std::span<const double> x,
                           double clamp, std::span<double> out);
void affine_clamp(std::span<const double> in, double lo, double range,
                  std::span<double> out);
void u8_to_unit(std::span<const std::uint8_t> in, std::span<double> out);
void unit_to_u8(std::span<const double> in, std::span<std::uint8_t> out);
}  // namespace avx2
#endif

}  // namespace spv::kernels
