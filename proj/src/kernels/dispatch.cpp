#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "spv/kernels.hpp"

namespace spv::kernels {

namespace {

Isa detect() {
#if defined(SPV_HAVE_AVX2)
  if (const char* forced = std::getenv("SPV_ISA");
      forced != nullptr && std::string(forced) == "scalar") {
    return Isa::Scalar;
  }
  if (__builtin_cpu_supports("avx2")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool cpu_supports(Isa isa) {
  if (isa == Isa::Scalar) return true;
#if defined(SPV_HAVE_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!cpu_supports(isa)) {
    throw std::invalid_argument("ISA not available: " + std::string(isa_name(isa)));
  }
  active().store(isa, std::memory_order_relaxed);
}

EllMatrix EllMatrix::from_csr(std::span<const std::uint32_t> row_offsets,
                              std::span<const std::uint32_t> indices,
                              std::span<const double> weights) {
  EllMatrix ell;
  ell.rows = row_offsets.size() - 1;
  const std::size_t n_slices = (ell.rows + kLanes - 1) / kLanes;
  ell.slice_offset.reserve(n_slices);
  ell.slice_width.reserve(n_slices);

  std::uint32_t offset = 0;
  for (std::size_t s = 0; s < n_slices; ++s) {
    std::uint32_t width = 0;
    for (std::size_t lane = 0; lane < kLanes; ++lane) {
      const std::size_t r = s * kLanes + lane;
      if (r < ell.rows) width = std::max(width, row_offsets[r + 1] - row_offsets[r]);
    }
    ell.slice_offset.push_back(offset);
    ell.slice_width.push_back(width);
    offset += width * static_cast<std::uint32_t>(kLanes);
  }
  ell.index.assign(offset, 0);
  ell.weight.assign(offset, 0.0);

  for (std::size_t s = 0; s < n_slices; ++s) {
    for (std::size_t lane = 0; lane < kLanes; ++lane) {
      const std::size_t r = s * kLanes + lane;
      if (r >= ell.rows) break;
      for (std::uint32_t k = 0; k < row_offsets[r + 1] - row_offsets[r]; ++k) {
        const std::size_t dst = ell.slice_offset[s] + k * kLanes + lane;
        ell.index[dst] = indices[row_offsets[r] + k];
        ell.weight[dst] = weights[row_offsets[r] + k];
      }
    }
  }
  return ell;
}

void sobel_magnitude(std::span<const double> in, int width, int height,
                     std::span<double> out) {
#if defined(SPV_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::sobel_magnitude(in, width, height, out);
#endif
  scalar::sobel_magnitude(in, width, height, out);
}

void sparse_matvec_clamped(const CsrView& csr, const EllMatrix& ell,
                           std::span<const double> x, double clamp,
                           std::span<double> out) {
#if defined(SPV_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::sparse_matvec_clamped(ell, x, clamp, out);
#else
  (void)ell;
#endif
  scalar::sparse_matvec_clamped(csr, x, clamp, out);
}

void affine_clamp(std::span<const double> in, double lo, double range,
                  std::span<double> out) {
#if defined(SPV_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::affine_clamp(in, lo, range, out);
#endif
  scalar::affine_clamp(in, lo, range, out);
}

void u8_to_unit(std::span<const std::uint8_t> in, std::span<double> out) {
#if defined(SPV_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::u8_to_unit(in, out);
#endif
  scalar::u8_to_unit(in, out);
}

void unit_to_u8(std::span<const double> in, std::span<std::uint8_t> out) {
#if defined(SPV_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) return avx2::unit_to_u8(in, out);
#endif
  scalar::unit_to_u8(in, out);
}

}  // namespace spv::kernels
