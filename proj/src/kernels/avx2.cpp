// Compiled with -mavx2 only (no -mfma): mul/add stay separate instructions so
// results match the scalar reference bit for bit.

#include <immintrin.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "spv/kernels.hpp"

namespace spv::kernels::avx2 {

namespace {
const double kSobelNorm = 4.0 * std::sqrt(2.0);
}

void sobel_magnitude(std::span<const double> in, int width, int height,
                     std::span<double> out) {
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d norm = _mm256_set1_pd(kSobelNorm);
  const double* base = in.data();

  for (int y = 0; y < height; ++y) {
    const double* up = base + static_cast<std::size_t>(std::max(y - 1, 0)) * width;
    const double* mid = base + static_cast<std::size_t>(y) * width;
    const double* down =
        base + static_cast<std::size_t>(std::min(y + 1, height - 1)) * width;
    double* dst = out.data() + static_cast<std::size_t>(y) * width;

    dst[0] = scalar::sobel_at(up, mid, down, 0, 0, std::min(1, width - 1));
    int x = 1;
    for (; x + 4 <= width - 1; x += 4) {
      const __m256d ul = _mm256_loadu_pd(up + x - 1);
      const __m256d uc = _mm256_loadu_pd(up + x);
      const __m256d ur = _mm256_loadu_pd(up + x + 1);
      const __m256d ml = _mm256_loadu_pd(mid + x - 1);
      const __m256d mr = _mm256_loadu_pd(mid + x + 1);
      const __m256d dl = _mm256_loadu_pd(down + x - 1);
      const __m256d dc = _mm256_loadu_pd(down + x);
      const __m256d dr = _mm256_loadu_pd(down + x + 1);

      const __m256d gx = _mm256_sub_pd(
          _mm256_add_pd(_mm256_add_pd(ur, _mm256_mul_pd(two, mr)), dr),
          _mm256_add_pd(_mm256_add_pd(ul, _mm256_mul_pd(two, ml)), dl));
      const __m256d gy = _mm256_sub_pd(
          _mm256_add_pd(_mm256_add_pd(dl, _mm256_mul_pd(two, dc)), dr),
          _mm256_add_pd(_mm256_add_pd(ul, _mm256_mul_pd(two, uc)), ur));
      const __m256d mag = _mm256_div_pd(
          _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(gx, gx), _mm256_mul_pd(gy, gy))),
          norm);
      _mm256_storeu_pd(dst + x, _mm256_min_pd(mag, one));
    }
    for (; x < width; ++x) {
      dst[x] = scalar::sobel_at(up, mid, down, std::max(x - 1, 0), x,
                                std::min(x + 1, width - 1));
    }
  }
}

void sparse_matvec_clamped(const EllMatrix& ell, std::span<const double> x,
                           double clamp, std::span<double> out) {
  constexpr std::size_t kLanes = EllMatrix::kLanes;
  const __m256d clamp_v = _mm256_set1_pd(clamp);
  const std::size_t n_slices = ell.slice_width.size();

  for (std::size_t s = 0; s < n_slices; ++s) {
    const std::uint32_t* idx = ell.index.data() + ell.slice_offset[s];
    const double* w = ell.weight.data() + ell.slice_offset[s];
    __m256d acc = _mm256_setzero_pd();
    for (std::uint32_t k = 0; k < ell.slice_width[s]; ++k) {
      const __m128i iv =
          _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + k * kLanes));
      const __m256d xv = _mm256_i32gather_pd(x.data(), iv, 8);
      const __m256d wv = _mm256_loadu_pd(w + k * kLanes);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(wv, xv));
    }
    acc = _mm256_min_pd(acc, clamp_v);

    const std::size_t row0 = s * kLanes;
    if (row0 + kLanes <= ell.rows) {
      _mm256_storeu_pd(out.data() + row0, acc);
    } else {
      std::array<double, kLanes> tmp{};
      _mm256_storeu_pd(tmp.data(), acc);
      std::copy_n(tmp.begin(), ell.rows - row0, out.begin() + row0);
    }
  }
}

void affine_clamp(std::span<const double> in, double lo, double range,
                  std::span<double> out) {
  const __m256d lo_v = _mm256_set1_pd(lo);
  const __m256d range_v = _mm256_set1_pd(range);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= in.size(); i += 4) {
    __m256d v = _mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(in.data() + i), lo_v),
                              range_v);
    v = _mm256_min_pd(_mm256_max_pd(v, zero), one);
    _mm256_storeu_pd(out.data() + i, v);
  }
  scalar::affine_clamp(in.subspan(i), lo, range, out.subspan(i));
}

void u8_to_unit(std::span<const std::uint8_t> in, std::span<double> out) {
  const __m256d scale = _mm256_set1_pd(255.0);
  std::size_t i = 0;
  for (; i + 4 <= in.size(); i += 4) {
    std::int32_t packed;
    std::copy_n(in.data() + i, 4, reinterpret_cast<std::uint8_t*>(&packed));
    const __m128i bytes = _mm_cvtsi32_si128(packed);
    const __m256d v = _mm256_cvtepi32_pd(_mm_cvtepu8_epi32(bytes));
    _mm256_storeu_pd(out.data() + i, _mm256_div_pd(v, scale));
  }
  scalar::u8_to_unit(in.subspan(i), out.subspan(i));
}

void unit_to_u8(std::span<const double> in, std::span<std::uint8_t> out) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d scale = _mm256_set1_pd(255.0);
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t i = 0;
  for (; i + 4 <= in.size(); i += 4) {
    __m256d v = _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(in.data() + i), zero), one);
    v = _mm256_floor_pd(_mm256_add_pd(_mm256_mul_pd(v, scale), half));
    const __m128i ints = _mm256_cvttpd_epi32(v);
    const __m128i words = _mm_packus_epi32(ints, ints);
    const __m128i bytes = _mm_packus_epi16(words, words);
    const std::int32_t packed = _mm_cvtsi128_si32(bytes);
    std::copy_n(reinterpret_cast<const std::uint8_t*>(&packed), 4, out.data() + i);
  }
  scalar::unit_to_u8(in.subspan(i), out.subspan(i));
}

}  // namespace spv::kernels::avx2
