#include <immintrin.h>

#include "kiri/simd.hpp"

namespace kiri::simd {
namespace {

void fill_quad_span_avx2(const QuadEdges& e, double py, int c0, int c1, std::uint8_t* row) {
  __m256d rowterm[4], dy[4], ax[4], tie[4];
  for (int k = 0; k < 4; ++k) {
    rowterm[k] = _mm256_set1_pd(e.dx[k] * (py - e.ay[k]));
    dy[k] = _mm256_set1_pd(e.dy[k]);
    ax[k] = _mm256_set1_pd(e.ax[k]);
    tie[k] = _mm256_castsi256_pd(_mm256_set1_epi64x(e.tie[k] ? -1 : 0));
  }
  const __m256d lane_offsets = _mm256_set_pd(3.5, 2.5, 1.5, 0.5);
  const __m256d zero = _mm256_setzero_pd();

  int col = c0;
  for (; col + 4 <= c1; col += 4) {
    const __m256d px = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(col)), lane_offsets);
    __m256d inside = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
    for (int k = 0; k < 4; ++k) {
      const __m256d f = _mm256_sub_pd(rowterm[k], _mm256_mul_pd(dy[k], _mm256_sub_pd(px, ax[k])));
      const __m256d pos = _mm256_cmp_pd(f, zero, _CMP_GT_OQ);
      const __m256d on_edge = _mm256_and_pd(_mm256_cmp_pd(f, zero, _CMP_EQ_OQ), tie[k]);
      inside = _mm256_and_pd(inside, _mm256_or_pd(pos, on_edge));
    }
    const int bits = _mm256_movemask_pd(inside);
    if (bits == 0) continue;
    for (int lane = 0; lane < 4; ++lane) {
      if (bits & (1 << lane)) row[col + lane] = 1;
    }
  }
  if (col < c1) {
    // Tail through the reference path keeps the tie semantics in one place.
    scalar_kernels().fill_quad_span(e, py, col, c1, row);
  }
}

MaskCounts mask_counts_avx2(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  __m256i acc_and = _mm256_setzero_si256();
  __m256i acc_or = _mm256_setzero_si256();
  __m256i acc_a = _mm256_setzero_si256();
  __m256i acc_b = _mm256_setzero_si256();
  const __m256i zero = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    // sad against zero sums bytes into four 64-bit lanes.
    acc_and = _mm256_add_epi64(acc_and, _mm256_sad_epu8(_mm256_and_si256(va, vb), zero));
    acc_or = _mm256_add_epi64(acc_or, _mm256_sad_epu8(_mm256_or_si256(va, vb), zero));
    acc_a = _mm256_add_epi64(acc_a, _mm256_sad_epu8(va, zero));
    acc_b = _mm256_add_epi64(acc_b, _mm256_sad_epu8(vb, zero));
  }
  auto hsum = [](__m256i v) {
    alignas(32) std::uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), v);
    return lanes[0] + lanes[1] + lanes[2] + lanes[3];
  };
  MaskCounts out{hsum(acc_and), hsum(acc_or), hsum(acc_a), hsum(acc_b)};
  if (i < n) {
    const MaskCounts tail = scalar_kernels().mask_counts(a + i, b + i, n - i);
    out.intersection += tail.intersection;
    out.union_ += tail.union_;
    out.a += tail.a;
    out.b += tail.b;
  }
  return out;
}

void transform_points_avx2(const SimilarityCoeffs& t, const double* xs, const double* ys, std::size_t n,
                           double* out_x, double* out_y) {
  const __m256d c = _mm256_set1_pd(t.c);
  const __m256d s = _mm256_set1_pd(t.s);
  const __m256d tx = _mm256_set1_pd(t.tx);
  const __m256d ty = _mm256_set1_pd(t.ty);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(xs + i);
    const __m256d y = _mm256_loadu_pd(ys + i);
    const __m256d rx = _mm256_add_pd(_mm256_sub_pd(_mm256_mul_pd(c, x), _mm256_mul_pd(s, y)), tx);
    const __m256d ry = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(s, x), _mm256_mul_pd(c, y)), ty);
    _mm256_storeu_pd(out_x + i, rx);
    _mm256_storeu_pd(out_y + i, ry);
  }
  if (i < n) scalar_kernels().transform_points(t, xs + i, ys + i, n - i, out_x + i, out_y + i);
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{Backend::Avx2, &fill_quad_span_avx2, &mask_counts_avx2, &transform_points_avx2};
  return &table;
}

}  // namespace kiri::simd
