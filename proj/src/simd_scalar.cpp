#include "kiri/simd.hpp"

namespace kiri::simd {
namespace {

void fill_quad_span_scalar(const QuadEdges& e, double py, int c0, int c1, std::uint8_t* row) {
  double rowterm[4];
  for (int k = 0; k < 4; ++k) rowterm[k] = e.dx[k] * (py - e.ay[k]);
  for (int col = c0; col < c1; ++col) {
    const double px = static_cast<double>(col) + 0.5;
    bool inside = true;
    for (int k = 0; k < 4 && inside; ++k) {
      const double f = rowterm[k] - e.dy[k] * (px - e.ax[k]);
      inside = f > 0.0 || (f == 0.0 && e.tie[k]);
    }
    if (inside) row[col] = 1;
  }
}

MaskCounts mask_counts_scalar(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  MaskCounts out;
  for (std::size_t i = 0; i < n; ++i) {
    out.intersection += static_cast<std::uint64_t>(a[i] & b[i]);
    out.union_ += static_cast<std::uint64_t>(a[i] | b[i]);
    out.a += a[i];
    out.b += b[i];
  }
  return out;
}

void transform_points_scalar(const SimilarityCoeffs& t, const double* xs, const double* ys, std::size_t n,
                             double* out_x, double* out_y) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xs[i];
    const double y = ys[i];
    out_x[i] = (t.c * x - t.s * y) + t.tx;
    out_y[i] = (t.s * x + t.c * y) + t.ty;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Backend::Scalar, &fill_quad_span_scalar, &mask_counts_scalar,
                                 &transform_points_scalar};
  return table;
}

}  // namespace kiri::simd
