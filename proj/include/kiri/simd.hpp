#pragma once

// Data-parallel inner loops used by rasterization and silhouette scoring.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2 variant.
// The active table is chosen once at startup from CPUID and can be forced with
// the KIRI_SIMD environment variable ("scalar" or "avx2") or set_backend().
// Variants are required to produce bit-identical results: the build disables
// FP contraction and both paths evaluate the same expression tree.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace kiri::simd {

enum class Backend { Scalar, Avx2 };

// Four directed edges of a convex quad in pixel space. A pixel center p is
// inside when every edge function dx*(p.y-ay) - dy*(p.x-ax) is positive, or
// zero on an edge whose tie flag is set (top-left rule).
struct QuadEdges {
  double ax[4];
  double ay[4];
  double dx[4];
  double dy[4];
  bool tie[4];
};

struct MaskCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
  std::uint64_t a = 0;
  std::uint64_t b = 0;
};

// Similarity map p -> scale * R(theta) * p + (tx, ty), with c = scale*cos, s = scale*sin.
struct SimilarityCoeffs {
  double c = 1.0;
  double s = 0.0;
  double tx = 0.0;
  double ty = 0.0;
};

struct KernelTable {
  Backend backend;
  // Sets row[col] = 1 for col in [c0, c1) whose center (col + 0.5, py) is inside.
  void (*fill_quad_span)(const QuadEdges& edges, double py, int c0, int c1, std::uint8_t* row);
  // Counts over two 0/1 byte masks of equal length.
  MaskCounts (*mask_counts)(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);
  // out = T(in) for n points stored as separate x and y arrays.
  void (*transform_points)(const SimilarityCoeffs& t, const double* xs, const double* ys, std::size_t n,
                           double* out_x, double* out_y);
};

const KernelTable& scalar_kernels();
// Null when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();

bool cpu_has_avx2();
const KernelTable& kernels();
Backend active_backend();
// Throws ConfigError when the requested backend is unavailable.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

}  // namespace kiri::simd
