#include "kiri/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "kiri/errors.hpp"
#include "kiri/simd.hpp"

namespace kiri {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

namespace {

double signed_area2(const QuadVertices& q) {
  double s = 0.0;
  for (int k = 0; k < 4; ++k) s += cross(q[k], q[(k + 1) % 4]);
  return s;
}

}  // namespace

void rasterize_pixel_quad(const QuadVertices& quad_px, Mask& mask) {
  for (const Vec2& v : quad_px) {
    if (!is_finite(v)) return;
  }
  QuadVertices q = quad_px;
  // Interior must sit on the positive side of every edge.
  if (signed_area2(q) < 0.0) std::reverse(q.begin(), q.end());

  simd::QuadEdges e{};
  double xmin = q[0].x, xmax = q[0].x, ymin = q[0].y, ymax = q[0].y;
  for (int k = 0; k < 4; ++k) {
    const Vec2 a = q[k];
    const Vec2 b = q[(k + 1) % 4];
    e.ax[k] = a.x;
    e.ay[k] = a.y;
    e.dx[k] = b.x - a.x;
    e.dy[k] = b.y - a.y;
    // Top edges run +x with interior below; left edges run -y with interior to the right.
    e.tie[k] = e.dy[k] < 0.0 || (e.dy[k] == 0.0 && e.dx[k] > 0.0);
    xmin = std::min(xmin, a.x);
    xmax = std::max(xmax, a.x);
    ymin = std::min(ymin, a.y);
    ymax = std::max(ymax, a.y);
  }

  // Candidate centers c + 0.5 in [xmin, xmax], clamped before any integer conversion.
  auto clampd = [](double v, int hi) { return std::clamp(v, 0.0, static_cast<double>(hi)); };
  const int c0 = static_cast<int>(clampd(std::ceil(xmin - 0.5), mask.width));
  const int c1 = static_cast<int>(clampd(std::floor(xmax - 0.5) + 1.0, mask.width));
  const int r0 = static_cast<int>(clampd(std::ceil(ymin - 0.5), mask.height));
  const int r1 = static_cast<int>(clampd(std::floor(ymax - 0.5) + 1.0, mask.height));
  if (c0 >= c1 || r0 >= r1) return;

  const auto& kt = simd::kernels();
  for (int r = r0; r < r1; ++r) {
    kt.fill_quad_span(e, static_cast<double>(r) + 0.5, c0, c1, mask.bits.data() + static_cast<std::size_t>(r) * mask.width);
  }
}

void rasterize_quad(const QuadVertices& quad, const Frame& frame, Mask& mask) {
  QuadVertices px;
  for (int k = 0; k < 4; ++k) px[k] = frame.to_pixel(quad[k]);
  rasterize_pixel_quad(px, mask);
}

void rasterize_polygon(std::span<const Vec2> poly, Mask& mask) {
  const std::size_t n = poly.size();
  if (n < 3) return;
  std::vector<double> xs;
  for (int r = 0; r < mask.height; ++r) {
    const double py = r + 0.5;
    xs.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 a = poly[k];
      const Vec2 b = poly[(k + 1) % n];
      // Half-open in y so shared vertices are counted once.
      if ((a.y <= py && b.y > py) || (b.y <= py && a.y > py)) {
        xs.push_back(a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int c0 = static_cast<int>(std::clamp(std::ceil(xs[k] - 0.5), 0.0, static_cast<double>(mask.width)));
      const int c1 = static_cast<int>(std::clamp(std::ceil(xs[k + 1] - 0.5), 0.0, static_cast<double>(mask.width)));
      for (int c = c0; c < c1; ++c) mask.set(r, c);
    }
  }
}

double mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_size(b)) throw MetricError("mask sizes differ");
  const auto counts = simd::kernels().mask_counts(a.bits.data(), b.bits.data(), a.bits.size());
  if (counts.union_ == 0) return 1.0;
  return static_cast<double>(counts.intersection) / static_cast<double>(counts.union_);
}

void write_pgm(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  std::vector<char> bytes(mask.bits.size());
  std::transform(mask.bits.begin(), mask.bits.end(), bytes.begin(),
                 [](std::uint8_t b) { return static_cast<char>(b ? 255 : 0); });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

Mask read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (pgm_token(in) != "P5") throw IoError(path.string() + ": not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pgm_token(in));
    h = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw IoError(path.string() + ": unsupported PGM header");
  Mask mask(w, h);
  std::vector<char> bytes(mask.bits.size());
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError(path.string() + ": truncated PGM data");
  // Threshold at half of maxval.
  const int half = (maxval + 1) / 2;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    mask.bits[i] = static_cast<unsigned char>(bytes[i]) >= half ? 1 : 0;
  }
  return mask;
}

}  // namespace kiri
