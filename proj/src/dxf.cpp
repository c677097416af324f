#include "kiri/dxf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "kiri/errors.hpp"
#include "kiri/matrix_io.hpp"

namespace kiri {

namespace {

using Key = std::pair<std::uint64_t, std::uint64_t>;

Key vertex_key(Vec2 p) {
  // Marching copies shared vertices verbatim, so bitwise identity is the sharing test.
  return {std::bit_cast<std::uint64_t>(p.x + 0.0), std::bit_cast<std::uint64_t>(p.y + 0.0)};
}

struct Interval {
  double lo, hi;
};

// Parameter range of segment a->b inside the open disk (c, r), clipped to [0, 1].
// Measured from the foot of the perpendicular: |a - c|^2 - r^2 cancels badly on long edges.
std::optional<Interval> disk_interval(Vec2 a, Vec2 b, const Connector& c) {
  const Vec2 d = b - a;
  const double A = dot(d, d);
  if (A == 0.0) return std::nullopt;
  const double t0 = dot(c.center - a, d) / A;
  const Vec2 foot = t0 <= 0.5 ? a + t0 * d : b - (1.0 - t0) * d;
  const Vec2 h = foot - c.center;
  const double gap = (c.radius - norm(h)) * (c.radius + norm(h));
  if (gap <= 0.0) return std::nullopt;
  const double w = std::sqrt(gap / A);
  const double lo = std::max(0.0, t0 - w);
  const double hi = std::min(1.0, t0 + w);
  if (!(hi > lo)) return std::nullopt;
  return Interval{lo, hi};
}

// Interpolates from the nearer endpoint to keep the absolute error small near it.
Vec2 lerp(Vec2 a, Vec2 b, double t) {
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  return t <= 0.5 ? a + t * (b - a) : b + (1.0 - t) * (a - b);
}

}  // namespace

CutPlan plan_cuts(const Layout& layout, const ConnectorConfig& cfg) {
  if (layout.feasibility.decode_failed) throw ContractError("cannot plan cuts for a failed decode");
  CutPlan plan;
  if (layout.quads.empty()) return plan;

  double shortest = std::numeric_limits<double>::infinity();
  std::map<Key, std::pair<Vec2, int>> uses;
  for (const VoidQuad& q : layout.quads) {
    for (int k = 0; k < 4; ++k) {
      shortest = std::min(shortest, norm(q.p[(k + 1) % 4] - q.p[k]));
      auto& u = uses[vertex_key(q.p[k])];
      u.first = q.p[k];
      ++u.second;
    }
  }
  const double r = cfg.radius.value_or(cfg.default_fraction * shortest);
  if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("connector radius must be a finite nonnegative number");
  if (r > 0.5 * shortest) throw ConfigError("connector radius exceeds half the shortest void edge");

  if (r > 0.0) {
    for (const auto& [key, u] : uses) {
      if (u.second >= 2) plan.connectors.push_back({u.first, r});
    }
    std::sort(plan.connectors.begin(), plan.connectors.end(), [](const Connector& a, const Connector& b) {
      return a.center.x < b.center.x || (a.center.x == b.center.x && a.center.y < b.center.y);
    });
    for (std::size_t i = 0; i < plan.connectors.size(); ++i) {
      for (std::size_t j = i + 1; j < plan.connectors.size(); ++j) {
        if (plan.connectors[j].center.x - plan.connectors[i].center.x >= 2.0 * r) break;
        if (norm(plan.connectors[j].center - plan.connectors[i].center) < 2.0 * r) {
          throw ConfigError("connectors closer than twice the radius; reduce the connector radius");
        }
      }
    }
  }

  for (std::size_t qi = 0; qi < layout.quads.size(); ++qi) {
    const QuadVertices& p = layout.quads[qi].p;
    // Kept parameter pieces per edge.
    struct Piece {
      int edge;
      double lo, hi;
    };
    std::vector<Piece> pieces;
    bool any_cut = false;
    for (int k = 0; k < 4; ++k) {
      const Vec2 a = p[k], b = p[(k + 1) % 4];
      std::vector<Interval> cut;
      for (const Connector& c : plan.connectors) {
        if (auto iv = disk_interval(a, b, c)) cut.push_back(*iv);
      }
      std::sort(cut.begin(), cut.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
      double t = 0.0;
      for (const Interval& iv : cut) {
        any_cut = true;
        if (iv.lo > t) pieces.push_back({k, t, iv.lo});
        if (iv.hi > t) {
          plan.trimmed.push_back({qi, lerp(a, b, std::max(t, iv.lo)), lerp(a, b, iv.hi)});
          t = iv.hi;
        }
      }
      if (t < 1.0) pieces.push_back({k, t, 1.0});
    }
    if (!any_cut) {
      plan.paths.push_back({{p.begin(), p.end()}, true});
      continue;
    }
    // Start after a gap so every emitted polyline is maximal.
    auto joins = [&](const Piece& prev, const Piece& next) {
      return prev.hi == 1.0 && next.lo == 0.0 && next.edge == (prev.edge + 1) % 4;
    };
    std::size_t start = 0;
    const std::size_t np = pieces.size();
    for (std::size_t s = 0; s < np; ++s) {
      if (!joins(pieces[(s + np - 1) % np], pieces[s])) {
        start = s;
        break;
      }
    }
    Polyline cur;
    for (std::size_t n = 0; n < np; ++n) {
      const Piece& pc = pieces[(start + n) % np];
      const Vec2 a = p[pc.edge], b = p[(pc.edge + 1) % 4];
      if (cur.points.empty()) cur.points.push_back(lerp(a, b, pc.lo));
      cur.points.push_back(lerp(a, b, pc.hi));
      const Piece& nx = pieces[(start + n + 1) % np];
      if (n + 1 == np || !joins(pc, nx)) {
        plan.paths.push_back(std::move(cur));
        cur = Polyline{};
      }
    }
  }
  return plan;
}

namespace {

void put(std::string& out, int code, const std::string& value) {
  out += std::to_string(code);
  out += '\n';
  out += value;
  out += '\n';
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string format_dxf(const CutPlan& plan, double scale_mm) {
  if (!(scale_mm > 0.0) || !std::isfinite(scale_mm)) throw ConfigError("scale must be positive");
  std::string out;
  put(out, 0, "SECTION");
  put(out, 2, "HEADER");
  put(out, 9, "$ACADVER");
  put(out, 1, "AC1009");
  put(out, 9, "$INSUNITS");
  put(out, 70, "4");
  put(out, 0, "ENDSEC");
  put(out, 0, "SECTION");
  put(out, 2, "ENTITIES");
  for (const Polyline& pl : plan.paths) {
    put(out, 0, "POLYLINE");
    put(out, 8, "CUT");
    put(out, 66, "1");
    put(out, 70, pl.closed ? "1" : "0");
    put(out, 10, "0.0");
    put(out, 20, "0.0");
    put(out, 30, "0.0");
    for (const Vec2& v : pl.points) {
      put(out, 0, "VERTEX");
      put(out, 8, "CUT");
      put(out, 10, fixed6(v.x * scale_mm));
      put(out, 20, fixed6(v.y * scale_mm));
      put(out, 30, "0.0");
    }
    put(out, 0, "SEQEND");
    put(out, 8, "CUT");
  }
  for (const Connector& c : plan.connectors) {
    put(out, 0, "CIRCLE");
    put(out, 8, "CONNECTOR");
    put(out, 10, fixed6(c.center.x * scale_mm));
    put(out, 20, fixed6(c.center.y * scale_mm));
    put(out, 30, "0.0");
    put(out, 40, fixed6(c.radius * scale_mm));
  }
  put(out, 0, "ENDSEC");
  put(out, 0, "EOF");
  return out;
}

void write_dxf(const CutPlan& plan, double scale_mm, const std::filesystem::path& path) {
  write_text(path, format_dxf(plan, scale_mm));
}

namespace {

class GroupReader {
 public:
  explicit GroupReader(const std::string& text) : in_(text) {}

  bool next() {
    std::string code;
    if (!std::getline(in_, code)) return false;
    ++line_;
    strip(code);
    if (!std::getline(in_, value_)) throw ParseError("group code without a value", line_);
    ++line_;
    strip(value_);
    try {
      std::size_t used = 0;
      code_ = std::stoi(code, &used);
      if (used != code.size()) throw ParseError("malformed group code '" + code + "'", line_ - 1);
    } catch (const std::logic_error&) {
      throw ParseError("malformed group code '" + code + "'", line_ - 1);
    }
    return true;
  }
  // Leaves the current pair to be returned again by the next call to take().
  void unread() { pushed_back_ = true; }
  bool take() {
    if (pushed_back_) {
      pushed_back_ = false;
      return true;
    }
    return next();
  }

  int code() const { return code_; }
  const std::string& value() const { return value_; }
  std::size_t line() const { return line_; }

  double number() const {
    try {
      std::size_t used = 0;
      const double v = std::stod(value_, &used);
      if (used != value_.size()) throw ParseError("malformed number '" + value_ + "'", line_);
      return v;
    } catch (const std::logic_error&) {
      throw ParseError("malformed number '" + value_ + "'", line_);
    }
  }

 private:
  static void strip(std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  std::istringstream in_;
  std::string value_;
  int code_ = 0;
  std::size_t line_ = 0;
  bool pushed_back_ = false;
};

// Reads the attribute pairs of one entity, stopping before the next code-0 pair.
template <class F>
void read_attributes(GroupReader& r, F&& on_pair) {
  while (true) {
    if (!r.take()) throw ParseError("unexpected end of file inside an entity", r.line());
    if (r.code() == 0) {
      r.unread();
      return;
    }
    on_pair(r.code());
  }
}

}  // namespace

CutPlan parse_dxf(const std::string& text) {
  CutPlan plan;
  GroupReader r(text);
  bool in_entities = false, seen_eof = false;
  while (r.take()) {
    if (r.code() != 0) {
      if (in_entities) throw ParseError("expected an entity start", r.line());
      continue;
    }
    const std::string kind = r.value();
    if (kind == "EOF") {
      seen_eof = true;
      break;
    }
    if (kind == "SECTION") {
      if (!r.take() || r.code() != 2) throw ParseError("SECTION without a name", r.line());
      in_entities = r.value() == "ENTITIES";
      continue;
    }
    if (kind == "ENDSEC") {
      in_entities = false;
      continue;
    }
    if (!in_entities) {
      read_attributes(r, [](int) {});
      continue;
    }
    if (kind == "POLYLINE") {
      Polyline pl;
      read_attributes(r, [&](int code) {
        if (code == 70) pl.closed = (static_cast<int>(r.number()) & 1) != 0;
      });
      while (true) {
        if (!r.take()) throw ParseError("unterminated POLYLINE", r.line());
        if (r.code() != 0) throw ParseError("expected VERTEX or SEQEND", r.line());
        if (r.value() == "SEQEND") {
          read_attributes(r, [](int) {});
          break;
        }
        if (r.value() != "VERTEX") throw ParseError("unexpected " + r.value() + " inside POLYLINE", r.line());
        Vec2 v;
        bool hx = false, hy = false;
        read_attributes(r, [&](int code) {
          if (code == 10) v.x = r.number(), hx = true;
          if (code == 20) v.y = r.number(), hy = true;
        });
        if (!hx || !hy) throw ParseError("VERTEX without coordinates", r.line());
        pl.points.push_back(v);
      }
      plan.paths.push_back(std::move(pl));
    } else if (kind == "CIRCLE") {
      Connector c;
      bool hx = false, hy = false, hr = false;
      read_attributes(r, [&](int code) {
        if (code == 10) c.center.x = r.number(), hx = true;
        if (code == 20) c.center.y = r.number(), hy = true;
        if (code == 40) c.radius = r.number(), hr = true;
      });
      if (!hx || !hy || !hr) throw ParseError("CIRCLE missing center or radius", r.line());
      plan.connectors.push_back(c);
    } else {
      throw ParseError("unsupported entity " + kind, r.line());
    }
  }
  if (!seen_eof) throw ParseError("missing EOF marker", r.line());
  return plan;
}

CutPlan read_dxf(const std::filesystem::path& path) { return parse_dxf(read_text(path)); }

}  // namespace kiri
