#include "kiri/matrix_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "kiri/errors.hpp"

namespace kiri {

std::string format_matrix(const Field& f) {
  std::string out;
  char buf[32];
  for (int i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < f.cols(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof buf, f(i, j), std::chars_format::general, 17);
      if (j > 0) out += ' ';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

Field parse_matrix(const std::string& text) {
  std::vector<double> values;
  int rows = 0, cols = -1;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const char* p = line.data();
    const char* end = p + line.size();
    int count = 0;
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
      if (p == end) break;
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc{}) throw ParseError("expected a number", lineno);
      values.push_back(v);
      ++count;
      p = res.ptr;
    }
    if (count == 0) continue;
    if (cols >= 0 && count != cols) throw ParseError("ragged matrix row", lineno);
    cols = count;
    ++rows;
  }
  if (rows == 0) throw ParseError("empty matrix", lineno);
  return Field(GridShape(rows, cols), std::move(values));
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_matrix(const Field& f, const std::filesystem::path& path) { write_text(path, format_matrix(f)); }

Field read_matrix(const std::filesystem::path& path) { return parse_matrix(read_text(path)); }

}  // namespace kiri
