#include "filament/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "filament/error.hpp"

namespace filament {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find('\t', start);
    if (end == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

EmbeddingSet load_word2vec_text(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(where(path, 1) + "empty file, expected header \"N D\"");

  const auto header = split_whitespace(lines[0]);
  std::size_t n = 0;
  std::size_t dim = 0;
  if (header.size() != 2 || !parse_number(header[0], n) || !parse_number(header[1], dim))
    throw ParseError(where(path, 1) + "expected header \"N D\"");
  if (n == 0 || dim == 0) throw ParseError(where(path, 1) + "N and D must be positive");

  EmbeddingSet set;
  set.dim = dim;
  set.tokens.reserve(n);
  set.values.reserve(n * dim);
  std::size_t rows = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_whitespace(lines[li]);
    if (fields.empty()) continue;
    const std::size_t line_no = li + 1;
    if (rows == n) throw ParseError(where(path, line_no) + "more rows than the declared N=" + std::to_string(n));
    if (fields.size() - 1 != dim)
      throw ParseError(where(path, line_no) + "row has " + std::to_string(fields.size() - 1) +
                       " components, expected " + std::to_string(dim));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      float v = 0.0f;
      if (!parse_number(fields[c], v) || !std::isfinite(v))
        throw ParseError(where(path, line_no) + "non-numeric component '" + std::string(fields[c]) + "'");
      set.values.push_back(v);
    }
    set.tokens.push_back(Token{static_cast<TokenId>(rows), std::string(fields[0]), std::nullopt});
    ++rows;
  }
  if (rows != n)
    throw ParseError(where(path, lines.size()) + "declared N=" + std::to_string(n) + " but found " +
                     std::to_string(rows) + " rows");
  return set;
}

PointCloud load_points_3d(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(where(path, 1) + "empty file, expected header");

  const auto header = split_tabs(lines[0]);
  auto column = [&](std::string_view name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_surface = column("surface");
  const int c_xyz[3] = {column("x"), column("y"), column("z")};
  const int c_meta = column("meta");
  for (const auto& [col, name] : {std::pair{c_surface, "surface"}, {c_xyz[0], "x"}, {c_xyz[1], "y"}, {c_xyz[2], "z"}})
    if (col < 0) throw ParseError(where(path, 1) + "missing column '" + name + "'");

  PointCloud cloud;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const std::size_t line_no = li + 1;
    const auto fields = split_tabs(lines[li]);
    const int required = std::max({c_surface, c_xyz[0], c_xyz[1], c_xyz[2]});
    if (static_cast<int>(fields.size()) <= required)
      throw ParseError(where(path, line_no) + "expected at least " + std::to_string(required + 1) + " columns");
    if (fields[c_surface].empty()) throw ParseError(where(path, line_no) + "empty surface");
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      double v = 0.0;
      if (!parse_number(fields[c_xyz[a]], v))
        throw ParseError(where(path, line_no) + "non-numeric coordinate '" + std::string(fields[c_xyz[a]]) + "'");
      if (!std::isfinite(v))
        throw ParseError(where(path, line_no) + "non-finite coordinate '" + std::string(fields[c_xyz[a]]) + "'");
      p[a] = v;
    }
    Token t{static_cast<TokenId>(cloud.tokens.size()), std::string(fields[c_surface]), std::nullopt};
    if (c_meta >= 0 && c_meta < static_cast<int>(fields.size()) && !fields[c_meta].empty())
      t.meta = std::string(fields[c_meta]);
    cloud.tokens.push_back(std::move(t));
    cloud.positions.push_back(p);
  }
  if (cloud.empty()) throw ParseError(where(path, 1) + "no data rows");
  cloud.bbox_original = bounds_of(cloud.positions);
  return cloud;
}

void save_points_3d(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  const bool has_meta = std::any_of(cloud.tokens.begin(), cloud.tokens.end(), [](const Token& t) { return t.meta.has_value(); });
  out << "surface\tx\ty\tz" << (has_meta ? "\tmeta" : "") << '\n';
  char buf[64];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out << cloud.tokens[i].surface;
    for (int a = 0; a < 3; ++a) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), cloud.positions[i][a]);
      out << '\t' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    if (has_meta) {
      std::string meta = cloud.tokens[i].meta.value_or("");
      std::replace(meta.begin(), meta.end(), '\t', ' ');
      std::replace(meta.begin(), meta.end(), '\n', ' ');
      out << '\t' << meta;
    }
    out << '\n';
  }
}

PointCloud normalize_to_unit_cube(const PointCloud& cloud, double margin) {
  if (cloud.empty()) throw InvariantError("cannot normalize an empty point cloud");
  if (!(margin >= 0.0 && margin < 0.5)) throw InvariantError("normalization margin must be in [0, 0.5)");
  const Bounds b = bounds_of(cloud.positions);
  const Vec3 side = b.max - b.min;
  const double extent = std::max({side.x, side.y, side.z});
  if (!(extent > 0.0)) throw InvariantError("all points coincide; cannot normalize");

  const double span = 1.0 - 2.0 * margin;
  const double scale = span / extent;
  Vec3 offset;
  for (int a = 0; a < 3; ++a) offset[a] = margin + 0.5 * (span - side[a] * scale);

  PointCloud out;
  out.tokens = cloud.tokens;
  out.bbox_original = b;
  out.positions.reserve(cloud.size());
  for (const Vec3& p : cloud.positions) {
    Vec3 q;
    for (int a = 0; a < 3; ++a) q[a] = std::clamp(offset[a] + (p[a] - b.min[a]) * scale, margin, 1.0 - margin);
    out.positions.push_back(q);
  }
  return out;
}

PointCloud cloud_from_positions(const std::vector<Token>& tokens, std::vector<Vec3> positions) {
  PointCloud cloud;
  cloud.tokens = tokens;
  cloud.positions = std::move(positions);
  cloud.bbox_original = bounds_of(cloud.positions);
  return cloud;
}

}  // namespace filament
