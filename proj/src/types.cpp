#include "filament/types.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace filament {

Bounds bounds_of(const std::vector<Vec3>& points) {
  if (points.empty()) return {};
  Bounds b{points.front(), points.front()};
  for (const Vec3& p : points) {
    for (int a = 0; a < 3; ++a) {
      b.min[a] = std::min(b.min[a], p[a]);
      b.max[a] = std::max(b.max[a], p[a]);
    }
  }
  return b;
}

std::optional<TokenId> find_surface(const std::vector<Token>& tokens, const std::string& surface) {
  for (const Token& t : tokens)
    if (t.surface == surface) return t.id;
  return std::nullopt;
}

namespace {

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::vector<std::string> nearest_surfaces(const std::vector<Token>& tokens, const std::string& surface,
                                          std::size_t limit) {
  std::vector<std::pair<std::size_t, std::size_t>> scored;  // (distance, index)
  scored.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) scored.emplace_back(edit_distance(surface, tokens[i].surface), i);
  const std::size_t keep = std::min(limit, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(tokens[scored[i].second].surface);
  return out;
}

}  // namespace filament
