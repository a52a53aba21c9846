#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "filament/vec3.hpp"

namespace filament {

using TokenId = std::uint32_t;

struct Token {
  TokenId id = 0;
  std::string surface;              // "wind_NOUN", or a bare word for contextual sets
  std::optional<std::string> meta;  // source sentence for contextual embeddings
};

struct Bounds {
  Vec3 min;
  Vec3 max;
};

Bounds bounds_of(const std::vector<Vec3>& points);

/// Tokens with 3D positions. After normalize_to_unit_cube() every coordinate
/// lies in [0,1]; bbox_original keeps the bounds before normalization.
struct PointCloud {
  std::vector<Token> tokens;
  std::vector<Vec3> positions;
  Bounds bbox_original;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

/// Native high-dimensional vectors, row-major N x dim.
struct EmbeddingSet {
  std::vector<Token> tokens;
  std::vector<float> values;
  std::size_t dim = 0;

  std::size_t size() const { return tokens.size(); }
  const float* row(std::size_t i) const { return values.data() + i * dim; }
  float* row(std::size_t i) { return values.data() + i * dim; }
};

/// Lookup of a token id by exact surface; nullopt when absent.
std::optional<TokenId> find_surface(const std::vector<Token>& tokens, const std::string& surface);

/// Up to `limit` surfaces closest to `surface` by edit distance, for error messages.
std::vector<std::string> nearest_surfaces(const std::vector<Token>& tokens, const std::string& surface,
                                          std::size_t limit = 5);

}  // namespace filament
