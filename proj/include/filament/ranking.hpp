#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "filament/types.hpp"

namespace filament {

enum class Metric { mcpm, euclidean, cosine };
std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);

struct RankEntry {
  TokenId token = 0;
  double score = 0.0;  // similarity (mcpm, cosine) or distance (euclidean)
};

struct Ranking {
  std::optional<TokenId> query;
  Metric metric = Metric::mcpm;
  std::vector<RankEntry> entries;  // best first
};

}  // namespace filament
