#include <algorithm>
#include <cmath>
#include <set>

#include "filament/analysis.hpp"
#include "filament/error.hpp"

namespace filament {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::mcpm:
      return "mcpm";
    case Metric::euclidean:
      return "euclidean";
    case Metric::cosine:
      return "cosine";
  }
  return "unknown";
}

Metric metric_from_string(std::string_view s) {
  if (s == "mcpm") return Metric::mcpm;
  if (s == "euclidean" || s == "euclid") return Metric::euclidean;
  if (s == "cosine") return Metric::cosine;
  throw ParseError("unknown metric '" + std::string(s) + "' (expected mcpm, euclidean or cosine)");
}

namespace {

void check_query(TokenId query, std::size_t n) {
  if (query >= n) throw UnknownTokenError("unknown token id " + std::to_string(query));
}

void sort_ascending(std::vector<RankEntry>& e) {
  std::sort(e.begin(), e.end(), [](const RankEntry& a, const RankEntry& b) {
    return a.score != b.score ? a.score < b.score : a.token < b.token;
  });
}

void sort_descending(std::vector<RankEntry>& e) {
  std::sort(e.begin(), e.end(), [](const RankEntry& a, const RankEntry& b) {
    return a.score != b.score ? a.score > b.score : a.token < b.token;
  });
}

}  // namespace

Ranking euclidean_ranking(const EmbeddingSet& set, TokenId query) {
  check_query(query, set.size());
  Ranking r{query, Metric::euclidean, {}};
  r.entries.reserve(set.size() - 1);
  const float* q = set.row(query);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i == query) continue;
    const float* v = set.row(i);
    double sum = 0.0;
    for (std::size_t d = 0; d < set.dim; ++d) {
      const double diff = static_cast<double>(v[d]) - q[d];
      sum += diff * diff;
    }
    r.entries.push_back({static_cast<TokenId>(i), std::sqrt(sum)});
  }
  sort_ascending(r.entries);
  return r;
}

Ranking euclidean_ranking(const PointCloud& cloud, TokenId query) {
  check_query(query, cloud.size());
  Ranking r{query, Metric::euclidean, {}};
  r.entries.reserve(cloud.size() - 1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (i == query) continue;
    r.entries.push_back({static_cast<TokenId>(i), distance(cloud.positions[i], cloud.positions[query])});
  }
  sort_ascending(r.entries);
  return r;
}

Ranking cosine_ranking(const EmbeddingSet& set, TokenId query) {
  check_query(query, set.size());
  auto norm_of = [&](std::size_t i) {
    const float* v = set.row(i);
    double s = 0.0;
    for (std::size_t d = 0; d < set.dim; ++d) s += static_cast<double>(v[d]) * v[d];
    return std::sqrt(s);
  };
  const double qn = norm_of(query);
  if (!(qn > 0.0)) throw InvariantError("cosine_ranking: query '" + set.tokens[query].surface + "' has a zero vector");

  Ranking r{query, Metric::cosine, {}};
  r.entries.reserve(set.size() - 1);
  const float* q = set.row(query);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i == query) continue;
    const double vn = norm_of(i);
    if (!(vn > 0.0)) {
      r.entries.push_back({static_cast<TokenId>(i), kZeroNormScore});
      continue;
    }
    const float* v = set.row(i);
    double d = 0.0;
    for (std::size_t k = 0; k < set.dim; ++k) d += static_cast<double>(v[k]) * q[k];
    r.entries.push_back({static_cast<TokenId>(i), d / (qn * vn)});
  }
  sort_descending(r.entries);
  return r;
}

double DiffRow::delta() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (rank_a && rank_b) return static_cast<double>(*rank_b) - static_cast<double>(*rank_a);
  if (rank_a) return inf;
  if (rank_b) return -inf;
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<std::optional<std::size_t>> rank_positions(const Ranking& r, std::size_t n_tokens) {
  std::vector<std::optional<std::size_t>> pos(n_tokens);
  for (std::size_t i = 0; i < r.entries.size(); ++i)
    if (r.entries[i].token < n_tokens) pos[r.entries[i].token] = i + 1;
  return pos;
}

std::vector<DiffRow> rank_diff_table(const Ranking& a, const Ranking& b, const Ranking& c, std::size_t top_k,
                                     const std::vector<Token>& tokens) {
  for (const Ranking* other : {&b, &c})
    if (a.query && other->query && *a.query != *other->query)
      throw InvariantError("rank_diff_table: rankings are for different queries");

  const std::size_t n = tokens.size();
  const auto pa = rank_positions(a, n);
  const auto pb = rank_positions(b, n);
  const auto pc = rank_positions(c, n);

  std::set<TokenId> chosen;
  for (const Ranking* r : {&a, &b, &c})
    for (std::size_t i = 0; i < std::min(top_k, r->entries.size()); ++i) chosen.insert(r->entries[i].token);

  std::vector<DiffRow> rows;
  rows.reserve(chosen.size());
  for (TokenId t : chosen) {
    if (t >= n) throw InvariantError("rank_diff_table: token id " + std::to_string(t) + " outside the token set");
    rows.push_back({t, tokens[t].surface, pa[t], pb[t], pc[t]});
  }
  std::sort(rows.begin(), rows.end(), [](const DiffRow& x, const DiffRow& y) {
    const double dx = x.delta();
    const double dy = y.delta();
    if (std::isnan(dx) != std::isnan(dy)) return std::isnan(dy);
    if (!std::isnan(dx) && dx != dy) return dx > dy;
    const std::size_t ax = x.rank_a.value_or(SIZE_MAX);
    const std::size_t ay = y.rank_a.value_or(SIZE_MAX);
    return ax != ay ? ax < ay : x.token < y.token;
  });
  return rows;
}

}  // namespace filament
