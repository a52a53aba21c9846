#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "filament/analysis.hpp"
#include "filament/error.hpp"

namespace filament {
namespace {

class DisjointSets {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) x = std::exchange(parent_[x], root);
    return root;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Lower id becomes root: it was created first in raster order.
    if (a < b)
      parent_[b] = a;
    else
      parent_[a] = b;
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

double auto_threshold(const ScalarField& trace, double mass_fraction) {
  if (!(mass_fraction > 0.0 && mass_fraction <= 1.0)) throw InvariantError("auto threshold: mass fraction must be in (0, 1]");
  std::vector<float> sorted(trace.values().begin(), trace.values().end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double total = trace.total_mass();
  if (!(total > 0.0)) return std::numeric_limits<double>::infinity();
  const double target = mass_fraction * total;
  double acc = 0.0;
  for (float v : sorted) {
    acc += v;
    if (acc >= target) return v;
  }
  return sorted.back();
}

ComponentLabels threshold_components(const ScalarField& trace, Threshold tau_choice) {
  const double tau = std::holds_alternative<double>(tau_choice)
                         ? std::get<double>(tau_choice)
                         : auto_threshold(trace, std::get<AutoThreshold>(tau_choice).mass_fraction);

  const GridDims d = trace.dims();
  ComponentLabels out;
  out.dims = d;
  out.tau = tau;
  out.labels.assign(d.count(), kBackground);

  // Pass 1: provisional labels (stored +1) unified with the 13 already-visited neighbors.
  DisjointSets sets;
  std::vector<std::uint32_t> provisional(d.count(), 0);
  const auto values = trace.values();
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t idx = trace.index(i, j, k);
        if (!(values[idx] >= tau)) continue;
        std::uint32_t label = 0;
        for (int dk = -1; dk <= 0; ++dk)
          for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
              if (dk == 0 && (dj > 0 || (dj == 0 && di >= 0))) continue;
              const int ni = i + di, nj = j + dj, nk = k + dk;
              if (ni < 0 || nj < 0 || nk < 0 || ni >= d.nx || nj >= d.ny) continue;
              const std::uint32_t other = provisional[trace.index(ni, nj, nk)];
              if (other == 0) continue;
              if (label == 0)
                label = other;
              else
                sets.unite(label - 1, other - 1);
            }
        provisional[idx] = label != 0 ? label : sets.make() + 1;
      }

  // Pass 2: resolve roots, accumulate mass, then relabel by descending mass.
  std::vector<double> root_mass(sets.size(), 0.0);
  std::vector<std::size_t> root_first(sets.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t idx = 0; idx < provisional.size(); ++idx) {
    if (provisional[idx] == 0) continue;
    const std::uint32_t root = sets.find(provisional[idx] - 1);
    provisional[idx] = root + 1;
    root_mass[root] += values[idx];
    root_first[root] = std::min(root_first[root], idx);
  }
  std::vector<std::uint32_t> roots;
  for (std::uint32_t r = 0; r < sets.size(); ++r)
    if (root_first[r] != std::numeric_limits<std::size_t>::max()) roots.push_back(r);
  std::sort(roots.begin(), roots.end(), [&](std::uint32_t a, std::uint32_t b) {
    return root_mass[a] != root_mass[b] ? root_mass[a] > root_mass[b] : root_first[a] < root_first[b];
  });
  std::vector<std::uint32_t> final_label(sets.size(), kBackground);
  for (std::size_t n = 0; n < roots.size(); ++n) {
    final_label[roots[n]] = static_cast<std::uint32_t>(n + 1);
    out.component_mass.push_back(root_mass[roots[n]]);
  }
  for (std::size_t idx = 0; idx < provisional.size(); ++idx)
    if (provisional[idx] != 0) out.labels[idx] = final_label[provisional[idx] - 1];
  out.n_components = static_cast<std::uint32_t>(roots.size());
  return out;
}

ClusterLabeling assign_clusters(const PointCloud& cloud, const ComponentLabels& labels, double assign_radius_voxels) {
  ClusterLabeling out;
  out.components = labels;
  out.n_components = labels.n_components;
  out.component_mass = labels.component_mass;
  out.token_labels.assign(cloud.size(), std::nullopt);

  const GridDims d = labels.dims;
  const double r = assign_radius_voxels;
  for (std::size_t t = 0; t < cloud.size(); ++t) {
    const Vec3& p = cloud.positions[t];
    const double g[3] = {p.x * d.nx - 0.5, p.y * d.ny - 0.5, p.z * d.nz - 0.5};
    int lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::ceil(g[a] - r)));
      hi[a] = std::min(d[a] - 1, static_cast<int>(std::floor(g[a] + r)));
    }
    double best = r * r;
    std::optional<std::uint32_t> label;
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const std::uint32_t l =
              labels.labels[static_cast<std::size_t>(i) + static_cast<std::size_t>(d.nx) * (j + static_cast<std::size_t>(d.ny) * k)];
          if (l == kBackground) continue;
          const double dist2 = (i - g[0]) * (i - g[0]) + (j - g[1]) * (j - g[1]) + (k - g[2]) * (k - g[2]);
          if (dist2 < best || (dist2 == best && !label)) {
            best = dist2;
            label = l;
          }
        }
    out.token_labels[t] = label;
  }
  return out;
}

}  // namespace filament
