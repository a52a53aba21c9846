#include "filament/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace filament {

ScalarField::ScalarField(GridDims dims, float fill) : dims_(dims), values_(dims.count(), fill) {}

Vec3 ScalarField::voxel_center(int i, int j, int k) const {
  return {(i + 0.5) / dims_.nx, (j + 0.5) / dims_.ny, (k + 0.5) / dims_.nz};
}

Vec3 ScalarField::world_to_grid(const Vec3& p) const {
  return {p.x * dims_.nx - 0.5, p.y * dims_.ny - 0.5, p.z * dims_.nz - 0.5};
}

double ScalarField::voxel_size() const {
  return 1.0 / std::min({dims_.nx, dims_.ny, dims_.nz});
}

double ScalarField::total_mass() const {
  double sum = 0.0;
  for (float v : values_) sum += v;
  return sum;
}

float ScalarField::max_value() const {
  return values_.empty() ? 0.0f : *std::max_element(values_.begin(), values_.end());
}

void ScalarField::fill(float v) { std::fill(values_.begin(), values_.end(), v); }

std::uint64_t ScalarField::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values_.data());
  for (std::size_t i = 0; i < values_.size() * sizeof(float); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

struct AxisWeights {
  int lo;
  int hi;
  double frac;
};

AxisWeights axis_weights(double g, int n) {
  if (!(g > 0.0)) return {0, 0, 0.0};  // also catches NaN
  const double top = n - 1;
  if (g >= top) return {n - 1, n - 1, 0.0};
  const int lo = static_cast<int>(g);
  return {lo, lo + 1, g - lo};
}

}  // namespace

TrilinearStencil trilinear_stencil(const GridDims& dims, const Vec3& p) {
  const AxisWeights ax = axis_weights(p.x * dims.nx - 0.5, dims.nx);
  const AxisWeights ay = axis_weights(p.y * dims.ny - 0.5, dims.ny);
  const AxisWeights az = axis_weights(p.z * dims.nz - 0.5, dims.nz);

  const std::size_t nx = dims.nx;
  const std::size_t nxy = nx * static_cast<std::size_t>(dims.ny);
  const std::size_t xs[2] = {static_cast<std::size_t>(ax.lo), static_cast<std::size_t>(ax.hi)};
  const std::size_t ys[2] = {static_cast<std::size_t>(ay.lo) * nx, static_cast<std::size_t>(ay.hi) * nx};
  const std::size_t zs[2] = {static_cast<std::size_t>(az.lo) * nxy, static_cast<std::size_t>(az.hi) * nxy};
  const double wx[2] = {1.0 - ax.frac, ax.frac};
  const double wy[2] = {1.0 - ay.frac, ay.frac};
  const double wz[2] = {1.0 - az.frac, az.frac};

  TrilinearStencil s{};
  int n = 0;
  for (int c = 0; c < 2; ++c)
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) {
        s.index[n] = xs[a] + ys[b] + zs[c];
        s.weight[n] = static_cast<float>(wx[a] * wy[b] * wz[c]);
        ++n;
      }
  return s;
}

float sample_trilinear(const ScalarField& field, const Vec3& p) {
  const TrilinearStencil s = trilinear_stencil(field.dims(), p);
  const auto values = field.values();
  float v = 0.0f;
  for (int n = 0; n < 8; ++n) v += s.weight[n] * values[s.index[n]];
  return v;
}

bool splat_trilinear(ScalarField& field, const Vec3& p, float amount) {
  if (!inside_unit_cube(p)) return false;
  const TrilinearStencil s = trilinear_stencil(field.dims(), p);
  auto values = field.values();
  for (int n = 0; n < 8; ++n) values[s.index[n]] += s.weight[n] * amount;
  return true;
}

}  // namespace filament
