#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "filament/vec3.hpp"

namespace filament {

struct GridDims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  int operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Dense non-negative lattice over the unit cube, stored x-fastest:
/// index = i + nx * (j + ny * k). Voxel (i,j,k) is centered at
/// ((i+0.5)/nx, (j+0.5)/ny, (k+0.5)/nz).
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(GridDims dims, float fill = 0.0f);

  const GridDims& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_.nx) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_.ny) * static_cast<std::size_t>(k));
  }
  float at(int i, int j, int k) const { return values_[index(i, j, k)]; }
  float& at(int i, int j, int k) { return values_[index(i, j, k)]; }

  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  Vec3 voxel_center(int i, int j, int k) const;
  /// Continuous grid coordinate of a world point (voxel centers at integers).
  Vec3 world_to_grid(const Vec3& p) const;
  /// Edge length of one voxel along the largest axis, in world units.
  double voxel_size() const;

  /// Sum of all values, accumulated in double.
  double total_mass() const;
  float max_value() const;
  void fill(float v);
  /// FNV-1a over the raw bytes; used to check read-only access.
  std::uint64_t checksum() const;

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  GridDims dims_;
  std::vector<float> values_;
};

/// The eight voxels around a point and their trilinear weights (sum to 1).
struct TrilinearStencil {
  std::size_t index[8];
  float weight[8];
};

/// Clamp-to-edge stencil: coordinates beyond the outermost voxel centers are
/// clamped onto them, so sampling is total and splatting conserves mass.
TrilinearStencil trilinear_stencil(const GridDims& dims, const Vec3& p);

/// Exact trilinear interpolation of the 8 neighboring voxels (clamped at the edges).
float sample_trilinear(const ScalarField& field, const Vec3& p);

inline bool inside_unit_cube(const Vec3& p) {
  return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0 && p.z >= 0.0 && p.z <= 1.0;
}

/// Distributes `amount` over at most 8 voxels by trilinear weights. Points
/// outside the unit cube are dropped; returns whether the splat landed.
bool splat_trilinear(ScalarField& field, const Vec3& p, float amount);

}  // namespace filament
