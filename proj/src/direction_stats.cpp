#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "filament/analysis.hpp"
#include "filament/error.hpp"

namespace filament {

DirectionStats direction_stats(const TrajectorySet& traj, int bins) {
  if (traj.n_steps == 0) throw InvariantError("direction_stats: trajectories have no steps");
  return direction_stats(traj.step_directions, bins);
}

DirectionStats direction_stats(const std::vector<Vec3>& directions, int bins) {
  if (directions.empty()) throw InvariantError("direction_stats: no directions");
  if (bins < 4 || bins % 2 != 0) throw InvariantError("direction_stats: bins must be even and >= 4");
  constexpr double pi = std::numbers::pi;

  // Dominant plane: top two eigenvectors of the second-moment matrix, which
  // treats d and -d alike.
  Eigen::Matrix3d moment = Eigen::Matrix3d::Zero();
  for (const Vec3& v : directions) {
    const Eigen::Vector3d e(v.x, v.y, v.z);
    moment += e * e.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(moment);
  const Eigen::Vector3d u = eig.eigenvectors().col(2);
  const Eigen::Vector3d w = eig.eigenvectors().col(1);

  DirectionStats out;
  out.plane_u = {u(0), u(1), u(2)};
  out.plane_v = {w(0), w(1), w(2)};
  out.histogram.assign(static_cast<std::size_t>(bins), 0.0);

  const double bin_width = 2.0 * pi / bins;
  double sum_cos = 0.0;
  double sum_sin = 0.0;
  for (const Vec3& v : directions) {
    const double phi = std::atan2(dot(v, out.plane_v), dot(v, out.plane_u));
    sum_cos += std::cos(phi);
    sum_sin += std::sin(phi);
    const int b = std::clamp(static_cast<int>(std::floor((phi + pi) / bin_width)), 0, bins - 1);
    out.histogram[static_cast<std::size_t>(b)] += 1.0;
  }
  const auto n = static_cast<double>(directions.size());
  for (double& h : out.histogram) h /= n;
  out.circular_variance = 1.0 - std::hypot(sum_cos, sum_sin) / n;

  // Best antipodal pair of sectors.
  const int half = bins / 2;
  const int reach = static_cast<int>(std::floor(kBimodalSectorHalfWidth / bin_width + 1e-9));
  const double uniform_share = std::min(1.0, 2.0 * (2 * reach + 1) / static_cast<double>(bins));
  auto at = [&](int b) { return out.histogram[static_cast<std::size_t>(((b % bins) + bins) % bins)]; };
  double best = -1.0;
  int best_bin = 0;
  for (int b = 0; b < half; ++b) {
    double s = 0.0;
    for (int o = -reach; o <= reach; ++o) s += at(b + o) + at(b + half + o);
    if (s > best) {
      best = s;
      best_bin = b;
    }
  }
  out.peak_azimuth = -pi + (best_bin + 0.5) * bin_width;
  out.bimodality = uniform_share < 1.0 ? std::clamp((best - uniform_share) / (1.0 - uniform_share), 0.0, 1.0) : 0.0;

  // Modes: local maxima of the [1 2 1]-smoothed histogram above twice the uniform level.
  std::vector<double> smooth(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) smooth[static_cast<std::size_t>(b)] = 0.25 * at(b - 1) + 0.5 * at(b) + 0.25 * at(b + 1);
  const double level = 2.0 / bins;
  for (int b = 0; b < bins; ++b) {
    const double c = smooth[static_cast<std::size_t>(b)];
    const double l = smooth[static_cast<std::size_t>((b + bins - 1) % bins)];
    const double r = smooth[static_cast<std::size_t>((b + 1) % bins)];
    if (c > level && c > l && c >= r) ++out.n_modes;
  }
  return out;
}

}  // namespace filament
