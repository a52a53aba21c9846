#include <Eigen/Dense>
#include <cmath>

#include "filament/error.hpp"
#include "filament/ingest.hpp"

namespace filament {

PcaProjection pca_project(const EmbeddingSet& set, int out_dim) {
  const auto n = static_cast<Eigen::Index>(set.size());
  const auto d = static_cast<Eigen::Index>(set.dim);
  if (out_dim < 1 || out_dim > 3) throw InvariantError("pca_project: out_dim must be 1, 2 or 3");
  if (n <= out_dim) throw InvariantError("pca_project: need more points than output dimensions");
  if (d < 1) throw InvariantError("pca_project: empty vectors");

  Eigen::MatrixXd data(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) data(i, j) = set.row(static_cast<std::size_t>(i))[j];
  const Eigen::RowVectorXd mean = data.colwise().mean();
  data.rowwise() -= mean;

  const Eigen::MatrixXd cov = (data.transpose() * data) / static_cast<double>(n);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw InvariantError("pca_project: eigendecomposition failed");

  const Eigen::VectorXd& evals = eig.eigenvalues();  // ascending
  const double scale = std::max(evals.cwiseAbs().maxCoeff(), 1.0);
  const double tol = 1e-12 * scale * static_cast<double>(d);

  PcaProjection out;
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(d, 3);
  for (int c = 0; c < out_dim; ++c) {
    const Eigen::Index src = d - 1 - c;
    if (src < 0 || evals(src) <= tol) {
      out.rank_deficient = true;
      out.explained_variance.push_back(0.0);
      out.directions.emplace_back(static_cast<std::size_t>(d), 0.0);
      continue;
    }
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    if (v(pivot) < 0.0) v = -v;  // fixed sign convention
    basis.col(c) = v;
    out.explained_variance.push_back(evals(src));
    out.directions.emplace_back(v.data(), v.data() + d);
  }

  const Eigen::MatrixXd projected = data * basis;
  std::vector<Vec3> positions(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    positions[static_cast<std::size_t>(i)] = {projected(i, 0), projected(i, 1), projected(i, 2)};
  out.cloud = cloud_from_positions(set.tokens, std::move(positions));
  return out;
}

}  // namespace filament
