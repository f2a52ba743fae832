#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cwm/conceptor.hpp"
#include "cwm/errors.hpp"

namespace cwm {

struct PcaResult {
  Matrix components;               // k columns, each a unit direction in flattened-matrix space
  Vector explained_variance_ratio; // k entries, non-increasing, each in [0,1]
  Matrix projections;              // n_samples x k coordinates
  Vector mean;                     // sample mean (flattened), used to center new samples
};

/**
 * PCA over flattened conceptor matrices via the small-sample Gram trick:
 * with n samples of dimension D = N*N and n << D, eigendecompose the n x n
 * Gram matrix Z^T Z of the mean-centered flattened sample matrix Z instead
 * of the D x D covariance.  Ratios are Gram eigenvalues over their total,
 * identical to covariance-eigenvalue ratios.
 */
inline PcaResult pca_conceptors(const std::vector<const Conceptor*>& conceptors, int k) {
  const int n = static_cast<int>(conceptors.size());
  if (k < 1) throw ContractError("pca_conceptors: k must be >= 1");
  if (n < k + 1) throw ContractError("pca_conceptors: need at least k+1 conceptors");
  const Eigen::Index dim = conceptors[0]->dim();
  const Eigen::Index d = dim * dim;
  for (const Conceptor* c : conceptors)
    if (c->dim() != dim) throw ContractError("pca_conceptors: mixed dimensions");

  // Mean-centered flattened samples as columns of Z (D x n).
  Matrix z(d, n);
  for (int i = 0; i < n; ++i)
    z.col(i) = Eigen::Map<const Vector>(conceptors[i]->matrix.data(), d);
  const double raw_scale = z.squaredNorm();
  const Vector mean = z.rowwise().mean();
  z.colwise() -= mean;

  const Matrix gram = z.transpose() * z;  // n x n
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success) throw NumericalError("pca_conceptors: eigensolver failed");
  const Vector evals = es.eigenvalues().reverse();
  const Matrix evecs = es.eigenvectors().rowwise().reverse();

  const double total = evals.sum();
  // Centering identical samples leaves ~1e-17 residuals, so compare against
  // the raw sample scale rather than exact zero.
  if (!(total > 1e-20 * std::max(raw_scale, 1.0)))
    throw NumericalError("pca_conceptors: zero total variance (identical conceptors)");

  PcaResult res;
  res.mean = mean;
  res.explained_variance_ratio = evals.head(k) / total;
  res.components.resize(d, k);
  res.projections.resize(n, k);
  for (int j = 0; j < k; ++j) {
    const double lam = std::max(evals(j), 0.0);
    const double s = std::sqrt(lam);
    if (s > 0.0) {
      res.components.col(j) = z * (evecs.col(j) / s);
      res.projections.col(j) = s * evecs.col(j);
    } else {
      res.components.col(j).setZero();
      res.projections.col(j).setZero();
    }
  }
  return res;
}

/// Projects a conceptor onto an existing PCA basis (centering with the
/// fit's sample mean). Returns the k coordinates.
inline Vector pca_project(const PcaResult& pca, const Conceptor& c) {
  const Eigen::Index d = pca.mean.size();
  if (c.matrix.size() != d) throw ContractError("pca_project: dimension mismatch");
  const Vector flat = Eigen::Map<const Vector>(c.matrix.data(), d) - pca.mean;
  return pca.components.transpose() * flat;
}

}  // namespace cwm
