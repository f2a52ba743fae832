#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>

#include "cwm/errors.hpp"
#include "cwm/esn.hpp"

namespace cwm {

/**
 * An N x N symmetric matrix with spectrum in [0, 1), built from a cloud of
 * reservoir states.  `aperture` records the regularization scale a used at
 * construction (regularizer I/a); `tag` optionally names the constant value
 * the source states were holding.
 */
struct Conceptor {
  Matrix matrix;
  double aperture = 0.0;
  std::optional<double> tag;
  long source_len = 0;

  Eigen::Index dim() const { return matrix.rows(); }
};

namespace detail {

inline void require_same_dim(const Conceptor& a, const Conceptor& b, const char* op) {
  if (a.dim() != b.dim()) throw ContractError(std::string(op) + ": dimension mismatch");
}

struct EigenPair {
  Matrix q;
  Vector d;
};

inline EigenPair sym_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("sym_eig: eigensolver failed");
  return {es.eigenvectors(), es.eigenvalues()};
}

/// Eigendecomposition with eigenvalues clamped into [lo, hi].  The printed
/// Boolean formulas are singular at eigenvalues 0 and 1; this is the minimal
/// regularization that makes every inverse well defined.
inline EigenPair clamped_eig(const Conceptor& c, double lo = 1e-12, double hi = 1.0 - 1e-12) {
  EigenPair p = sym_eig(c.matrix);
  for (Eigen::Index i = 0; i < p.d.size(); ++i) {
    if (p.d(i) < lo) p.d(i) = lo;
    if (p.d(i) > hi) p.d(i) = hi;
  }
  return p;
}

inline Matrix from_eig(const EigenPair& p) {
  return p.q * p.d.asDiagonal() * p.q.transpose();
}

inline Matrix symmetrized(Matrix m) {
  m = 0.5 * (m + m.transpose()).eval();
  return m;
}

/// Inverse of an SPD matrix; Cholesky with a pivoted-LDLT fallback for the
/// extreme condition numbers clamping can produce.
inline Matrix spd_inverse(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) return llt.solve(Matrix::Identity(m.rows(), m.cols()));
  Eigen::LDLT<Matrix> ldlt(m);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw NumericalError("spd_inverse: factorization failed");
  return ldlt.solve(Matrix::Identity(m.rows(), m.cols()));
}

}  // namespace detail

/**
 * C = R (R + I/a)^{-1} with R = X X^T, states as columns.
 *
 * R is deliberately not divided by the number of states; the regularizer is
 * exactly I/a.  Set normalize_r to use R = X X^T / L instead (equivalent to
 * aperture a/L with the default convention).
 */
inline Conceptor conceptor_from_states(const Matrix& states, double aperture,
                                       bool normalize_r = false) {
  if (states.cols() < 1) throw ContractError("conceptor_from_states: need at least one state");
  if (!(aperture > 0.0)) throw ContractError("conceptor_from_states: aperture must be > 0");
  const Eigen::Index n = states.rows();
  Matrix r = states * states.transpose();
  if (normalize_r) r /= static_cast<double>(states.cols());

  Matrix a = r + Matrix::Identity(n, n) / aperture;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError("conceptor_from_states: regularized solve failed");
  // C = R A^{-1}; with R and A symmetric, C = (A^{-1} R)^T.
  Matrix c = llt.solve(r).transpose();

  Conceptor out;
  out.matrix = detail::symmetrized(std::move(c));
  out.aperture = aperture;
  out.source_len = static_cast<long>(states.cols());
  return out;
}

/**
 * Aperture adaptation phi(C, gamma) = C (C + gamma^{-2} (I - C))^{-1}.
 *
 * gamma = 1 returns C unchanged (exact identity).  Eigenvalues at 1 are
 * clamped to 1 - 1e-12 before the map.  Composition law:
 * phi(phi(C, g), d) = phi(C, g d).  phi(C, g) equals the conceptor built
 * from the same states with aperture g^2 * a, so the recorded aperture is
 * multiplied by gamma^2.
 */
inline Conceptor aperture_adapt(const Conceptor& c, double gamma) {
  if (!(gamma > 0.0)) throw ContractError("aperture_adapt: gamma must be > 0");
  if (gamma == 1.0) return c;

  detail::EigenPair p = detail::clamped_eig(c, 0.0, 1.0 - 1e-12);
  const double inv_g2 = 1.0 / (gamma * gamma);
  for (Eigen::Index i = 0; i < p.d.size(); ++i) {
    const double v = p.d(i);
    p.d(i) = v / (v + inv_g2 * (1.0 - v));
  }
  Conceptor out;
  out.matrix = detail::symmetrized(detail::from_eig(p));
  out.aperture = c.aperture * gamma * gamma;
  out.tag = c.tag;
  out.source_len = c.source_len;
  return out;
}

/// NOT C = I - C (exact involution).
inline Conceptor negate(const Conceptor& c) {
  Conceptor out;
  out.matrix = Matrix::Identity(c.dim(), c.dim()) - c.matrix;
  out.aperture = c.aperture;
  out.source_len = c.source_len;
  return out;
}

/// C AND B = (C^{-1} + B^{-1} - I)^{-1}, eigenvalues clamped first.
inline Conceptor and_op(const Conceptor& c, const Conceptor& b) {
  detail::require_same_dim(c, b, "and_op");
  const Eigen::Index n = c.dim();
  detail::EigenPair pc = detail::clamped_eig(c);
  detail::EigenPair pb = detail::clamped_eig(b);
  Matrix inv_c = pc.q * pc.d.cwiseInverse().asDiagonal() * pc.q.transpose();
  Matrix inv_b = pb.q * pb.d.cwiseInverse().asDiagonal() * pb.q.transpose();
  Matrix s = inv_c + inv_b - Matrix::Identity(n, n);
  Conceptor out;
  out.matrix = detail::symmetrized(detail::spd_inverse(s));
  out.aperture = (c.aperture == b.aperture) ? c.aperture : 0.0;
  return out;
}

namespace detail {

/// C (I - C)^{-1} on the clamped spectrum: eigenvalue map d -> d / (1 - d).
inline Matrix ratio_map(const EigenPair& p) {
  Vector d = p.d;
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = d(i) / (1.0 - d(i));
  return p.q * d.asDiagonal() * p.q.transpose();
}

/// (I + S^{-1})^{-1} rewritten as (S + I)^{-1} S: one solve against S + I,
/// whose spectrum is bounded below by 1, instead of inverting S whose
/// clamped spectrum spans ~24 decades.
inline Matrix or_from_sum(const Matrix& s) {
  Matrix shifted = s;
  shifted.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) throw NumericalError("or_from_sum: Cholesky failed");
  return symmetrized(llt.solve(s));
}

}  // namespace detail

/// C OR B = (I + (C(I-C)^{-1} + B(I-B)^{-1})^{-1})^{-1}, clamped first.
inline Conceptor or_op(const Conceptor& c, const Conceptor& b) {
  detail::require_same_dim(c, b, "or_op");
  Matrix s = detail::ratio_map(detail::clamped_eig(c)) + detail::ratio_map(detail::clamped_eig(b));
  Conceptor out;
  out.matrix = detail::or_from_sum(s);
  out.aperture = (c.aperture == b.aperture) ? c.aperture : 0.0;
  return out;
}

/**
 * Weighted, idempotent disjunction built from beta*R + (1-beta)*Q:
 * C OR_beta B = (I + (beta C(I-C)^{-1} + (1-beta) B(I-B)^{-1})^{-1})^{-1}.
 * beta = 0 returns B exactly, beta = 1 returns C exactly.
 */
inline Conceptor or_beta(const Conceptor& c, const Conceptor& b, double beta) {
  detail::require_same_dim(c, b, "or_beta");
  if (beta < 0.0 || beta > 1.0) throw ContractError("or_beta: beta outside [0,1]");
  if (beta == 0.0) return b;
  if (beta == 1.0) return c;
  Matrix s = beta * detail::ratio_map(detail::clamped_eig(c)) +
             (1.0 - beta) * detail::ratio_map(detail::clamped_eig(b));
  Conceptor out;
  out.matrix = detail::or_from_sum(s);
  out.aperture = (c.aperture == b.aperture) ? c.aperture : 0.0;
  return out;
}

/// Weighted conjunction: C AND_beta B = (beta C^{-1} + (1-beta) B^{-1})^{-1}.
inline Conceptor and_beta(const Conceptor& c, const Conceptor& b, double beta) {
  detail::require_same_dim(c, b, "and_beta");
  if (beta < 0.0 || beta > 1.0) throw ContractError("and_beta: beta outside [0,1]");
  if (beta == 0.0) return b;
  if (beta == 1.0) return c;
  detail::EigenPair pc = detail::clamped_eig(c);
  detail::EigenPair pb = detail::clamped_eig(b);
  Matrix s = beta * (pc.q * pc.d.cwiseInverse().asDiagonal() * pc.q.transpose()) +
             (1.0 - beta) * (pb.q * pb.d.cwiseInverse().asDiagonal() * pb.q.transpose());
  Conceptor out;
  out.matrix = detail::symmetrized(detail::spd_inverse(s));
  out.aperture = (c.aperture == b.aperture) ? c.aperture : 0.0;
  return out;
}

struct LincombResult {
  Conceptor conceptor;
  bool spectrum_in_unit;  // all eigenvalues in [0, 1) up to 1e-10
};

/**
 * lambda*C1 + (1-lambda)*C2, entrywise and unclamped.  For lambda in [0,1]
 * the spectrum stays in [0,1) by convexity; outside that range the result
 * may leave the conceptor cone, which the flag reports.
 */
inline LincombResult lincomb(const Conceptor& c1, const Conceptor& c2, double lambda) {
  detail::require_same_dim(c1, c2, "lincomb");
  LincombResult res;
  res.conceptor.matrix = lambda * c1.matrix + (1.0 - lambda) * c2.matrix;
  res.conceptor.aperture = (c1.aperture == c2.aperture) ? c1.aperture : 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(res.conceptor.matrix,
                                           Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  res.spectrum_in_unit = (lo >= -1e-10) && (hi < 1.0);
  return res;
}

/// Frobenius distance between conceptor matrices.
inline double distance(const Conceptor& c1, const Conceptor& c2) {
  detail::require_same_dim(c1, c2, "distance");
  return (c1.matrix - c2.matrix).norm();
}

/// Eigenvalues in descending order.
inline Vector spectrum(const Conceptor& c) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(c.matrix, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("spectrum: eigensolver failed");
  return es.eigenvalues().reverse();
}

}  // namespace cwm
