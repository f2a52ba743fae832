#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "cwm/errors.hpp"
#include "cwm/rng.hpp"

namespace cwm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EsnParams {
  int n_neurons = 1000;
  double sparsity = 0.5;        // fraction of W entries forced to zero
  double spectral_radius = 0.1;
  double noise_std = 0.0;       // std of the uniform state noise xi
  int input_dim = 2;            // (V, T)
  int output_dim = 1;           // M
  std::uint64_t seed = 0;

  void validate() const {
    if (n_neurons < 1) throw ContractError("EsnParams: n_neurons must be >= 1");
    if (sparsity < 0.0 || sparsity > 1.0) throw ContractError("EsnParams: sparsity outside [0,1]");
    if (!(spectral_radius > 0.0)) throw ContractError("EsnParams: spectral_radius must be > 0");
    if (noise_std < 0.0) throw ContractError("EsnParams: noise_std must be >= 0");
    if (input_dim < 1 || output_dim < 1) throw ContractError("EsnParams: dims must be >= 1");
  }
};

/**
 * Largest absolute eigenvalue.
 *
 * Power iteration with relative tolerance 1e-8 and a 10,000-iteration cap;
 * a full (complex) eigendecomposition is used as fallback when the iteration
 * does not settle, e.g. when the dominant eigenvalues form a complex pair.
 */
inline double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw ContractError("spectral_radius: matrix must be square");
  const Eigen::Index n = m.rows();
  if (n == 0) return 0.0;

  Vector v = Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) += 1e-3 * static_cast<double>(i % 7);
  v.normalize();

  const double tol = 1e-8;
  const int max_iter = 10000;
  double rho = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;  // v in the null space and stayed there
    const double prev = rho;
    rho = norm;
    v = w / norm;
    if (it > 0 && std::abs(rho - prev) <= tol * rho) return rho;
  }
  // Non-convergence: dense fallback.
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalError("spectral_radius: eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/**
 * Echo state network with output feedback:
 *
 *   x[n] = C tanh(W_in u[n] + W (x[n-1] + xi) + W_fb y[n-1])
 *   y[n] = W_out x[n]
 *
 * C is an optional gating matrix (identity when absent) applied outside the
 * nonlinearity.  The algebraically equivalent-looking reformulation
 * W~ = W C (folding the gate into the recurrent weights, inside tanh) is a
 * different dynamical system and is intentionally not what run/step compute.
 *
 * xi is i.i.d. per neuron per step, uniform on [-sqrt(3)*noise_std,
 * +sqrt(3)*noise_std], so std(xi) equals noise_std exactly.  No draws are
 * consumed when noise_std == 0.
 */
struct EsnModel {
  Matrix W;      // n_neurons x n_neurons
  Matrix W_in;   // n_neurons x input_dim
  Matrix W_fb;   // n_neurons x output_dim
  Matrix W_out;  // output_dim x n_neurons; empty until trained
  Vector x;      // current state
  Vector y;      // last output
  EsnParams params;
  Rng rng;       // noise stream

  bool trained() const { return W_out.size() > 0; }

  int n() const { return static_cast<int>(W.rows()); }
};

/**
 * Builds a reservoir from params.
 *
 * W, W_in, W_fb entries are uniform on [-1, 1).  W is then masked to the
 * requested sparsity (i.i.d. Bernoulli zero-mask) and rescaled so its
 * spectral radius equals params.spectral_radius.  Draw order is fixed and
 * documented: W row by row, then the mask row by row, then W_in, then W_fb.
 * The same generator keeps serving the model's noise stream afterwards.
 */
inline EsnModel init_reservoir(const EsnParams& params) {
  params.validate();
  const int n = params.n_neurons;
  EsnModel m;
  m.params = params;
  m.rng = Rng(params.seed);

  m.W.resize(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m.W(r, c) = m.rng.uniform(-1.0, 1.0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (m.rng.bernoulli(params.sparsity)) m.W(r, c) = 0.0;

  m.W_in.resize(n, params.input_dim);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < params.input_dim; ++c) m.W_in(r, c) = m.rng.uniform(-1.0, 1.0);

  m.W_fb.resize(n, params.output_dim);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < params.output_dim; ++c) m.W_fb(r, c) = m.rng.uniform(-1.0, 1.0);

  const double rho = spectral_radius(m.W);
  if (rho <= 0.0)
    throw NumericalError("init_reservoir: W has zero spectral radius, cannot scale (sparsity 1?)");
  m.W *= params.spectral_radius / rho;

  m.x = Vector::Zero(n);
  m.y = Vector::Zero(params.output_dim);
  return m;
}

namespace detail {

/// One state update with an explicit feedback value; y is not computed.
/// Used by step() and by readout training (where W_out may not exist yet).
inline void advance_state(EsnModel& m, const Eigen::Ref<const Vector>& u,
                          const Eigen::Ref<const Vector>& feedback,
                          const Matrix* conceptor) {
  if (u.size() != m.W_in.cols())
    throw ContractError("advance_state: input dimension mismatch");
  if (conceptor && (conceptor->rows() != m.W.rows() || conceptor->cols() != m.W.rows()))
    throw ContractError("advance_state: conceptor dimension mismatch");

  Vector pre;
  if (m.params.noise_std > 0.0) {
    const double b = std::sqrt(3.0) * m.params.noise_std;
    Vector noisy = m.x;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy(i) += m.rng.uniform(-b, b);
    pre = m.W_in * u + m.W * noisy + m.W_fb * feedback;
  } else {
    pre = m.W_in * u + m.W * m.x + m.W_fb * feedback;
  }
  pre = pre.array().tanh();
  if (conceptor)
    m.x.noalias() = (*conceptor) * pre;
  else
    m.x = std::move(pre);
}

}  // namespace detail

/// One closed-loop step. Requires a trained readout. Returns (state, output)
/// by reference to the updated model fields.
inline void step(EsnModel& m, const Eigen::Ref<const Vector>& u, const Matrix* conceptor = nullptr) {
  if (!m.trained()) throw ContractError("step: W_out is not set (train the readout first)");
  detail::advance_state(m, u, m.y, conceptor);
  m.y.noalias() = m.W_out * m.x;
}

struct StateTrajectory {
  Matrix states;   // n_neurons x n_steps
  Matrix outputs;  // output_dim x n_steps
};

/**
 * Folds step over an input sequence (inputs are columns).  The per-step
 * conceptor schedule holds one pointer per step, nullptr meaning identity;
 * an empty schedule means identity throughout.  The model is advanced to the
 * final step.
 */
inline StateTrajectory run(EsnModel& m, const Matrix& inputs,
                           const std::vector<const Matrix*>& conceptor_schedule = {}) {
  const Eigen::Index steps = inputs.cols();
  if (steps == 0) throw ContractError("run: empty input sequence");
  if (!conceptor_schedule.empty() &&
      static_cast<Eigen::Index>(conceptor_schedule.size()) != steps)
    throw ContractError("run: conceptor schedule length != input length");

  StateTrajectory traj;
  traj.states.resize(m.n(), steps);
  traj.outputs.resize(m.params.output_dim, steps);
  for (Eigen::Index i = 0; i < steps; ++i) {
    const Matrix* c = conceptor_schedule.empty() ? nullptr : conceptor_schedule[i];
    step(m, inputs.col(i), c);
    traj.states.col(i) = m.x;
    traj.outputs.col(i) = m.y;
  }
  return traj;
}

}  // namespace cwm
