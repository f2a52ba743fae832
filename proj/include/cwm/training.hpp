#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "cwm/errors.hpp"
#include "cwm/esn.hpp"
#include "cwm/task.hpp"

namespace cwm {

enum class TrainMode { Offline, Online };

struct TrainConfig {
  long n_train_steps = 25000;  // used by callers that generate the trace
  long washout = 100;
  double ridge = 1e-4;
  TrainMode mode = TrainMode::Offline;
  bool teacher_forcing = true;  // feedback driven by the target M while training

  void validate() const {
    if (washout < 0) throw ContractError("TrainConfig: washout must be >= 0");
    if (ridge < 0.0) throw ContractError("TrainConfig: ridge must be >= 0");
    if (washout >= n_train_steps) throw ContractError("TrainConfig: washout must be < n_train_steps");
  }
};

namespace detail {

/// Runs the reservoir over the trace (identity conceptor), teacher-forcing
/// the feedback with M when requested, and collects post-washout states as
/// columns.  The model is left at the final step's state.
inline Matrix collect_training_states(EsnModel& m, const TaskTrace& trace, const TrainConfig& cfg) {
  const long n = trace.size();
  if (cfg.washout >= n) throw ContractError("train: washout >= trace length");
  if (!cfg.teacher_forcing && !m.trained())
    throw ContractError("train: teacher_forcing=false requires an already trained readout");

  Matrix states(m.n(), n - cfg.washout);
  Vector u(2);
  Vector fb = m.y;
  for (long i = 0; i < n; ++i) {
    u(0) = trace.V(i);
    u(1) = trace.T(i);
    advance_state(m, u, fb, nullptr);
    if (i >= cfg.washout) states.col(i - cfg.washout) = m.x;
    if (cfg.teacher_forcing)
      fb = Vector::Constant(1, trace.M(i));
    else
      fb = m.W_out * m.x;
  }
  return states;
}

}  // namespace detail

/**
 * Offline ridge readout: W_out = Y X^T (X X^T + ridge I)^{-1} over the
 * post-washout states.  The conceptor is the identity throughout training;
 * only W_out changes.  With ridge = 0 a singular normal matrix surfaces as
 * NumericalError.
 */
inline void train_offline(EsnModel& m, const TaskTrace& trace, const TrainConfig& cfg) {
  cfg.validate();
  Matrix x = detail::collect_training_states(m, trace, cfg);
  const long n = trace.size();
  Eigen::RowVectorXd y = trace.M.segment(cfg.washout, n - cfg.washout).transpose();

  Matrix a = x * x.transpose();
  a.diagonal().array() += cfg.ridge;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError("train_offline: normal matrix not positive definite (ridge too small?)");
  // W_out^T = A^{-1} X Y^T
  Vector wt = llt.solve(x * y.transpose());

  const Vector residual = a * wt - x * y.transpose();
  const double scale = (x * y.transpose()).norm();
  if (scale > 0.0 && residual.norm() > 1e-6 * scale)
    throw NumericalError("train_offline: normal-equation solve did not converge");

  m.W_out = wt.transpose();
  m.y = m.W_out * m.x;
}

/**
 * Recursive least squares on W_out with P(0) = I / ridge, which solves the
 * same ridge problem recursively: after a full pass over stationary data the
 * weights coincide with the offline solution.  P is symmetrized every step.
 */
inline void train_online(EsnModel& m, const TaskTrace& trace, const TrainConfig& cfg) {
  cfg.validate();
  if (!(cfg.ridge > 0.0)) throw ContractError("train_online: ridge must be > 0 (P(0) = I/ridge)");
  const long n = trace.size();
  const int nn = m.n();

  Matrix p = Matrix::Identity(nn, nn) / cfg.ridge;
  Vector w = Vector::Zero(nn);  // W_out^T
  Vector u(2);
  Vector fb = m.y;
  for (long i = 0; i < n; ++i) {
    u(0) = trace.V(i);
    u(1) = trace.T(i);
    detail::advance_state(m, u, fb, nullptr);
    if (i >= cfg.washout) {
      const Vector px = p * m.x;
      const double denom = 1.0 + m.x.dot(px);
      const Vector gain = px / denom;
      const double err = trace.M(i) - w.dot(m.x);
      w += err * gain;
      p -= gain * px.transpose();
      p = 0.5 * (p + p.transpose()).eval();
    }
    if (cfg.teacher_forcing)
      fb = Vector::Constant(1, trace.M(i));
    else
      fb = m.W_out * m.x;
  }
  m.W_out = w.transpose();
  m.y = m.W_out * m.x;
}

struct Metrics {
  double rmse_hold = 0.0;     // non-trigger steps, 5 post-trigger settle steps excluded
  double rmse_trigger = 0.0;  // trigger steps only
  double max_drift = 0.0;     // max |y - M| over the hold steps
};

/**
 * Closed-loop evaluation from the model's current state.  rmse_hold skips
 * trigger steps and the 5 steps after each trigger (the output needs a
 * moment to settle after a jump).
 */
inline Metrics evaluate(EsnModel& m, const TaskTrace& trace) {
  if (!m.trained()) throw ContractError("evaluate: model is untrained");
  const long n = trace.size();
  Vector u(2);
  double sum_hold = 0.0, sum_trig = 0.0, max_drift = 0.0;
  long n_hold = 0, n_trig = 0;
  long last_trigger = -1000000;
  for (long i = 0; i < n; ++i) {
    u(0) = trace.V(i);
    u(1) = trace.T(i);
    step(m, u);
    const double err = m.y(0) - trace.M(i);
    if (trace.T(i) == 1.0) {
      last_trigger = i;
      sum_trig += err * err;
      ++n_trig;
    } else if (i - last_trigger > 5) {
      sum_hold += err * err;
      ++n_hold;
      max_drift = std::max(max_drift, std::abs(err));
    }
  }
  Metrics out;
  out.rmse_hold = n_hold ? std::sqrt(sum_hold / static_cast<double>(n_hold)) : 0.0;
  out.rmse_trigger = n_trig ? std::sqrt(sum_trig / static_cast<double>(n_trig)) : 0.0;
  out.max_drift = max_drift;
  return out;
}

}  // namespace cwm
