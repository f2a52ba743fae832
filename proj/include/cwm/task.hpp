#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>

#include "cwm/errors.hpp"
#include "cwm/rng.hpp"

namespace cwm {

enum class TaskVariant { Original, C2D, D2D };

inline std::string to_string(TaskVariant v) {
  switch (v) {
    case TaskVariant::Original: return "original";
    case TaskVariant::C2D: return "c2d";
    case TaskVariant::D2D: return "d2d";
  }
  return "?";
}

/// k-th point of the n_levels-point uniform grid on [-1, 1].
inline double grid_value(int k, int n_levels) {
  return -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n_levels - 1);
}

/**
 * Nearest grid point of the n_levels-point uniform grid on [-1, 1].
 * Exact midpoints round toward the +1 side.
 */
inline double discretize(double v, int n_levels) {
  if (n_levels < 2) throw ContractError("discretize: n_levels must be >= 2");
  const double t = (v + 1.0) * 0.5 * static_cast<double>(n_levels - 1);
  long k = static_cast<long>(std::floor(t + 0.5));
  if (k < 0) k = 0;
  if (k > n_levels - 1) k = n_levels - 1;
  return grid_value(static_cast<int>(k), n_levels);
}

struct TaskSpec {
  long n_steps = 0;
  double trigger_prob = 0.01;
  int min_gap = 1;  // minimum number of non-trigger steps between triggers
  TaskVariant variant = TaskVariant::Original;
  int n_levels = 11;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_steps < 1) throw ContractError("TaskSpec: n_steps must be >= 1");
    if (trigger_prob < 0.0 || trigger_prob > 1.0) throw ContractError("TaskSpec: trigger_prob outside [0,1]");
    if (n_levels < 2) throw ContractError("TaskSpec: n_levels must be >= 2");
    if (min_gap < 0) throw ContractError("TaskSpec: min_gap must be >= 0");
  }
};

/**
 * One gating-task episode.  V is the value stream, T the trigger stream
 * (0/1), M the target output: M latches V (or its discretization) at trigger
 * steps and stays constant otherwise.
 */
struct TaskTrace {
  Eigen::VectorXd V;
  Eigen::VectorXd T;
  Eigen::VectorXd M;

  long size() const { return static_cast<long>(V.size()); }

  /// Input matrix for EsnModel::run, rows (V; T), one column per step.
  Eigen::MatrixXd inputs() const {
    Eigen::MatrixXd u(2, V.size());
    u.row(0) = V.transpose();
    u.row(1) = T.transpose();
    return u;
  }
};

/**
 * Draws an episode.  V is i.i.d. uniform on [-1, 1) per step.  Triggers are
 * Bernoulli(trigger_prob) with at least min_gap non-trigger steps between
 * consecutive triggers; step 0 is always a trigger so M is defined from the
 * start.  In D2D, trigger-step V is snapped to the grid before latching.
 * Draw order: all of V first, then one trigger draw per step from step 1 on.
 */
inline TaskTrace generate_trace(const TaskSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const long n = spec.n_steps;
  TaskTrace tr;
  tr.V.resize(n);
  tr.T.resize(n);
  tr.M.resize(n);
  for (long i = 0; i < n; ++i) tr.V(i) = rng.uniform(-1.0, 1.0);

  long last_trigger = 0;
  tr.T(0) = 1.0;
  for (long i = 1; i < n; ++i) {
    const bool want = rng.bernoulli(spec.trigger_prob);
    const bool allowed = (i - last_trigger) > spec.min_gap;
    tr.T(i) = (want && allowed) ? 1.0 : 0.0;
    if (tr.T(i) == 1.0) last_trigger = i;
  }

  double cur = 0.0;
  for (long i = 0; i < n; ++i) {
    if (tr.T(i) == 1.0) {
      if (spec.variant == TaskVariant::D2D) tr.V(i) = discretize(tr.V(i), spec.n_levels);
      cur = (spec.variant == TaskVariant::Original) ? tr.V(i) : discretize(tr.V(i), spec.n_levels);
    }
    tr.M(i) = cur;
  }
  return tr;
}

/**
 * Collection episode: a single trigger at step 0 with V = m, the usual
 * uniform value stream afterwards, M = m throughout.
 */
inline TaskTrace single_hold_trace(double m, long n_steps, std::uint64_t seed) {
  if (n_steps < 1) throw ContractError("single_hold_trace: n_steps must be >= 1");
  if (m < -1.0 || m > 1.0) throw ContractError("single_hold_trace: m outside [-1,1]");
  Rng rng(seed);
  TaskTrace tr;
  tr.V.resize(n_steps);
  tr.T = Eigen::VectorXd::Zero(n_steps);
  tr.M = Eigen::VectorXd::Constant(n_steps, m);
  for (long i = 0; i < n_steps; ++i) tr.V(i) = rng.uniform(-1.0, 1.0);
  tr.V(0) = m;
  tr.T(0) = 1.0;
  return tr;
}

}  // namespace cwm
