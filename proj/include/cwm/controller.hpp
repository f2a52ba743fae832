#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cwm/conceptor.hpp"
#include "cwm/errors.hpp"
#include "cwm/esn.hpp"
#include "cwm/task.hpp"

namespace cwm {

/// Ordered long-term store: (value m, conceptor C_m) with strictly
/// increasing values, all conceptors of one dimension.
struct ConceptorBank {
  std::vector<std::pair<double, Conceptor>> entries;
  int n_levels = 0;
  double aperture = 0.0;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }

  void validate() const {
    for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
      if (!(entries[i].first < entries[i + 1].first))
        throw ContractError("ConceptorBank: values must be strictly increasing");
      if (entries[i].second.dim() != entries[i + 1].second.dim())
        throw ContractError("ConceptorBank: mixed conceptor dimensions");
    }
  }
};

/**
 * Builds one conceptor per value: starting from the model's current
 * (post-training) state each time, trigger (T=1, V=m) at step 0, then let
 * the network hold m against the live value stream for collect_len steps
 * under the identity conceptor; the collected states (the collect_len states
 * after the trigger step) give C_m = X X^T (X X^T + I/a)^{-1}, tagged m.
 * The model's state and noise stream are restored afterwards.
 */
inline ConceptorBank build_bank(EsnModel& model, const std::vector<double>& values,
                                double aperture, long collect_len, std::uint64_t trace_seed) {
  if (!model.trained()) throw ContractError("build_bank: model is untrained");
  if (collect_len < 1) throw ContractError("build_bank: collect_len must be >= 1");

  const Vector x0 = model.x;
  const Vector y0 = model.y;
  const Rng rng0 = model.rng;

  ConceptorBank bank;
  bank.aperture = aperture;
  bank.n_levels = static_cast<int>(values.size());
  Matrix states(model.n(), collect_len);
  Vector u(2);
  std::uint64_t k = 0;
  for (double m : values) {
    model.x = x0;
    model.y = y0;
    model.rng = rng0;
    const TaskTrace tr = single_hold_trace(m, collect_len + 1, trace_seed + k++);
    for (long i = 0; i < tr.size(); ++i) {
      u(0) = tr.V(i);
      u(1) = tr.T(i);
      step(model, u);
      if (i >= 1) states.col(i - 1) = model.x;
    }
    Conceptor c = conceptor_from_states(states, aperture);
    c.tag = m;
    bank.entries.emplace_back(m, std::move(c));
  }
  std::sort(bank.entries.begin(), bank.entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  bank.validate();

  model.x = x0;
  model.y = y0;
  model.rng = rng0;
  return bank;
}

/// Frobenius-nearest bank entry; ties break toward the smaller value.
inline const std::pair<double, Conceptor>& nearest_in_bank(const ConceptorBank& bank,
                                                           const Conceptor& c) {
  if (bank.empty()) throw ContractError("nearest_in_bank: empty bank");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double d = distance(bank.entries[i].second, c);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return bank.entries[best];
}

enum class ControllerMode { StoreRaw, SnapToBank, None };

inline std::string to_string(ControllerMode m) {
  switch (m) {
    case ControllerMode::StoreRaw: return "raw";
    case ControllerMode::SnapToBank: return "snap";
    case ControllerMode::None: return "none";
  }
  return "?";
}

struct ControllerPolicy {
  long collect_len = 100;
  ControllerMode mode = ControllerMode::SnapToBank;
  bool release_on_trigger = true;  // revert to identity the moment a new trigger arrives
  double aperture = 10.0;          // used when building the current-memory conceptor

  void validate() const {
    if (collect_len < 1) throw ContractError("ControllerPolicy: collect_len must be >= 1");
  }
};

enum class Phase { Idle, Collecting, Applying };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "idle";
    case Phase::Collecting: return "collecting";
    case Phase::Applying: return "applying";
  }
  return "?";
}

/// Per-step record of a controller run.
struct SessionTrace {
  Eigen::VectorXd V, T, y;
  std::vector<Phase> phase;
  std::vector<double> conceptor_tag;  // NaN when no conceptor is applied
  long collection_restarts = 0;       // triggers that arrived mid-collection

  long size() const { return static_cast<long>(V.size()); }
};

/**
 * Gated-session state machine.  A trigger switches to Collecting with the
 * identity conceptor; after collect_len states the current-memory conceptor
 * is built (StoreRaw) or swapped for the nearest bank entry (SnapToBank) and
 * applied until the next trigger.  None never applies a conceptor.  A
 * trigger arriving mid-collection restarts the collection (counted in
 * collection_restarts).
 */
inline SessionTrace run_gated_session(EsnModel& model, const ConceptorBank* bank,
                                      const TaskTrace& trace, const ControllerPolicy& policy) {
  if (!model.trained()) throw ContractError("run_gated_session: model is untrained");
  policy.validate();
  if (policy.mode == ControllerMode::SnapToBank && (bank == nullptr || bank->empty()))
    throw ContractError("run_gated_session: snap mode needs a nonempty bank");

  const long n = trace.size();
  SessionTrace out;
  out.V = trace.V;
  out.T = trace.T;
  out.y.resize(n);
  out.phase.resize(n);
  out.conceptor_tag.assign(n, std::numeric_limits<double>::quiet_NaN());

  Matrix collected(model.n(), policy.collect_len);
  long n_collected = -1;  // -1: not collecting
  std::optional<Conceptor> active;
  Phase phase = Phase::Idle;
  Vector u(2);

  for (long i = 0; i < n; ++i) {
    if (trace.T(i) == 1.0) {
      if (phase == Phase::Collecting) ++out.collection_restarts;
      if (policy.release_on_trigger || phase == Phase::Collecting) active.reset();
      phase = Phase::Collecting;
      n_collected = 0;
    }

    u(0) = trace.V(i);
    u(1) = trace.T(i);
    const Matrix* c = active ? &active->matrix : nullptr;
    step(model, u, c);
    out.y(i) = model.y(0);
    out.phase[i] = phase;
    if (active && active->tag) out.conceptor_tag[i] = *active->tag;

    if (phase == Phase::Collecting && trace.T(i) == 0.0) {
      collected.col(n_collected++) = model.x;
      if (n_collected == policy.collect_len) {
        if (policy.mode == ControllerMode::StoreRaw) {
          Conceptor cur = conceptor_from_states(collected, policy.aperture);
          cur.tag = trace.M(i);
          active = std::move(cur);
        } else if (policy.mode == ControllerMode::SnapToBank) {
          Conceptor cur = conceptor_from_states(collected, policy.aperture);
          active = nearest_in_bank(*bank, cur).second;
        }
        phase = Phase::Applying;
        n_collected = -1;
      }
    }
  }
  return out;
}

/// sign(v) with sign(0) = +1, as used by the relaxation formula.
inline double relax_sign(double v) { return v < 0.0 ? -1.0 : 1.0; }

/**
 * Predicted relaxation value when C_{c1} OR C_{c2} is applied after a
 * trigger latched v:
 *   c1                          if c1 == c2
 *   sign(v) * max(|c1|, |c2|)   if min(|c1|, |c2|) < |v| or c1 == -c2
 *   0                           otherwise
 */
inline double predict_relaxation(double c1, double c2, double v) {
  if (c1 == c2) return c1;
  if (std::min(std::abs(c1), std::abs(c2)) < std::abs(v) || c1 == -c2)
    return relax_sign(v) * std::max(std::abs(c1), std::abs(c2));
  return 0.0;
}

/// n-ary generalization of predict_relaxation.
inline double predict_relaxation_n(const std::vector<double>& cs, double v) {
  if (cs.empty()) throw ContractError("predict_relaxation_n: empty list");
  const bool all_equal = std::all_of(cs.begin(), cs.end(), [&](double c) { return c == cs[0]; });
  if (all_equal) return cs[0];

  double min_abs = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  for (double c : cs) {
    min_abs = std::min(min_abs, std::abs(c));
    max_abs = std::max(max_abs, std::abs(c));
  }
  const bool equal_magnitudes = std::all_of(cs.begin(), cs.end(), [&](double c) {
    return std::abs(c) == std::abs(cs[0]);
  });
  bool sign_flip = false;
  for (std::size_t i = 0; i < cs.size() && !sign_flip; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (cs[i] == -cs[j] && cs[i] != 0.0) {
        sign_flip = true;
        break;
      }
  if (min_abs < std::abs(v) || (equal_magnitudes && sign_flip))
    return relax_sign(v) * max_abs;
  return 0.0;
}

/// Mean output over the final `window` steps of a session.
inline double measure_relaxation(const SessionTrace& session, long window = 1000) {
  if (window < 1) throw ContractError("measure_relaxation: window must be >= 1");
  if (session.size() < window) throw ContractError("measure_relaxation: session shorter than window");
  return session.y.tail(window).mean();
}

/// Mean over the final `window` entries of a plain output series.
inline double measure_relaxation(const Eigen::VectorXd& y, long window = 1000) {
  if (window < 1) throw ContractError("measure_relaxation: window must be >= 1");
  if (y.size() < window) throw ContractError("measure_relaxation: series shorter than window");
  return y.tail(window).mean();
}

}  // namespace cwm
