#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwm/controller.hpp"
#include "cwm/csv.hpp"
#include "cwm/esn.hpp"
#include "cwm/parallel.hpp"
#include "cwm/pca.hpp"
#include "cwm/svg.hpp"
#include "cwm/task.hpp"
#include "cwm/training.hpp"

namespace cwm {

struct ExperimentConfig {
  std::string id = "approximation";
  std::vector<std::uint64_t> seeds = {1};
  int n_neurons = 500;
  long horizon = 50000;            // stability horizon
  double noise_std = 1e-4;         // noise level of the noisy stability arms
  std::string output_dir = "out";
  bool full_scale = false;         // 1000 neurons, 200k-step stability horizon

  long train_steps = 25000;
  double trigger_prob = 0.01;
  double ridge = 1e-4;
  long washout = 100;

  int n_levels = 11;
  double aperture = 10.0;
  long collect_len = 100;

  long relax_steps = 5000;         // run length after a combined conceptor is applied
  long relax_window = 1000;        // trailing mean window
  double relax_v_amplitude = 1.0;  // disturbance amplitude for interpolation/aperture runs
  double or_relax_v_amplitude = 0.5;  // disturbance amplitude for the disjunction grid
  double interp_aperture = 30.0;   // aperture of the interpolated C_0.1 / C_1.0 pair
  double interp_latch = 0.5;       // value latched before an interpolated conceptor applies
  double variant_trigger_prob = 0.05;  // trigger density for C2D/D2D trainings

  unsigned n_threads = 0;

  int effective_neurons() const { return full_scale ? 1000 : n_neurons; }
  long effective_horizon() const { return full_scale ? 200000 : horizon; }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"id", c.id}, {"seeds", c.seeds}, {"n_neurons", c.n_neurons}, {"horizon", c.horizon},
       {"noise_std", c.noise_std}, {"output_dir", c.output_dir}, {"full_scale", c.full_scale},
       {"train_steps", c.train_steps}, {"trigger_prob", c.trigger_prob}, {"ridge", c.ridge},
       {"washout", c.washout}, {"n_levels", c.n_levels}, {"aperture", c.aperture},
       {"collect_len", c.collect_len}, {"relax_steps", c.relax_steps},
       {"relax_window", c.relax_window}, {"relax_v_amplitude", c.relax_v_amplitude},
       {"or_relax_v_amplitude", c.or_relax_v_amplitude}, {"interp_aperture", c.interp_aperture},
       {"interp_latch", c.interp_latch},
       {"variant_trigger_prob", c.variant_trigger_prob}, {"n_threads", c.n_threads}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.id = j.value("id", c.id);
  c.seeds = j.value("seeds", c.seeds);
  c.n_neurons = j.value("n_neurons", c.n_neurons);
  c.horizon = j.value("horizon", c.horizon);
  c.noise_std = j.value("noise_std", c.noise_std);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.full_scale = j.value("full_scale", c.full_scale);
  c.train_steps = j.value("train_steps", c.train_steps);
  c.trigger_prob = j.value("trigger_prob", c.trigger_prob);
  c.ridge = j.value("ridge", c.ridge);
  c.washout = j.value("washout", c.washout);
  c.n_levels = j.value("n_levels", c.n_levels);
  c.aperture = j.value("aperture", c.aperture);
  c.collect_len = j.value("collect_len", c.collect_len);
  c.relax_steps = j.value("relax_steps", c.relax_steps);
  c.relax_window = j.value("relax_window", c.relax_window);
  c.relax_v_amplitude = j.value("relax_v_amplitude", c.relax_v_amplitude);
  c.or_relax_v_amplitude = j.value("or_relax_v_amplitude", c.or_relax_v_amplitude);
  c.interp_aperture = j.value("interp_aperture", c.interp_aperture);
  c.interp_latch = j.value("interp_latch", c.interp_latch);
  c.variant_trigger_prob = j.value("variant_trigger_prob", c.variant_trigger_prob);
  c.n_threads = j.value("n_threads", c.n_threads);
}

/// FNV-1a over the canonical JSON dump, with execution-environment fields
/// (output directory, worker count) removed so the hash identifies the
/// science parameters only. Stamped into every CSV row.
inline std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j(c);
  j.erase("output_dir");
  j.erase("n_threads");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace exp_detail {

/// Seed layout: one base seed per trial fans out to independent streams for
/// the reservoir, the training trace, the bank collection, and test traces.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t which) {
  return seed * 1000003ull + which;
}

inline EsnModel trained_model(const ExperimentConfig& cfg, std::uint64_t seed) {
  EsnParams p;
  p.n_neurons = cfg.effective_neurons();
  p.seed = substream(seed, 1);
  EsnModel m = init_reservoir(p);
  TaskSpec ts;
  ts.n_steps = cfg.train_steps;
  ts.trigger_prob = cfg.trigger_prob;
  ts.seed = substream(seed, 2);
  TrainConfig tc;
  tc.ridge = cfg.ridge;
  tc.washout = cfg.washout;
  train_offline(m, generate_trace(ts), tc);
  return m;
}

inline std::vector<double> grid_values(int n_levels) {
  std::vector<double> v(n_levels);
  for (int k = 0; k < n_levels; ++k) v[k] = grid_value(k, n_levels);
  return v;
}

inline ConceptorBank default_bank(const ExperimentConfig& cfg, EsnModel& m, std::uint64_t seed) {
  return build_bank(m, grid_values(cfg.n_levels), cfg.aperture, cfg.collect_len,
                    substream(seed, 3));
}

inline std::filesystem::path run_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::filesystem::path d = std::filesystem::path(cfg.output_dir) / cfg.id / std::to_string(seed);
  std::filesystem::create_directories(d);
  return d;
}

inline void echo_config(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::ofstream f(dir / "config.json");
  f << nlohmann::json(cfg).dump(2) << "\n";
}

/**
 * Relaxation run: latch v with a trigger at step 0 under the identity
 * conceptor, keep identity for settle_steps more steps, then apply the given
 * conceptor for relax_steps while the value stream keeps disturbing the
 * network with amplitude v_amplitude.  Returns the output series of the
 * conceptor-applied phase.  The model is advanced (callers pass a copy).
 */
inline Vector relax_run(EsnModel& m, const Matrix& conceptor, double v, long settle_steps,
                        long relax_steps, double v_amplitude, std::uint64_t trace_seed) {
  Rng rng(trace_seed);
  Vector u(2);
  u(0) = v;
  u(1) = 1.0;
  step(m, u);
  u(1) = 0.0;
  for (long i = 0; i < settle_steps; ++i) {
    u(0) = rng.uniform(-v_amplitude, v_amplitude);
    step(m, u);
  }
  Vector y(relax_steps);
  for (long i = 0; i < relax_steps; ++i) {
    u(0) = rng.uniform(-v_amplitude, v_amplitude);
    step(m, u, &conceptor);
    y(i) = m.y(0);
  }
  return y;
}

/**
 * Batched variant of relax_run for runs that share one conceptor: column j
 * latches vs[j] and gets its own disturbance stream (trace_seed + j).  The
 * per-step matrix products run once for the whole batch, which matters at
 * n = 1000 where single runs are memory bound.  Noise-free models only.
 * Returns the trailing-window mean per column.
 */
inline Vector relax_run_batch_means(const EsnModel& model, const Matrix& conceptor,
                                    const std::vector<double>& vs, long relax_steps, long window,
                                    double v_amplitude, std::uint64_t trace_seed) {
  if (model.params.noise_std != 0.0)
    throw ContractError("relax_run_batch_means: batched runs are defined for noise-free models");
  if (window > relax_steps) throw ContractError("relax_run_batch_means: window > relax_steps");
  const int b = static_cast<int>(vs.size());
  const int n = model.n();
  std::vector<Rng> streams;
  for (int j = 0; j < b; ++j) streams.emplace_back(trace_seed + static_cast<std::uint64_t>(j));

  Matrix x = model.x.replicate(1, b);
  Eigen::RowVectorXd y = Eigen::RowVectorXd::Constant(b, model.y(0));
  Matrix u(2, b);
  Vector acc = Vector::Zero(b);

  for (long i = 0; i < relax_steps + 1; ++i) {
    for (int j = 0; j < b; ++j)
      u(0, j) = (i == 0) ? vs[j] : streams[j].uniform(-v_amplitude, v_amplitude);
    u.row(1).setConstant(i == 0 ? 1.0 : 0.0);
    Matrix pre = (model.W_in * u + model.W * x + model.W_fb * y).array().tanh();
    if (i == 0)
      x = std::move(pre);  // latch under identity
    else
      x.noalias() = conceptor * pre;
    y = model.W_out.row(0) * x;
    if (i > relax_steps - window) acc += y.transpose();
  }
  return acc / static_cast<double>(window);
}

}  // namespace exp_detail

// ---------------------------------------------------------------------------
// computational cores shared by the experiment drivers and the acceptance
// suite
// ---------------------------------------------------------------------------

struct DisjunctionCell {
  double c1 = 0, c2 = 0, v = 0;
  double or_measured = 0, predicted = 0;
  bool agree = false;
  double and_measured = 0;
  bool and_near_zero = false;
};

struct DisjunctionResult {
  std::vector<DisjunctionCell> cells;  // ordered grid incl. (c2, c1) mirrors
  double or_fraction = 0;
  double and_fraction = 0;
};

/**
 * Relaxation grid for C_c1 OR C_c2 (and the AND variant) over all bank value
 * pairs and trigger values excluding |v| = 1.  OR is symmetric, so each
 * unordered pair is run once and tabulated for both orderings.
 */
inline DisjunctionResult disjunction_grid(const ExperimentConfig& cfg, const EsnModel& model,
                                          const ConceptorBank& bank, std::uint64_t seed) {
  const std::vector<double> values = exp_detail::grid_values(cfg.n_levels);
  std::vector<double> vgrid;
  for (double v : values)
    if (std::abs(std::abs(v) - 1.0) > 1e-12) vgrid.push_back(v);

  struct PairJob {
    int i = 0, j = 0;
    Vector or_means, and_means;
  };
  std::vector<PairJob> jobs;
  for (int i = 0; i < cfg.n_levels; ++i)
    for (int j = i; j < cfg.n_levels; ++j) jobs.push_back({i, j});

  parallel_for(
      jobs.size(),
      [&](std::size_t idx) {
        PairJob& job = jobs[idx];
        const Conceptor cor = or_op(bank.entries[job.i].second, bank.entries[job.j].second);
        const Conceptor cand = and_op(bank.entries[job.i].second, bank.entries[job.j].second);
        const std::uint64_t cell_seed =
            exp_detail::substream(seed, 50 + static_cast<std::uint64_t>(job.i) * 37 + job.j);
        job.or_means = exp_detail::relax_run_batch_means(
            model, cor.matrix, vgrid, cfg.relax_steps, cfg.relax_window,
            cfg.or_relax_v_amplitude, cell_seed);
        job.and_means = exp_detail::relax_run_batch_means(
            model, cand.matrix, vgrid, cfg.relax_steps, cfg.relax_window,
            cfg.or_relax_v_amplitude, cell_seed + 1000);
      },
      cfg.n_threads);

  DisjunctionResult res;
  long agree = 0, near_zero = 0, total = 0;
  for (const PairJob& job : jobs)
    for (std::size_t k = 0; k < vgrid.size(); ++k) {
      DisjunctionCell cell;
      cell.c1 = values[job.i];
      cell.c2 = values[job.j];
      cell.v = vgrid[k];
      cell.or_measured = job.or_means(static_cast<Eigen::Index>(k));
      cell.predicted = predict_relaxation(cell.c1, cell.c2, cell.v);
      cell.agree = std::abs(cell.or_measured - cell.predicted) < 0.1;
      cell.and_measured = job.and_means(static_cast<Eigen::Index>(k));
      cell.and_near_zero = std::abs(cell.and_measured) < 0.1;
      for (int rep = 0; rep < (job.i == job.j ? 1 : 2); ++rep) {
        DisjunctionCell out = cell;
        if (rep) std::swap(out.c1, out.c2);
        res.cells.push_back(out);
        agree += out.agree;
        near_zero += out.and_near_zero;
        ++total;
      }
    }
  res.or_fraction = static_cast<double>(agree) / static_cast<double>(total);
  res.and_fraction = static_cast<double>(near_zero) / static_cast<double>(total);
  return res;
}

struct InterpolationPoint {
  double lambda = 0;
  double value = 0;
  double osc_amplitude = 0;
  bool in_cone = false;
  Conceptor conceptor;
};

/**
 * Relaxation value of lambda*C_hi + (1-lambda)*C_lo over the 31-point lambda
 * grid on [-1, 2], after latching cfg.interp_latch.
 */
inline std::vector<InterpolationPoint> interpolation_curve(const ExperimentConfig& cfg,
                                                           const EsnModel& model,
                                                           const Conceptor& c_lo,
                                                           const Conceptor& c_hi,
                                                           std::uint64_t seed) {
  std::vector<InterpolationPoint> points(31);
  parallel_for(
      points.size(),
      [&](std::size_t i) {
        InterpolationPoint& pt = points[i];
        pt.lambda = -1.0 + 3.0 * static_cast<double>(i) / 30.0;
        LincombResult lc = lincomb(c_hi, c_lo, pt.lambda);
        pt.in_cone = lc.spectrum_in_unit;
        EsnModel probe = model;
        Vector y = exp_detail::relax_run(probe, lc.conceptor.matrix, cfg.interp_latch, 0,
                                         cfg.relax_steps, cfg.relax_v_amplitude,
                                         exp_detail::substream(seed, 41 + i));
        pt.value = measure_relaxation(y, cfg.relax_window);
        const auto tail = y.tail(cfg.relax_window);
        pt.osc_amplitude = tail.maxCoeff() - tail.minCoeff();
        pt.conceptor = std::move(lc.conceptor);
      },
      cfg.n_threads);
  return points;
}

// ---------------------------------------------------------------------------
// approximation: storing the current memory as a conceptor, raw or snapped
// ---------------------------------------------------------------------------

inline void exp_approximation(const ExperimentConfig& cfg) {
  const std::string hash = config_hash(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const auto dir = exp_detail::run_dir(cfg, seed);
    exp_detail::echo_config(cfg, dir);
    EsnModel model = exp_detail::trained_model(cfg, seed);
    ConceptorBank bank = exp_detail::default_bank(cfg, model, seed);

    // Panel A: bank conceptors applied from a random reservoir state.
    {
      CsvWriter csv((dir / "panel_a.csv").string(),
                    {"seed", "config", "m", "step", "y"});
      Rng rng(exp_detail::substream(seed, 10));
      const std::size_t picks[4] = {1, bank.size() / 3, (2 * bank.size()) / 3, bank.size() - 1};
      for (std::size_t pick : picks) {
        const auto& [m, cm] = bank.entries[pick];
        EsnModel probe = model;
        for (Eigen::Index i = 0; i < probe.x.size(); ++i) probe.x(i) = rng.uniform(-1.0, 1.0);
        probe.y = probe.W_out * probe.x;
        Rng vr(exp_detail::substream(seed, 11));
        Vector u(2);
        for (long i = 0; i < 600; ++i) {
          u(0) = vr.uniform(-1.0, 1.0);
          u(1) = 0.0;
          step(probe, u, &cm.matrix);
          csv.row().col(seed).col(hash).col(m).col(i).col(probe.y(0));
        }
      }
    }

    // Panels B and C: store-raw and snap sessions over the same trace.
    TaskSpec ts;
    ts.n_steps = 2600;
    ts.trigger_prob = 0.0;  // triggers placed by hand below
    ts.seed = exp_detail::substream(seed, 12);
    TaskTrace trace = generate_trace(ts);
    Rng trig_rng(exp_detail::substream(seed, 13));
    for (long t : {0L, 900L, 1800L}) {
      trace.T(t) = 1.0;
      trace.V(t) = trig_rng.uniform(-1.0, 1.0);
    }
    double cur = 0.0;
    for (long i = 0; i < trace.size(); ++i) {
      if (trace.T(i) == 1.0) cur = trace.V(i);
      trace.M(i) = cur;
    }

    for (ControllerMode mode : {ControllerMode::StoreRaw, ControllerMode::SnapToBank}) {
      EsnModel session_model = model;
      ControllerPolicy policy;
      policy.mode = mode;
      policy.collect_len = cfg.collect_len;
      policy.aperture = cfg.aperture;
      SessionTrace st = run_gated_session(
          session_model, mode == ControllerMode::SnapToBank ? &bank : nullptr, trace, policy);
      const std::string name = mode == ControllerMode::StoreRaw ? "panel_b.csv" : "panel_c.csv";
      CsvWriter csv((dir / name).string(),
                    {"seed", "config", "step", "V", "T", "y", "phase", "conceptor_tag",
                     "held_value", "discretized_value"});
      for (long i = 0; i < st.size(); ++i)
        csv.row()
            .col(seed)
            .col(hash)
            .col(i)
            .col(st.V(i))
            .col(st.T(i))
            .col(st.y(i))
            .col(to_string(st.phase[i]))
            .col(format_double(st.conceptor_tag[i]))
            .col(trace.M(i))
            .col(discretize(trace.M(i), cfg.n_levels));
      svg::Series s;
      for (long i = 0; i < st.size(); ++i) {
        s.x.push_back(static_cast<double>(i));
        s.y.push_back(st.y(i));
      }
      svg::write_line_chart((dir / (name.substr(0, 7) + ".svg")).string(), {s},
                            "readout, " + to_string(mode) + " session");
    }
  }
}

// ---------------------------------------------------------------------------
// stability: 2x2 {conceptor, none} x {noise, none} over a long horizon
// ---------------------------------------------------------------------------

inline void exp_stability(const ExperimentConfig& cfg) {
  const std::string hash = config_hash(cfg);
  struct Arm {
    std::uint64_t seed;
    bool with_conceptor;
    double noise;
    double target = 0.0;
    long fail_step = -1;
    double max_dev = 0.0;
    std::vector<double> decimated;
  };
  std::vector<Arm> arms;
  for (std::uint64_t seed : cfg.seeds)
    for (bool con : {false, true})
      for (double noise : {0.0, cfg.noise_std}) arms.push_back({seed, con, noise});

  const long horizon = cfg.effective_horizon();
  parallel_for(
      arms.size(),
      [&](std::size_t idx) {
        Arm& arm = arms[idx];
        EsnModel model = exp_detail::trained_model(cfg, arm.seed);
        ConceptorBank bank = exp_detail::default_bank(cfg, model, arm.seed);
        // Hold value: an interior grid point that varies across seeds.
        const int interior = std::max(1, cfg.n_levels - 2);
        const double m = grid_value(1 + static_cast<int>(arm.seed % interior), cfg.n_levels);
        arm.target = m;
        model.params.noise_std = arm.noise;

        // Latch + collect under identity, like the gated session does.
        const TaskTrace hold = single_hold_trace(m, cfg.collect_len + 1,
                                                 exp_detail::substream(arm.seed, 20));
        Matrix collected(model.n(), cfg.collect_len);
        Vector u(2);
        for (long i = 0; i < hold.size(); ++i) {
          u(0) = hold.V(i);
          u(1) = hold.T(i);
          step(model, u);
          if (i >= 1) collected.col(i - 1) = model.x;
        }
        const Matrix* applied = nullptr;
        Conceptor snapped;
        if (arm.with_conceptor) {
          Conceptor cur = conceptor_from_states(collected, cfg.aperture);
          snapped = nearest_in_bank(bank, cur).second;
          applied = &snapped.matrix;
        }

        Rng vr(exp_detail::substream(arm.seed, 21));
        const long decim = std::max(1L, horizon / 2000);
        for (long i = 0; i < horizon; ++i) {
          u(0) = vr.uniform(-1.0, 1.0);
          u(1) = 0.0;
          step(model, u, applied);
          const double dev = std::abs(model.y(0) - m);
          arm.max_dev = std::max(arm.max_dev, dev);
          if (arm.fail_step < 0 && dev > 0.1) arm.fail_step = i;
          if (i % decim == 0) arm.decimated.push_back(model.y(0));
        }
      },
      cfg.n_threads);

  for (std::uint64_t seed : cfg.seeds) {
    const auto dir = exp_detail::run_dir(cfg, seed);
    exp_detail::echo_config(cfg, dir);
    CsvWriter summary((dir / "summary.csv").string(),
                      {"seed", "config", "conceptor", "noise_std", "target", "horizon",
                       "fail_step", "max_abs_dev"});
    CsvWriter traces((dir / "trace.csv").string(),
                     {"seed", "config", "conceptor", "noise_std", "step", "y"});
    std::vector<svg::Series> plot;
    const char* colors[4] = {"#000000", "#cc0000", "#0066cc", "#00aa55"};
    int ci = 0;
    for (const Arm& arm : arms) {
      if (arm.seed != seed) continue;
      summary.row()
          .col(seed)
          .col(hash)
          .col(static_cast<int>(arm.with_conceptor))
          .col(arm.noise)
          .col(arm.target)
          .col(horizon)
          .col(arm.fail_step)
          .col(arm.max_dev);
      const long decim = std::max(1L, horizon / 2000);
      svg::Series s;
      s.color = colors[ci++ % 4];
      for (std::size_t i = 0; i < arm.decimated.size(); ++i) {
        traces.row()
            .col(seed)
            .col(hash)
            .col(static_cast<int>(arm.with_conceptor))
            .col(arm.noise)
            .col(static_cast<long>(i) * decim)
            .col(arm.decimated[i]);
        s.x.push_back(static_cast<double>(i) * static_cast<double>(decim));
        s.y.push_back(arm.decimated[i]);
      }
      plot.push_back(std::move(s));
    }
    svg::write_line_chart((dir / "stability.svg").string(), plot,
                          "hold stability (black none/quiet, red none/noise, blue conc/quiet, green conc/noise)");
  }
}

// ---------------------------------------------------------------------------
// discretization: D2D / C2D offline / C2D online / conceptor snap
// ---------------------------------------------------------------------------

inline void exp_discretization(const ExperimentConfig& cfg) {
  const std::string hash = config_hash(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const auto dir = exp_detail::run_dir(cfg, seed);
    exp_detail::echo_config(cfg, dir);

    // Off-grid probe triggers shared by all arms; values at least 0.03 from
    // the grid so "converged to the discrete target" is unambiguous.
    Rng vr(exp_detail::substream(seed, 30));
    std::vector<double> probes;
    while (probes.size() < 10) {
      const double v = vr.uniform(-0.95, 0.95);
      if (std::abs(v - discretize(v, cfg.n_levels)) >= 0.03) probes.push_back(v);
    }
    const long hold_span = 1500;

    struct ArmResult {
      std::string name;
      std::vector<double> conv_time;       // steps to reach and stay within 0.02, -1 if never
      std::vector<double> track_err_mean;  // mean |y - v| during the hold (continuous target)
      std::vector<std::vector<double>> y;  // trajectories per probe
    };
    std::vector<ArmResult> results;

    auto eval_model = [&](EsnModel model, const ConceptorBank* bank, const std::string& name,
                          bool snap) {
      ArmResult res;
      res.name = name;
      for (double v : probes) {
        EsnModel probe_model = model;
        TaskTrace tr = single_hold_trace(v, hold_span, exp_detail::substream(seed, 31));
        std::vector<double> ys;
        if (snap) {
          ControllerPolicy policy;
          policy.mode = ControllerMode::SnapToBank;
          policy.collect_len = cfg.collect_len;
          policy.aperture = cfg.aperture;
          SessionTrace st = run_gated_session(probe_model, bank, tr, policy);
          ys.assign(st.y.data(), st.y.data() + st.y.size());
        } else {
          Vector u(2);
          for (long i = 0; i < tr.size(); ++i) {
            u(0) = tr.V(i);
            u(1) = tr.T(i);
            step(probe_model, u);
            ys.push_back(probe_model.y(0));
          }
        }
        const double target = discretize(v, cfg.n_levels);
        long conv = -1;
        for (long i = 0; i < static_cast<long>(ys.size()); ++i) {
          if (std::abs(ys[i] - target) < 0.02) {
            bool stays = true;
            for (long j = i; j < static_cast<long>(ys.size()); ++j)
              if (std::abs(ys[j] - target) >= 0.02) {
                stays = false;
                break;
              }
            if (stays) {
              conv = i;
              break;
            }
          }
        }
        double track = 0.0;
        for (long i = 5; i < static_cast<long>(ys.size()); ++i) track += std::abs(ys[i] - v);
        track /= static_cast<double>(ys.size() - 5);
        res.conv_time.push_back(static_cast<double>(conv));
        res.track_err_mean.push_back(track);
        res.y.push_back(std::move(ys));
      }
      results.push_back(std::move(res));
    };

    // Arm A: D2D-trained model.
    {
      EsnParams p;
      p.n_neurons = cfg.effective_neurons();
      p.seed = exp_detail::substream(seed, 1);
      EsnModel m = init_reservoir(p);
      TaskSpec ts;
      ts.n_steps = cfg.train_steps;
      ts.trigger_prob = cfg.variant_trigger_prob;
      ts.variant = TaskVariant::D2D;
      ts.n_levels = cfg.n_levels;
      ts.seed = exp_detail::substream(seed, 32);
      TrainConfig tc;
      tc.ridge = cfg.ridge;
      tc.washout = cfg.washout;
      train_offline(m, generate_trace(ts), tc);
      eval_model(std::move(m), nullptr, "d2d_offline", false);
    }
    // Arms B, C: C2D offline and online.
    for (TrainMode mode : {TrainMode::Offline, TrainMode::Online}) {
      EsnParams p;
      p.n_neurons = cfg.effective_neurons();
      p.seed = exp_detail::substream(seed, 1);
      EsnModel m = init_reservoir(p);
      TaskSpec ts;
      ts.n_steps = cfg.train_steps;
      ts.trigger_prob = cfg.variant_trigger_prob;
      ts.variant = TaskVariant::C2D;
      ts.n_levels = cfg.n_levels;
      ts.seed = exp_detail::substream(seed, 32);
      TrainConfig tc;
      tc.ridge = cfg.ridge;
      tc.washout = cfg.washout;
      const TaskTrace tr = generate_trace(ts);
      if (mode == TrainMode::Offline)
        train_offline(m, tr, tc);
      else
        train_online(m, tr, tc);
      eval_model(std::move(m), nullptr,
                 mode == TrainMode::Offline ? "c2d_offline" : "c2d_online", false);
    }
    // Arm D: conceptor snap on the original-task model.
    {
      EsnModel m = exp_detail::trained_model(cfg, seed);
      ConceptorBank bank = exp_detail::default_bank(cfg, m, seed);
      eval_model(std::move(m), &bank, "conceptor_snap", true);
    }

    CsvWriter summary((dir / "summary.csv").string(),
                      {"seed", "config", "arm", "probe_idx", "v", "target", "conv_steps",
                       "mean_track_err"});
    CsvWriter traces((dir / "trace.csv").string(),
                     {"seed", "config", "arm", "probe_idx", "step", "y"});
    for (const auto& res : results)
      for (std::size_t pi = 0; pi < probes.size(); ++pi) {
        summary.row()
            .col(seed)
            .col(hash)
            .col(res.name)
            .col(static_cast<long>(pi))
            .col(probes[pi])
            .col(discretize(probes[pi], cfg.n_levels))
            .col(res.conv_time[pi])
            .col(res.track_err_mean[pi]);
        for (std::size_t i = 0; i < res.y[pi].size(); i += 5)
          traces.row()
              .col(seed)
              .col(hash)
              .col(res.name)
              .col(static_cast<long>(pi))
              .col(static_cast<long>(i))
              .col(res.y[pi][i]);
      }
  }
}

// ---------------------------------------------------------------------------
// interpolation: lincomb of C_0.1 and C_1.0 over 31 lambdas, plus bank PCA
// ---------------------------------------------------------------------------

inline void exp_interpolation(const ExperimentConfig& cfg) {
  const std::string hash = config_hash(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const auto dir = exp_detail::run_dir(cfg, seed);
    exp_detail::echo_config(cfg, dir);
    EsnModel model = exp_detail::trained_model(cfg, seed);
    // The interpolated pair uses its own (wider) aperture: at the bank
    // default the C_0.1 endpoint does not retain its value.
    ConceptorBank pair = build_bank(model, {0.1, 1.0}, cfg.interp_aperture, cfg.collect_len,
                                    exp_detail::substream(seed, 40));
    const Conceptor& c01 = pair.entries[0].second;
    const Conceptor& c10 = pair.entries[1].second;

    const std::vector<InterpolationPoint> cells = interpolation_curve(cfg, model, c01, c10, seed);

    CsvWriter csv((dir / "interpolation.csv").string(),
                  {"seed", "config", "lambda", "relax_value", "osc_amplitude", "in_cone"});
    svg::Series s;
    for (const InterpolationPoint& cell : cells) {
      csv.row()
          .col(seed)
          .col(hash)
          .col(cell.lambda)
          .col(cell.value)
          .col(cell.osc_amplitude)
          .col(static_cast<int>(cell.in_cone));
      s.x.push_back(cell.lambda);
      s.y.push_back(cell.value);
    }
    svg::write_line_chart((dir / "interpolation.svg").string(), {s},
                          "relaxation value vs lambda");

    // PCA over a 201-value bank; interpolated conceptors projected in.
    std::vector<double> values(201);
    for (int i = 0; i < 201; ++i) values[i] = -1.0 + 2.0 * i / 200.0;
    ConceptorBank big =
        build_bank(model, values, cfg.aperture, cfg.collect_len, exp_detail::substream(seed, 42));
    std::vector<const Conceptor*> ptrs;
    for (const auto& e : big.entries) ptrs.push_back(&e.second);
    PcaResult pca = pca_conceptors(ptrs, 3);

    CsvWriter ratios((dir / "pca_ratios.csv").string(),
                     {"seed", "config", "component", "explained_variance_ratio"});
    for (int j = 0; j < 3; ++j)
      ratios.row().col(seed).col(hash).col(j + 1).col(pca.explained_variance_ratio(j));

    CsvWriter proj((dir / "pca_projections.csv").string(),
                   {"seed", "config", "kind", "tag_or_lambda", "pc1", "pc2", "pc3"});
    for (std::size_t i = 0; i < ptrs.size(); ++i)
      proj.row()
          .col(seed)
          .col(hash)
          .col(std::string("bank"))
          .col(values[i])
          .col(pca.projections(i, 0))
          .col(pca.projections(i, 1))
          .col(pca.projections(i, 2));
    std::vector<svg::Series> scat;
    svg::Series bank_s, interp_s;
    bank_s.color = "#999999";
    interp_s.color = "#cc0000";
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
      bank_s.x.push_back(pca.projections(i, 0));
      bank_s.y.push_back(pca.projections(i, 1));
    }
    for (const InterpolationPoint& cell : cells) {
      const Vector p = pca_project(pca, cell.conceptor);
      proj.row()
          .col(seed)
          .col(hash)
          .col(std::string("interpolated"))
          .col(cell.lambda)
          .col(p(0))
          .col(p(1))
          .col(p(2));
      interp_s.x.push_back(p(0));
      interp_s.y.push_back(p(1));
    }
    scat.push_back(bank_s);
    scat.push_back(interp_s);
    svg::write_line_chart((dir / "pca_pc1_pc2.svg").string(), scat,
                          "bank (gray) and interpolated (red) conceptors in PC1-PC2");
  }
}

// ---------------------------------------------------------------------------
// disjunction: relaxation grid for C_c1 OR C_c2 (and the AND variant)
// ---------------------------------------------------------------------------

inline void exp_disjunction(const ExperimentConfig& cfg) {
  const std::string hash = config_hash(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const auto dir = exp_detail::run_dir(cfg, seed);
    exp_detail::echo_config(cfg, dir);
    EsnModel model = exp_detail::trained_model(cfg, seed);
    ConceptorBank bank = exp_detail::default_bank(cfg, model, seed);
    const DisjunctionResult res = disjunction_grid(cfg, model, bank, seed);

    CsvWriter csv((dir / "disjunction.csv").string(),
                  {"seed", "config", "c1", "c2", "v", "measured", "predicted", "abs_error",
                   "agree"});
    CsvWriter candcsv((dir / "conjunction.csv").string(),
                      {"seed", "config", "c1", "c2", "v", "measured", "near_zero"});
    const auto value_index = [&](double v) {
      for (int k = 0; k < cfg.n_levels; ++k)
        if (grid_value(k, cfg.n_levels) == v) return k;
      return -1;
    };
    std::vector<std::vector<double>> meas_grid(
        cfg.n_levels, std::vector<double>(cfg.n_levels, 0.0));
    for (const DisjunctionCell& cell : res.cells) {
      csv.row()
          .col(seed)
          .col(hash)
          .col(cell.c1)
          .col(cell.c2)
          .col(cell.v)
          .col(cell.or_measured)
          .col(cell.predicted)
          .col(std::abs(cell.or_measured - cell.predicted))
          .col(static_cast<int>(cell.agree));
      candcsv.row()
          .col(seed)
          .col(hash)
          .col(cell.c1)
          .col(cell.c2)
          .col(cell.v)
          .col(cell.and_measured)
          .col(static_cast<int>(cell.and_near_zero));
      if (std::abs(cell.v - 0.2) < 1e-12)
        meas_grid[value_index(cell.c1)][value_index(cell.c2)] = cell.or_measured;
    }

    CsvWriter stats((dir / "agreement.csv").string(),
                    {"seed", "config", "or_fraction", "and_fraction", "cells"});
    stats.row()
        .col(seed)
        .col(hash)
        .col(res.or_fraction)
        .col(res.and_fraction)
        .col(static_cast<long>(res.cells.size()));
    svg::write_heatmap((dir / "or_heatmap_v0.2.svg").string(), meas_grid, 1.0,
                       "measured relaxation, v = 0.2");
  }
}

// ---------------------------------------------------------------------------
// aperture: hold error of phi(C_m, gamma) over a log grid of gamma
// ---------------------------------------------------------------------------

inline void exp_aperture(const ExperimentConfig& cfg) {
  const std::string hash = config_hash(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const auto dir = exp_detail::run_dir(cfg, seed);
    exp_detail::echo_config(cfg, dir);
    EsnModel model = exp_detail::trained_model(cfg, seed);
    ConceptorBank bank = exp_detail::default_bank(cfg, model, seed);

    const std::vector<double> gammas = {0.01, 0.0316, 0.1, 0.316, 1.0, 3.16, 10.0, 31.6};
    CsvWriter csv((dir / "aperture.csv").string(),
                  {"seed", "config", "m", "gamma", "hold_error"});
    for (double m : {-0.6, 0.2, 0.8}) {
      const Conceptor* cm = nullptr;
      for (const auto& e : bank.entries)
        if (std::abs(e.first - m) < 1e-12) cm = &e.second;
      if (!cm) continue;
      for (double g : gammas) {
        const Conceptor adapted = aperture_adapt(*cm, g);
        EsnModel probe = model;
        Vector y = exp_detail::relax_run(probe, adapted.matrix, m, 0, 2000, 1.0,
                                         exp_detail::substream(seed, 60));
        const double hold_err = std::abs(measure_relaxation(y, 1000) - m);
        csv.row().col(seed).col(hash).col(m).col(g).col(hold_err);
      }
    }
  }
}

/// Dispatch by experiment id; throws ContractError for unknown ids.
inline void run_experiment(const ExperimentConfig& cfg) {
  if (cfg.id == "approximation") return exp_approximation(cfg);
  if (cfg.id == "stability") return exp_stability(cfg);
  if (cfg.id == "discretization") return exp_discretization(cfg);
  if (cfg.id == "interpolation") return exp_interpolation(cfg);
  if (cfg.id == "disjunction") return exp_disjunction(cfg);
  if (cfg.id == "aperture") return exp_aperture(cfg);
  throw ContractError("unknown experiment id: " + cfg.id);
}

}  // namespace cwm
