#pragma once

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwm/experiments.hpp"
#include "cwm/io.hpp"

namespace cwm {

namespace cli_detail {

/// Loads the JSON config named by --config (if any) before CLI11 runs, so
/// command-line flags override config-file values.
inline nlohmann::json preload_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
    if (!path.empty()) {
      std::ifstream f(path);
      if (!f) throw IoError(IoErrorKind::FileAccess, "cannot open config: " + path);
      try {
        nlohmann::json j;
        f >> j;
        return j;
      } catch (const nlohmann::json::exception& e) {
        throw IoError(IoErrorKind::BadMetadata, std::string("config parse error: ") + e.what());
      }
    }
  }
  return nlohmann::json::object();
}

inline TaskVariant parse_variant(const std::string& s) {
  if (s == "original") return TaskVariant::Original;
  if (s == "c2d") return TaskVariant::C2D;
  if (s == "d2d") return TaskVariant::D2D;
  throw CLI::ValidationError("--variant", "expected original|c2d|d2d");
}

inline ControllerMode parse_policy(const std::string& s) {
  if (s == "none") return ControllerMode::None;
  if (s == "raw") return ControllerMode::StoreRaw;
  if (s == "snap") return ControllerMode::SnapToBank;
  throw CLI::ValidationError("--policy", "expected none|raw|snap");
}

}  // namespace cli_detail

/**
 * Command-line dispatch.  Subcommands: train, bank, run, experiment,
 * inspect.  Exit codes: 0 success, 1 usage error, 2 data/format error,
 * 3 numerical failure.  A JSON config given via --config mirrors the flags;
 * explicit flags win.
 */
inline int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"cwm: gated working-memory reservoir with conceptor long-term storage"};
  app.require_subcommand(1);

  nlohmann::json config;

  // --- train ---
  auto* train = app.add_subcommand("train", "train a gating-task readout");
  std::string train_variant = "original", train_mode = "offline", train_out = "model.cwm";
  long train_neurons = 1000, train_steps = 25000, train_washout = 100;
  double train_ridge = 1e-4, train_trigger_prob = 0.01, train_noise = 0.0;
  std::uint64_t train_seed = 0;
  std::string train_config_path;
  train->add_option("--variant", train_variant, "task variant: original|c2d|d2d");
  train->add_option("--mode", train_mode, "offline|online");
  train->add_option("--neurons", train_neurons, "reservoir size");
  train->add_option("--steps", train_steps, "training steps");
  train->add_option("--ridge", train_ridge, "ridge regularization");
  train->add_option("--seed", train_seed, "seed");
  train->add_option("--out", train_out, "output model file");
  train->add_option("--trigger-prob", train_trigger_prob, "per-step trigger probability");
  train->add_option("--washout", train_washout, "washout steps");
  train->add_option("--noise", train_noise, "reservoir noise std");
  train->add_option("--config", train_config_path, "JSON config file (flags override)");

  // --- bank ---
  auto* bank_cmd = app.add_subcommand("bank", "precompute a conceptor bank from a trained model");
  std::string bank_model, bank_out = "bank.cwm", bank_config_path;
  int bank_levels = 11;
  double bank_aperture = 10.0;
  long bank_collect = 100;
  std::uint64_t bank_trace_seed = 12345;
  bank_cmd->add_option("--model", bank_model, "trained model file")->required();
  bank_cmd->add_option("--levels", bank_levels, "number of grid values");
  bank_cmd->add_option("--aperture", bank_aperture, "conceptor aperture a");
  bank_cmd->add_option("--collect", bank_collect, "states collected per value");
  bank_cmd->add_option("--out", bank_out, "output bank file");
  bank_cmd->add_option("--trace-seed", bank_trace_seed, "seed of the collection value streams");
  bank_cmd->add_option("--config", bank_config_path, "JSON config file (flags override)");

  // --- run ---
  auto* run_cmd = app.add_subcommand("run", "run a gated session and export it as CSV");
  std::string run_model, run_bank, run_policy = "snap", run_csv = "session.csv", run_config_path;
  long run_steps = 2000;
  double run_noise = 0.0, run_trigger_prob = 0.01;
  std::uint64_t run_seed = 0;
  run_cmd->add_option("--model", run_model, "trained model file")->required();
  run_cmd->add_option("--bank", run_bank, "bank file (required for snap policy)");
  run_cmd->add_option("--policy", run_policy, "none|raw|snap");
  run_cmd->add_option("--steps", run_steps, "session length");
  run_cmd->add_option("--noise", run_noise, "reservoir noise std");
  run_cmd->add_option("--csv", run_csv, "output CSV path");
  run_cmd->add_option("--seed", run_seed, "task seed");
  run_cmd->add_option("--trigger-prob", run_trigger_prob, "per-step trigger probability");
  run_cmd->add_option("--config", run_config_path, "JSON config file (flags override)");

  // --- experiment ---
  auto* exp_cmd = app.add_subcommand("experiment", "run a scripted experiment");
  std::string exp_id, exp_out, exp_config_path, exp_seeds;
  int exp_neurons = -1;
  bool exp_full_scale = false;
  unsigned exp_threads = 0;
  exp_cmd->add_option("id", exp_id,
                      "approximation|stability|discretization|interpolation|disjunction|aperture")
      ->required();
  exp_cmd->add_option("--config", exp_config_path, "JSON config file (flags override)");
  exp_cmd->add_option("--out", exp_out, "output directory");
  exp_cmd->add_option("--seeds", exp_seeds, "comma-separated seed list");
  exp_cmd->add_option("--neurons", exp_neurons, "reservoir size");
  exp_cmd->add_flag("--full-scale", exp_full_scale, "1000 neurons, 200k-step stability horizon");
  exp_cmd->add_option("--threads", exp_threads, "worker threads (0 = hardware)");

  // --- inspect ---
  auto* inspect = app.add_subcommand("inspect", "print container metadata as JSON");
  std::string inspect_file;
  inspect->add_option("--file", inspect_file, "container file")->required();

  std::vector<std::string> argv_vec(args);
  try {
    config = cli_detail::preload_config(args);

    // Config-file values become new defaults before the actual parse.
    if (config.contains("train")) {
      const auto& c = config["train"];
      train_variant = c.value("variant", train_variant);
      train_mode = c.value("mode", train_mode);
      train_neurons = c.value("neurons", train_neurons);
      train_steps = c.value("steps", train_steps);
      train_ridge = c.value("ridge", train_ridge);
      train_seed = c.value("seed", train_seed);
      train_out = c.value("out", train_out);
      train_trigger_prob = c.value("trigger_prob", train_trigger_prob);
      train_washout = c.value("washout", train_washout);
      train_noise = c.value("noise", train_noise);
    }
    if (config.contains("bank")) {
      const auto& c = config["bank"];
      bank_levels = c.value("levels", bank_levels);
      bank_aperture = c.value("aperture", bank_aperture);
      bank_collect = c.value("collect", bank_collect);
      bank_out = c.value("out", bank_out);
      bank_trace_seed = c.value("trace_seed", bank_trace_seed);
    }
    if (config.contains("run")) {
      const auto& c = config["run"];
      run_policy = c.value("policy", run_policy);
      run_steps = c.value("steps", run_steps);
      run_noise = c.value("noise", run_noise);
      run_csv = c.value("csv", run_csv);
      run_seed = c.value("seed", run_seed);
      run_trigger_prob = c.value("trigger_prob", run_trigger_prob);
    }

    std::vector<const char*> argv;
    argv.push_back("cwm");
    for (const auto& a : argv_vec) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*train) {
      EsnParams p;
      p.n_neurons = static_cast<int>(train_neurons);
      p.seed = train_seed;
      p.noise_std = train_noise;
      EsnModel model = init_reservoir(p);
      TaskSpec ts;
      ts.n_steps = train_steps;
      ts.trigger_prob = train_trigger_prob;
      ts.variant = cli_detail::parse_variant(train_variant);
      ts.seed = train_seed + 0x9e3779b97f4a7c15ull;  // task stream distinct from weights
      TrainConfig tc;
      tc.ridge = train_ridge;
      tc.washout = train_washout;
      tc.n_train_steps = train_steps;
      const TaskTrace trace = generate_trace(ts);
      if (train_mode == "offline")
        train_offline(model, trace, tc);
      else if (train_mode == "online")
        train_online(model, trace, tc);
      else
        throw ContractError("train: --mode must be offline|online");
      save_model(model, train_out);
      std::cout << "wrote " << train_out << "\n";
      return 0;
    }

    if (*bank_cmd) {
      EsnModel model = load_model(bank_model);
      std::vector<double> values(bank_levels);
      for (int k = 0; k < bank_levels; ++k) values[k] = grid_value(k, bank_levels);
      ConceptorBank bank = build_bank(model, values, bank_aperture, bank_collect, bank_trace_seed);
      save_bank(bank, bank_out);
      std::cout << "wrote " << bank_out << " (" << bank.size() << " conceptors)\n";
      return 0;
    }

    if (*run_cmd) {
      EsnModel model = load_model(run_model);
      model.params.noise_std = run_noise;
      ConceptorBank bank;
      const ControllerMode mode = cli_detail::parse_policy(run_policy);
      if (mode == ControllerMode::SnapToBank) {
        if (run_bank.empty()) throw ContractError("run: snap policy needs --bank");
        bank = load_bank(run_bank);
      }
      TaskSpec ts;
      ts.n_steps = run_steps;
      ts.trigger_prob = run_trigger_prob;
      ts.seed = run_seed;
      const TaskTrace trace = generate_trace(ts);
      ControllerPolicy policy;
      policy.mode = mode;
      SessionTrace st = run_gated_session(model, bank.empty() ? nullptr : &bank, trace, policy);
      write_session_csv(st, run_csv);
      std::cout << "wrote " << run_csv << "\n";
      return 0;
    }

    if (*exp_cmd) {
      ExperimentConfig cfg;
      if (config.contains("experiment")) cfg = config["experiment"].get<ExperimentConfig>();
      cfg.id = exp_id;
      if (!exp_out.empty()) cfg.output_dir = exp_out;
      if (exp_neurons > 0) cfg.n_neurons = exp_neurons;
      if (exp_full_scale) cfg.full_scale = true;
      if (exp_threads > 0) cfg.n_threads = exp_threads;
      if (!exp_seeds.empty()) {
        cfg.seeds.clear();
        std::stringstream ss(exp_seeds);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
      }
      run_experiment(cfg);
      std::cout << "experiment " << cfg.id << " done, outputs under " << cfg.output_dir << "\n";
      return 0;
    }

    if (*inspect) {
      detail::ContainerReader r(inspect_file);
      std::cout << r.meta().dump(2) << "\n";
      return 0;
    }
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace cwm
