#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mmgn/cli.hpp"
#include "mmgn/descriptors.hpp"
#include "mmgn/error.hpp"

namespace {

using mmgn::cli::json;

// Collects flag values so unset flags leave config-file values intact.
struct Overrides {
  json values = json::object();

  void add_string(CLI::App* cmd, const std::string& flag, const std::string& key,
                  const std::string& help) {
    auto holder = std::make_shared<std::string>();
    cmd->add_option(flag, *holder, help)->each([this, key, holder](const std::string&) {
      values[key] = *holder;
    });
  }
  void add_double(CLI::App* cmd, const std::string& flag, const std::string& key,
                  const std::string& help) {
    auto holder = std::make_shared<double>();
    cmd->add_option(flag, *holder, help)->each([this, key, holder](const std::string&) {
      values[key] = *holder;
    });
  }
  void add_size(CLI::App* cmd, const std::string& flag, const std::string& key,
                const std::string& help) {
    auto holder = std::make_shared<std::uint64_t>();
    cmd->add_option(flag, *holder, help)->each([this, key, holder](const std::string&) {
      values[key] = *holder;
    });
  }
  void add_bool(CLI::App* cmd, const std::string& flag, const std::string& key,
                const std::string& help) {
    auto holder = std::make_shared<bool>();
    cmd->add_flag(flag, *holder, help)->each([this, key, holder](const std::string&) {
      values[key] = *holder;
    });
  }
  void add_double_vector(CLI::App* cmd, const std::string& flag, const std::string& key,
                         const std::string& help) {
    auto holder = std::make_shared<std::vector<double>>();
    cmd->add_option(flag, *holder, help)->each([this, key, holder](const std::string&) {
      values[key] = *holder;
    });
  }
  void add_string_vector(CLI::App* cmd, const std::string& flag, const std::string& key,
                         const std::string& help) {
    auto holder = std::make_shared<std::vector<std::string>>();
    cmd->add_option(flag, *holder, help)->each([this, key, holder](const std::string&) {
      values[key] = *holder;
    });
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MetaMolGen: meta-learned property-conditioned SMILES generation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_file;
  app.add_option("--config", config_path, "JSON config file (flags override its keys)");
  app.add_option("--data-file", data_file, "descriptor coefficient table override");

  Overrides train_ov, gen_ov, eval_ov, theory_ov, inspect_ov;

  CLI::App* train = app.add_subcommand("train", "meta-train on a SMILES corpus");
  train_ov.add_string(train, "--corpus", "corpus", "corpus file, one SMILES per line");
  train_ov.add_string(train, "--checkpoint-out", "checkpoint_out", "output checkpoint path");
  train_ov.add_string(train, "--trajectory-csv", "trajectory_csv", "loss trajectory CSV path");
  train_ov.add_size(train, "--epochs", "epochs", "training epochs");
  train_ov.add_size(train, "--inner-steps", "inner_steps", "inner-loop steps k");
  train_ov.add_double(train, "--inner-lr", "inner_lr", "inner-loop learning rate");
  train_ov.add_double(train, "--outer-step", "outer_step", "outer step size (pure mode)");
  train_ov.add_size(train, "--tasks-per-update", "tasks_per_update", "tasks per meta-update");
  train_ov.add_size(train, "--molecules-per-task", "molecules_per_task", "molecules per task");
  train_ov.add_size(train, "--minibatch", "minibatch", "inner minibatch bound");
  train_ov.add_size(train, "--max-length", "max_length", "max token sequence length");
  train_ov.add_size(train, "--seed", "seed", "RNG seed");
  train_ov.add_double(train, "--meta-lr", "meta_lr", "Adam meta learning rate");
  train_ov.add_double(train, "--weight-decay", "weight_decay", "decoupled weight decay");
  train_ov.add_bool(train, "--pure-reptile", "pure_reptile",
                    "literal averaged interpolation instead of Adam meta-updates");
  train_ov.add_bool(train, "--no-standardize", "no_standardize",
                    "disable dataset feature standardization");
  train_ov.add_bool(train, "--emit-timing", "emit_timing", "wall-clock column in the CSV");

  CLI::App* gen = app.add_subcommand("generate", "sample SMILES from a checkpoint");
  gen_ov.add_string(gen, "--checkpoint", "checkpoint", "checkpoint path");
  gen_ov.add_string(gen, "--out", "out", "output SMILES file");
  gen_ov.add_size(gen, "--count", "count", "number of molecules");
  gen_ov.add_double(gen, "--temperature", "temperature", "sampling temperature (0 = greedy)");
  gen_ov.add_size(gen, "--max-length", "max_length", "max token sequence length");
  gen_ov.add_size(gen, "--seed", "seed", "RNG seed");
  gen_ov.add_double(gen, "--noise-scale", "noise_scale", "latent diversity noise");
  gen_ov.add_double_vector(gen, "--target-properties", "target_properties",
                           "conditioning targets (MW logP HBD HBA)");
  gen_ov.add_string(gen, "--target-smiles", "target_smiles",
                    "compute conditioning targets from this molecule");
  gen_ov.add_string(gen, "--context-file", "context_file", "SMILES file used as context set");

  CLI::App* eval = app.add_subcommand("evaluate", "metric report for generated molecules");
  eval_ov.add_string(eval, "--generated", "generated", "generated SMILES file");
  eval_ov.add_string(eval, "--corpus", "corpus", "training corpus (novelty reference)");
  eval_ov.add_string(eval, "--report-out", "report_out", "metric report JSON path");
  eval_ov.add_string(eval, "--distributions-csv", "distributions_csv",
                     "per-molecule property CSV path");
  eval_ov.add_string(eval, "--models-json", "models_json",
                     "model-comparison rows; recompute Overall Score");
  eval_ov.add_size(eval, "--seed", "seed", "RNG seed (diversity pair sampling)");
  eval_ov.add_double(eval, "--time-h", "time_h", "wall-clock generation time in hours");
  eval_ov.add_double_vector(eval, "--target-properties", "target_properties",
                            "property targets for MAD/SD");
  eval_ov.add_string(eval, "--target-smiles", "target_smiles",
                     "compute property targets from this molecule");
  eval_ov.add_size(eval, "--target-hbd", "target_hbd", "CGSR hydrogen-bond-donor target");
  eval_ov.add_size(eval, "--target-hba", "target_hba", "CGSR hydrogen-bond-acceptor target");

  CLI::App* theory = app.add_subcommand("theory-check", "numerical verification suite");
  theory_ov.add_string(theory, "--report-out", "report_out", "JSON report path");
  theory_ov.add_string(theory, "--series-csv", "series_csv", "convergence series CSV path");
  theory_ov.add_size(theory, "--seed", "seed", "RNG seed");
  theory_ov.add_string_vector(theory, "--check", "checks",
                              "run only checks whose name contains this substring");
  theory_ov.add_bool(theory, "--alpha-over-threshold", "over_threshold_probe",
                     "include the report-only divergence probe");

  CLI::App* inspect = app.add_subcommand("inspect-checkpoint", "print checkpoint header");
  inspect_ov.add_string(inspect, "--checkpoint", "checkpoint", "checkpoint path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!data_file.empty()) mmgn::desc::Tables::load_from(data_file);
    if (train->parsed()) {
      json cfg = mmgn::cli::effective_config(config_path, train_ov.values);
      if (cfg.contains("pure_reptile") && cfg["pure_reptile"].get<bool>()) {
        cfg["adam_meta"] = false;
      }
      if (cfg.contains("no_standardize") && cfg["no_standardize"].get<bool>()) {
        cfg["standardize_features"] = false;
      }
      return mmgn::cli::run_train(cfg);
    }
    if (gen->parsed()) {
      return mmgn::cli::run_generate(mmgn::cli::effective_config(config_path, gen_ov.values));
    }
    if (eval->parsed()) {
      return mmgn::cli::run_evaluate(mmgn::cli::effective_config(config_path, eval_ov.values));
    }
    if (theory->parsed()) {
      return mmgn::cli::run_theory_check(
          mmgn::cli::effective_config(config_path, theory_ov.values));
    }
    if (inspect->parsed()) {
      return mmgn::cli::run_inspect(
          mmgn::cli::effective_config(config_path, inspect_ov.values));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
