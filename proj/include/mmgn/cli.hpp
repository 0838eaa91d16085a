#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace mmgn::cli {

using json = nlohmann::json;

// Effective config = file config overlaid with CLI overrides; MMGN_SEED
// overrides any "seed" key. The hash of the effective config is embedded
// in every artifact.
json effective_config(const std::string& config_path, const json& overrides);
std::uint64_t config_hash(const json& cfg);

// Subcommand runners; diagnostics go to stderr, the final JSON summary to
// stdout. Each returns a process exit code.
int run_train(const json& cfg);
int run_generate(const json& cfg);
int run_evaluate(const json& cfg);
int run_theory_check(const json& cfg);
int run_inspect(const json& cfg);

}  // namespace mmgn::cli
