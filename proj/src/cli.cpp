#include "mmgn/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "mmgn/canonical.hpp"
#include "mmgn/checkpoint.hpp"
#include "mmgn/descriptors.hpp"
#include "mmgn/meta.hpp"
#include "mmgn/metrics.hpp"
#include "mmgn/model.hpp"
#include "mmgn/parser.hpp"
#include "mmgn/theory.hpp"

namespace mmgn::cli {

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> strip_comments(const std::vector<std::string>& lines) {
  std::vector<std::string> out;
  for (const std::string& l : lines) {
    if (l.empty() || l[0] == '#') continue;
    out.push_back(l);
  }
  return out;
}

template <typename T>
T get_or(const json& cfg, const std::string& key, T fallback) {
  if (!cfg.contains(key) || cfg[key].is_null()) return fallback;
  return cfg[key].get<T>();
}

std::string require_string(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || !cfg[key].is_string()) {
    throw ConfigError("config: missing required string '" + key + "'");
  }
  return cfg[key].get<std::string>();
}

meta::MetaConfig meta_config_from(const json& cfg) {
  meta::MetaConfig mc;
  mc.inner_steps = get_or<std::size_t>(cfg, "inner_steps", 3);
  mc.inner_lr = get_or<double>(cfg, "inner_lr", 0.01);
  mc.outer_step = get_or<double>(cfg, "outer_step", 1.0);
  mc.tasks_per_update = get_or<std::size_t>(cfg, "tasks_per_update", 10);
  mc.molecules_per_task = get_or<std::size_t>(cfg, "molecules_per_task", 16);
  mc.epochs = get_or<std::size_t>(cfg, "epochs", 150);
  mc.minibatch = get_or<std::size_t>(cfg, "minibatch", 64);
  mc.seed = get_or<std::uint64_t>(cfg, "seed", 0);
  mc.adam_meta = get_or<bool>(cfg, "adam_meta", true);
  mc.meta_lr = get_or<double>(cfg, "meta_lr", 0.001);
  mc.weight_decay = get_or<double>(cfg, "weight_decay", 0.01);
  mc.standardize_features = get_or<bool>(cfg, "standardize_features", true);
  mc.emit_timing = get_or<bool>(cfg, "emit_timing", false);
  return mc;
}

// Properties for conditioning: explicit values or computed from a SMILES.
std::optional<std::vector<double>> resolve_targets(const json& cfg, std::size_t property_dim) {
  if (cfg.contains("target_properties") && !cfg["target_properties"].is_null()) {
    const auto v = cfg["target_properties"].get<std::vector<double>>();
    if (v.size() != property_dim) {
      throw ConfigError("target_properties needs " + std::to_string(property_dim) + " values");
    }
    return v;
  }
  if (cfg.contains("target_smiles") && !cfg["target_smiles"].is_null()) {
    const std::string s = cfg["target_smiles"].get<std::string>();
    const desc::FeatureVector f = desc::compute_features(smiles::parse(s));
    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i < property_dim; ++i) dims.push_back(i);
    const desc::PropertyVector p = desc::PropertyVector::from_features(f, dims);
    return p.values;
  }
  return std::nullopt;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

json effective_config(const std::string& config_path, const json& overrides) {
  json cfg = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config '" + config_path + "'");
    in >> cfg;
    if (!cfg.is_object()) throw ConfigError("config root must be a JSON object");
  }
  for (const auto& [key, value] : overrides.items()) cfg[key] = value;
  const char* env_seed = std::getenv("MMGN_SEED");
  if (env_seed != nullptr && *env_seed != '\0') {
    cfg["seed"] = static_cast<std::uint64_t>(std::strtoull(env_seed, nullptr, 10));
  }
  return cfg;
}

std::uint64_t config_hash(const json& cfg) {
  return desc::fnv1a64(cfg.dump());
}

int run_train(const json& cfg) {
  const std::string corpus_path = require_string(cfg, "corpus");
  const std::string ckpt_path = get_or<std::string>(cfg, "checkpoint_out", "model.mmgn");
  const std::string csv_path = get_or<std::string>(cfg, "trajectory_csv", "trajectory.csv");
  const std::size_t max_length = get_or<std::size_t>(cfg, "max_length", 128);
  const meta::MetaConfig mc = meta_config_from(cfg);
  const std::uint64_t hash = config_hash(cfg);

  const meta::Corpus corpus = meta::load_corpus(corpus_path, max_length);
  if (corpus.skipped_invalid > 0 || corpus.skipped_too_long > 0) {
    std::cerr << "warning: skipped " << corpus.skipped_invalid << " invalid and "
              << corpus.skipped_too_long << " over-length lines\n";
  }
  if (corpus.size() == 0) {
    std::cerr << "error: no valid molecules in corpus\n";
    return 1;
  }

  model::Dims dims;
  dims.vocab = corpus.vocab.size();

  const meta::TrainResult result = meta::meta_train(corpus, mc, dims);

  ckpt::Checkpoint ck;
  ck.dims = dims;
  ck.vocab_tokens = corpus.vocab.tokens();
  ck.params = result.params;
  ck.stats_mu = result.stats.mu_hat;
  ck.stats_sigma = result.stats.sigma_hat;
  ck.reference_context =
      meta::reference_context(corpus, result.stats, mc.standardize_features);
  ck.standardize_features = mc.standardize_features;
  ck.seed = mc.seed;
  ck.config_hash = hash;
  ckpt::save(ck, ckpt_path);

  std::string csv = "# config_hash=" + std::to_string(hash) +
                    " seed=" + std::to_string(mc.seed) + "\n";
  csv += meta::trajectory_csv(result.trajectory);
  write_file(csv_path, csv);

  json summary;
  summary["checkpoint"] = ckpt_path;
  summary["trajectory_csv"] = csv_path;
  summary["molecules"] = corpus.size();
  summary["skipped_invalid"] = corpus.skipped_invalid;
  summary["skipped_too_long"] = corpus.skipped_too_long;
  summary["iterations"] = result.trajectory.size();
  summary["initial_query_loss"] = result.trajectory.front().query_loss;
  summary["final_query_loss"] = result.trajectory.back().query_loss;
  summary["config_hash"] = hash;
  summary["seed"] = mc.seed;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_generate(const json& cfg) {
  const std::string ckpt_path = require_string(cfg, "checkpoint");
  const std::string out_path = get_or<std::string>(cfg, "out", "generated.smi");
  const std::size_t count = get_or<std::size_t>(cfg, "count", 100);
  const std::uint64_t hash = config_hash(cfg);

  const ckpt::Checkpoint ck = ckpt::load(ckpt_path);
  const smiles::Vocabulary vocab = smiles::Vocabulary::from_tokens(ck.vocab_tokens);

  model::SamplerConfig sampler;
  sampler.temperature = get_or<double>(cfg, "temperature", 1.0);
  sampler.greedy = sampler.temperature == 0.0;
  sampler.max_length = get_or<std::size_t>(cfg, "max_length", 128);
  sampler.seed = get_or<std::uint64_t>(cfg, "seed", 0);
  sampler.noise_scale = get_or<double>(cfg, "noise_scale", 0.1);

  Array context = ck.reference_context;
  if (cfg.contains("context_file") && !cfg["context_file"].is_null()) {
    const auto lines = strip_comments(read_lines(cfg["context_file"].get<std::string>()));
    std::vector<std::vector<double>> rows;
    for (const std::string& s : lines) {
      if (!smiles::validate(s)) continue;
      const desc::FeatureVector f = desc::compute_features(smiles::parse(s));
      std::vector<double> row(f.values.begin(), f.values.end());
      if (ck.standardize_features) {
        meta::DatasetStats stats{ck.stats_mu, ck.stats_sigma, 0};
        row = meta::standardize_row(row, stats);
      }
      rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error("context_file contains no valid molecules");
    context = Array({rows.size(), desc::kFeatureDim});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy(rows[r].begin(), rows[r].end(), context.data() + r * desc::kFeatureDim);
    }
  }

  const std::optional<std::vector<double>> raw_targets =
      resolve_targets(cfg, ck.dims.property_dim);
  std::optional<std::vector<double>> z;
  if (raw_targets.has_value()) {
    z = *raw_targets;
    if (ck.standardize_features) {
      for (std::size_t j = 0; j < z->size(); ++j) {
        (*z)[j] = ((*z)[j] - ck.stats_mu[j]) / (ck.stats_sigma[j] + 1e-8);
      }
    }
  }

  const std::vector<std::string> generated =
      model::generate(ck.params, ck.dims, vocab, context, z, sampler, count);

  std::string header = "# seed=" + std::to_string(sampler.seed) +
                       " temperature=" + format_double(sampler.temperature) +
                       " eta=" + format_double(sampler.noise_scale);
  if (raw_targets.has_value()) {
    header += " targets=[";
    for (std::size_t j = 0; j < raw_targets->size(); ++j) {
      if (j) header += ",";
      header += format_double((*raw_targets)[j]);
    }
    header += "]";
  }
  header += " config_hash=" + std::to_string(hash) + "\n";
  std::string body;
  for (const std::string& s : generated) body += s + "\n";
  write_file(out_path, header + body);

  json summary;
  summary["out"] = out_path;
  summary["count"] = generated.size();
  summary["seed"] = sampler.seed;
  summary["config_hash"] = hash;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_evaluate(const json& cfg) {
  const std::uint64_t hash = config_hash(cfg);

  // Model-comparison mode: recompute the Overall Score of printed rows.
  if (cfg.contains("models_json") && !cfg["models_json"].is_null()) {
    std::ifstream in(cfg["models_json"].get<std::string>());
    if (!in) throw Error("cannot open models_json file");
    json rows_json;
    in >> rows_json;
    std::vector<metrics::ModelRow> rows;
    for (const auto& rj : rows_json) {
      metrics::ModelRow row;
      row.name = require_string(rj, "name");
      for (const char* key : {"valid", "unique", "time_h", "diversity", "druglikeness",
                              "synthesizability", "solubility"}) {
        if (!rj.contains(key)) {
          throw Error(std::string("model row '") + row.name + "' missing metric '" + key + "'");
        }
      }
      row.valid = rj["valid"].get<double>();
      row.unique = rj["unique"].get<double>();
      row.time_h = rj["time_h"].get<double>();
      row.diversity = rj["diversity"].get<double>();
      row.druglikeness = rj["druglikeness"].get<double>();
      row.synthesizability = rj["synthesizability"].get<double>();
      row.solubility = rj["solubility"].get<double>();
      rows.push_back(row);
    }
    const std::vector<double> scores = metrics::overall_score(rows);
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      nlohmann::ordered_json row;
      row["name"] = rows[i].name;
      row["overall_score"] = std::round(scores[i] * 10000.0) / 10000.0;
      out.push_back(row);
    }
    nlohmann::ordered_json summary;
    summary["models"] = out;
    summary["config_hash"] = hash;
    const std::string report = summary.dump(2);
    if (cfg.contains("report_out") && !cfg["report_out"].is_null()) {
      write_file(cfg["report_out"].get<std::string>(), report + "\n");
    }
    std::cout << report << "\n";
    return 0;
  }

  const std::string generated_path = require_string(cfg, "generated");
  const std::vector<std::string> generated = strip_comments(read_lines(generated_path));
  if (generated.empty()) {
    std::cerr << "error: generated file is empty\n";
    return 1;
  }

  std::vector<std::string> train_lines;
  if (cfg.contains("corpus") && !cfg["corpus"].is_null()) {
    train_lines = strip_comments(read_lines(cfg["corpus"].get<std::string>()));
  }

  metrics::EvaluateOptions opts;
  opts.seed = get_or<std::uint64_t>(cfg, "seed", 0);
  opts.time_h = get_or<double>(cfg, "time_h", 0.0);
  const std::optional<std::vector<double>> targets = resolve_targets(cfg, 4);
  if (targets.has_value()) {
    desc::PropertyVector p;
    p.values = *targets;
    const auto& labels = desc::feature_labels();
    for (std::size_t j = 0; j < targets->size(); ++j) p.labels.push_back(labels[j]);
    opts.target = p;
  }
  if (cfg.contains("target_hbd") && !cfg["target_hbd"].is_null()) {
    opts.target_hbd = cfg["target_hbd"].get<int>();
  }
  if (cfg.contains("target_hba") && !cfg["target_hba"].is_null()) {
    opts.target_hba = cfg["target_hba"].get<int>();
  }

  const metrics::MetricReport report = metrics::evaluate(generated, train_lines, opts);

  if (cfg.contains("distributions_csv") && !cfg["distributions_csv"].is_null()) {
    std::string csv = "# config_hash=" + std::to_string(hash) +
                      " seed=" + std::to_string(opts.seed) + "\ncanonical";
    for (const std::string& label : desc::feature_labels()) csv += "," + label;
    csv += "\n";
    for (const std::string& s : generated) {
      if (!smiles::validate(s)) continue;
      const auto g = smiles::parse(s);
      csv += smiles::canonical_form(g);
      const desc::FeatureVector f = desc::compute_features(g);
      char buf[64];
      for (double v : f.values) {
        std::snprintf(buf, sizeof(buf), ",%.6g", v);
        csv += buf;
      }
      csv += "\n";
    }
    write_file(cfg["distributions_csv"].get<std::string>(), csv);
  }

  std::string out = report.to_json();
  if (cfg.contains("report_out") && !cfg["report_out"].is_null()) {
    write_file(cfg["report_out"].get<std::string>(), out + "\n");
  }
  std::cout << out << "\n";
  return 0;
}

int run_theory_check(const json& cfg) {
  theory::SuiteOptions opts;
  opts.seed = get_or<std::uint64_t>(cfg, "seed", opts.seed);
  opts.over_threshold_probe = get_or<bool>(cfg, "over_threshold_probe", false);
  if (cfg.contains("checks") && !cfg["checks"].is_null()) {
    opts.only = cfg["checks"].get<std::vector<std::string>>();
  }
  const theory::SuiteResult result = theory::run_suite(opts);

  const std::string report = result.to_json();
  if (cfg.contains("report_out") && !cfg["report_out"].is_null()) {
    write_file(cfg["report_out"].get<std::string>(), report + "\n");
  }
  if (cfg.contains("series_csv") && !cfg["series_csv"].is_null()) {
    write_file(cfg["series_csv"].get<std::string>(), result.series_csv());
  }
  std::cout << report << "\n";
  if (!result.all_passed()) {
    for (const auto& c : result.checks) {
      if (c.asserted && !c.pass) std::cerr << "FAILED: " << c.name << "\n";
    }
    return 1;
  }
  return 0;
}

int run_inspect(const json& cfg) {
  const std::string path = require_string(cfg, "checkpoint");
  const ckpt::Checkpoint ck = ckpt::load(path);
  nlohmann::ordered_json j;
  j["path"] = path;
  j["format_version"] = ckpt::kFormatVersion;
  j["crc_ok"] = true;  // load() already verified
  j["seed"] = ck.seed;
  j["config_hash"] = ck.config_hash;
  j["standardize_features"] = ck.standardize_features;
  j["vocab_size"] = ck.vocab_tokens.size();
  nlohmann::ordered_json dims;
  dims["feature_dim"] = ck.dims.feature_dim;
  dims["property_dim"] = ck.dims.property_dim;
  dims["encoder_hidden"] = ck.dims.encoder_hidden;
  dims["latent"] = ck.dims.latent;
  dims["projector_hidden"] = ck.dims.projector_hidden;
  dims["vocab"] = ck.dims.vocab;
  dims["dropout"] = ck.dims.dropout;
  j["dims"] = dims;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::size_t total = 0;
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    const auto& [name, arr] = ck.params.entry(i);
    nlohmann::ordered_json tj;
    tj["name"] = name;
    tj["shape"] = arr.shape();
    tensors.push_back(tj);
    total += arr.numel();
  }
  j["tensors"] = tensors;
  j["parameter_count"] = total;
  j["context_rows"] = ck.reference_context.rank() == 2 ? ck.reference_context.dim(0) : 0;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace mmgn::cli
