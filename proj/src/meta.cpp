#include "mmgn/meta.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mmgn/parser.hpp"

namespace mmgn::meta {

namespace {

constexpr double kStandardizeEps = 1e-8;

std::vector<double> feature_row(const desc::FeatureVector& f) {
  return std::vector<double>(f.values.begin(), f.values.end());
}

}  // namespace

void MetaConfig::validate() const {
  if (!(inner_lr > 0.0)) throw ConfigError("meta: inner learning rate must be > 0");
  if (!(outer_step > 0.0) || outer_step > 1.0) {
    throw ConfigError("meta: outer step must lie in (0, 1]");
  }
  if (inner_steps < 1) throw ConfigError("meta: inner steps must be >= 1");
  if (tasks_per_update < 1) throw ConfigError("meta: tasks per update must be >= 1");
  if (molecules_per_task < 2) throw ConfigError("meta: molecules per task must be >= 2");
  if (!(support_fraction > 0.0) || !(support_fraction < 1.0)) {
    throw ConfigError("meta: support fraction must lie in (0, 1)");
  }
}

DatasetStats compute_stats(const std::vector<desc::FeatureVector>& features) {
  if (features.empty()) throw Error("compute_stats: empty feature list");
  const std::size_t d = desc::kFeatureDim;
  DatasetStats stats;
  stats.mu_hat.assign(d, 0.0);
  stats.sigma_hat.assign(d, 0.0);
  stats.count = features.size();
  const double n = static_cast<double>(features.size());
  for (const auto& f : features) {
    for (std::size_t j = 0; j < d; ++j) stats.mu_hat[j] += f.values[j];
  }
  for (std::size_t j = 0; j < d; ++j) stats.mu_hat[j] /= n;
  for (const auto& f : features) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = f.values[j] - stats.mu_hat[j];
      stats.sigma_hat[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < d; ++j) stats.sigma_hat[j] = std::sqrt(stats.sigma_hat[j] / n);
  return stats;
}

std::vector<double> standardize_row(const std::vector<double>& row, const DatasetStats& stats) {
  if (row.size() != stats.mu_hat.size()) {
    throw ShapeError("standardize: dimension mismatch");
  }
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    out[j] = (row[j] - stats.mu_hat[j]) / (stats.sigma_hat[j] + kStandardizeEps);
  }
  return out;
}

Array standardize_matrix(const Array& rows, const DatasetStats& stats) {
  if (rows.cols() != stats.mu_hat.size()) {
    throw ShapeError("standardize: dimension mismatch");
  }
  Array out(rows.shape());
  const std::size_t d = rows.cols();
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      out.values()[r * d + j] =
          (rows.values()[r * d + j] - stats.mu_hat[j]) / (stats.sigma_hat[j] + kStandardizeEps);
    }
  }
  return out;
}

Corpus build_corpus(const std::vector<std::string>& raw_lines, std::size_t max_length) {
  Corpus corpus;
  std::vector<std::string> valid;
  for (const std::string& line : raw_lines) {
    if (line.empty() || line[0] == '#') continue;
    if (!smiles::validate(line)) {
      ++corpus.skipped_invalid;
      continue;
    }
    valid.push_back(line);
  }
  corpus.vocab = smiles::Vocabulary::from_corpus(valid);
  for (const std::string& line : valid) {
    smiles::TokenSequence seq = smiles::tokenize(line, corpus.vocab);
    if (seq.ids.size() > max_length) {
      ++corpus.skipped_too_long;
      continue;
    }
    corpus.lines.push_back(line);
    corpus.tokens.push_back(std::move(seq));
    corpus.features.push_back(desc::compute_features(smiles::parse(line)));
  }
  return corpus;
}

Corpus load_corpus(const std::string& path, std::size_t max_length) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    lines.push_back(line);
  }
  return build_corpus(lines, max_length);
}

std::vector<TaskSpec> sample_tasks(std::size_t corpus_size, const MetaConfig& cfg, Rng& rng) {
  if (corpus_size < cfg.molecules_per_task) {
    throw Error("corpus too small: " + std::to_string(corpus_size) + " molecules for tasks of " +
                std::to_string(cfg.molecules_per_task));
  }
  std::vector<TaskSpec> tasks;
  const std::size_t support_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(cfg.support_fraction *
                                             static_cast<double>(cfg.molecules_per_task))));
  for (std::size_t m = 0; m < cfg.tasks_per_update; ++m) {
    const auto draw = rng.sample_without_replacement(corpus_size, cfg.molecules_per_task);
    TaskSpec task;
    task.support.assign(draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(support_count));
    task.query.assign(draw.begin() + static_cast<std::ptrdiff_t>(support_count), draw.end());
    tasks.push_back(std::move(task));
  }
  return tasks;
}

model::SequenceBatch build_batch(const Corpus& corpus, const std::vector<std::size_t>& context_rows,
                                 const std::vector<std::size_t>& sequence_rows,
                                 const DatasetStats& stats, bool standardize,
                                 const model::Dims& dims) {
  if (context_rows.empty() || sequence_rows.empty()) {
    throw Error("build_batch: empty context or sequence rows");
  }
  model::SequenceBatch batch;
  batch.context = Array({context_rows.size(), desc::kFeatureDim});
  for (std::size_t r = 0; r < context_rows.size(); ++r) {
    std::vector<double> row = feature_row(corpus.features[context_rows[r]]);
    if (standardize) row = standardize_row(row, stats);
    std::copy(row.begin(), row.end(), batch.context.data() + r * desc::kFeatureDim);
  }

  std::size_t max_len = 0;
  for (std::size_t idx : sequence_rows) {
    max_len = std::max(max_len, corpus.tokens[idx].ids.size());
  }
  // Teacher forcing: input = y[:-1], target = y[1:], padded to max_len - 1.
  const std::size_t l = max_len - 1;
  batch.z = Array({sequence_rows.size(), dims.property_dim});
  for (std::size_t r = 0; r < sequence_rows.size(); ++r) {
    const auto& ids = corpus.tokens[sequence_rows[r]].ids;
    std::vector<int> in(l, smiles::Vocabulary::kPad);
    std::vector<int> tgt(l, smiles::Vocabulary::kPad);
    for (std::size_t pos = 0; pos + 1 < ids.size(); ++pos) {
      in[pos] = ids[pos];
      tgt[pos] = ids[pos + 1];
    }
    batch.inputs.push_back(std::move(in));
    batch.targets.push_back(std::move(tgt));

    std::vector<double> row = feature_row(corpus.features[sequence_rows[r]]);
    if (standardize) row = standardize_row(row, stats);
    // Conditioning targets are the first property_dim feature dims.
    for (std::size_t j = 0; j < dims.property_dim; ++j) {
      batch.z.values()[r * dims.property_dim + j] = row[j];
    }
  }
  batch.has_z = true;
  return batch;
}

ParamSet inner_adapt(const ParamSet& theta, const GradFn& grad_fn, std::size_t k, double alpha) {
  if (!(alpha > 0.0)) throw Error("inner_adapt: alpha must be > 0");
  if (k < 1) throw Error("inner_adapt: k must be >= 1");
  ParamSet adapted = theta;
  for (std::size_t step = 0; step < k; ++step) {
    double loss = 0.0;
    GradMap grads = grad_fn(adapted, loss);
    if (!std::isfinite(loss)) throw NonFiniteError("inner_adapt: non-finite task loss");
    sgd_step(adapted, grads, alpha);
  }
  return adapted;
}

void reptile_update(ParamSet& theta, const std::vector<ParamSet>& deltas, double epsilon) {
  if (deltas.empty()) throw Error("reptile_update: empty delta list");
  const double scale = epsilon / static_cast<double>(deltas.size());
  for (const ParamSet& delta : deltas) theta.axpy(scale, delta);
}

TrainResult meta_train(const Corpus& corpus, const MetaConfig& cfg, const model::Dims& dims) {
  cfg.validate();
  if (corpus.size() < cfg.molecules_per_task) {
    throw Error("corpus too small: " + std::to_string(corpus.size()) + " molecules for tasks of " +
                std::to_string(cfg.molecules_per_task));
  }

  TrainResult result;
  result.dims = dims;
  result.stats = compute_stats(corpus.features);

  Rng init_rng(Rng::derive(cfg.seed, 0xA11));
  result.params = model::init_params(dims, init_rng);

  const std::size_t per_update = cfg.tasks_per_update * cfg.molecules_per_task;
  const std::size_t iterations = static_cast<std::size_t>(
      std::ceil(static_cast<double>(cfg.epochs) * static_cast<double>(corpus.size()) /
                static_cast<double>(per_update)));

  OptimState meta_opt;
  if (cfg.adam_meta) {
    meta_opt = OptimState::adam(result.params, cfg.meta_lr, cfg.weight_decay);
  }

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t iter = 0; iter < iterations; ++iter) {
    Rng task_rng(Rng::derive(cfg.seed, 0x7A5C, iter));
    const std::vector<TaskSpec> tasks = sample_tasks(corpus.size(), cfg, task_rng);

    std::vector<ParamSet> deltas;
    double support_loss_sum = 0.0;
    double query_loss_sum = 0.0;
    for (std::size_t m = 0; m < tasks.size(); ++m) {
      const TaskSpec& task = tasks[m];
      Rng dropout_rng(Rng::derive(cfg.seed, iter, 0x1000 + m));
      Rng batch_rng(Rng::derive(cfg.seed, iter, 0x2000 + m));

      double last_loss = 0.0;
      const GradFn grad_fn = [&](const ParamSet& p, double& loss) {
        std::vector<std::size_t> rows = task.support;
        if (rows.size() > cfg.minibatch) {
          const auto pick = batch_rng.sample_without_replacement(rows.size(), cfg.minibatch);
          std::vector<std::size_t> subset;
          subset.reserve(cfg.minibatch);
          for (std::size_t idx : pick) subset.push_back(rows[idx]);
          rows = std::move(subset);
        }
        const model::SequenceBatch batch =
            build_batch(corpus, task.support, rows, result.stats, cfg.standardize_features, dims);
        GradMap grads =
            model::reconstruction_gradients(p, dims, batch, true, &dropout_rng, &loss);
        last_loss = loss;
        return grads;
      };

      const ParamSet adapted = inner_adapt(result.params, grad_fn, cfg.inner_steps, cfg.inner_lr);
      support_loss_sum += last_loss;

      const model::SequenceBatch query_batch = build_batch(
          corpus, task.support, task.query, result.stats, cfg.standardize_features, dims);
      query_loss_sum += model::reconstruction_loss(adapted, dims, query_batch);

      deltas.push_back(adapted.diff(result.params));
    }

    const double mean_query = query_loss_sum / static_cast<double>(tasks.size());
    const double mean_support = support_loss_sum / static_cast<double>(tasks.size());
    if (!std::isfinite(mean_query) || !std::isfinite(mean_support)) {
      throw NonFiniteError("meta_train: non-finite meta-loss at iteration " +
                           std::to_string(iter));
    }

    if (cfg.adam_meta) {
      // Averaged Reptile delta fed to Adam as a pseudo-gradient.
      ParamSet mean_delta = deltas[0];
      for (std::size_t m = 1; m < deltas.size(); ++m) mean_delta.axpy(1.0, deltas[m]);
      GradMap pseudo;
      for (std::size_t i = 0; i < mean_delta.size(); ++i) {
        auto& [name, arr] = mean_delta.entry(i);
        Array grad(arr.shape());
        const double inv_m = 1.0 / static_cast<double>(deltas.size());
        for (std::size_t j = 0; j < arr.numel(); ++j) grad[j] = -arr[j] * inv_m;
        pseudo.emplace(name, std::move(grad));
      }
      adam_step(meta_opt, result.params, pseudo);
    } else {
      reptile_update(result.params, deltas, cfg.outer_step);
    }

    double seconds = 0.0;
    if (cfg.emit_timing) {
      seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.trajectory.push_back({iter, mean_support, mean_query, seconds});
  }
  return result;
}

Array reference_context(const Corpus& corpus, const DatasetStats& stats, bool standardize,
                        std::size_t max_rows) {
  const std::size_t n = std::min(max_rows, corpus.size());
  if (n == 0) throw Error("reference_context: empty corpus");
  Array out({n, desc::kFeatureDim});
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t idx = r * corpus.size() / n;
    std::vector<double> row = feature_row(corpus.features[idx]);
    if (standardize) row = standardize_row(row, stats);
    std::copy(row.begin(), row.end(), out.data() + r * desc::kFeatureDim);
  }
  return out;
}

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows) {
  std::string out = "iteration,mean_support_loss,mean_query_loss,seconds\n";
  char buf[128];
  for (const TrajectoryRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g\n", r.iteration, r.support_loss,
                  r.query_loss, r.seconds);
    out += buf;
  }
  return out;
}

}  // namespace mmgn::meta
