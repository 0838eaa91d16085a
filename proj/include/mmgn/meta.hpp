#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmgn/array.hpp"
#include "mmgn/descriptors.hpp"
#include "mmgn/model.hpp"
#include "mmgn/optim.hpp"
#include "mmgn/params.hpp"
#include "mmgn/rng.hpp"
#include "mmgn/smiles.hpp"

namespace mmgn::meta {

// Per-feature population statistics (divisor N).
struct DatasetStats {
  std::vector<double> mu_hat;
  std::vector<double> sigma_hat;
  std::size_t count = 0;
};

DatasetStats compute_stats(const std::vector<desc::FeatureVector>& features);

// Per-dim (x - mu) / (sigma + 1e-8); identical transform for every split.
std::vector<double> standardize_row(const std::vector<double>& row, const DatasetStats& stats);
Array standardize_matrix(const Array& rows, const DatasetStats& stats);

struct TaskSpec {
  std::vector<std::size_t> support;  // corpus indices
  std::vector<std::size_t> query;
};

struct MetaConfig {
  std::size_t inner_steps = 3;         // k
  double inner_lr = 0.01;              // alpha
  double outer_step = 1.0;             // epsilon (pure interpolation mode)
  std::size_t tasks_per_update = 10;   // M
  std::size_t molecules_per_task = 16;
  std::size_t epochs = 150;
  std::size_t minibatch = 64;          // inner-step minibatch bound
  std::uint64_t seed = 0;
  bool adam_meta = true;               // false: literal averaged interpolation
  double meta_lr = 0.001;
  double weight_decay = 0.01;
  bool standardize_features = true;
  double support_fraction = 0.75;
  bool emit_timing = false;            // wall-clock column in the trajectory

  void validate() const;
};

// Tokenized, featurized corpus shared by training and evaluation.
struct Corpus {
  std::vector<std::string> lines;               // valid SMILES
  std::vector<desc::FeatureVector> features;
  std::vector<smiles::TokenSequence> tokens;
  smiles::Vocabulary vocab;
  std::size_t skipped_invalid = 0;
  std::size_t skipped_too_long = 0;

  std::size_t size() const { return lines.size(); }
};

Corpus build_corpus(const std::vector<std::string>& raw_lines, std::size_t max_length);
Corpus load_corpus(const std::string& path, std::size_t max_length);

// Uniform draws without replacement, support/query split per config.
std::vector<TaskSpec> sample_tasks(std::size_t corpus_size, const MetaConfig& cfg, Rng& rng);

// Teacher-forced batch for the given rows, conditioned on the support
// context. Stats are applied when `standardize` is set.
model::SequenceBatch build_batch(const Corpus& corpus, const std::vector<std::size_t>& context_rows,
                                 const std::vector<std::size_t>& sequence_rows,
                                 const DatasetStats& stats, bool standardize,
                                 const model::Dims& dims);

// Gradient callback: fills loss, returns per-parameter gradients.
using GradFn = std::function<GradMap(const ParamSet&, double& loss)>;

// k SGD steps on a copy of theta; theta itself is never touched.
ParamSet inner_adapt(const ParamSet& theta, const GradFn& grad_fn, std::size_t k, double alpha);

// theta += epsilon * mean(deltas), elementwise, fixed order.
void reptile_update(ParamSet& theta, const std::vector<ParamSet>& deltas, double epsilon);

struct TrajectoryRow {
  std::size_t iteration;
  double support_loss;
  double query_loss;
  double seconds;
};

struct TrainResult {
  ParamSet params;
  std::vector<TrajectoryRow> trajectory;
  DatasetStats stats;
  model::Dims dims;
};

TrainResult meta_train(const Corpus& corpus, const MetaConfig& cfg, const model::Dims& dims);

// Evenly strided feature rows used as the conditioning context once the
// corpus itself is gone (stored in checkpoints).
Array reference_context(const Corpus& corpus, const DatasetStats& stats, bool standardize,
                        std::size_t max_rows = 64);

std::string trajectory_csv(const std::vector<TrajectoryRow>& rows);

}  // namespace mmgn::meta
