#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmgn/array.hpp"
#include "mmgn/params.hpp"
#include "mmgn/rng.hpp"
#include "mmgn/smiles.hpp"
#include "mmgn/tape.hpp"

namespace mmgn::model {

struct Dims {
  std::size_t feature_dim = 10;   // d
  std::size_t property_dim = 4;   // k
  std::size_t encoder_hidden = 256;
  std::size_t latent = 128;       // task representation / decoder hidden
  std::size_t projector_hidden = 64;
  std::size_t vocab = 0;          // V, fixed by the vocabulary
  double dropout = 0.2;
  double norm_eps = 1e-5;
};

// All trainable tensors in canonical order: learnable normalizer, context
// encoder, task encoder, property projector, decoder, output head.
ParamSet init_params(const Dims& dims, Rng& rng);

struct SamplerConfig {
  double temperature = 1.0;
  std::size_t max_length = 128;
  std::uint64_t seed = 0;
  double noise_scale = 0.1;  // latent diversity noise, generation only
  bool greedy = false;       // explicit tau = 0 mode
};

// One teacher-forced batch: a shared context set plus B aligned sequences.
struct SequenceBatch {
  Array context;                        // N x d (shared by all rows)
  std::vector<std::vector<int>> inputs; // B rows, each padded to length L
  std::vector<std::vector<int>> targets;
  Array z;                              // B x k conditioning, or empty
  bool has_z = false;
};

// Learned standardization (x - mu) / (softplus(sigma_raw) + eps) on the
// last axis; differentiable w.r.t. both statistics.
NodeId normalize_learned(Tape& t, const std::map<std::string, NodeId>& p,
                         const Dims& dims, NodeId x);

// Context set -> task representation: normalize, encode, mean-pool over
// the context axis, refine with the task encoder. X may be [N x d] or
// [B x N x d]; output is [rows x latent].
NodeId task_representation(Tape& t, const std::map<std::string, NodeId>& p,
                           const Dims& dims, NodeId x);

// Bind every parameter as a trainable leaf; returns name -> node.
std::map<std::string, NodeId> bind_params(Tape& t, const ParamSet& params);

// Teacher-forced logits [B x L x V] for the full pipeline.
// Throws on an empty context or L < 1.
NodeId forward_logits(Tape& t, const std::map<std::string, NodeId>& p, const Dims& dims,
                      const SequenceBatch& batch, bool training, Rng* dropout_rng);

// Token-level reconstruction loss (mean NLL over non-pad target positions).
NodeId reconstruction_loss_node(Tape& t, const std::map<std::string, NodeId>& p,
                                const Dims& dims, const SequenceBatch& batch,
                                bool training, Rng* dropout_rng);

// Convenience wrappers building a throwaway tape.
Array forward(const ParamSet& params, const Dims& dims, const SequenceBatch& batch);
double reconstruction_loss(const ParamSet& params, const Dims& dims,
                           const SequenceBatch& batch);
GradMap reconstruction_gradients(const ParamSet& params, const Dims& dims,
                                 const SequenceBatch& batch, bool training,
                                 Rng* dropout_rng, double* loss_out);

// Temperature sampling from raw logits; tau below 1e-6 falls back to argmax.
std::size_t sample_index(const double* logits, std::size_t n, double temperature, Rng& rng);

// Autoregressive generation: START, sample until EOS or max length,
// detokenize. PAD/START/UNK are masked out of the sampling distribution.
std::vector<std::string> generate(const ParamSet& params, const Dims& dims,
                                  const smiles::Vocabulary& vocab, const Array& context,
                                  const std::optional<std::vector<double>>& z,
                                  const SamplerConfig& cfg, std::size_t count);

double softplus_inverse(double y);

}  // namespace mmgn::model
