#include "mmgn/model.hpp"

#include <algorithm>
#include <cmath>

namespace mmgn::model {

namespace {

Array xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Array w({fan_in, fan_out});
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

// Bernoulli keep-mask for dropout, entries in {0, 1}.
Array dropout_mask(const std::vector<std::size_t>& shape, double drop_p, Rng& rng) {
  Array m(shape);
  for (double& v : m.values()) v = rng.bernoulli(drop_p) ? 0.0 : 1.0;
  return m;
}

NodeId maybe_dropout(Tape& t, NodeId x, const Dims& dims, bool training, Rng* rng) {
  if (!training || dims.dropout <= 0.0) return x;
  const NodeId mask = t.constant(dropout_mask(t.value(x).shape(), dims.dropout, *rng));
  return t.dropout(x, mask, 1.0 / (1.0 - dims.dropout));
}

struct LstmState {
  NodeId h;
  NodeId c;
};

LstmState lstm_step(Tape& t, NodeId x, const LstmState& prev, NodeId w_ih, NodeId w_hh,
                    NodeId bias, std::size_t hidden) {
  const NodeId gates = t.add(t.add(t.matmul(x, w_ih), t.matmul(prev.h, w_hh)), bias);
  const NodeId in_gate = t.sigmoid(t.slice_last(gates, 0, hidden));
  const NodeId forget_gate = t.sigmoid(t.slice_last(gates, hidden, hidden));
  const NodeId cell_cand = t.tanh_op(t.slice_last(gates, 2 * hidden, hidden));
  const NodeId out_gate = t.sigmoid(t.slice_last(gates, 3 * hidden, hidden));
  const NodeId c = t.add(t.mul(forget_gate, prev.c), t.mul(in_gate, cell_cand));
  const NodeId h = t.mul(out_gate, t.tanh_op(c));
  return {h, c};
}

// Property projector: z [B x k] -> [B x latent].
NodeId project_properties(Tape& t, const std::map<std::string, NodeId>& p, NodeId z) {
  const NodeId h = t.gelu(t.add(t.matmul(z, p.at("proj.w1")), p.at("proj.b1")));
  return t.add(t.matmul(h, p.at("proj.w2")), p.at("proj.b2"));
}

// One decode step shared by teacher forcing and generation.
// token_ids: one id per batch row.
struct DecodeState {
  LstmState layer0;
  LstmState layer1;
};

NodeId decode_step(Tape& t, const std::map<std::string, NodeId>& p, const Dims& dims,
                   DecodeState& state, const std::vector<int>& token_ids, bool training,
                   Rng* rng) {
  const std::size_t b = token_ids.size();
  NodeId x = t.embedding(p.at("dec.embed"), token_ids, {b});
  x = maybe_dropout(t, x, dims, training, rng);
  state.layer0 = lstm_step(t, x, state.layer0, p.at("dec.l0.w_ih"), p.at("dec.l0.w_hh"),
                           p.at("dec.l0.b"), dims.latent);
  NodeId mid = t.layer_norm_last(state.layer0.h);
  mid = maybe_dropout(t, mid, dims, training, rng);
  state.layer1 = lstm_step(t, mid, state.layer1, p.at("dec.l1.w_ih"), p.at("dec.l1.w_hh"),
                           p.at("dec.l1.b"), dims.latent);
  const NodeId top = t.layer_norm_last(state.layer1.h);
  return t.add(t.matmul(top, p.at("out.w")), p.at("out.b"));
}

}  // namespace

double softplus_inverse(double y) { return std::log(std::expm1(y)); }

ParamSet init_params(const Dims& dims, Rng& rng) {
  if (dims.vocab < 4) throw Error("init_params: vocabulary not set");
  ParamSet p;
  const std::size_t d = dims.feature_dim, k = dims.property_dim;
  const std::size_t hid = dims.encoder_hidden, lat = dims.latent;

  // Learnable normalizer starts as the identity for standardized inputs.
  p.add("norm.mu", Array({d}));
  Array sigma_raw({d});
  const double raw = softplus_inverse(1.0 - dims.norm_eps);
  for (double& v : sigma_raw.values()) v = raw;
  p.add("norm.sigma_raw", std::move(sigma_raw));

  p.add("enc.w1", xavier(d, hid, rng));
  p.add("enc.b1", Array({hid}));
  p.add("enc.w2", xavier(hid, hid, rng));
  p.add("enc.b2", Array({hid}));
  p.add("enc.w3", xavier(hid, lat, rng));
  p.add("enc.b3", Array({lat}));

  p.add("task.w", xavier(lat, lat, rng));
  p.add("task.b", Array({lat}));

  p.add("proj.w1", xavier(k, dims.projector_hidden, rng));
  p.add("proj.b1", Array({dims.projector_hidden}));
  p.add("proj.w2", xavier(dims.projector_hidden, lat, rng));
  p.add("proj.b2", Array({lat}));

  p.add("dec.embed", xavier(dims.vocab, lat, rng));
  for (const char* layer : {"dec.l0", "dec.l1"}) {
    p.add(std::string(layer) + ".w_ih", xavier(lat, 4 * lat, rng));
    p.add(std::string(layer) + ".w_hh", xavier(lat, 4 * lat, rng));
    Array b({4 * lat});
    // forget-gate bias starts at 1
    for (std::size_t i = lat; i < 2 * lat; ++i) b[i] = 1.0;
    p.add(std::string(layer) + ".b", std::move(b));
  }

  p.add("out.w", xavier(lat, dims.vocab, rng));
  p.add("out.b", Array({dims.vocab}));
  return p;
}

std::map<std::string, NodeId> bind_params(Tape& t, const ParamSet& params) {
  std::map<std::string, NodeId> nodes;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, arr] = params.entry(i);
    nodes[name] = t.parameter(name, arr);
  }
  return nodes;
}

NodeId normalize_learned(Tape& t, const std::map<std::string, NodeId>& p, const Dims& dims,
                         NodeId x) {
  if (t.value(x).cols() != dims.feature_dim) {
    throw ShapeError("normalize_learned: last dim " +
                     std::to_string(t.value(x).cols()) + " != feature dim " +
                     std::to_string(dims.feature_dim));
  }
  const NodeId sigma = t.add_scalar(t.softplus(p.at("norm.sigma_raw")), dims.norm_eps);
  return t.div(t.sub(x, p.at("norm.mu")), sigma);
}

NodeId task_representation(Tape& t, const std::map<std::string, NodeId>& p, const Dims& dims,
                           NodeId x) {
  const Array& xv = t.value(x);
  if (xv.rank() < 2 || xv.numel() == 0) {
    throw ShapeError("task_representation: empty context");
  }
  const NodeId normed = normalize_learned(t, p, dims, x);
  NodeId h = t.gelu(t.add(t.matmul(normed, p.at("enc.w1")), p.at("enc.b1")));
  h = t.gelu(t.add(t.matmul(h, p.at("enc.w2")), p.at("enc.b2")));
  h = t.add(t.matmul(h, p.at("enc.w3")), p.at("enc.b3"));
  // Aggregate over the context axis: [B x N x latent] -> [B x latent],
  // [N x latent] -> [1 x latent] via axis 0.
  const std::size_t axis = t.value(h).rank() == 3 ? 1 : 0;
  NodeId pooled = t.mean_axis(h, axis);
  if (t.value(pooled).rank() == 1) {
    pooled = t.repeat_rows(pooled, 1);
  }
  const NodeId refined = t.add(t.matmul(pooled, p.at("task.w")), p.at("task.b"));
  return t.layer_norm_last(refined);
}

NodeId forward_logits(Tape& t, const std::map<std::string, NodeId>& p, const Dims& dims,
                      const SequenceBatch& batch, bool training, Rng* dropout_rng) {
  const std::size_t b = batch.inputs.size();
  if (b == 0) throw ShapeError("forward: empty batch");
  const std::size_t l = batch.inputs[0].size();
  if (l < 1) throw ShapeError("forward: sequence length must be >= 1");
  for (const auto& row : batch.inputs) {
    if (row.size() != l) throw ShapeError("forward: ragged input rows");
  }
  if (batch.context.numel() == 0) throw ShapeError("forward: empty context");

  const NodeId context = t.input("", batch.context);
  NodeId task = task_representation(t, p, dims, context);
  if (t.value(task).dim(0) == 1 && b > 1) {
    task = t.repeat_rows(t.mean_axis(task, 0), b);
  }
  NodeId h0 = task;
  if (batch.has_z) {
    const NodeId z = t.input("", batch.z);
    h0 = t.add(h0, project_properties(t, p, z));
  }

  DecodeState state;
  const NodeId c0 = t.constant(Array({b, dims.latent}));
  state.layer0 = {h0, c0};
  state.layer1 = {h0, c0};

  std::vector<NodeId> step_logits;
  step_logits.reserve(l);
  std::vector<int> column(b);
  for (std::size_t pos = 0; pos < l; ++pos) {
    for (std::size_t r = 0; r < b; ++r) column[r] = batch.inputs[r][pos];
    step_logits.push_back(decode_step(t, p, dims, state, column, training, dropout_rng));
  }
  return t.stack_axis1(step_logits);
}

NodeId reconstruction_loss_node(Tape& t, const std::map<std::string, NodeId>& p,
                                const Dims& dims, const SequenceBatch& batch, bool training,
                                Rng* dropout_rng) {
  const NodeId logits = forward_logits(t, p, dims, batch, training, dropout_rng);
  std::vector<int> flat;
  flat.reserve(batch.targets.size() * batch.targets[0].size());
  for (const auto& row : batch.targets) {
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return t.cross_entropy(logits, flat, smiles::Vocabulary::kPad);
}

Array forward(const ParamSet& params, const Dims& dims, const SequenceBatch& batch) {
  Tape t;
  const auto p = bind_params(t, params);
  const NodeId logits = forward_logits(t, p, dims, batch, false, nullptr);
  return t.value(logits);
}

double reconstruction_loss(const ParamSet& params, const Dims& dims,
                           const SequenceBatch& batch) {
  Tape t;
  const auto p = bind_params(t, params);
  return t.value(reconstruction_loss_node(t, p, dims, batch, false, nullptr))[0];
}

GradMap reconstruction_gradients(const ParamSet& params, const Dims& dims,
                                 const SequenceBatch& batch, bool training, Rng* dropout_rng,
                                 double* loss_out) {
  Tape t;
  const auto p = bind_params(t, params);
  const NodeId loss = reconstruction_loss_node(t, p, dims, batch, training, dropout_rng);
  if (loss_out != nullptr) *loss_out = t.value(loss)[0];
  t.backward(loss);
  GradMap grads;
  for (const auto& [name, node] : p) grads.emplace(name, t.gradient(node));
  return grads;
}

std::size_t sample_index(const double* logits, std::size_t n, double temperature, Rng& rng) {
  if (n == 0) throw Error("sample_index: empty distribution");
  if (temperature < 1e-6) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (logits[i] > logits[best]) best = i;
    }
    return best;
  }
  double mx = logits[0] / temperature;
  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = logits[i] / temperature;
    mx = std::max(mx, scaled[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = std::exp(scaled[i] - mx);
    sum += scaled[i];
  }
  const double u = rng.uniform() * sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += scaled[i];
    if (u < acc) return i;
  }
  return n - 1;
}

std::vector<std::string> generate(const ParamSet& params, const Dims& dims,
                                  const smiles::Vocabulary& vocab, const Array& context,
                                  const std::optional<std::vector<double>>& z,
                                  const SamplerConfig& cfg, std::size_t count) {
  if (!cfg.greedy && !(cfg.temperature > 0.0)) {
    throw Error("generate: temperature must be positive (or use greedy mode)");
  }
  if (cfg.max_length < 2) throw Error("generate: max length must be >= 2");
  const double tau = cfg.greedy ? 0.0 : cfg.temperature;
  Rng rng(cfg.seed);
  std::vector<std::string> out;
  out.reserve(count);

  for (std::size_t i = 0; i < count; ++i) {
    Tape t;
    const auto p = bind_params(t, params);
    const NodeId ctx = t.input("", context);
    NodeId h0 = task_representation(t, p, dims, ctx);
    if (z.has_value()) {
      Array zrow({1, dims.property_dim});
      if (z->size() != dims.property_dim) {
        throw ShapeError("generate: property vector size mismatch");
      }
      for (std::size_t j = 0; j < z->size(); ++j) zrow[j] = (*z)[j];
      h0 = t.add(h0, project_properties(t, p, t.input("", zrow)));
    }
    if (cfg.noise_scale > 0.0) {
      Array noise({1, dims.latent});
      for (double& v : noise.values()) v = cfg.noise_scale * rng.normal();
      h0 = t.add(h0, t.constant(noise));
    }
    DecodeState state;
    const NodeId c0 = t.constant(Array({1, dims.latent}));
    state.layer0 = {h0, c0};
    state.layer1 = {h0, c0};

    smiles::TokenSequence seq;
    seq.ids.push_back(smiles::Vocabulary::kStart);
    int current = smiles::Vocabulary::kStart;
    while (seq.ids.size() < cfg.max_length) {
      const NodeId logits = decode_step(t, p, dims, state, {current}, false, nullptr);
      std::vector<double> row = t.value(logits).values();
      // Structural tokens that cannot appear in a surface string.
      row[smiles::Vocabulary::kPad] = -1e30;
      row[smiles::Vocabulary::kStart] = -1e30;
      row[smiles::Vocabulary::kUnk] = -1e30;
      const std::size_t next = sample_index(row.data(), row.size(), tau, rng);
      seq.ids.push_back(static_cast<int>(next));
      if (static_cast<int>(next) == smiles::Vocabulary::kEos) break;
      current = static_cast<int>(next);
    }
    if (seq.ids.back() != smiles::Vocabulary::kEos) {
      seq.ids.push_back(smiles::Vocabulary::kEos);
    }
    out.push_back(smiles::detokenize(seq, vocab));
  }
  return out;
}

}  // namespace mmgn::model
