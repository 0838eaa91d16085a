#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmgn/array.hpp"
#include "mmgn/error.hpp"

namespace mmgn {

using NodeId = std::uint32_t;

enum class OpKind {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAddScalar,
  kScale,
  kGelu,
  kTanh,
  kSigmoid,
  kSoftplus,
  kLog,
  kSoftmaxLast,
  kLayerNormLast,
  kEmbedding,
  kConcatLast,
  kMeanAxis,
  kRepeatRows,
  kSliceLast,
  kStackAxis1,
  kDropout,
  kCrossEntropy,
};

const char* op_name(OpKind k);

struct Node {
  OpKind op = OpKind::kLeaf;
  std::vector<NodeId> inputs;
  Array value;
  Array grad;
  bool has_grad = false;

  double scalar = 0.0;           // AddScalar / Scale constant, Dropout inverse keep
  std::size_t s0 = 0, s1 = 0;    // axis / offset / length / repeat count
  std::vector<int> ids;          // Embedding ids, CrossEntropy targets
  std::vector<std::size_t> ids_shape;
  int pad_id = -1;

  std::string name;              // leaf name ("" for constants)
  bool trainable = false;
};

// Reverse-mode tape. Ops evaluate eagerly when recorded; `forward` rebinds
// named leaves and re-evaluates the whole tape in recording order, so one
// recorded program can be run on fresh inputs. Single-threaded by contract.
class Tape {
 public:
  // --- leaves ---
  NodeId input(const std::string& name, Array value);
  NodeId parameter(const std::string& name, Array value);
  NodeId constant(Array value);

  // --- primitive ops ---
  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId add_scalar(NodeId a, double c);
  NodeId scale(NodeId a, double c);
  NodeId gelu(NodeId a);
  NodeId tanh_op(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId softplus(NodeId a);
  NodeId log_op(NodeId a);
  NodeId softmax_last(NodeId a);
  NodeId layer_norm_last(NodeId a);
  NodeId embedding(NodeId table, const std::vector<int>& ids,
                   const std::vector<std::size_t>& ids_shape);
  NodeId concat_last(NodeId a, NodeId b);
  NodeId mean_axis(NodeId a, std::size_t axis);
  NodeId repeat_rows(NodeId a, std::size_t times);
  NodeId slice_last(NodeId a, std::size_t offset, std::size_t len);
  NodeId stack_axis1(const std::vector<NodeId>& steps);
  NodeId dropout(NodeId a, NodeId mask, double inv_keep);
  // Mean negative log-likelihood of target tokens over non-pad positions.
  // logits: [B x L x V] (or [N x V]); targets: row-major token ids.
  NodeId cross_entropy(NodeId logits, const std::vector<int>& targets, int pad_id);

  // Rebind named leaves and re-evaluate every node in recording order.
  // Returns nothing; read results through value().
  void forward(const std::map<std::string, Array>& bindings);

  // Accumulate gradients of a scalar loss into every node; loss must be a
  // 1-element output of the current forward values.
  void backward(NodeId loss);

  const Array& value(NodeId id) const { return nodes_.at(id).value; }
  // Gradient of the last backward() w.r.t. node `id`; zeros if the node did
  // not participate in the loss.
  Array gradient(NodeId id) const;

  const std::vector<NodeId>& parameters() const { return params_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }

 private:
  NodeId record(Node n);
  void eval(Node& n);
  void eval_backward(Node& n);
  Array& grad_buffer(NodeId id);
  void check_finite(const Node& n) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> params_;
  std::map<std::string, NodeId> leaf_names_;
};

// Elementwise kernels shared by tape and tests.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace mmgn
