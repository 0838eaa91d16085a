#include "mmgn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace mmgn {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluCoeff = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / 3.14159265358979323846);

// b may be: same shape as a, a vector over a's last dim, or a scalar.
enum class BroadcastMode { kSame, kLastDim, kScalar };

BroadcastMode broadcast_mode(const Array& a, const Array& b, const char* op) {
  if (a.same_shape(b)) return BroadcastMode::kSame;
  if (b.numel() == 1) return BroadcastMode::kScalar;
  if (b.rank() == 1 && b.numel() == a.cols()) return BroadcastMode::kLastDim;
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() +
                   " vs " + b.shape_string());
}

double broadcast_at(const Array& b, BroadcastMode mode, std::size_t flat, std::size_t cols) {
  switch (mode) {
    case BroadcastMode::kSame: return b[flat];
    case BroadcastMode::kScalar: return b[0];
    case BroadcastMode::kLastDim: return b[flat % cols];
  }
  return 0.0;
}

// Accumulate `g` at the position of `b` under the given broadcast.
void broadcast_accumulate(Array& db, BroadcastMode mode, std::size_t flat,
                          std::size_t cols, double g) {
  switch (mode) {
    case BroadcastMode::kSame: db[flat] += g; break;
    case BroadcastMode::kScalar: db[0] += g; break;
    case BroadcastMode::kLastDim: db[flat % cols] += g; break;
  }
}

}  // namespace

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "multiply";
    case OpKind::kDiv: return "divide";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kScale: return "scale";
    case OpKind::kGelu: return "gelu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmaxLast: return "softmax";
    case OpKind::kLayerNormLast: return "layer_norm";
    case OpKind::kEmbedding: return "embedding_lookup";
    case OpKind::kConcatLast: return "concat";
    case OpKind::kMeanAxis: return "mean";
    case OpKind::kRepeatRows: return "repeat_rows";
    case OpKind::kSliceLast: return "slice";
    case OpKind::kStackAxis1: return "stack";
    case OpKind::kDropout: return "dropout";
    case OpKind::kCrossEntropy: return "cross_entropy";
  }
  return "?";
}

double gelu_value(double x) {
  const double u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative(double x) {
  const double u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  const double t = std::tanh(u);
  const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

NodeId Tape::input(const std::string& name, Array value) {
  Node n;
  n.op = OpKind::kLeaf;
  n.value = std::move(value);
  n.name = name;
  const NodeId id = record(std::move(n));
  if (!name.empty()) leaf_names_[name] = id;
  return id;
}

NodeId Tape::parameter(const std::string& name, Array value) {
  const NodeId id = input(name, std::move(value));
  nodes_[id].trainable = true;
  params_.push_back(id);
  return id;
}

NodeId Tape::constant(Array value) {
  Node n;
  n.op = OpKind::kLeaf;
  n.value = std::move(value);
  return record(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::kMatMul;
  n.inputs = {a, b};
  return record(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::kAdd;
  n.inputs = {a, b};
  return record(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::kSub;
  n.inputs = {a, b};
  return record(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::kMul;
  n.inputs = {a, b};
  return record(std::move(n));
}

NodeId Tape::div(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::kDiv;
  n.inputs = {a, b};
  return record(std::move(n));
}

NodeId Tape::add_scalar(NodeId a, double c) {
  Node n;
  n.op = OpKind::kAddScalar;
  n.inputs = {a};
  n.scalar = c;
  return record(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
  Node n;
  n.op = OpKind::kScale;
  n.inputs = {a};
  n.scalar = c;
  return record(std::move(n));
}

NodeId Tape::gelu(NodeId a) {
  Node n;
  n.op = OpKind::kGelu;
  n.inputs = {a};
  return record(std::move(n));
}

NodeId Tape::tanh_op(NodeId a) {
  Node n;
  n.op = OpKind::kTanh;
  n.inputs = {a};
  return record(std::move(n));
}

NodeId Tape::sigmoid(NodeId a) {
  Node n;
  n.op = OpKind::kSigmoid;
  n.inputs = {a};
  return record(std::move(n));
}

NodeId Tape::softplus(NodeId a) {
  Node n;
  n.op = OpKind::kSoftplus;
  n.inputs = {a};
  return record(std::move(n));
}

NodeId Tape::log_op(NodeId a) {
  Node n;
  n.op = OpKind::kLog;
  n.inputs = {a};
  return record(std::move(n));
}

NodeId Tape::softmax_last(NodeId a) {
  Node n;
  n.op = OpKind::kSoftmaxLast;
  n.inputs = {a};
  return record(std::move(n));
}

NodeId Tape::layer_norm_last(NodeId a) {
  Node n;
  n.op = OpKind::kLayerNormLast;
  n.inputs = {a};
  return record(std::move(n));
}

NodeId Tape::embedding(NodeId table, const std::vector<int>& ids,
                       const std::vector<std::size_t>& ids_shape) {
  Node n;
  n.op = OpKind::kEmbedding;
  n.inputs = {table};
  n.ids = ids;
  n.ids_shape = ids_shape;
  return record(std::move(n));
}

NodeId Tape::concat_last(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::kConcatLast;
  n.inputs = {a, b};
  return record(std::move(n));
}

NodeId Tape::mean_axis(NodeId a, std::size_t axis) {
  Node n;
  n.op = OpKind::kMeanAxis;
  n.inputs = {a};
  n.s0 = axis;
  return record(std::move(n));
}

NodeId Tape::repeat_rows(NodeId a, std::size_t times) {
  Node n;
  n.op = OpKind::kRepeatRows;
  n.inputs = {a};
  n.s0 = times;
  return record(std::move(n));
}

NodeId Tape::slice_last(NodeId a, std::size_t offset, std::size_t len) {
  Node n;
  n.op = OpKind::kSliceLast;
  n.inputs = {a};
  n.s0 = offset;
  n.s1 = len;
  return record(std::move(n));
}

NodeId Tape::stack_axis1(const std::vector<NodeId>& steps) {
  if (steps.empty()) throw ShapeError("stack: empty input list");
  Node n;
  n.op = OpKind::kStackAxis1;
  n.inputs = steps;
  return record(std::move(n));
}

NodeId Tape::dropout(NodeId a, NodeId mask, double inv_keep) {
  Node n;
  n.op = OpKind::kDropout;
  n.inputs = {a, mask};
  n.scalar = inv_keep;
  return record(std::move(n));
}

NodeId Tape::cross_entropy(NodeId logits, const std::vector<int>& targets, int pad_id) {
  Node n;
  n.op = OpKind::kCrossEntropy;
  n.inputs = {logits};
  n.ids = targets;
  n.pad_id = pad_id;
  return record(std::move(n));
}

NodeId Tape::record(Node n) {
  const NodeId id = static_cast<NodeId>(nodes_.size());
  for (NodeId in : n.inputs) {
    if (in >= id) throw Error("tape: node input id out of order");
  }
  if (n.op != OpKind::kLeaf) eval(n);
  check_finite(n);
  nodes_.push_back(std::move(n));
  return id;
}

void Tape::check_finite(const Node& n) const {
  if (!n.value.all_finite()) {
    throw NonFiniteError(std::string("non-finite output of op '") + op_name(n.op) + "'");
  }
}

void Tape::eval(Node& n) {
  const auto in = [&](std::size_t i) -> const Array& { return nodes_[n.inputs[i]].value; };
  switch (n.op) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul: {
      const Array& a = in(0);
      const Array& b = in(1);
      if (a.rank() < 2 || b.rank() != 2 || a.cols() != b.dim(0)) {
        throw ShapeError(std::string("matmul: incompatible shapes ") + a.shape_string() +
                         " vs " + b.shape_string());
      }
      const std::size_t m = a.rows(), k = a.cols(), p = b.dim(1);
      std::vector<std::size_t> shape(a.shape().begin(), a.shape().end() - 1);
      shape.push_back(p);
      Array c(shape);
      const double* ad = a.data();
      const double* bd = b.data();
      double* cd = c.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ad + i * k;
        double* crow = cd + i * p;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double av = arow[kk];
          if (av == 0.0) continue;
          const double* brow = bd + kk * p;
          for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv: {
      const Array& a = in(0);
      const Array& b = in(1);
      const BroadcastMode mode = broadcast_mode(a, b, op_name(n.op));
      Array c(a.shape());
      const std::size_t cols = a.cols();
      for (std::size_t i = 0; i < a.numel(); ++i) {
        const double bv = broadcast_at(b, mode, i, cols);
        switch (n.op) {
          case OpKind::kAdd: c[i] = a[i] + bv; break;
          case OpKind::kSub: c[i] = a[i] - bv; break;
          case OpKind::kMul: c[i] = a[i] * bv; break;
          default: c[i] = a[i] / bv; break;
        }
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::kAddScalar: {
      Array c = in(0);
      for (double& v : c.values()) v += n.scalar;
      n.value = std::move(c);
      break;
    }
    case OpKind::kScale: {
      Array c = in(0);
      for (double& v : c.values()) v *= n.scalar;
      n.value = std::move(c);
      break;
    }
    case OpKind::kGelu: {
      Array c = in(0);
      for (double& v : c.values()) v = gelu_value(v);
      n.value = std::move(c);
      break;
    }
    case OpKind::kTanh: {
      Array c = in(0);
      for (double& v : c.values()) v = std::tanh(v);
      n.value = std::move(c);
      break;
    }
    case OpKind::kSigmoid: {
      Array c = in(0);
      for (double& v : c.values()) v = 1.0 / (1.0 + std::exp(-v));
      n.value = std::move(c);
      break;
    }
    case OpKind::kSoftplus: {
      Array c = in(0);
      // log(1 + e^x), stable for large |x|.
      for (double& v : c.values()) v = v > 30.0 ? v : std::log1p(std::exp(v));
      n.value = std::move(c);
      break;
    }
    case OpKind::kLog: {
      Array c = in(0);
      for (double& v : c.values()) v = std::log(v);
      n.value = std::move(c);
      break;
    }
    case OpKind::kSoftmaxLast: {
      const Array& a = in(0);
      Array c(a.shape());
      const std::size_t rows = a.rows(), cols = a.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data() + r * cols;
        double* y = c.data() + r * cols;
        double mx = x[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          y[j] = std::exp(x[j] - mx);
          sum += y[j];
        }
        for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::kLayerNormLast: {
      const Array& a = in(0);
      Array c(a.shape());
      const std::size_t rows = a.rows(), cols = a.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data() + r * cols;
        double* y = c.data() + r * cols;
        double mean = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mean += x[j];
        mean /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t j = 0; j < cols; ++j) y[j] = (x[j] - mean) * inv;
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::kEmbedding: {
      const Array& table = in(0);
      if (table.rank() != 2) throw ShapeError("embedding_lookup: table must be rank 2");
      const std::size_t v = table.dim(0), e = table.dim(1);
      std::vector<std::size_t> shape = n.ids_shape;
      shape.push_back(e);
      Array c(shape);
      for (std::size_t i = 0; i < n.ids.size(); ++i) {
        const int id = n.ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= v) {
          throw ShapeError("embedding_lookup: id " + std::to_string(id) + " out of range");
        }
        std::copy_n(table.data() + static_cast<std::size_t>(id) * e, e, c.data() + i * e);
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::kConcatLast: {
      const Array& a = in(0);
      const Array& b = in(1);
      if (a.rows() != b.rows()) {
        throw ShapeError(std::string("concat: row mismatch ") + a.shape_string() + " vs " +
                         b.shape_string());
      }
      const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols();
      std::vector<std::size_t> shape = a.shape();
      shape.back() = ca + cb;
      Array c(shape);
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a.data() + r * ca, ca, c.data() + r * (ca + cb));
        std::copy_n(b.data() + r * cb, cb, c.data() + r * (ca + cb) + ca);
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::kMeanAxis: {
      const Array& a = in(0);
      const std::size_t axis = n.s0;
      if (axis >= a.rank()) throw ShapeError("mean: axis out of range");
      std::size_t outer = 1, inner = 1;
      for (std::size_t i = 0; i < axis; ++i) outer *= a.dim(i);
      for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
      const std::size_t len = a.dim(axis);
      std::vector<std::size_t> shape;
      for (std::size_t i = 0; i < a.rank(); ++i) {
        if (i != axis) shape.push_back(a.dim(i));
      }
      if (shape.empty()) shape.push_back(1);
      Array c(shape);
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t l = 0; l < len; ++l) {
          const double* src = a.data() + (o * len + l) * inner;
          double* dst = c.data() + o * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
      }
      for (double& v : c.values()) v /= static_cast<double>(len);
      n.value = std::move(c);
      break;
    }
    case OpKind::kRepeatRows: {
      const Array& a = in(0);
      const std::size_t cols = a.numel();
      Array c({n.s0, cols});
      for (std::size_t r = 0; r < n.s0; ++r) std::copy_n(a.data(), cols, c.data() + r * cols);
      n.value = std::move(c);
      break;
    }
    case OpKind::kSliceLast: {
      const Array& a = in(0);
      if (n.s0 + n.s1 > a.cols()) throw ShapeError("slice: range exceeds last dim");
      const std::size_t rows = a.rows(), cols = a.cols();
      std::vector<std::size_t> shape = a.shape();
      shape.back() = n.s1;
      Array c(shape);
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a.data() + r * cols + n.s0, n.s1, c.data() + r * n.s1);
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::kStackAxis1: {
      const Array& first = in(0);
      if (first.rank() != 2) throw ShapeError("stack: steps must be rank 2");
      const std::size_t b = first.dim(0), v = first.dim(1), l = n.inputs.size();
      Array c({b, l, v});
      for (std::size_t t = 0; t < l; ++t) {
        const Array& step = in(t);
        if (!step.same_shape(first)) throw ShapeError("stack: step shape mismatch");
        for (std::size_t r = 0; r < b; ++r) {
          std::copy_n(step.data() + r * v, v, c.data() + (r * l + t) * v);
        }
      }
      n.value = std::move(c);
      break;
    }
    case OpKind::kDropout: {
      const Array& a = in(0);
      const Array& mask = in(1);
      if (!a.same_shape(mask)) throw ShapeError("dropout: mask shape mismatch");
      Array c(a.shape());
      for (std::size_t i = 0; i < a.numel(); ++i) c[i] = a[i] * mask[i] * n.scalar;
      n.value = std::move(c);
      break;
    }
    case OpKind::kCrossEntropy: {
      const Array& logits = in(0);
      const std::size_t cols = logits.cols(), rows = logits.rows();
      if (n.ids.size() != rows) {
        throw ShapeError("cross_entropy: " + std::to_string(n.ids.size()) +
                         " targets for " + std::to_string(rows) + " positions");
      }
      double total = 0.0;
      std::size_t counted = 0;
      for (std::size_t r = 0; r < rows; ++r) {
        const int target = n.ids[r];
        if (target == n.pad_id) continue;
        if (target < 0 || static_cast<std::size_t>(target) >= cols) {
          throw ShapeError("cross_entropy: target id out of range");
        }
        const double* x = logits.data() + r * cols;
        double mx = x[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < cols; ++j) lse += std::exp(x[j] - mx);
        total += std::log(lse) + mx - x[static_cast<std::size_t>(target)];
        ++counted;
      }
      if (counted == 0) throw Error("cross_entropy: all positions are padding");
      n.value = Array::scalar(total / static_cast<double>(counted));
      break;
    }
  }
}

void Tape::forward(const std::map<std::string, Array>& bindings) {
  for (const auto& [name, arr] : bindings) {
    auto it = leaf_names_.find(name);
    if (it == leaf_names_.end()) throw Error("forward: no leaf named '" + name + "'");
    Node& leaf = nodes_[it->second];
    if (!leaf.value.same_shape(arr)) {
      throw ShapeError("forward: leaf '" + name + "' expects " + leaf.value.shape_string() +
                       ", got " + arr.shape_string());
    }
    leaf.value = arr;
  }
  for (Node& n : nodes_) {
    if (n.op != OpKind::kLeaf) eval(n);
    check_finite(n);
  }
}

Array& Tape::grad_buffer(NodeId id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Array(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

Array Tape::gradient(NodeId id) const {
  const Node& n = nodes_.at(id);
  if (!n.has_grad) return Array(n.value.shape());
  return n.grad;
}

void Tape::backward(NodeId loss) {
  if (loss >= nodes_.size()) throw Error("backward: unknown node");
  if (nodes_[loss].value.numel() != 1) {
    throw Error("backward: loss must be scalar, got shape " +
                nodes_[loss].value.shape_string());
  }
  for (Node& n : nodes_) n.has_grad = false;
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || n.op == OpKind::kLeaf) continue;
    eval_backward(n);
  }
}

void Tape::eval_backward(Node& n) {
  const Array& g = n.grad;
  const auto in_val = [&](std::size_t i) -> const Array& { return nodes_[n.inputs[i]].value; };
  const auto in_grad = [&](std::size_t i) -> Array& { return grad_buffer(n.inputs[i]); };
  switch (n.op) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul: {
      const Array& a = in_val(0);
      const Array& b = in_val(1);
      Array& da = in_grad(0);
      Array& db = in_grad(1);
      const std::size_t m = a.rows(), k = a.cols(), p = b.dim(1);
      const double* ad = a.data();
      const double* bd = b.data();
      const double* gd = g.data();
      double* dad = da.data();
      double* dbd = db.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = gd + i * p;
        const double* arow = ad + i * k;
        double* darow = dad + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double* brow = bd + kk * p;
          double s = 0.0;
          for (std::size_t j = 0; j < p; ++j) s += grow[j] * brow[j];
          darow[kk] += s;
          const double av = arow[kk];
          if (av != 0.0) {
            double* dbrow = dbd + kk * p;
            for (std::size_t j = 0; j < p; ++j) dbrow[j] += av * grow[j];
          }
        }
      }
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      const Array& a = in_val(0);
      const Array& b = in_val(1);
      const BroadcastMode mode = broadcast_mode(a, b, op_name(n.op));
      Array& da = in_grad(0);
      Array& db = in_grad(1);
      const double sign = n.op == OpKind::kAdd ? 1.0 : -1.0;
      const std::size_t cols = a.cols();
      for (std::size_t i = 0; i < a.numel(); ++i) {
        da[i] += g[i];
        broadcast_accumulate(db, mode, i, cols, sign * g[i]);
      }
      break;
    }
    case OpKind::kMul: {
      const Array& a = in_val(0);
      const Array& b = in_val(1);
      const BroadcastMode mode = broadcast_mode(a, b, "multiply");
      Array& da = in_grad(0);
      Array& db = in_grad(1);
      const std::size_t cols = a.cols();
      for (std::size_t i = 0; i < a.numel(); ++i) {
        da[i] += g[i] * broadcast_at(b, mode, i, cols);
        broadcast_accumulate(db, mode, i, cols, g[i] * a[i]);
      }
      break;
    }
    case OpKind::kDiv: {
      const Array& a = in_val(0);
      const Array& b = in_val(1);
      const BroadcastMode mode = broadcast_mode(a, b, "divide");
      Array& da = in_grad(0);
      Array& db = in_grad(1);
      const std::size_t cols = a.cols();
      for (std::size_t i = 0; i < a.numel(); ++i) {
        const double bv = broadcast_at(b, mode, i, cols);
        da[i] += g[i] / bv;
        broadcast_accumulate(db, mode, i, cols, -g[i] * a[i] / (bv * bv));
      }
      break;
    }
    case OpKind::kAddScalar: {
      Array& da = in_grad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i];
      break;
    }
    case OpKind::kScale: {
      Array& da = in_grad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) da[i] += n.scalar * g[i];
      break;
    }
    case OpKind::kGelu: {
      const Array& a = in_val(0);
      Array& da = in_grad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * gelu_derivative(a[i]);
      break;
    }
    case OpKind::kTanh: {
      Array& da = in_grad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        da[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      }
      break;
    }
    case OpKind::kSigmoid: {
      Array& da = in_grad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        da[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      }
      break;
    }
    case OpKind::kSoftplus: {
      const Array& a = in_val(0);
      Array& da = in_grad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        da[i] += g[i] / (1.0 + std::exp(-a[i]));
      }
      break;
    }
    case OpKind::kLog: {
      const Array& a = in_val(0);
      Array& da = in_grad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] / a[i];
      break;
    }
    case OpKind::kSoftmaxLast: {
      Array& da = in_grad(0);
      const std::size_t rows = n.value.rows(), cols = n.value.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = n.value.data() + r * cols;
        const double* gy = g.data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += gy[j] * y[j];
        double* dx = da.data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j) dx[j] += y[j] * (gy[j] - dot);
      }
      break;
    }
    case OpKind::kLayerNormLast: {
      const Array& a = in_val(0);
      Array& da = in_grad(0);
      const std::size_t rows = a.rows(), cols = a.cols();
      const double nd = static_cast<double>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data() + r * cols;
        const double* y = n.value.data() + r * cols;
        const double* gy = g.data() + r * cols;
        double mean = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mean += x[j];
        mean /= nd;
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= nd;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        double gmean = 0.0, gymean = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          gmean += gy[j];
          gymean += gy[j] * y[j];
        }
        gmean /= nd;
        gymean /= nd;
        double* dx = da.data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j) {
          dx[j] += inv * (gy[j] - gmean - y[j] * gymean);
        }
      }
      break;
    }
    case OpKind::kEmbedding: {
      const Array& table = in_val(0);
      Array& dt = in_grad(0);
      const std::size_t e = table.dim(1);
      for (std::size_t i = 0; i < n.ids.size(); ++i) {
        const double* src = g.data() + i * e;
        double* dst = dt.data() + static_cast<std::size_t>(n.ids[i]) * e;
        for (std::size_t j = 0; j < e; ++j) dst[j] += src[j];
      }
      break;
    }
    case OpKind::kConcatLast: {
      const Array& a = in_val(0);
      const Array& b = in_val(1);
      Array& da = in_grad(0);
      Array& db = in_grad(1);
      const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = g.data() + r * (ca + cb);
        double* dsta = da.data() + r * ca;
        double* dstb = db.data() + r * cb;
        for (std::size_t j = 0; j < ca; ++j) dsta[j] += src[j];
        for (std::size_t j = 0; j < cb; ++j) dstb[j] += src[ca + j];
      }
      break;
    }
    case OpKind::kMeanAxis: {
      const Array& a = in_val(0);
      Array& da = in_grad(0);
      const std::size_t axis = n.s0;
      std::size_t outer = 1, inner = 1;
      for (std::size_t i = 0; i < axis; ++i) outer *= a.dim(i);
      for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
      const std::size_t len = a.dim(axis);
      const double scale = 1.0 / static_cast<double>(len);
      for (std::size_t o = 0; o < outer; ++o) {
        const double* src = g.data() + o * inner;
        for (std::size_t l = 0; l < len; ++l) {
          double* dst = da.data() + (o * len + l) * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i] * scale;
        }
      }
      break;
    }
    case OpKind::kRepeatRows: {
      Array& da = in_grad(0);
      const std::size_t cols = da.numel();
      for (std::size_t r = 0; r < n.s0; ++r) {
        const double* src = g.data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j) da[j] += src[j];
      }
      break;
    }
    case OpKind::kSliceLast: {
      const Array& a = in_val(0);
      Array& da = in_grad(0);
      const std::size_t rows = a.rows(), cols = a.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = g.data() + r * n.s1;
        double* dst = da.data() + r * cols + n.s0;
        for (std::size_t j = 0; j < n.s1; ++j) dst[j] += src[j];
      }
      break;
    }
    case OpKind::kStackAxis1: {
      const std::size_t b = n.value.dim(0), l = n.value.dim(1), v = n.value.dim(2);
      for (std::size_t t = 0; t < l; ++t) {
        Array& dstep = in_grad(t);
        for (std::size_t r = 0; r < b; ++r) {
          const double* src = g.data() + (r * l + t) * v;
          double* dst = dstep.data() + r * v;
          for (std::size_t j = 0; j < v; ++j) dst[j] += src[j];
        }
      }
      break;
    }
    case OpKind::kDropout: {
      const Array& mask = in_val(1);
      Array& da = in_grad(0);
      for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * mask[i] * n.scalar;
      break;
    }
    case OpKind::kCrossEntropy: {
      const Array& logits = in_val(0);
      Array& dl = in_grad(0);
      const std::size_t cols = logits.cols(), rows = logits.rows();
      std::size_t counted = 0;
      for (std::size_t r = 0; r < rows; ++r) {
        if (n.ids[r] != n.pad_id) ++counted;
      }
      const double upstream = g[0] / static_cast<double>(counted);
      for (std::size_t r = 0; r < rows; ++r) {
        const int target = n.ids[r];
        if (target == n.pad_id) continue;
        const double* x = logits.data() + r * cols;
        double* dx = dl.data() + r * cols;
        double mx = x[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < cols; ++j) lse += std::exp(x[j] - mx);
        for (std::size_t j = 0; j < cols; ++j) {
          const double p = std::exp(x[j] - mx) / lse;
          dx[j] += upstream * (p - (static_cast<int>(j) == target ? 1.0 : 0.0));
        }
      }
      break;
    }
  }
}

}  // namespace mmgn
