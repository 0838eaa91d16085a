#include <algorithm>
#include <cmath>

#include "mmgn/model.hpp"
#include "mmgn/optim.hpp"
#include "mmgn/tape.hpp"
#include "mmgn/theory.hpp"

namespace mmgn::theory {

namespace {

constexpr std::size_t kHidden = 128;
constexpr double kLabelNoise = 0.03;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct LinearTask {
  double a = 0.0;
  double b = 0.0;
};

LinearTask sample_task(Rng& rng) { return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}; }

ParamSet cnp_init(Rng& rng) {
  const auto xavier = [&](std::size_t fin, std::size_t fout) {
    Array w({fin, fout});
    const double bound = std::sqrt(6.0 / static_cast<double>(fin + fout));
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    return w;
  };
  ParamSet p;
  p.add("enc.w1", xavier(2, kHidden));
  p.add("enc.b1", Array({kHidden}));
  p.add("enc.w2", xavier(kHidden, kHidden));
  p.add("enc.b2", Array({kHidden}));
  p.add("dec.w1", xavier(1 + kHidden, kHidden));
  p.add("dec.b1", Array({kHidden}));
  p.add("dec.w2", xavier(kHidden, 2));
  p.add("dec.b2", Array({2}));
  return p;
}

struct TaskData {
  Array context;   // n x 2 (x, y)
  Array target_x;  // m x 1
  Array target_y;  // m x 1 (noisy observations)
};

TaskData make_task_data(const LinearTask& task, std::size_t n_ctx, std::size_t n_tgt,
                        Rng& rng) {
  TaskData d;
  d.context = Array({n_ctx, 2});
  for (std::size_t i = 0; i < n_ctx; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    d.context.values()[2 * i] = x;
    d.context.values()[2 * i + 1] = task.a * x + task.b + kLabelNoise * rng.normal();
  }
  d.target_x = Array({n_tgt, 1});
  d.target_y = Array({n_tgt, 1});
  for (std::size_t i = 0; i < n_tgt; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    d.target_x[i] = x;
    d.target_y[i] = task.a * x + task.b + kLabelNoise * rng.normal();
  }
  return d;
}

// Predicted (mu, sigma) per target row.
struct Prediction {
  NodeId mu;
  NodeId sigma;
};

Prediction cnp_predict(Tape& t, const std::map<std::string, NodeId>& p, NodeId context,
                       NodeId target_x, std::size_t n_tgt) {
  NodeId h = t.gelu(t.add(t.matmul(context, p.at("enc.w1")), p.at("enc.b1")));
  h = t.add(t.matmul(h, p.at("enc.w2")), p.at("enc.b2"));
  const NodeId pooled = t.mean_axis(h, 0);          // [hidden]
  const NodeId r = t.repeat_rows(pooled, n_tgt);    // [m x hidden]
  const NodeId dec_in = t.concat_last(target_x, r); // [m x (1 + hidden)]
  NodeId dh = t.gelu(t.add(t.matmul(dec_in, p.at("dec.w1")), p.at("dec.b1")));
  const NodeId out = t.add(t.matmul(dh, p.at("dec.w2")), p.at("dec.b2"));
  const NodeId mu = t.slice_last(out, 0, 1);
  const NodeId sigma = t.add_scalar(t.softplus(t.slice_last(out, 1, 1)), 1e-6);
  return {mu, sigma};
}

NodeId gaussian_nll(Tape& t, const Prediction& pred, NodeId target_y) {
  const NodeId diff = t.sub(target_y, pred.mu);
  const NodeId sq = t.mul(diff, diff);
  const NodeId var2 = t.scale(t.mul(pred.sigma, pred.sigma), 2.0);
  const NodeId per_point = t.add(t.log_op(pred.sigma), t.div(sq, var2));
  return t.add_scalar(t.mean_axis(t.mean_axis(per_point, 0), 0), kHalfLog2Pi);
}

}  // namespace

CheckResult cnp_regression_demo(std::uint64_t seed) {
  CheckResult result;
  result.name = "cnp_regression_demo";
  result.seed = seed;

  Rng init_rng(Rng::derive(seed, 0xC0));
  ParamSet params = cnp_init(init_rng);
  OptimState opt = OptimState::adam(params, 2e-3, 0.0);

  Rng train_rng(Rng::derive(seed, 0xC1));
  const std::size_t steps = 2500, tasks_per_step = 8;
  for (std::size_t step = 0; step < steps; ++step) {
    Tape t;
    const auto p = model::bind_params(t, params);
    std::vector<NodeId> losses;
    for (std::size_t k = 0; k < tasks_per_step; ++k) {
      const LinearTask task = sample_task(train_rng);
      const std::size_t n_ctx = 3 + train_rng.below(8);
      const TaskData data = make_task_data(task, n_ctx, 10, train_rng);
      const NodeId ctx = t.input("", data.context);
      const NodeId tx = t.input("", data.target_x);
      const NodeId ty = t.input("", data.target_y);
      const Prediction pred = cnp_predict(t, p, ctx, tx, 10);
      losses.push_back(gaussian_nll(t, pred, ty));
    }
    NodeId total = losses[0];
    for (std::size_t k = 1; k < losses.size(); ++k) total = t.add(total, losses[k]);
    const NodeId loss = t.scale(total, 1.0 / static_cast<double>(losses.size()));
    t.backward(loss);
    GradMap grads;
    for (const auto& [name, node] : p) grads.emplace(name, t.gradient(node));
    adam_step(opt, params, grads);
  }

  // Held-out evaluation: 5 context points per task.
  Rng eval_rng(Rng::derive(seed, 0xC2));
  const std::size_t eval_tasks = 200, n_tgt = 10;
  double abs_err_clean = 0.0, self_err = 0.0;
  std::size_t covered_noisy = 0, covered_clean = 0, total_points = 0, sigma_positive = 0;
  for (std::size_t e = 0; e < eval_tasks; ++e) {
    const LinearTask task = sample_task(eval_rng);
    TaskData data = make_task_data(task, 5, n_tgt, eval_rng);
    // First target queries a context point itself.
    data.target_x[0] = data.context.values()[0];
    data.target_y[0] = data.context.values()[1];

    Tape t;
    const auto p = model::bind_params(t, params);
    const NodeId ctx = t.input("", data.context);
    const NodeId tx = t.input("", data.target_x);
    const Prediction pred = cnp_predict(t, p, ctx, tx, n_tgt);
    const Array& mu = t.value(pred.mu);
    const Array& sigma = t.value(pred.sigma);

    for (std::size_t i = 0; i < n_tgt; ++i) {
      const double clean = task.a * data.target_x[i] + task.b;
      if (sigma[i] > 0.0) ++sigma_positive;
      if (i == 0) {
        self_err += std::abs(mu[i] - data.target_y[i]);
      }
      abs_err_clean += std::abs(mu[i] - clean);
      if (std::abs(data.target_y[i] - mu[i]) <= 2.0 * sigma[i]) ++covered_noisy;
      if (std::abs(clean - mu[i]) <= 2.0 * sigma[i]) ++covered_clean;
      ++total_points;
    }
  }
  const double mean_abs_err = abs_err_clean / static_cast<double>(total_points);
  const double mean_self_err = self_err / static_cast<double>(eval_tasks);
  const double coverage = static_cast<double>(covered_noisy) / static_cast<double>(total_points);
  result.stats["mean_abs_error"] = mean_abs_err;
  result.stats["self_context_abs_error"] = mean_self_err;
  result.stats["coverage_2sigma"] = coverage;
  result.stats["coverage_2sigma_clean"] =
      static_cast<double>(covered_clean) / static_cast<double>(total_points);
  result.stats["sigma_positive_fraction"] =
      static_cast<double>(sigma_positive) / static_cast<double>(total_points);
  result.note = "coverage measured against held-out noisy observations";
  result.pass = mean_abs_err < 0.1 && mean_self_err < 0.05 && coverage >= 0.85 &&
                coverage <= 0.99 && sigma_positive == total_points;
  return result;
}

}  // namespace mmgn::theory
