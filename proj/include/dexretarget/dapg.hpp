// Copyright 2026 The dexretarget Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Demo augmented policy gradient on the toy relocate environment.

#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dexretarget/demopipe.hpp"
#include "dexretarget/mlp.hpp"
#include "dexretarget/toy_env.hpp"

namespace dexretarget {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// splitmix64 finalizer over a combination of the inputs.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xC2B2AE3D27D4EB4FULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Diagonal Gaussian with an MLP mean and a state-independent log-std.
/// Parameter vector: [mlp params, log_std].
class GaussianMlpPolicy {
 public:
  GaussianMlpPolicy(int state_dim, int action_dim, int hidden = 32)
      : net_({state_dim, hidden, hidden, action_dim}), theta_(VecX::Zero(net_.num_params() + action_dim)) {}

  void init(std::mt19937_64& rng, double initial_log_std = -0.7, double out_scale = 0.01) {
    theta_.head(net_.num_params()) = net_.init_params(rng, out_scale);
    theta_.tail(action_dim()).setConstant(initial_log_std);
    clamp_log_std();
  }

  int state_dim() const { return net_.input_dim(); }
  int action_dim() const { return net_.output_dim(); }
  int num_params() const { return static_cast<int>(theta_.size()); }
  const VecX& params() const { return theta_; }
  VecX& mutable_params() { return theta_; }
  void set_params(const VecX& p) {
    require_size(p.size(), num_params(), "policy params");
    theta_ = p;
  }
  VecX log_std() const { return theta_.tail(action_dim()); }
  void clamp_log_std() { theta_.tail(action_dim()) = theta_.tail(action_dim()).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax); }

  MatX mean(const MatX& s) const { return net_.forward(theta_.head(net_.num_params()), s); }

  MatX sample(const MatX& s, std::span<std::mt19937_64> rngs) const {
    MatX a = mean(s);
    const VecX sd = log_std().array().exp();
    std::normal_distribution<double> n01(0.0, 1.0);
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) += sd[r] * n01(rngs[static_cast<size_t>(c)]);
    return a;
  }

  VecX log_prob(const MatX& s, const MatX& a) const {
    require_size(a.rows(), action_dim(), "policy action");
    require_size(a.cols(), s.cols(), "policy batch");
    const MatX mu = mean(s);
    const VecX ls = log_std();
    const VecX inv = (-ls).array().exp();
    const double c = 0.5 * std::log(2.0 * std::numbers::pi);
    VecX out(s.cols());
    for (Eigen::Index i = 0; i < s.cols(); ++i) {
      const VecX z = (a.col(i) - mu.col(i)).cwiseProduct(inv);
      out[i] = -0.5 * z.squaredNorm() - ls.sum() - c * static_cast<double>(action_dim());
    }
    return out;
  }

  /// Sum over samples of w_i * grad log pi(a_i | s_i).
  VecX log_prob_grad_sum(const MatX& s, const MatX& a, const VecX& w) const {
    require_size(s.rows(), state_dim(), "policy state");
    require_size(a.rows(), action_dim(), "policy action");
    require_size(a.cols(), s.cols(), "policy batch");
    require_size(w.size(), s.cols(), "policy weights");
    const int np = net_.num_params();
    Mlp::Cache cache;
    const MatX mu = net_.forward(theta_.head(np), s, &cache);
    const VecX ls = log_std();
    const VecX var_inv = (-2.0 * ls).array().exp();
    MatX diff = a - mu;
    VecX g = VecX::Zero(num_params());
    // d log pi / d mu = (a - mu) / sigma^2
    MatX d_mu = var_inv.asDiagonal() * diff;
    d_mu = d_mu * w.asDiagonal();
    net_.backward(theta_.head(np), cache, d_mu, g.head(np));
    // d log pi / d log_std = z^2 - 1
    const MatX z2 = var_inv.asDiagonal() * diff.cwiseAbs2();
    g.tail(action_dim()) = (z2.array() - 1.0).matrix() * w;
    return g;
  }

 private:
  Mlp net_;
  VecX theta_;
};

/// Scalar-mean Gaussian with mean theta_0 * s and log-std theta_1; used to
/// check gradient assembly against finite differences.
class LinearGaussianPolicy {
 public:
  explicit LinearGaussianPolicy(Eigen::Vector2d theta) : theta_(theta) {}
  int num_params() const { return 2; }
  VecX params() const { return theta_; }

  VecX log_prob(const MatX& s, const MatX& a) const {
    VecX out(s.cols());
    for (Eigen::Index i = 0; i < s.cols(); ++i) {
      const double z = (a(0, i) - theta_[0] * s(0, i)) * std::exp(-theta_[1]);
      out[i] = -0.5 * z * z - theta_[1] - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return out;
  }

  VecX log_prob_grad_sum(const MatX& s, const MatX& a, const VecX& w) const {
    VecX g = VecX::Zero(2);
    const double inv_var = std::exp(-2.0 * theta_[1]);
    for (Eigen::Index i = 0; i < s.cols(); ++i) {
      const double d = a(0, i) - theta_[0] * s(0, i);
      g[0] += w[i] * d * s(0, i) * inv_var;
      g[1] += w[i] * (d * d * inv_var - 1.0);
    }
    return g;
  }

 private:
  Eigen::Vector2d theta_;
};

/// State-value MLP; targets are standardized internally.
class ValueFunction {
 public:
  ValueFunction(int input_dim, int hidden = 32) : net_({input_dim, hidden, hidden, 1}), theta_(VecX::Zero(net_.num_params())) {}

  void init(std::mt19937_64& rng) { theta_ = net_.init_params(rng, 0.1); }

  int input_dim() const { return net_.input_dim(); }
  const VecX& params() const { return theta_; }

  VecX predict(const MatX& x) const {
    const MatX y = net_.forward(theta_, x);
    return (y.row(0).transpose().array() * scale_ + offset_).matrix();
  }

  /// Minibatch Adam regression on (x, targets); returns the final mean squared error.
  double fit(const MatX& x, const VecX& targets, int epochs, std::mt19937_64& rng, double lr = 1e-3, int minibatch = 64) {
    require_size(x.cols(), targets.size(), "value targets");
    if (targets.size() == 0) throw DataError("value fit: empty batch");
    offset_ = targets.mean();
    const double sd = std::sqrt((targets.array() - offset_).square().mean());
    scale_ = sd > 1e-8 ? sd : 1.0;
    const VecX y = (targets.array() - offset_) / scale_;
    if (!adam_) adam_.emplace(net_.num_params(), lr);
    std::vector<Eigen::Index> idx(static_cast<size_t>(x.cols()));
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
    Mlp::Cache cache;
    VecX grad(net_.num_params());
    for (int e = 0; e < epochs; ++e) {
      std::shuffle(idx.begin(), idx.end(), rng);
      for (size_t b = 0; b < idx.size(); b += static_cast<size_t>(minibatch)) {
        const size_t m = std::min(idx.size() - b, static_cast<size_t>(minibatch));
        MatX xb(x.rows(), static_cast<Eigen::Index>(m));
        RowVecX yb(static_cast<Eigen::Index>(m));
        for (size_t j = 0; j < m; ++j) {
          xb.col(static_cast<Eigen::Index>(j)) = x.col(idx[b + j]);
          yb[static_cast<Eigen::Index>(j)] = y[idx[b + j]];
        }
        const MatX out = net_.forward(theta_, xb, &cache);
        const MatX d = (2.0 / static_cast<double>(m)) * (out.row(0) - yb);
        grad.setZero();
        net_.backward(theta_, cache, d, grad);
        adam_->step(theta_, grad);
      }
    }
    const VecX r = predict(x) - targets;
    return r.squaredNorm() / static_cast<double>(r.size());
  }

 private:
  using RowVecX = Eigen::RowVectorXd;
  Mlp net_;
  VecX theta_;
  double offset_ = 0.0;
  double scale_ = 1.0;
  std::optional<Adam> adam_;
};

struct Trajectory {
  std::vector<VecX> states;   // one per action
  std::vector<VecX> actions;
  std::vector<double> rewards;
  bool success = false;
};

/// Discounted reward-to-go for each step.
inline std::vector<double> discounted_returns(const std::vector<double>& rewards, double discount) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + discount * acc;
    g[i] = acc;
  }
  return g;
}

/// Value-function input: the state plus the elapsed fraction of the episode.
inline MatX value_features(const std::vector<Trajectory>& trajs, int horizon) {
  size_t n = 0;
  for (const auto& t : trajs) n += t.states.size();
  if (n == 0) throw DataError("value features: empty batch");
  const Eigen::Index d = trajs.front().states.front().size();
  MatX x(d + 1, static_cast<Eigen::Index>(n));
  Eigen::Index c = 0;
  for (const auto& t : trajs)
    for (size_t i = 0; i < t.states.size(); ++i, ++c) {
      x.col(c).head(d) = t.states[i];
      x(d, c) = static_cast<double>(i) / static_cast<double>(horizon);
    }
  return x;
}

/// Monte-Carlo advantages: discounted return minus the value prediction.
/// `values` may be empty (zero baseline). Returns the stacked advantages and
/// fills `returns` with the stacked discounted returns.
inline VecX compute_advantages(const std::vector<Trajectory>& trajs, const VecX& values, double discount,
                               VecX* returns = nullptr) {
  if (trajs.empty()) throw DataError("compute_advantages: empty batch");
  if (!(discount >= 0.0 && discount <= 1.0)) throw DataError("compute_advantages: discount must be in [0, 1]");
  size_t n = 0;
  for (const auto& t : trajs) {
    if (t.rewards.size() != t.states.size()) throw DimensionError("compute_advantages: rewards and states differ in length");
    n += t.rewards.size();
  }
  if (n == 0) throw DataError("compute_advantages: empty batch");
  if (values.size() != 0) require_size(values.size(), static_cast<Eigen::Index>(n), "value predictions");
  VecX g(static_cast<Eigen::Index>(n));
  Eigen::Index c = 0;
  for (const auto& t : trajs)
    for (double r : discounted_returns(t.rewards, discount)) g[c++] = r;
  if (returns) *returns = g;
  return values.size() == 0 ? g : VecX(g - values);
}

/// Demo-term coefficient lambda0 * lambda1^k * max advantage. The decay is
/// applied by repeated multiplication so consecutive iterations differ by
/// exactly one factor of lambda1. With `clamp` a negative max gives 0.
inline double demo_weight(double lambda0, double lambda1, int k, double max_advantage, bool clamp = true) {
  if (k < 0) throw DataError("demo_weight: iteration must be >= 0");
  double w = lambda0 * (clamp ? std::max(max_advantage, 0.0) : max_advantage);
  for (int i = 0; i < k; ++i) w *= lambda1;
  return w;
}

struct SampleSet {
  MatX states;   // state_dim x n
  MatX actions;  // action_dim x n
};

inline SampleSet stack_samples(const std::vector<Trajectory>& trajs) {
  size_t n = 0;
  for (const auto& t : trajs) n += t.states.size();
  if (n == 0) throw DataError("stack_samples: empty batch");
  SampleSet out;
  out.states.resize(trajs.front().states.front().size(), static_cast<Eigen::Index>(n));
  out.actions.resize(trajs.front().actions.front().size(), static_cast<Eigen::Index>(n));
  Eigen::Index c = 0;
  for (const auto& t : trajs)
    for (size_t i = 0; i < t.states.size(); ++i, ++c) {
      out.states.col(c) = t.states[i];
      out.actions.col(c) = t.actions[i];
    }
  return out;
}

/// State-action pairs of demonstrations (the final state has no action).
inline SampleSet demo_samples(std::span<const Demonstration> demos) {
  size_t n = 0;
  for (const auto& d : demos) n += d.actions.size();
  SampleSet out;
  if (n == 0) return out;
  out.states.resize(demos.front().states.front().size(), static_cast<Eigen::Index>(n));
  out.actions.resize(demos.front().actions.front().size(), static_cast<Eigen::Index>(n));
  Eigen::Index c = 0;
  for (const auto& d : demos) {
    if (d.states.front().size() != out.states.rows() || d.actions.front().size() != out.actions.rows())
      throw DimensionError("demo samples: inconsistent dimensions across demonstrations");
    for (size_t i = 0; i < d.actions.size(); ++i, ++c) {
      out.states.col(c) = d.states[i];
      out.actions.col(c) = d.actions[i];
    }
  }
  return out;
}

/// Augmented gradient: sum_batch grad log pi * A + w_k * sum_demo grad log pi.
template <class Policy>
VecX dapg_gradient(const Policy& policy, const SampleSet& batch, const VecX& advantages, const SampleSet& demos,
                   double lambda0, double lambda1, int k, bool clamp = true, double* weight_out = nullptr) {
  require_size(advantages.size(), batch.states.cols(), "advantages");
  if (advantages.size() == 0) throw DataError("dapg_gradient: empty batch");
  VecX g = policy.log_prob_grad_sum(batch.states, batch.actions, advantages);
  const double w = demos.states.cols() > 0 ? demo_weight(lambda0, lambda1, k, advantages.maxCoeff(), clamp) : 0.0;
  if (weight_out) *weight_out = w;
  if (w != 0.0) {
    if (demos.states.rows() != batch.states.rows() || demos.actions.rows() != batch.actions.rows())
      throw DimensionError("dapg_gradient: demonstrations and batch differ in state/action dimensions");
    g += w * policy.log_prob_grad_sum(demos.states, demos.actions, VecX::Ones(demos.states.cols()));
  }
  return g;
}

struct DapgConfig {
  double lambda0 = 0.1;
  double lambda1 = 0.99;
  double learning_rate = 3e-3;
  int batch_trajectories = 200;
  int iterations = 150;
  double discount = 0.99;
  std::uint64_t seed = 0;
  int bc_epochs = 50;
  double bc_learning_rate = 1e-3;
  int bc_minibatch = 64;
  int value_epochs = 2;
  double initial_log_std = -0.7;
  bool clamp_demo_weight = true;
  int checkpoint_every = 0;  // 0 disables checkpoints

  void validate() const {
    if (!(lambda0 >= 0.0 && lambda0 <= 1.0)) throw DataError("dapg config: lambda0 must be in [0, 1]");
    if (!(lambda1 >= 0.0 && lambda1 < 1.0)) throw DataError("dapg config: lambda1 must be in [0, 1)");
    if (!(learning_rate > 0.0)) throw DataError("dapg config: learning rate must be > 0");
    if (batch_trajectories <= 0) throw DataError("dapg config: batch size must be > 0");
    if (iterations < 0) throw DataError("dapg config: iterations must be >= 0");
    if (!(discount >= 0.0 && discount <= 1.0)) throw DataError("dapg config: discount must be in [0, 1]");
    if (bc_epochs < 0 || bc_minibatch <= 0 || value_epochs < 0 || checkpoint_every < 0)
      throw DataError("dapg config: negative epoch or cadence setting");
  }

  Json to_json() const {
    return Json{{"lambda0", lambda0},       {"lambda1", lambda1},
                {"learning_rate", learning_rate}, {"batch_trajectories", batch_trajectories},
                {"iterations", iterations}, {"discount", discount},
                {"seed", seed},             {"bc_epochs", bc_epochs},
                {"bc_learning_rate", bc_learning_rate}, {"bc_minibatch", bc_minibatch},
                {"value_epochs", value_epochs}, {"initial_log_std", initial_log_std},
                {"clamp_demo_weight", clamp_demo_weight}, {"checkpoint_every", checkpoint_every}};
  }

  static DapgConfig from_json(const Json& j) {
    if (!j.is_object()) throw DataError("dapg config: expected a JSON object");
    DapgConfig c;
    auto num = [&](const char* key, auto& field) {
      if (!j.contains(key)) return;
      if (!j.at(key).is_number()) throw DataError(std::string("dapg config: '") + key + "' must be a number");
      field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
      static const char* known[] = {"lambda0",      "lambda1",          "learning_rate", "batch_trajectories",
                                    "iterations",   "discount",         "seed",          "bc_epochs",
                                    "bc_learning_rate", "bc_minibatch", "value_epochs",  "initial_log_std",
                                    "clamp_demo_weight", "checkpoint_every"};
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return it.key() == k; }) == std::end(known))
        throw DataError("dapg config: unknown key '" + it.key() + "'");
    }
    num("lambda0", c.lambda0);
    num("lambda1", c.lambda1);
    num("learning_rate", c.learning_rate);
    num("batch_trajectories", c.batch_trajectories);
    num("iterations", c.iterations);
    num("discount", c.discount);
    num("seed", c.seed);
    num("bc_epochs", c.bc_epochs);
    num("bc_learning_rate", c.bc_learning_rate);
    num("bc_minibatch", c.bc_minibatch);
    num("value_epochs", c.value_epochs);
    num("initial_log_std", c.initial_log_std);
    num("checkpoint_every", c.checkpoint_every);
    if (j.contains("clamp_demo_weight")) {
      if (!j.at("clamp_demo_weight").is_boolean()) throw DataError("dapg config: 'clamp_demo_weight' must be a boolean");
      c.clamp_demo_weight = j.at("clamp_demo_weight").get<bool>();
    }
    c.validate();
    return c;
  }
};

struct CurveRow {
  int iteration = 0;
  double mean_return = 0.0;
  double success_rate = 0.0;
  double demo_weight = 0.0;

  bool operator==(const CurveRow&) const = default;
};

inline std::string write_curve(const std::vector<CurveRow>& rows) {
  std::string out = "iteration,mean_return,success_rate,demo_weight\n";
  for (const auto& r : rows) out += std::to_string(r.iteration) + "," + format_double(r.mean_return) + "," +
                                    format_double(r.success_rate) + "," + format_double(r.demo_weight) + "\n";
  return out;
}

/// Mean of the per-iteration mean return.
inline double area_under_curve(const std::vector<CurveRow>& rows) {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.mean_return;
  return s / static_cast<double>(rows.size());
}

struct TrainResult {
  GaussianMlpPolicy policy{ToyRelocateEnv::kStateDim, ToyRelocateEnv::kActionDim};
  std::vector<CurveRow> curve;
  std::vector<double> bc_loss;        // demo NLL before BC, then after each epoch
  std::vector<VecX> gradients;        // recorded when requested
};

struct TrainHooks {
  std::function<void(int, const GaussianMlpPolicy&)> checkpoint;
  std::function<void(const CurveRow&)> progress;
  bool record_gradients = false;
};

/// Runs a batch of episodes in lockstep; trajectory i of iteration k uses
/// seeds derived from (seed, k, i) so results do not depend on batch order.
inline std::vector<Trajectory> rollout_batch(const GaussianMlpPolicy& policy, const ToyRelocateConfig& env_cfg, int n,
                                             std::uint64_t seed, int k) {
  std::vector<ToyRelocateEnv> envs(static_cast<size_t>(n), ToyRelocateEnv(env_cfg));
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(static_cast<size_t>(n));
  std::vector<Trajectory> trajs(static_cast<size_t>(n));
  MatX s(ToyRelocateEnv::kStateDim, n);
  for (int i = 0; i < n; ++i) {
    const auto si = static_cast<size_t>(i);
    s.col(i) = envs[si].reset(derive_seed(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(2 * i)));
    rngs.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(2 * i + 1)));
    trajs[si].states.reserve(static_cast<size_t>(env_cfg.horizon));
  }
  for (int t = 0; t < env_cfg.horizon; ++t) {
    const MatX a = policy.sample(s, rngs);
    for (int i = 0; i < n; ++i) {
      const auto si = static_cast<size_t>(i);
      trajs[si].states.push_back(s.col(i));
      trajs[si].actions.push_back(a.col(i));
      const StepResult r = envs[si].step(a.col(i));
      trajs[si].rewards.push_back(r.reward);
      s.col(i) = r.state;
    }
  }
  for (int i = 0; i < n; ++i) trajs[static_cast<size_t>(i)].success = envs[static_cast<size_t>(i)].success();
  return trajs;
}

/// Mean demo negative log-likelihood under the policy.
inline double demo_nll(const GaussianMlpPolicy& policy, const SampleSet& demos) {
  return -policy.log_prob(demos.states, demos.actions).mean();
}

/// Behavior cloning on the policy mean (maximum likelihood at fixed log-std).
inline std::vector<double> behavior_clone(GaussianMlpPolicy& policy, const SampleSet& demos, int epochs, double lr,
                                          int minibatch, std::mt19937_64& rng) {
  std::vector<double> losses{demo_nll(policy, demos)};
  if (epochs == 0 || demos.states.cols() == 0) return losses;
  const Eigen::Index n = demos.states.cols();
  const int nd = policy.action_dim();
  Adam adam(policy.num_params() - nd, lr);
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t b = 0; b < idx.size(); b += static_cast<size_t>(minibatch)) {
      const size_t m = std::min(idx.size() - b, static_cast<size_t>(minibatch));
      SampleSet mb;
      mb.states.resize(demos.states.rows(), static_cast<Eigen::Index>(m));
      mb.actions.resize(demos.actions.rows(), static_cast<Eigen::Index>(m));
      for (size_t j = 0; j < m; ++j) {
        mb.states.col(static_cast<Eigen::Index>(j)) = demos.states.col(idx[b + j]);
        mb.actions.col(static_cast<Eigen::Index>(j)) = demos.actions.col(idx[b + j]);
      }
      const VecX g = policy.log_prob_grad_sum(mb.states, mb.actions, VecX::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m)));
      VecX& theta = policy.mutable_params();
      adam.step(theta.head(theta.size() - nd), g.head(g.size() - nd), /*ascend=*/true);
    }
    losses.push_back(demo_nll(policy, demos));
  }
  return losses;
}

/// Trains a policy on the toy relocate task. With no demonstrations (or
/// lambda0 = 0 and no BC epochs) this is plain policy gradient.
inline TrainResult train(const ToyRelocateConfig& env_cfg, std::span<const Demonstration> demos, const DapgConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  for (const auto& d : demos) {
    d.validate();
    if (d.states.front().size() != ToyRelocateEnv::kStateDim || d.actions.empty() ||
        d.actions.front().size() != ToyRelocateEnv::kActionDim)
      throw DimensionError("train: demonstration '" + d.source_id + "' does not match the toy env layout");
  }
  TrainResult res;
  std::mt19937_64 init_rng(derive_seed(cfg.seed, 0xA11CE));
  res.policy.init(init_rng, cfg.initial_log_std);
  ValueFunction value(ToyRelocateEnv::kStateDim + 1);
  value.init(init_rng);
  std::mt19937_64 fit_rng(derive_seed(cfg.seed, 0xF17));

  const SampleSet demo_set = demo_samples(demos);
  if (demo_set.states.cols() > 0 && cfg.bc_epochs > 0)
    res.bc_loss = behavior_clone(res.policy, demo_set, cfg.bc_epochs, cfg.bc_learning_rate, cfg.bc_minibatch, fit_rng);

  Adam adam(res.policy.num_params(), cfg.learning_rate);
  for (int k = 0; k < cfg.iterations; ++k) {
    const std::vector<Trajectory> trajs = rollout_batch(res.policy, env_cfg, cfg.batch_trajectories, cfg.seed, k + 1);
    const MatX vx = value_features(trajs, env_cfg.horizon);
    VecX returns;
    const VecX adv = compute_advantages(trajs, value.predict(vx), cfg.discount, &returns);
    const SampleSet batch = stack_samples(trajs);

    CurveRow row;
    row.iteration = k;
    double total = 0.0, succ = 0.0;
    for (const auto& t : trajs) {
      for (double r : t.rewards) total += r;
      succ += t.success ? 1.0 : 0.0;
    }
    row.mean_return = total / static_cast<double>(trajs.size());
    row.success_rate = succ / static_cast<double>(trajs.size());

    const VecX g = dapg_gradient(res.policy, batch, adv, demo_set, cfg.lambda0, cfg.lambda1, k, cfg.clamp_demo_weight,
                                 &row.demo_weight);
    if (!g.allFinite()) throw NumericalError("train: non-finite gradient at iteration " + std::to_string(k));
    if (hooks.record_gradients) res.gradients.push_back(g);
    adam.step(res.policy.mutable_params(), g, /*ascend=*/true);
    res.policy.clamp_log_std();
    if (!res.policy.params().allFinite())
      throw NumericalError("train: non-finite policy parameters at iteration " + std::to_string(k));
    value.fit(vx, returns, cfg.value_epochs, fit_rng);

    res.curve.push_back(row);
    if (hooks.progress) hooks.progress(row);
    if (hooks.checkpoint && cfg.checkpoint_every > 0 && (k + 1) % cfg.checkpoint_every == 0) hooks.checkpoint(k + 1, res.policy);
  }
  return res;
}

inline Json policy_to_json(const GaussianMlpPolicy& p, int iteration) {
  return Json{{"format", "dexpolicy/1"},
              {"iteration", iteration},
              {"state_dim", p.state_dim()},
              {"action_dim", p.action_dim()},
              {"params", std::vector<double>(p.params().data(), p.params().data() + p.params().size())}};
}

}  // namespace dexretarget
