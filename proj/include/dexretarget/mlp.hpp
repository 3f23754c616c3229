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

// Small tanh multilayer perceptrons over a flat parameter vector, plus Adam.

#include <random>
#include <span>
#include <vector>

#include "dexretarget/common.hpp"

namespace dexretarget {

/// Layer sizes only; parameters live in an external flat vector laid out as
/// [W_0 (column-major), b_0, W_1, b_1, ...].
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw DimensionError("mlp: need at least input and output sizes");
    for (int s : sizes_)
      if (s <= 0) throw DimensionError("mlp: layer sizes must be positive");
  }

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& sizes() const { return sizes_; }

  int num_params() const {
    int n = 0;
    for (int l = 0; l < num_layers(); ++l) n += sizes_[static_cast<size_t>(l + 1)] * (sizes_[static_cast<size_t>(l)] + 1);
    return n;
  }

  /// Uniform Glorot init for weights, zero biases; the last layer is scaled by `out_scale`.
  VecX init_params(std::mt19937_64& rng, double out_scale = 1.0) const {
    VecX p = VecX::Zero(num_params());
    int off = 0;
    for (int l = 0; l < num_layers(); ++l) {
      const int in = sizes_[static_cast<size_t>(l)], out = sizes_[static_cast<size_t>(l + 1)];
      double limit = std::sqrt(6.0 / (in + out));
      if (l + 1 == num_layers()) limit *= out_scale;
      std::uniform_real_distribution<double> u(-limit, limit);
      for (int i = 0; i < in * out; ++i) p[off + i] = u(rng);
      off += in * out + out;
    }
    return p;
  }

  struct Cache {
    std::vector<MatX> activations;  // post-tanh outputs of each hidden layer, plus input
  };

  /// Forward pass over a batch (columns are samples).
  MatX forward(const Eigen::Ref<const VecX>& params, const MatX& x, Cache* cache = nullptr) const {
    require_size(params.size(), num_params(), "mlp params");
    require_size(x.rows(), input_dim(), "mlp input");
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(x);
    }
    MatX h = x;
    int off = 0;
    for (int l = 0; l < num_layers(); ++l) {
      const int in = sizes_[static_cast<size_t>(l)], out = sizes_[static_cast<size_t>(l + 1)];
      Eigen::Map<const MatX> w(params.data() + off, out, in);
      Eigen::Map<const VecX> b(params.data() + off + in * out, out);
      off += in * out + out;
      MatX z = w * h;
      z.colwise() += b;
      if (l + 1 < num_layers()) {
        h = z.array().tanh().matrix();
        if (cache) cache->activations.push_back(h);
      } else {
        h = std::move(z);
      }
    }
    return h;
  }

  /// Accumulates dL/dparams into `grad` given dL/doutput for the cached batch.
  void backward(const Eigen::Ref<const VecX>& params, const Cache& cache, const MatX& d_out, Eigen::Ref<VecX> grad) const {
    require_size(grad.size(), num_params(), "mlp grad");
    std::vector<int> offsets;
    int off = 0;
    for (int l = 0; l < num_layers(); ++l) {
      offsets.push_back(off);
      off += sizes_[static_cast<size_t>(l + 1)] * (sizes_[static_cast<size_t>(l)] + 1);
    }
    MatX delta = d_out;
    for (int l = num_layers() - 1; l >= 0; --l) {
      const int in = sizes_[static_cast<size_t>(l)], out = sizes_[static_cast<size_t>(l + 1)];
      const int o = offsets[static_cast<size_t>(l)];
      const MatX& h_in = cache.activations[static_cast<size_t>(l)];
      Eigen::Map<MatX> gw(grad.data() + o, out, in);
      Eigen::Map<VecX> gb(grad.data() + o + in * out, out);
      gw.noalias() += delta * h_in.transpose();
      gb += delta.rowwise().sum();
      if (l > 0) {
        Eigen::Map<const MatX> w(params.data() + o, out, in);
        MatX back = w.transpose() * delta;
        delta = (back.array() * (1.0 - h_in.array().square())).matrix();
      }
    }
  }

 private:
  std::vector<int> sizes_;
};

/// Adam optimizer on a flat parameter vector. `ascend` flips the update sign.
class Adam {
 public:
  explicit Adam(int n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(VecX::Zero(n)), v_(VecX::Zero(n)) {}

  void step(Eigen::Ref<VecX> params, const Eigen::Ref<const VecX>& grad, bool ascend = false) {
    require_size(grad.size(), m_.size(), "adam grad");
    ++t_;
    m_ = b1_ * m_ + (1.0 - b1_) * grad;
    v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    const VecX update = (m_ / c1).array() / ((v_ / c2).array().sqrt() + eps_);
    if (ascend) {
      params += lr_ * update;
    } else {
      params -= lr_ * update;
    }
  }

  double learning_rate() const { return lr_; }

 private:
  double lr_, b1_, b2_, eps_;
  VecX m_, v_;
  int t_ = 0;
};

}  // namespace dexretarget
