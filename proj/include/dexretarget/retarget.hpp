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

// Keypoint retargeting between two kinematic trees.
//
// Per frame we minimize
//   F(q) = sum_i |f_src_i(q_src) - f_tgt_i(q)|^2 + alpha |q - q_prev|^2
// subject to the target's joint limits, starting from q_prev. The solver is a
// projected Gauss-Newton/Levenberg-Marquardt iteration: variables pinned at a
// bound with the gradient pointing outward are frozen, the remaining block is
// solved with adaptive damping, and the step is projected back onto the box
// with a backtracking line search. Only strictly decreasing steps are taken.

#include <chrono>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "dexretarget/kinematics.hpp"

namespace dexretarget {

struct KeypointPair {
  std::string source;
  std::string target;
  bool operator==(const KeypointPair&) const = default;
};

using KeypointMap = std::vector<KeypointPair>;

/// Parses "source -> target" lines; '#' starts a comment.
inline KeypointMap parse_keypoint_map(std::string_view text) {
  KeypointMap map;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::string arrow = "->";
    auto pos = line.find(arrow);
    if (pos == std::string::npos) {
      arrow = "\xE2\x86\x92";  // U+2192
      pos = line.find(arrow);
    }
    if (pos == std::string::npos) throw DataError("keypoint map line " + std::to_string(line_no) + ": expected 'source -> target'");
    KeypointPair p{trim(line.substr(0, pos)), trim(line.substr(pos + arrow.size()))};
    if (p.source.empty() || p.target.empty() || p.source.find(' ') != std::string::npos ||
        p.target.find(' ') != std::string::npos)
      throw DataError("keypoint map line " + std::to_string(line_no) + ": malformed names");
    map.push_back(std::move(p));
  }
  return map;
}

inline std::string write_keypoint_map(const KeypointMap& map) {
  std::string out;
  for (const auto& p : map) out += p.source + " -> " + p.target + "\n";
  return out;
}

/// Identity map over every keypoint of `tree`.
inline KeypointMap identity_map(const KinematicTree& tree) {
  KeypointMap m;
  for (int k = 0; k < tree.num_keypoints(); ++k) m.push_back({tree.keypoint(k).name, tree.keypoint(k).name});
  return m;
}

struct SolverSettings {
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;  // infinity norm of the projected gradient
  double armijo = 1e-4;
  int max_backtracks = 20;
  double initial_damping = 1e-2;  // relative to the largest Gauss-Newton diagonal
};

struct RetargetResult {
  VecX q;
  double residual = 0.0;  // RMS keypoint distance, meters
  double objective = 0.0;
  double initial_objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

class RetargetProblem {
 public:
  RetargetProblem(KinematicTree source, KinematicTree target, KeypointMap map, double alpha = 4e-3,
                  SolverSettings settings = {})
      : source_(std::move(source)), target_(std::move(target)), map_(std::move(map)), alpha_(alpha),
        settings_(settings) {
    if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw DataError("retarget: alpha must be finite and >= 0");
    if (map_.empty()) throw DataError("retarget: keypoint map is empty");
    if (settings_.max_iterations < 0 || !(settings_.gradient_tolerance >= 0.0))
      throw DataError("retarget: invalid solver settings");
    std::unordered_set<std::string> targets;
    for (const auto& p : map_) {
      auto s = source_.find_keypoint(p.source);
      if (!s) throw DataError("keypoint map: source keypoint '" + p.source + "' not on '" + source_.name() + "'");
      auto t = target_.find_keypoint(p.target);
      if (!t) throw DataError("keypoint map: target keypoint '" + p.target + "' not on '" + target_.name() + "'");
      if (!targets.insert(p.target).second) throw DataError("keypoint map: duplicate target '" + p.target + "'");
      source_idx_.push_back(*s);
      target_idx_.push_back(*t);
    }
    lower_ = target_.lower_limits();
    upper_ = target_.upper_limits();
  }

  const KinematicTree& source() const { return source_; }
  const KinematicTree& target() const { return target_; }
  const KeypointMap& map() const { return map_; }
  double alpha() const { return alpha_; }
  const SolverSettings& settings() const { return settings_; }
  const VecX& lower() const { return lower_; }
  const VecX& upper() const { return upper_; }
  int num_pairs() const { return static_cast<int>(map_.size()); }
  int source_keypoint(int i) const { return source_idx_[static_cast<size_t>(i)]; }
  int target_keypoint(int i) const { return target_idx_[static_cast<size_t>(i)]; }

  RetargetProblem with_alpha(double alpha) const { return {source_, target_, map_, alpha, settings_}; }
  RetargetProblem with_settings(SolverSettings s) const { return {source_, target_, map_, alpha_, s}; }

  /// Mapped source keypoints (3 x pairs) for a source configuration.
  Eigen::Matrix3Xd source_points(const Eigen::Ref<const VecX>& q_source) const {
    const KinematicState st = compute_state(source_, q_source);
    Eigen::Matrix3Xd p(3, num_pairs());
    for (int i = 0; i < num_pairs(); ++i) p.col(i) = keypoint_position(source_, st, source_idx_[static_cast<size_t>(i)]);
    return p;
  }

 private:
  KinematicTree source_;
  KinematicTree target_;
  KeypointMap map_;
  double alpha_;
  SolverSettings settings_;
  std::vector<int> source_idx_;
  std::vector<int> target_idx_;
  VecX lower_;
  VecX upper_;
};

namespace detail {

struct RetargetEval {
  double objective = 0.0;
  double keypoint_sq = 0.0;
  VecX gradient;
  MatX hessian_gn;  // 2 (J^T J + alpha I)
};

inline RetargetEval evaluate_retarget(const RetargetProblem& pb, const Eigen::Matrix3Xd& goal,
                                      const VecX& q, const VecX& q_prev, bool with_derivatives) {
  const KinematicTree& tgt = pb.target();
  const int n = tgt.num_dofs();
  const KinematicState st = compute_state(tgt, q);
  RetargetEval e;
  if (with_derivatives) {
    e.gradient = VecX::Zero(n);
    e.hessian_gn = MatX::Zero(n, n);
  }
  MatX jac;
  for (int i = 0; i < pb.num_pairs(); ++i) {
    const int k = pb.target_keypoint(i);
    const Vec3 r = keypoint_position(tgt, st, k) - goal.col(i);
    e.keypoint_sq += r.squaredNorm();
    if (with_derivatives) {
      keypoint_jacobian(tgt, st, k, jac);
      e.gradient.noalias() += 2.0 * jac.transpose() * r;
      e.hessian_gn.noalias() += 2.0 * jac.transpose() * jac;
    }
  }
  const VecX dq = q - q_prev;
  e.objective = e.keypoint_sq + pb.alpha() * dq.squaredNorm();
  if (with_derivatives) {
    e.gradient += 2.0 * pb.alpha() * dq;
    e.hessian_gn.diagonal().array() += 2.0 * pb.alpha();
  }
  return e;
}

}  // namespace detail

inline double retarget_objective(const RetargetProblem& pb, const Eigen::Ref<const VecX>& q_source,
                                 const Eigen::Ref<const VecX>& q, const Eigen::Ref<const VecX>& q_prev) {
  require_size(q.size(), pb.target().num_dofs(), "target joint vector");
  require_size(q_prev.size(), pb.target().num_dofs(), "previous target joint vector");
  return detail::evaluate_retarget(pb, pb.source_points(q_source), q, q_prev, false).objective;
}

/// Analytic gradient of the per-frame objective with respect to the target joints.
inline VecX retarget_gradient(const RetargetProblem& pb, const Eigen::Ref<const VecX>& q_source,
                              const Eigen::Ref<const VecX>& q, const Eigen::Ref<const VecX>& q_prev) {
  require_size(q.size(), pb.target().num_dofs(), "target joint vector");
  require_size(q_prev.size(), pb.target().num_dofs(), "previous target joint vector");
  return detail::evaluate_retarget(pb, pb.source_points(q_source), q, q_prev, true).gradient;
}

/// Gradient of the per-frame objective with respect to the source joints.
inline VecX retarget_source_gradient(const RetargetProblem& pb, const Eigen::Ref<const VecX>& q_source,
                                     const Eigen::Ref<const VecX>& q) {
  require_size(q.size(), pb.target().num_dofs(), "target joint vector");
  const KinematicState ss = compute_state(pb.source(), q_source);
  const KinematicState ts = compute_state(pb.target(), q);
  VecX g = VecX::Zero(pb.source().num_dofs());
  MatX jac;
  for (int i = 0; i < pb.num_pairs(); ++i) {
    const int ks = pb.source_keypoint(i);
    const Vec3 r = keypoint_position(pb.target(), ts, pb.target_keypoint(i)) - keypoint_position(pb.source(), ss, ks);
    keypoint_jacobian(pb.source(), ss, ks, jac);
    g.noalias() -= 2.0 * jac.transpose() * r;
  }
  return g;
}

inline RetargetResult retarget_frame(const RetargetProblem& pb, const Eigen::Ref<const VecX>& q_source,
                                     const Eigen::Ref<const VecX>& q_prev_in) {
  const int n = pb.target().num_dofs();
  require_size(q_source.size(), pb.source().num_dofs(), "source joint vector");
  require_size(q_prev_in.size(), n, "previous target joint vector");
  if (!q_source.allFinite() || !q_prev_in.allFinite()) throw NumericalError("retarget: non-finite joint input");
  const VecX& lo = pb.lower();
  const VecX& hi = pb.upper();
  if ((q_prev_in.array() < lo.array() - 1e-12).any() || (q_prev_in.array() > hi.array() + 1e-12).any())
    throw DataError("retarget: warm start lies outside the joint limits");
  const VecX q_prev = q_prev_in.cwiseMax(lo).cwiseMin(hi);
  const Eigen::Matrix3Xd goal = pb.source_points(q_source);
  const SolverSettings& cfg = pb.settings();

  VecX q = q_prev;
  detail::RetargetEval cur = detail::evaluate_retarget(pb, goal, q, q_prev, true);
  if (!std::isfinite(cur.objective)) throw NumericalError("retarget: non-finite objective");

  RetargetResult res;
  res.initial_objective = cur.objective;
  double lambda = cfg.initial_damping;
  int it = 0;
  for (;; ++it) {
    const VecX pg = q - (q - cur.gradient).cwiseMax(lo).cwiseMin(hi);
    if (pg.lpNorm<Eigen::Infinity>() <= cfg.gradient_tolerance) {
      res.converged = true;
      break;
    }
    if (it >= cfg.max_iterations) break;

    // Freeze variables held at a bound by the gradient.
    std::vector<int> free;
    free.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const bool at_lo = q[i] <= lo[i] && cur.gradient[i] > 0.0;
      const bool at_hi = q[i] >= hi[i] && cur.gradient[i] < 0.0;
      if (!at_lo && !at_hi) free.push_back(i);
    }
    const int nf = static_cast<int>(free.size());
    if (nf == 0) break;
    MatX h(nf, nf);
    VecX gf(nf);
    for (int a = 0; a < nf; ++a) {
      gf[a] = cur.gradient[free[static_cast<size_t>(a)]];
      for (int b = 0; b < nf; ++b) h(a, b) = cur.hessian_gn(free[static_cast<size_t>(a)], free[static_cast<size_t>(b)]);
    }
    const double scale = std::max(h.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    while (!accepted && lambda <= 1e8) {
      MatX hd = h;
      hd.diagonal().array() += lambda * scale;
      Eigen::LDLT<MatX> ldlt(hd);
      VecX step_f = ldlt.solve(-gf);
      if (ldlt.info() != Eigen::Success || !step_f.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      VecX step = VecX::Zero(n);
      for (int a = 0; a < nf; ++a) step[free[static_cast<size_t>(a)]] = step_f[a];
      double t = 1.0;
      for (int bt = 0; bt <= cfg.max_backtracks; ++bt, t *= 0.5) {
        const VecX trial = (q + t * step).cwiseMax(lo).cwiseMin(hi);
        const VecX delta = trial - q;
        const double decrease = cur.gradient.dot(delta);
        const double f_trial = detail::evaluate_retarget(pb, goal, trial, q_prev, false).objective;
        if (!std::isfinite(f_trial)) continue;
        if (f_trial < cur.objective && f_trial <= cur.objective + cfg.armijo * std::min(decrease, 0.0)) {
          q = trial;
          cur = detail::evaluate_retarget(pb, goal, q, q_prev, true);
          accepted = true;
          break;
        }
      }
      if (accepted) {
        lambda = std::max(lambda / 3.0, 1e-12);
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) {
      // No decreasing step exists at working precision.
      ++it;
      const VecX pg2 = q - (q - cur.gradient).cwiseMax(lo).cwiseMin(hi);
      res.converged = pg2.lpNorm<Eigen::Infinity>() <= cfg.gradient_tolerance;
      break;
    }
  }
  res.q = q;
  res.objective = cur.objective;
  res.iterations = it;
  res.residual = std::sqrt(cur.keypoint_sq / pb.num_pairs());
  return res;
}

/// Warm-started sequential solve; frame t starts from frame t-1's solution.
inline std::vector<RetargetResult> retarget_trajectory(const RetargetProblem& pb, std::span<const VecX> source_traj,
                                                       const Eigen::Ref<const VecX>& q0) {
  std::vector<RetargetResult> out;
  out.reserve(source_traj.size());
  VecX q_prev = q0;
  for (size_t t = 0; t < source_traj.size(); ++t) {
    try {
      out.push_back(retarget_frame(pb, source_traj[t], q_prev));
    } catch (const NumericalError& e) {
      throw NumericalError("retarget frame " + std::to_string(t) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("retarget frame " + std::to_string(t) + ": " + e.what());
    } catch (const DimensionError& e) {
      throw DimensionError("retarget frame " + std::to_string(t) + ": " + e.what());
    }
    q_prev = out.back().q;
  }
  return out;
}

}  // namespace dexretarget
