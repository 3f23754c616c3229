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

// Contact-free planar relocate task: a 3-link arm reaches a point object,
// grasps it when the tip comes within the grasp radius, and carries it to a
// randomized target.

#include <random>

#include "dexretarget/demopipe.hpp"
#include "dexretarget/kinematics.hpp"

namespace dexretarget {

struct ToyRelocateConfig {
  int horizon = 100;
  double dt = 0.05;
  Vec3 link_lengths = Vec3(0.4, 0.35, 0.25);
  double max_joint_speed = 1.5;  // rad/s, actions are clipped to this
  double grasp_radius = 0.05;
  double success_radius = 0.1;
  Vec3 initial_q = Vec3(0.0, 0.8, 0.8);
};

inline KinematicTree planar_arm(const Vec3& lengths, const std::string& name = "toy_arm") {
  RobotSpec spec;
  spec.name = name;
  spec.links.push_back(Link{"base", "", Vec3::Zero(), Vec3::Zero(), std::nullopt, Inertial{}, std::nullopt});
  std::string parent = "base";
  for (int i = 0; i < 3; ++i) {
    Link l;
    l.id = "link" + std::to_string(i);
    l.parent = parent;
    l.origin_xyz = i == 0 ? Vec3::Zero() : Vec3(lengths[i - 1], 0.0, 0.0);
    l.joint = Joint{JointType::kRevolute, Vec3::UnitZ(), i == 0 ? -3.1 : -2.6, i == 0 ? 3.1 : 2.6, 0.0};
    Inertial in;
    in.mass = 1.0;
    in.com = Vec3(0.5 * lengths[i], 0.0, 0.0);
    in.inertia = Vec3(1e-4, lengths[i] * lengths[i] / 12.0, lengths[i] * lengths[i] / 12.0).asDiagonal();
    l.inertial = in;
    spec.joint_order.push_back(l.id);
    parent = l.id;
    spec.links.push_back(std::move(l));
  }
  spec.keypoints.push_back({"tip", "link2", Vec3(lengths[2], 0.0, 0.0)});
  return KinematicTree(std::move(spec));
}

struct StepResult {
  VecX state;
  double reward = 0.0;
  bool done = false;
};

class ToyRelocateEnv {
 public:
  static constexpr int kStateDim = 9;   // q(3), tip(2), object(2), target(2)
  static constexpr int kActionDim = 3;  // joint velocity commands

  explicit ToyRelocateEnv(ToyRelocateConfig cfg = {})
      : cfg_(cfg), arm_(planar_arm(cfg.link_lengths)), tip_(arm_.keypoint_index("tip")),
        lower_(arm_.lower_limits()), upper_(arm_.upper_limits()) {}

  const ToyRelocateConfig& config() const { return cfg_; }
  const KinematicTree& arm() const { return arm_; }

  VecX reset(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> r(0.45, 0.8), obj_angle(-0.7, 0.7), tgt_angle(0.9, 2.0);
    const double ro = r(rng), ao = obj_angle(rng), rt = r(rng), at = tgt_angle(rng);
    object_ = Eigen::Vector2d(ro * std::cos(ao), ro * std::sin(ao));
    target_ = Eigen::Vector2d(rt * std::cos(at), rt * std::sin(at));
    q_ = cfg_.initial_q;
    t_ = 0;
    grasped_ = false;
    update_tip();
    return state();
  }

  StepResult step(const Eigen::Ref<const VecX>& action) {
    require_size(action.size(), kActionDim, "toy env action");
    if (t_ >= cfg_.horizon) throw DataError("toy env: step after episode end");
    if (!action.allFinite()) throw NumericalError("toy env: non-finite action");
    const VecX a = action.cwiseMax(-cfg_.max_joint_speed).cwiseMin(cfg_.max_joint_speed);
    q_ = (q_ + a * cfg_.dt).cwiseMax(lower_).cwiseMin(upper_);
    update_tip();
    if (!grasped_ && (tip_pos_ - object_).norm() < cfg_.grasp_radius) grasped_ = true;
    if (grasped_) object_ = tip_pos_;
    double reward;
    if (!grasped_) {
      reward = -(tip_pos_ - object_).norm();
    } else {
      const double d = (object_ - target_).norm();
      reward = -d + (d < cfg_.success_radius ? 1.0 : 0.0);
    }
    ++t_;
    return {state(), reward, t_ >= cfg_.horizon};
  }

  VecX state() const {
    VecX s(kStateDim);
    s << q_, tip_pos_, object_, target_;
    return s;
  }

  bool grasped() const { return grasped_; }
  bool success() const { return grasped_ && (object_ - target_).norm() < cfg_.success_radius; }
  const Eigen::Vector2d& tip() const { return tip_pos_; }
  const Eigen::Vector2d& object() const { return object_; }
  const Eigen::Vector2d& target() const { return target_; }
  const Vec3& joints() const { return q_; }
  int t() const { return t_; }

  /// Tip Jacobian restricted to the plane (2 x 3).
  Eigen::Matrix<double, 2, 3> tip_jacobian() const {
    const KinematicState st = compute_state(arm_, q_);
    MatX j;
    keypoint_jacobian(arm_, st, tip_, j);
    return j.topRows<2>();
  }

 private:
  void update_tip() {
    const KinematicState st = compute_state(arm_, q_);
    tip_pos_ = keypoint_position(arm_, st, tip_).head<2>();
  }

  ToyRelocateConfig cfg_;
  KinematicTree arm_;
  int tip_;
  VecX lower_, upper_;
  Vec3 q_ = Vec3::Zero();
  Eigen::Vector2d tip_pos_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d object_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d target_ = Eigen::Vector2d::Zero();
  int t_ = 0;
  bool grasped_ = false;
};

/// Resolved-rate controller: tip velocity toward the object, then the target.
inline VecX expert_action(const ToyRelocateEnv& env) {
  const Eigen::Vector2d goal = env.grasped() ? env.target() : env.object();
  Eigen::Vector2d v = 3.0 * (goal - env.tip());
  const double vmax = 0.6;
  if (v.norm() > vmax) v *= vmax / v.norm();
  const Eigen::Matrix<double, 2, 3> j = env.tip_jacobian();
  const Eigen::Matrix2d jjt = j * j.transpose() + 0.05 * 0.05 * Eigen::Matrix2d::Identity();
  VecX qd = j.transpose() * jjt.ldlt().solve(v);
  const double m = env.config().max_joint_speed;
  return qd.cwiseMax(-m).cwiseMin(m);
}

/// Runs the expert for one episode and records it in the demonstration format.
inline Demonstration expert_demonstration(ToyRelocateEnv& env, std::uint64_t seed, bool* success = nullptr) {
  Demonstration d;
  d.robot = env.arm().name();
  d.task = "toy-relocate";
  d.dt = env.config().dt;
  d.action_mode = "velocity";
  d.object_fields = "env";
  d.state_layout = {{"joint_pos", 3}, {"tip_pos", 2}, {"object_pos", 2}, {"target_pos", 2}};
  d.action_layout = {{"joint_vel_cmd", 3}};
  d.source_id = "expert:" + std::to_string(seed);
  d.config_hash = "toy-relocate";
  d.states.push_back(env.reset(seed));
  bool done = false;
  while (!done) {
    const VecX a = expert_action(env);
    const StepResult r = env.step(a);
    d.actions.push_back(a);
    d.states.push_back(r.state);
    done = r.done;
  }
  if (success) *success = env.success();
  return d;
}

}  // namespace dexretarget
