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

// Recursive Newton-Euler inverse dynamics and the action pipeline
// (low-pass filter -> finite differences -> torques / position targets).

#include <span>
#include <string>
#include <vector>

#include "dexretarget/control.hpp"
#include "dexretarget/kinematics.hpp"

namespace dexretarget {

struct DynamicsInput {
  VecX q, qd, qdd;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
};

/// Joint torques for (q, qd, qdd) including gravity and viscous joint damping.
inline VecX inverse_dynamics(const KinematicTree& tree, const DynamicsInput& in) {
  const int n = tree.num_dofs();
  require_size(in.q.size(), n, "inverse_dynamics q");
  require_size(in.qd.size(), n, "inverse_dynamics qd");
  require_size(in.qdd.size(), n, "inverse_dynamics qdd");
  if (!in.q.allFinite() || !in.qd.allFinite() || !in.qdd.allFinite() || !in.gravity.allFinite())
    throw NumericalError("inverse_dynamics: non-finite input");
  for (int i = 0; i < tree.num_links(); ++i)
    if (!tree.link(i).inertial) throw DataError("inverse_dynamics: link '" + tree.link(i).id + "' has no inertial data");

  const KinematicState st = compute_state(tree, in.q);
  const size_t nl = static_cast<size_t>(tree.num_links());
  std::vector<Vec3> w(nl), dw(nl), a(nl), force(nl), moment(nl);

  // Forward pass: spatial motion of each link frame origin, world coordinates.
  for (int i : tree.topological_order()) {
    const auto si = static_cast<size_t>(i);
    const int p = tree.parent_index(i);
    const Vec3& o = st.link_pose[si].translation;
    if (p < 0) {
      w[si].setZero();
      dw[si].setZero();
      a[si] = -in.gravity;
    } else {
      const auto sp = static_cast<size_t>(p);
      const Vec3 r = o - st.link_pose[sp].translation;
      w[si] = w[sp];
      dw[si] = dw[sp];
      a[si] = a[sp] + dw[sp].cross(r) + w[sp].cross(w[sp].cross(r));
      const int dof = tree.dof_of_link(i);
      if (dof >= 0) {
        const Vec3& z = st.dof_axis_world[static_cast<size_t>(dof)];
        dw[si] += w[sp].cross(z) * in.qd[dof] + z * in.qdd[dof];
        w[si] += z * in.qd[dof];
      }
    }
    const Inertial& inert = *tree.link(i).inertial;
    const Mat3 rot = st.link_pose[si].rotation.toRotationMatrix();
    const Vec3 c = rot * inert.com;
    const Mat3 iw = rot * inert.inertia * rot.transpose();
    const Vec3 ac = a[si] + dw[si].cross(c) + w[si].cross(w[si].cross(c));
    force[si] = inert.mass * ac;
    // Moment about the link origin.
    moment[si] = iw * dw[si] + w[si].cross(iw * w[si]) + c.cross(force[si]);
  }

  // Backward pass: accumulate wrenches toward the root.
  VecX tau = VecX::Zero(n);
  const auto& order = tree.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int i = *it;
    const auto si = static_cast<size_t>(i);
    const int dof = tree.dof_of_link(i);
    if (dof >= 0) tau[dof] = st.dof_axis_world[static_cast<size_t>(dof)].dot(moment[si]) + tree.dof_joint(dof).damping * in.qd[dof];
    const int p = tree.parent_index(i);
    if (p >= 0) {
      const auto sp = static_cast<size_t>(p);
      const Vec3 r = st.link_pose[si].translation - st.link_pose[sp].translation;
      force[sp] += force[si];
      moment[sp] += moment[si] + r.cross(force[si]);
    }
  }
  return tau;
}

/// Joint-space mass matrix assembled column by column from inverse dynamics.
inline MatX mass_matrix(const KinematicTree& tree, const Eigen::Ref<const VecX>& q) {
  const int n = tree.num_dofs();
  DynamicsInput in{q, VecX::Zero(n), VecX::Zero(n), Vec3::Zero()};
  MatX m(n, n);
  for (int j = 0; j < n; ++j) {
    in.qdd.setZero();
    in.qdd[j] = 1.0;
    m.col(j) = inverse_dynamics(tree, in);
  }
  return m;
}

struct Derivatives {
  std::vector<VecX> qd;
  std::vector<VecX> qdd;
};

/// Central differences inside, second-order one-sided stencils at the ends.
inline Derivatives differentiate_trajectory(std::span<const VecX> q, double dt) {
  const size_t t = q.size();
  if (t < 3) throw DataError("differentiate_trajectory: need at least 3 frames, got " + std::to_string(t));
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DataError("differentiate_trajectory: dt must be > 0");
  for (size_t i = 1; i < t; ++i) require_size(q[i].size(), q[0].size(), "trajectory frame");
  Derivatives d;
  d.qd.resize(t);
  d.qdd.resize(t);
  const double h2 = dt * dt;
  for (size_t i = 1; i + 1 < t; ++i) {
    d.qd[i] = (q[i + 1] - q[i - 1]) / (2.0 * dt);
    d.qdd[i] = (q[i + 1] - 2.0 * q[i] + q[i - 1]) / h2;
  }
  // End stencils written in differences so constant inputs give exact zeros.
  d.qd[0] = (4.0 * (q[1] - q[0]) - (q[2] - q[0])) / (2.0 * dt);
  d.qd[t - 1] = (4.0 * (q[t - 1] - q[t - 2]) - (q[t - 1] - q[t - 3])) / (2.0 * dt);
  if (t >= 4) {
    d.qdd[0] = (-5.0 * (q[1] - q[0]) + 4.0 * (q[2] - q[0]) - (q[3] - q[0])) / h2;
    d.qdd[t - 1] = (-5.0 * (q[t - 2] - q[t - 1]) + 4.0 * (q[t - 3] - q[t - 1]) - (q[t - 4] - q[t - 1])) / h2;
  } else {
    d.qdd[0] = d.qdd[1];
    d.qdd[2] = d.qdd[1];
  }
  return d;
}

enum class ActionMode { kTorque, kPosition, kBoth };

inline std::string to_string(ActionMode m) {
  switch (m) {
    case ActionMode::kTorque: return "torque";
    case ActionMode::kPosition: return "position";
    case ActionMode::kBoth: return "both";
  }
  return "position";
}

inline ActionMode parse_action_mode(std::string_view s) {
  if (s == "torque") return ActionMode::kTorque;
  if (s == "position") return ActionMode::kPosition;
  if (s == "both") return ActionMode::kBoth;
  throw DataError("unknown action mode '" + std::string(s) + "' (expected torque|position|both)");
}

struct ActionFrame {
  double t = 0.0;
  VecX torque;           // N*m; empty in position mode
  VecX position_target;  // rad; empty in torque mode
};

/// Filters the trajectory, differentiates it and emits one action frame per sample.
inline std::vector<ActionFrame> compute_actions(const KinematicTree& tree, std::span<const VecX> qtraj, double dt,
                                                double gamma, ActionMode mode,
                                                const Vec3& gravity = Vec3(0.0, 0.0, -9.81)) {
  for (const auto& q : qtraj) require_size(q.size(), tree.num_dofs(), "action trajectory frame");
  const std::vector<VecX> filtered = low_pass_filter(qtraj, gamma);
  std::vector<ActionFrame> out(filtered.size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i].t = static_cast<double>(i) * dt;
    if (mode != ActionMode::kTorque) out[i].position_target = filtered[i];
  }
  if (mode != ActionMode::kPosition) {
    if (!tree.has_all_inertials()) throw DataError("compute_actions: torque mode needs inertial data on every link");
    const Derivatives d = differentiate_trajectory(filtered, dt);
    for (size_t i = 0; i < out.size(); ++i)
      out[i].torque = inverse_dynamics(tree, DynamicsInput{filtered[i], d.qd[i], d.qdd[i], gravity});
  }
  return out;
}

}  // namespace dexretarget
