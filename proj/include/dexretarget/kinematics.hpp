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

// Kinematic trees, forward kinematics and keypoint Jacobians.
//
// A link's frame is obtained from its parent's frame by the fixed origin
// transform followed by the joint rotation about the joint axis (expressed in
// the child frame). Keypoints are named points rigidly attached to links.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dexretarget/common.hpp"

namespace dexretarget {

enum class JointType { kFixed, kRevolute };

struct Joint {
  JointType type = JointType::kRevolute;
  Vec3 axis = Vec3::UnitZ();
  double lower = 0.0;
  double upper = 0.0;
  double damping = 0.0;

  bool operator==(const Joint&) const = default;
};

struct Inertial {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about the COM, link frame

  bool operator==(const Inertial&) const = default;
};

// Primitive shape annotation. Metadata only, never used for collision.
struct Geometry {
  std::string shape;          // "box" (size: x, y, z) or "capsule" (size: radius, length)
  std::vector<double> size;

  bool operator==(const Geometry&) const = default;
};

struct Link {
  std::string id;
  std::string parent;  // empty for the root
  Vec3 origin_xyz = Vec3::Zero();
  Vec3 origin_rpy = Vec3::Zero();
  std::optional<Joint> joint;  // joint connecting this link to its parent
  std::optional<Inertial> inertial;
  std::optional<Geometry> geometry;

  bool operator==(const Link&) const = default;
};

struct Keypoint {
  std::string name;
  std::string link;
  Vec3 offset = Vec3::Zero();

  bool operator==(const Keypoint&) const = default;
};

/// Everything a robot description document declares.
struct RobotSpec {
  std::string name;
  std::vector<Link> links;
  std::vector<std::string> joint_order;  // child link ids, in declaration order
  std::vector<Keypoint> keypoints;

  bool operator==(const RobotSpec&) const = default;
};

/// Validated, immutable articulated chain.
class KinematicTree {
 public:
  /// Validates `spec`; throws DataError naming the offending element.
  explicit KinematicTree(RobotSpec spec);

  const RobotSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  int num_links() const { return static_cast<int>(spec_.links.size()); }
  int num_dofs() const { return static_cast<int>(dof_links_.size()); }
  const Link& link(int i) const { return spec_.links[static_cast<size_t>(i)]; }
  int parent_index(int link_index) const { return parent_[static_cast<size_t>(link_index)]; }
  /// Actuated index of the link's joint, or -1 for fixed joints and the root.
  int dof_of_link(int link_index) const { return link_dof_[static_cast<size_t>(link_index)]; }
  int link_of_dof(int dof) const { return dof_links_[static_cast<size_t>(dof)]; }
  const Joint& dof_joint(int dof) const { return *link(link_of_dof(dof)).joint; }
  const std::vector<int>& topological_order() const { return topo_; }
  const RigidTransform& origin(int link_index) const { return origins_[static_cast<size_t>(link_index)]; }

  int link_index(std::string_view id) const;
  std::optional<int> find_link(std::string_view id) const;
  std::optional<int> find_keypoint(std::string_view name) const;
  int keypoint_index(std::string_view name) const;
  int num_keypoints() const { return static_cast<int>(spec_.keypoints.size()); }
  const Keypoint& keypoint(int i) const { return spec_.keypoints[static_cast<size_t>(i)]; }
  int keypoint_link(int i) const { return keypoint_link_[static_cast<size_t>(i)]; }

  /// Actuated dofs on the root-to-link path, root first.
  const std::vector<int>& dof_path(int link_index) const { return dof_path_[static_cast<size_t>(link_index)]; }

  VecX lower_limits() const;
  VecX upper_limits() const;
  /// Joint-space zero clamped into the limits.
  VecX rest_pose() const;
  VecX clamp_to_limits(const Eigen::Ref<const VecX>& q) const;

  std::vector<std::string> dof_names() const;
  bool has_all_inertials() const;

  bool operator==(const KinematicTree& o) const { return spec_ == o.spec_; }

 private:
  void validate_and_index();

  RobotSpec spec_;
  std::unordered_map<std::string, int> link_lookup_;
  std::unordered_map<std::string, int> keypoint_lookup_;
  std::vector<int> parent_;
  std::vector<int> link_dof_;
  std::vector<int> dof_links_;
  std::vector<int> topo_;
  std::vector<int> keypoint_link_;
  std::vector<RigidTransform> origins_;
  std::vector<std::vector<int>> dof_path_;
};

/// World poses of every link for one configuration; the unit of reuse for FK and Jacobians.
struct KinematicState {
  std::vector<RigidTransform> link_pose;   // indexed by link
  std::vector<Vec3> dof_axis_world;         // indexed by dof
  std::vector<Vec3> dof_origin_world;       // indexed by dof
};

KinematicState compute_state(const KinematicTree& tree, const Eigen::Ref<const VecX>& q,
                             const RigidTransform& base = RigidTransform::identity());

Vec3 keypoint_position(const KinematicTree& tree, const KinematicState& state, int keypoint);

/// Writes the 3 x num_dofs Jacobian of `keypoint` into `out` (resized as needed).
void keypoint_jacobian(const KinematicTree& tree, const KinematicState& state, int keypoint,
                       MatX& out);

std::map<std::string, Vec3> forward_kinematics(const KinematicTree& tree,
                                               const Eigen::Ref<const VecX>& q,
                                               const RigidTransform& base = RigidTransform::identity());

MatX keypoint_jacobian(const KinematicTree& tree, const Eigen::Ref<const VecX>& q,
                       std::string_view keypoint);

// ----------------------------------------------------------------------------
// Implementation

inline KinematicTree::KinematicTree(RobotSpec spec) : spec_(std::move(spec)) { validate_and_index(); }

inline void KinematicTree::validate_and_index() {
  const auto& links = spec_.links;
  const int n = static_cast<int>(links.size());
  if (n == 0) throw DataError("robot '" + spec_.name + "': no links");

  for (int i = 0; i < n; ++i) {
    const auto& l = links[static_cast<size_t>(i)];
    if (l.id.empty()) throw DataError("link #" + std::to_string(i) + ": empty id");
    if (!link_lookup_.emplace(l.id, i).second) throw DataError("link '" + l.id + "': duplicate id");
    if (!l.origin_xyz.allFinite() || !l.origin_rpy.allFinite())
      throw DataError("link '" + l.id + "': non-finite origin");
  }

  parent_.assign(static_cast<size_t>(n), -1);
  int root = -1;
  for (int i = 0; i < n; ++i) {
    const auto& l = links[static_cast<size_t>(i)];
    if (l.parent.empty()) {
      if (root >= 0) throw DataError("link '" + l.id + "': second root (first root '" + links[static_cast<size_t>(root)].id + "')");
      root = i;
      continue;
    }
    auto it = link_lookup_.find(l.parent);
    if (it == link_lookup_.end())
      throw DataError("link '" + l.id + "': missing parent '" + l.parent + "'");
    if (it->second == i) throw DataError("link '" + l.id + "': cycle in parent graph");
    parent_[static_cast<size_t>(i)] = it->second;
  }
  if (root < 0) throw DataError("robot '" + spec_.name + "': no root link (cycle in parent graph)");

  // Topological order by depth-first walk from the root; unreached links lie on a cycle.
  std::vector<std::vector<int>> children(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    if (parent_[static_cast<size_t>(i)] >= 0) children[static_cast<size_t>(parent_[static_cast<size_t>(i)])].push_back(i);
  topo_.clear();
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    topo_.push_back(i);
    for (auto it = children[static_cast<size_t>(i)].rbegin(); it != children[static_cast<size_t>(i)].rend(); ++it)
      stack.push_back(*it);
  }
  if (static_cast<int>(topo_.size()) != n) {
    std::vector<bool> seen(static_cast<size_t>(n), false);
    for (int i : topo_) seen[static_cast<size_t>(i)] = true;
    for (int i = 0; i < n; ++i)
      if (!seen[static_cast<size_t>(i)])
        throw DataError("link '" + links[static_cast<size_t>(i)].id + "': cycle in parent graph");
  }

  for (const auto& l : links) {
    if (l.parent.empty() && l.joint && l.joint->type == JointType::kRevolute)
      throw DataError("joint '" + l.id + "': root link cannot carry a revolute joint");
    if (l.joint) {
      const Joint& j = *l.joint;
      if (j.type == JointType::kRevolute) {
        if (!j.axis.allFinite() || std::abs(j.axis.norm() - 1.0) > 1e-9)
          throw DataError("joint '" + l.id + "': axis is not unit norm");
        if (!std::isfinite(j.lower) || !std::isfinite(j.upper))
          throw DataError("joint '" + l.id + "': non-finite limits");
        if (j.lower > j.upper) throw DataError("joint '" + l.id + "': limit_lower > limit_upper");
        if (!std::isfinite(j.damping) || j.damping < 0.0)
          throw DataError("joint '" + l.id + "': damping must be finite and >= 0");
      }
    }
    if (l.inertial) {
      const Inertial& in = *l.inertial;
      if (!std::isfinite(in.mass) || in.mass < 0.0) throw DataError("inertial '" + l.id + "': mass must be >= 0");
      if (!in.com.allFinite() || !in.inertia.allFinite()) throw DataError("inertial '" + l.id + "': non-finite values");
      const double scale = std::max(1.0, in.inertia.cwiseAbs().maxCoeff());
      if ((in.inertia - in.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw DataError("inertial '" + l.id + "': inertia tensor not symmetric");
      Eigen::SelfAdjointEigenSolver<Mat3> es(in.inertia, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-12 * scale)
        throw DataError("inertial '" + l.id + "': inertia tensor not positive semi-definite");
    }
  }

  // Actuated ordering follows joint declaration order.
  link_dof_.assign(static_cast<size_t>(n), -1);
  dof_links_.clear();
  std::vector<bool> declared(static_cast<size_t>(n), false);
  for (const auto& child : spec_.joint_order) {
    auto it = link_lookup_.find(child);
    if (it == link_lookup_.end()) throw DataError("joint '" + child + "': child_link does not exist");
    const int li = it->second;
    if (declared[static_cast<size_t>(li)]) throw DataError("joint '" + child + "': declared twice");
    declared[static_cast<size_t>(li)] = true;
    if (!links[static_cast<size_t>(li)].joint) throw DataError("joint '" + child + "': missing joint data");
    if (links[static_cast<size_t>(li)].joint->type == JointType::kRevolute) {
      link_dof_[static_cast<size_t>(li)] = static_cast<int>(dof_links_.size());
      dof_links_.push_back(li);
    }
  }
  for (int i = 0; i < n; ++i)
    if (links[static_cast<size_t>(i)].joint && !declared[static_cast<size_t>(i)])
      throw DataError("joint '" + links[static_cast<size_t>(i)].id + "': not in joint order");

  origins_.clear();
  for (const auto& l : links) origins_.emplace_back(quat_from_rpy(l.origin_rpy), l.origin_xyz);

  dof_path_.assign(static_cast<size_t>(n), {});
  for (int i : topo_) {
    const int p = parent_[static_cast<size_t>(i)];
    if (p >= 0) dof_path_[static_cast<size_t>(i)] = dof_path_[static_cast<size_t>(p)];
    if (link_dof_[static_cast<size_t>(i)] >= 0) dof_path_[static_cast<size_t>(i)].push_back(link_dof_[static_cast<size_t>(i)]);
  }

  for (const auto& kp : spec_.keypoints) {
    if (kp.name.empty()) throw DataError("keypoint with empty name");
    if (!keypoint_lookup_.emplace(kp.name, static_cast<int>(keypoint_link_.size())).second)
      throw DataError("keypoint '" + kp.name + "': duplicate name");
    auto it = link_lookup_.find(kp.link);
    if (it == link_lookup_.end()) throw DataError("keypoint '" + kp.name + "': unknown link '" + kp.link + "'");
    if (!kp.offset.allFinite()) throw DataError("keypoint '" + kp.name + "': non-finite offset");
    keypoint_link_.push_back(it->second);
  }
}

inline int KinematicTree::link_index(std::string_view id) const {
  auto r = find_link(id);
  if (!r) throw DataError("unknown link '" + std::string(id) + "'");
  return *r;
}

inline std::optional<int> KinematicTree::find_link(std::string_view id) const {
  auto it = link_lookup_.find(std::string(id));
  if (it == link_lookup_.end()) return std::nullopt;
  return it->second;
}

inline std::optional<int> KinematicTree::find_keypoint(std::string_view name) const {
  auto it = keypoint_lookup_.find(std::string(name));
  if (it == keypoint_lookup_.end()) return std::nullopt;
  return it->second;
}

inline int KinematicTree::keypoint_index(std::string_view name) const {
  auto r = find_keypoint(name);
  if (!r) throw DataError("robot '" + spec_.name + "': unknown keypoint '" + std::string(name) + "'");
  return *r;
}

inline VecX KinematicTree::lower_limits() const {
  VecX v(num_dofs());
  for (int d = 0; d < num_dofs(); ++d) v[d] = dof_joint(d).lower;
  return v;
}

inline VecX KinematicTree::upper_limits() const {
  VecX v(num_dofs());
  for (int d = 0; d < num_dofs(); ++d) v[d] = dof_joint(d).upper;
  return v;
}

inline VecX KinematicTree::rest_pose() const { return clamp_to_limits(VecX::Zero(num_dofs())); }

inline VecX KinematicTree::clamp_to_limits(const Eigen::Ref<const VecX>& q) const {
  require_size(q.size(), num_dofs(), "clamp_to_limits");
  return q.cwiseMax(lower_limits()).cwiseMin(upper_limits());
}

inline std::vector<std::string> KinematicTree::dof_names() const {
  std::vector<std::string> out;
  out.reserve(dof_links_.size());
  for (int li : dof_links_) out.push_back(link(li).id);
  return out;
}

inline bool KinematicTree::has_all_inertials() const {
  for (const auto& l : spec_.links)
    if (!l.inertial) return false;
  return true;
}

inline KinematicState compute_state(const KinematicTree& tree, const Eigen::Ref<const VecX>& q,
                                    const RigidTransform& base) {
  require_size(q.size(), tree.num_dofs(), "joint vector");
  KinematicState s;
  s.link_pose.resize(static_cast<size_t>(tree.num_links()));
  s.dof_axis_world.resize(static_cast<size_t>(tree.num_dofs()));
  s.dof_origin_world.resize(static_cast<size_t>(tree.num_dofs()));
  for (int i : tree.topological_order()) {
    const int p = tree.parent_index(i);
    RigidTransform pose = (p >= 0 ? s.link_pose[static_cast<size_t>(p)] : base) * tree.origin(i);
    const int dof = tree.dof_of_link(i);
    if (dof >= 0) {
      const Vec3& axis = tree.link(i).joint->axis;
      pose.rotation = canonical(pose.rotation * Eigen::Quaterniond(Eigen::AngleAxisd(q[dof], axis)));
      s.dof_axis_world[static_cast<size_t>(dof)] = pose.rotation * axis;
      s.dof_origin_world[static_cast<size_t>(dof)] = pose.translation;
    }
    s.link_pose[static_cast<size_t>(i)] = pose;
  }
  return s;
}

inline Vec3 keypoint_position(const KinematicTree& tree, const KinematicState& state, int keypoint) {
  return state.link_pose[static_cast<size_t>(tree.keypoint_link(keypoint))].apply(tree.keypoint(keypoint).offset);
}

inline void keypoint_jacobian(const KinematicTree& tree, const KinematicState& state, int keypoint,
                              MatX& out) {
  out.setZero(3, tree.num_dofs());
  const Vec3 p = keypoint_position(tree, state, keypoint);
  for (int dof : tree.dof_path(tree.keypoint_link(keypoint))) {
    const auto d = static_cast<size_t>(dof);
    out.col(dof) = state.dof_axis_world[d].cross(p - state.dof_origin_world[d]);
  }
}

inline std::map<std::string, Vec3> forward_kinematics(const KinematicTree& tree,
                                                      const Eigen::Ref<const VecX>& q,
                                                      const RigidTransform& base) {
  const KinematicState s = compute_state(tree, q, base);
  std::map<std::string, Vec3> out;
  for (int k = 0; k < tree.num_keypoints(); ++k) out.emplace(tree.keypoint(k).name, keypoint_position(tree, s, k));
  return out;
}

inline MatX keypoint_jacobian(const KinematicTree& tree, const Eigen::Ref<const VecX>& q,
                              std::string_view keypoint) {
  const int k = tree.keypoint_index(keypoint);
  const KinematicState s = compute_state(tree, q);
  MatX j;
  keypoint_jacobian(tree, s, k, j);
  return j;
}

}  // namespace dexretarget
