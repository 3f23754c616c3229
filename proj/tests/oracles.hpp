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

// Independent reference computations for the test suites. Nothing here calls
// the library's kinematics or dynamics routines; trees are only read through
// their spec.

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dexretarget/kinematics.hpp"

#ifndef DEXRETARGET_DATA_DIR
#define DEXRETARGET_DATA_DIR "data"
#endif

namespace oracle {

using dexretarget::KinematicTree;
using dexretarget::VecX;
using dexretarget::MatX;
using dexretarget::Vec3;
using dexretarget::Mat3;
using Mat4 = Eigen::Matrix4d;

inline std::string data_path(const std::string& rel) { return std::string(DEXRETARGET_DATA_DIR) + "/" + rel; }

inline Mat3 rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}
inline Mat3 rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}
inline Mat3 rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

/// Rodrigues' formula written out.
inline Mat3 rot_axis(const Vec3& k, double a) {
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(a) * kx + (1.0 - std::cos(a)) * kx * kx;
}

inline Mat4 homogeneous(const Mat3& r, const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

/// World 4x4 pose of every link by naive recursion over parents.
inline std::map<std::string, Mat4> naive_link_poses(const KinematicTree& tree, const VecX& q) {
  const auto& spec = tree.spec();
  std::map<std::string, const dexretarget::Link*> by_id;
  for (const auto& l : spec.links) by_id[l.id] = &l;
  std::map<std::string, int> dof;
  int k = 0;
  for (const auto& child : spec.joint_order)
    if (by_id.at(child)->joint->type == dexretarget::JointType::kRevolute) dof[child] = k++;
  std::map<std::string, Mat4> pose;
  bool progress = true;
  while (pose.size() < spec.links.size() && progress) {
    progress = false;
    for (const auto& l : spec.links) {
      if (pose.count(l.id)) continue;
      Mat4 parent = Mat4::Identity();
      if (!l.parent.empty()) {
        auto it = pose.find(l.parent);
        if (it == pose.end()) continue;
        parent = it->second;
      }
      const Mat3 r0 = rot_z(l.origin_rpy.z()) * rot_y(l.origin_rpy.y()) * rot_x(l.origin_rpy.x());
      Mat4 m = parent * homogeneous(r0, l.origin_xyz);
      auto d = dof.find(l.id);
      if (d != dof.end() && d->second >= 0) m = m * homogeneous(rot_axis(l.joint->axis, q[d->second]), Vec3::Zero());
      pose[l.id] = m;
      progress = true;
    }
  }
  return pose;
}

inline std::map<std::string, Vec3> naive_fk(const KinematicTree& tree, const VecX& q) {
  const auto poses = naive_link_poses(tree, q);
  std::map<std::string, Vec3> out;
  for (const auto& kp : tree.spec().keypoints) {
    const Mat4& m = poses.at(kp.link);
    out[kp.name] = (m * kp.offset.homogeneous()).head<3>();
  }
  return out;
}

/// Central-difference Jacobian of a keypoint through the naive oracle.
inline MatX fd_jacobian(const KinematicTree& tree, const VecX& q, const std::string& kp, double h = 1e-6) {
  const int n = tree.num_dofs();
  MatX j(3, n);
  for (int i = 0; i < n; ++i) {
    VecX qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    j.col(i) = (naive_fk(tree, qp).at(kp) - naive_fk(tree, qm).at(kp)) / (2.0 * h);
  }
  return j;
}

inline Vec3 vee(const Mat3& s) { return Vec3(0.5 * (s(2, 1) - s(1, 2)), 0.5 * (s(0, 2) - s(2, 0)), 0.5 * (s(1, 0) - s(0, 1))); }

/// Mass matrix from finite-difference COM and angular Jacobians.
inline MatX fd_mass_matrix(const KinematicTree& tree, const VecX& q, double h = 1e-5) {
  const int n = tree.num_dofs();
  MatX m = MatX::Zero(n, n);
  const auto base = naive_link_poses(tree, q);
  std::vector<std::map<std::string, Mat4>> plus, minus;
  for (int i = 0; i < n; ++i) {
    VecX qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    plus.push_back(naive_link_poses(tree, qp));
    minus.push_back(naive_link_poses(tree, qm));
  }
  for (const auto& l : tree.spec().links) {
    if (!l.inertial) continue;
    const auto& in = *l.inertial;
    MatX jv(3, n), jw(3, n);
    const Mat3 r = base.at(l.id).topLeftCorner<3, 3>();
    for (int i = 0; i < n; ++i) {
      const Mat4& p = plus[static_cast<size_t>(i)].at(l.id);
      const Mat4& mi = minus[static_cast<size_t>(i)].at(l.id);
      const Vec3 cp = (p * in.com.homogeneous()).head<3>();
      const Vec3 cm = (mi * in.com.homogeneous()).head<3>();
      jv.col(i) = (cp - cm) / (2.0 * h);
      const Mat3 dr = (p.topLeftCorner<3, 3>() - mi.topLeftCorner<3, 3>()) / (2.0 * h);
      jw.col(i) = vee(dr * r.transpose());
    }
    const Mat3 iw = r * in.inertia * r.transpose();
    m += in.mass * jv.transpose() * jv + jw.transpose() * iw * jw;
  }
  return m;
}

inline double potential_energy(const KinematicTree& tree, const VecX& q, const Vec3& g) {
  const auto poses = naive_link_poses(tree, q);
  double v = 0.0;
  for (const auto& l : tree.spec().links)
    if (l.inertial) v -= l.inertial->mass * g.dot((poses.at(l.id) * l.inertial->com.homogeneous()).head<3>());
  return v;
}

/// Euler-Lagrange torques with L = 1/2 qd' M(q) qd - V(q), all derivatives by finite differences.
inline VecX lagrangian_torque(const KinematicTree& tree, const VecX& q, const VecX& qd, const VecX& qdd, const Vec3& g,
                              double h = 1e-4) {
  const int n = tree.num_dofs();
  const MatX m = fd_mass_matrix(tree, q);
  VecX tau = m * qdd;
  MatX mdot = MatX::Zero(n, n);
  VecX dtdq(n), dvdq(n);
  for (int k = 0; k < n; ++k) {
    VecX qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    const MatX dm = (fd_mass_matrix(tree, qp) - fd_mass_matrix(tree, qm)) / (2.0 * h);
    mdot += dm * qd[k];
    dtdq[k] = 0.5 * qd.dot(dm * qd);
    dvdq[k] = (potential_energy(tree, qp, g) - potential_energy(tree, qm, g)) / (2.0 * h);
  }
  tau += mdot * qd - dtdq + dvdq;
  std::map<std::string, const dexretarget::Link*> by_id;
  for (const auto& l : tree.spec().links) by_id[l.id] = &l;
  int i = 0;
  for (const auto& child : tree.spec().joint_order) {
    const auto& j = *by_id.at(child)->joint;
    if (j.type != dexretarget::JointType::kRevolute) continue;
    tau[i] += j.damping * qd[i];
    ++i;
  }
  return tau;
}

/// Random tree: `dofs` revolute joints plus a few fixed links, arbitrary
/// branching, random frames, inertials and keypoints.
inline KinematicTree random_tree(std::mt19937_64& rng, int dofs, bool chain = false, double damping = 0.0) {
  using namespace dexretarget;
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.05, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  RobotSpec spec;
  spec.name = "random";
  Link root;
  root.id = "root";
  Inertial ri;
  ri.mass = 1.0;
  ri.inertia = Mat3::Identity() * 0.01;
  root.inertial = ri;
  spec.links.push_back(root);
  int fixed_budget = chain ? 0 : 2;
  int made = 0;
  int idx = 0;
  while (made < dofs || fixed_budget > 0) {
    const bool revolute = made < dofs && (fixed_budget == 0 || std::uniform_int_distribution<int>(0, 3)(rng) > 0);
    Link l;
    l.id = "l" + std::to_string(++idx);
    if (chain) {
      l.parent = spec.links.back().id;
    } else {
      std::uniform_int_distribution<size_t> pick(0, spec.links.size() - 1);
      l.parent = spec.links[pick(rng)].id;
    }
    l.origin_xyz = Vec3(0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng));
    l.origin_rpy = Vec3(3.0 * u(rng), 1.4 * u(rng), 3.0 * u(rng));
    Joint j;
    if (revolute) {
      j.type = JointType::kRevolute;
      j.axis = Vec3(n01(rng), n01(rng), n01(rng)).normalized();
      j.lower = -2.5;
      j.upper = 2.5;
      j.damping = damping;
      ++made;
    } else {
      j.type = JointType::kFixed;
      --fixed_budget;
    }
    l.joint = j;
    Inertial in;
    in.mass = 0.2 + pos(rng);
    in.com = Vec3(0.2 * u(rng), 0.2 * u(rng), 0.2 * u(rng));
    Mat3 a;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = 0.1 * u(rng);
    const Mat3 sym = a * a.transpose() + 1e-4 * Mat3::Identity();
    in.inertia = 0.5 * (sym + sym.transpose());
    l.inertial = in;
    spec.joint_order.push_back(l.id);
    spec.links.push_back(l);
  }
  int kp = 0;
  for (const auto& l : spec.links) {
    if (l.id == "root" || std::uniform_int_distribution<int>(0, 2)(rng) == 0) continue;
    spec.keypoints.push_back({"k" + std::to_string(kp++), l.id, Vec3(0.2 * u(rng), 0.2 * u(rng), 0.2 * u(rng))});
  }
  spec.keypoints.push_back({"k" + std::to_string(kp++), spec.links.back().id, Vec3(0.1, 0.0, 0.05)});
  spec.keypoints.push_back({"on_root", "root", Vec3(0.1, 0.2, 0.3)});
  return KinematicTree(std::move(spec));
}

inline VecX random_q(std::mt19937_64& rng, int n, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  VecX q(n);
  for (int i = 0; i < n; ++i) q[i] = u(rng);
  return q;
}

inline double rel_err(const MatX& a, const MatX& b) {
  const double d = (a - b).norm();
  if (d == 0.0) return 0.0;
  return d / std::max(b.norm(), 1e-12);
}

}  // namespace oracle
