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

// Customized 45-DoF hand built from a 10-dimensional shape vector.
//
// Each finger is a chain of three anatomical joints; each anatomical joint is
// three stacked single-axis revolutes about x (twist), y (flexion) and z
// (abduction). Fingers point along +x at rest, flexion curls toward -z.

#include <array>
#include <numbers>
#include <string>
#include <vector>

#include "dexretarget/kinematics.hpp"
#include "dexretarget/robot_io.hpp"

namespace dexretarget {

inline constexpr int kShapeDim = 10;
inline constexpr int kNumFingers = 5;
inline constexpr int kJointsPerFinger = 3;
inline constexpr int kBoneCount = kNumFingers * kJointsPerFinger;
inline constexpr int kHandDofs = kBoneCount * 3;
inline constexpr double kShapeClamp = 5.0;
inline constexpr double kHandJointLimit = 1.6;
inline constexpr std::array<const char*, kNumFingers> kFingerNames = {"thumb", "index", "middle", "ring", "pinky"};

using ShapeVector = Eigen::Matrix<double, kShapeDim, 1>;

/// Shape coefficients, clamped element-wise into [-5, 5] on construction.
struct HandShapeParams {
  ShapeVector beta = ShapeVector::Zero();

  HandShapeParams() = default;
  explicit HandShapeParams(const Eigen::Ref<const VecX>& b) {
    require_size(b.size(), kShapeDim, "shape vector");
    if (!b.allFinite()) throw DataError("shape vector contains non-finite values");
    beta = b.cwiseMax(-kShapeClamp).cwiseMin(kShapeClamp);
  }
};

struct FingerTemplate {
  std::string name;
  Vec3 base_xyz = Vec3::Zero();  // first joint center in the palm frame
  Vec3 base_rpy = Vec3::Zero();
  std::array<double, kJointsPerFinger> lengths{};
  std::array<double, kJointsPerFinger> radii{};
};

struct HandTemplate {
  Vec3 palm_box = Vec3::Zero();  // x (length), y (width), z (thickness)
  double palm_mass = 0.0;
  double finger_density = 0.0;  // kg/m^3, for capsule masses
  std::array<FingerTemplate, kNumFingers> fingers;
  /// Row i maps beta_i to per-bone length offsets; columns are bones, finger-major.
  Eigen::Matrix<double, kShapeDim, kBoneCount> basis = Eigen::Matrix<double, kShapeDim, kBoneCount>::Zero();
  double middle_length_tolerance = 0.0;

  Eigen::Matrix<double, kBoneCount, 1> default_lengths() const {
    Eigen::Matrix<double, kBoneCount, 1> l;
    for (int f = 0; f < kNumFingers; ++f)
      for (int j = 0; j < kJointsPerFinger; ++j) l[f * kJointsPerFinger + j] = fingers[static_cast<size_t>(f)].lengths[static_cast<size_t>(j)];
    return l;
  }

  /// Throws DataError unless every length is positive for every clamped shape vector.
  void validate() const {
    if (!(palm_box.array() > 0.0).all()) throw DataError("hand template: palm box dimensions must be > 0");
    if (!(palm_mass > 0.0) || !(finger_density > 0.0)) throw DataError("hand template: masses must be > 0");
    if (!basis.allFinite()) throw DataError("hand template: non-finite basis");
    const auto l = default_lengths();
    for (int f = 0; f < kNumFingers; ++f) {
      const auto& ft = fingers[static_cast<size_t>(f)];
      if (ft.name != kFingerNames[static_cast<size_t>(f)])
        throw DataError("hand template: finger " + std::to_string(f) + " must be '" + kFingerNames[static_cast<size_t>(f)] + "'");
      for (int j = 0; j < kJointsPerFinger; ++j) {
        if (!(ft.lengths[static_cast<size_t>(j)] > 0.0) || !(ft.radii[static_cast<size_t>(j)] > 0.0))
          throw DataError("hand template: finger '" + ft.name + "' segment " + std::to_string(j) + " must have positive length and radius");
      }
    }
    for (int b = 0; b < kBoneCount; ++b) {
      if (kShapeClamp * basis.col(b).cwiseAbs().sum() >= l[b])
        throw DataError("hand template: basis column " + std::to_string(b) + " can drive a bone length non-positive");
    }
  }
};

/// Bone lengths for `shape`: template defaults plus the linear basis offset.
inline Eigen::Matrix<double, kBoneCount, 1> bone_lengths(const HandShapeParams& shape, const HandTemplate& tmpl) {
  return tmpl.default_lengths() + tmpl.basis.transpose() * shape.beta;
}

/// Average adult-male proportions; wrist to middle fingertip is 0.193 m.
inline HandTemplate default_template() {
  HandTemplate t;
  t.palm_box = Vec3(0.098, 0.084, 0.025);
  t.palm_mass = 0.40;
  t.finger_density = 1100.0;
  t.middle_length_tolerance = 0.005;
  t.fingers[0] = {"thumb", Vec3(0.025, 0.030, -0.010), Vec3(0.0, 0.0, 0.8), {0.046, 0.032, 0.027}, {0.0110, 0.0100, 0.0090}};
  t.fingers[1] = {"index", Vec3(0.094, 0.027, 0.0), Vec3(0.0, 0.0, 0.05), {0.043, 0.025, 0.021}, {0.0095, 0.0085, 0.0078}};
  t.fingers[2] = {"middle", Vec3(0.098, 0.008, 0.0), Vec3(0.0, 0.0, 0.0), {0.046, 0.028, 0.021}, {0.0098, 0.0088, 0.0080}};
  t.fingers[3] = {"ring", Vec3(0.094, -0.011, 0.0), Vec3(0.0, 0.0, -0.05), {0.043, 0.027, 0.021}, {0.0090, 0.0082, 0.0075}};
  t.fingers[4] = {"pinky", Vec3(0.085, -0.029, 0.0), Vec3(0.0, 0.0, -0.12), {0.034, 0.019, 0.019}, {0.0080, 0.0072, 0.0068}};

  const auto l = t.default_lengths();
  auto& B = t.basis;
  for (int b = 0; b < kBoneCount; ++b) {
    const int finger = b / kJointsPerFinger;
    const int segment = b % kJointsPerFinger;
    B(0, b) = 0.030 * l[b];                                     // overall size
    B(1 + finger, b) = (finger == 0 ? 0.030 : 0.025) * l[b];    // per-finger length
    B(6 + segment, b) = 0.020 * l[b];                           // per-segment proportion
    const double radial = finger <= 1 ? 1.0 : finger == 2 ? 0.0 : -1.0;
    B(9, b) = 0.015 * radial * l[b];                            // radial/ulnar gradient
  }
  return t;
}

namespace detail {

inline Inertial capsule_inertial(double length, double radius, double density) {
  Inertial in;
  in.mass = density * std::numbers::pi * radius * radius * length;
  in.com = Vec3(0.5 * length, 0.0, 0.0);
  const double ixx = 0.5 * in.mass * radius * radius;
  const double iyy = in.mass * (3.0 * radius * radius + length * length) / 12.0;
  in.inertia = Vec3(ixx, iyy, iyy).asDiagonal();
  return in;
}

inline Inertial massless() {
  Inertial in;
  in.mass = 0.0;
  return in;
}

}  // namespace detail

inline std::string hand_joint_link(int finger, int joint, int axis) {
  static constexpr const char* kAxis[] = {"rx", "ry", "rz"};
  return std::string(kFingerNames[static_cast<size_t>(finger)]) + "_j" + std::to_string(joint) + "_" + kAxis[axis];
}

/// Builds the 45-DoF customized hand tree for a user's shape.
inline KinematicTree build_custom_hand(const HandShapeParams& shape, const HandTemplate& tmpl) {
  tmpl.validate();
  const auto lengths = bone_lengths(shape, tmpl);

  RobotSpec spec;
  spec.name = "customized_hand";

  Link palm;
  palm.id = "palm";
  const Vec3& box = tmpl.palm_box;
  Inertial pin;
  pin.mass = tmpl.palm_mass;
  pin.com = Vec3(0.5 * box.x(), 0.0, 0.0);
  pin.inertia = Vec3(pin.mass * (box.y() * box.y() + box.z() * box.z()) / 12.0,
                     pin.mass * (box.x() * box.x() + box.z() * box.z()) / 12.0,
                     pin.mass * (box.x() * box.x() + box.y() * box.y()) / 12.0)
                    .asDiagonal();
  palm.inertial = pin;
  palm.geometry = Geometry{"box", {box.x(), box.y(), box.z()}};
  spec.links.push_back(palm);
  spec.keypoints.push_back({"wrist", "palm", Vec3::Zero()});

  const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (int f = 0; f < kNumFingers; ++f) {
    const FingerTemplate& ft = tmpl.fingers[static_cast<size_t>(f)];
    const std::string fname = ft.name;
    spec.keypoints.push_back({fname + "_j0", "palm", ft.base_xyz});
    std::string parent = "palm";
    for (int j = 0; j < kJointsPerFinger; ++j) {
      for (int a = 0; a < 3; ++a) {
        Link l;
        l.id = hand_joint_link(f, j, a);
        l.parent = parent;
        if (a == 0) {
          if (j == 0) {
            l.origin_xyz = ft.base_xyz;
            l.origin_rpy = ft.base_rpy;
          } else {
            l.origin_xyz = Vec3(lengths[f * kJointsPerFinger + j - 1], 0.0, 0.0);
          }
        }
        Joint joint;
        joint.type = JointType::kRevolute;
        joint.axis = axes[a];
        joint.lower = -kHandJointLimit;
        joint.upper = kHandJointLimit;
        l.joint = joint;
        const double len = lengths[f * kJointsPerFinger + j];
        const double rad = ft.radii[static_cast<size_t>(j)];
        if (a == 2) {
          l.inertial = detail::capsule_inertial(len, rad, tmpl.finger_density);
          l.geometry = Geometry{"capsule", {rad, len}};
        } else {
          l.inertial = detail::massless();
        }
        spec.joint_order.push_back(l.id);
        parent = l.id;
        spec.links.push_back(std::move(l));
      }
      const double len = lengths[f * kJointsPerFinger + j];
      const double rad = ft.radii[static_cast<size_t>(j)];
      const std::string end_name = j + 1 < kJointsPerFinger ? fname + "_j" + std::to_string(j + 1) : fname + "_tip";
      spec.keypoints.push_back({end_name, parent, Vec3(len, 0.0, 0.0)});
      // Dorsal marker; together with the bone end it pins down the full bone rotation.
      spec.keypoints.push_back({fname + "_s" + std::to_string(j), parent, Vec3(0.5 * len, 0.0, rad)});
    }
  }
  return KinematicTree(std::move(spec));
}

inline std::vector<std::string> fingertip_names(const KinematicTree& tree) {
  std::vector<std::string> out;
  for (const char* f : kFingerNames) {
    const std::string n = std::string(f) + "_tip";
    if (tree.find_keypoint(n)) out.push_back(n);
  }
  return out;
}

// ----------------------------------------------------------------------------
// Template asset (JSON)

inline Json hand_template_to_json(const HandTemplate& t) {
  using detail::vec_json;
  Json doc = Json::object();
  doc["format"] = "dexhand-template/1";
  doc["palm_box"] = vec_json(t.palm_box);
  doc["palm_mass"] = t.palm_mass;
  doc["finger_density"] = t.finger_density;
  doc["middle_length_tolerance"] = t.middle_length_tolerance;
  Json fingers = Json::array();
  for (const auto& f : t.fingers) {
    fingers.push_back(Json{{"name", f.name},
                           {"base_xyz", vec_json(f.base_xyz)},
                           {"base_rpy", vec_json(f.base_rpy)},
                           {"lengths", f.lengths},
                           {"radii", f.radii}});
  }
  doc["fingers"] = std::move(fingers);
  Json basis = Json::array();
  for (int i = 0; i < kShapeDim; ++i) {
    Json row = Json::array();
    for (int b = 0; b < kBoneCount; ++b) row.push_back(t.basis(i, b));
    basis.push_back(std::move(row));
  }
  doc["basis"] = std::move(basis);
  return doc;
}

inline HandTemplate hand_template_from_json(const Json& doc) {
  using namespace detail;
  const std::string where = "hand template";
  if (!doc.is_object() || doc.value("format", "") != "dexhand-template/1")
    throw DataError(where + ": expected format 'dexhand-template/1'");
  HandTemplate t;
  try {
    t.palm_box = vec3_field(doc, "palm_box", where);
    t.palm_mass = number_field(doc, "palm_mass", where);
    t.finger_density = number_field(doc, "finger_density", where);
    t.middle_length_tolerance = number_field(doc, "middle_length_tolerance", where, 0.0);
    const Json& fingers = doc.at("fingers");
    if (!fingers.is_array() || fingers.size() != kNumFingers) throw DataError(where + ": 'fingers' must list 5 fingers");
    for (size_t f = 0; f < kNumFingers; ++f) {
      const Json& jf = fingers[f];
      FingerTemplate ft;
      ft.name = string_field(jf, "name", where);
      ft.base_xyz = vec3_field(jf, "base_xyz", where);
      ft.base_rpy = vec3_field(jf, "base_rpy", where);
      ft.lengths = jf.at("lengths").get<std::array<double, kJointsPerFinger>>();
      ft.radii = jf.at("radii").get<std::array<double, kJointsPerFinger>>();
      t.fingers[f] = std::move(ft);
    }
    const Json& basis = doc.at("basis");
    if (!basis.is_array() || basis.size() != kShapeDim) throw DataError(where + ": 'basis' must have 10 rows");
    for (int i = 0; i < kShapeDim; ++i) {
      const Json& row = basis[static_cast<size_t>(i)];
      if (!row.is_array() || row.size() != kBoneCount) throw DataError(where + ": basis row must have 15 entries");
      for (int b = 0; b < kBoneCount; ++b) t.basis(i, b) = row[static_cast<size_t>(b)].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  t.validate();
  return t;
}

inline HandTemplate load_hand_template(const std::filesystem::path& path) {
  try {
    return hand_template_from_json(Json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// Shape file: {"shape": [10 numbers]} or a bare 10-array.
inline HandShapeParams shape_from_json(const Json& doc) {
  const Json& a = doc.is_object() && doc.contains("shape") ? doc.at("shape") : doc;
  if (!a.is_array() || a.size() != static_cast<size_t>(kShapeDim))
    throw DataError("shape file: expected an array of " + std::to_string(kShapeDim) + " numbers");
  VecX b(kShapeDim);
  for (int i = 0; i < kShapeDim; ++i) {
    if (!a[static_cast<size_t>(i)].is_number()) throw DataError("shape file: entry " + std::to_string(i) + " is not a number");
    b[i] = a[static_cast<size_t>(i)].get<double>();
  }
  return HandShapeParams(b);
}

inline HandShapeParams load_shape_file(const std::filesystem::path& path) {
  try {
    return shape_from_json(Json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace dexretarget
