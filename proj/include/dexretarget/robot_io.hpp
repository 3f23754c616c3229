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

// Robot description documents (JSON, one robot per file).
//
//   { "name": ...,
//     "links":     [{"id", "parent", "origin_xyz", "origin_rpy"}],
//     "joints":    [{"child_link", "type", "axis", "limit_lower", "limit_upper", "damping"}],
//     "inertials": [{"link", "mass", "com", "inertia_6"}],   // ixx ixy ixz iyy iyz izz
//     "keypoints": [{"name", "link", "offset"}],
//     "geometry":  [{"link", "shape", "size"}] }              // optional

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dexretarget/kinematics.hpp"

namespace dexretarget {

using Json = nlohmann::ordered_json;

namespace detail {

inline Vec3 vec3_field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  const Json& a = obj.at(key);
  if (!a.is_array() || a.size() != 3) throw DataError(where + ": field '" + key + "' must be a 3-array");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!a[static_cast<size_t>(i)].is_number()) throw DataError(where + ": field '" + key + "' must be numeric");
    v[i] = a[static_cast<size_t>(i)].get<double>();
  }
  return v;
}

inline double number_field(const Json& obj, const char* key, const std::string& where,
                           std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw DataError(where + ": missing field '" + key + "'");
  }
  if (!obj.at(key).is_number()) throw DataError(where + ": field '" + key + "' must be numeric");
  return obj.at(key).get<double>();
}

inline std::string string_field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string())
    throw DataError(where + ": missing string field '" + key + "'");
  return obj.at(key).get<std::string>();
}

inline const Json& array_field(const Json& doc, const char* key, bool required) {
  static const Json kEmpty = Json::array();
  if (!doc.contains(key)) {
    if (required) throw DataError(std::string("robot description: missing array '") + key + "'");
    return kEmpty;
  }
  if (!doc.at(key).is_array()) throw DataError(std::string("robot description: '") + key + "' must be an array");
  return doc.at(key);
}

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

inline RobotSpec robot_spec_from_json(const Json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw DataError("robot description: top level must be an object");
  RobotSpec spec;
  spec.name = string_field(doc, "name", "robot description");

  std::unordered_map<std::string, size_t> index;
  for (const Json& jl : array_field(doc, "links", true)) {
    const std::string id = jl.contains("id") && jl["id"].is_string() ? jl["id"].get<std::string>() : "";
    const std::string where = "link '" + id + "'";
    if (id.empty()) throw DataError("link: missing string field 'id'");
    Link l;
    l.id = id;
    if (jl.contains("parent") && !jl["parent"].is_null()) {
      if (!jl["parent"].is_string()) throw DataError(where + ": 'parent' must be a string or null");
      l.parent = jl["parent"].get<std::string>();
    }
    l.origin_xyz = jl.contains("origin_xyz") ? vec3_field(jl, "origin_xyz", where) : Vec3::Zero();
    l.origin_rpy = jl.contains("origin_rpy") ? vec3_field(jl, "origin_rpy", where) : Vec3::Zero();
    if (!index.emplace(id, spec.links.size()).second) throw DataError(where + ": duplicate id");
    spec.links.push_back(std::move(l));
  }

  auto find = [&](const std::string& id, const std::string& where) -> Link& {
    auto it = index.find(id);
    if (it == index.end()) throw DataError(where + ": references unknown link '" + id + "'");
    return spec.links[it->second];
  };

  for (const Json& jj : array_field(doc, "joints", false)) {
    const std::string child = string_field(jj, "child_link", "joint");
    const std::string where = "joint '" + child + "'";
    Link& l = find(child, where);
    if (l.joint) throw DataError(where + ": declared twice");
    Joint j;
    const std::string type = string_field(jj, "type", where);
    if (type == "revolute") {
      j.type = JointType::kRevolute;
      j.axis = vec3_field(jj, "axis", where);
      j.lower = number_field(jj, "limit_lower", where);
      j.upper = number_field(jj, "limit_upper", where);
      j.damping = number_field(jj, "damping", where, 0.0);
    } else if (type == "fixed") {
      j.type = JointType::kFixed;
      j.axis = jj.contains("axis") ? vec3_field(jj, "axis", where) : Vec3::UnitZ();
      j.lower = number_field(jj, "limit_lower", where, 0.0);
      j.upper = number_field(jj, "limit_upper", where, 0.0);
      j.damping = number_field(jj, "damping", where, 0.0);
    } else {
      throw DataError(where + ": unsupported joint type '" + type + "'");
    }
    l.joint = j;
    spec.joint_order.push_back(child);
  }

  for (const Json& ji : array_field(doc, "inertials", false)) {
    const std::string link = string_field(ji, "link", "inertial");
    const std::string where = "inertial '" + link + "'";
    Link& l = find(link, where);
    if (l.inertial) throw DataError(where + ": declared twice");
    Inertial in;
    in.mass = number_field(ji, "mass", where);
    in.com = ji.contains("com") ? vec3_field(ji, "com", where) : Vec3::Zero();
    if (!ji.contains("inertia_6") || !ji["inertia_6"].is_array() || ji["inertia_6"].size() != 6)
      throw DataError(where + ": 'inertia_6' must be a 6-array");
    double v[6];
    for (size_t i = 0; i < 6; ++i) {
      if (!ji["inertia_6"][i].is_number()) throw DataError(where + ": 'inertia_6' must be numeric");
      v[i] = ji["inertia_6"][i].get<double>();
    }
    in.inertia << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
    l.inertial = in;
  }

  for (const Json& jk : array_field(doc, "keypoints", false)) {
    const std::string name = string_field(jk, "name", "keypoint");
    const std::string where = "keypoint '" + name + "'";
    Keypoint kp;
    kp.name = name;
    kp.link = string_field(jk, "link", where);
    kp.offset = jk.contains("offset") ? vec3_field(jk, "offset", where) : Vec3::Zero();
    spec.keypoints.push_back(std::move(kp));
  }

  for (const Json& jg : array_field(doc, "geometry", false)) {
    const std::string link = string_field(jg, "link", "geometry");
    const std::string where = "geometry '" + link + "'";
    Link& l = find(link, where);
    Geometry g;
    g.shape = string_field(jg, "shape", where);
    if (!jg.contains("size") || !jg["size"].is_array()) throw DataError(where + ": 'size' must be an array");
    for (const Json& s : jg["size"]) {
      if (!s.is_number()) throw DataError(where + ": 'size' must be numeric");
      g.size.push_back(s.get<double>());
    }
    const size_t expected = g.shape == "box" ? 3 : g.shape == "capsule" ? 2 : 0;
    if (expected == 0) throw DataError(where + ": unknown shape '" + g.shape + "'");
    if (g.size.size() != expected) throw DataError(where + ": wrong size arity for " + g.shape);
    l.geometry = std::move(g);
  }
  return spec;
}

inline Json robot_spec_to_json(const RobotSpec& spec) {
  using detail::vec_json;
  Json doc = Json::object();
  doc["name"] = spec.name;
  Json links = Json::array();
  for (const Link& l : spec.links) {
    Json jl = Json::object();
    jl["id"] = l.id;
    jl["parent"] = l.parent.empty() ? Json(nullptr) : Json(l.parent);
    jl["origin_xyz"] = vec_json(l.origin_xyz);
    jl["origin_rpy"] = vec_json(l.origin_rpy);
    links.push_back(std::move(jl));
  }
  doc["links"] = std::move(links);

  std::unordered_map<std::string, const Link*> by_id;
  for (const Link& l : spec.links) by_id[l.id] = &l;

  Json joints = Json::array();
  for (const auto& child : spec.joint_order) {
    const Joint& j = *by_id.at(child)->joint;
    Json jj = Json::object();
    jj["child_link"] = child;
    jj["type"] = j.type == JointType::kRevolute ? "revolute" : "fixed";
    jj["axis"] = vec_json(j.axis);
    jj["limit_lower"] = j.lower;
    jj["limit_upper"] = j.upper;
    jj["damping"] = j.damping;
    joints.push_back(std::move(jj));
  }
  doc["joints"] = std::move(joints);

  Json inertials = Json::array();
  for (const Link& l : spec.links) {
    if (!l.inertial) continue;
    const Mat3& m = l.inertial->inertia;
    Json ji = Json::object();
    ji["link"] = l.id;
    ji["mass"] = l.inertial->mass;
    ji["com"] = vec_json(l.inertial->com);
    ji["inertia_6"] = Json::array({m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2)});
    inertials.push_back(std::move(ji));
  }
  doc["inertials"] = std::move(inertials);

  Json keypoints = Json::array();
  for (const Keypoint& k : spec.keypoints)
    keypoints.push_back(Json{{"name", k.name}, {"link", k.link}, {"offset", vec_json(k.offset)}});
  doc["keypoints"] = std::move(keypoints);

  Json geometry = Json::array();
  for (const Link& l : spec.links)
    if (l.geometry) geometry.push_back(Json{{"link", l.id}, {"shape", l.geometry->shape}, {"size", l.geometry->size}});
  if (!geometry.empty()) doc["geometry"] = std::move(geometry);
  return doc;
}

inline KinematicTree load_robot(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("robot description: parse error: ") + e.what());
  }
  return KinematicTree(robot_spec_from_json(doc));
}

inline KinematicTree load_robot_file(const std::filesystem::path& path) {
  try {
    return load_robot(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline std::string write_robot(const KinematicTree& tree) { return robot_spec_to_json(tree.spec()).dump(2) + "\n"; }

}  // namespace dexretarget
