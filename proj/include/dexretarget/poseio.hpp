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

// Recorded hand-pose streams and wrist pose recovery.
//
// Stream files are line-delimited JSON. The first line is a header
//   {"format":"dexstream/1","rate_hz":25.0,"id":"...","calibration":{"s0":[10],"sigma":[10]}}
// (id and calibration optional), followed by one frame per line:
//   {"t":0.0,"pose":[45],"shape":[10],"kp":{"wrist":[x,y,z],...},"obj":[x,y,z,qw,qx,qy,qz]}
// where kp and obj are optional.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "dexretarget/handgen.hpp"

namespace dexretarget {

inline constexpr const char* kStreamFormat = "dexstream/1";
inline constexpr int kDefaultCalibrationFrames = 30;
inline constexpr int kMinCalibrationFrames = 10;
inline constexpr double kVarianceFloor = 1e-6;

struct HandPoseFrame {
  double t = 0.0;
  VecX pose = VecX::Zero(kHandDofs);    // axis-angle triplets, one per anatomical joint
  ShapeVector shape = ShapeVector::Zero();
  std::map<std::string, Vec3> keypoints;  // camera frame, meters
  std::optional<Eigen::Matrix<double, 7, 1>> object_pose;  // x y z qw qx qy qz

  bool operator==(const HandPoseFrame&) const = default;
};

struct Calibration {
  ShapeVector s0 = ShapeVector::Zero();
  ShapeVector sigma = ShapeVector::Constant(1.0);  // diagonal variances

  bool operator==(const Calibration&) const = default;
};

struct HandPoseStream {
  std::string id;
  double rate_hz = 25.0;
  std::optional<Calibration> calibration;
  std::vector<HandPoseFrame> frames;

  double dt() const { return 1.0 / rate_hz; }
  bool operator==(const HandPoseStream&) const = default;
};

/// Mean shape and population variance (floored) over the given frames.
inline Calibration calibrate(std::span<const HandPoseFrame> frames) {
  if (static_cast<int>(frames.size()) < kMinCalibrationFrames)
    throw DataError("calibrate: need at least " + std::to_string(kMinCalibrationFrames) + " frames, got " +
                    std::to_string(frames.size()));
  const double n = static_cast<double>(frames.size());
  Calibration c;
  c.s0.setZero();
  for (const auto& f : frames) c.s0 += f.shape;
  c.s0 /= n;
  c.sigma.setZero();
  for (const auto& f : frames) c.sigma += (f.shape - c.s0).cwiseAbs2();
  c.sigma /= n;
  c.sigma = c.sigma.cwiseMax(kVarianceFloor);
  return c;
}

inline Calibration calibrate_stream(const HandPoseStream& s, int k = kDefaultCalibrationFrames) {
  const size_t count = std::min(s.frames.size(), static_cast<size_t>(std::max(k, 0)));
  return calibrate(std::span<const HandPoseFrame>(s.frames.data(), count));
}

// ----------------------------------------------------------------------------
// Wrist solve: least-squares rigid alignment of named point sets.

struct WristSolution {
  RigidTransform transform;
  double rms_residual = 0.0;  // meters
};

/// Finds the proper rigid transform T minimizing sum |T c_i - o_i|^2 over shared names.
inline WristSolution solve_wrist(const std::map<std::string, Vec3>& canonical,
                                 const std::map<std::string, Vec3>& observed) {
  std::vector<Vec3> src, dst;
  for (const auto& [name, c] : canonical) {
    auto it = observed.find(name);
    if (it == observed.end()) continue;
    src.push_back(c);
    dst.push_back(it->second);
  }
  if (src.size() < 3)
    throw DataError("solve_wrist: need >= 3 shared keypoints, got " + std::to_string(src.size()));
  const double n = static_cast<double>(src.size());
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= n;
  cd /= n;
  Mat3 h = Mat3::Zero();
  for (size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-8 * sv[0])
    throw DataError("solve_wrist: keypoints are collinear (cross-covariance rank < 2)");
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Vec3 d(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  const Mat3 r = v * d.asDiagonal() * u.transpose();

  WristSolution out;
  out.transform = RigidTransform(Eigen::Quaterniond(r), cd - r * cs);
  double sq = 0.0;
  for (size_t i = 0; i < src.size(); ++i) sq += (out.transform.apply(src[i]) - dst[i]).squaredNorm();
  out.rms_residual = std::sqrt(sq / n);
  return out;
}

// ----------------------------------------------------------------------------
// Stream IO

namespace detail {

template <int N>
Eigen::Matrix<double, N, 1> fixed_array(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_array()) throw DataError(where + ": missing array '" + key + "'");
  const Json& a = j.at(key);
  if (static_cast<int>(a.size()) != N)
    throw DataError(where + ": '" + key + "' must have " + std::to_string(N) + " entries, got " + std::to_string(a.size()));
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!a[static_cast<size_t>(i)].is_number()) throw DataError(where + ": '" + key + "' must be numeric");
    v[i] = a[static_cast<size_t>(i)].get<double>();
  }
  if (!v.allFinite()) throw DataError(where + ": '" + key + "' has non-finite values");
  return v;
}

template <typename Derived>
Json array_json(const Eigen::MatrixBase<Derived>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace detail

inline HandPoseStream read_stream(std::string_view document) {
  HandPoseStream s;
  std::istringstream in{std::string(document)};
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw DataError("stream line " + std::to_string(line_no) + ": malformed record");
    }
    if (!j.is_object()) throw DataError("stream line " + std::to_string(line_no) + ": record must be an object");
    if (!have_header) {
      if (j.value("format", "") != kStreamFormat)
        throw DataError(std::string("stream header: expected format '") + kStreamFormat + "'");
      if (!j.contains("rate_hz") || !j["rate_hz"].is_number() || !(j["rate_hz"].get<double>() > 0.0))
        throw DataError("stream header: 'rate_hz' must be a positive number");
      s.rate_hz = j["rate_hz"].get<double>();
      if (j.contains("id")) s.id = j["id"].get<std::string>();
      if (j.contains("calibration")) {
        Calibration c;
        c.s0 = detail::fixed_array<kShapeDim>(j["calibration"], "s0", "stream header calibration");
        c.sigma = detail::fixed_array<kShapeDim>(j["calibration"], "sigma", "stream header calibration");
        if (!(c.sigma.array() > 0.0).all()) throw DataError("stream header calibration: sigma entries must be > 0");
        s.calibration = c;
      }
      have_header = true;
      continue;
    }
    const std::string where = "stream frame " + std::to_string(s.frames.size());
    HandPoseFrame f;
    if (!j.contains("t") || !j["t"].is_number()) throw DataError(where + ": missing timestamp 't'");
    f.t = j["t"].get<double>();
    if (!std::isfinite(f.t)) throw DataError(where + ": non-finite timestamp");
    f.pose = detail::fixed_array<kHandDofs>(j, "pose", where);
    f.shape = detail::fixed_array<kShapeDim>(j, "shape", where);
    if (j.contains("kp")) {
      if (!j["kp"].is_object()) throw DataError(where + ": 'kp' must be an object");
      for (const auto& [name, val] : j["kp"].items()) {
        Json wrap{{"p", val}};
        f.keypoints[name] = detail::fixed_array<3>(wrap, "p", where + " keypoint '" + name + "'");
      }
    }
    if (j.contains("obj")) f.object_pose = detail::fixed_array<7>(j, "obj", where);
    if (!s.frames.empty() && !(f.t > s.frames.back().t))
      throw DataError(where + ": timestamp " + std::to_string(f.t) + " not strictly increasing");
    s.frames.push_back(std::move(f));
  }
  if (!have_header) throw DataError("stream: empty document");
  if (s.frames.size() < 2) throw DataError("stream: need at least 2 frames, got " + std::to_string(s.frames.size()));
  return s;
}

inline HandPoseStream read_stream_file(const std::filesystem::path& path) {
  try {
    return read_stream(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline std::string write_stream(const HandPoseStream& s) {
  std::string out;
  Json header = Json::object();
  header["format"] = kStreamFormat;
  header["rate_hz"] = s.rate_hz;
  if (!s.id.empty()) header["id"] = s.id;
  if (s.calibration)
    header["calibration"] = Json{{"s0", detail::array_json(s.calibration->s0)},
                                 {"sigma", detail::array_json(s.calibration->sigma)}};
  out += header.dump() + "\n";
  for (const auto& f : s.frames) {
    Json j = Json::object();
    j["t"] = f.t;
    j["pose"] = detail::array_json(f.pose);
    j["shape"] = detail::array_json(f.shape);
    if (!f.keypoints.empty()) {
      Json kp = Json::object();
      for (const auto& [name, p] : f.keypoints) kp[name] = detail::array_json(p);
      j["kp"] = std::move(kp);
    }
    if (f.object_pose) j["obj"] = detail::array_json(*f.object_pose);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace dexretarget
