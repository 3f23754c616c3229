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

#include <gtest/gtest.h>

#include <algorithm>

#include "dexretarget/poseio.hpp"
#include "dexretarget/synth.hpp"
#include "oracles.hpp"

using namespace dexretarget;

namespace {

std::map<std::string, Vec3> random_points(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::map<std::string, Vec3> pts;
  for (int i = 0; i < n; ++i) pts["p" + std::to_string(i)] = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
}

std::map<std::string, Vec3> transformed(const std::map<std::string, Vec3>& pts, const Mat3& r, const Vec3& t) {
  std::map<std::string, Vec3> out;
  for (const auto& [k, p] : pts) out[k] = r * p + t;
  return out;
}

std::vector<HandPoseFrame> frames_with_shapes(const std::vector<ShapeVector>& shapes) {
  std::vector<HandPoseFrame> out;
  for (size_t i = 0; i < shapes.size(); ++i) {
    HandPoseFrame f;
    f.t = 0.04 * static_cast<double>(i);
    f.shape = shapes[i];
    out.push_back(f);
  }
  return out;
}

double ls_cost(const std::map<std::string, Vec3>& c, const std::map<std::string, Vec3>& o, const RigidTransform& t) {
  double s = 0.0;
  for (const auto& [k, p] : c) s += (t.apply(p) - o.at(k)).squaredNorm();
  return s;
}

}  // namespace

TEST(PoseIo, SampleStreamHeader) {
  const auto s = read_stream_file(oracle::data_path("streams/sample.dexstream"));
  EXPECT_EQ(s.rate_hz, 25.0);
  EXPECT_EQ(s.frames.size(), 200u);
  EXPECT_EQ(s.frames.front().pose.size(), kHandDofs);
}

TEST(PoseIo, HundredFrameStreamKeepsRate) {
  SynthOptions opt;
  opt.frames = 100;
  const auto s = read_stream(write_stream(synthesize_stream(3, opt)));
  EXPECT_EQ(s.frames.size(), 100u);
  EXPECT_EQ(s.rate_hz, 25.0);
}

TEST(PoseIo, CanonicalFileRoundTripsByteForByte) {
  const std::string text = read_text_file(oracle::data_path("streams/sample.dexstream"));
  EXPECT_EQ(write_stream(read_stream(text)), text);
}

TEST(PoseIo, RoundTripIsIdentity) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    HandPoseStream s = synthesize_stream(seed);
    s.calibration = calibrate_stream(s);
    EXPECT_EQ(read_stream(write_stream(s)), s);
  }
}

TEST(PoseIo, EqualTimestampsCiteFrame) {
  HandPoseStream s = synthesize_stream(4);
  s.frames[7].t = s.frames[6].t;
  try {
    read_stream(write_stream(s));
    FAIL() << "accepted repeated timestamp";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 7"), std::string::npos) << e.what();
  }
}

TEST(PoseIo, MalformedStreams) {
  const std::string header = R"({"format":"dexstream/1","rate_hz":25})";
  auto frame = [](double t, int pose_len) {
    std::string p = "[";
    for (int i = 0; i < pose_len; ++i) p += i ? ",0" : "0";
    return R"({"t":)" + std::to_string(t) + R"(,"pose":)" + p + R"(],"shape":[0,0,0,0,0,0,0,0,0,0]})";
  };
  EXPECT_NO_THROW(read_stream(header + "\n" + frame(0, 45) + "\n" + frame(1, 45) + "\n"));
  EXPECT_THROW(read_stream(header + "\n" + frame(0, 45) + "\n" + frame(1, 44) + "\n"), DataError);
  EXPECT_THROW(read_stream(header + "\n" + frame(0, 45) + "\n"), DataError);
  EXPECT_THROW(read_stream(R"({"format":"dexstream/2","rate_hz":25})" "\n" + frame(0, 45) + "\n" + frame(1, 45)), DataError);
  EXPECT_THROW(read_stream(R"({"format":"dexstream/1","rate_hz":0})" "\n" + frame(0, 45) + "\n" + frame(1, 45)), DataError);
  EXPECT_THROW(read_stream(header + "\n{broken\n"), DataError);
  EXPECT_THROW(read_stream(""), DataError);
}

TEST(PoseIo, CalibrateConstantShapeGivesFloor) {
  ShapeVector s;
  s << 0.1, -0.2, 0.3, 0.0, 1.0, -1.0, 0.5, 0.25, -0.75, 2.0;
  const auto c = calibrate(frames_with_shapes(std::vector<ShapeVector>(12, s)));
  EXPECT_LE((c.s0 - s).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(c.sigma, ShapeVector::Constant(kVarianceFloor));
}

TEST(PoseIo, CalibrateTwoPointVariance) {
  ShapeVector s = ShapeVector::LinSpaced(-1.0, 1.0);
  ShapeVector d = ShapeVector::LinSpaced(0.01, 0.5);
  std::vector<ShapeVector> shapes;
  for (int i = 0; i < 20; ++i) shapes.push_back(i % 2 ? ShapeVector(s + d) : ShapeVector(s - d));
  const auto c = calibrate(frames_with_shapes(shapes));
  EXPECT_LE((c.s0 - s).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((c.sigma - d.cwiseAbs2()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PoseIo, CalibratePermutationInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ShapeVector> shapes(15);
  for (auto& s : shapes)
    for (int i = 0; i < kShapeDim; ++i) s[i] = n(rng);
  const auto a = calibrate(frames_with_shapes(shapes));
  std::reverse(shapes.begin(), shapes.end());
  const auto b = calibrate(frames_with_shapes(shapes));
  EXPECT_LE((a.s0 - b.s0).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((a.sigma - b.sigma).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PoseIo, CalibrateTooFewFrames) {
  EXPECT_THROW(calibrate(frames_with_shapes(std::vector<ShapeVector>(3, ShapeVector::Zero()))), DataError);
}

TEST(PoseIo, WristIdentity) {
  std::mt19937_64 rng(6);
  const auto pts = random_points(rng, 6);
  const auto sol = solve_wrist(pts, pts);
  EXPECT_LE(sol.transform.translation.norm(), 1e-15);
  EXPECT_LE(std::abs(std::abs(sol.transform.rotation.w()) - 1.0), 1e-15);
  EXPECT_LE(sol.rms_residual, 1e-15);
}

TEST(PoseIo, WristRecoversRandomTransforms) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = random_points(rng, 3 + trial % 6);
    const Mat3 r = random_rotation(rng);
    const Vec3 t(u(rng), u(rng), u(rng));
    const auto sol = solve_wrist(pts, transformed(pts, r, t));
    EXPECT_LE((sol.transform.rotation.toRotationMatrix() - r).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((sol.transform.translation - t).norm(), 1e-9);
    EXPECT_NEAR(sol.transform.rotation.toRotationMatrix().determinant(), 1.0, 1e-12);
  }
}

TEST(PoseIo, WristRejectsReflections) {
  std::mt19937_64 rng(8);
  const auto pts = random_points(rng, 6);
  const Mat3 mirror = Vec3(1, 1, -1).asDiagonal();
  const auto sol = solve_wrist(pts, transformed(pts, mirror, Vec3::Zero()));
  EXPECT_NEAR(sol.transform.rotation.toRotationMatrix().determinant(), 1.0, 1e-12);
}

TEST(PoseIo, WristNoiseMonteCarlo) {
  const double sigma = 1e-3;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    const auto pts = random_points(rng, 5);
    const Mat3 r = random_rotation(rng);
    const Vec3 t(u(rng), u(rng), u(rng));
    auto obs = transformed(pts, r, t);
    for (auto& [k, p] : obs) p += Vec3(noise(rng), noise(rng), noise(rng));
    const auto sol = solve_wrist(pts, obs);
    EXPECT_LE(sol.rms_residual, 3.0 * sigma) << seed;
    EXPECT_LE((sol.transform.translation - t).norm(), 5e-3) << seed;
  }
}

TEST(PoseIo, WristResidualIsLocallyOptimal) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto pts = random_points(rng, 7);
  auto obs = transformed(pts, random_rotation(rng), Vec3(0.2, -0.1, 0.4));
  for (auto& [k, p] : obs) p += 0.005 * Vec3(n(rng), n(rng), n(rng));
  const auto sol = solve_wrist(pts, obs);
  const double base = ls_cost(pts, obs, sol.transform);
  for (int i = 0; i < 50; ++i) {
    const Vec3 w = 1e-4 * Vec3(n(rng), n(rng), n(rng));
    const Vec3 v = 1e-4 * Vec3(n(rng), n(rng), n(rng));
    const RigidTransform screw(Eigen::Quaterniond(Eigen::AngleAxisd(w.norm(), w.normalized())), v);
    EXPECT_GE(ls_cost(pts, obs, screw * sol.transform), base - 1e-15);
  }
}

TEST(PoseIo, WristEquivariance) {
  std::mt19937_64 rng(10);
  const auto pts = random_points(rng, 5);
  const Mat3 r = random_rotation(rng);
  const Vec3 t(0.1, 0.2, 0.3);
  const auto obs = transformed(pts, r, t);
  const Mat3 g = random_rotation(rng);
  const Vec3 gt(-0.4, 0.0, 0.7);
  const auto sol = solve_wrist(transformed(pts, g, gt), transformed(obs, g, gt));
  const RigidTransform gtf(Eigen::Quaterniond(g), gt);
  const RigidTransform expect = gtf * RigidTransform(Eigen::Quaterniond(r), t) * gtf.inverse();
  EXPECT_LE((sol.transform.matrix() - expect.matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PoseIo, WristDegenerateInputs) {
  std::map<std::string, Vec3> two{{"a", Vec3(0, 0, 0)}, {"b", Vec3(1, 0, 0)}};
  EXPECT_THROW(solve_wrist(two, two), DataError);
  std::map<std::string, Vec3> line{{"a", Vec3(0, 0, 0)}, {"b", Vec3(1, 0, 0)}, {"c", Vec3(2, 0, 0)}, {"d", Vec3(3, 0, 0)}};
  EXPECT_THROW(solve_wrist(line, line), DataError);
  std::map<std::string, Vec3> other{{"x", Vec3(0, 0, 0)}, {"y", Vec3(1, 0, 0)}, {"z", Vec3(0, 1, 0)}};
  EXPECT_THROW(solve_wrist(line, other), DataError);
}
