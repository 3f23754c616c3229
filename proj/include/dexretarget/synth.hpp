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

// Synthetic hand-pose streams: smooth finger motion, a moving wrist observed
// through noisy palm keypoints, and jittered shape estimates.

#include <numbers>
#include <random>

#include "dexretarget/handgen.hpp"
#include "dexretarget/poseio.hpp"

namespace dexretarget {

struct SynthOptions {
  int frames = 200;
  double rate_hz = 25.0;
  double shape_scale = 0.5;       // std of the true shape coefficients
  double shape_noise = 0.05;      // per-frame std of the shape estimate
  double keypoint_noise = 0.001;  // m
  std::string id = "sample";
};

inline HandPoseStream synthesize_stream(std::uint64_t seed, const SynthOptions& opt = {}) {
  if (opt.frames < 2) throw DataError("synthesize_stream: need at least 2 frames");
  if (!(opt.rate_hz > 0.0)) throw DataError("synthesize_stream: rate must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  ShapeVector s_true;
  for (int i = 0; i < kShapeDim; ++i) s_true[i] = opt.shape_scale * n01(rng);
  const KinematicTree hand = build_custom_hand(HandShapeParams(s_true), default_template());
  const KinematicState rest = compute_state(hand, VecX::Zero(hand.num_dofs()));
  const int palm = hand.link_index("palm");
  std::map<std::string, Vec3> canonical;
  for (int k = 0; k < hand.num_keypoints(); ++k)
    if (hand.keypoint_link(k) == palm) canonical[hand.keypoint(k).name] = keypoint_position(hand, rest, k);

  std::array<double, kNumFingers> ph{};
  for (auto& p : ph) p = phase(rng);

  HandPoseStream s;
  s.id = opt.id;
  s.rate_hz = opt.rate_hz;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < opt.frames; ++i) {
    const double t = static_cast<double>(i) / opt.rate_hz;
    HandPoseFrame f;
    f.t = t;
    for (int fi = 0; fi < kNumFingers; ++fi)
      for (int j = 0; j < kJointsPerFinger; ++j) {
        const int b = 3 * (fi * kJointsPerFinger + j);
        const double w = two_pi * (0.25 + 0.05 * fi) * t + ph[static_cast<size_t>(fi)] + 0.4 * j;
        f.pose[b + 0] = 0.05 * std::sin(w + 1.0);
        f.pose[b + 1] = 0.6 + 0.45 * std::sin(w);
        f.pose[b + 2] = j == 0 ? 0.12 * std::sin(0.5 * w) : 0.03 * std::cos(w);
      }
    for (int k = 0; k < kShapeDim; ++k) f.shape[k] = s_true[k] + opt.shape_noise * n01(rng);

    RigidTransform wrist;
    wrist.translation = Vec3(0.30 + 0.08 * std::sin(two_pi * 0.1 * t), 0.05 * std::cos(two_pi * 0.15 * t), 0.40 + 0.03 * t);
    wrist.rotation = quat_from_rpy(Vec3(0.2 * std::sin(two_pi * 0.12 * t), 0.1 + 0.15 * std::cos(two_pi * 0.08 * t), 0.3 * t / 8.0));
    for (const auto& [name, p] : canonical) {
      Vec3 noise(n01(rng), n01(rng), n01(rng));
      f.keypoints[name] = wrist.apply(p) + opt.keypoint_noise * noise;
    }
    Eigen::Matrix<double, 7, 1> obj;
    const Vec3 op = t < 3.0 ? Vec3(0.45, 0.0, 0.05) : Vec3(wrist.apply(Vec3(0.12, 0.0, -0.05)));
    obj << op, 1.0, 0.0, 0.0, 0.0;
    f.object_pose = obj;
    s.frames.push_back(std::move(f));
  }
  return s;
}

}  // namespace dexretarget
