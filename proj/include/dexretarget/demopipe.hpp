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

// Demonstration translation: hand-pose stream -> customized hand -> specified
// robot joint trajectory -> actions, written as `dexdemo/1` files.

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dexretarget/control.hpp"
#include "dexretarget/dynamics.hpp"
#include "dexretarget/handgen.hpp"
#include "dexretarget/poseio.hpp"
#include "dexretarget/retarget.hpp"
#include "dexretarget/robot_io.hpp"

namespace dexretarget {

inline constexpr const char* kDemoFormat = "dexdemo/1";

struct LayoutSegment {
  std::string name;
  int width = 0;
  bool operator==(const LayoutSegment&) const = default;
};

inline int layout_width(const std::vector<LayoutSegment>& layout) {
  int w = 0;
  for (const auto& s : layout) w += s.width;
  return w;
}

/// State/action trajectory for one robot. There is one action per transition:
/// states.size() == actions.size() + 1.
struct Demonstration {
  std::string robot;
  std::string task;
  double dt = 0.0;
  std::string action_mode = "position";
  std::string object_fields = "zero";  // "stream" when copied from stream metadata
  std::vector<LayoutSegment> state_layout;
  std::vector<LayoutSegment> action_layout;
  std::vector<VecX> states;
  std::vector<VecX> actions;
  std::vector<VecX> torques;        // optional, one per action
  std::vector<double> confidence;   // optional, one per state
  std::string source_id;
  std::string config_hash;

  bool operator==(const Demonstration&) const = default;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DataError("demonstration: dt must be > 0");
    if (states.empty()) throw DataError("demonstration: no states");
    if (states.size() != actions.size() + 1)
      throw DataError("demonstration: expected states = actions + 1, got " + std::to_string(states.size()) +
                      " states and " + std::to_string(actions.size()) + " actions");
    const int sw = layout_width(state_layout);
    const int aw = layout_width(action_layout);
    for (size_t i = 0; i < states.size(); ++i)
      if (states[i].size() != sw) throw DataError("demonstration: state " + std::to_string(i) + " width mismatch");
    for (size_t i = 0; i < actions.size(); ++i)
      if (actions[i].size() != aw) throw DataError("demonstration: action " + std::to_string(i) + " width mismatch");
    if (!torques.empty() && torques.size() != actions.size())
      throw DataError("demonstration: torque track length mismatch");
    if (!confidence.empty() && confidence.size() != states.size())
      throw DataError("demonstration: confidence track length mismatch");
  }

  int state_width() const { return layout_width(state_layout); }
  int action_width() const { return layout_width(action_layout); }
};

inline std::string write_demo(const Demonstration& d) {
  d.validate();
  Json header = Json::object();
  header["version"] = kDemoFormat;
  header["robot"] = d.robot;
  header["task"] = d.task;
  header["dt"] = d.dt;
  header["action_mode"] = d.action_mode;
  header["object_fields"] = d.object_fields;
  auto layout_json = [](const std::vector<LayoutSegment>& l) {
    Json a = Json::array();
    for (const auto& s : l) a.push_back(Json{{"name", s.name}, {"width", s.width}});
    return a;
  };
  header["state_layout"] = layout_json(d.state_layout);
  header["action_layout"] = layout_json(d.action_layout);
  header["steps"] = d.states.size();
  header["provenance"] = Json{{"source", d.source_id}, {"config_hash", d.config_hash}};
  std::string out = header.dump() + "\n";
  for (size_t i = 0; i < d.states.size(); ++i) {
    Json r = Json::object();
    r["k"] = i;
    r["s"] = detail::array_json(d.states[i]);
    if (i < d.actions.size()) {
      r["a"] = detail::array_json(d.actions[i]);
      if (!d.torques.empty()) r["tau"] = detail::array_json(d.torques[i]);
    }
    if (!d.confidence.empty()) r["p"] = d.confidence[i];
    out += r.dump() + "\n";
  }
  return out;
}

inline Demonstration read_demo(std::string_view document) {
  std::istringstream in{std::string(document)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("demonstration: empty document");
  Demonstration d;
  size_t steps = 0;
  try {
    const Json h = Json::parse(line);
    if (!h.is_object() || h.value("version", "") != kDemoFormat)
      throw DataError(std::string("demonstration: format version mismatch (expected '") + kDemoFormat + "')");
    d.robot = h.at("robot").get<std::string>();
    d.task = h.at("task").get<std::string>();
    d.dt = h.at("dt").get<double>();
    d.action_mode = h.at("action_mode").get<std::string>();
    d.object_fields = h.at("object_fields").get<std::string>();
    for (const char* key : {"state_layout", "action_layout"}) {
      auto& layout = std::string(key) == "state_layout" ? d.state_layout : d.action_layout;
      for (const Json& s : h.at(key)) layout.push_back({s.at("name").get<std::string>(), s.at("width").get<int>()});
    }
    steps = h.at("steps").get<size_t>();
    d.source_id = h.at("provenance").at("source").get<std::string>();
    d.config_hash = h.at("provenance").at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("demonstration header: ") + e.what());
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json r = Json::parse(line);
      if (r.at("k").get<size_t>() != d.states.size())
        throw DataError("demonstration line " + std::to_string(line_no) + ": step index out of order");
      auto vec = [](const Json& a) {
        VecX v(static_cast<Eigen::Index>(a.size()));
        for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
        return v;
      };
      d.states.push_back(vec(r.at("s")));
      if (r.contains("a")) {
        if (d.actions.size() + 1 != d.states.size())
          throw DataError("demonstration line " + std::to_string(line_no) + ": action after a terminal state");
        d.actions.push_back(vec(r.at("a")));
      }
      if (r.contains("tau")) d.torques.push_back(vec(r.at("tau")));
      if (r.contains("p")) d.confidence.push_back(r.at("p").get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("demonstration line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (d.states.size() != steps)
    throw DataError("demonstration: header declares " + std::to_string(steps) + " steps, found " +
                    std::to_string(d.states.size()));
  d.validate();
  return d;
}

inline Demonstration read_demo_file(const std::filesystem::path& path) {
  try {
    return read_demo(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_demo_file(const Demonstration& d, const std::filesystem::path& path) {
  write_file_atomic(path, write_demo(d));
}

// ----------------------------------------------------------------------------
// Pipeline configuration

inline constexpr const char* kCustomizedRobot = "customized";

struct PipelineConfig {
  std::string robot_path = kCustomizedRobot;  // description path, or "customized"
  std::string keypoint_map_path;              // empty: fingertip identity map
  std::string hand_template_path;             // empty: built-in template
  double alpha = 4e-3;
  double cutoff_hz = 5.0;
  std::optional<double> gamma;  // overrides cutoff_hz when set
  double kp = 2.0;              // chosen, not sourced
  double kd = 0.05;             // chosen, not sourced
  int calibration_frames = kDefaultCalibrationFrames;
  ActionMode action_mode = ActionMode::kPosition;
  std::string task = "relocate";
  SolverSettings solver;
  double max_unconverged_fraction = 0.05;
  Vec3 target_position = Vec3::Zero();
  std::filesystem::path base_dir;  // relative paths resolve against this

  double gamma_for(double dt) const { return gamma ? *gamma : gamma_from_cutoff(cutoff_hz, dt); }

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DataError("config: alpha must be >= 0");
    if (gamma && !(*gamma > 0.0 && *gamma <= 1.0)) throw DataError("config: gamma must lie in (0, 1]");
    if (!gamma && !(cutoff_hz > 0.0)) throw DataError("config: cutoff_hz must be > 0");
    if (!(kp >= 0.0) || !(kd >= 0.0)) throw DataError("config: PD gains must be >= 0");
    if (calibration_frames < kMinCalibrationFrames) throw DataError("config: calibration_frames must be >= 10");
    if (!(max_unconverged_fraction >= 0.0 && max_unconverged_fraction <= 1.0))
      throw DataError("config: max_unconverged_fraction must lie in [0, 1]");
    if (solver.max_iterations < 0 || !(solver.gradient_tolerance >= 0.0)) throw DataError("config: invalid solver settings");
    if (robot_path != kCustomizedRobot && !std::filesystem::exists(resolve(robot_path)))
      throw DataError("config: robot description not found: " + resolve(robot_path).string());
    if (!keypoint_map_path.empty() && !std::filesystem::exists(resolve(keypoint_map_path)))
      throw DataError("config: keypoint map not found: " + resolve(keypoint_map_path).string());
    if (!hand_template_path.empty() && !std::filesystem::exists(resolve(hand_template_path)))
      throw DataError("config: hand template not found: " + resolve(hand_template_path).string());
  }

  Json to_json() const {
    Json j = Json::object();
    j["robot"] = robot_path;
    j["keypoint_map"] = keypoint_map_path;
    j["hand_template"] = hand_template_path;
    j["alpha"] = alpha;
    j["cutoff_hz"] = cutoff_hz;
    if (gamma) j["gamma"] = *gamma;
    j["pd"] = Json{{"kp", kp}, {"kd", kd}};
    j["calibration_frames"] = calibration_frames;
    j["action_mode"] = to_string(action_mode);
    j["task"] = task;
    j["solver"] = Json{{"max_iterations", solver.max_iterations}, {"gradient_tolerance", solver.gradient_tolerance}};
    j["max_unconverged_fraction"] = max_unconverged_fraction;
    j["target_position"] = detail::vec_json(target_position);
    return j;
  }

  static PipelineConfig from_json(const Json& j, std::filesystem::path base_dir = {}) {
    PipelineConfig c;
    c.base_dir = std::move(base_dir);
    try {
      if (!j.is_object()) throw DataError("config: top level must be an object");
      c.robot_path = j.value("robot", c.robot_path);
      c.keypoint_map_path = j.value("keypoint_map", c.keypoint_map_path);
      c.hand_template_path = j.value("hand_template", c.hand_template_path);
      c.alpha = j.value("alpha", c.alpha);
      c.cutoff_hz = j.value("cutoff_hz", c.cutoff_hz);
      if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
      if (j.contains("pd")) {
        c.kp = j.at("pd").value("kp", c.kp);
        c.kd = j.at("pd").value("kd", c.kd);
      }
      c.calibration_frames = j.value("calibration_frames", c.calibration_frames);
      c.action_mode = parse_action_mode(j.value("action_mode", std::string("position")));
      c.task = j.value("task", c.task);
      if (j.contains("solver")) {
        c.solver.max_iterations = j.at("solver").value("max_iterations", c.solver.max_iterations);
        c.solver.gradient_tolerance = j.at("solver").value("gradient_tolerance", c.solver.gradient_tolerance);
      }
      c.max_unconverged_fraction = j.value("max_unconverged_fraction", c.max_unconverged_fraction);
      if (j.contains("target_position")) c.target_position = detail::vec3_field(j, "target_position", "config");
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("config: ") + e.what());
    }
    return c;
  }
};

inline PipelineConfig load_config_file(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return PipelineConfig::from_json(j, path.parent_path());
}

// ----------------------------------------------------------------------------
// Translation

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct TranslationReport {
  double mean_residual = 0.0;  // meters
  double max_residual = 0.0;
  double mean_solve_ms = 0.0;
  int unconverged_frames = 0;
  int frames = 0;
  double mean_confidence = 0.0;
  std::vector<StageTiming> timings;
};

struct Translation {
  Demonstration demo;
  TranslationReport report;
};

namespace detail {

template <typename F>
auto run_stage(const char* stage, TranslationReport& report, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&] {
    report.timings.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(stage) + ": " + e.what());
  } catch (const DimensionError& e) {
    throw DataError(std::string(stage) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(stage) + ": " + e.what());
  }
}

/// Angular velocity taking rotation a to rotation b over dt (world frame).
inline Vec3 angular_velocity(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b, double dt) {
  return quat_log(b * a.conjugate()) / dt;
}

}  // namespace detail

/// Wrist pose per frame from the palm keypoints; frames without enough
/// observations hold the previous pose (identity before the first solve).
inline std::vector<RigidTransform> solve_wrist_track(const HandPoseStream& stream, const KinematicTree& hand) {
  const KinematicState rest = compute_state(hand, VecX::Zero(hand.num_dofs()));
  std::map<std::string, Vec3> canonical;
  const int palm = hand.link_index("palm");
  for (int k = 0; k < hand.num_keypoints(); ++k)
    if (hand.keypoint_link(k) == palm) canonical[hand.keypoint(k).name] = keypoint_position(hand, rest, k);
  std::vector<RigidTransform> out;
  out.reserve(stream.frames.size());
  RigidTransform last = RigidTransform::identity();
  for (size_t i = 0; i < stream.frames.size(); ++i) {
    const auto& f = stream.frames[i];
    size_t shared = 0;
    for (const auto& [name, p] : canonical) shared += f.keypoints.count(name);
    if (shared >= 3) {
      try {
        last = solve_wrist(canonical, f.keypoints).transform;
      } catch (const DataError& e) {
        throw DataError("frame " + std::to_string(i) + ": " + e.what());
      }
    }
    out.push_back(last);
  }
  return out;
}

inline KeypointMap default_fingertip_map(const KinematicTree& source, const KinematicTree& target) {
  KeypointMap m;
  for (const auto& name : fingertip_names(target))
    if (source.find_keypoint(name)) m.push_back({name, name});
  return m;
}

inline Translation translate(const HandPoseStream& stream, const PipelineConfig& config) {
  config.validate();
  Translation out;
  TranslationReport& rep = out.report;
  const double dt = stream.dt();
  const size_t nf = stream.frames.size();
  rep.frames = static_cast<int>(nf);

  const Calibration calib = detail::run_stage("calibrate", rep, [&] {
    return stream.calibration ? *stream.calibration : calibrate_stream(stream, config.calibration_frames);
  });

  const KinematicTree hand = detail::run_stage("handgen", rep, [&] {
    const HandTemplate tmpl = config.hand_template_path.empty() ? default_template()
                                                                : load_hand_template(config.resolve(config.hand_template_path));
    return build_custom_hand(HandShapeParams(calib.s0), tmpl);
  });

  std::vector<VecX> q_source;
  std::vector<double> conf;
  detail::run_stage("poseio", rep, [&] {
    const ConfidenceModel model(calib);
    for (size_t i = 0; i < nf; ++i) {
      const auto& f = stream.frames[i];
      if (!f.pose.allFinite()) throw DataError("frame " + std::to_string(i) + ": non-finite pose");
      q_source.push_back(f.pose);
      conf.push_back(confidence(model, f.shape));
    }
  });
  const std::vector<RigidTransform> wrist = detail::run_stage("wrist", rep, [&] { return solve_wrist_track(stream, hand); });

  std::string robot_text;
  const KinematicTree target = detail::run_stage("load_robot", rep, [&] {
    if (config.robot_path == kCustomizedRobot) return hand;
    robot_text = read_text_file(config.resolve(config.robot_path));
    return load_robot(robot_text);
  });

  std::string map_text;
  const std::vector<RetargetResult> solved = detail::run_stage("retarget", rep, [&] {
    KeypointMap map;
    if (config.keypoint_map_path.empty()) {
      map = default_fingertip_map(hand, target);
    } else {
      map_text = read_text_file(config.resolve(config.keypoint_map_path));
      map = parse_keypoint_map(map_text);
    }
    const RetargetProblem problem(hand, target, map, config.alpha, config.solver);
    return retarget_trajectory(problem, q_source, target.rest_pose());
  });
  const double retarget_seconds = rep.timings.back().seconds;

  std::vector<VecX> q_target;
  double sum_res = 0.0;
  for (const auto& r : solved) {
    q_target.push_back(r.q);
    sum_res += r.residual;
    rep.max_residual = std::max(rep.max_residual, r.residual);
    if (!r.converged) ++rep.unconverged_frames;
  }
  rep.mean_residual = sum_res / static_cast<double>(nf);
  rep.mean_solve_ms = 1e3 * retarget_seconds / static_cast<double>(nf);
  double csum = 0.0;
  for (double c : conf) csum += c;
  rep.mean_confidence = csum / static_cast<double>(nf);
  if (static_cast<double>(rep.unconverged_frames) > config.max_unconverged_fraction * static_cast<double>(nf))
    throw NumericalError("retarget: " + std::to_string(rep.unconverged_frames) + " of " + std::to_string(nf) +
                         " frames did not converge");

  const double gamma = config.gamma_for(dt);
  const std::vector<ActionFrame> actions = detail::run_stage(
      "dynamics", rep, [&] { return compute_actions(target, q_target, dt, gamma, config.action_mode); });

  detail::run_stage("assemble", rep, [&] {
    const int n = target.num_dofs();
    Demonstration& d = out.demo;
    d.robot = target.name();
    d.task = config.task;
    d.dt = dt;
    d.action_mode = to_string(config.action_mode);
    bool all_obj = true;
    for (const auto& f : stream.frames) all_obj = all_obj && f.object_pose.has_value();
    d.object_fields = all_obj ? "stream" : "zero";
    d.state_layout = {{"joint_pos", n},       {"palm_pos", 3}, {"palm_quat", 4},      {"palm_lin_vel", 3},
                      {"palm_ang_vel", 3},    {"object_pose", 7}, {"target_pos", 3}};
    d.action_layout = {{"palm_lin_vel_cmd", 3},
                       {"palm_ang_vel_cmd", 3},
                       {config.action_mode == ActionMode::kTorque ? "joint_torque" : "joint_pos_target", n}};

    // Filtered trajectory: states and targets derive from the same signal.
    std::vector<VecX> filtered;
    if (config.action_mode == ActionMode::kTorque) {
      filtered = low_pass_filter(q_target, gamma);
    } else {
      for (const auto& a : actions) filtered.push_back(a.position_target);
    }

    std::vector<VecX> palm_pos;
    for (const auto& w : wrist) palm_pos.push_back(w.translation);
    std::vector<Vec3> lin_vel(nf), ang_vel(nf);
    for (size_t i = 0; i < nf; ++i) {
      const size_t a = i == 0 ? 0 : i - 1;
      const size_t b = i + 1 == nf ? i : i + 1;
      const double span = static_cast<double>(b - a) * dt;
      lin_vel[i] = (wrist[b].translation - wrist[a].translation) / span;
      ang_vel[i] = detail::angular_velocity(wrist[a].rotation, wrist[b].rotation, span);
    }

    for (size_t i = 0; i < nf; ++i) {
      VecX s(d.state_width());
      Eigen::Matrix<double, 7, 1> obj = Eigen::Matrix<double, 7, 1>::Zero();
      if (all_obj) obj = *stream.frames[i].object_pose;
      const auto& rq = wrist[i].rotation;
      s << filtered[i], wrist[i].translation, rq.w(), rq.x(), rq.y(), rq.z(), lin_vel[i], ang_vel[i], obj,
          config.target_position;
      d.states.push_back(std::move(s));
    }
    for (size_t i = 0; i + 1 < nf; ++i) {
      VecX a(d.action_width());
      const Vec3 v = (wrist[i + 1].translation - wrist[i].translation) / dt;
      const Vec3 w = detail::angular_velocity(wrist[i].rotation, wrist[i + 1].rotation, dt);
      const VecX& finger = config.action_mode == ActionMode::kTorque ? actions[i].torque : actions[i + 1].position_target;
      a << v, w, finger;
      d.actions.push_back(std::move(a));
      if (config.action_mode == ActionMode::kBoth) d.torques.push_back(actions[i].torque);
    }
    d.confidence = conf;

    Fnv1a src;
    src.update(write_stream(stream));
    d.source_id = (stream.id.empty() ? std::string("stream") : stream.id) + ":" + src.hex();
    Fnv1a cfg;
    cfg.update(config.to_json().dump());
    cfg.update(robot_text);
    cfg.update(map_text);
    d.config_hash = cfg.hex();
    d.validate();
  });
  return out;
}

struct RobotTranslation {
  std::string label;
  std::optional<Translation> result;
  std::string error;
  bool numerical_failure = false;
};

/// Independent translations; one robot failing leaves the others intact.
inline std::vector<RobotTranslation> translate_all(const HandPoseStream& stream,
                                                   const std::vector<std::pair<std::string, PipelineConfig>>& configs) {
  std::vector<RobotTranslation> out;
  for (const auto& [label, cfg] : configs) {
    RobotTranslation r;
    r.label = label;
    try {
      r.result = translate(stream, cfg);
    } catch (const NumericalError& e) {
      r.error = e.what();
      r.numerical_failure = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dexretarget
