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

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dexretarget/dapg.hpp"
#include "dexretarget/demopipe.hpp"
#include "dexretarget/dynamics.hpp"
#include "dexretarget/handgen.hpp"
#include "dexretarget/poseio.hpp"
#include "dexretarget/robot_io.hpp"
#include "dexretarget/synth.hpp"
#include "dexretarget/toy_env.hpp"

namespace fs = std::filesystem;
using namespace dexretarget;

namespace {

constexpr const char* kExitCodes =
    "Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.\n"
    "Log level: --log-level or DEXRETARGET_LOG (trace|debug|info|warn|error|off).";

VecX parse_vector(const std::string& text, const std::string& what) {
  std::vector<double> v;
  std::string tok;
  std::istringstream in(text);
  while (std::getline(in, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    if (tok.empty()) continue;
    try {
      size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.find_last_not_of(" \t") + 1) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw DataError(what + ": '" + tok + "' is not a number");
    }
  }
  return Eigen::Map<VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
}

VecX vector_or_zero(const std::string& text, int n, const std::string& what) {
  if (text.empty()) return VecX::Zero(n);
  VecX v = parse_vector(text, what);
  require_size(v.size(), n, what);
  return v;
}

KinematicTree load_any_robot(const std::string& path) {
  if (path == kCustomizedRobot) return build_custom_hand(HandShapeParams(), default_template());
  return load_robot_file(path);
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void print_report(const std::string& label, const TranslationReport& r) {
  for (const auto& t : r.timings) spdlog::info("{}: stage {} {:.3f} s", label, t.stage, t.seconds);
  fmt::print(stderr, "{}: {} frames, mean residual {:.6f} m, max residual {:.6f} m, mean solve {:.3f} ms, unconverged {}\n",
             label, r.frames, r.mean_residual, r.max_residual, r.mean_solve_ms, r.unconverged_frames);
}

struct PipelineOverrides {
  std::string robot;
  double alpha = 0.0;
  double cutoff = 0.0;
  std::string action_mode;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* cutoff_opt = nullptr;

  void add_to(CLI::App* app) {
    app->add_option("--robot", robot, "Override the config's robot description (path or 'customized')");
    alpha_opt = app->add_option("--alpha", alpha, "Override the temporal regularization weight")->check(CLI::NonNegativeNumber);
    cutoff_opt = app->add_option("--cutoff-hz", cutoff, "Override the low-pass cutoff frequency")->check(CLI::PositiveNumber);
    app->add_option("--action-mode", action_mode, "Override the action mode")->check(CLI::IsMember({"torque", "position", "both"}));
  }

  void apply(PipelineConfig& c) const {
    if (!robot.empty()) c.robot_path = robot == kCustomizedRobot ? robot : fs::absolute(robot).string();
    if (alpha_opt->count()) c.alpha = alpha;
    if (cutoff_opt->count()) {
      c.cutoff_hz = cutoff;
      c.gamma.reset();
    }
    if (!action_mode.empty()) c.action_mode = parse_action_mode(action_mode);
    c.validate();
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Hand-pose demonstration retargeting, action computation and demo-augmented policy learning."};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::string log_level;
  app.add_option("--seed", seed, "Seed for every randomized step")->capture_default_str();
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off (default: DEXRETARGET_LOG or warn)");

  auto sub = [&](const char* name, const char* desc) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->footer(kExitCodes);
    return s;
  };

  // gen-hand
  std::string shape_path, template_path, out_path;
  CLI::App* gen = sub("gen-hand", "Build a customized 45-DoF hand description from a shape file");
  gen->add_option("--shape", shape_path, "Shape file: {\"shape\": [10 numbers]}")->required()->check(CLI::ExistingFile);
  gen->add_option("--template", template_path, "Hand template (default: built-in)")->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Output robot description")->required();

  // validate-stream
  std::string stream_path;
  CLI::App* vs = sub("validate-stream", "Parse a hand-pose stream and print a summary");
  vs->add_option("--stream", stream_path, "Stream file")->required()->check(CLI::ExistingFile);

  // synth-stream
  int synth_frames = 200;
  double synth_rate = 25.0;
  CLI::App* syn = sub("synth-stream", "Write a synthetic hand-pose stream");
  syn->add_option("--frames", synth_frames, "Number of frames")->capture_default_str()->check(CLI::Range(2, 1000000));
  syn->add_option("--rate", synth_rate, "Frame rate in Hz")->capture_default_str()->check(CLI::PositiveNumber);
  syn->add_option("--out", out_path, "Output stream file")->required();

  // fk
  std::string robot_path, q_text, qd_text, qdd_text;
  bool all_keypoints = false;
  CLI::App* fk = sub("fk", "Print keypoint positions for a joint configuration");
  fk->add_option("--robot", robot_path, "Robot description, or 'customized'")->required();
  fk->add_option("--q", q_text, "Comma-separated joint angles (default: zeros)");
  fk->add_flag("--all", all_keypoints, "Print every keypoint, not only fingertips");

  // id
  std::string gravity_text = "0,0,-9.81";
  CLI::App* id = sub("id", "Print inverse-dynamics joint torques");
  id->add_option("--robot", robot_path, "Robot description, or 'customized'")->required();
  id->add_option("--q", q_text, "Joint angles (default: zeros)");
  id->add_option("--qd", qd_text, "Joint velocities (default: zeros)");
  id->add_option("--qdd", qdd_text, "Joint accelerations (default: zeros)");
  id->add_option("--gravity", gravity_text, "Gravity vector")->capture_default_str();

  // translate
  std::string config_path;
  PipelineOverrides ovr;
  CLI::App* tr = sub("translate", "Translate a stream into a demonstration for one robot");
  tr->add_option("--stream", stream_path, "Stream file")->required()->check(CLI::ExistingFile);
  tr->add_option("--config", config_path, "Pipeline config")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", out_path, "Output demonstration file")->required();
  ovr.add_to(tr);

  // translate-all
  std::string configs_dir, out_dir;
  CLI::App* tra = sub("translate-all", "Translate a stream for every config (*.json) in a directory");
  tra->add_option("--stream", stream_path, "Stream file")->required()->check(CLI::ExistingFile);
  tra->add_option("--configs", configs_dir, "Directory of pipeline configs")->required()->check(CLI::ExistingDirectory);
  tra->add_option("--out", out_dir, "Output directory; one <config>.dexdemo per config")->required();

  // expert
  int n_demos = 50;
  CLI::App* ex = sub("expert", "Write scripted-expert demonstrations for the toy relocate task");
  ex->add_option("--n", n_demos, "Number of demonstrations")->capture_default_str()->check(CLI::PositiveNumber);
  ex->add_option("--out", out_dir, "Output directory")->required();

  // train
  std::string env_name = "toy-relocate", demos_dir;
  int iterations = 0, batch = 0, bc_epochs = 0;
  double lambda0 = 0.0, lambda1 = 0.0, lr = 0.0;
  bool literal = false;
  CLI::App* trn = sub("train", "Train a policy with DAPG (or pure policy gradient without demos)");
  trn->add_option("--env", env_name, "Environment")->capture_default_str()->check(CLI::IsMember({"toy-relocate"}));
  trn->add_option("--demos", demos_dir, "Directory of demonstrations (*.dexdemo); omit for pure RL")->check(CLI::ExistingDirectory);
  trn->add_option("--config", config_path, "Training config (JSON)")->check(CLI::ExistingFile);
  trn->add_option("--out", out_dir, "Output directory (curve.csv, policy.json, checkpoints/)")->required();
  auto* it_opt = trn->add_option("--iterations", iterations, "Override iterations")->check(CLI::NonNegativeNumber);
  auto* b_opt = trn->add_option("--batch", batch, "Override trajectories per iteration")->check(CLI::PositiveNumber);
  auto* bc_opt = trn->add_option("--bc-epochs", bc_epochs, "Override behavior-cloning epochs")->check(CLI::NonNegativeNumber);
  auto* l0_opt = trn->add_option("--lambda0", lambda0, "Override lambda0");
  auto* l1_opt = trn->add_option("--lambda1", lambda1, "Override lambda1");
  auto* lr_opt = trn->add_option("--lr", lr, "Override learning rate");
  trn->add_flag("--literal-demo-weight", literal, "Do not clamp a negative max advantage at zero");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (log_level.empty()) {
    if (const char* env = std::getenv("DEXRETARGET_LOG")) log_level = env;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("dexretarget"));
  spdlog::set_level(log_level.empty() ? spdlog::level::warn : spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%l] %v");

  if (gen->parsed()) {
    const HandTemplate tmpl = template_path.empty() ? default_template() : load_hand_template(template_path);
    const KinematicTree hand = build_custom_hand(load_shape_file(shape_path), tmpl);
    write_file_atomic(out_path, write_robot(hand));
    fmt::print("{}: {} actuated joints, {} links, {} keypoints\n", hand.name(), hand.num_dofs(), hand.num_links(),
               hand.num_keypoints());
  } else if (vs->parsed()) {
    const HandPoseStream s = read_stream_file(stream_path);
    size_t with_kp = 0, with_obj = 0;
    for (const auto& f : s.frames) {
      with_kp += f.keypoints.empty() ? 0 : 1;
      with_obj += f.object_pose ? 1 : 0;
    }
    fmt::print("stream '{}': {} frames at {} Hz, {:.3f} s, keypoints on {} frames, object pose on {} frames, calibration {}\n",
               s.id, s.frames.size(), s.rate_hz, s.frames.back().t - s.frames.front().t, with_kp, with_obj,
               s.calibration ? "in header" : "from first frames");
  } else if (syn->parsed()) {
    SynthOptions opt;
    opt.frames = synth_frames;
    opt.rate_hz = synth_rate;
    write_file_atomic(out_path, write_stream(synthesize_stream(seed, opt)));
    fmt::print("wrote {} frames to {}\n", synth_frames, out_path);
  } else if (fk->parsed()) {
    const KinematicTree tree = load_any_robot(robot_path);
    const VecX q = vector_or_zero(q_text, tree.num_dofs(), "--q");
    const auto pos = forward_kinematics(tree, q);
    std::vector<std::string> names;
    if (all_keypoints) {
      for (int k = 0; k < tree.num_keypoints(); ++k) names.push_back(tree.keypoint(k).name);
    } else {
      names = fingertip_names(tree);
    }
    for (const auto& n : names) {
      const Vec3& p = pos.at(n);
      fmt::print("{} {:.9f} {:.9f} {:.9f}\n", n, p.x(), p.y(), p.z());
    }
  } else if (id->parsed()) {
    const KinematicTree tree = load_any_robot(robot_path);
    const int n = tree.num_dofs();
    DynamicsInput in{vector_or_zero(q_text, n, "--q"), vector_or_zero(qd_text, n, "--qd"), vector_or_zero(qdd_text, n, "--qdd")};
    const VecX g = parse_vector(gravity_text, "--gravity");
    require_size(g.size(), 3, "--gravity");
    in.gravity = g;
    const VecX tau = inverse_dynamics(tree, in);
    const auto names = tree.dof_names();
    for (int i = 0; i < n; ++i) fmt::print("{} {:.9f}\n", names[static_cast<size_t>(i)], tau[i]);
  } else if (tr->parsed()) {
    PipelineConfig cfg = load_config_file(config_path);
    ovr.apply(cfg);
    const HandPoseStream s = read_stream_file(stream_path);
    const Translation t = translate(s, cfg);
    write_demo_file(t.demo, out_path);
    print_report(fs::path(config_path).stem().string(), t.report);
    fmt::print("{}: {} states, action width {}\n", out_path, t.demo.states.size(), t.demo.action_width());
  } else if (tra->parsed()) {
    const HandPoseStream s = read_stream_file(stream_path);
    std::vector<std::pair<std::string, PipelineConfig>> configs;
    for (const auto& p : files_with_extension(configs_dir, ".json")) configs.emplace_back(p.stem().string(), load_config_file(p));
    if (configs.empty()) throw DataError("no *.json configs in " + configs_dir);
    fs::create_directories(out_dir);
    int code = 0;
    for (const auto& r : translate_all(s, configs)) {
      if (!r.result) {
        spdlog::error("{}: {}", r.label, r.error);
        code = std::max(code, r.numerical_failure ? 3 : 2);
        continue;
      }
      const fs::path out = fs::path(out_dir) / (r.label + ".dexdemo");
      write_demo_file(r.result->demo, out);
      print_report(r.label, r.result->report);
      fmt::print("{}: {} states, action width {}\n", out.string(), r.result->demo.states.size(),
                 r.result->demo.action_width());
    }
    return code;
  } else if (ex->parsed()) {
    fs::create_directories(out_dir);
    ToyRelocateEnv env;
    int ok = 0;
    for (int i = 0; i < n_demos; ++i) {
      bool success = false;
      const Demonstration d = expert_demonstration(env, derive_seed(seed, 0xE4, static_cast<std::uint64_t>(i)), &success);
      ok += success ? 1 : 0;
      write_demo_file(d, fs::path(out_dir) / fmt::format("expert_{:03d}.dexdemo", i));
    }
    fmt::print("wrote {} demonstrations to {}, expert success {}/{}\n", n_demos, out_dir, ok, n_demos);
  } else if (trn->parsed()) {
    DapgConfig cfg;
    if (!config_path.empty()) {
      try {
        cfg = DapgConfig::from_json(Json::parse(read_text_file(config_path)));
      } catch (const nlohmann::json::exception& e) {
        throw DataError(config_path + ": " + e.what());
      }
    }
    if (app.get_option("--seed")->count()) cfg.seed = seed;
    if (it_opt->count()) cfg.iterations = iterations;
    if (b_opt->count()) cfg.batch_trajectories = batch;
    if (bc_opt->count()) cfg.bc_epochs = bc_epochs;
    if (l0_opt->count()) cfg.lambda0 = lambda0;
    if (l1_opt->count()) cfg.lambda1 = lambda1;
    if (lr_opt->count()) cfg.learning_rate = lr;
    if (literal) cfg.clamp_demo_weight = false;
    cfg.validate();
    std::vector<Demonstration> demos;
    if (!demos_dir.empty())
      for (const auto& p : files_with_extension(demos_dir, ".dexdemo")) demos.push_back(read_demo_file(p));
    if (!demos_dir.empty() && demos.empty()) throw DataError("no *.dexdemo files in " + demos_dir);
    fs::create_directories(fs::path(out_dir) / "checkpoints");
    TrainHooks hooks;
    hooks.progress = [](const CurveRow& r) {
      spdlog::info("iteration {}: return {:.3f} success {:.3f} demo weight {:.4g}", r.iteration, r.mean_return, r.success_rate,
                   r.demo_weight);
    };
    hooks.checkpoint = [&](int k, const GaussianMlpPolicy& p) {
      write_file_atomic(fs::path(out_dir) / "checkpoints" / fmt::format("policy_{:05d}.json", k), policy_to_json(p, k).dump() + "\n");
    };
    const TrainResult res = train(ToyRelocateConfig{}, demos, cfg, hooks);
    write_file_atomic(fs::path(out_dir) / "curve.csv", write_curve(res.curve));
    write_file_atomic(fs::path(out_dir) / "policy.json", policy_to_json(res.policy, cfg.iterations).dump() + "\n");
    write_file_atomic(fs::path(out_dir) / "config.json", cfg.to_json().dump(2) + "\n");
    const double final_success = res.curve.empty() ? 0.0 : res.curve.back().success_rate;
    fmt::print("{} iterations, {} demos, area under curve {:.4f}, final success {:.3f}\n", cfg.iterations, demos.size(),
               area_under_curve(res.curve), final_success);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
