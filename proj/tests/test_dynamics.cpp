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

#include <numbers>

#include "dexretarget/dynamics.hpp"
#include "dexretarget/robot_io.hpp"
#include "oracles.hpp"

using namespace dexretarget;

namespace {

const Vec3 kGravity(0.0, 0.0, -9.81);

KinematicTree pendulum() { return load_robot_file(oracle::data_path("robots/pendulum.robot")); }

/// Analytic point-mass pendulum torque, angle from the downward vertical.
double pendulum_torque(double th, double thdd) { return 1.0 * 0.25 * thdd + 1.0 * 9.81 * 0.5 * std::sin(th); }

VecX tau(const KinematicTree& t, const VecX& q, const VecX& qd, const VecX& qdd, const Vec3& g = kGravity) {
  return inverse_dynamics(t, DynamicsInput{q, qd, qdd, g});
}

}  // namespace

TEST(Dynamics, PendulumHorizontal) {
  const VecX t = tau(pendulum(), VecX::Constant(1, std::numbers::pi / 2), VecX::Zero(1), VecX::Zero(1));
  EXPECT_NEAR(t[0], 4.905, 1e-9);
}

TEST(Dynamics, PendulumAnalyticEverywhere) {
  const auto p = pendulum();
  for (double th = -3.0; th <= 3.0; th += 0.25)
    for (double thdd : {-2.0, 0.0, 3.5}) {
      const VecX t = tau(p, VecX::Constant(1, th), VecX::Constant(1, 1.3), VecX::Constant(1, thdd));
      EXPECT_NEAR(t[0], pendulum_torque(th, thdd), 1e-12);
    }
}

TEST(Dynamics, ZeroGravityStatics) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = oracle::random_tree(rng, 5);
    const VecX r = tau(t, oracle::random_q(rng, 5), VecX::Zero(5), VecX::Zero(5), Vec3::Zero());
    EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Dynamics, MatchesLagrangianOracle) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = oracle::random_tree(rng, 3, true, trial % 2 ? 0.05 : 0.0);
    const VecX q = oracle::random_q(rng, 3), qd = oracle::random_q(rng, 3), qdd = oracle::random_q(rng, 3);
    EXPECT_LE(oracle::rel_err(tau(t, q, qd, qdd), oracle::lagrangian_torque(t, q, qd, qdd, kGravity)), 1e-4) << trial;
  }
}

TEST(Dynamics, BranchedTreesMatchLagrangianOracle) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = oracle::random_tree(rng, 4);
    const VecX q = oracle::random_q(rng, 4), qd = oracle::random_q(rng, 4), qdd = oracle::random_q(rng, 4);
    EXPECT_LE(oracle::rel_err(tau(t, q, qd, qdd), oracle::lagrangian_torque(t, q, qd, qdd, kGravity)), 1e-4) << trial;
  }
}

TEST(Dynamics, MassMatrixSymmetricPositiveDefinite) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 6;
    const auto t = oracle::random_tree(rng, n);
    const VecX q = oracle::random_q(rng, n);
    const MatX m = mass_matrix(t, q);
    EXPECT_LE((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatX>(0.5 * (m + m.transpose())).eigenvalues().minCoeff(), 0.0);
    EXPECT_LE(oracle::rel_err(m, oracle::fd_mass_matrix(t, q)), 1e-6);
  }
}

TEST(Dynamics, LinearInAcceleration) {
  std::mt19937_64 rng(35);
  const auto t = oracle::random_tree(rng, 5);
  const VecX q = oracle::random_q(rng, 5), qd = oracle::random_q(rng, 5);
  const VecX a = oracle::random_q(rng, 5), b = oracle::random_q(rng, 5);
  const VecX base = tau(t, q, qd, VecX::Zero(5));
  const VecX lhs = tau(t, q, qd, a + b) - base;
  const VecX rhs = (tau(t, q, qd, a) - base) + (tau(t, q, qd, b) - base);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((lhs - mass_matrix(t, q) * (a + b)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dynamics, GravityScalesLinearly) {
  std::mt19937_64 rng(36);
  const auto t = oracle::random_tree(rng, 5);
  const VecX q = oracle::random_q(rng, 5);
  const VecX g1 = tau(t, q, VecX::Zero(5), VecX::Zero(5));
  const VecX g3 = tau(t, q, VecX::Zero(5), VecX::Zero(5), 3.0 * kGravity);
  EXPECT_LE((g3 - 3.0 * g1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dynamics, DampingAddsViscousTerm) {
  std::mt19937_64 rng(37);
  std::mt19937_64 rng2 = rng;
  const auto plain = oracle::random_tree(rng, 3, true, 0.0);
  const auto damped = oracle::random_tree(rng2, 3, true, 0.2);
  const VecX q = Eigen::Vector3d(0.1, -0.4, 0.9), qd = Eigen::Vector3d(1.0, -2.0, 0.5), qdd = Eigen::Vector3d(0.3, 0.2, 0.1);
  EXPECT_LE((tau(damped, q, qd, qdd) - tau(plain, q, qd, qdd) - 0.2 * qd).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dynamics, EnergyConsistency) {
  std::mt19937_64 rng(38);
  const auto t = oracle::random_tree(rng, 3, true);
  const double dt = 1e-3;
  const int steps = 1000;
  auto q_at = [](double s) { return Eigen::Vector3d(0.8 * std::sin(2.0 * s), 0.5 * std::cos(3.0 * s), s * s); };
  auto qd_at = [](double s) { return Eigen::Vector3d(1.6 * std::cos(2.0 * s), -1.5 * std::sin(3.0 * s), 2.0 * s); };
  auto qdd_at = [](double s) { return Eigen::Vector3d(-3.2 * std::sin(2.0 * s), -4.5 * std::cos(3.0 * s), 2.0); };
  auto energy = [&](double s) {
    const VecX q = q_at(s), qd = qd_at(s);
    return 0.5 * qd.dot(oracle::fd_mass_matrix(t, q) * qd) + oracle::potential_energy(t, q, kGravity);
  };
  double work = 0.0;
  double prev = tau(t, q_at(0.0), qd_at(0.0), qdd_at(0.0)).dot(qd_at(0.0));
  for (int k = 1; k <= steps; ++k) {
    const double s = k * dt;
    const double p = tau(t, q_at(s), qd_at(s), qdd_at(s)).dot(qd_at(s));
    work += 0.5 * (p + prev) * dt;
    prev = p;
  }
  const double de = energy(steps * dt) - energy(0.0);
  EXPECT_NEAR(work, de, 1e-4 * std::max(1.0, std::abs(de)));
}

TEST(Dynamics, MissingInertialIsAnError) {
  RobotSpec s = pendulum().spec();
  s.links[1].inertial.reset();
  const KinematicTree t(s);
  EXPECT_THROW(tau(t, VecX::Zero(1), VecX::Zero(1), VecX::Zero(1)), DataError);
  const std::vector<VecX> traj(5, VecX::Zero(1));
  EXPECT_THROW(compute_actions(t, traj, 0.01, 1.0, ActionMode::kTorque), DataError);
  EXPECT_NO_THROW(compute_actions(t, traj, 0.01, 1.0, ActionMode::kPosition));
}

TEST(Dynamics, InputValidation) {
  EXPECT_THROW(tau(pendulum(), VecX::Zero(2), VecX::Zero(1), VecX::Zero(1)), DimensionError);
  EXPECT_THROW(tau(pendulum(), VecX::Constant(1, std::nan("")), VecX::Zero(1), VecX::Zero(1)), NumericalError);
}

TEST(Dynamics, DifferentiateRamp) {
  std::vector<VecX> q;
  for (int i = 0; i < 10; ++i) q.push_back(Eigen::Vector2d(0.3 * i * 0.1, -1.2 * i * 0.1));
  const auto d = differentiate_trajectory(q, 0.1);
  for (size_t i = 0; i < q.size(); ++i) {
    EXPECT_NEAR(d.qd[i][0], 0.3, 1e-12);
    EXPECT_NEAR(d.qd[i][1], -1.2, 1e-12);
    EXPECT_NEAR(d.qdd[i].norm(), 0.0, 1e-10);
  }
}

TEST(Dynamics, DifferentiateQuadratic) {
  std::vector<VecX> q;
  const double a = 2.5, dt = 0.05;
  for (int i = 0; i < 12; ++i) q.push_back(VecX::Constant(1, 0.5 * a * (i * dt) * (i * dt)));
  const auto d = differentiate_trajectory(q, dt);
  for (size_t i = 1; i + 1 < q.size(); ++i) {
    EXPECT_NEAR(d.qdd[i][0], a, 1e-10);
    EXPECT_NEAR(d.qd[i][0], a * static_cast<double>(i) * dt, 1e-12);
  }
}

TEST(Dynamics, DifferentiateConstantAndShort) {
  const std::vector<VecX> c(6, Eigen::Vector3d(0.1, 0.2, 0.3));
  const auto d = differentiate_trajectory(c, 0.04);
  for (size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(d.qd[i], VecX::Zero(3));
    EXPECT_EQ(d.qdd[i], VecX::Zero(3));
  }
  EXPECT_THROW(differentiate_trajectory(std::vector<VecX>(2, VecX::Zero(1)), 0.1), DataError);
}

TEST(Dynamics, StaticTrajectoryZeroGravity) {
  std::mt19937_64 rng(39);
  const auto t = oracle::random_tree(rng, 4);
  const std::vector<VecX> traj(8, oracle::random_q(rng, 4));
  const auto acts = compute_actions(t, traj, 0.04, 0.3, ActionMode::kBoth, Vec3::Zero());
  ASSERT_EQ(acts.size(), traj.size());
  for (size_t i = 0; i < acts.size(); ++i) {
    EXPECT_LE(acts[i].torque.cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(acts[i].position_target, traj[i]);
  }
}

TEST(Dynamics, OutputLengthForEveryMode) {
  std::vector<VecX> traj;
  for (int i = 0; i < 7; ++i) traj.push_back(VecX::Constant(1, 0.1 * i));
  for (ActionMode m : {ActionMode::kTorque, ActionMode::kPosition, ActionMode::kBoth}) {
    const auto acts = compute_actions(pendulum(), traj, 0.04, 0.5, m);
    ASSERT_EQ(acts.size(), traj.size());
    EXPECT_EQ(acts[3].torque.size(), m == ActionMode::kPosition ? 0 : 1);
    EXPECT_EQ(acts[3].position_target.size(), m == ActionMode::kTorque ? 0 : 1);
  }
  EXPECT_EQ(parse_action_mode(to_string(ActionMode::kBoth)), ActionMode::kBoth);
  EXPECT_THROW(parse_action_mode("velocity"), DataError);
}

TEST(Dynamics, PendulumSwingAtOneKilohertz) {
  const double dt = 1e-3, w = 2.0, amp = 1.2;
  std::vector<VecX> traj;
  for (int i = 0; i <= 2000; ++i) traj.push_back(VecX::Constant(1, amp * std::sin(w * i * dt)));
  const auto acts = compute_actions(pendulum(), traj, dt, 1.0, ActionMode::kTorque);
  double worst = 0.0;
  for (size_t i = 0; i < acts.size(); ++i) {
    const double s = static_cast<double>(i) * dt;
    const double th = amp * std::sin(w * s), thdd = -amp * w * w * std::sin(w * s);
    worst = std::max(worst, std::abs(acts[i].torque[0] - pendulum_torque(th, thdd)));
  }
  EXPECT_LE(worst, 1e-3);
}
