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

#include <cmath>
#include <random>

#include "dexretarget/control.hpp"

using namespace dexretarget;

namespace {

ConfidenceModel model() {
  ShapeVector s0 = ShapeVector::LinSpaced(-0.5, 0.5);
  ShapeVector sigma = ShapeVector::LinSpaced(0.01, 0.2);
  return ConfidenceModel(s0, sigma);
}

}  // namespace

TEST(Control, ConfidencePeakIsOne) {
  const auto m = model();
  EXPECT_EQ(confidence(m, m.s0()), 1.0);
}

TEST(Control, ConfidenceAtDistanceTwo) {
  const auto m = model();
  for (int j = 0; j < kShapeDim; ++j) {
    ShapeVector s = m.s0();
    s[j] += 2.0 * std::sqrt(m.sigma()[j]);
    EXPECT_NEAR(confidence(m, s), std::exp(-2.0), 1e-12) << j;
  }
}

TEST(Control, ConfidenceStrictlyDecreasing) {
  const auto m = model();
  for (int j = 0; j < kShapeDim; ++j) {
    double prev = 1.0;
    for (int k = 1; k <= 20; ++k) {
      ShapeVector s = m.s0();
      s[j] -= 0.05 * k * std::sqrt(m.sigma()[j]);
      const double p = confidence(m, s);
      EXPECT_LT(p, prev);
      EXPECT_GT(p, 0.0);
      prev = p;
    }
  }
}

TEST(Control, ConfidenceModelRejectsBadVariance) {
  ShapeVector sigma = ShapeVector::Ones();
  sigma[4] = 0.0;
  EXPECT_THROW(ConfidenceModel(ShapeVector::Zero(), sigma), DataError);
}

TEST(Control, PdArithmeticExample) {
  const PDGains g = PDGains::uniform(1, 2.0, 0.1);
  const VecX u = pd_torque(0.5, g, VecX::Constant(1, 0.3), VecX::Constant(1, -1.0));
  EXPECT_EQ(u[0], 0.5 * 2.0 * 0.3 + 0.1 * -1.0);
  EXPECT_NEAR(u[0], 0.2, 1e-15);
}

TEST(Control, PdLimits) {
  const PDGains g(Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(0.1, 0.2, 0.3));
  const VecX e = Eigen::Vector3d(0.5, -0.5, 1.0), de = Eigen::Vector3d(1.0, 2.0, -1.0);
  EXPECT_EQ(pd_torque(1.0, g, e, de), VecX(g.kp.cwiseProduct(e) + g.kd.cwiseProduct(de)));
  EXPECT_EQ(pd_torque(0.0, g, e, VecX::Zero(3)), VecX::Zero(3));
}

TEST(Control, PdLinearityAndSoftening) {
  const PDGains g(Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(0.1, 0.2, 0.3));
  const VecX e1 = Eigen::Vector3d(0.5, -0.5, 1.0), e2 = Eigen::Vector3d(-0.25, 0.75, 0.5);
  const VecX de = Eigen::Vector3d(1.0, 2.0, -1.0);
  const VecX lhs = pd_torque(0.7, g, e1 + e2, VecX::Zero(3));
  const VecX rhs = pd_torque(0.7, g, e1, VecX::Zero(3)) + pd_torque(0.7, g, e2, VecX::Zero(3));
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-15);
  const VecX dl = pd_torque(0.7, g, VecX::Zero(3), 2.0 * de);
  EXPECT_LE((dl - 2.0 * pd_torque(0.7, g, VecX::Zero(3), de)).cwiseAbs().maxCoeff(), 1e-15);
  double prev = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double n = pd_torque(0.1 * k, g, e1, VecX::Zero(3)).norm();
    EXPECT_GE(n, prev);
    prev = n;
  }
}

TEST(Control, PdSizeMismatch) {
  const PDGains g = PDGains::uniform(3, 1.0, 0.1);
  EXPECT_THROW(pd_torque(1.0, g, VecX::Zero(2), VecX::Zero(3)), DimensionError);
  EXPECT_THROW(PDGains(VecX::Constant(2, -1.0), VecX::Zero(2)), DataError);
}

TEST(Control, LowPassStepResponse) {
  LowPassState st(0.5, VecX::Zero(1));
  EXPECT_EQ(st.step(VecX::Ones(1))[0], 0.5);
  EXPECT_EQ(st.step(VecX::Ones(1))[0], 0.75);
  EXPECT_EQ(st.step(VecX::Ones(1))[0], 0.875);
}

TEST(Control, LowPassDcGainAndIdentity) {
  const VecX c = Eigen::Vector2d(0.3, -1.7);
  LowPassState dc(0.37, c);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(dc.step(c), c);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  LowPassState id(1.0);
  for (int i = 0; i < 20; ++i) {
    const VecX x = Eigen::Vector2d(n(rng), n(rng));
    EXPECT_EQ(id.step(x), x);
  }
}

TEST(Control, LowPassStaysInConvexHull) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  std::vector<VecX> xs;
  for (int i = 0; i < 200; ++i) xs.push_back(Eigen::Vector2d(u(rng), u(rng)));
  const auto ys = low_pass_filter(xs, 0.3);
  for (size_t i = 0; i < ys.size(); ++i) {
    VecX lo = xs[0], hi = xs[0];
    for (size_t k = 0; k <= i; ++k) {
      lo = lo.cwiseMin(xs[k]);
      hi = hi.cwiseMax(xs[k]);
    }
    EXPECT_TRUE((ys[i].array() >= lo.array() - 1e-15).all() && (ys[i].array() <= hi.array() + 1e-15).all());
  }
}

TEST(Control, LowPassValidation) {
  EXPECT_THROW(LowPassState(0.0), DataError);
  EXPECT_THROW(LowPassState(1.5), DataError);
  LowPassState st(0.5, VecX::Zero(2));
  EXPECT_THROW(st.step(VecX::Zero(3)), DimensionError);
}

TEST(Control, GammaFromCutoff) {
  EXPECT_NEAR(gamma_from_cutoff(5.0, 0.04), 1.0 - std::exp(-2.0 * std::numbers::pi * 0.2), 1e-15);
}
