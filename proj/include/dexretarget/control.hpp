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

// Shape-based confidence, confidence-weighted PD law and a first-order low-pass filter.

#include <numbers>
#include <optional>

#include "dexretarget/poseio.hpp"

namespace dexretarget {

/// Gaussian model of the per-frame shape estimate around the calibrated shape.
class ConfidenceModel {
 public:
  ConfidenceModel(const ShapeVector& s0, const ShapeVector& sigma_diag) : s0_(s0), sigma_(sigma_diag) {
    if (!s0.allFinite() || !sigma_diag.allFinite() || !(sigma_diag.array() > 0.0).all())
      throw DataError("confidence model: variances must be finite and > 0");
  }
  explicit ConfidenceModel(const Calibration& c) : ConfidenceModel(c.s0, c.sigma) {}

  const ShapeVector& s0() const { return s0_; }
  const ShapeVector& sigma() const { return sigma_; }

  /// Squared Mahalanobis distance of `s` from s0.
  double mahalanobis_sq(const ShapeVector& s) const {
    return ((s - s0_).cwiseAbs2().array() / sigma_.array()).sum();
  }

 private:
  ShapeVector s0_;
  ShapeVector sigma_;
};

/// Density normalized by its peak: p = exp(-d^2 / 2), so p(s0) = 1.
inline double confidence(const ConfidenceModel& model, const ShapeVector& s) {
  return std::exp(-0.5 * model.mahalanobis_sq(s));
}

struct PDGains {
  VecX kp;  // N*m/rad
  VecX kd;  // N*m*s/rad

  PDGains(VecX kp_in, VecX kd_in) : kp(std::move(kp_in)), kd(std::move(kd_in)) {
    require_size(kd.size(), kp.size(), "PD gains");
    if (!kp.allFinite() || !kd.allFinite() || (kp.array() < 0.0).any() || (kd.array() < 0.0).any())
      throw DataError("PD gains must be finite and >= 0");
  }
  static PDGains uniform(int n, double kp, double kd) {
    return PDGains(VecX::Constant(n, kp), VecX::Constant(n, kd));
  }
};

/// u = p * kp .* e + kd .* de. Only the stiffness term is confidence-scaled.
inline VecX pd_torque(double p, const PDGains& gains, const Eigen::Ref<const VecX>& e,
                      const Eigen::Ref<const VecX>& de) {
  require_size(e.size(), gains.kp.size(), "pd_torque error");
  require_size(de.size(), gains.kp.size(), "pd_torque error rate");
  return p * gains.kp.cwiseProduct(e) + gains.kd.cwiseProduct(de);
}

/// Smoothing factor for a first-order filter with cutoff `cutoff_hz` sampled every `dt` seconds.
inline double gamma_from_cutoff(double cutoff_hz, double dt) {
  return 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz * dt);
}

/// y = gamma * x + (1 - gamma) * y_prev; the first sample initializes y.
class LowPassState {
 public:
  explicit LowPassState(double gamma) : gamma_(gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DataError("low-pass gamma must lie in (0, 1]");
  }
  LowPassState(double gamma, VecX initial) : LowPassState(gamma) { prev_ = std::move(initial); }

  double gamma() const { return gamma_; }
  const std::optional<VecX>& previous() const { return prev_; }

  VecX step(const Eigen::Ref<const VecX>& x) {
    if (!prev_) {
      prev_ = x;
      return *prev_;
    }
    require_size(x.size(), prev_->size(), "low_pass_step");
    *prev_ = gamma_ * x + (1.0 - gamma_) * *prev_;
    return *prev_;
  }

 private:
  double gamma_;
  std::optional<VecX> prev_;
};

inline VecX low_pass_step(LowPassState& state, const Eigen::Ref<const VecX>& x) { return state.step(x); }

inline std::vector<VecX> low_pass_filter(std::span<const VecX> xs, double gamma) {
  LowPassState st(gamma);
  std::vector<VecX> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(st.step(x));
  return out;
}

}  // namespace dexretarget
