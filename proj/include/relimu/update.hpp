#pragma once

#include "relimu/state.hpp"

namespace relimu {

struct RelPositionMeas {
  double t = 0.0;
  Vec3 dp = Vec3::Zero();           // m
  Mat3 R = Mat3::Identity() * 1e-6; // m^2
};

struct RelOrientationMeas {
  double t = 0.0;
  Quat dq = Quat::Identity();
  Mat3 R = Mat3::Identity() * 1e-6; // rad^2
};

using JacobianH = Eigen::Matrix<double, 3, idx::error_dim>;

struct ResidualH {
  Vec3 residual;
  JacobianH H;
};

/// residual = dp - p_hat, H = [I3 0].
ResidualH residual_and_H_dp(const SystemState& x_hat, const RelPositionMeas& m);

/// residual = 2 vec(dq x q_hat^-1), sign-canonicalized; H = [0 0 C(q_hat) 0...].
ResidualH residual_and_H_dq(const SystemState& x_hat, const RelOrientationMeas& m);

struct UpdateStats {
  double nis = 0.0;       // normalized innovation squared
  bool gated = false;     // rejected by the chi-square gate
};

struct UpdateResult {
  SystemState x;
  Covariance P;
  UpdateStats stats;
};

/// Standard EKF measurement update with Joseph-form covariance.
/// The correction is applied through state_retract. Throws NumericalError
/// (with a condition estimate) when S = H P H^T + R is not invertible.
/// gate_threshold <= 0 disables gating.
UpdateResult ekf_update(const SystemState& x_hat, const Covariance& P,
                        const Eigen::VectorXd& residual,
                        const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                        double gate_threshold = 0.0);

}  // namespace relimu
