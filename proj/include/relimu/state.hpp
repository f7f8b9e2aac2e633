#pragma once

#include <Eigen/Dense>

#include "relimu/geometry.hpp"

namespace relimu {

// Error-state ordering. This single set of offsets governs F, G, Phi, H,
// the observability matrix and every direction basis.
namespace idx {
inline constexpr int dp = 0;
inline constexpr int dv = 3;
inline constexpr int dth = 6;
inline constexpr int dbg1 = 9;
inline constexpr int dbg2 = 12;
inline constexpr int dba1 = 15;
inline constexpr int dba2 = 18;
inline constexpr int error_dim = 21;
inline constexpr int noise_dim = 27;
}  // namespace idx

using ErrorVec = Eigen::Matrix<double, idx::error_dim, 1>;
using Mat21 = Eigen::Matrix<double, idx::error_dim, idx::error_dim>;
using Covariance = Mat21;

/// Relative state of the target IMU with respect to the reference IMU,
/// plus both sensors' bias states. 22 scalar entries.
struct SystemState {
  Vec3 p_rel = Vec3::Zero();    // m, target position in the reference frame
  Vec3 v_rel = Vec3::Zero();    // m/s, d/dt of p_rel in the reference frame
  Quat q_rel = Quat::Identity();
  Vec3 bg1 = Vec3::Zero();      // rad/s
  Vec3 bg2 = Vec3::Zero();
  Vec3 ba1 = Vec3::Zero();      // m/s^2
  Vec3 ba2 = Vec3::Zero();

  bool is_finite() const;
};

/// Continuous-time noise densities (sigma, per sqrt(Hz)). The gyro/accel
/// pairs drive the measurement noise, the *_walk pairs drive the bias
/// random walks.
struct NoiseParams {
  double sigma_g1 = 1e-3;   // rad/s/sqrt(Hz)
  double sigma_g2 = 1e-3;
  double sigma_a1 = 1e-2;   // m/s^2/sqrt(Hz)
  double sigma_a2 = 1e-2;
  double sigma_wg1 = 1e-5;  // rad/s^2/sqrt(Hz)
  double sigma_wg2 = 1e-5;
  double sigma_wa1 = 1e-4;  // m/s^3/sqrt(Hz)
  double sigma_wa2 = 1e-4;

  bool valid() const {
    return sigma_g1 >= 0 && sigma_g2 >= 0 && sigma_a1 >= 0 && sigma_a2 >= 0 &&
           sigma_wg1 >= 0 && sigma_wg2 >= 0 && sigma_wa1 >= 0 && sigma_wa2 >= 0;
  }
};

/// Additive on position, velocity and biases; right-multiplicative
/// injection on the quaternion.
SystemState state_retract(const SystemState& x_hat, const ErrorVec& dx);

/// First-order inverse of state_retract: x (-) x_hat.
ErrorVec state_difference(const SystemState& x, const SystemState& x_hat);

/// P <- (P + P^T)/2, applied after every predict and update.
void symmetrize(Mat21& p);

Mat21 default_initial_covariance();

}  // namespace relimu
