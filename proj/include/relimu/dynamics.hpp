#pragma once

#include "relimu/state.hpp"

namespace relimu {

inline constexpr double kGravityMag = 9.81;
inline const Vec3 kGravity(0.0, 0.0, -kGravityMag);  // ^G g, m/s^2

/// One synchronized gyro/accel sample of a single IMU.
struct ImuSample {
  double t = 0.0;                 // s
  Vec3 omega_m = Vec3::Zero();    // rad/s
  Vec3 accel_m = Vec3::Zero();    // m/s^2 (specific force)
};

struct StateDerivative {
  Vec3 p_dot = Vec3::Zero();
  Vec3 v_dot = Vec3::Zero();
  Vec4 q_dot = Vec4::Zero();      // scalar-first
  // bias rates are zero in estimate propagation
};

/// Continuous-time linearization around the current estimate.
/// F is 21x21 (1/s); G maps the 27-entry noise vector
/// [n_g1 n_g2 n_a1 n_a2 n_wg1 n_wg2 n_wa1 n_wa2 ndot_g1] into error rates.
struct LinearizedModel {
  Mat21 F = Mat21::Zero();
  Eigen::Matrix<double, idx::error_dim, idx::noise_dim> G =
      Eigen::Matrix<double, idx::error_dim, idx::noise_dim>::Zero();
  Mat3 K = Mat3::Zero();
  Mat3 U = Mat3::Zero();
};

/// Rates of the estimate equations. Bias-corrected rates are computed
/// internally as omega_m - bg and accel_m - ba.
StateDerivative continuous_dynamics(const SystemState& x_hat,
                                    const ImuSample& imu1,
                                    const ImuSample& imu2,
                                    const Vec3& omega1_dot);

LinearizedModel jacobian_F(const SystemState& x_hat, const ImuSample& imu1,
                           const ImuSample& imu2, const Vec3& omega1_dot);

/// Backward difference of the reference gyro stream. Throws
/// std::invalid_argument for dt <= 0.
Vec3 angular_accel_estimate(const Vec3& omega_m_prev, const Vec3& omega_m_curr,
                            double dt);

/// Backward-difference differentiator with an optional single-pole
/// low-pass (cutoff_hz <= 0 disables the filter). Used on measured data
/// where no analytic reference angular acceleration exists.
class AngularAccelEstimator {
 public:
  explicit AngularAccelEstimator(double cutoff_hz = 0.0) : cutoff_hz_(cutoff_hz) {}

  Vec3 update(const Vec3& omega_m, double dt);
  void reset();

 private:
  double cutoff_hz_;
  bool has_prev_ = false;
  Vec3 prev_omega_ = Vec3::Zero();
  Vec3 filtered_ = Vec3::Zero();
};

}  // namespace relimu
