#include "relimu/filter.hpp"

namespace relimu {

RelativeEkf::RelativeEkf(const SystemState& x0, const Covariance& P0,
                         const NoiseParams& noise, const EkfOptions& opt)
    : x_(x0), P_(P0), noise_(noise), opt_(opt), accel_est_(opt.accel_cutoff_hz) {}

void RelativeEkf::predict(const ImuSample& imu1, const ImuSample& imu2,
                          double dt, const std::optional<Vec3>& omega1_dot) {
  const Vec3 w1_dot =
      omega1_dot ? *omega1_dot : accel_est_.update(imu1.omega_m, dt);

  // hold the mean of the two latest samples over the step
  ImuSample held1 = imu1, held2 = imu2;
  if (has_prev_imu_) {
    held1.omega_m = 0.5 * (prev_imu1_.omega_m + imu1.omega_m);
    held1.accel_m = 0.5 * (prev_imu1_.accel_m + imu1.accel_m);
    held2.omega_m = 0.5 * (prev_imu2_.omega_m + imu2.omega_m);
    held2.accel_m = 0.5 * (prev_imu2_.accel_m + imu2.accel_m);
  }
  prev_imu1_ = imu1;
  prev_imu2_ = imu2;
  has_prev_imu_ = true;

  const PredictResult r =
      ekf_predict(x_, P_, held1, held2, dt, w1_dot, noise_, opt_.phi_order,
                  opt_.gyro1_inflation);
  x_ = r.x;
  P_ = r.P;
  t_ = imu1.t;
}

UpdateStats RelativeEkf::update_dp(const RelPositionMeas& m) {
  const ResidualH rh = residual_and_H_dp(x_, m);
  const double gate = opt_.chi2_gate ? opt_.chi2_threshold : 0.0;
  const UpdateResult r = ekf_update(x_, P_, rh.residual, rh.H, m.R, gate);
  x_ = r.x;
  P_ = r.P;
  return r.stats;
}

UpdateStats RelativeEkf::update_dq(const RelOrientationMeas& m) {
  const ResidualH rh = residual_and_H_dq(x_, m);
  const double gate = opt_.chi2_gate ? opt_.chi2_threshold : 0.0;
  const UpdateResult r = ekf_update(x_, P_, rh.residual, rh.H, m.R, gate);
  x_ = r.x;
  P_ = r.P;
  return r.stats;
}

}  // namespace relimu
