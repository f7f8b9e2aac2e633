#include "relimu/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace relimu {

using geom::skew;

StateDerivative continuous_dynamics(const SystemState& x_hat,
                                    const ImuSample& imu1,
                                    const ImuSample& imu2,
                                    const Vec3& omega1_dot) {
  const Vec3 w1 = imu1.omega_m - x_hat.bg1;
  const Vec3 w2 = imu2.omega_m - x_hat.bg2;
  const Vec3 a1 = imu1.accel_m - x_hat.ba1;
  const Vec3 a2 = imu2.accel_m - x_hat.ba2;
  const Mat3 C = geom::quat_to_rot(x_hat.q_rel);
  const Vec3& p = x_hat.p_rel;
  const Vec3& v = x_hat.v_rel;

  StateDerivative d;
  d.p_dot = v;
  d.v_dot = C * a2 - a1 - 2.0 * w1.cross(v) - w1.cross(w1.cross(p)) -
            omega1_dot.cross(p);
  // qdot = 1/2 (q x w2bar - w1bar x q); both products on raw quaternions
  const Quat qw2 = x_hat.q_rel * geom::pure(w2);
  const Quat w1q = geom::pure(w1) * x_hat.q_rel;
  d.q_dot = 0.5 * (geom::to_vec4(qw2) - geom::to_vec4(w1q));
  return d;
}

LinearizedModel jacobian_F(const SystemState& x_hat, const ImuSample& imu1,
                           const ImuSample& imu2, const Vec3& omega1_dot) {
  const Vec3 w1 = imu1.omega_m - x_hat.bg1;
  const Vec3 w2 = imu2.omega_m - x_hat.bg2;
  const Vec3 a2 = imu2.accel_m - x_hat.ba2;
  const Mat3 C = geom::quat_to_rot(x_hat.q_rel);
  const Vec3& p = x_hat.p_rel;
  const Vec3& v = x_hat.v_rel;

  LinearizedModel m;
  m.U = skew(w1) * skew(w1) + skew(omega1_dot);
  m.K = skew(w1) * skew(p) + skew(w1.cross(p) + 2.0 * v);

  m.F.block<3, 3>(idx::dp, idx::dv) = Mat3::Identity();
  m.F.block<3, 3>(idx::dv, idx::dp) = -m.U;
  m.F.block<3, 3>(idx::dv, idx::dv) = -2.0 * skew(w1);
  m.F.block<3, 3>(idx::dv, idx::dth) = -C * skew(a2);
  m.F.block<3, 3>(idx::dv, idx::dbg1) = -m.K;
  m.F.block<3, 3>(idx::dv, idx::dba1) = Mat3::Identity();
  m.F.block<3, 3>(idx::dv, idx::dba2) = -C;
  m.F.block<3, 3>(idx::dth, idx::dth) = -skew(w2);
  m.F.block<3, 3>(idx::dth, idx::dbg1) = C.transpose();
  m.F.block<3, 3>(idx::dth, idx::dbg2) = -Mat3::Identity();
  // rows dbg1..dba2 stay zero

  // noise columns: [n_g1 n_g2 n_a1 n_a2 n_wg1 n_wg2 n_wa1 n_wa2 ndot_g1]
  m.G.block<3, 3>(idx::dv, 0) = -m.K;
  m.G.block<3, 3>(idx::dv, 6) = Mat3::Identity();
  m.G.block<3, 3>(idx::dv, 9) = -C;
  m.G.block<3, 3>(idx::dv, 12) = -skew(p);
  m.G.block<3, 3>(idx::dv, 24) = -skew(p);
  m.G.block<3, 3>(idx::dth, 0) = C.transpose();
  m.G.block<3, 3>(idx::dth, 3) = -Mat3::Identity();
  m.G.block<3, 3>(idx::dbg1, 12) = Mat3::Identity();
  m.G.block<3, 3>(idx::dbg2, 15) = Mat3::Identity();
  m.G.block<3, 3>(idx::dba1, 18) = Mat3::Identity();
  m.G.block<3, 3>(idx::dba2, 21) = Mat3::Identity();
  return m;
}

Vec3 angular_accel_estimate(const Vec3& omega_m_prev, const Vec3& omega_m_curr,
                            double dt) {
  if (dt <= 0.0) throw std::invalid_argument("angular_accel_estimate: dt must be > 0");
  return (omega_m_curr - omega_m_prev) / dt;
}

Vec3 AngularAccelEstimator::update(const Vec3& omega_m, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("AngularAccelEstimator: dt must be > 0");
  if (!has_prev_) {
    has_prev_ = true;
    prev_omega_ = omega_m;
    filtered_.setZero();
    return filtered_;
  }
  const Vec3 raw = (omega_m - prev_omega_) / dt;
  prev_omega_ = omega_m;
  if (cutoff_hz_ <= 0.0) {
    filtered_ = raw;
  } else {
    const double alpha = 1.0 - std::exp(-2.0 * M_PI * cutoff_hz_ * dt);
    filtered_ += alpha * (raw - filtered_);
  }
  return filtered_;
}

void AngularAccelEstimator::reset() {
  has_prev_ = false;
  filtered_.setZero();
}

}  // namespace relimu
