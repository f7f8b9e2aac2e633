#include "relimu/propagation.hpp"

#include <cmath>
#include <stdexcept>

namespace relimu {

using geom::skew;

PhiMatrix phi_first_order(const LinearizedModel& lin, double dt, int order) {
  PhiMatrix phi = PhiMatrix::Identity() + lin.F * dt;
  if (order >= 2) phi += 0.5 * dt * dt * (lin.F * lin.F);
  return phi;
}

void PhiProductAccumulator::push(const Mat21& f_prev, const Mat21& f_curr,
                                 double dt) {
  Mat21 step;
  if (order_ >= 2) {
    const Mat21 f_avg = 0.5 * (f_prev + f_curr);
    step = Mat21::Identity() + f_avg * dt + 0.5 * dt * dt * (f_avg * f_avg);
  } else {
    step = Mat21::Identity() + f_prev * dt;
  }
  phi_ = step * phi_;
}

AppendixCPhi::AppendixCPhi(const SystemState& x0, const ImuSample& imu1,
                           const ImuSample& imu2) {
  w1_t0_ = imu1.omega_m - x0.bg1;
  C0_ = geom::quat_to_rot(x0.q_rel);
  prev_k_ = eval_kernels(Mat3::Identity(), Mat3::Identity(), x0, imu1, imu2);
  prev_w1_ = w1_t0_;
  prev_w2_ = imu2.omega_m - x0.bg2;
  w1_now_ = w1_t0_;
  for (int i = 0; i < 5; ++i) {
    d_[i].setZero();
    dd_[i].setZero();
  }
}

AppendixCPhi::Kernels AppendixCPhi::eval_kernels(const Mat3& A, const Mat3& B,
                                                 const SystemState& x,
                                                 const ImuSample& imu1,
                                                 const ImuSample& imu2) const {
  const Vec3 w1 = imu1.omega_m - x.bg1;
  const Vec3 a2 = imu2.accel_m - x.ba2;
  const Mat3 C = geom::quat_to_rot(x.q_rel);
  const Vec3 w = C * a2;
  const Mat3 K = skew(w1) * skew(x.p_rel) +
                 skew(w1.cross(x.p_rel) + 2.0 * x.v_rel);
  Kernels k;
  k.e = A * skew(w) * A.transpose();
  k.e_ia_ak = k.e * ia_ + A * K;
  k.e_c0_ib = k.e * (C0_ * ib_);
  k.a = A;
  k.c0_b = C0_ * B;
  return k;
}

void AppendixCPhi::push(const SystemState& x, const ImuSample& imu1,
                        const ImuSample& imu2, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("AppendixCPhi: dt must be > 0");
  const Vec3 w1 = imu1.omega_m - x.bg1;
  const Vec3 w2 = imu2.omega_m - x.bg2;

  // advance the two frame rotations (midpoint rate over the step)
  qa_ = geom::quat_integrate(qa_, 0.5 * (prev_w1_ + w1), dt);
  qb_ = geom::quat_integrate(qb_, 0.5 * (prev_w2_ + w2), dt);
  const Mat3 A = geom::quat_to_rot(qa_);
  const Mat3 B = geom::quat_to_rot(qb_);

  ia_ += 0.5 * dt * (prev_a_ + A);
  ib_ += 0.5 * dt * (prev_b_ + B);

  const Kernels k = eval_kernels(A, B, x, imu1, imu2);
  const Mat3* curr[5] = {&k.e, &k.e_ia_ak, &k.e_c0_ib, &k.a, &k.c0_b};
  const Mat3* prev[5] = {&prev_k_.e, &prev_k_.e_ia_ak, &prev_k_.e_c0_ib,
                         &prev_k_.a, &prev_k_.c0_b};
  for (int i = 0; i < 5; ++i) {
    const Mat3 d_new = d_[i] + 0.5 * dt * (*prev[i] + *curr[i]);
    dd_[i] += 0.5 * dt * (d_[i] + d_new);
    d_[i] = d_new;
  }

  prev_k_ = k;
  prev_a_ = A;
  prev_b_ = B;
  prev_w1_ = w1;
  prev_w2_ = w2;
  w1_now_ = w1;
  elapsed_ += dt;
}

PhiMatrix AppendixCPhi::phi() const {
  const Mat3 At = geom::quat_to_rot(qa_).transpose();  // C'(t)
  const Mat3 Bt = geom::quat_to_rot(qb_).transpose();  // C''(t)
  const Mat3 W1t = skew(w1_now_);
  const Mat3 W10 = skew(w1_t0_);
  const double T = elapsed_;

  PhiMatrix phi = PhiMatrix::Zero();
  const Mat3 phi11 = At * (Mat3::Identity() + W10 * T);
  const Mat3 phi12 = At * T;
  const Mat3 phi13 = -At * dd_[0] * C0_;
  const Mat3 phi14 = -At * dd_[1];
  const Mat3 phi15 = At * dd_[2];
  const Mat3 phi16 = At * dd_[3];
  const Mat3 phi17 = -At * dd_[4];

  phi.block<3, 3>(idx::dp, idx::dp) = phi11;
  phi.block<3, 3>(idx::dp, idx::dv) = phi12;
  phi.block<3, 3>(idx::dp, idx::dth) = phi13;
  phi.block<3, 3>(idx::dp, idx::dbg1) = phi14;
  phi.block<3, 3>(idx::dp, idx::dbg2) = phi15;
  phi.block<3, 3>(idx::dp, idx::dba1) = phi16;
  phi.block<3, 3>(idx::dp, idx::dba2) = phi17;

  // second block row is the time derivative of the first
  phi.block<3, 3>(idx::dv, idx::dp) = -W1t * phi11 + At * W10;
  phi.block<3, 3>(idx::dv, idx::dv) = -W1t * At * T + At;
  phi.block<3, 3>(idx::dv, idx::dth) = W1t * At * dd_[0] * C0_ - At * d_[0] * C0_;
  phi.block<3, 3>(idx::dv, idx::dbg1) = W1t * At * dd_[1] - At * d_[1];
  phi.block<3, 3>(idx::dv, idx::dbg2) = -W1t * At * dd_[2] + At * d_[2];
  phi.block<3, 3>(idx::dv, idx::dba1) = -W1t * At * dd_[3] + At * ia_;
  phi.block<3, 3>(idx::dv, idx::dba2) = W1t * At * dd_[4] - At * d_[4];

  phi.block<3, 3>(idx::dth, idx::dth) = Bt;
  phi.block<3, 3>(idx::dth, idx::dbg1) = Bt * C0_.transpose() * ia_;
  phi.block<3, 3>(idx::dth, idx::dbg2) = -Bt * ib_;

  phi.block<3, 3>(idx::dbg1, idx::dbg1) = Mat3::Identity();
  phi.block<3, 3>(idx::dbg2, idx::dbg2) = Mat3::Identity();
  phi.block<3, 3>(idx::dba1, idx::dba1) = Mat3::Identity();
  phi.block<3, 3>(idx::dba2, idx::dba2) = Mat3::Identity();
  return phi;
}

PhiMatrix phi_appendix_c(const std::vector<PhiHistorySample>& traj, double t0,
                         double t1) {
  if (traj.size() < 2)
    throw std::invalid_argument("phi_appendix_c: need at least two samples");
  if (!(t1 > t0 || t1 == t0))
    throw std::invalid_argument("phi_appendix_c: t1 must be >= t0");

  // locate t0 and verify a uniform, gap-free grid
  const double dt = traj[1].imu1.t - traj[0].imu1.t;
  if (dt <= 0.0) throw std::invalid_argument("phi_appendix_c: non-increasing timestamps");
  for (size_t i = 1; i < traj.size(); ++i) {
    const double step = traj[i].imu1.t - traj[i - 1].imu1.t;
    if (std::abs(step - dt) > 1e-9 * std::max(1.0, dt))
      throw std::invalid_argument("phi_appendix_c: non-uniform or gapped trajectory");
  }
  size_t i0 = traj.size();
  for (size_t i = 0; i < traj.size(); ++i) {
    if (std::abs(traj[i].imu1.t - t0) < 0.5 * dt) {
      i0 = i;
      break;
    }
  }
  if (i0 == traj.size())
    throw std::invalid_argument("phi_appendix_c: t0 not covered by trajectory");
  if (t1 == t0) return PhiMatrix::Identity();

  AppendixCPhi integ(traj[i0].x, traj[i0].imu1, traj[i0].imu2);
  for (size_t i = i0 + 1; i < traj.size() && traj[i].imu1.t <= t1 + 0.5 * dt; ++i)
    integ.push(traj[i].x, traj[i].imu1, traj[i].imu2, dt);
  if (integ.elapsed() < t1 - t0 - 0.5 * dt)
    throw std::invalid_argument("phi_appendix_c: trajectory does not cover [t0, t1]");
  return integ.phi();
}

QcMatrix continuous_noise_cov(const NoiseParams& noise, double gyro1_inflation) {
  QcMatrix qc = QcMatrix::Zero();
  auto block = [&qc](int i, double sigma) {
    qc.block<3, 3>(3 * i, 3 * i) = sigma * sigma * Mat3::Identity();
  };
  block(0, noise.sigma_g1 * gyro1_inflation);
  block(1, noise.sigma_g2);
  block(2, noise.sigma_a1);
  block(3, noise.sigma_a2);
  block(4, noise.sigma_wg1);
  block(5, noise.sigma_wg2);
  block(6, noise.sigma_wa1);
  block(7, noise.sigma_wa2);
  // block 8 (ndot_g1) has no defined density and stays zero
  return qc;
}

QdMatrix discrete_Qd(const LinearizedModel& lin, const QcMatrix& qc, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("discrete_Qd: dt must be > 0");
  const Eigen::Matrix<double, idx::error_dim, idx::noise_dim> gq = lin.G * qc;
  const Mat21 gqg = gq * lin.G.transpose();
  const PhiMatrix phi = phi_first_order(lin, dt, 1);
  QdMatrix qd = 0.5 * dt * (phi * gqg * phi.transpose() + gqg);
  symmetrize(qd);
  return qd;
}

namespace {

struct RawState {
  Vec3 p, v;
  Vec4 q;
};

RawState derivative_at(const SystemState& base, const RawState& s,
                       const ImuSample& imu1, const ImuSample& imu2,
                       const Vec3& omega1_dot) {
  SystemState x = base;
  x.p_rel = s.p;
  x.v_rel = s.v;
  x.q_rel = geom::from_vec4(s.q);  // not renormalized inside RK4 stages
  const StateDerivative d = continuous_dynamics(x, imu1, imu2, omega1_dot);
  return RawState{d.p_dot, d.v_dot, d.q_dot};
}

}  // namespace

SystemState integrate_state_rk4(const SystemState& x_hat, const ImuSample& imu1,
                                const ImuSample& imu2, double dt,
                                const Vec3& omega1_dot) {
  const RawState s0{x_hat.p_rel, x_hat.v_rel, geom::to_vec4(x_hat.q_rel)};
  auto axpy = [](const RawState& s, const RawState& k, double h) {
    return RawState{s.p + h * k.p, s.v + h * k.v, s.q + h * k.q};
  };
  const RawState k1 = derivative_at(x_hat, s0, imu1, imu2, omega1_dot);
  const RawState k2 = derivative_at(x_hat, axpy(s0, k1, 0.5 * dt), imu1, imu2, omega1_dot);
  const RawState k3 = derivative_at(x_hat, axpy(s0, k2, 0.5 * dt), imu1, imu2, omega1_dot);
  const RawState k4 = derivative_at(x_hat, axpy(s0, k3, dt), imu1, imu2, omega1_dot);

  SystemState out = x_hat;
  out.p_rel += dt / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
  out.v_rel += dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
  Vec4 q = geom::to_vec4(x_hat.q_rel) +
           dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
  Quat qq = geom::from_vec4(q);
  qq.normalize();
  out.q_rel = qq;
  return out;
}

PredictResult ekf_predict(const SystemState& x_hat, const Covariance& P,
                          const ImuSample& imu1, const ImuSample& imu2,
                          double dt, const Vec3& omega1_dot,
                          const NoiseParams& noise, int phi_order,
                          double gyro1_inflation) {
  if (dt <= 0.0) throw std::invalid_argument("ekf_predict: dt must be > 0");
  const LinearizedModel lin = jacobian_F(x_hat, imu1, imu2, omega1_dot);
  const PhiMatrix phi = phi_first_order(lin, dt, phi_order);
  const QcMatrix qc = continuous_noise_cov(noise, gyro1_inflation);
  const QdMatrix qd = discrete_Qd(lin, qc, dt);

  PredictResult out;
  out.x = integrate_state_rk4(x_hat, imu1, imu2, dt, omega1_dot);
  out.P = phi * P * phi.transpose() + qd;
  symmetrize(out.P);
  return out;
}

}  // namespace relimu
