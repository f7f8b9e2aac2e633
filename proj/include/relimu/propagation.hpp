#pragma once

#include <vector>

#include "relimu/dynamics.hpp"

namespace relimu {

using PhiMatrix = Mat21;
using QdMatrix = Mat21;
using QcMatrix = Eigen::Matrix<double, idx::noise_dim, idx::noise_dim>;

/// Single-step transition I + F*dt, plus the optional F^2*dt^2/2 term
/// when order == 2.
PhiMatrix phi_first_order(const LinearizedModel& lin, double dt, int order = 1);

/// Accumulates Phi(t_k, t_0) as a product of per-IMU-step factors.
/// order 1 holds F at the interval start; order 2 averages the endpoint
/// Jacobians and keeps the squared term, which makes the accumulated
/// product second-order accurate.
class PhiProductAccumulator {
 public:
  explicit PhiProductAccumulator(int order = 1) : order_(order) {}

  void push(const Mat21& f_prev, const Mat21& f_curr, double dt);
  const PhiMatrix& phi() const { return phi_; }
  void reset() { phi_.setIdentity(); }

 private:
  int order_;
  PhiMatrix phi_ = PhiMatrix::Identity();
};

/// Closed-form transition blocks evaluated over a stored estimate
/// history. The two frame rotations since t0 are maintained by
/// integrating the bias-corrected gyro rates, and every nested integral
/// is a running trapezoid on the sample grid. Used by the observability
/// analysis and by the cross-backend validation of the filter transition.
class AppendixCPhi {
 public:
  AppendixCPhi(const SystemState& x0, const ImuSample& imu1, const ImuSample& imu2);

  void push(const SystemState& x, const ImuSample& imu1, const ImuSample& imu2,
            double dt);

  /// Phi(t_now, t0), all blocks, zero blocks exactly zero.
  PhiMatrix phi() const;

  double elapsed() const { return elapsed_; }

 private:
  struct Kernels {
    Mat3 e;        // A [w x] A^T, w = C(q) a2_hat
    Mat3 e_ia_ak;  // E * IA + A * K
    Mat3 e_c0_ib;  // E * C0 * IB
    Mat3 a;
    Mat3 c0_b;
  };
  Kernels eval_kernels(const Mat3& A, const Mat3& B, const SystemState& x,
                       const ImuSample& imu1, const ImuSample& imu2) const;

  // anchors at t0
  Vec3 w1_t0_ = Vec3::Zero();
  Mat3 C0_ = Mat3::Identity();  // C(q_rel(t0))

  // frame rotations since t0 (as quaternions for norm stability)
  Quat qa_ = Quat::Identity();  // reference IMU
  Quat qb_ = Quat::Identity();  // target IMU

  Mat3 ia_ = Mat3::Zero();  // integral of A
  Mat3 ib_ = Mat3::Zero();  // integral of B

  // running single and double integrals of the five kernels
  Mat3 d_[5];
  Mat3 dd_[5];
  Kernels prev_k_;
  Mat3 prev_a_ = Mat3::Identity();
  Mat3 prev_b_ = Mat3::Identity();
  Vec3 prev_w1_ = Vec3::Zero();
  Vec3 prev_w2_ = Vec3::Zero();
  Vec3 w1_now_ = Vec3::Zero();
  double elapsed_ = 0.0;
};

/// Convenience wrapper: transition over [t0, t1] from a uniformly sampled
/// history. Throws std::invalid_argument on a non-uniform or gapped grid.
struct PhiHistorySample {
  SystemState x;
  ImuSample imu1;
  ImuSample imu2;
};
PhiMatrix phi_appendix_c(const std::vector<PhiHistorySample>& traj, double t0,
                         double t1);

/// Trapezoidal evaluation of the step noise integral
/// int Phi G Qc G^T Phi^T dtau over one interval of length dt.
QdMatrix discrete_Qd(const LinearizedModel& lin, const QcMatrix& qc, double dt);

/// Diagonal continuous-time noise covariance in the 27-entry noise order.
/// The ndot_g1 column is retained in G but carries zero density here; its
/// effect can be absorbed by inflating sigma_g1 (gyro1_inflation).
QcMatrix continuous_noise_cov(const NoiseParams& noise, double gyro1_inflation = 1.0);

struct PredictResult {
  SystemState x;
  Covariance P;
};

/// EKF time update: RK4 on the estimate equations with zero-order-hold
/// inputs, then P <- Phi P Phi^T + Qd, re-symmetrized.
PredictResult ekf_predict(const SystemState& x_hat, const Covariance& P,
                          const ImuSample& imu1, const ImuSample& imu2,
                          double dt, const Vec3& omega1_dot,
                          const NoiseParams& noise, int phi_order = 1,
                          double gyro1_inflation = 1.0);

/// RK4 integration of the estimate equations over dt (state only).
SystemState integrate_state_rk4(const SystemState& x_hat, const ImuSample& imu1,
                                const ImuSample& imu2, double dt,
                                const Vec3& omega1_dot);

}  // namespace relimu
