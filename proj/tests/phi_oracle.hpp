#pragma once

// Transition-matrix oracles: RK4 on Phidot = F(t) Phi over the analytic
// trajectory, plus helpers building the sampled inputs both production
// backends consume.

#include "relimu/propagation.hpp"
#include "relimu/simworld.hpp"

namespace relimu::test {

inline ImuSample imu_of(const TrajectorySample& s) {
  return synthesize_imu(s, Vec3::Zero(), Vec3::Zero(), 0, 0, 1, nullptr);
}

inline Mat21 F_of(const MotionProfile& prof, double t) {
  const TrajectoryPair p = sample_trajectory(prof, t);
  const SystemState x = true_relative_state(p.ref, p.target);
  return jacobian_F(x, imu_of(p.ref), imu_of(p.target), p.ref.omega_dot).F;
}

inline Mat21 phi_rk4(const MotionProfile& prof, double t0, double t1, int substeps) {
  Mat21 phi = Mat21::Identity();
  const double h = (t1 - t0) / substeps;
  for (int i = 0; i < substeps; ++i) {
    const double t = t0 + i * h;
    const Mat21 f0 = F_of(prof, t);
    const Mat21 fm = F_of(prof, t + 0.5 * h);
    const Mat21 f1 = F_of(prof, t + h);
    const Mat21 k1 = f0 * phi;
    const Mat21 k2 = fm * (phi + 0.5 * h * k1);
    const Mat21 k3 = fm * (phi + 0.5 * h * k2);
    const Mat21 k4 = f1 * (phi + h * k3);
    phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return phi;
}

inline Mat21 phi_product(const MotionProfile& prof, double t0, double t1,
                         double dt, int order) {
  PhiProductAccumulator acc(order);
  const int n = static_cast<int>(std::lround((t1 - t0) / dt));
  Mat21 f_prev = F_of(prof, t0);
  for (int k = 1; k <= n; ++k) {
    const Mat21 f_curr = F_of(prof, t0 + k * dt);
    acc.push(f_prev, f_curr, dt);
    f_prev = f_curr;
  }
  return acc.phi();
}

inline std::vector<PhiHistorySample> history_of(const MotionProfile& prof,
                                                double t0, double t1, double dt) {
  std::vector<PhiHistorySample> traj;
  const int n = static_cast<int>(std::lround((t1 - t0) / dt));
  for (int k = 0; k <= n; ++k) {
    const double t = t0 + k * dt;
    const TrajectoryPair p = sample_trajectory(prof, t);
    traj.push_back(
        {true_relative_state(p.ref, p.target), imu_of(p.ref), imu_of(p.target)});
  }
  return traj;
}

inline MotionProfile gentle_general_profile(uint64_t seed, double duration) {
  ProfileParams params;
  params.duration = duration;
  params.ref_trans_amp *= 0.3;
  params.ref_rot_amp *= 0.3;
  params.rel_trans_amp *= 0.3;
  params.rel_rot_amp *= 0.3;
  return make_profile(cell_from_string("VII-S"), params, seed);
}

}  // namespace relimu::test
