#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "test_utils.hpp"

#include <Eigen/Eigenvalues>

#include "phi_oracle.hpp"
#include "relimu/propagation.hpp"
#include "relimu/simworld.hpp"

using namespace relimu;
using relimu::test::gentle_general_profile;
using relimu::test::history_of;
using relimu::test::imu_of;
using relimu::test::phi_product;
using relimu::test::phi_rk4;

TEST_CASE("first-order transition at vanishing dt is the identity") {
  Rng rng(1);
  const SystemState x = relimu::test::random_state(rng);
  const LinearizedModel lin = jacobian_F(x, relimu::test::random_imu(rng),
                                         relimu::test::random_imu(rng),
                                         rng.gaussian_vec3());
  CHECK((phi_first_order(lin, 1e-14) - Mat21::Identity()).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("zero-motion position/velocity block is dt * I") {
  SystemState x;
  ImuSample m1, m2;
  m1.accel_m = Vec3(0, 0, kGravityMag);
  m2.accel_m = Vec3(0, 0, kGravityMag);
  const LinearizedModel lin = jacobian_F(x, m1, m2, Vec3::Zero());
  const PhiMatrix phi = phi_first_order(lin, 0.01);
  CHECK((phi.block<3, 3>(idx::dp, idx::dv) - 0.01 * Mat3::Identity())
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("accumulated product vs RK4 at ten times the rate over 1 s") {
  ProfileParams params;
  params.duration = 2.0;
  params.ref_trans_amp *= 0.15;
  params.ref_rot_amp *= 0.15;
  params.rel_trans_amp *= 0.15;
  params.rel_rot_amp *= 0.15;
  const MotionProfile prof = make_profile(cell_from_string("VII-S"), params, 21);
  const double rate = 400.0;
  const Mat21 oracle = phi_rk4(prof, 0.0, 1.0, static_cast<int>(10 * rate));
  const Mat21 prod = phi_product(prof, 0.0, 1.0, 1.0 / rate, 2);
  CHECK((prod - oracle).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("closed-form blocks: window of zero length is the identity") {
  const MotionProfile prof = gentle_general_profile(22, 1.0);
  const auto traj = history_of(prof, 0.0, 0.5, 1.0 / 200);
  CHECK((phi_appendix_c(traj, 0.0, 0.0) - Mat21::Identity()).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("closed-form position block under constant reference rotation") {
  // q identity, constant w1 about z, target co-rotating (zero relative motion)
  const double w = 0.7;
  const double dt = 1.0 / 200;
  std::vector<PhiHistorySample> traj;
  for (int k = 0; k <= 100; ++k) {
    PhiHistorySample s;
    s.x = SystemState{};
    s.imu1.t = k * dt;
    s.imu1.omega_m = Vec3(0, 0, w);
    s.imu1.accel_m = Vec3::Zero();
    s.imu2 = s.imu1;
    traj.push_back(s);
  }
  const double T = 100 * dt;
  const Mat21 phi = phi_appendix_c(traj, 0.0, T);
  const Mat3 c_prime = geom::quat_to_rot(geom::quat_exp(Vec3(0, 0, w * T))).transpose();
  const Mat3 expected = c_prime * (Mat3::Identity() + geom::skew(Vec3(0, 0, w)) * T);
  CHECK((phi.block<3, 3>(idx::dp, idx::dp) - expected).cwiseAbs().maxCoeff() < 1e-9);
  // velocity/velocity block of the same solution
  const Mat3 expected22 =
      -geom::skew(Vec3(0, 0, w)) * c_prime * T + c_prime;
  CHECK((phi.block<3, 3>(idx::dv, idx::dv) - expected22).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("cross-backend agreement over 0.5 s of general motion") {
  const MotionProfile prof = gentle_general_profile(23, 1.0);
  const auto traj = history_of(prof, 0.0, 0.5, 1.0 / 200);
  const Mat21 closed = phi_appendix_c(traj, 0.0, 0.5);
  const Mat21 prod = phi_product(prof, 0.0, 0.5, 1.0 / 200, 2);
  CHECK((closed - prod).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("both backends converge at second order to the RK4 oracle") {
  const MotionProfile prof = gentle_general_profile(24, 1.0);
  const Mat21 oracle = phi_rk4(prof, 0.0, 0.5, 1000);

  const double e1p = (phi_product(prof, 0, 0.5, 1.0 / 200, 2) - oracle).cwiseAbs().maxCoeff();
  const double e2p = (phi_product(prof, 0, 0.5, 1.0 / 400, 2) - oracle).cwiseAbs().maxCoeff();
  const double ratio_p = e1p / e2p;
  CHECK(ratio_p > 3.0);
  CHECK(ratio_p < 5.0);

  const auto traj1 = history_of(prof, 0.0, 0.5, 1.0 / 200);
  const auto traj2 = history_of(prof, 0.0, 0.5, 1.0 / 400);
  const double e1c = (phi_appendix_c(traj1, 0, 0.5) - oracle).cwiseAbs().maxCoeff();
  const double e2c = (phi_appendix_c(traj2, 0, 0.5) - oracle).cwiseAbs().maxCoeff();
  const double ratio_c = e1c / e2c;
  CHECK(ratio_c > 3.0);
  CHECK(ratio_c < 5.0);
}

TEST_CASE("product accumulation satisfies the semigroup property") {
  const MotionProfile prof = gentle_general_profile(25, 1.0);
  const Mat21 full = phi_product(prof, 0.0, 0.8, 1.0 / 200, 2);
  const Mat21 first = phi_product(prof, 0.0, 0.4, 1.0 / 200, 2);
  const Mat21 second = phi_product(prof, 0.4, 0.8, 1.0 / 200, 2);
  CHECK((second * first - full).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("closed-form sparsity is exact") {
  const MotionProfile prof = gentle_general_profile(26, 1.0);
  const auto traj = history_of(prof, 0.0, 0.5, 1.0 / 200);
  const Mat21 phi = phi_appendix_c(traj, 0.0, 0.5);
  // bias rows: identity diagonal, zero elsewhere
  for (int i = idx::dbg1; i < idx::error_dim; i += 3) {
    for (int j = 0; j < idx::error_dim; j += 3) {
      const Mat3 blk = phi.block<3, 3>(i, j);
      if (i == j) {
        CHECK((blk - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
      } else {
        CHECK(blk.cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
  // attitude row couples only to attitude and the gyro biases
  CHECK(phi.block<3, 3>(idx::dth, idx::dp).cwiseAbs().maxCoeff() == 0.0);
  CHECK(phi.block<3, 3>(idx::dth, idx::dv).cwiseAbs().maxCoeff() == 0.0);
  CHECK(phi.block<3, 3>(idx::dth, idx::dba1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(phi.block<3, 3>(idx::dth, idx::dba2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-uniform trajectories are rejected") {
  const MotionProfile prof = gentle_general_profile(27, 1.0);
  auto traj = history_of(prof, 0.0, 0.1, 1.0 / 200);
  traj[5].imu1.t += 0.002;  // introduce a gap
  CHECK_THROWS_AS(phi_appendix_c(traj, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("discrete noise: zero density gives a zero matrix") {
  Rng rng(2);
  const LinearizedModel lin = jacobian_F(relimu::test::random_state(rng),
                                         relimu::test::random_imu(rng),
                                         relimu::test::random_imu(rng),
                                         rng.gaussian_vec3());
  CHECK(discrete_Qd(lin, QcMatrix::Zero(), 0.005).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("discrete noise: pure random-walk densities give sigma^2 dt blocks") {
  SystemState x;
  ImuSample m1, m2;
  m1.accel_m = Vec3(0, 0, kGravityMag);
  m2.accel_m = m1.accel_m;
  const LinearizedModel lin = jacobian_F(x, m1, m2, Vec3::Zero());
  NoiseParams noise{};
  noise.sigma_g1 = noise.sigma_g2 = noise.sigma_a1 = noise.sigma_a2 = 0.0;
  noise.sigma_wg1 = 2e-5;
  noise.sigma_wg2 = 3e-5;
  noise.sigma_wa1 = 4e-4;
  noise.sigma_wa2 = 5e-4;
  const double dt = 0.005;
  const QdMatrix qd = discrete_Qd(lin, continuous_noise_cov(noise), dt);
  CHECK(std::abs(qd(idx::dbg1, idx::dbg1) - noise.sigma_wg1 * noise.sigma_wg1 * dt) <
        1e-25);
  CHECK(std::abs(qd(idx::dbg2, idx::dbg2) - noise.sigma_wg2 * noise.sigma_wg2 * dt) <
        1e-25);
  CHECK(std::abs(qd(idx::dba1, idx::dba1) - noise.sigma_wa1 * noise.sigma_wa1 * dt) <
        1e-22);
}

TEST_CASE("discrete noise vs a fine rectangle-rule quadrature") {
  Rng rng(3);
  const SystemState x = relimu::test::random_state(rng);
  const ImuSample m1 = relimu::test::random_imu(rng);
  const ImuSample m2 = relimu::test::random_imu(rng);
  const LinearizedModel lin = jacobian_F(x, m1, m2, rng.gaussian_vec3());
  const QcMatrix qc = continuous_noise_cov(NoiseParams{});
  const double dt = 0.005;
  const QdMatrix qd = discrete_Qd(lin, qc, dt);

  // 100-substep rectangle rule of int Phi(dt, tau) G Qc G^T Phi(dt, tau)^T
  const Mat21 gqg = lin.G * qc * lin.G.transpose();
  QdMatrix fine = QdMatrix::Zero();
  const int n = 100;
  for (int j = 0; j < n; ++j) {
    const double tau = (j + 0.5) * dt / n;
    const Mat21 phi = Mat21::Identity() + lin.F * (dt - tau);
    fine += phi * gqg * phi.transpose() * (dt / n);
  }
  CHECK((qd - fine).norm() / fine.norm() < 1e-3);

  Eigen::SelfAdjointEigenSolver<Mat21> es(qd);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("predict at a static fixed point grows P only by Qd") {
  SystemState x;
  ImuSample m1, m2;
  m1.accel_m = Vec3(0, 0, kGravityMag);
  m2.accel_m = m1.accel_m;
  const Covariance P0 = default_initial_covariance();
  const NoiseParams noise;
  const PredictResult r = ekf_predict(x, P0, m1, m2, 0.005, Vec3::Zero(), noise);
  CHECK(state_difference(r.x, x).norm() < 1e-14);
  CHECK(r.P.diagonal().minCoeff() > 0.0);

  double prev_trace = P0.trace();
  Covariance P = P0;
  SystemState xs = x;
  for (int k = 0; k < 1000; ++k) {
    const PredictResult step = ekf_predict(xs, P, m1, m2, 0.005, Vec3::Zero(), noise);
    xs = step.x;
    P = step.P;
    CHECK(P.trace() >= prev_trace);
    prev_trace = P.trace();
  }
}

TEST_CASE("10 s of predict against a dt/100 reference integration") {
  const MotionProfile prof = gentle_general_profile(28, 10.0);
  const double dt = 1.0 / 200;
  SystemState coarse;
  SystemState fine;
  {
    const TrajectoryPair p0 = sample_trajectory(prof, 0.0);
    coarse = fine = true_relative_state(p0.ref, p0.target);
  }
  for (int k = 1; k <= 2000; ++k) {
    const TrajectoryPair p = sample_trajectory(prof, k * dt);
    const ImuSample m1 = imu_of(p.ref);
    const ImuSample m2 = imu_of(p.target);
    coarse = integrate_state_rk4(coarse, m1, m2, dt, p.ref.omega_dot);
    for (int j = 0; j < 100; ++j)
      fine = integrate_state_rk4(fine, m1, m2, dt / 100, p.ref.omega_dot);
  }
  CHECK((coarse.p_rel - fine.p_rel).norm() < 1e-4);
}
