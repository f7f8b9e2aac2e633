#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "relimu/dynamics.hpp"
#include "relimu/rng.hpp"
#include "relimu/update.hpp"

namespace relimu {

/// One cell of the motion-constraint classification. Columns constrain
/// the reference IMU's own motion, rows constrain the target's motion
/// relative to it. Row letters skip 'I'.
struct MotionCell {
  int col = 7;     // 1..7 (I..VII)
  char row = 'S';  // A,B,C,D,E,F,G,H,J,K,L,M,N,O,P,Q,R,S

  bool operator==(const MotionCell&) const = default;
};

MotionCell cell_from_string(const std::string& tag);  // e.g. "III-K"
std::string cell_to_string(const MotionCell& cell);

namespace detail {

struct Sinusoid {
  double amp = 0.0, omega = 0.0, phase = 0.0;
  double eval(double t) const { return amp * std::sin(omega * t + phase); }
  double d1(double t) const { return amp * omega * std::cos(omega * t + phase); }
  double d2(double t) const { return -amp * omega * omega * std::sin(omega * t + phase); }
};

struct ScalarCurve {
  double c0 = 0.0, rate = 0.0;
  std::vector<Sinusoid> waves;
  double eval(double t) const;
  double d1(double t) const;
  double d2(double t) const;
};

struct TranslationCurve {
  Vec3 p0 = Vec3::Zero();
  Vec3 v0 = Vec3::Zero();
  std::array<std::vector<Sinusoid>, 3> waves;
  Vec3 pos(double t) const;
  Vec3 vel(double t) const;
  Vec3 acc(double t) const;
};

/// Product of single-axis rotations q0 * exp(n1*th1(t)) * exp(n2*th2(t))...
/// Body rate and angular acceleration follow from the composition rule
/// for stacked rotating frames, so the sampled kinematics are exact.
struct RotationFactor {
  Vec3 axis = Vec3::UnitZ();
  ScalarCurve angle;
};

struct RotationCurve {
  Quat q0 = Quat::Identity();
  std::vector<RotationFactor> factors;
  void eval(double t, Quat* q, Vec3* omega, Vec3* omega_dot) const;
};

}  // namespace detail

struct ProfileParams {
  double duration = 10.0;                // s
  Vec3 rel_p0 = Vec3(0.3, -0.2, 0.4);    // m, all components non-zero
  Vec3 rel_rpy0_deg = Vec3(8.0, -12.0, 25.0);
  double rel_trans_amp = 0.15;           // m, row S
  double rel_rot_amp = 0.5;              // rad, rows B/L/M/S
  double ref_trans_amp = 0.6;            // m, cols V/VII
  double ref_rot_amp = 0.5;              // rad, col VII
  double ref_yaw_amp = 0.8;              // rad, cols IV/V
  double ref_speed = 1.0;                // m/s, cols II/III
  double ref_speed_amp = 0.25;           // m, cols II/III modulation
};

/// Analytic trajectory pair: reference agent in the global frame plus the
/// target's motion expressed relative to the reference. Immutable after
/// construction.
struct MotionProfile {
  MotionCell cell;
  double duration = 10.0;
  uint64_t seed = 0;

  detail::TranslationCurve ref_trans;
  detail::RotationCurve ref_rot;
  detail::TranslationCurve rel_trans;  // coordinates in the reference IMU frame
  detail::RotationCurve rel_rot;       // body rate expressed in the target frame

  // scenario anchors used by the observability analysis
  Vec3 alpha = Vec3::Zero();
  Vec3 beta1 = Vec3::UnitX();
  Vec3 beta2 = Vec3::UnitY();
  Vec3 xi = Vec3::UnitZ();
  bool has_beta = false;
  bool has_xi = false;
};

/// Throws ScenarioError for cells without a generator, listing the
/// supported set.
MotionProfile make_profile(const MotionCell& cell, const ProfileParams& params,
                           uint64_t seed);

struct TrajectorySample {
  double t = 0.0;
  Vec3 p = Vec3::Zero();      // m, global
  Vec3 v = Vec3::Zero();      // m/s, global
  Vec3 a = Vec3::Zero();      // m/s^2, global (coordinate acceleration)
  Quat q = Quat::Identity();  // global-to-body attitude
  Vec3 omega = Vec3::Zero();      // rad/s, body frame
  Vec3 omega_dot = Vec3::Zero();  // rad/s^2, body frame
};

struct TrajectoryPair {
  TrajectorySample ref;
  TrajectorySample target;
};

/// Exact analytic evaluation; throws std::invalid_argument outside
/// [0, duration].
TrajectoryPair sample_trajectory(const MotionProfile& profile, double t);

/// omega_m = omega + b_g + n_g, a_m = C^T(a - g) + b_a + n_a, with the
/// discrete noise std sigma/sqrt(dt). rng == nullptr gives noiseless output.
ImuSample synthesize_imu(const TrajectorySample& s, const Vec3& bg,
                         const Vec3& ba, double sigma_g, double sigma_a,
                         double dt, Rng* rng);

/// Exact relative pose/velocity of the target w.r.t. the reference.
/// Throws std::invalid_argument on mismatched timestamps.
SystemState true_relative_state(const TrajectorySample& s1,
                                const TrajectorySample& s2);

struct MeasurementPair {
  RelPositionMeas dp;
  RelOrientationMeas dq;
};

MeasurementPair synthesize_measurements(const TrajectorySample& s1,
                                        const TrajectorySample& s2,
                                        double sigma_dp, double sigma_dq,
                                        Rng* rng);

/// Samples the profile on a uniform grid and checks the cell's defining
/// constraints. Returns human-readable violations; empty means the
/// profile is consistent with its cell.
std::vector<std::string> check_cell_constraints(const MotionProfile& profile,
                                                int n_samples = 201,
                                                double tol = 1e-8);

}  // namespace relimu
