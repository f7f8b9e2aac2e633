#include "relimu/simworld.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "relimu/errors.hpp"

namespace relimu {

namespace {

const std::map<std::string, int>& roman_cols() {
  static const std::map<std::string, int> m = {
      {"I", 1}, {"II", 2}, {"III", 3}, {"IV", 4}, {"V", 5}, {"VI", 6}, {"VII", 7}};
  return m;
}

constexpr const char* kRowLetters = "ABCDEFGHJKLMNOPQRS";

}  // namespace

MotionCell cell_from_string(const std::string& tag) {
  const auto dash = tag.find('-');
  if (dash == std::string::npos)
    throw ScenarioError("bad cell tag '" + tag + "', expected e.g. 'V-K'");
  const std::string col_s = tag.substr(0, dash);
  const std::string row_s = tag.substr(dash + 1);
  const auto it = roman_cols().find(col_s);
  if (it == roman_cols().end())
    throw ScenarioError("bad cell column '" + col_s + "' in '" + tag + "'");
  if (row_s.size() != 1 || std::string(kRowLetters).find(row_s[0]) == std::string::npos)
    throw ScenarioError("bad cell row '" + row_s + "' in '" + tag + "'");
  return MotionCell{it->second, row_s[0]};
}

std::string cell_to_string(const MotionCell& cell) {
  static const char* romans[] = {"", "I", "II", "III", "IV", "V", "VI", "VII"};
  return std::string(romans[cell.col]) + "-" + std::string(1, cell.row);
}

namespace detail {

double ScalarCurve::eval(double t) const {
  double v = c0 + rate * t;
  for (const auto& w : waves) v += w.eval(t);
  return v;
}
double ScalarCurve::d1(double t) const {
  double v = rate;
  for (const auto& w : waves) v += w.d1(t);
  return v;
}
double ScalarCurve::d2(double t) const {
  double v = 0.0;
  for (const auto& w : waves) v += w.d2(t);
  return v;
}

Vec3 TranslationCurve::pos(double t) const {
  Vec3 p = p0 + v0 * t;
  for (int i = 0; i < 3; ++i)
    for (const auto& w : waves[i]) p(i) += w.eval(t);
  return p;
}
Vec3 TranslationCurve::vel(double t) const {
  Vec3 v = v0;
  for (int i = 0; i < 3; ++i)
    for (const auto& w : waves[i]) v(i) += w.d1(t);
  return v;
}
Vec3 TranslationCurve::acc(double t) const {
  Vec3 a = Vec3::Zero();
  for (int i = 0; i < 3; ++i)
    for (const auto& w : waves[i]) a(i) += w.d2(t);
  return a;
}

void RotationCurve::eval(double t, Quat* q, Vec3* omega, Vec3* omega_dot) const {
  Quat q_acc = q0;
  Vec3 w = Vec3::Zero();
  Vec3 wd = Vec3::Zero();
  for (const auto& f : factors) {
    const double th = f.angle.eval(t);
    const Quat qf = geom::quat_exp(f.axis * th);
    const Mat3 cft = geom::quat_to_rot(qf).transpose();
    const Vec3 wf = f.axis * f.angle.d1(t);
    const Vec3 wdf = f.axis * f.angle.d2(t);
    const Vec3 w_rot = cft * w;
    wd = cft * wd - wf.cross(w_rot) + wdf;
    w = w_rot + wf;
    q_acc = geom::quat_multiply(q_acc, qf);
  }
  if (q) *q = q_acc;
  if (omega) *omega = w;
  if (omega_dot) *omega_dot = wd;
}

}  // namespace detail

namespace {

using detail::RotationFactor;
using detail::ScalarCurve;
using detail::Sinusoid;

// Base frequencies kept mutually non-commensurate so no axis repeats.
constexpr double kFreqs[3] = {0.31, 0.73, 1.17};           // Hz
constexpr double kAxisScale[3] = {1.0, 1.2099, 1.4317};

std::vector<Sinusoid> multi_sine(double amp, int axis, Rng& rng) {
  std::vector<Sinusoid> out;
  for (int k = 0; k < 3; ++k) {
    Sinusoid s;
    s.amp = amp * (k == 0 ? 1.0 : (k == 1 ? 0.6 : 0.35));
    s.omega = 2.0 * M_PI * kFreqs[k] * kAxisScale[axis];
    s.phase = 2.0 * M_PI * rng.uniform();
    out.push_back(s);
  }
  return out;
}

ScalarCurve multi_sine_scalar(double amp, int axis, Rng& rng) {
  ScalarCurve c;
  c.waves = multi_sine(amp, axis, rng);
  return c;
}

Quat rpy_to_quat(const Vec3& rpy_deg) {
  const double d2r = M_PI / 180.0;
  return geom::quat_multiply(
      geom::quat_multiply(geom::quat_exp(Vec3::UnitZ() * rpy_deg.z() * d2r),
                          geom::quat_exp(Vec3::UnitY() * rpy_deg.y() * d2r)),
      geom::quat_exp(Vec3::UnitX() * rpy_deg.x() * d2r));
}

Vec3 quat_log(const Quat& q_in) {
  const Quat q = geom::quat_canonical(q_in);
  const double vn = q.vec().norm();
  if (vn < 1e-12) return Vec3::Zero();
  const double angle = 2.0 * std::atan2(vn, q.w());
  return q.vec() / vn * angle;
}

// 3-axis wobble applied on the right of a constant attitude.
void add_general_rotation(detail::RotationCurve* rot, const Quat& q0, double amp,
                          Rng& rng) {
  rot->q0 = q0;
  const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (int i = 0; i < 3; ++i)
    rot->factors.push_back(RotationFactor{axes[i], multi_sine_scalar(amp, i, rng)});
}

}  // namespace

MotionProfile make_profile(const MotionCell& cell, const ProfileParams& params,
                           uint64_t seed) {
  const bool col_ok =
      cell.col == 1 || cell.col == 2 || cell.col == 3 || cell.col == 4 || cell.col == 5 || cell.col == 7;
  const bool row_ok = cell.row == 'A' || cell.row == 'B' || cell.row == 'K' ||
                      cell.row == 'L' || cell.row == 'M' || cell.row == 'S';
  if (!col_ok || !row_ok) {
    throw ScenarioError(
        "no profile generator for cell " + cell_to_string(cell) +
        "; supported columns {I, II, III, IV, V, VII}, rows {A, B, K, L, M, S}");
  }

  MotionProfile p;
  p.cell = cell;
  p.duration = params.duration;
  p.seed = seed;
  Rng rng(seed_hash(seed, 0x5157));

  // --- reference agent ---
  switch (cell.col) {
    case 1:  // stationary; constant local acceleration
      break;
    case 2:  // vertical linear motion, no rotation
      p.ref_trans.v0 = Vec3(0, 0, params.ref_speed);
      p.ref_trans.waves[2].push_back(
          Sinusoid{params.ref_speed_amp, 2.0 * M_PI * 0.4, 2.0 * M_PI * rng.uniform()});
      break;
    case 3:  // straight line along x with varying speed, no rotation
      p.ref_trans.v0 = Vec3(params.ref_speed, 0, 0);
      p.ref_trans.waves[0].push_back(
          Sinusoid{params.ref_speed_amp, 2.0 * M_PI * 0.4, 2.0 * M_PI * rng.uniform()});
      break;
    case 4:  // spin about gravity in place
      p.ref_rot.factors.push_back(
          RotationFactor{Vec3::UnitZ(), multi_sine_scalar(params.ref_yaw_amp, 2, rng)});
      break;
    case 5:  // planar motion on a horizontal surface
      p.ref_trans.waves[0] = multi_sine(params.ref_trans_amp, 0, rng);
      p.ref_trans.waves[1] = multi_sine(params.ref_trans_amp, 1, rng);
      p.ref_rot.factors.push_back(
          RotationFactor{Vec3::UnitZ(), multi_sine_scalar(params.ref_yaw_amp, 2, rng)});
      break;
    case 7:  // free 3D motion
      for (int i = 0; i < 3; ++i) p.ref_trans.waves[i] = multi_sine(params.ref_trans_amp, i, rng);
      add_general_rotation(&p.ref_rot, Quat::Identity(), params.ref_rot_amp, rng);
      break;
    default:
      break;
  }

  // --- target relative to reference ---
  const Quat q_rel0 = rpy_to_quat(params.rel_rpy0_deg);
  const Vec3 rv0 = quat_log(q_rel0);
  const RotationFactor const_att{rv0.norm() > 0 ? Vec3(rv0.normalized()) : Vec3::UnitZ(),
                                 ScalarCurve{rv0.norm(), 0.0, {}}};
  switch (cell.row) {
    case 'A':  // coincident, rigidly attached
      p.rel_rot.factors.push_back(const_att);
      break;
    case 'B': {  // coincident, relative rotation about one fixed axis
      RotationFactor spin{Vec3::UnitZ(), multi_sine_scalar(params.rel_rot_amp, 2, rng)};
      p.rel_rot.factors.push_back(spin);      // left factor: axis fixed in the reference frame
      p.rel_rot.factors.push_back(const_att);
      p.xi = Vec3::UnitZ();
      p.has_xi = true;
      break;
    }
    case 'K':  // displaced, rigidly attached
      p.rel_trans.p0 = params.rel_p0;
      p.rel_rot.factors.push_back(const_att);
      break;
    case 'L': {  // displaced, relative rotation about one fixed axis
      p.rel_trans.p0 = params.rel_p0;
      RotationFactor spin{Vec3::UnitZ(), multi_sine_scalar(params.rel_rot_amp, 2, rng)};
      p.rel_rot.factors.push_back(spin);
      p.rel_rot.factors.push_back(const_att);
      p.xi = Vec3::UnitZ();
      p.has_xi = true;
      break;
    }
    case 'M':  // displaced, free relative rotation
      p.rel_trans.p0 = params.rel_p0;
      add_general_rotation(&p.rel_rot, q_rel0, params.rel_rot_amp, rng);
      break;
    case 'S':  // free relative motion
      p.rel_trans.p0 = params.rel_p0;
      for (int i = 0; i < 3; ++i) p.rel_trans.waves[i] = multi_sine(params.rel_trans_amp, i, rng);
      add_general_rotation(&p.rel_rot, q_rel0, params.rel_rot_amp, rng);
      break;
    default:
      break;
  }

  // anchors: alpha is the reference IMU's constant local acceleration for
  // column I, and the initial negative local gravity otherwise
  Quat q1_0;
  p.ref_rot.eval(0.0, &q1_0, nullptr, nullptr);
  const Mat3 c1t = geom::quat_to_rot(q1_0).transpose();
  if (cell.col == 1) {
    p.alpha = c1t * (p.ref_trans.acc(0.0) - kGravity);
  } else {
    p.alpha = c1t * (-kGravity);
  }
  const Vec3 alpha_hat = p.alpha.normalized();
  if (cell.col == 3) {
    p.beta1 = (c1t * p.ref_trans.v0.normalized()).normalized();
    p.beta2 = alpha_hat.cross(p.beta1).normalized();
    p.has_beta = true;
  } else {
    // orthogonal basis perpendicular to alpha
    Vec3 seed_axis = Vec3::UnitX();
    if (std::abs(alpha_hat.dot(seed_axis)) > 0.9) seed_axis = Vec3::UnitY();
    p.beta1 = (seed_axis - alpha_hat * alpha_hat.dot(seed_axis)).normalized();
    p.beta2 = alpha_hat.cross(p.beta1).normalized();
    p.has_beta = true;
  }
  return p;
}

TrajectoryPair sample_trajectory(const MotionProfile& profile, double t) {
  if (t < 0.0 || t > profile.duration)
    throw std::invalid_argument("sample_trajectory: t outside [0, duration]");

  TrajectoryPair out;
  TrajectorySample& s1 = out.ref;
  s1.t = t;
  s1.p = profile.ref_trans.pos(t);
  s1.v = profile.ref_trans.vel(t);
  s1.a = profile.ref_trans.acc(t);
  profile.ref_rot.eval(t, &s1.q, &s1.omega, &s1.omega_dot);

  const Vec3 pr = profile.rel_trans.pos(t);
  const Vec3 vr = profile.rel_trans.vel(t);
  const Vec3 ar = profile.rel_trans.acc(t);
  Quat qr;
  Vec3 wr, wrd;
  profile.rel_rot.eval(t, &qr, &wr, &wrd);

  const Mat3 c1 = geom::quat_to_rot(s1.q);
  const Mat3 cr = geom::quat_to_rot(qr);
  const Vec3& w1 = s1.omega;

  TrajectorySample& s2 = out.target;
  s2.t = t;
  s2.p = s1.p + c1 * pr;
  s2.v = s1.v + c1 * (vr + w1.cross(pr));
  s2.a = s1.a + c1 * (ar + 2.0 * w1.cross(vr) + s1.omega_dot.cross(pr) +
                      w1.cross(w1.cross(pr)));
  s2.q = geom::quat_multiply(s1.q, qr);
  const Vec3 w1_in_2 = cr.transpose() * w1;
  s2.omega = w1_in_2 + wr;
  s2.omega_dot = cr.transpose() * s1.omega_dot - wr.cross(w1_in_2) + wrd;
  return out;
}

ImuSample synthesize_imu(const TrajectorySample& s, const Vec3& bg,
                         const Vec3& ba, double sigma_g, double sigma_a,
                         double dt, Rng* rng) {
  ImuSample m;
  m.t = s.t;
  m.omega_m = s.omega + bg;
  m.accel_m = geom::quat_to_rot(s.q).transpose() * (s.a - kGravity) + ba;
  if (rng) {
    const double inv_sqrt_dt = 1.0 / std::sqrt(dt);
    m.omega_m += sigma_g * inv_sqrt_dt * rng->gaussian_vec3();
    m.accel_m += sigma_a * inv_sqrt_dt * rng->gaussian_vec3();
  }
  return m;
}

SystemState true_relative_state(const TrajectorySample& s1,
                                const TrajectorySample& s2) {
  if (s1.t != s2.t)
    throw std::invalid_argument("true_relative_state: timestamp mismatch");
  const Mat3 c1t = geom::quat_to_rot(s1.q).transpose();
  SystemState x;
  x.p_rel = c1t * (s2.p - s1.p);
  x.v_rel = -s1.omega.cross(x.p_rel) + c1t * (s2.v - s1.v);
  x.q_rel = geom::quat_multiply(s1.q.conjugate(), s2.q);
  return x;
}

MeasurementPair synthesize_measurements(const TrajectorySample& s1,
                                        const TrajectorySample& s2,
                                        double sigma_dp, double sigma_dq,
                                        Rng* rng) {
  const SystemState x = true_relative_state(s1, s2);
  MeasurementPair out;
  out.dp.t = s1.t;
  out.dp.dp = x.p_rel;
  out.dp.R = sigma_dp * sigma_dp * Mat3::Identity();
  out.dq.t = s1.t;
  out.dq.R = sigma_dq * sigma_dq * Mat3::Identity();
  Quat noise_q = Quat::Identity();
  if (rng) {
    out.dp.dp += sigma_dp * rng->gaussian_vec3();
    const Vec3 eta = sigma_dq * rng->gaussian_vec3();
    noise_q = Quat(1.0, 0.5 * eta.x(), 0.5 * eta.y(), 0.5 * eta.z());
  }
  out.dq.dq = geom::quat_multiply(noise_q, x.q_rel);
  return out;
}

namespace {

void check_near_zero(const Vec3& v, double tol, const std::string& what,
                     double t, std::vector<std::string>* out) {
  if (v.norm() > tol) {
    std::ostringstream os;
    os << what << " not zero at t=" << t << " (|.|=" << v.norm() << ")";
    out->push_back(os.str());
  }
}

void check_parallel(const Vec3& v, const Vec3& dir, double tol,
                    const std::string& what, double t,
                    std::vector<std::string>* out) {
  const Vec3 d = dir.normalized();
  if (v.cross(d).norm() > tol * std::max(1.0, v.norm())) {
    std::ostringstream os;
    os << what << " not parallel to its required direction at t=" << t;
    out->push_back(os.str());
  }
}

}  // namespace

std::vector<std::string> check_cell_constraints(const MotionProfile& profile,
                                                int n_samples, double tol) {
  std::vector<std::string> bad;
  const MotionCell cell = profile.cell;
  const Vec3 p0_rel = profile.rel_trans.pos(0.0);

  if ((cell.row == 'K' || cell.row == 'L' || cell.row == 'M') &&
      p0_rel.cwiseAbs().minCoeff() < 1e-6)
    bad.push_back("row " + std::string(1, cell.row) +
                  " requires all relative-position components non-zero");

  for (int k = 0; k < n_samples; ++k) {
    const double t = profile.duration * k / (n_samples - 1);
    const TrajectoryPair pair = sample_trajectory(profile, t);
    const TrajectorySample& s1 = pair.ref;
    const Mat3 c1t = geom::quat_to_rot(s1.q).transpose();
    const Vec3 a_local = c1t * (s1.a - kGravity);
    const Vec3 v_local = c1t * s1.v;
    const SystemState rel = true_relative_state(s1, pair.target);
    const Vec3 w_rel = geom::quat_to_rot(rel.q_rel) * pair.target.omega - s1.omega;

    switch (cell.col) {
      case 1:
        check_near_zero(s1.omega, tol, "col I: reference angular rate", t, &bad);
        check_near_zero(a_local - profile.alpha, tol, "col I: local acceleration drift", t, &bad);
        break;
      case 2:
        check_near_zero(s1.omega, tol, "col II: reference angular rate", t, &bad);
        check_parallel(v_local, profile.alpha, tol, "col II: reference velocity", t, &bad);
        break;
      case 3:
        check_near_zero(s1.omega, tol, "col III: reference angular rate", t, &bad);
        check_parallel(v_local, profile.beta1, tol, "col III: reference velocity", t, &bad);
        break;
      case 4:
        check_parallel(s1.omega, profile.alpha, tol, "col IV: reference angular rate", t, &bad);
        check_near_zero(a_local - profile.alpha, tol, "col IV: local acceleration drift", t, &bad);
        break;
      case 5: {
        check_parallel(s1.omega, profile.alpha, tol, "col V: reference angular rate", t, &bad);
        if (std::abs(v_local.dot(s1.omega)) >
            tol * std::max(1.0, v_local.norm() * s1.omega.norm()))
          bad.push_back("col V: velocity not perpendicular to angular rate at t=" +
                        std::to_string(t));
        break;
      }
      default:
        break;
    }

    switch (cell.row) {
      case 'A':
        check_near_zero(rel.p_rel, tol, "row A: relative position", t, &bad);
        check_near_zero(rel.v_rel, tol, "row A: relative velocity", t, &bad);
        check_near_zero(w_rel, tol, "row A: relative angular rate", t, &bad);
        break;
      case 'B':
        check_near_zero(rel.p_rel, tol, "row B: relative position", t, &bad);
        check_near_zero(rel.v_rel, tol, "row B: relative velocity", t, &bad);
        check_parallel(w_rel, profile.xi, tol, "row B: relative angular rate", t, &bad);
        break;
      case 'K':
        check_near_zero(rel.p_rel - p0_rel, tol, "row K: relative position drift", t, &bad);
        check_near_zero(rel.v_rel, tol, "row K: relative velocity", t, &bad);
        check_near_zero(w_rel, tol, "row K: relative angular rate", t, &bad);
        break;
      case 'L':
        check_near_zero(rel.p_rel - p0_rel, tol, "row L: relative position drift", t, &bad);
        check_near_zero(rel.v_rel, tol, "row L: relative velocity", t, &bad);
        check_parallel(w_rel, profile.xi, tol, "row L: relative angular rate", t, &bad);
        break;
      case 'M':
        check_near_zero(rel.p_rel - p0_rel, tol, "row M: relative position drift", t, &bad);
        check_near_zero(rel.v_rel, tol, "row M: relative velocity", t, &bad);
        break;
      default:
        break;
    }
    if (bad.size() > 16) break;  // enough evidence
  }
  return bad;
}

}  // namespace relimu
