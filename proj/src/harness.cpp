#include "relimu/harness.hpp"

#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "relimu/errors.hpp"

namespace relimu {

Mat21 InitParams::initial_covariance() const {
  Mat21 p = Mat21::Zero();
  auto block = [&p](int i, double var) {
    p.block<3, 3>(i, i) = var * Mat3::Identity();
  };
  block(idx::dp, var_p);
  block(idx::dv, var_v);
  block(idx::dth, var_theta);
  block(idx::dbg1, var_bg1);
  block(idx::dbg2, var_bg2);
  block(idx::dba1, var_ba1);
  block(idx::dba2, var_ba2);
  return p;
}

ProjVec composite_bias_errors(const SystemState& truth, const SystemState& estimate,
                              const Quat& q_rel_t, const Quat& q_rel_t0) {
  const Mat3 c_t = geom::quat_to_rot(q_rel_t);
  const Mat3 c_0 = geom::quat_to_rot(q_rel_t0);
  const Vec3 bg1 = truth.bg1 - estimate.bg1;
  const Vec3 bg2 = truth.bg2 - estimate.bg2;
  const Vec3 ba1 = truth.ba1 - estimate.ba1;
  const Vec3 ba2 = truth.ba2 - estimate.ba2;
  ProjVec v;
  v.segment<3>(0) = c_t * bg2 - bg1;   // b_g-
  v.segment<3>(3) = c_t * ba2 - ba1;   // b_a-
  v.segment<3>(6) = bg1 + c_0 * bg2;   // b_g+
  v.segment<3>(9) = ba1 + c_0 * ba2;   // b_a+
  return v;
}

ProjVec composite_bias_sigma3(const Covariance& P, const Quat& q_rel_t,
                              const Quat& q_rel_t0) {
  const Mat3 c_t = geom::quat_to_rot(q_rel_t);
  const Mat3 c_0 = geom::quat_to_rot(q_rel_t0);
  ProjVec v;
  for (int j = 0; j < 3; ++j) {
    const Vec3 e = Vec3::Unit(j);
    ErrorVec d = ErrorVec::Zero();

    d.segment<3>(idx::dbg1) = -e;
    d.segment<3>(idx::dbg2) = c_t.transpose() * e;
    v(j) = 3.0 * std::sqrt(d.dot(P * d));

    d.setZero();
    d.segment<3>(idx::dba1) = -e;
    d.segment<3>(idx::dba2) = c_t.transpose() * e;
    v(3 + j) = 3.0 * std::sqrt(d.dot(P * d));

    d.setZero();
    d.segment<3>(idx::dbg1) = e;
    d.segment<3>(idx::dbg2) = c_0.transpose() * e;
    v(6 + j) = 3.0 * std::sqrt(d.dot(P * d));

    d.setZero();
    d.segment<3>(idx::dba1) = e;
    d.segment<3>(idx::dba2) = c_0.transpose() * e;
    v(9 + j) = 3.0 * std::sqrt(d.dot(P * d));
  }
  return v;
}

FilterRunRecord run_filter_once(const MotionProfile& profile,
                                const NoiseParams& noise, uint64_t seed,
                                const RunOptions& opt, SyntheticLogs* logs,
                                const SystemState* explicit_init) {
  const double dt = 1.0 / opt.imu_rate;
  const int n_steps = static_cast<int>(std::lround(opt.horizon * opt.imu_rate));
  const int meas_every =
      std::max(1, static_cast<int>(std::lround(opt.imu_rate / opt.meas_rate)));
  Rng rng(seed);

  // true biases (random walks), zero in sanity runs
  Vec3 bg1 = Vec3::Zero(), bg2 = Vec3::Zero();
  Vec3 ba1 = Vec3::Zero(), ba2 = Vec3::Zero();
  if (!opt.zero_noise && opt.init.draw_true_biases) {
    const double s = opt.init.true_bias_scale;
    bg1 = s * std::sqrt(opt.init.var_bg1) * rng.gaussian_vec3();
    bg2 = s * std::sqrt(opt.init.var_bg2) * rng.gaussian_vec3();
    ba1 = s * std::sqrt(opt.init.var_ba1) * rng.gaussian_vec3();
    ba2 = s * std::sqrt(opt.init.var_ba2) * rng.gaussian_vec3();
  }

  const TrajectoryPair pair0 = sample_trajectory(profile, 0.0);
  SystemState truth = true_relative_state(pair0.ref, pair0.target);
  truth.bg1 = bg1;
  truth.bg2 = bg2;
  truth.ba1 = ba1;
  truth.ba2 = ba2;
  const Quat q_rel_t0 = truth.q_rel;

  SystemState x0 = truth;
  x0.bg1.setZero();
  x0.bg2.setZero();
  x0.ba1.setZero();
  x0.ba2.setZero();
  if (!opt.zero_noise && opt.init.perturb_estimate) {
    ErrorVec dx = ErrorVec::Zero();
    dx.segment<3>(idx::dp) = std::sqrt(opt.init.var_p) * rng.gaussian_vec3();
    dx.segment<3>(idx::dv) = std::sqrt(opt.init.var_v) * rng.gaussian_vec3();
    dx.segment<3>(idx::dth) = std::sqrt(opt.init.var_theta) * rng.gaussian_vec3();
    x0 = state_retract(x0, dx);
  }
  if (explicit_init) x0 = *explicit_init;
  if (logs) logs->init_estimate = x0;

  RelativeEkf ekf(x0, opt.init.initial_covariance(), noise, opt.ekf);
  Rng* noise_rng = opt.zero_noise ? nullptr : &rng;

  FilterRunRecord rec;
  const int n_rec = n_steps + 1;
  rec.t.reserve(n_rec);
  rec.error.reserve(n_rec);
  rec.sigma3.reserve(n_rec);
  rec.nees.reserve(n_rec);
  rec.proj_error.reserve(n_rec);
  rec.proj_sigma3.reserve(n_rec);

  auto record_step = [&](double t, const SystemState& tru) {
    const SystemState& est = ekf.state();
    const Covariance& P = ekf.covariance();
    if (!est.is_finite())
      throw RunFailedError("filter state not finite", static_cast<int>(rec.t.size()));
    const ErrorVec err = state_difference(tru, est);
    rec.t.push_back(t);
    rec.error.push_back(err);
    ErrorVec s3;
    for (int i = 0; i < idx::error_dim; ++i) s3(i) = 3.0 * std::sqrt(std::max(0.0, P(i, i)));
    rec.sigma3.push_back(s3);
    rec.nees.push_back(err.dot(P.ldlt().solve(err)));
    rec.proj_error.push_back(composite_bias_errors(tru, est, tru.q_rel, q_rel_t0));
    rec.proj_sigma3.push_back(composite_bias_sigma3(P, tru.q_rel, q_rel_t0));
    if (!opt.track_directions.empty()) {
      Eigen::VectorXd de(opt.track_directions.size());
      Eigen::VectorXd ds(opt.track_directions.size());
      for (size_t i = 0; i < opt.track_directions.size(); ++i) {
        const ErrorVec& d = opt.track_directions[i];
        de(i) = d.dot(err);
        ds(i) = 3.0 * std::sqrt(std::max(0.0, d.dot(P * d)));
      }
      rec.dir_error.push_back(de);
      rec.dir_sigma3.push_back(ds);
    }
  };

  record_step(0.0, truth);

  TrajectoryPair prev = pair0;
  for (int k = 1; k <= n_steps; ++k) {
    const double t_prev = (k - 1) * dt;
    const double t_now = k * dt;
    // the step length is recomputed from the timestamps so that replaying
    // the dumped logs performs identical floating-point arithmetic
    const double dt_step = t_now - t_prev;

    // advance the true biases to t_now
    if (!opt.zero_noise) {
      const double sq = std::sqrt(dt);
      truth.bg1 += noise.sigma_wg1 * sq * rng.gaussian_vec3();
      truth.bg2 += noise.sigma_wg2 * sq * rng.gaussian_vec3();
      truth.ba1 += noise.sigma_wa1 * sq * rng.gaussian_vec3();
      truth.ba2 += noise.sigma_wa2 * sq * rng.gaussian_vec3();
    }

    const TrajectoryPair now = sample_trajectory(profile, t_now);
    const ImuSample imu1 = synthesize_imu(now.ref, truth.bg1, truth.ba1,
                                          noise.sigma_g1, noise.sigma_a1, dt, noise_rng);
    const ImuSample imu2 = synthesize_imu(now.target, truth.bg2, truth.ba2,
                                          noise.sigma_g2, noise.sigma_a2, dt, noise_rng);
    if (logs) {
      logs->imu1.push_back(imu1);
      logs->imu2.push_back(imu2);
    }
    if (opt.ekf.analytic_omega_dot) {
      const Vec3 w1_dot = 0.5 * (prev.ref.omega_dot + now.ref.omega_dot);
      ekf.predict(imu1, imu2, dt_step, w1_dot);
    } else {
      ekf.predict(imu1, imu2, dt_step);
    }
    prev = now;

    const SystemState rel = true_relative_state(now.ref, now.target);
    truth.p_rel = rel.p_rel;
    truth.v_rel = rel.v_rel;
    truth.q_rel = rel.q_rel;

    if (k % meas_every == 0) {
      MeasurementPair m = synthesize_measurements(
          now.ref, now.target, opt.meas.sigma_dp, opt.meas.sigma_dq, noise_rng);
      m.dp.t = t_now;
      m.dq.t = t_now;
      if (logs) logs->meas.push_back(m);
      PoseRow row;
      row.nis_dp = ekf.update_dp(m.dp).nis;
      if (opt.mode == MeasMode::dpdq) row.nis_dq = ekf.update_dq(m.dq).nis;
      row.t = t_now;
      row.estimate = ekf.state();
      row.cov_diag = ekf.covariance().diagonal();
      rec.poses.push_back(row);
    }

    record_step(t_now, truth);
  }

  rec.final_truth = truth;
  rec.final_estimate = ekf.state();
  return rec;
}

RunMetrics run_monte_carlo(const MotionProfile& profile, const NoiseParams& noise,
                           int n_runs, uint64_t master_seed, const RunOptions& opt,
                           ExecPolicy policy) {
  if (n_runs < 1) throw std::invalid_argument("run_monte_carlo: need N >= 1");

  std::vector<FilterRunRecord> records(n_runs);
  std::vector<int> failed_step(n_runs, -1);
  std::vector<uint64_t> seeds(n_runs);
  for (int i = 0; i < n_runs; ++i) seeds[i] = seed_hash(master_seed, i);

  auto work = [&](int i) {
    try {
      records[i] = run_filter_once(profile, noise, seeds[i], opt);
    } catch (const RunFailedError& e) {
      failed_step[i] = e.step;
    } catch (const NumericalError&) {
      failed_step[i] = 0;
    }
  };

  if (policy == ExecPolicy::openmp) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_runs; ++i) work(i);
#else
    for (int i = 0; i < n_runs; ++i) work(i);
#endif
  } else {
    for (int i = 0; i < n_runs; ++i) work(i);
  }

  std::ostringstream fail_msg;
  bool any_failed = false;
  for (int i = 0; i < n_runs; ++i) {
    if (failed_step[i] >= 0) {
      fail_msg << (any_failed ? ", " : "") << "seed " << seeds[i] << " (step "
               << failed_step[i] << ")";
      any_failed = true;
    }
  }
  if (any_failed)
    throw RunFailedError("monte carlo runs diverged: " + fail_msg.str(), -1);

  const int steps = static_cast<int>(records[0].t.size());
  RunMetrics m;
  m.t = records[0].t;
  m.runs = n_runs;
  m.master_seed = master_seed;
  const int n_dirs = static_cast<int>(opt.track_directions.size());
  m.rmse = Eigen::MatrixXd::Zero(steps, idx::error_dim);
  m.sigma3 = Eigen::MatrixXd::Zero(steps, idx::error_dim);
  m.nees.assign(steps, 0.0);
  m.proj_rmse = Eigen::MatrixXd::Zero(steps, kProjDim);
  m.proj_sigma3 = Eigen::MatrixXd::Zero(steps, kProjDim);
  m.dir_rmse = Eigen::MatrixXd::Zero(steps, n_dirs);
  m.dir_sigma3 = Eigen::MatrixXd::Zero(steps, n_dirs);

  // ordered reduction: identical output for any execution policy
  for (int i = 0; i < n_runs; ++i) {
    const FilterRunRecord& r = records[i];
    for (int k = 0; k < steps; ++k) {
      m.rmse.row(k) += r.error[k].cwiseAbs2().transpose();
      m.sigma3.row(k) += r.sigma3[k].cwiseAbs2().transpose();
      m.nees[k] += r.nees[k];
      m.proj_rmse.row(k) += r.proj_error[k].cwiseAbs2().transpose();
      m.proj_sigma3.row(k) += r.proj_sigma3[k].cwiseAbs2().transpose();
      if (n_dirs > 0) {
        m.dir_rmse.row(k) += r.dir_error[k].cwiseAbs2().transpose();
        m.dir_sigma3.row(k) += r.dir_sigma3[k].cwiseAbs2().transpose();
      }
    }
  }
  m.rmse = (m.rmse / n_runs).cwiseSqrt();
  m.sigma3 = (m.sigma3 / n_runs).cwiseSqrt();
  m.proj_rmse = (m.proj_rmse / n_runs).cwiseSqrt();
  m.proj_sigma3 = (m.proj_sigma3 / n_runs).cwiseSqrt();
  if (n_dirs > 0) {
    m.dir_rmse = (m.dir_rmse / n_runs).cwiseSqrt();
    m.dir_sigma3 = (m.dir_sigma3 / n_runs).cwiseSqrt();
  }
  for (int k = 0; k < steps; ++k) m.nees[k] /= n_runs;
  return m;
}

double chi2_quantile(double p, double dof) {
  // normal quantile (Acklam rational approximation)
  auto norm_quantile = [](double q) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (q < plow) {
      const double u = std::sqrt(-2.0 * std::log(q));
      return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
             ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    if (q > 1.0 - plow) {
      const double u = std::sqrt(-2.0 * std::log(1.0 - q));
      return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
             ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    const double u = q - 0.5;
    const double r = u * u;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  };
  // Wilson-Hilferty cube approximation
  const double z = norm_quantile(p);
  const double k = 2.0 / (9.0 * dof);
  const double x = 1.0 - k + z * std::sqrt(k);
  return dof * x * x * x;
}

const std::vector<std::string>& error_component_names() {
  static const std::vector<std::string> names = [] {
    const char* blocks[] = {"dp", "dv", "dth", "dbg1", "dbg2", "dba1", "dba2"};
    const char* axes = "xyz";
    std::vector<std::string> v;
    for (const char* b : blocks)
      for (int j = 0; j < 3; ++j)
        v.push_back(std::string(b) + "_" + axes[j]);
    return v;
  }();
  return names;
}

const std::vector<std::string>& projection_component_names() {
  static const std::vector<std::string> names = [] {
    const char* blocks[] = {"bgm", "bam", "bgp", "bap"};
    const char* axes = "xyz";
    std::vector<std::string> v;
    for (const char* b : blocks)
      for (int j = 0; j < 3; ++j)
        v.push_back(std::string(b) + "_" + axes[j]);
    return v;
  }();
  return names;
}

}  // namespace relimu
