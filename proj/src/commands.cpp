#include "relimu/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "relimu/csv.hpp"
#include "relimu/errors.hpp"

namespace relimu {

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string header_comment(const ScenarioConfig& cfg) {
  return "seed=" + csv::fmt(cfg.seed) + " cell=" + cfg.cell + " mode=" + cfg.mode +
         " horizon_s=" + csv::fmt(cfg.horizon_s) + " imu_rate_hz=" +
         csv::fmt(cfg.imu_rate_hz) + " meas_rate_hz=" + csv::fmt(cfg.meas_rate_hz);
}

void write_metrics_csv(const std::string& path, const ScenarioConfig& cfg,
                       const std::vector<double>& t, const Eigen::MatrixXd& err,
                       const Eigen::MatrixXd& sig3, const std::vector<double>& nees,
                       const Eigen::MatrixXd& perr, const Eigen::MatrixXd& psig3,
                       const std::string& err_prefix) {
  csv::Writer w(path);
  w.comment(header_comment(cfg));
  std::vector<std::string> head{"t"};
  for (const auto& n : error_component_names()) head.push_back(err_prefix + "_" + n);
  for (const auto& n : error_component_names()) head.push_back("sig3_" + n);
  head.push_back("nees");
  for (const auto& n : projection_component_names()) head.push_back(err_prefix + "_" + n);
  for (const auto& n : projection_component_names()) head.push_back("sig3_" + n);
  w.row(head);
  for (size_t k = 0; k < t.size(); ++k) {
    std::vector<std::string> row;
    row.reserve(head.size());
    row.push_back(csv::fmt(t[k]));
    for (int j = 0; j < err.cols(); ++j) row.push_back(csv::fmt(err(k, j)));
    for (int j = 0; j < sig3.cols(); ++j) row.push_back(csv::fmt(sig3(k, j)));
    row.push_back(csv::fmt(nees[k]));
    for (int j = 0; j < perr.cols(); ++j) row.push_back(csv::fmt(perr(k, j)));
    for (int j = 0; j < psig3.cols(); ++j) row.push_back(csv::fmt(psig3(k, j)));
    w.row(row);
  }
}

void write_pose_csv(const std::string& path, const ScenarioConfig& cfg,
                    const std::vector<PoseRow>& poses) {
  csv::Writer w(path);
  w.comment(header_comment(cfg));
  std::vector<std::string> head{"t", "px", "py", "pz", "qw", "qx", "qy", "qz",
                                "vx", "vy", "vz"};
  const char* bias_blocks[] = {"bg1", "bg2", "ba1", "ba2"};
  const char* axes = "xyz";
  for (const char* b : bias_blocks)
    for (int j = 0; j < 3; ++j) head.push_back(std::string(b) + "_" + axes[j]);
  for (const auto& n : error_component_names()) head.push_back("var_" + n);
  head.push_back("nis_dp");
  head.push_back("nis_dq");
  w.row(head);
  for (const auto& p : poses) {
    std::vector<std::string> row;
    row.reserve(head.size());
    row.push_back(csv::fmt(p.t));
    for (int j = 0; j < 3; ++j) row.push_back(csv::fmt(p.estimate.p_rel(j)));
    const Vec4 q = geom::to_vec4(p.estimate.q_rel);
    for (int j = 0; j < 4; ++j) row.push_back(csv::fmt(q(j)));
    for (int j = 0; j < 3; ++j) row.push_back(csv::fmt(p.estimate.v_rel(j)));
    for (const Vec3* b : {&p.estimate.bg1, &p.estimate.bg2, &p.estimate.ba1, &p.estimate.ba2})
      for (int j = 0; j < 3; ++j) row.push_back(csv::fmt((*b)(j)));
    for (int j = 0; j < idx::error_dim; ++j) row.push_back(csv::fmt(p.cov_diag(j)));
    row.push_back(csv::fmt(p.nis_dp));
    row.push_back(csv::fmt(p.nis_dq));
    w.row(row);
  }
}

void write_imu_csv(const std::string& path, const ScenarioConfig& cfg, int agent,
                   const std::vector<ImuSample>& samples) {
  csv::Writer w(path);
  w.comment(header_comment(cfg));
  w.row({"t", "agent", "wx", "wy", "wz", "ax", "ay", "az"});
  for (const auto& s : samples) {
    w.row({csv::fmt(s.t), csv::fmt(agent), csv::fmt(s.omega_m.x()),
           csv::fmt(s.omega_m.y()), csv::fmt(s.omega_m.z()), csv::fmt(s.accel_m.x()),
           csv::fmt(s.accel_m.y()), csv::fmt(s.accel_m.z())});
  }
}

void write_meas_csv(const std::string& path, const ScenarioConfig& cfg,
                    const std::vector<MeasurementPair>& meas, bool with_dq) {
  csv::Writer w(path);
  w.comment(header_comment(cfg));
  std::vector<std::string> head{"t", "dpx", "dpy", "dpz"};
  if (with_dq) {
    head.insert(head.end(), {"qw", "qx", "qy", "qz"});
  }
  w.row(head);
  for (const auto& m : meas) {
    std::vector<std::string> row{csv::fmt(m.dp.t), csv::fmt(m.dp.dp.x()),
                                 csv::fmt(m.dp.dp.y()), csv::fmt(m.dp.dp.z())};
    if (with_dq) {
      const Vec4 q = geom::to_vec4(m.dq.dq);
      for (int j = 0; j < 4; ++j) row.push_back(csv::fmt(q(j)));
    }
    w.row(row);
  }
}

Eigen::MatrixXd to_matrix(const std::vector<ErrorVec>& v) {
  Eigen::MatrixXd m(v.size(), idx::error_dim);
  for (size_t k = 0; k < v.size(); ++k) m.row(k) = v[k].transpose();
  return m;
}

Eigen::MatrixXd to_matrix(const std::vector<ProjVec>& v) {
  Eigen::MatrixXd m(v.size(), kProjDim);
  for (size_t k = 0; k < v.size(); ++k) m.row(k) = v[k].transpose();
  return m;
}

}  // namespace

int cmd_simulate(const ScenarioConfig& cfg) {
  try {
    std::filesystem::create_directories(cfg.out_dir);
    const MotionProfile profile =
        make_profile(cfg.parsed_cell(), cfg.profile_params(), cfg.seed);
    const RunOptions opt = cfg.run_options();
    SyntheticLogs logs;
    const auto explicit_init = cfg.initial_state();
    const uint64_t run_seed = seed_hash(cfg.seed, 0);

    // boot sample at t = 0, only relevant for dumped logs (separate noise
    // stream so the filter run is unchanged either way)
    if (cfg.dump_logs) {
      Rng boot_rng(seed_hash(cfg.seed, 0xB007));
      Rng* boot = cfg.noise.sigma_g1 > 0 || cfg.noise.sigma_a1 > 0 ? &boot_rng : nullptr;
      const TrajectoryPair p0 = sample_trajectory(profile, 0.0);
      const double dt = 1.0 / cfg.imu_rate_hz;
      logs.imu1.push_back(synthesize_imu(p0.ref, Vec3::Zero(), Vec3::Zero(),
                                         cfg.noise.sigma_g1, cfg.noise.sigma_a1, dt, boot));
      logs.imu2.push_back(synthesize_imu(p0.target, Vec3::Zero(), Vec3::Zero(),
                                         cfg.noise.sigma_g2, cfg.noise.sigma_a2, dt, boot));
    }

    const FilterRunRecord rec =
        run_filter_once(profile, cfg.noise, run_seed, opt,
                        cfg.dump_logs ? &logs : nullptr,
                        explicit_init ? &*explicit_init : nullptr);

    write_metrics_csv(join_path(cfg.out_dir, "sim_metrics.csv"), cfg, rec.t,
                      to_matrix(rec.error), to_matrix(rec.sigma3), rec.nees,
                      to_matrix(rec.proj_error), to_matrix(rec.proj_sigma3), "err");
    write_pose_csv(join_path(cfg.out_dir, "est_poses.csv"), cfg, rec.poses);
    if (cfg.dump_logs) {
      write_imu_csv(join_path(cfg.out_dir, "imu1.csv"), cfg, 1, logs.imu1);
      write_imu_csv(join_path(cfg.out_dir, "imu2.csv"), cfg, 2, logs.imu2);
      write_meas_csv(join_path(cfg.out_dir, "meas.csv"), cfg, logs.meas,
                     cfg.parsed_mode() == MeasMode::dpdq);
    }
    return kExitOk;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const RunFailedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << " (cond=" << e.condition << ")\n";
    return kExitNumerical;
  }
}

int cmd_montecarlo(const ScenarioConfig& cfg, ExecPolicy policy) {
  try {
    std::filesystem::create_directories(cfg.out_dir);
    const MotionProfile profile =
        make_profile(cfg.parsed_cell(), cfg.profile_params(), cfg.seed);
    const RunMetrics m = run_monte_carlo(profile, cfg.noise, cfg.runs, cfg.seed,
                                         cfg.run_options(), policy);
    write_metrics_csv(join_path(cfg.out_dir, "mc_metrics.csv"), cfg, m.t, m.rmse,
                      m.sigma3, m.nees, m.proj_rmse, m.proj_sigma3, "rmse");
    return kExitOk;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const RunFailedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << " (cond=" << e.condition << ")\n";
    return kExitNumerical;
  }
}

int cmd_observability(const ScenarioConfig& cfg, bool assert_pass) {
  try {
    std::filesystem::create_directories(cfg.out_dir);
    const MotionProfile profile =
        make_profile(cfg.parsed_cell(), cfg.profile_params(), cfg.seed);
    const ObsReport rep =
        analyze_observability(profile, cfg.parsed_mode(), cfg.obs_options());
    const std::string text = report_to_text(rep);
    std::ofstream out(join_path(cfg.out_dir, "obs_report.txt"), std::ios::binary);
    out << "# " << header_comment(cfg) << "\n" << text;
    std::cout << text;
    if (assert_pass && !rep.pass) return kExitObsFail;
    return kExitOk;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << " (cond=" << e.condition << ")\n";
    return kExitNumerical;
  }
}

namespace {

struct ImuRow {
  double t;
  Vec3 w, a;
};

std::vector<ImuRow> read_imu_csv(const std::string& path, int expect_agent) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open IMU log: " + path);
  std::vector<ImuRow> rows;
  std::string line;
  int row_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    const auto f = csv::split(line);
    if (f.size() != 8) throw LogParseError("IMU row needs 8 fields", row_no);
    ImuRow r;
    r.t = csv::parse_double(f[0], row_no);
    const int agent = static_cast<int>(csv::parse_double(f[1], row_no));
    if (agent != expect_agent)
      throw LogParseError("unexpected agent id " + std::to_string(agent) +
                              " (expected " + std::to_string(expect_agent) + ")",
                          row_no);
    r.w = Vec3(csv::parse_double(f[2], row_no), csv::parse_double(f[3], row_no),
               csv::parse_double(f[4], row_no));
    r.a = Vec3(csv::parse_double(f[5], row_no), csv::parse_double(f[6], row_no),
               csv::parse_double(f[7], row_no));
    if (!rows.empty() && r.t <= rows.back().t)
      throw LogParseError("IMU timestamps not increasing", row_no);
    rows.push_back(r);
  }
  if (rows.size() < 2) throw ConfigError("IMU log too short: " + path);
  return rows;
}

struct MeasRow {
  double t;
  Vec3 dp;
  bool has_dq = false;
  Quat dq = Quat::Identity();
};

std::vector<MeasRow> read_meas_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open measurement log: " + path);
  std::vector<MeasRow> rows;
  std::string line;
  int row_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto f = csv::split(line);
    if (f.size() != 4 && f.size() != 8)
      throw LogParseError("measurement row needs 4 or 8 fields", row_no);
    MeasRow r;
    r.t = csv::parse_double(f[0], row_no);
    r.dp = Vec3(csv::parse_double(f[1], row_no), csv::parse_double(f[2], row_no),
                csv::parse_double(f[3], row_no));
    if (f.size() == 8) {
      r.has_dq = true;
      r.dq = Quat(csv::parse_double(f[4], row_no), csv::parse_double(f[5], row_no),
                  csv::parse_double(f[6], row_no), csv::parse_double(f[7], row_no));
    }
    if (!rows.empty() && r.t < rows.back().t)
      throw LogParseError("measurement timestamps decreasing", row_no);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

int cmd_replay(const std::string& imu1_csv, const std::string& imu2_csv,
               const std::string& meas_csv, const ScenarioConfig& cfg) {
  try {
    std::filesystem::create_directories(cfg.out_dir);
    const std::vector<ImuRow> imu1 = read_imu_csv(imu1_csv, 1);
    const std::vector<ImuRow> imu2 = read_imu_csv(imu2_csv, 2);
    if (imu1.size() != imu2.size())
      throw ConfigError("IMU logs have different lengths");
    std::vector<MeasRow> meas = read_meas_csv(meas_csv);

    // nominal period from the median step of stream 1
    std::vector<double> diffs;
    diffs.reserve(imu1.size() - 1);
    for (size_t i = 1; i < imu1.size(); ++i) diffs.push_back(imu1[i].t - imu1[i - 1].t);
    std::vector<double> sorted = diffs;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double dt_nominal = sorted[sorted.size() / 2];

    for (size_t i = 0; i < imu1.size(); ++i) {
      if (std::abs(imu1[i].t - imu2[i].t) > 0.5 * dt_nominal)
        throw LogParseError("IMU streams out of sync", static_cast<int>(i + 2));
    }

    const auto explicit_init = cfg.initial_state();
    SystemState x0;
    if (explicit_init) {
      x0 = *explicit_init;
    } else {
      if (meas.empty()) throw ConfigError("no measurements and no explicit init state");
      x0.p_rel = meas[0].dp;
      if (meas[0].has_dq) x0.q_rel = geom::quat_canonical(meas[0].dq).normalized();
    }

    const MeasMode mode = cfg.parsed_mode();
    const RunOptions opt = cfg.run_options();
    RelativeEkf ekf(x0, opt.init.initial_covariance(), cfg.noise, opt.ekf);
    const Mat3 r_dp = cfg.dp_sigma * cfg.dp_sigma * Mat3::Identity();
    const Mat3 r_dq = cfg.dq_sigma * cfg.dq_sigma * Mat3::Identity();

    std::vector<PoseRow> poses;
    size_t next_meas = 0;
    // drop measurements earlier than the first integrable step
    while (next_meas < meas.size() && meas[next_meas].t < imu1[0].t + 0.5 * dt_nominal &&
           meas[next_meas].t < imu1[1].t - 0.5 * dt_nominal)
      ++next_meas;

    // on divergence the rows processed so far are still written out
    std::string failure;
    try {
      for (size_t i = 1; i < imu1.size(); ++i) {
        const double dt = imu1[i].t - imu1[i - 1].t;
        if (dt > 1.5 * dt_nominal)
          std::cerr << "warning: timestamp gap of " << dt << " s at t=" << imu1[i].t
                    << ", prediction spans the gap\n";
        ImuSample m1{imu1[i].t, imu1[i].w, imu1[i].a};
        ImuSample m2{imu2[i].t, imu2[i].w, imu2[i].a};
        ekf.predict(m1, m2, dt);
        if (!ekf.state().is_finite())
          throw RunFailedError("filter state not finite", static_cast<int>(i));

        while (next_meas < meas.size() &&
               meas[next_meas].t <= imu1[i].t + 0.25 * dt_nominal) {
          const MeasRow& mr = meas[next_meas];
          PoseRow row;
          RelPositionMeas dp_meas{mr.t, mr.dp, r_dp};
          row.nis_dp = ekf.update_dp(dp_meas).nis;
          if (mode == MeasMode::dpdq && mr.has_dq) {
            RelOrientationMeas dq_meas{mr.t, mr.dq, r_dq};
            row.nis_dq = ekf.update_dq(dq_meas).nis;
          }
          row.t = mr.t;
          row.estimate = ekf.state();
          row.cov_diag = ekf.covariance().diagonal();
          poses.push_back(row);
          ++next_meas;
        }
      }
    } catch (const RunFailedError& e) {
      failure = std::string(e.what()) + " at step " + std::to_string(e.step);
    } catch (const NumericalError& e) {
      failure = e.what();
    }

    write_pose_csv(join_path(cfg.out_dir, "replay_poses.csv"), cfg, poses);
    if (!failure.empty()) {
      std::cerr << "error: replay diverged: " << failure << " ("
                << poses.size() << " rows written)\n";
      return kExitNumerical;
    }
    return kExitOk;
  } catch (const LogParseError& e) {
    std::cerr << "error: " << e.what() << " (row " << e.row << ")\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << " (cond=" << e.condition << ")\n";
    return kExitNumerical;
  } catch (const RunFailedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace relimu
