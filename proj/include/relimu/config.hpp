#pragma once

#include <optional>
#include <string>

#include "relimu/harness.hpp"

namespace relimu {

/// Flat key-value scenario configuration with sections. Unknown keys are
/// rejected; see the README for the documented grammar.
struct ScenarioConfig {
  // [scenario]
  std::string cell = "VII-S";
  std::string mode = "dpdq";
  int runs = 50;
  uint64_t seed = 1;
  double horizon_s = 10.0;
  double imu_rate_hz = 200.0;
  double meas_rate_hz = 20.0;

  // [noise]
  NoiseParams noise;
  double dp_sigma = 5e-3;
  double dq_sigma = 5e-3;
  double gyro1_inflation = 1.0;

  // [init]
  InitParams init;

  // [profile]
  ProfileParams profile;

  // [filter]
  int phi_order = 1;
  bool chi2_gate = false;
  double chi2_threshold = 7.81;
  double gyro_diff_cutoff_hz = 0.0;
  std::string omega_dot_source = "analytic";  // analytic | difference

  // [obs]
  double rank_tol = 0.0;  // 0 -> max(rows, 21) * 1e-10
  int obs_steps = 0;      // 0 -> horizon * imu_rate
  double residual_tol = 1e-6;
  double contrast_tol = 1e-3;
  double angle_tol = 1e-4;

  // [init_state] explicit initial filter estimate (optional)
  bool has_init_state = false;
  Vec3 init_p = Vec3::Zero();
  Vec3 init_v = Vec3::Zero();
  Vec4 init_q = Vec4(1, 0, 0, 0);
  Vec3 init_bg1 = Vec3::Zero(), init_bg2 = Vec3::Zero();
  Vec3 init_ba1 = Vec3::Zero(), init_ba2 = Vec3::Zero();

  // [output]
  std::string out_dir = ".";
  bool dump_logs = false;

  MotionCell parsed_cell() const;
  MeasMode parsed_mode() const;
  RunOptions run_options() const;
  ObsOptions obs_options() const;
  ProfileParams profile_params() const;  // with duration = horizon_s
  std::optional<SystemState> initial_state() const;
};

/// Parses and validates. Throws ConfigError naming the offending key and
/// line for syntax errors, unknown keys, and constraint violations.
ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text);

/// Canonical serialization; parse(serialize(c)) == c.
std::string serialize_config(const ScenarioConfig& cfg);

}  // namespace relimu
