#pragma once

#include <string>

#include "relimu/config.hpp"

namespace relimu {

// Exit codes shared by the library-level commands and the CLI:
//   0 success, 2 config error, 3 numerical failure, 4 observability FAIL
// (the latter only when assert_pass is set).
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitObsFail = 4;

/// Single filter run; writes sim_metrics.csv and est_poses.csv, plus
/// imu1.csv / imu2.csv / meas.csv when output.dump_logs is set.
int cmd_simulate(const ScenarioConfig& cfg);

/// N runs; writes mc_metrics.csv.
int cmd_montecarlo(const ScenarioConfig& cfg,
                   ExecPolicy policy = ExecPolicy::openmp);

/// Observability analysis; writes obs_report.txt and prints the report.
/// With assert_pass, a FAIL verdict maps to exit code 4.
int cmd_observability(const ScenarioConfig& cfg, bool assert_pass);

/// Runs the filter over recorded logs; writes replay_poses.csv.
int cmd_replay(const std::string& imu1_csv, const std::string& imu2_csv,
               const std::string& meas_csv, const ScenarioConfig& cfg);

}  // namespace relimu
