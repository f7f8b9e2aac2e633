#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relimu/filter.hpp"
#include "relimu/obs.hpp"
#include "relimu/simworld.hpp"

namespace relimu {

struct InitParams {
  // per-axis variances of the initial error covariance, in the error order
  double var_p = 1e-4;
  double var_v = 1e-4;
  double var_theta = 1e-4;
  double var_bg1 = 1e-4;
  double var_bg2 = 1e-4;
  double var_ba1 = 1e-2;
  double var_ba2 = 1e-2;
  bool perturb_estimate = true;   // draw the initial estimate error from P0
  bool draw_true_biases = true;   // draw the true initial biases from P0
  // Std multiplier for the true initial bias draw relative to the filter
  // prior. 1 keeps the Monte Carlo consistent; > 1 models uncalibrated
  // biases the filter is over-confident about.
  double true_bias_scale = 1.0;

  Mat21 initial_covariance() const;
};

struct MeasNoise {
  double sigma_dp = 5e-3;  // m
  double sigma_dq = 5e-3;  // rad
};

struct RunOptions {
  double horizon = 10.0;    // s
  double imu_rate = 200.0;  // Hz
  double meas_rate = 20.0;  // Hz
  MeasMode mode = MeasMode::dpdq;
  MeasNoise meas;
  InitParams init;
  EkfOptions ekf;
  bool zero_noise = false;  // noiseless sensors, exact init (sanity runs)
  // extra unit directions to track: per step the signed error projection
  // and the 3 sqrt(d^T P d) envelope are recorded for each
  std::vector<ErrorVec> track_directions;
};

inline constexpr int kProjDim = 12;  // bg-, ba-, bg+, ba+ (3 each)
using ProjVec = Eigen::Matrix<double, kProjDim, 1>;

/// Per-step error of the bias estimates projected on the relative
/// (current-attitude) and composite (initial-attitude) combinations.
/// Returns [bg-, ba-, bg+, ba+].
ProjVec composite_bias_errors(const SystemState& truth, const SystemState& estimate,
                              const Quat& q_rel_t, const Quat& q_rel_t0);

/// 3-sigma envelopes of the same projections from the filter covariance.
ProjVec composite_bias_sigma3(const Covariance& P, const Quat& q_rel_t,
                              const Quat& q_rel_t0);

struct PoseRow {
  double t = 0.0;
  SystemState estimate;
  ErrorVec cov_diag = ErrorVec::Zero();
  double nis_dp = 0.0;
  double nis_dq = 0.0;
};

struct FilterRunRecord {
  std::vector<double> t;
  std::vector<ErrorVec> error;     // truth (-) estimate per step
  std::vector<ErrorVec> sigma3;    // 3 sqrt(diag P)
  std::vector<double> nees;
  std::vector<ProjVec> proj_error;
  std::vector<ProjVec> proj_sigma3;
  std::vector<Eigen::VectorXd> dir_error;   // per tracked direction
  std::vector<Eigen::VectorXd> dir_sigma3;
  std::vector<PoseRow> poses;      // one row per measurement epoch
  SystemState final_truth;
  SystemState final_estimate;
};

/// Sensor streams captured during a synthetic run, for log dumping.
struct SyntheticLogs {
  std::vector<ImuSample> imu1, imu2;
  std::vector<MeasurementPair> meas;
  SystemState init_estimate;
};

/// One deterministic filter run over synthesized data. Throws
/// RunFailedError (with the step index) if the filter diverges.
/// An explicit initial estimate overrides the truth-derived one (used to
/// make log replay reproduce the run exactly).
FilterRunRecord run_filter_once(const MotionProfile& profile,
                                const NoiseParams& noise, uint64_t seed,
                                const RunOptions& opt,
                                SyntheticLogs* logs = nullptr,
                                const SystemState* explicit_init = nullptr);

struct RunMetrics {
  std::vector<double> t;
  Eigen::MatrixXd rmse;        // steps x 21
  Eigen::MatrixXd sigma3;      // steps x 21, rms over runs of the envelope
  std::vector<double> nees;    // mean over runs
  Eigen::MatrixXd proj_rmse;   // steps x 12
  Eigen::MatrixXd proj_sigma3; // steps x 12
  Eigen::MatrixXd dir_rmse;    // steps x tracked directions
  Eigen::MatrixXd dir_sigma3;
  int runs = 0;
  uint64_t master_seed = 0;
};

enum class ExecPolicy { serial, openmp };

/// Monte Carlo over N runs with per-run seeds derived from the master
/// seed. The reduction is ordered by run index, so the output is
/// bit-identical for both execution policies. A failed run aborts the
/// aggregation with the failing seeds listed.
RunMetrics run_monte_carlo(const MotionProfile& profile, const NoiseParams& noise,
                           int n_runs, uint64_t master_seed, const RunOptions& opt,
                           ExecPolicy policy = ExecPolicy::openmp);

/// Chi-square quantile (Wilson-Hilferty approximation), used for the
/// NEES consistency band.
double chi2_quantile(double p, double dof);

/// Names of the 21 error components, in state order (for CSV headers).
const std::vector<std::string>& error_component_names();
const std::vector<std::string>& projection_component_names();

}  // namespace relimu
