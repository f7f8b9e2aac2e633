#pragma once

#include <string>
#include <vector>

#include "relimu/propagation.hpp"
#include "relimu/simworld.hpp"

namespace relimu {

enum class MeasMode { dp, dpdq };

MeasMode mode_from_string(const std::string& s);
std::string mode_to_string(MeasMode m);

/// One recorded step for the observability stack: the transition from the
/// first step and the current attitude estimate (for the orientation rows).
struct ObsStepRecord {
  Mat21 phi = Mat21::Identity();  // Phi(t_k, t_1)
  Mat3 c_hat = Mat3::Identity();  // C(q_rel(t_k))
};

/// Stacked H_k * Phi(k,1) rows in time order, with a cached SVD.
struct ObservabilityMatrix {
  Eigen::MatrixXd M;
  int steps = 0;
  MeasMode mode = MeasMode::dp;
  Eigen::VectorXd svals;  // descending, min(rows, 21) entries
  Eigen::MatrixXd V;      // 21 x 21 right singular vectors
};

/// Throws std::invalid_argument on an empty record.
ObservabilityMatrix build_linear_M(const std::vector<ObsStepRecord>& rec,
                                   MeasMode mode);

/// Orthonormal basis of the numeric null space: directions with
/// sigma_i <= rel_tol * sigma_max. rel_tol <= 0 selects the default
/// max(rows, 21) * 1e-10.
Eigen::MatrixXd numeric_null_space(const ObservabilityMatrix& M, double rel_tol = 0.0);

/// ||M n|| / (sigma_max * ||n||). Throws std::invalid_argument for n = 0.
double verify_direction(const ObservabilityMatrix& M, const ErrorVec& n);

/// Largest principal angle between the column spans of two bases (rad).
double max_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// ---------------------------------------------------------------------------
// analytical candidate directions

struct LabeledDirection {
  std::string label;
  ErrorVec n;  // unit norm
};

struct CandidateDirections {
  std::vector<LabeledDirection> unobservable;        // predicted null directions
  std::vector<LabeledDirection> observable_contrast; // relative-bias combos
  Quat q_rel_t0 = Quat::Identity();
  Vec3 alpha = Vec3::Zero();
  Vec3 beta1 = Vec3::UnitX();
  Vec3 beta2 = Vec3::UnitY();
  Vec3 xi = Vec3::UnitZ();
};

/// Constructs the labeled directions the motion-constraint tables predict
/// for this cell and measurement mode, anchored at the initial relative
/// orientation. Throws ScenarioError when the profile violates its cell's
/// constraints.
CandidateDirections candidate_directions(const MotionProfile& profile,
                                         MeasMode mode);

/// Number of predicted unobservable directions for a cell/mode.
int predicted_null_dim(const MotionCell& cell, MeasMode mode);

// ---------------------------------------------------------------------------
// nonlinear (Lie-derivative) analysis

/// State with the velocity replaced by v' = v + omega1 x p, which makes
/// the dynamics input-affine. Column order p, v', q(wxyz), bg1, bg2, ba1, ba2.
struct TransformedState {
  Vec3 p = Vec3::Zero();
  Vec3 v_prime = Vec3::Zero();
  Vec4 q = Vec4(1, 0, 0, 0);
  Vec3 bg1 = Vec3::Zero();
  Vec3 bg2 = Vec3::Zero();
  Vec3 ba1 = Vec3::Zero();
  Vec3 ba2 = Vec3::Zero();

  Eigen::Matrix<double, 22, 1> to_vec() const;
  static TransformedState from_vec(const Eigen::Matrix<double, 22, 1>& v);
};

TransformedState transformed_from_state(const SystemState& x, const Vec3& omega1);

inline constexpr int kXiRows = 41;

/// Closed-form gradients of the selected Lie-derivative stack, evaluated
/// at the given state. Throws std::invalid_argument unless the quaternion
/// part is unit norm.
struct NonlinearGradientStack {
  Eigen::Matrix<double, kXiRows, 22> xi;
  Eigen::Matrix<double, 10, 4> lambda;  // [Lambda1; Lambda2; Lambda3; S]
  Eigen::Matrix<double, 1, 4> s_row;
  Mat3 p1, p2;
};

NonlinearGradientStack nonlinear_xi(const TransformedState& x);

/// Numeric rank of the gradient stack; 22 at generic states.
int nonlinear_rank(const TransformedState& x);

namespace obs_detail {
// Gradient of the i-th column (0-based) of the homogeneous rotation matrix
// with respect to the scalar-first quaternion 4-vector.
Eigen::Matrix<double, 3, 4> lambda_mat(int i, const Vec4& q);
// Homogeneous (norm-squared scaled) rotation matrix of a raw 4-vector.
Mat3 rot_quad(const Vec4& q);
// Gradient of rot_quad(q) * u with respect to q.
Eigen::Matrix<double, 3, 4> rot_jac_q(const Vec4& q, const Vec3& u);
}  // namespace obs_detail

// ---------------------------------------------------------------------------
// full analysis driver

struct ObsOptions {
  double horizon = 10.0;     // s
  double imu_rate = 200.0;   // Hz
  int steps = 0;             // 0 -> horizon * imu_rate
  double rank_tol = 0.0;     // relative; 0 -> max(rows, 21) * 1e-10
  double residual_tol = 1e-6;
  double contrast_tol = 1e-3;
  double angle_tol = 1e-4;   // rad
};

struct DirectionResult {
  std::string label;
  double residual = 0.0;
  bool predicted_unobservable = false;
  bool pass = false;
};

struct ObsReport {
  MotionCell cell;
  MeasMode mode = MeasMode::dp;
  int steps = 0;
  double dt = 0.0;
  int null_dim_numeric = 0;
  int null_dim_predicted = 0;
  Eigen::VectorXd svals;
  std::vector<DirectionResult> directions;
  double max_angle_rad = 0.0;  // predicted span vs numeric null space
  bool pass = false;
};

/// Builds the observability matrix over a noiseless run of the profile,
/// extracts its null space and checks it against the predicted directions.
ObsReport analyze_observability(const MotionProfile& profile, MeasMode mode,
                                const ObsOptions& opt);

std::string report_to_text(const ObsReport& report);

}  // namespace relimu
