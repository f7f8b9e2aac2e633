#include "relimu/obs.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "relimu/errors.hpp"

namespace relimu {

using geom::skew;

MeasMode mode_from_string(const std::string& s) {
  if (s == "dp") return MeasMode::dp;
  if (s == "dpdq" || s == "dp+dq") return MeasMode::dpdq;
  throw ScenarioError("bad measurement mode '" + s + "', expected dp or dpdq");
}

std::string mode_to_string(MeasMode m) {
  return m == MeasMode::dp ? "dp" : "dpdq";
}

ObservabilityMatrix build_linear_M(const std::vector<ObsStepRecord>& rec,
                                   MeasMode mode) {
  if (rec.empty()) throw std::invalid_argument("build_linear_M: empty record");
  const int rows_per = mode == MeasMode::dpdq ? 6 : 3;
  ObservabilityMatrix out;
  out.mode = mode;
  out.steps = static_cast<int>(rec.size());
  out.M.resize(rows_per * out.steps, idx::error_dim);
  for (int k = 0; k < out.steps; ++k) {
    out.M.middleRows(rows_per * k, 3) = rec[k].phi.middleRows<3>(idx::dp);
    if (mode == MeasMode::dpdq)
      out.M.middleRows(rows_per * k + 3, 3) =
          rec[k].c_hat * rec[k].phi.middleRows<3>(idx::dth);
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(out.M, Eigen::ComputeFullV);
  out.svals = svd.singularValues();
  out.V = svd.matrixV();
  return out;
}

Eigen::MatrixXd numeric_null_space(const ObservabilityMatrix& M, double rel_tol) {
  if (rel_tol <= 0.0)
    rel_tol = std::max<double>(M.M.rows(), idx::error_dim) * 1e-10;
  const double smax = M.svals.size() > 0 ? M.svals(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < M.svals.size(); ++i)
    if (M.svals(i) > rel_tol * smax) ++rank;
  const int null_dim = idx::error_dim - rank;
  return M.V.rightCols(null_dim);
}

double verify_direction(const ObservabilityMatrix& M, const ErrorVec& n) {
  const double norm = n.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("verify_direction: zero direction");
  const double smax = M.svals.size() > 0 ? M.svals(0) : 0.0;
  if (!(smax > 0.0)) return 0.0;
  return (M.M * n).norm() / (smax * norm);
}

double max_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() == 0 || B.cols() == 0) return 0.0;
  const auto thin_q = [](const Eigen::MatrixXd& X) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    return Eigen::MatrixXd(qr.householderQ() *
                           Eigen::MatrixXd::Identity(X.rows(), X.cols()));
  };
  const Eigen::MatrixXd qa = thin_q(A);
  const Eigen::MatrixXd qb = thin_q(B);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
  const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(c);
}

// ---------------------------------------------------------------------------
// candidate directions

namespace {

enum class DirKind {
  BaPlus,
  BgPlus,
  BaPlusOmega,
  BgPlusOmega,
  BgPlusAlpha,
  Theta,       // expands to theta^b1, theta^b2, theta^a
  ThetaAlpha,
  ThetaBeta1,
  Bg1Alpha,
};

// Unobservable directions with both measurements, by row letter and
// reference-motion column group (I-III, IV-V, VI, VII).
std::vector<DirKind> table_dpdq(char row, int col) {
  const int g = col <= 3 ? 0 : (col <= 5 ? 1 : (col == 6 ? 2 : 3));
  using K = DirKind;
  switch (row) {
    case 'A': return {K::BaPlus, K::BgPlus};
    case 'B': return {K::BaPlusOmega, K::BgPlusOmega};
    case 'D':
      if (g == 0) return {K::BaPlus, K::BgPlus};
      if (g == 1) return {K::BaPlus, K::BgPlusAlpha};
      return {K::BaPlus};
    case 'E':
      if (g <= 1) return {K::BaPlusOmega, K::BgPlusOmega};
      return {K::BaPlusOmega};
    case 'G':
      if (g <= 1) return {K::BaPlus, K::BgPlusAlpha};
      return {K::BaPlus};
    case 'H':
      if (g <= 1) return {K::BaPlusOmega, K::BgPlusOmega};
      return {K::BaPlusOmega};
    case 'K':
      if (g == 0) return {K::BaPlus, K::BgPlus};
      return {K::BaPlus};
    case 'L':
      if (g == 0) return {K::BaPlusOmega, K::BgPlusOmega};
      return {K::BaPlusOmega};
    case 'N':
      if (g == 0) return {K::BaPlus, K::BgPlusAlpha};
      return {K::BaPlus};
    case 'O':
      if (g == 0) return {K::BaPlusOmega, K::BgPlusOmega};
      return {K::BaPlusOmega};
    case 'Q': return {K::BaPlus};
    case 'R': return {K::BaPlusOmega};
    default: return {};  // C, F, J, M, P, S
  }
}

// Additional unobservable directions with the position measurement only,
// by row group and individual column.
std::vector<DirKind> table_dp_extra(char row, int col) {
  using K = DirKind;
  const bool v_zero_rows = row == 'A' || row == 'B' || row == 'C' ||
                           row == 'D' || row == 'E' || row == 'F' ||
                           row == 'K' || row == 'L' || row == 'M';
  const bool vz_rows = row == 'G' || row == 'H' || row == 'J' ||
                       row == 'N' || row == 'O' || row == 'P';
  if (!v_zero_rows && !vz_rows) return {};  // Q, R, S
  const bool p_generic = row >= 'K';        // K..P: all position components non-zero

  switch (col) {
    case 1:
      if (v_zero_rows) return {K::Theta, K::Bg1Alpha};
      return {K::ThetaAlpha, K::Bg1Alpha};
    case 2: return {K::ThetaAlpha, K::Bg1Alpha};
    case 3:
      if (v_zero_rows) return {K::ThetaBeta1};
      return {};
    case 4:
      if (p_generic) return {};
      if (v_zero_rows || vz_rows) return {K::ThetaAlpha, K::Bg1Alpha};
      return {};
    default: return {};  // V, VI, VII
  }
}

ErrorVec bias_pair_direction(int first_block, const Vec3& u1, const Vec3& u2) {
  ErrorVec n = ErrorVec::Zero();
  n.segment<3>(first_block) = u1;
  n.segment<3>(first_block + 3) = u2;
  return n.normalized();
}

void append_bias_triplet(std::vector<LabeledDirection>* out, const std::string& name,
                         int first_block, double sign1, const Mat3& c0t) {
  for (int j = 0; j < 3; ++j) {
    const Vec3 e = Vec3::Unit(j);
    out->push_back({name + " (" + std::to_string(j + 1) + ")",
                    bias_pair_direction(first_block, sign1 * e, c0t * e)});
  }
}

}  // namespace

int predicted_null_dim(const MotionCell& cell, MeasMode mode) {
  int n = 0;
  for (const DirKind k : table_dpdq(cell.row, cell.col))
    n += (k == DirKind::BaPlus || k == DirKind::BgPlus) ? 3 : 1;
  if (mode == MeasMode::dp) {
    for (const DirKind k : table_dp_extra(cell.row, cell.col))
      n += (k == DirKind::Theta) ? 3 : 1;
  }
  return n;
}

CandidateDirections candidate_directions(const MotionProfile& profile,
                                         MeasMode mode) {
  const std::vector<std::string> bad = check_cell_constraints(profile);
  if (!bad.empty())
    throw ScenarioError("profile violates cell " + cell_to_string(profile.cell) +
                        " constraints: " + bad.front());

  const TrajectoryPair p0 = sample_trajectory(profile, 0.0);
  CandidateDirections out;
  out.q_rel_t0 = true_relative_state(p0.ref, p0.target).q_rel;
  out.alpha = profile.alpha;
  out.beta1 = profile.beta1;
  out.beta2 = profile.beta2;
  out.xi = profile.xi;
  const Mat3 c0t = geom::quat_to_rot(out.q_rel_t0).transpose();
  const Vec3 alpha_hat = out.alpha.normalized();

  std::function<void(DirKind)> add = [&](DirKind k) {
    switch (k) {
      case DirKind::BaPlus:
        append_bias_triplet(&out.unobservable, "b_a+", idx::dba1, +1.0, c0t);
        break;
      case DirKind::BgPlus:
        append_bias_triplet(&out.unobservable, "b_g+", idx::dbg1, +1.0, c0t);
        break;
      case DirKind::BaPlusOmega:
        out.unobservable.push_back(
            {"b_a+^w", bias_pair_direction(idx::dba1, out.xi, c0t * out.xi)});
        break;
      case DirKind::BgPlusOmega:
        out.unobservable.push_back(
            {"b_g+^w", bias_pair_direction(idx::dbg1, out.xi, c0t * out.xi)});
        break;
      case DirKind::BgPlusAlpha:
        out.unobservable.push_back(
            {"b_g+^a", bias_pair_direction(idx::dbg1, alpha_hat, c0t * alpha_hat)});
        break;
      case DirKind::Theta:
        add(DirKind::ThetaBeta1);
        {
          ErrorVec n = ErrorVec::Zero();
          n.segment<3>(idx::dth) = c0t * out.beta2;
          n.segment<3>(idx::dba1) = out.alpha.cross(out.beta2);
          out.unobservable.push_back({"theta^b2", n.normalized()});
        }
        add(DirKind::ThetaAlpha);
        break;
      case DirKind::ThetaAlpha: {
        ErrorVec n = ErrorVec::Zero();
        n.segment<3>(idx::dth) = c0t * alpha_hat;
        out.unobservable.push_back({"theta^a", n.normalized()});
        break;
      }
      case DirKind::ThetaBeta1: {
        ErrorVec n = ErrorVec::Zero();
        n.segment<3>(idx::dth) = c0t * out.beta1;
        n.segment<3>(idx::dba1) = out.alpha.cross(out.beta1);
        out.unobservable.push_back({"theta^b1", n.normalized()});
        break;
      }
      case DirKind::Bg1Alpha: {
        ErrorVec n = ErrorVec::Zero();
        n.segment<3>(idx::dbg1) = alpha_hat;
        out.unobservable.push_back({"b_g1^a", n.normalized()});
        break;
      }
    }
  };

  for (const DirKind k : table_dpdq(profile.cell.row, profile.cell.col)) add(k);
  if (mode == MeasMode::dp)
    for (const DirKind k : table_dp_extra(profile.cell.row, profile.cell.col)) add(k);

  append_bias_triplet(&out.observable_contrast, "b_a-", idx::dba1, -1.0, c0t);
  append_bias_triplet(&out.observable_contrast, "b_g-", idx::dbg1, -1.0, c0t);

  // A relative-bias column can itself be a combination of the predicted
  // null directions (for instance the alpha component of b_g- when both
  // b_g+ and b_g1^a are unobservable); such columns are no contrast.
  if (!out.unobservable.empty()) {
    Eigen::MatrixXd span(idx::error_dim, out.unobservable.size());
    for (size_t i = 0; i < out.unobservable.size(); ++i)
      span.col(i) = out.unobservable[i].n;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(span);
    const Eigen::MatrixXd Q =
        qr.householderQ() * Eigen::MatrixXd::Identity(span.rows(), span.cols());
    std::vector<LabeledDirection> kept;
    for (auto& d : out.observable_contrast) {
      const double outside = (d.n - Q * (Q.transpose() * d.n)).norm();
      if (outside > 1e-6) kept.push_back(d);
    }
    out.observable_contrast = std::move(kept);
  }
  return out;
}

// ---------------------------------------------------------------------------
// nonlinear analysis

Eigen::Matrix<double, 22, 1> TransformedState::to_vec() const {
  Eigen::Matrix<double, 22, 1> v;
  v << p, v_prime, q, bg1, bg2, ba1, ba2;
  return v;
}

TransformedState TransformedState::from_vec(const Eigen::Matrix<double, 22, 1>& v) {
  TransformedState x;
  x.p = v.segment<3>(0);
  x.v_prime = v.segment<3>(3);
  x.q = v.segment<4>(6);
  x.bg1 = v.segment<3>(10);
  x.bg2 = v.segment<3>(13);
  x.ba1 = v.segment<3>(16);
  x.ba2 = v.segment<3>(19);
  return x;
}

TransformedState transformed_from_state(const SystemState& x, const Vec3& omega1) {
  TransformedState t;
  t.p = x.p_rel;
  t.v_prime = x.v_rel + omega1.cross(x.p_rel);
  t.q = geom::to_vec4(x.q_rel);
  t.bg1 = x.bg1;
  t.bg2 = x.bg2;
  t.ba1 = x.ba1;
  t.ba2 = x.ba2;
  return t;
}

namespace obs_detail {

Eigen::Matrix<double, 3, 4> lambda_mat(int i, const Vec4& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Eigen::Matrix<double, 3, 4> m;
  switch (i) {
    case 0:
      m << w, x, -y, -z,
           z, y, x, w,
          -y, z, -w, x;
      break;
    case 1:
      m << -z, y, x, -w,
           w, -x, y, -z,
           x, w, z, y;
      break;
    default:
      m << y, z, w, x,
          -x, -w, z, y,
           w, -x, -y, z;
      break;
  }
  return 2.0 * m;
}

Mat3 rot_quad(const Vec4& q) {
  return geom::quat_to_rot(geom::from_vec4(q));
}

Eigen::Matrix<double, 3, 4> rot_jac_q(const Vec4& q, const Vec3& u) {
  return u(0) * lambda_mat(0, q) + u(1) * lambda_mat(1, q) + u(2) * lambda_mat(2, q);
}

}  // namespace obs_detail

NonlinearGradientStack nonlinear_xi(const TransformedState& x) {
  if (std::abs(x.q.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("nonlinear_xi: quaternion part must be unit norm");

  using obs_detail::lambda_mat;
  using obs_detail::rot_jac_q;
  using obs_detail::rot_quad;

  // column offsets of the transformed state
  constexpr int cp = 0, cv = 3, cq = 6, cbg1 = 10, cbg2 = 13, cba1 = 16, cba2 = 19;

  const Quat qq = geom::from_vec4(x.q);
  const Mat3 C = rot_quad(x.q);
  const Mat4 ql = geom::quat_left(qq);
  const Mat4 qr = geom::quat_right(qq);
  const Vec4 bg1_bar(0.0, x.bg1.x(), x.bg1.y(), x.bg1.z());
  const Vec4 bg2_bar(0.0, x.bg2.x(), x.bg2.y(), x.bg2.z());
  const Vec4 f0q = -0.5 * (ql * bg2_bar - qr * bg1_bar);
  // d f0q / dq: q x bg2_bar is right-multiplication by bg2_bar, and vice versa
  const Mat4 bg2_r = geom::quat_right(geom::from_vec4(bg2_bar));
  const Mat4 bg1_l = geom::quat_left(geom::from_vec4(bg1_bar));
  const Mat4 df0q_dq = -0.5 * (bg2_r - bg1_l);

  NonlinearGradientStack out;
  out.xi.setZero();
  auto& xi = out.xi;
  int r = 0;

  // L0 h1 = p
  xi.block<3, 3>(r, cp) = Mat3::Identity();
  r += 3;

  // L1_f0 h1 = v' + bg1 x p
  xi.block<3, 3>(r, cp) = skew(x.bg1);
  xi.block<3, 3>(r, cv) = Mat3::Identity();
  xi.block<3, 3>(r, cbg1) = -skew(x.p);
  r += 3;

  // L2_{f0 f4i} h1 = i-th column of C(q)
  for (int i = 0; i < 3; ++i) {
    xi.block<3, 4>(r, cq) = lambda_mat(i, x.q);
    r += 3;
  }

  // L0 h0 = |q|^2
  xi.block<1, 4>(r, cq) = 2.0 * x.q.transpose();
  r += 1;

  // L3_{f0 f0 f3i} h1 = -2 bg1 x e_i
  for (int i = 0; i < 2; ++i) {
    xi.block<3, 3>(r, cbg1) = 2.0 * skew(Vec3::Unit(i));
    r += 3;
  }

  // L3_{f0 f4i f0} h1 = C (e_i x bg2) + bg1 x (C e_i)
  for (int i = 0; i < 3; ++i) {
    const Vec3 ei = Vec3::Unit(i);
    xi.block<3, 4>(r, cq) =
        rot_jac_q(x.q, ei.cross(x.bg2)) + skew(x.bg1) * lambda_mat(i, x.q);
    xi.block<3, 3>(r, cbg1) = -skew(Vec3(C * ei));
    xi.block<3, 3>(r, cbg2) = C * skew(ei);
    r += 3;
  }

  // L1_f0 h0 = 2 q . f0q  (identically zero; its gradient is not)
  xi.block<1, 4>(r, cq) =
      2.0 * f0q.transpose() + 2.0 * x.q.transpose() * df0q_dq;
  xi.block<1, 3>(r, cbg1) = x.q.transpose() * qr.rightCols<3>();
  xi.block<1, 3>(r, cbg2) = -x.q.transpose() * ql.rightCols<3>();
  r += 1;

  // L2_{f0 f0} h1 = 2 bg1 x v' + bg1 x (bg1 x p) - C ba2 + ba1
  xi.block<3, 3>(r, cp) = skew(x.bg1) * skew(x.bg1);
  xi.block<3, 3>(r, cv) = 2.0 * skew(x.bg1);
  xi.block<3, 4>(r, cq) = -rot_jac_q(x.q, x.ba2);
  xi.block<3, 3>(r, cbg1) =
      -2.0 * skew(x.v_prime) - skew(Vec3(x.bg1.cross(x.p))) - skew(x.bg1) * skew(x.p);
  xi.block<3, 3>(r, cba1) = Mat3::Identity();
  xi.block<3, 3>(r, cba2) = -C;
  r += 3;

  // L3_{f0 f0 f2i} h1 = -C (e_i x ba2)
  for (int i = 0; i < 2; ++i) {
    const Vec3 ei = Vec3::Unit(i);
    xi.block<3, 4>(r, cq) = -rot_jac_q(x.q, ei.cross(x.ba2));
    xi.block<3, 3>(r, cba2) = -C * skew(ei);
    r += 3;
  }

  out.lambda.block<3, 4>(0, 0) = lambda_mat(0, x.q);
  out.lambda.block<3, 4>(3, 0) = lambda_mat(1, x.q);
  out.lambda.block<3, 4>(6, 0) = lambda_mat(2, x.q);
  out.s_row = 2.0 * x.q.transpose();
  out.lambda.block<1, 4>(9, 0) = out.s_row;

  out.p1 << 0, 0, 0,
            0, 0, 1,
            0, -1, 0;
  out.p2 << 0, 0, -1,
            0, 0, 0,
            1, 0, 0;
  return out;
}

int nonlinear_rank(const TransformedState& x) {
  const NonlinearGradientStack stack = nonlinear_xi(x);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(stack.xi);
  const Eigen::VectorXd s = svd.singularValues();
  const double tol = std::max<double>(kXiRows, 22) *
                     std::numeric_limits<double>::epsilon() * s(0);
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++rank;
  return rank;
}

// ---------------------------------------------------------------------------
// driver

ObsReport analyze_observability(const MotionProfile& profile, MeasMode mode,
                                const ObsOptions& opt) {
  const double dt = 1.0 / opt.imu_rate;
  const int n = opt.steps > 0
                    ? opt.steps
                    : static_cast<int>(std::lround(opt.horizon * opt.imu_rate));
  if (n < 2) throw std::invalid_argument("analyze_observability: need >= 2 steps");

  const CandidateDirections cand = candidate_directions(profile, mode);

  auto state_and_imu = [&](double t, SystemState* x, ImuSample* m1, ImuSample* m2) {
    const TrajectoryPair pair = sample_trajectory(profile, t);
    *x = true_relative_state(pair.ref, pair.target);
    *m1 = synthesize_imu(pair.ref, Vec3::Zero(), Vec3::Zero(), 0, 0, dt, nullptr);
    *m2 = synthesize_imu(pair.target, Vec3::Zero(), Vec3::Zero(), 0, 0, dt, nullptr);
  };

  std::vector<ObsStepRecord> rec;
  rec.reserve(n);
  SystemState x;
  ImuSample m1, m2;
  state_and_imu(0.0, &x, &m1, &m2);
  AppendixCPhi integ(x, m1, m2);
  rec.push_back({Mat21::Identity(), geom::quat_to_rot(x.q_rel)});
  for (int k = 1; k < n; ++k) {
    state_and_imu(k * dt, &x, &m1, &m2);
    integ.push(x, m1, m2, dt);
    rec.push_back({integ.phi(), geom::quat_to_rot(x.q_rel)});
  }

  const ObservabilityMatrix M = build_linear_M(rec, mode);
  const Eigen::MatrixXd null_basis = numeric_null_space(M, opt.rank_tol);

  ObsReport rep;
  rep.cell = profile.cell;
  rep.mode = mode;
  rep.steps = n;
  rep.dt = dt;
  rep.svals = M.svals;
  rep.null_dim_numeric = static_cast<int>(null_basis.cols());
  rep.null_dim_predicted = predicted_null_dim(profile.cell, mode);

  bool dirs_ok = true;
  for (const auto& d : cand.unobservable) {
    DirectionResult res;
    res.label = d.label;
    res.predicted_unobservable = true;
    res.residual = verify_direction(M, d.n);
    res.pass = res.residual < opt.residual_tol;
    dirs_ok = dirs_ok && res.pass;
    rep.directions.push_back(res);
  }
  for (const auto& d : cand.observable_contrast) {
    DirectionResult res;
    res.label = d.label;
    res.predicted_unobservable = false;
    res.residual = verify_direction(M, d.n);
    res.pass = res.residual > opt.contrast_tol;
    dirs_ok = dirs_ok && res.pass;
    rep.directions.push_back(res);
  }

  if (rep.null_dim_predicted == 0 && rep.null_dim_numeric == 0) {
    rep.max_angle_rad = 0.0;
  } else if (rep.null_dim_numeric == rep.null_dim_predicted) {
    Eigen::MatrixXd span(idx::error_dim, cand.unobservable.size());
    for (size_t i = 0; i < cand.unobservable.size(); ++i)
      span.col(i) = cand.unobservable[i].n;
    rep.max_angle_rad = max_principal_angle(span, null_basis);
  } else {
    rep.max_angle_rad = M_PI;  // dimension mismatch, spans incomparable
  }

  rep.pass = rep.null_dim_numeric == rep.null_dim_predicted && dirs_ok &&
             rep.max_angle_rad < opt.angle_tol;
  return rep;
}

std::string report_to_text(const ObsReport& rep) {
  std::ostringstream os;
  os.setf(std::ios::scientific);
  os.precision(3);
  os << "observability report\n";
  os << "cell: " << cell_to_string(rep.cell) << "\n";
  os << "mode: " << mode_to_string(rep.mode) << "\n";
  os << "steps: " << rep.steps << "  dt: " << rep.dt << "\n";
  os << "null_dim: numeric=" << rep.null_dim_numeric
     << " predicted=" << rep.null_dim_predicted << " ["
     << (rep.null_dim_numeric == rep.null_dim_predicted ? "PASS" : "FAIL")
     << "]\n";
  os << "principal_angle_rad: " << rep.max_angle_rad << "\n";
  os << "singular_values:";
  for (int i = 0; i < rep.svals.size(); ++i) os << " " << rep.svals(i);
  os << "\n";
  os << "directions:\n";
  for (const auto& d : rep.directions) {
    os << "  " << d.label << "  residual=" << d.residual << "  predicted="
       << (d.predicted_unobservable ? "unobservable" : "observable") << "  "
       << (d.pass ? "PASS" : "FAIL") << "\n";
  }
  os << "overall: " << (rep.pass ? "PASS" : "FAIL") << "\n";
  return os.str();
}

}  // namespace relimu
