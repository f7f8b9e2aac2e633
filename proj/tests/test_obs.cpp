#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "test_utils.hpp"

#include "lie_oracle.hpp"
#include "relimu/errors.hpp"
#include "relimu/obs.hpp"

using namespace relimu;
using relimu::test::random_transformed;
using relimu::test::xi_row_specs;

namespace {

ObsReport analyze_cell(const char* tag, MeasMode mode, double horizon = 4.0,
                       uint64_t seed = 42) {
  ProfileParams params;
  params.duration = horizon;
  const MotionProfile p = make_profile(cell_from_string(tag), params, seed);
  ObsOptions opt;
  opt.horizon = horizon;
  return analyze_observability(p, mode, opt);
}

}  // namespace

TEST_CASE("a single-step record stacks H alone") {
  std::vector<ObsStepRecord> rec(1);
  const ObservabilityMatrix M = build_linear_M(rec, MeasMode::dp);
  CHECK(M.M.rows() == 3);
  CHECK((M.M.leftCols<3>() - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(M.M.rightCols(18).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(build_linear_M({}, MeasMode::dp), std::invalid_argument);
}

TEST_CASE("identity transitions repeat the measurement rows") {
  std::vector<ObsStepRecord> rec(5);
  const ObservabilityMatrix M = build_linear_M(rec, MeasMode::dpdq);
  CHECK(M.M.rows() == 30);
  for (int k = 1; k < 5; ++k)
    CHECK((M.M.middleRows(6 * k, 6) - M.M.topRows(6)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("null space of a full-rank random stack is empty") {
  Rng rng(1);
  std::vector<ObsStepRecord> rec(3);
  for (auto& r : rec)
    for (int i = 0; i < idx::error_dim; ++i)
      for (int j = 0; j < idx::error_dim; ++j) r.phi(i, j) = rng.gaussian();
  const ObservabilityMatrix M = build_linear_M(rec, MeasMode::dpdq);  // 18 rows < 21
  // 18 random rows leave a 3-dimensional null space
  CHECK(numeric_null_space(M).cols() == 3);

  std::vector<ObsStepRecord> rec2(8);
  for (auto& r : rec2)
    for (int i = 0; i < idx::error_dim; ++i)
      for (int j = 0; j < idx::error_dim; ++j) r.phi(i, j) = rng.gaussian();
  const ObservabilityMatrix M2 = build_linear_M(rec2, MeasMode::dp);
  CHECK(numeric_null_space(M2).cols() == 0);
}

TEST_CASE("a planted zero column is recovered as the null direction") {
  Rng rng(2);
  std::vector<ObsStepRecord> rec(8);
  for (auto& r : rec) {
    for (int i = 0; i < idx::error_dim; ++i)
      for (int j = 0; j < idx::error_dim; ++j) r.phi(i, j) = rng.gaussian();
    r.phi.col(13).setZero();
  }
  const ObservabilityMatrix M = build_linear_M(rec, MeasMode::dp);
  const Eigen::MatrixXd basis = numeric_null_space(M);
  REQUIRE(basis.cols() == 1);
  CHECK(std::abs(std::abs(basis(13, 0)) - 1.0) < 1e-12);
}

TEST_CASE("general motion yields numeric rank 21 in dp-only mode") {
  ProfileParams params;
  params.duration = 1.0;
  const MotionProfile p = make_profile(cell_from_string("VII-S"), params, 7);
  ObsOptions opt;
  opt.steps = 200;
  opt.rank_tol = 1e-10;
  const ObsReport rep = analyze_observability(p, MeasMode::dp, opt);
  CHECK(rep.null_dim_numeric == 0);
}

TEST_CASE("verify_direction separates null and generic directions") {
  ProfileParams params;
  params.duration = 4.0;
  const MotionProfile p = make_profile(cell_from_string("V-K"), params, 9);

  const double dt = 1.0 / 200;
  std::vector<ObsStepRecord> rec;
  {
    const TrajectoryPair pr = sample_trajectory(p, 0.0);
    const SystemState x0 = true_relative_state(pr.ref, pr.target);
    AppendixCPhi integ(
        x0, synthesize_imu(pr.ref, Vec3::Zero(), Vec3::Zero(), 0, 0, dt, nullptr),
        synthesize_imu(pr.target, Vec3::Zero(), Vec3::Zero(), 0, 0, dt, nullptr));
    rec.push_back({Mat21::Identity(), geom::quat_to_rot(x0.q_rel)});
    for (int k = 1; k < 800; ++k) {
      const TrajectoryPair s = sample_trajectory(p, k * dt);
      const SystemState x = true_relative_state(s.ref, s.target);
      integ.push(x,
                 synthesize_imu(s.ref, Vec3::Zero(), Vec3::Zero(), 0, 0, dt, nullptr),
                 synthesize_imu(s.target, Vec3::Zero(), Vec3::Zero(), 0, 0, dt, nullptr),
                 dt);
      rec.push_back({integ.phi(), geom::quat_to_rot(x.q_rel)});
    }
  }
  const ObservabilityMatrix M = build_linear_M(rec, MeasMode::dpdq);
  const Eigen::MatrixXd basis = numeric_null_space(M);
  REQUIRE(basis.cols() == 3);
  for (int j = 0; j < basis.cols(); ++j)
    CHECK(verify_direction(M, basis.col(j)) < 1e-10);

  Rng rng(10);
  for (int n = 0; n < 20; ++n) {
    ErrorVec v;
    for (int i = 0; i < idx::error_dim; ++i) v(i) = rng.gaussian();
    CHECK(verify_direction(M, v.normalized()) > 1e-3);
  }
  CHECK_THROWS_AS(verify_direction(M, ErrorVec::Zero()), std::invalid_argument);
}

TEST_CASE("candidate directions with an identity initial attitude") {
  ProfileParams params;
  params.rel_rpy0_deg = Vec3::Zero();
  params.duration = 1.0;
  const MotionProfile p = make_profile(cell_from_string("I-K"), params, 3);
  const CandidateDirections cand = candidate_directions(p, MeasMode::dpdq);
  REQUIRE(cand.unobservable.size() == 6);
  for (const auto& d : cand.unobservable) {
    if (d.label.rfind("b_g+", 0) == 0) {
      // equal +1/sqrt(2) entries in the two gyro-bias blocks
      const double s = 1.0 / std::sqrt(2.0);
      CHECK(d.n.segment<3>(idx::dbg1).cwiseAbs().maxCoeff() == doctest::Approx(s));
      CHECK((d.n.segment<3>(idx::dbg1) - d.n.segment<3>(idx::dbg2)).norm() < 1e-12);
      CHECK(d.n.segment<3>(idx::dp).norm() == 0.0);
      CHECK(d.n.segment<3>(idx::dba1).norm() == 0.0);
    }
  }
}

TEST_CASE("candidate counts per cell and mode") {
  ProfileParams params;
  params.duration = 1.0;
  auto count = [&params](const char* tag, MeasMode mode) {
    const MotionProfile p = make_profile(cell_from_string(tag), params, 5);
    return static_cast<int>(candidate_directions(p, mode).unobservable.size());
  };
  CHECK(count("I-S", MeasMode::dpdq) == 0);
  CHECK(count("V-M", MeasMode::dpdq) == 0);
  CHECK(count("V-K", MeasMode::dpdq) == 3);
  CHECK(count("III-K", MeasMode::dpdq) == 6);
  CHECK(count("I-K", MeasMode::dpdq) == 6);
  CHECK(count("I-S", MeasMode::dp) == 0);
  CHECK(count("V-M", MeasMode::dp) == 0);
  CHECK(count("V-K", MeasMode::dp) == 3);
  CHECK(count("III-K", MeasMode::dp) == 7);
  CHECK(count("I-K", MeasMode::dp) == 10);
  CHECK(predicted_null_dim(cell_from_string("I-K"), MeasMode::dp) == 10);
}

TEST_CASE("theta^b1 couples exactly the attitude and first accel-bias rows") {
  ProfileParams params;
  params.duration = 1.0;
  const MotionProfile p = make_profile(cell_from_string("III-K"), params, 5);
  const CandidateDirections cand = candidate_directions(p, MeasMode::dp);
  bool found = false;
  for (const auto& d : cand.unobservable) {
    if (d.label != "theta^b1") continue;
    found = true;
    CHECK(d.n.segment<3>(idx::dth).norm() > 0.1);
    CHECK(d.n.segment<3>(idx::dba1).norm() > 0.1);
    CHECK(d.n.segment<3>(idx::dp).norm() == 0.0);
    CHECK(d.n.segment<3>(idx::dv).norm() == 0.0);
    CHECK(d.n.segment<3>(idx::dbg1).norm() == 0.0);
    CHECK(d.n.segment<3>(idx::dbg2).norm() == 0.0);
    CHECK(d.n.segment<3>(idx::dba2).norm() == 0.0);
  }
  CHECK(found);
}

TEST_CASE("cell analyses match the motion-constraint tables") {
  struct Expect {
    const char* tag;
    MeasMode mode;
    int null_dim;
  };
  const Expect expects[] = {
      {"V-K", MeasMode::dpdq, 3}, {"III-K", MeasMode::dpdq, 6},
      {"I-K", MeasMode::dpdq, 6}, {"III-K", MeasMode::dp, 7},
      {"I-K", MeasMode::dp, 10},  {"I-S", MeasMode::dpdq, 0},
      {"V-M", MeasMode::dpdq, 0},
  };
  for (const auto& e : expects) {
    const ObsReport rep = analyze_cell(e.tag, e.mode);
    INFO(e.tag, " ", mode_to_string(e.mode));
    CHECK(rep.null_dim_numeric == e.null_dim);
    CHECK(rep.null_dim_predicted == e.null_dim);
    CHECK(rep.pass);
    CHECK(rep.max_angle_rad < 1e-4);
    for (const auto& d : rep.directions) {
      INFO(e.tag, " direction ", d.label);
      CHECK(d.pass);
    }
  }
}

TEST_CASE("constraint-violating histories are rejected by the direction builder") {
  ProfileParams params;
  params.duration = 1.0;
  MotionProfile p = make_profile(cell_from_string("VII-S"), params, 5);
  p.cell = cell_from_string("I-K");  // the data moves, the claimed cell is static
  CHECK_THROWS_AS(candidate_directions(p, MeasMode::dp), ScenarioError);
}

TEST_CASE("b_a+ along the spin axis stays orthogonal to b_a- over time") {
  ProfileParams params;
  params.duration = 4.0;
  const MotionProfile p = make_profile(cell_from_string("V-L"), params, 8);
  const CandidateDirections cand = candidate_directions(p, MeasMode::dpdq);
  const LabeledDirection* ba_plus_w = nullptr;
  for (const auto& d : cand.unobservable)
    if (d.label == "b_a+^w") ba_plus_w = &d;
  REQUIRE(ba_plus_w != nullptr);

  for (int k = 0; k <= 10; ++k) {
    const TrajectoryPair s = sample_trajectory(p, 0.4 * k);
    const Mat3 ct =
        geom::quat_to_rot(true_relative_state(s.ref, s.target).q_rel).transpose();
    for (int j = 0; j < 3; ++j) {
      ErrorVec bam = ErrorVec::Zero();
      bam.segment<3>(idx::dba1) = -Vec3::Unit(j);
      bam.segment<3>(idx::dba2) = ct * Vec3::Unit(j);
      CHECK(std::abs(ba_plus_w->n.dot(bam.normalized())) < 1e-9);
    }
  }
}

TEST_CASE("gradient stack: structure, finite differences, rank") {
  Rng rng(33);

  const TransformedState x0 = random_transformed(rng);
  const NonlinearGradientStack s0 = nonlinear_xi(x0);
  CHECK((s0.xi.block<3, 3>(0, 0) - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s0.xi.topRows(3).rightCols(19).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s0.p1 - (-geom::skew(Vec3::UnitX()))).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s0.p2 - (-geom::skew(Vec3::UnitY()))).cwiseAbs().maxCoeff() == 0.0);

  const auto specs = xi_row_specs();
  int rows_covered = 0;
  for (const auto& sp : specs) rows_covered += sp.dim;
  CHECK(rows_covered == kXiRows);

  for (int trial = 0; trial < 10; ++trial) {
    const TransformedState x = random_transformed(rng);
    const relimu::test::V22 xv = x.to_vec();
    const NonlinearGradientStack stack = nonlinear_xi(x);

    for (const auto& sp : specs) {
      for (int j = 0; j < sp.dim; ++j) {
        // leg 1: the closed-form Lie value matches the nested-FD evaluation
        const double nested = sp.nested[j](xv);
        const double analytic = sp.value(x, j);
        INFO(sp.name, " component ", j);
        CHECK(std::abs(nested - analytic) <
              std::max(1e-4, 1e-4 * std::abs(analytic)));

        // leg 2: the stack row is the gradient of that value
        const Eigen::VectorXd g = relimu::test::fd_gradient(
            [&sp, j](const Eigen::VectorXd& v) {
              return sp.value(TransformedState::from_vec(v), j);
            },
            xv, 1e-6);
        const Eigen::VectorXd row = stack.xi.row(sp.row + j).transpose();
        for (int c = 0; c < 22; ++c) {
          CHECK(std::abs(g(c) - row(c)) < std::max(1e-5 * std::abs(row(c)), 1e-7));
        }
      }
    }
  }
}

TEST_CASE("lambda stack has rank 4 at any unit quaternion") {
  Rng rng(44);
  for (int n = 0; n < 100; ++n) {
    TransformedState x = random_transformed(rng);
    const NonlinearGradientStack s = nonlinear_xi(x);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.lambda);
    const Eigen::VectorXd sv = svd.singularValues();
    CHECK(sv(3) > 1e-8 * sv(0));
  }
}

TEST_CASE("gradient stack rank is 22 at generic states") {
  Rng rng(55);
  for (int n = 0; n < 20; ++n) CHECK(nonlinear_rank(random_transformed(rng)) == 22);
}

TEST_CASE("degenerate quaternions are rejected") {
  TransformedState x;
  x.q = Vec4::Zero();
  CHECK_THROWS_AS(nonlinear_xi(x), std::invalid_argument);
  CHECK_THROWS_AS(nonlinear_rank(x), std::invalid_argument);
}

TEST_CASE("report text carries the verdicts") {
  const ObsReport rep = analyze_cell("V-K", MeasMode::dpdq, 2.0);
  const std::string text = report_to_text(rep);
  CHECK(text.find("null_dim: numeric=3 predicted=3 [PASS]") != std::string::npos);
  CHECK(text.find("b_a+ (1)") != std::string::npos);
  CHECK(text.find("overall: PASS") != std::string::npos);
}
