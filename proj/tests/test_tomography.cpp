#include <gtest/gtest.h>

#include <sstream>

#include "qdx/error.hpp"
#include "qdx/matrix_io.hpp"
#include "qdx/tomography.hpp"

using namespace qdx;

namespace {

std::string data(const std::string& name) { return std::string(QDX_DATA_DIR) + "/" + name; }

Mat2 random_unitary(Rng& rng) {
  Vec3 n(standard_normal(rng), standard_normal(rng), standard_normal(rng));
  return bloch_rotation(n, 2 * kPi * uniform_unit(rng));
}

MeasurementRecord exact_record(const Mat4& c) {
  MeasurementRecord r;
  for (int k = 0; k < kQptEntries; ++k) r.probability[k] = predict(c, k);
  return r;
}

void expect_cptp(const Mat4& c) {
  EXPECT_NO_THROW(ChoiMatrix{c}) << c;
}

const std::vector<std::string> kTableGates = {"X_pi/2", "Y_-pi/2", "T", "S", "H"};
const std::vector<std::string> kTableFiles = {"C_X90", "C_Ym90", "C_T", "C_S", "C_H"};

}  // namespace

TEST(Axes, PreparationAndMeasurementRotations) {
  for (Axis a : kAxes) {
    const Mat2 target = axis_state(a);
    const auto prep = preparation_rotation(a);
    const Mat2 up = prep ? prep->unitary() : Mat2::Identity();
    const Mat2 g = State::ground().matrix();
    EXPECT_LT((up * g * up.adjoint() - target).norm(), 1e-12) << axis_label(a);
    const auto meas = measurement_rotation(a);
    const Mat2 um = meas ? meas->unitary() : Mat2::Identity();
    EXPECT_LT((um * target * um.adjoint() - g).norm(), 1e-12) << axis_label(a);
    EXPECT_EQ(parse_axis(axis_label(a)), a);
  }
  EXPECT_THROW(parse_axis("+w"), ConfigError);
}

TEST(Record, IdealGateEntries) {
  Rng rng(1);
  const auto id = qpt_record(unitary_executor(Mat2::Identity()), Shots::infinite(), rng);
  EXPECT_DOUBLE_EQ(id.probability[qpt_index(Axis::PlusZ, Axis::PlusZ)], 1.0);
  const auto x = qpt_record(unitary_executor(ideal_gate("X_pi")), Shots::infinite(), rng);
  EXPECT_NEAR(x.probability[qpt_index(Axis::PlusZ, Axis::PlusZ)], 0.0, 1e-12);
  EXPECT_NEAR(x.probability[qpt_index(Axis::PlusX, Axis::PlusX)], 1.0, 1e-12);
  // exp(-i pi/4 sx) takes +z to -y.
  const auto xh = qpt_record(unitary_executor(ideal_gate("X_pi/2")), Shots::infinite(), rng);
  EXPECT_NEAR(xh.probability[qpt_index(Axis::PlusZ, Axis::MinusY)], 1.0, 1e-12);
  EXPECT_NEAR(xh.probability[qpt_index(Axis::PlusZ, Axis::PlusY)], 0.0, 1e-12);
}

TEST(Record, BornOracleAndDeterminism) {
  Rng rng(2);
  const Mat2 u = random_unitary(rng);
  const auto rec = qpt_record(unitary_executor(u), Shots::infinite(), rng);
  for (Axis p : kAxes)
    for (Axis m : kAxes) {
      const double born = (axis_state(m) * u * axis_state(p) * u.adjoint()).trace().real();
      EXPECT_NEAR(rec.probability[qpt_index(p, m)], born, 1e-12);
    }
  Rng a(5), b(5);
  const auto ra = qpt_record(unitary_executor(u), Shots(1000), a, 1);
  const auto rb = qpt_record(unitary_executor(u), Shots(1000), b, 4);
  EXPECT_EQ(ra.probability, rb.probability);
  EXPECT_EQ(ra.shots[0], 1000u);
}

TEST(Record, FileRoundTrip) {
  Rng rng(3);
  const auto rec = qpt_record(unitary_executor(ideal_gate("H")), Shots(777), rng);
  std::stringstream ss;
  write_record(ss, rec);
  const auto back = read_record(ss);
  EXPECT_EQ(back.probability, rec.probability);
  EXPECT_EQ(back.shots, rec.shots);
  std::stringstream bad("+z +z 1.5 10\n");
  EXPECT_THROW(read_record(bad), ConfigError);
}

TEST(Predict, Examples) {
  const Mat4 id = choi_from_unitary<double>(Mat2::Identity());
  EXPECT_NEAR(predict(id, qpt_index(Axis::PlusX, Axis::PlusX)), 1.0, 1e-12);
  for (int k = 0; k < kQptEntries; ++k) EXPECT_NEAR(predict(choi_depolarizing(), k), 0.5, 1e-12);
}

TEST(Predict, MatchesDirectUnitaryAndIsLinear) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Mat2 u = random_unitary(rng);
    const Mat4 c = choi_from_unitary(u);
    for (Axis p : kAxes)
      for (Axis m : kAxes) {
        const double born = (axis_state(m) * u * axis_state(p) * u.adjoint()).trace().real();
        EXPECT_NEAR(predict(c, qpt_index(p, m)), born, 1e-10);
      }
    const Mat4 c2 = choi_from_unitary(random_unitary(rng));
    const double alpha = uniform_unit(rng);
    for (int k = 0; k < kQptEntries; ++k) {
      EXPECT_NEAR(predict(alpha * c + (1 - alpha) * c2, k),
                  alpha * predict(c, k) + (1 - alpha) * predict(c2, k), 1e-12);
    }
  }
}

TEST(ChoiMatrix, RejectsInvalidInput) {
  Mat4 m = choi_depolarizing();
  EXPECT_NO_THROW(ChoiMatrix{m});
  m(0, 1) = 0.1;  // non-Hermitian
  EXPECT_THROW(ChoiMatrix{m}, InvalidChannel);
  m = 2 * choi_depolarizing();
  EXPECT_THROW(ChoiMatrix{m}, InvalidChannel);  // trace 4, not TP
}

TEST(Projection, OutputIsCptpForArbitraryHermitianInput) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    Mat4 a;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = {standard_normal(rng), standard_normal(rng)};
    a = (a + a.adjoint()).eval();
    expect_cptp(project_cptp(a));
  }
  const Mat4 ok = choi_from_unitary(random_unitary(rng));
  EXPECT_LT((project_cptp(ok) - ok).norm(), 1e-12);
}

TEST(Reconstruct, IdentityGateExactRecord) {
  const Mat4 id = choi_from_unitary<double>(Mat2::Identity());
  const auto r = reconstruct(exact_record(id));
  EXPECT_LT((r.choi - id).norm(), 1e-6);
  expect_cptp(r.choi);
  EXPECT_LE(r.cost, r.initial_cost);
}

TEST(Reconstruct, HardwareTMatrixRoundTrip) {
  const Mat4 ct = load_matrix(data("choi/C_T.txt"));
  const auto r = reconstruct(exact_record(ct));
  EXPECT_LT((r.choi - ct).norm(), 1e-3);
  expect_cptp(r.choi);
}

TEST(Reconstruct, FiniteShotsGiveHighFidelityForIdealGate) {
  Rng rng(7);
  const Mat2 u = ideal_gate("X_pi/2");
  const auto rec = qpt_record(unitary_executor(u), Shots(10000), rng);
  const auto r = reconstruct(rec);
  expect_cptp(r.choi);
  EXPECT_GE(average_gate_fidelity(r.choi, u), 0.995);
  // Constrained optimum is no worse than the projected unconstrained solution.
  EXPECT_LE(r.cost, qpt_cost(project_cptp(linear_inversion(rec)), rec) + 1e-12);
}

TEST(Reconstruct, AlwaysCptpUnderHeavyNoise) {
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto rec = qpt_record(unitary_executor(random_unitary(rng)), Shots(10), rng);
    ReconstructionOptions o;
    o.max_iterations = 500;
    const auto r = reconstruct(rec, o);
    expect_cptp(r.choi);
    EXPECT_LE(r.cost, r.initial_cost);
  }
}

TEST(Reconstruct, UnitarilyCovariant) {
  Rng rng(9);
  const Mat4 ct = load_matrix(data("choi/C_T.txt"));
  const auto base = reconstruct(exact_record(ct)).choi;
  for (int t = 0; t < 10; ++t) {
    // Post-rotating the output by V maps C to (I x V) C (I x V)^dag.
    const Mat2 v = random_unitary(rng);
    Mat4 w = Mat4::Zero();
    w.block<2, 2>(0, 0) = v;
    w.block<2, 2>(2, 2) = v;
    const Mat4 rotated = w * ct * w.adjoint();
    const auto r = reconstruct(exact_record(rotated)).choi;
    EXPECT_LT((r - w * base * w.adjoint()).norm(), 1e-4);
  }
}

TEST(Reconstruct, VisibilityInversion) {
  Rng rng(10);
  const Mat2 u = ideal_gate("S");
  auto rec = qpt_record(unitary_executor(u), Shots::infinite(), rng);
  for (double& p : rec.probability) p = 0.5 + 0.9 * (p - 0.5);
  ReconstructionOptions o;
  o.invert_visibility = 0.9;
  EXPECT_GT(average_gate_fidelity(reconstruct(rec, o).choi, u), 0.9999);
  EXPECT_LT(average_gate_fidelity(reconstruct(rec).choi, u), 0.95);
}

TEST(Options, Validation) {
  ReconstructionOptions o;
  o.step_size = 0;
  EXPECT_THROW(o.validate(), std::invalid_argument);
  o = {};
  o.projection_rounds = 0;
  EXPECT_THROW(o.validate(), std::invalid_argument);
}

TEST(Report, BundledMatricesReproduceTable) {
  std::vector<Mat4> choi;
  for (const auto& f : kTableFiles) choi.push_back(load_matrix(data("choi/" + f + ".txt")));
  const auto rows = report_fidelities(kTableGates, choi);
  const std::vector<double> expected = {95.65, 96.23, 93.75, 88.93, 91.36};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].gate, kTableGates[k]);
    EXPECT_NEAR(100 * rows[k].fidelity, expected[k], 0.1);
  }
  std::ostringstream out;
  write_fidelity_table(out, rows);
  EXPECT_NE(out.str().find("95.65"), std::string::npos);
}

TEST(Report, IdealAndDepolarizingExtremes) {
  for (const auto& g : kTableGates) {
    const Mat2 u = ideal_gate(g);
    EXPECT_NEAR(report_fidelities({g}, {choi_from_unitary(u)})[0].fidelity, 1.0, 1e-12);
    EXPECT_NEAR(report_fidelities({g}, {choi_depolarizing()})[0].fidelity, 0.5, 1e-12);
  }
  EXPECT_THROW(ideal_gate("sqrt_X"), std::invalid_argument);
}
