#include <gtest/gtest.h>

#include <set>

#include "qdx/clifford.hpp"
#include "qdx/error.hpp"

using namespace qdx;

namespace {

const CliffordTable& table() { return CliffordTable::instance(); }

constexpr int kXPi = 1;
constexpr int kZPi = 3;
constexpr int kXHalf = 12;
constexpr int kXMinusHalf = 13;

// Brute force: conjugating each Pauli must give a signed Pauli.
bool maps_paulis_to_paulis(const Mat2& u) {
  const std::array<Mat2, 3> p = {Pauli<>::X(), Pauli<>::Y(), Pauli<>::Z()};
  for (const auto& a : p) {
    const Mat2 c = u * a * u.adjoint();
    bool hit = false;
    for (const auto& b : p) {
      if ((c - b).norm() < 1e-9 || (c + b).norm() < 1e-9) hit = true;
    }
    if (!hit) return false;
  }
  return true;
}

Mat2 product(const std::vector<int>& seq) {
  Mat2 u = Mat2::Identity();
  for (int c : seq) u = table().gate(c).unitary * u;
  return u;
}

}  // namespace

TEST(Clifford, TwentyFourDistinctPauliPreservingElements) {
  const auto gates = enumerate_cliffords();
  ASSERT_EQ(gates.size(), 24u);
  EXPECT_TRUE(equal_up_to_phase(gates[0].unitary, Mat2::Identity()));
  for (int i = 0; i < 24; ++i) {
    EXPECT_EQ(gates[i].index, i);
    EXPECT_TRUE(maps_paulis_to_paulis(gates[i].unitary)) << i;
    EXPECT_TRUE(is_unitary(gates[i].unitary));
    EXPECT_TRUE(equal_up_to_phase(gates[i].unitary, bloch_rotation(gates[i].axis, gates[i].angle)));
    for (int j = 0; j < i; ++j) EXPECT_FALSE(equal_up_to_phase(gates[i].unitary, gates[j].unitary));
  }
}

TEST(Clifford, IndexOrderIsStable) {
  const auto& g = table().gates();
  EXPECT_TRUE(equal_up_to_phase(g[kXPi].unitary, bloch_rotation(Vec3(1, 0, 0), kPi)));
  EXPECT_TRUE(equal_up_to_phase(g[kZPi].unitary, bloch_rotation(Vec3(0, 0, 1), kPi)));
  EXPECT_TRUE(equal_up_to_phase(g[kXHalf].unitary, bloch_rotation(Vec3(1, 0, 0), kPi / 2)));
  EXPECT_TRUE(equal_up_to_phase(g[kXMinusHalf].unitary, bloch_rotation(Vec3(1, 0, 0), -kPi / 2)));
  EXPECT_TRUE(equal_up_to_phase(g[18].unitary, bloch_rotation(Vec3(1, 0, 1), kPi)));
  EXPECT_TRUE(equal_up_to_phase(g[21].unitary, bloch_rotation(Vec3(0, 1, 1), kPi)));
}

TEST(Clifford, ClosureAndUniqueInverse) {
  for (int a = 0; a < 24; ++a) {
    std::set<int> row;
    int inverses = 0;
    for (int b = 0; b < 24; ++b) {
      const int c = table().compose(a, b);
      row.insert(c);
      EXPECT_TRUE(equal_up_to_phase(table().gate(c).unitary,
                                    table().gate(b).unitary * table().gate(a).unitary));
      if (c == 0) ++inverses;
    }
    EXPECT_EQ(row.size(), 24u);  // Latin square row
    EXPECT_EQ(inverses, 1);
    EXPECT_EQ(table().compose(a, table().inverse(a)), 0);
  }
}

TEST(Clifford, ComposeExamples) {
  const auto& g = table().gates();
  for (int c = 0; c < 24; ++c) EXPECT_EQ(compose(g[0], g[c]).index, c);
  EXPECT_EQ(compose(g[kXPi], g[kXPi]).index, 0);
  EXPECT_EQ(compose(g[kXHalf], g[kXHalf]).index, kXPi);
}

TEST(Clifford, LookupRejectsNonClifford) {
  EXPECT_THROW(table().lookup(bloch_rotation(Vec3(0, 0, 1), kPi / 4)), InvariantError);
  EXPECT_EQ(table().lookup(std::complex<double>(0, 1) * Pauli<>::Z()), kZPi);
}

TEST(Recovery, Examples) {
  EXPECT_EQ(recovery_gate({}).index, 0);
  EXPECT_EQ(recovery_gate({table().gate(kXHalf)}).index, kXMinusHalf);
  EXPECT_EQ(recovery_index({}), 0);
}

TEST(Recovery, ThousandRandomSequencesReturnToIdentity) {
  Rng rng(11);
  for (int k = 0; k < 1000; ++k) {
    const int m = 1 + static_cast<int>(uniform_index(rng, 200));
    std::vector<int> seq(m);
    for (int& c : seq) c = static_cast<int>(uniform_index(rng, 24));
    const int r = recovery_index(seq);
    seq.push_back(r);
    EXPECT_LT(phase_distance(product(seq), Mat2::Identity()), 1e-8);
  }
}

TEST(Decompose, EveryStoredDecompositionIsVerifiedAndMinimal) {
  std::size_t max_len = 0;
  for (int c = 0; c < 24; ++c) {
    const auto& alts = table().decompositions(c);
    ASSERT_FALSE(alts.empty());
    const std::size_t len = alts.front().size();
    for (const auto& seq : alts) {
      EXPECT_EQ(seq.size(), len);
      EXPECT_TRUE(equal_up_to_phase(sequence_unitary(seq), table().gate(c).unitary)) << c;
    }
    max_len = std::max(max_len, len);
  }
  EXPECT_EQ(max_len, 3u);
}

TEST(Decompose, ReferenceRowsReproduceTheirClifford) {
  using P = Primitive;
  // (axis, angle, decomposition), one row per index.
  struct Row {
    Vec3 axis;
    double angle;
    PrimitiveSequence seq;
  };
  const double h = kPi / 2;
  const double t = 2 * kPi / 3;
  const std::vector<Row> rows = {
      {{1, 0, 0}, 0, {P::I}},
      {{1, 0, 0}, kPi, {P::XPi}},
      {{0, 1, 0}, kPi, {P::XPi, P::ZPi}},
      {{0, 0, 1}, kPi, {P::ZPi}},
      {{1, 1, 1}, t, {P::XHalf, P::ZHalf}},
      {{1, 1, -1}, t, {P::ZMinusHalf, P::XHalf}},
      {{1, -1, 1}, t, {P::ZHalf, P::XHalf}},
      {{1, -1, -1}, t, {P::XHalf, P::ZMinusHalf}},
      {{-1, 1, 1}, t, {P::ZHalf, P::XMinusHalf}},
      {{-1, 1, -1}, t, {P::XMinusHalf, P::ZMinusHalf}},
      {{-1, -1, 1}, t, {P::XMinusHalf, P::ZHalf}},
      {{-1, -1, -1}, t, {P::ZMinusHalf, P::XMinusHalf}},
      {{1, 0, 0}, h, {P::XHalf}},
      {{-1, 0, 0}, h, {P::XMinusHalf}},
      {{0, 1, 0}, h, {P::XHalf, P::ZHalf, P::XMinusHalf}},
      {{0, -1, 0}, h, {P::XHalf, P::ZMinusHalf, P::XMinusHalf}},
      {{0, 0, 1}, h, {P::ZHalf}},
      {{0, 0, -1}, h, {P::ZMinusHalf}},
      {{1, 0, 1}, kPi, {P::XHalf, P::ZHalf, P::XHalf}},
      {{1, 0, -1}, kPi, {P::XHalf, P::ZMinusHalf, P::XHalf}},
      {{0, 1, -1}, kPi, {P::ZPi, P::XHalf}},
      {{0, 1, 1}, kPi, {P::ZPi, P::XMinusHalf}},
      {{1, 1, 0}, kPi, {P::XPi, P::ZHalf}},
      {{-1, 1, 0}, kPi, {P::XPi, P::ZMinusHalf}},
  };
  ASSERT_EQ(rows.size(), 24u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Mat2 target = bloch_rotation(rows[i].axis, rows[i].angle);
    EXPECT_TRUE(equal_up_to_phase(sequence_unitary(rows[i].seq), target)) << "row " << i;
    EXPECT_TRUE(equal_up_to_phase(table().gate(static_cast<int>(i)).unitary, target)) << "row " << i;
  }
}

TEST(Decompose, Examples) {
  Rng rng(12);
  EXPECT_EQ(decompose(0, rng), PrimitiveSequence{Primitive::I});
  EXPECT_EQ(decompose(kZPi, rng), PrimitiveSequence{Primitive::ZPi});
  EXPECT_EQ(compile_virtual_z(decompose(0, rng)).pulses.size(), 0u);
}

TEST(Decompose, RoundTripForAllElementsAndSeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    for (int c = 0; c < 24; ++c) {
      EXPECT_EQ(table().lookup(sequence_unitary(decompose(c, rng))), c);
    }
  }
}

TEST(Decompose, DeterministicPerSeedAndUniformOverAlternatives) {
  Rng a(5), b(5);
  for (int k = 0; k < 200; ++k) EXPECT_EQ(decompose(k % 24, a), decompose(k % 24, b));

  int target = -1;
  for (int c = 0; c < 24; ++c) {
    if (table().decompositions(c).size() >= 2) target = c;
  }
  ASSERT_GE(target, 0);
  const auto& alts = table().decompositions(target);
  std::vector<int> counts(alts.size(), 0);
  Rng rng(6);
  const int draws = 20000;
  for (int k = 0; k < draws; ++k) {
    const auto seq = decompose(target, rng);
    for (std::size_t i = 0; i < alts.size(); ++i)
      if (alts[i] == seq) ++counts[i];
  }
  const double expect = static_cast<double>(draws) / alts.size();
  for (int c : counts) EXPECT_NEAR(c, expect, 5 * std::sqrt(expect));
}

TEST(Decompose, MeanMicrowaveSlotsPerClifford) {
  Rng rng(13);
  const int draws = 100000;
  long total = 0;
  for (int k = 0; k < draws; ++k) {
    const int c = static_cast<int>(uniform_index(rng, 24));
    total += compile_virtual_z(decompose(c, rng)).microwave_slots();
  }
  EXPECT_NEAR(static_cast<double>(total) / draws, 23.0 / 24.0, 0.01);
}

TEST(VirtualZ, PureZGateIsFrameOnly) {
  const auto l = compile_virtual_z({Primitive::ZHalf});
  EXPECT_TRUE(l.pulses.empty());
  EXPECT_NEAR(l.frame_phase, kPi / 2, 1e-15);
  EXPECT_EQ(l.microwave_slots(), 0);
}

TEST(VirtualZ, HadamardRowRotatesSecondAxisByQuarterTurn) {
  const auto l = compile_virtual_z({Primitive::XHalf, Primitive::ZHalf, Primitive::XHalf});
  ASSERT_EQ(l.pulses.size(), 2u);
  const double rel = std::remainder(l.pulses[1].axis_angle - l.pulses[0].axis_angle, 2 * kPi);
  EXPECT_NEAR(std::abs(rel), kPi / 2, 1e-12);
  EXPECT_TRUE(equal_up_to_phase(l.unitary(), sequence_unitary({Primitive::XHalf, Primitive::ZHalf,
                                                               Primitive::XHalf})));
}

TEST(VirtualZ, RandomSequencesCompileExactly) {
  Rng rng(14);
  for (int k = 0; k < 200; ++k) {
    PrimitiveSequence seq(50);
    for (auto& p : seq) p = kAllPrimitives[uniform_index(rng, 7)];
    const auto l = compile_virtual_z(seq);
    EXPECT_LT(phase_distance(l.unitary(), sequence_unitary(seq)), 1e-8);
    std::size_t xs = 0, ids = 0;
    for (auto p : seq) {
      xs += is_x_type(p);
      ids += p == Primitive::I;
    }
    EXPECT_EQ(l.pulses.size(), xs);
    EXPECT_LE(l.pulses.size(), seq.size());
    EXPECT_EQ(static_cast<std::size_t>(l.idle_slots()), ids);
    for (const auto& pulse : l.pulses) {
      const double r = std::abs(pulse.rotation);
      EXPECT_TRUE(std::abs(r - kPi) < 1e-15 || std::abs(r - kPi / 2) < 1e-15);
    }
  }
}

TEST(SequenceFile, RoundTripAndMalformedInput) {
  const std::vector<int> seq = {3, 0, 23, 12};
  const auto line = format_sequence_line(seq, 7);
  const auto [back, r] = parse_sequence_line(line);
  EXPECT_EQ(back, seq);
  EXPECT_EQ(r, 7);
  EXPECT_THROW(parse_sequence_line("1 2 3"), ConfigError);
  EXPECT_THROW(parse_sequence_line("1 24 | 0"), ConfigError);
  EXPECT_THROW(parse_sequence_line("1 x | 0"), ConfigError);
  EXPECT_THROW(parse_sequence_line("1 | 0 | 2"), ConfigError);
}
