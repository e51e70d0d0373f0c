#pragma once

// The 24-element single-qubit Clifford group, decompositions into the seven
// primitive gates, and virtual-Z compilation into in-plane microwave pulses.
//
// Index order: the identity, the three pi rotations about x, y, z, the eight
// 2pi/3 rotations about (+-1, +-1, +-1), the six +-pi/2 rotations about x, y,
// z, then the six pi rotations about (1,0,1), (1,0,-1), (0,1,-1), (0,1,1),
// (1,1,0), (-1,1,0). Sequence files store these indices; do not reorder.

#include <array>
#include <string>
#include <vector>

#include "qdx/core.hpp"
#include "qdx/random.hpp"

namespace qdx {

enum class Primitive { I, XPi, XHalf, XMinusHalf, ZPi, ZHalf, ZMinusHalf };

inline constexpr std::array<Primitive, 7> kAllPrimitives = {
    Primitive::I,  Primitive::XPi,   Primitive::XHalf,     Primitive::XMinusHalf,
    Primitive::ZPi, Primitive::ZHalf, Primitive::ZMinusHalf};

Mat2 primitive_unitary(Primitive p);
std::string primitive_name(Primitive p);
bool is_x_type(Primitive p);
bool is_z_type(Primitive p);
/// Signed rotation angle of an X- or Z-type primitive; 0 for I.
double primitive_angle(Primitive p);

/// Applied left to right.
using PrimitiveSequence = std::vector<Primitive>;

/// Product G_last ... G_first.
Mat2 sequence_unitary(const PrimitiveSequence& seq);

struct CliffordGate {
  int index = 0;
  Vec3 axis = Vec3(1, 0, 0);
  double angle = 0;
  Mat2 unitary = Mat2::Identity();
};

inline constexpr int kCliffordCount = 24;

/// Process-wide immutable tables: elements, multiplication, inverses and all
/// minimal primitive decompositions. Built once, thread-safe to read.
class CliffordTable {
 public:
  static const CliffordTable& instance();

  const std::vector<CliffordGate>& gates() const { return gates_; }
  const CliffordGate& gate(int index) const;
  /// Element equal (up to phase) to unitary(b) * unitary(a): a first.
  int compose(int a, int b) const;
  int inverse(int index) const;
  /// Throws InvariantError when `u` is not a Clifford up to phase.
  int lookup(const Mat2& u) const;
  const std::vector<PrimitiveSequence>& decompositions(int index) const;

 private:
  CliffordTable();
  std::vector<CliffordGate> gates_;
  std::array<std::array<int, kCliffordCount>, kCliffordCount> product_{};
  std::array<int, kCliffordCount> inverse_{};
  std::array<std::vector<PrimitiveSequence>, kCliffordCount> decomp_;
};

std::vector<CliffordGate> enumerate_cliffords();
CliffordGate compose(const CliffordGate& a, const CliffordGate& b);
CliffordGate recovery_gate(const std::vector<CliffordGate>& sequence);
int recovery_index(const std::vector<int>& sequence);

/// A minimal decomposition chosen uniformly among the stored alternatives.
PrimitiveSequence decompose(const CliffordGate& c, Rng& rng);
PrimitiveSequence decompose(int index, Rng& rng);

struct PhysicalPulse {
  double rotation = 0;    // +-pi or +-pi/2
  double axis_angle = 0;  // radians in the x-y plane
};

/// Microwave pulses with Z content absorbed into axis angles. The realised
/// unitary is Rz(frame_phase) * pulse_n * ... * pulse_1. Identity primitives
/// occupy idle slots of pulse length and are counted separately.
struct PhysicalPulseList {
  std::vector<PhysicalPulse> pulses;
  double frame_phase = 0;
  std::vector<int> idle_positions;  // number of pulses emitted before each idle slot

  Mat2 unitary() const;
  int idle_slots() const { return static_cast<int>(idle_positions.size()); }
  int microwave_slots() const { return static_cast<int>(pulses.size()) + idle_slots(); }
};

PhysicalPulseList compile_virtual_z(const PrimitiveSequence& seq);

/// Sequence file line: "c1 c2 ... cm | r".
std::string format_sequence_line(const std::vector<int>& cliffords, int recovery);
/// Parses a sequence file line; throws ConfigError on malformed input.
std::pair<std::vector<int>, int> parse_sequence_line(const std::string& line);

}  // namespace qdx
