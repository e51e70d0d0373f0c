#include "qdx/clifford.hpp"

#include <cmath>
#include <sstream>

namespace qdx {

Mat2 primitive_unitary(Primitive p) {
  const Vec3 x(1, 0, 0);
  const Vec3 z(0, 0, 1);
  switch (p) {
    case Primitive::I: return Mat2::Identity();
    case Primitive::XPi: return bloch_rotation(x, kPi);
    case Primitive::XHalf: return bloch_rotation(x, kPi / 2);
    case Primitive::XMinusHalf: return bloch_rotation(x, -kPi / 2);
    case Primitive::ZPi: return bloch_rotation(z, kPi);
    case Primitive::ZHalf: return bloch_rotation(z, kPi / 2);
    case Primitive::ZMinusHalf: return bloch_rotation(z, -kPi / 2);
  }
  throw InvariantError("unknown primitive");
}

std::string primitive_name(Primitive p) {
  switch (p) {
    case Primitive::I: return "I";
    case Primitive::XPi: return "X_pi";
    case Primitive::XHalf: return "X_pi/2";
    case Primitive::XMinusHalf: return "X_-pi/2";
    case Primitive::ZPi: return "Z_pi";
    case Primitive::ZHalf: return "Z_pi/2";
    case Primitive::ZMinusHalf: return "Z_-pi/2";
  }
  return "?";
}

bool is_x_type(Primitive p) {
  return p == Primitive::XPi || p == Primitive::XHalf || p == Primitive::XMinusHalf;
}

bool is_z_type(Primitive p) {
  return p == Primitive::ZPi || p == Primitive::ZHalf || p == Primitive::ZMinusHalf;
}

double primitive_angle(Primitive p) {
  switch (p) {
    case Primitive::XPi:
    case Primitive::ZPi: return kPi;
    case Primitive::XHalf:
    case Primitive::ZHalf: return kPi / 2;
    case Primitive::XMinusHalf:
    case Primitive::ZMinusHalf: return -kPi / 2;
    case Primitive::I: return 0;
  }
  return 0;
}

Mat2 sequence_unitary(const PrimitiveSequence& seq) {
  Mat2 u = Mat2::Identity();
  for (Primitive p : seq) u = primitive_unitary(p) * u;
  return u;
}

namespace {

struct AxisAngle {
  Vec3 axis;
  double angle;
};

std::vector<AxisAngle> clifford_axis_angles() {
  const double third = 2 * kPi / 3;
  return {
      {{1, 0, 0}, 0},          {{1, 0, 0}, kPi},         {{0, 1, 0}, kPi},
      {{0, 0, 1}, kPi},        {{1, 1, 1}, third},       {{1, 1, -1}, third},
      {{1, -1, 1}, third},     {{1, -1, -1}, third},     {{-1, 1, 1}, third},
      {{-1, 1, -1}, third},    {{-1, -1, 1}, third},     {{-1, -1, -1}, third},
      {{1, 0, 0}, kPi / 2},    {{-1, 0, 0}, kPi / 2},    {{0, 1, 0}, kPi / 2},
      {{0, -1, 0}, kPi / 2},   {{0, 0, 1}, kPi / 2},     {{0, 0, -1}, kPi / 2},
      {{1, 0, 1}, kPi},        {{1, 0, -1}, kPi},        {{0, 1, -1}, kPi},
      {{0, 1, 1}, kPi},        {{1, 1, 0}, kPi},         {{-1, 1, 0}, kPi},
  };
}

constexpr double kLookupTol = 1e-8;

}  // namespace

CliffordTable::CliffordTable() {
  const auto aa = clifford_axis_angles();
  gates_.reserve(aa.size());
  for (std::size_t i = 0; i < aa.size(); ++i) {
    CliffordGate g;
    g.index = static_cast<int>(i);
    g.axis = aa[i].axis.normalized();
    g.angle = aa[i].angle;
    g.unitary = bloch_rotation(g.axis, g.angle);
    gates_.push_back(g);
  }

  for (int a = 0; a < kCliffordCount; ++a) {
    for (int b = 0; b < kCliffordCount; ++b) {
      product_[a][b] = lookup(gates_[b].unitary * gates_[a].unitary);
    }
  }
  for (int a = 0; a < kCliffordCount; ++a) {
    inverse_[a] = -1;
    for (int b = 0; b < kCliffordCount; ++b) {
      if (product_[a][b] == 0) inverse_[a] = b;
    }
    if (inverse_[a] < 0) throw InvariantError("Clifford element without inverse");
  }

  // Minimal decompositions by exhaustive search. Length-1 strings over I
  // only serve the identity; longer strings use the six non-identity
  // primitives so that no minimal string contains a wasted slot.
  decomp_[0].push_back({Primitive::I});
  std::vector<PrimitiveSequence> frontier = {{}};
  for (int len = 1; len <= 3; ++len) {
    std::vector<PrimitiveSequence> next;
    for (const auto& s : frontier) {
      for (Primitive p : kAllPrimitives) {
        if (p == Primitive::I) continue;
        auto t = s;
        t.push_back(p);
        next.push_back(t);
      }
    }
    for (const auto& s : next) {
      const int idx = lookup(sequence_unitary(s));
      if (decomp_[idx].empty() || decomp_[idx].front().size() == s.size()) {
        decomp_[idx].push_back(s);
      }
    }
    frontier = std::move(next);
  }
  for (int i = 0; i < kCliffordCount; ++i) {
    if (decomp_[i].empty()) throw InvariantError("Clifford element without a decomposition");
    for (const auto& s : decomp_[i]) {
      if (!equal_up_to_phase(sequence_unitary(s), gates_[i].unitary, kLookupTol)) {
        throw InvariantError("decomposition does not reproduce its Clifford");
      }
    }
  }
}

const CliffordTable& CliffordTable::instance() {
  static const CliffordTable table;
  return table;
}

const CliffordGate& CliffordTable::gate(int index) const {
  if (index < 0 || index >= kCliffordCount) {
    throw std::invalid_argument("Clifford index out of range: " + std::to_string(index));
  }
  return gates_[static_cast<std::size_t>(index)];
}

int CliffordTable::compose(int a, int b) const {
  gate(a);
  gate(b);
  return product_[a][b];
}

int CliffordTable::inverse(int index) const {
  gate(index);
  return inverse_[index];
}

int CliffordTable::lookup(const Mat2& u) const {
  for (const auto& g : gates_) {
    if (equal_up_to_phase(u, g.unitary, kLookupTol)) return g.index;
  }
  throw InvariantError("unitary is not a single-qubit Clifford");
}

const std::vector<PrimitiveSequence>& CliffordTable::decompositions(int index) const {
  gate(index);
  return decomp_[index];
}

std::vector<CliffordGate> enumerate_cliffords() { return CliffordTable::instance().gates(); }

CliffordGate compose(const CliffordGate& a, const CliffordGate& b) {
  const auto& t = CliffordTable::instance();
  return t.gate(t.compose(a.index, b.index));
}

int recovery_index(const std::vector<int>& sequence) {
  const auto& t = CliffordTable::instance();
  int acc = 0;
  for (int c : sequence) acc = t.compose(acc, c);
  return t.inverse(acc);
}

CliffordGate recovery_gate(const std::vector<CliffordGate>& sequence) {
  std::vector<int> idx;
  idx.reserve(sequence.size());
  for (const auto& g : sequence) idx.push_back(g.index);
  return CliffordTable::instance().gate(recovery_index(idx));
}

PrimitiveSequence decompose(int index, Rng& rng) {
  const auto& alts = CliffordTable::instance().decompositions(index);
  return alts[uniform_index(rng, alts.size())];
}

PrimitiveSequence decompose(const CliffordGate& c, Rng& rng) { return decompose(c.index, rng); }

Mat2 PhysicalPulseList::unitary() const {
  Mat2 u = Mat2::Identity();
  for (const auto& p : pulses) u = inplane_rotation(p.axis_angle, p.rotation) * u;
  return z_rotation(frame_phase) * u;
}

PhysicalPulseList compile_virtual_z(const PrimitiveSequence& seq) {
  // X_theta after an accumulated frame f equals Rz(f) R_{-f}(theta) Rz(-f),
  // so every Z moves to the end and rotates the axes of the pulses it passes.
  PhysicalPulseList out;
  double frame = 0;
  for (Primitive p : seq) {
    if (is_z_type(p)) {
      frame = std::remainder(frame + primitive_angle(p), 2 * kPi);
    } else if (is_x_type(p)) {
      out.pulses.push_back({primitive_angle(p), frame == 0 ? 0.0 : -frame});
    } else {
      out.idle_positions.push_back(static_cast<int>(out.pulses.size()));
    }
  }
  out.frame_phase = frame;
  return out;
}

std::string format_sequence_line(const std::vector<int>& cliffords, int recovery) {
  std::ostringstream os;
  for (int c : cliffords) os << c << ' ';
  os << "| " << recovery;
  return os.str();
}

std::pair<std::vector<int>, int> parse_sequence_line(const std::string& line) {
  const auto bar = line.find('|');
  if (bar == std::string::npos) throw ConfigError("sequence line lacks '|' separator");
  std::vector<int> seq;
  std::istringstream head(line.substr(0, bar));
  std::string tok;
  auto to_index = [](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad Clifford index '" + s + "'");
    }
    if (used != s.size() || v < 0 || v >= kCliffordCount) {
      throw ConfigError("bad Clifford index '" + s + "'");
    }
    return v;
  };
  while (head >> tok) seq.push_back(to_index(tok));
  std::istringstream tail(line.substr(bar + 1));
  if (!(tail >> tok)) throw ConfigError("sequence line lacks a recovery index");
  const int rec = to_index(tok);
  if (tail >> tok) throw ConfigError("trailing tokens after recovery index");
  return {seq, rec};
}

}  // namespace qdx
