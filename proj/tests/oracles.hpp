#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. They build channels from superoperators directly and
// never call the closed-form helpers they are compared against.

#include "qdx/benchmarking.hpp"
#include "qdx/clifford.hpp"
#include "qdx/tomography.hpp"

namespace qdx::oracle {

inline Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return k;
}

// Superoperator on column-stacked vec(rho): vec(U rho U^dag) = (conj(U) x U) vec(rho).
inline Mat4 unitary_superop(const Mat2& u) { return kron(u.conjugate(), u); }

inline Mat4 depolarizing_superop(double lambda) {
  const std::array<Mat2, 3> p = {Pauli<>::X(), Pauli<>::Y(), Pauli<>::Z()};
  Mat4 s = (1 - 0.75 * lambda) * Mat4::Identity();
  for (const auto& k : p) s += 0.25 * lambda * kron(k.conjugate(), k);
  return s;
}

// Average over Cliffords of the average gate fidelity of the per-Clifford
// channel, built by multiplying superoperators pulse by pulse exactly as the
// channel backend applies them. Independent of the survival-factor formula.
inline double composed_channel_fidelity(double lambda) {
  const auto& t = CliffordTable::instance();
  const Mat4 dep = depolarizing_superop(lambda);
  double total = 0;
  for (int c = 0; c < kCliffordCount; ++c) {
    const auto& alts = t.decompositions(c);
    Mat4 avg = Mat4::Zero();
    for (const auto& seq : alts) {
      const auto pl = compile_virtual_z(seq);
      Mat4 s = Mat4::Identity();
      std::size_t idle = 0;
      for (std::size_t k = 0; k <= pl.pulses.size(); ++k) {
        while (idle < pl.idle_positions.size() &&
               static_cast<std::size_t>(pl.idle_positions[idle]) == k) {
          s = dep * s;
          ++idle;
        }
        if (k == pl.pulses.size()) break;
        s = dep * unitary_superop(inplane_rotation(pl.pulses[k].axis_angle, pl.pulses[k].rotation)) * s;
      }
      s = unitary_superop(z_rotation(pl.frame_phase)) * s;
      avg += s / static_cast<double>(alts.size());
    }
    const double f_pro = (unitary_superop(t.gate(c).unitary).adjoint() * avg).trace().real() / 4;
    total += (2 * f_pro + 1) / 3;
  }
  return total / kCliffordCount;
}

inline MeasurementRecord exact_record(const Mat4& c) {
  MeasurementRecord r;
  for (int k = 0; k < kQptEntries; ++k) r.probability[k] = predict(c, k);
  return r;
}

}  // namespace qdx::oracle
