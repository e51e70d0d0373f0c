#pragma once

// Single-qubit process tomography: six axial preparations times six signed
// readouts, a linear forward model, and Choi reconstruction by projected
// gradient descent onto the CPTP set.

#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qdx/core.hpp"
#include "qdx/random.hpp"

namespace qdx {

enum class Axis { PlusZ, MinusZ, PlusX, MinusX, PlusY, MinusY };

inline constexpr std::array<Axis, 6> kAxes = {Axis::PlusZ, Axis::MinusZ, Axis::PlusX,
                                              Axis::MinusX, Axis::PlusY, Axis::MinusY};
inline constexpr int kQptEntries = 36;

std::string axis_label(Axis a);  // "+z", "-x", ...
Axis parse_axis(const std::string& label);
/// Pure state pointing along the axis (also the projector measured by it).
Mat2 axis_state(Axis a);

/// An in-plane rotation by `angle` about (cos phi, sin phi, 0).
struct InplaneRotation {
  double phi = 0;
  double angle = 0;
  Mat2 unitary() const { return inplane_rotation(phi, angle); }
};

/// Rotation taking |g> (+z) to the axis; empty for +z.
std::optional<InplaneRotation> preparation_rotation(Axis a);
/// Rotation taking the axis to +z, so that P_g afterwards is the probability
/// of the signed outcome; empty for +z.
std::optional<InplaneRotation> measurement_rotation(Axis a);

/// Entry index = 6 * prep + meas, both in kAxes order.
inline int qpt_index(Axis prep, Axis meas) {
  return 6 * static_cast<int>(prep) + static_cast<int>(meas);
}

struct MeasurementRecord {
  std::array<double, kQptEntries> probability{};
  std::array<std::uint64_t, kQptEntries> shots{};  // 0 means infinite

  void validate() const;
};

void write_record(std::ostream& out, const MeasurementRecord& r);
MeasurementRecord read_record(std::istream& in);

/// Returns the exact probability of the +meas outcome after preparing `prep`
/// and applying the gate under test.
using GateExecutor = std::function<double(Axis prep, Axis meas)>;

/// Samples every entry with `shots`; per-entry streams are derived from one
/// draw of `rng`, so the record is independent of evaluation order.
MeasurementRecord qpt_record(const GateExecutor& executor, const Shots& shots, Rng& rng,
                             unsigned jobs = 1);

/// Ideal preparation and readout around a unitary gate.
GateExecutor unitary_executor(const Mat2& u);

/// Validated Choi matrix (input (x) output, trace 2).
class ChoiMatrix {
 public:
  /// Throws InvalidChannel when Hermiticity, positivity or trace preservation
  /// fail beyond `tol`.
  explicit ChoiMatrix(const Mat4& m, double tol = 1e-8);
  const Mat4& matrix() const { return m_; }

 private:
  Mat4 m_;
};

/// Born probability of entry `index` under the channel; linear in c.
double predict(const Mat4& c, int index);

struct ReconstructionOptions {
  double step_size = 0.2;
  int max_iterations = 5000;
  double tolerance = 1e-12;
  int projection_rounds = 50;
  std::optional<double> invert_visibility;  // undo 1/2 + v (p - 1/2) first

  void validate() const;
};

struct Reconstruction {
  Mat4 choi;
  bool converged = false;
  int iterations = 0;
  double cost = 0;
  double initial_cost = 0;
};

double qpt_cost(const Mat4& c, const MeasurementRecord& r);

/// Alternating PSD clipping (with trace rescale) and trace-preserving
/// correction, ending on a trace-preserving step; a final mix with the
/// depolarizing channel removes any residual negativity.
Mat4 project_cptp(const Mat4& c, int rounds = 50);

Reconstruction reconstruct(const MeasurementRecord& record, const ReconstructionOptions& opts = {});

/// Unconstrained Hermitian least-squares solution of the forward model.
Mat4 linear_inversion(const MeasurementRecord& record);

/// Names: "I", "X_pi", "X_pi/2", "Y_-pi/2", "T", "S", "H".
Mat2 ideal_gate(const std::string& name);

struct FidelityRow {
  std::string gate;
  double fidelity = 0;
};

std::vector<FidelityRow> report_fidelities(const std::vector<std::string>& gates,
                                           const std::vector<Mat4>& choi);
void write_fidelity_table(std::ostream& out, const std::vector<FidelityRow>& rows);

}  // namespace qdx
