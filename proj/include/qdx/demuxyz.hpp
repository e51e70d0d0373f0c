#pragma once

// Flux-pulse gates on a qubit detuned from a shared continuous drive: a pulse
// brings the qubit onto resonance, its length sets the rotation angle and its
// leading edge sets the rotation axis. Between pulses the axis seen by the
// qubit advances at the idle detuning, so axis angles are chosen by delay.
//
// Axis angles live in the frame of the first pulse of a sequence. Only
// relative angles are physical; a common offset is a z conjugation that
// neither a ground-state start nor a z readout can see.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "qdx/analysis.hpp"
#include "qdx/benchmarking.hpp"
#include "qdx/pulsesim.hpp"
#include "qdx/tomography.hpp"

namespace qdx {

struct Calibration {
  double delta_i_res = 0;      // uA
  double t_pi = 0;             // ns, 1 / (2 Rabi frequency)
  double axis_period = 0;      // ns per full turn of the axis angle
  double phase_offset = 0;     // rad, relative axis angle at zero programmed delay
  int axis_sign = 1;           // +1 when f_CW lies above the idle frequency
  double duration_offset = 0;  // ns added to every pulse to absorb the ramps

  void validate() const;
  /// Programmed length of a pulse rotating by |angle|.
  double pulse_duration(double angle) const;
  /// Relative axis angle produced by a programmed delay after a pulse ends.
  double axis_advance(double delay_ns) const;
};

void write_calibration(std::ostream& out, const Calibration& c);
Calibration read_calibration(std::istream& in);
Calibration load_calibration(const std::string& path);

// ---- calibration steps ----------------------------------------------------

struct AmplitudeCalibration {
  double delta_i_res = 0;
  double contrast = 0;                // fitted peak-to-peak Rabi amplitude at delta_i_res
  HeatMap chevron;                    // coarse scan
  std::vector<double> column_contrast;
};

/// Coarse chevron over `delta_i` x `durations`, per-column sinusoid fits, then
/// a golden-section refinement of the contrast maximum inside the best
/// bracket. Throws CalibrationError when the best contrast is below
/// `min_contrast` or sits on the scan edge.
AmplitudeCalibration calibrate_amplitude(const DeviceParams& p, const std::vector<double>& delta_i,
                                         const std::vector<double>& durations,
                                         const ScanOptions& opts = {}, double min_contrast = 0.5);

struct DurationCalibration {
  double t_pi = 0;
  double t_pi_err = 0;
  double duration_offset = 0;
  FitResult fit;  // CosineFringe on P_e versus programmed duration
  std::vector<double> durations;
  std::vector<double> pe;
};

DurationCalibration calibrate_duration(const DeviceParams& p, double delta_i_res,
                                       const std::vector<double>& durations,
                                       const ScanOptions& opts = {});

struct TimingCalibration {
  double axis_period = 0;
  double axis_period_err = 0;
  double phase_offset = 0;
  int axis_sign = 1;
  FitResult fit;  // CosineFringe on P_e versus programmed delay
  std::vector<double> delays;
  std::vector<double> pe;
};

/// Two pi/2 pulses separated by a plain delay. P_e = 1 means equal axes.
TimingCalibration calibrate_timing(const DeviceParams& p, double delta_i_res, double t_pi,
                                   double duration_offset, const std::vector<double>& delays,
                                   const ScanOptions& opts = {});

struct CalibrationPlan {
  std::vector<double> amplitude_delta_i;
  std::vector<double> amplitude_durations;
  std::vector<double> rabi_durations;
  std::vector<double> ramsey_delays;

  /// Scan ranges centred on the device's nominal resonance.
  static CalibrationPlan defaults_for(const DeviceParams& p);
};

struct FullCalibration {
  Calibration cal;
  AmplitudeCalibration amplitude;
  DurationCalibration duration;
  TimingCalibration timing;
};

FullCalibration calibrate(const DeviceParams& p, const CalibrationPlan& plan,
                          const ScanOptions& opts = {});

// ---- compilation ------------------------------------------------------------

/// One element of a gate program.
struct DemuxStep {
  enum class Kind { Pulse, Frame, Idle };
  Kind kind = Kind::Pulse;
  double angle = 0;  // Pulse: rotation; Frame: z angle
  double axis = 0;   // Pulse: axis angle
  double wait = 0;   // Idle: ns

  static DemuxStep pulse(double angle, double axis) { return {Kind::Pulse, angle, axis, 0}; }
  static DemuxStep frame(double z) { return {Kind::Frame, z, 0, 0}; }
  static DemuxStep idle(double ns) { return {Kind::Idle, 0, 0, ns}; }
};

using DemuxProgram = std::vector<DemuxStep>;

/// Product of the program's rotations (idle steps are identities).
Mat2 program_unitary(const DemuxProgram& prog);

/// Three in-plane rotations with amplitudes in {pi/2, pi} and free axes
/// whose product equals `u` up to phase. Amplitude triples are tried in
/// order of total rotation. Throws InvariantError if none converges.
DemuxProgram inplane_decomposition(const Mat2& u);

/// Names: "I", "X_pi", "X_pi/2", "Y_-pi/2", "T", "S", "H", "R(angle,axis)",
/// "Z(theta)". Throws std::invalid_argument for anything else.
DemuxProgram gate_program(const std::string& name);

struct CompileOptions {
  double rise_ns = 2.0;
  double delay_resolution_ns = 0;  // 0 = continuous
  double min_gap_ns = 0;
  double horizon_periods = 10;    // longest gap allowed, not counting Idle steps

  void validate() const;
};

struct DemuxPulse {
  FluxPulse flux;          // start is the programmed leading edge
  double rotation = 0;
  double axis_angle = 0;   // intended angle in the sequence frame
};

struct DemuxSequence {
  std::vector<DemuxPulse> pulses;
  double total_duration = 0;  // programmed, ns
  double frame_shift = 0;     // pending z angle not yet absorbed by a pulse

  /// Throws InvariantError on overlap or disorder.
  void validate() const;
};

/// Lays pulses out with the first-available-delay rule. A Frame step shifts
/// the axis of every later pulse; an Idle step lengthens the next gap.
/// Throws CalibrationError if an angle cannot be met within the horizon.
DemuxSequence compile_program(const DemuxProgram& prog, const Calibration& cal,
                              const CompileOptions& opts = {});
DemuxSequence compile_gate(const std::string& name, const Calibration& cal,
                           const CompileOptions& opts = {});

/// Device-side schedule: every gap gains the sequencer latency.
PulseSchedule to_schedule(const DemuxSequence& seq, const DeviceParams& p);

void write_sequence_csv(std::ostream& out, const DemuxSequence& seq);

// ---- execution ----------------------------------------------------------------

struct DemuxRunOptions {
  CompileOptions compile;
  double dt = 0;
  std::uint64_t seed = 0;  // flux distortion draws
};

/// Exact P(+meas) with preparation, gate and readout all made of flux pulses.
GateExecutor demux_executor(const DeviceParams& p, const Calibration& cal,
                            const std::string& gate, const DemuxRunOptions& opts = {});

struct QptGateResult {
  std::string gate;
  MeasurementRecord record;
  Reconstruction reconstruction;
  double fidelity = 0;
};

struct QptReport {
  std::vector<QptGateResult> gates;
  std::vector<FidelityRow> rows() const;
};

QptReport qpt_pipeline(const DeviceParams& p, const Calibration& cal,
                       const std::vector<std::string>& gates, const Shots& shots,
                       const DemuxRunOptions& opts = {}, unsigned jobs = 1,
                       const ReconstructionOptions& recon = {});

/// Benchmarking backend that plays compiled pulse lists as flux pulses.
/// Idle slots wait one pi-pulse length.
class DemuxBackend : public Backend {
 public:
  DemuxBackend(DeviceParams p, Calibration cal, DemuxRunOptions opts = {});
  Mat2 run(const PhysicalPulseList& pulses, Rng& rng) const override;
  double measure_ground(const Mat2& rho, const Shots& shots, Rng& rng) const override;

 private:
  DeviceParams p_;
  Calibration cal_;
  DemuxRunOptions opts_;
};

}  // namespace qdx
