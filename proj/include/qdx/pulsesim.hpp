#pragma once

// Time-domain simulation of a flux-tunable qubit in the frame rotating at the
// drive frequency. Units: time ns, frequency GHz (drive strengths MHz in the
// device file), current uA, coherence times us.

#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "qdx/core.hpp"
#include "qdx/kvconfig.hpp"
#include "qdx/random.hpp"

namespace qdx {

struct TlsDip {
  double center_ghz = 0;
  double width_mhz = 0;  // full width at half maximum of the added rate
  double t1_us = 0;      // 1/rate at the dip center
};

/// Imperfections of the flux line, used by realism runs only.
struct FluxDistortion {
  double amplitude_error = 0;   // relative, multiplies every pulse amplitude
  double timing_jitter_ns = 0;  // rms of a Gaussian shift of each pulse start
  double settle_fraction = 0;   // exponential tail amplitude after each pulse, relative
  double settle_tau_ns = 10;
};

enum class DriveMode {
  Off,
  Continuous,  // drive present at all times
  Gated,       // drive present only while a flux pulse is active
};

struct DeviceParams {
  double f_max_ghz = 4.82510;
  double i_offset_ua = 87.5901;
  double i_period_ua = 451.680;
  double i_idle_ua = 32.0;
  double f_cw_ghz = 4.745;
  double rabi_per_volt_mhz = 12.30;
  double drive_amplitude_v = 1.0;
  DriveMode drive_mode = DriveMode::Continuous;
  double t1_us = std::numeric_limits<double>::infinity();
  double t2_us = std::numeric_limits<double>::infinity();
  std::vector<TlsDip> tls_dips;
  double visibility = 1.0;
  double readout_f_ghz = 5.032;
  double rise_time_ns = 2.0;
  double latency_ns = 0.0;  // dead time the sequencer inserts between consecutive flux pulses
  FluxDistortion distortion;

  /// Throws ConfigError when an invariant fails.
  void validate() const;
  double idle_frequency() const;
  double rabi_ghz(double drive_volts) const { return rabi_per_volt_mhz * drive_volts * 1e-3; }
  double rabi_ghz() const { return rabi_ghz(drive_amplitude_v); }
  bool decoherent() const;
};

/// Reads the [device] section. `idle_f_ghz` may replace `i_idle_ua`; the
/// current is then solved on the branch below i_offset.
DeviceParams device_from_config(const KvConfig& cfg);
DeviceParams load_device(const std::string& path);
void write_device(std::ostream& out, const DeviceParams& p);

double freq_from_current(const DeviceParams& p, double i_net_ua);
/// Inverse of freq_from_current on the branch containing `branch_hint_ua`
/// (below or above i_offset within the same period).
double current_from_freq(const DeviceParams& p, double f_ghz, double branch_hint_ua);
/// Flux-pulse amplitude that moves the qubit from idle to `f_ghz`.
double delta_i_for_frequency(const DeviceParams& p, double f_ghz);
double t1_at(const DeviceParams& p, double f_ghz);  // us

struct FluxPulse {
  double delta_i = 0;    // uA
  double start = 0;      // ns
  double duration = 0;   // ns, including both ramps
  double rise_time = 0;  // ns

  double end() const { return start + duration; }
  /// Envelope in [0, 1]: linear ramps of length min(rise, duration/2).
  double envelope(double t) const;
};

struct PulseSchedule {
  std::vector<FluxPulse> pulses;
  double total_duration = 0;
  double drive_amplitude = 1.0;  // V
  DriveMode drive = DriveMode::Continuous;

  /// Throws std::invalid_argument on overlap, disorder or overrun.
  void validate() const;
};

struct SimResult {
  std::vector<double> times;
  std::vector<double> pe;
  State final_state;
};

struct EvolveOptions {
  double dt = 0;        // 0 selects auto_dt
  bool record = false;  // fill times/pe at every step
};

/// Largest step satisfying the resolution rule for this schedule.
double auto_dt(const DeviceParams& p, const PulseSchedule& s);

/// Throws std::invalid_argument when dt resolves the fastest driven rotation
/// too coarsely, InvariantError when the state leaves the physical set.
SimResult evolve(const DeviceParams& p, const PulseSchedule& s, const State& rho0,
                 const EvolveOptions& opts = {});

/// Noiseless propagator of the whole schedule (decoherence ignored).
Mat2 schedule_unitary(const DeviceParams& p, const PulseSchedule& s, double dt = 0);

/// Applies amplitude error, start jitter and settling from p.distortion.
PulseSchedule distort(const DeviceParams& p, const PulseSchedule& s, Rng& rng);

/// Visibility-compressed excited-state probability, optionally sampled.
double observed_pe(double pe, const DeviceParams& p);
double measure(const State& rho, const DeviceParams& p, const Shots& shots, Rng& rng);

struct HeatMap {
  std::string row_label;
  std::string col_label;
  std::vector<double> rows;
  std::vector<double> cols;
  std::vector<std::vector<double>> values;  // [row][col]

  double at(std::size_t r, std::size_t c) const { return values[r][c]; }
};

void write_heatmap_csv(std::ostream& out, const HeatMap& m);

struct ScanOptions {
  Shots shots = Shots::infinite();
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  double dt = 0;
};

/// Rows: pulse duration t; columns: flux amplitude delta_i. One evolve per
/// cell from |g>, single pulse of rise time `rise_ns`.
HeatMap rabi_chevron(const DeviceParams& p, const std::vector<double>& delta_i,
                     const std::vector<double>& durations, double rise_ns,
                     const ScanOptions& opts = {});

/// Flux amplitudes that place the qubit at f_CW + detuning for each entry.
std::vector<double> currents_for_detunings(const DeviceParams& p,
                                           const std::vector<double>& detunings_ghz);

/// Mismatch between mirrored columns (c, n-1-c), relative to their sum.
double chevron_asymmetry(const HeatMap& m);

struct RamseyAxisSetup {
  double delta_i_res = 0;
  double t_half = 0;       // pi/2 pulse duration including ramps
  double rise_ns = 0;
};

/// Two pi/2 pulses around a middle pulse of amplitude delta_i_mid and length
/// dt_mid. A zero-amplitude middle pulse is a plain delay. Rows: dt_mid;
/// columns: delta_i_mid.
HeatMap ramsey_axis_scan(const DeviceParams& p, const RamseyAxisSetup& setup,
                         const std::vector<double>& delta_i_mid, const std::vector<double>& dt_mid,
                         const ScanOptions& opts = {});

/// Rows: hold time; columns: qubit frequency. Drive off throughout.
struct SwapSpectroscopy {
  HeatMap pe;                 // raw excited-state probability
  HeatMap prepared_survival;  // probability of reading back the prepared state
};

SwapSpectroscopy swap_spectroscopy(const DeviceParams& p, bool prepare_excited,
                                   const std::vector<double>& freqs_ghz,
                                   const std::vector<double>& hold_ns, const ScanOptions& opts = {});

/// Mean of the five largest minus mean of the five smallest entries.
double delta_pe5(const std::vector<double>& column);

struct OnOffResult {
  HeatMap stat;  // rows: drive amplitude; columns: the maps' columns
  double ratio = 0;
};

/// One chevron map per drive amplitude; statistic per column over its rows.
OnOffResult on_off_stats(const std::vector<HeatMap>& maps, const std::vector<double>& drive_v);

}  // namespace qdx
