#include "qdx/demuxyz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "qdx/error.hpp"
#include "qdx/kvconfig.hpp"

namespace qdx {

namespace {

constexpr double kTwoPi = 2 * kPi;

double wrap_2pi(double a) {
  const double r = std::fmod(a, kTwoPi);
  return r < 0 ? r + kTwoPi : r;
}

std::vector<double> column(const HeatMap& m, std::size_t c) {
  std::vector<double> out;
  out.reserve(m.rows.size());
  for (const auto& row : m.values) out.push_back(row[c]);
  return out;
}

/// Peak-to-peak amplitude of a Rabi trace; falls back to the raw range when
/// the sinusoid fit does not converge.
double rabi_contrast(const std::vector<double>& t, const std::vector<double>& pe) {
  const auto [lo, hi] = std::minmax_element(pe.begin(), pe.end());
  const double range = *hi - *lo;
  try {
    const auto fit = fit_nlls(FitModel::Sinusoid, t, pe);
    if (fit.converged && !fit.degenerate) return 2 * std::abs(fit.param("amp"));
  } catch (const std::exception&) {
  }
  return range;
}

}  // namespace

// ---- Calibration ---------------------------------------------------------------

void Calibration::validate() const {
  if (!(t_pi > 0) || !std::isfinite(t_pi)) throw ConfigError("calibration: t_pi must be positive");
  if (!(axis_period > 0) || !std::isfinite(axis_period)) {
    throw ConfigError("calibration: axis_period must be positive");
  }
  if (axis_sign != 1 && axis_sign != -1) throw ConfigError("calibration: axis_sign must be +1 or -1");
  if (!std::isfinite(delta_i_res) || !std::isfinite(phase_offset) ||
      !std::isfinite(duration_offset)) {
    throw ConfigError("calibration: non-finite parameter");
  }
}

double Calibration::pulse_duration(double angle) const {
  return std::abs(angle) / kPi * t_pi + duration_offset;
}

double Calibration::axis_advance(double delay_ns) const {
  return axis_sign * kTwoPi * delay_ns / axis_period + phase_offset;
}

void write_calibration(std::ostream& out, const Calibration& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "[calibration]\n"
                "delta_i_res_uA = %.12g\n"
                "t_pi_ns = %.12g\n"
                "axis_period_ns = %.12g\n"
                "phase_offset_rad = %.12g\n"
                "axis_sign = %d\n"
                "duration_offset_ns = %.12g\n",
                c.delta_i_res, c.t_pi, c.axis_period, c.phase_offset, c.axis_sign,
                c.duration_offset);
  out << buf;
}

namespace {

Calibration calibration_from_config(const KvConfig& cfg) {
  Calibration c;
  c.delta_i_res = cfg.get_double("calibration.delta_i_res_uA");
  c.t_pi = cfg.get_double("calibration.t_pi_ns");
  c.axis_period = cfg.get_double("calibration.axis_period_ns");
  c.phase_offset = cfg.get_double("calibration.phase_offset_rad");
  c.axis_sign = static_cast<int>(cfg.get_int("calibration.axis_sign", 1));
  c.duration_offset = cfg.get_double("calibration.duration_offset_ns", 0.0);
  cfg.check_all_used();
  c.validate();
  return c;
}

}  // namespace

Calibration read_calibration(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return calibration_from_config(KvConfig::parse(ss.str()));
}

Calibration load_calibration(const std::string& path) {
  return calibration_from_config(KvConfig::load(path));
}

// ---- calibration steps ------------------------------------------------------

AmplitudeCalibration calibrate_amplitude(const DeviceParams& p, const std::vector<double>& delta_i,
                                         const std::vector<double>& durations,
                                         const ScanOptions& opts, double min_contrast) {
  p.validate();
  if (delta_i.size() < 3) throw std::invalid_argument("calibrate_amplitude: need >= 3 amplitudes");
  if (!std::is_sorted(delta_i.begin(), delta_i.end())) {
    throw std::invalid_argument("calibrate_amplitude: amplitudes must be increasing");
  }
  AmplitudeCalibration out;
  out.chevron = rabi_chevron(p, delta_i, durations, p.rise_time_ns, opts);
  for (std::size_t c = 0; c < delta_i.size(); ++c) {
    out.column_contrast.push_back(rabi_contrast(durations, column(out.chevron, c)));
  }
  const auto best = static_cast<std::size_t>(
      std::max_element(out.column_contrast.begin(), out.column_contrast.end()) -
      out.column_contrast.begin());
  if (out.column_contrast[best] < min_contrast) {
    throw CalibrationError("calibrate_amplitude: no Rabi contrast above threshold in the scan");
  }
  if (best == 0 || best + 1 == delta_i.size()) {
    throw CalibrationError("calibrate_amplitude: contrast peaks at the scan edge; resonance not bracketed");
  }

  int evals = 0;
  auto contrast_at = [&](double di) {
    ScanOptions o = opts;
    o.seed = derive_seed(opts.seed, 0xa11u, static_cast<std::uint64_t>(++evals));
    o.jobs = opts.jobs;
    const HeatMap m = rabi_chevron(p, {di}, durations, p.rise_time_ns, o);
    return rabi_contrast(durations, column(m, 0));
  };
  // Golden-section search for the maximum inside the bracketing neighbours.
  const double g = (std::sqrt(5.0) - 1) / 2;
  double a = delta_i[best - 1], b = delta_i[best + 1];
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = contrast_at(x1), f2 = contrast_at(x2);
  const double tol = 1e-4 * std::abs(delta_i.back() - delta_i.front());
  while (b - a > tol) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = contrast_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = contrast_at(x2);
    }
  }
  out.delta_i_res = f1 > f2 ? x1 : x2;
  out.contrast = std::max(f1, f2);
  return out;
}

DurationCalibration calibrate_duration(const DeviceParams& p, double delta_i_res,
                                       const std::vector<double>& durations,
                                       const ScanOptions& opts) {
  DurationCalibration out;
  out.durations = durations;
  out.pe = column(rabi_chevron(p, {delta_i_res}, durations, p.rise_time_ns, opts), 0);
  out.fit = fit_nlls(FitModel::CosineFringe, durations, out.pe);
  if (!out.fit.converged || out.fit.degenerate) {
    throw FitError("calibrate_duration: Rabi fit did not converge");
  }
  const double f = out.fit.param("freq");
  if (!(f > 0)) throw FitError("calibrate_duration: non-positive Rabi frequency");
  out.t_pi = 1 / (2 * f);
  out.t_pi_err = out.fit.error("freq") / (2 * f * f);
  // P_e = 1/2 - 1/2 cos(2 pi f (t - d0)): the fitted phase is pi - 2 pi f d0.
  double d0 = (kPi - out.fit.param("phase")) / (kTwoPi * f);
  d0 = std::remainder(d0, 2 * out.t_pi);
  out.duration_offset = d0;
  return out;
}

TimingCalibration calibrate_timing(const DeviceParams& p, double delta_i_res, double t_pi,
                                   double duration_offset, const std::vector<double>& delays,
                                   const ScanOptions& opts) {
  if (!(t_pi > 0)) throw std::invalid_argument("calibrate_timing: t_pi must be positive");
  TimingCalibration out;
  out.delays = delays;
  const RamseyAxisSetup setup{delta_i_res, t_pi / 2 + duration_offset, p.rise_time_ns};
  out.pe = column(ramsey_axis_scan(p, setup, {0.0}, delays, opts), 0);
  out.fit = fit_nlls(FitModel::CosineFringe, delays, out.pe);
  if (!out.fit.converged || out.fit.degenerate) {
    throw FitError("calibrate_timing: Ramsey fit did not converge");
  }
  const double f = out.fit.param("freq");
  if (!(f > 0)) throw FitError("calibrate_timing: non-positive fringe frequency");
  out.axis_period = 1 / f;
  out.axis_period_err = out.fit.error("freq") / (f * f);
  // A cosine fit cannot tell which way the axis turns; the drive sits above
  // or below the idle frequency by construction of the device.
  out.axis_sign = p.f_cw_ghz >= p.idle_frequency() ? 1 : -1;
  out.phase_offset = out.axis_sign * out.fit.param("phase");
  return out;
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (n - 1);
  return v;
}

}  // namespace

CalibrationPlan CalibrationPlan::defaults_for(const DeviceParams& p) {
  CalibrationPlan plan;
  plan.amplitude_delta_i = currents_for_detunings(p, linspace(-0.03, 0.03, 21));
  if (plan.amplitude_delta_i.front() > plan.amplitude_delta_i.back()) {
    std::reverse(plan.amplitude_delta_i.begin(), plan.amplitude_delta_i.end());
  }
  const double edge = 2 * p.rise_time_ns;
  plan.amplitude_durations = linspace(edge, edge + 196, 50);
  plan.rabi_durations = linspace(edge, edge + 240, 121);
  plan.ramsey_delays = linspace(0, 40, 401);
  return plan;
}

FullCalibration calibrate(const DeviceParams& p, const CalibrationPlan& plan,
                          const ScanOptions& opts) {
  FullCalibration out;
  ScanOptions o = opts;
  o.seed = derive_seed(opts.seed, 1);
  out.amplitude = calibrate_amplitude(p, plan.amplitude_delta_i, plan.amplitude_durations, o);
  o.seed = derive_seed(opts.seed, 2);
  out.duration = calibrate_duration(p, out.amplitude.delta_i_res, plan.rabi_durations, o);
  o.seed = derive_seed(opts.seed, 3);
  out.timing = calibrate_timing(p, out.amplitude.delta_i_res, out.duration.t_pi,
                                out.duration.duration_offset, plan.ramsey_delays, o);
  out.cal.delta_i_res = out.amplitude.delta_i_res;
  out.cal.t_pi = out.duration.t_pi;
  out.cal.duration_offset = out.duration.duration_offset;
  out.cal.axis_period = out.timing.axis_period;
  out.cal.phase_offset = out.timing.phase_offset;
  out.cal.axis_sign = out.timing.axis_sign;
  out.cal.validate();
  return out;
}

// ---- programs ---------------------------------------------------------------------

Mat2 program_unitary(const DemuxProgram& prog) {
  Mat2 u = Mat2::Identity();
  for (const auto& s : prog) {
    switch (s.kind) {
      case DemuxStep::Kind::Pulse: u = (inplane_rotation(s.axis, s.angle) * u).eval(); break;
      case DemuxStep::Kind::Frame: u = (z_rotation(s.angle) * u).eval(); break;
      case DemuxStep::Kind::Idle: break;
    }
  }
  return u;
}

namespace {

using Axes3 = std::array<double, 3>;

double decomposition_cost(const Mat2& u, const Axes3& amp, const Axes3& phi) {
  const Mat2 v = inplane_rotation(phi[2], amp[2]) * inplane_rotation(phi[1], amp[1]) *
                 inplane_rotation(phi[0], amp[0]);
  return 1 - std::norm((v.adjoint() * u).trace()) / 4;
}

/// Nelder-Mead on the three axis angles.
Axes3 refine_axes(const Mat2& u, const Axes3& amp, const Axes3& start) {
  std::array<Axes3, 4> s;
  std::array<double, 4> f;
  s[0] = start;
  for (int k = 0; k < 3; ++k) {
    s[k + 1] = start;
    s[k + 1][k] += 0.1;
  }
  for (int k = 0; k < 4; ++k) f[k] = decomposition_cost(u, amp, s[k]);
  auto point = [](const Axes3& c, const Axes3& w, double t) {
    Axes3 r;
    for (int k = 0; k < 3; ++k) r[k] = c[k] + t * (w[k] - c[k]);
    return r;
  };
  for (int it = 0; it < 4000; ++it) {
    std::array<int, 4> idx = {0, 1, 2, 3};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return f[a] < f[b]; });
    const int lo = idx[0], hi = idx[3], second = idx[2];
    if (f[hi] - f[lo] < 1e-18 && f[lo] < 1e-16) break;
    Axes3 c = {0, 0, 0};
    for (int k = 0; k < 4; ++k)
      if (k != hi)
        for (int j = 0; j < 3; ++j) c[j] += s[k][j] / 3;
    const Axes3 xr = point(c, s[hi], -1);
    const double fr = decomposition_cost(u, amp, xr);
    if (fr < f[lo]) {
      const Axes3 xe = point(c, s[hi], -2);
      const double fe = decomposition_cost(u, amp, xe);
      if (fe < fr) {
        s[hi] = xe;
        f[hi] = fe;
      } else {
        s[hi] = xr;
        f[hi] = fr;
      }
    } else if (fr < f[second]) {
      s[hi] = xr;
      f[hi] = fr;
    } else {
      const Axes3 xc = point(c, s[hi], 0.5);
      const double fc = decomposition_cost(u, amp, xc);
      if (fc < f[hi]) {
        s[hi] = xc;
        f[hi] = fc;
      } else {
        for (int k = 0; k < 4; ++k) {
          if (k == lo) continue;
          s[k] = point(s[lo], s[k], 0.5);
          f[k] = decomposition_cost(u, amp, s[k]);
        }
      }
    }
  }
  const auto best = std::min_element(f.begin(), f.end()) - f.begin();
  return s[static_cast<std::size_t>(best)];
}

}  // namespace

DemuxProgram inplane_decomposition(const Mat2& u) {
  if (!is_unitary(u, 1e-8)) throw std::invalid_argument("inplane_decomposition: not unitary");
  std::vector<Axes3> amps;
  for (int m = 0; m < 8; ++m) {
    amps.push_back({(m & 1) ? kPi : kPi / 2, (m & 2) ? kPi : kPi / 2, (m & 4) ? kPi : kPi / 2});
  }
  std::stable_sort(amps.begin(), amps.end(), [](const Axes3& a, const Axes3& b) {
    return a[0] + a[1] + a[2] < b[0] + b[1] + b[2];
  });
  constexpr int kGrid = 24;
  for (const auto& amp : amps) {
    std::vector<std::pair<double, Axes3>> starts;
    for (int i = 0; i < kGrid; ++i)
      for (int j = 0; j < kGrid; ++j)
        for (int k = 0; k < kGrid; ++k) {
          const Axes3 phi = {kTwoPi * i / kGrid, kTwoPi * j / kGrid, kTwoPi * k / kGrid};
          starts.emplace_back(decomposition_cost(u, amp, phi), phi);
        }
    std::partial_sort(starts.begin(), starts.begin() + 4, starts.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
    for (int s = 0; s < 4; ++s) {
      Axes3 phi = refine_axes(u, amp, starts[static_cast<std::size_t>(s)].second);
      DemuxProgram prog;
      for (int k = 0; k < 3; ++k) prog.push_back(DemuxStep::pulse(amp[k], wrap_2pi(phi[k])));
      if (phase_distance(program_unitary(prog), u) < 1e-7) return prog;
    }
  }
  throw InvariantError("inplane_decomposition: no three-pulse solution found");
}

namespace {

/// Parses "NAME(a)" or "NAME(a,b)" into numbers; false if the prefix differs.
bool parse_call(const std::string& name, const std::string& prefix, std::vector<double>& args) {
  if (name.rfind(prefix + "(", 0) != 0 || name.back() != ')') return false;
  std::string inner = name.substr(prefix.size() + 1, name.size() - prefix.size() - 2);
  std::replace(inner.begin(), inner.end(), ',', ' ');
  std::istringstream ss(inner);
  double v;
  while (ss >> v) args.push_back(v);
  if (!ss.eof()) throw std::invalid_argument("gate '" + name + "': bad numeric argument");
  return true;
}

const DemuxProgram& stored_decomposition(const std::string& name) {
  static std::mutex mu;
  static std::map<std::string, DemuxProgram> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, inplane_decomposition(ideal_gate(name))).first;
  return it->second;
}

}  // namespace

DemuxProgram gate_program(const std::string& name) {
  if (name == "I") return {};
  if (name == "X_pi") return {DemuxStep::pulse(kPi, 0)};
  if (name == "X_pi/2") return {DemuxStep::pulse(kPi / 2, 0)};
  if (name == "Y_-pi/2") return {DemuxStep::pulse(kPi / 2, -kPi / 2)};
  if (name == "T" || name == "S" || name == "H") return stored_decomposition(name);
  std::vector<double> args;
  if (parse_call(name, "R", args)) {
    if (args.size() != 2) throw std::invalid_argument("gate R(angle,axis) takes two arguments");
    return {DemuxStep::pulse(args[0], args[1])};
  }
  if (parse_call(name, "Z", args)) {
    if (args.size() != 1) throw std::invalid_argument("gate Z(theta) takes one argument");
    return {DemuxStep::frame(args[0])};
  }
  throw std::invalid_argument("unknown gate name '" + name + "'");
}

// ---- compilation ------------------------------------------------------------------

void CompileOptions::validate() const {
  if (!(rise_ns >= 0)) throw std::invalid_argument("rise_ns must be non-negative");
  if (!(delay_resolution_ns >= 0)) throw std::invalid_argument("delay_resolution_ns must be >= 0");
  if (!(min_gap_ns >= 0)) throw std::invalid_argument("min_gap_ns must be >= 0");
  if (!(horizon_periods > 0)) throw std::invalid_argument("horizon_periods must be positive");
}

void DemuxSequence::validate() const {
  double prev_end = 0;
  for (std::size_t k = 0; k < pulses.size(); ++k) {
    const auto& f = pulses[k].flux;
    if (!(f.duration > 0)) throw InvariantError("demux pulse " + std::to_string(k) + " has no length");
    if (f.start < prev_end - 1e-9) {
      throw InvariantError("demux pulse " + std::to_string(k) + " overlaps its predecessor");
    }
    prev_end = f.end();
  }
  if (total_duration < prev_end - 1e-9) throw InvariantError("demux sequence overruns its duration");
}

DemuxSequence compile_program(const DemuxProgram& prog, const Calibration& cal,
                              const CompileOptions& opts) {
  cal.validate();
  opts.validate();
  DemuxSequence seq;
  double shift = 0;        // accumulated frame angle
  double wait = 0;         // idle time owed before the next pulse
  double prev_end = 0;
  double prev_axis = 0;
  const double horizon = opts.horizon_periods * cal.axis_period;
  for (const auto& step : prog) {
    if (step.kind == DemuxStep::Kind::Frame) {
      shift += step.angle;
      continue;
    }
    if (step.kind == DemuxStep::Kind::Idle) {
      if (step.wait < 0) throw std::invalid_argument("idle step with negative length");
      wait += step.wait;
      continue;
    }
    double angle = step.angle, axis = step.axis;
    if (angle == 0) continue;
    if (angle < 0) {
      angle = -angle;
      axis += kPi;
    }
    // Shifting later axes by +a realises Rz(-a) in between.
    const double target = axis - shift;
    DemuxPulse dp;
    dp.rotation = angle;
    dp.axis_angle = target;
    dp.flux.delta_i = cal.delta_i_res;
    dp.flux.rise_time = opts.rise_ns;
    dp.flux.duration = cal.pulse_duration(angle);
    if (seq.pulses.empty()) {
      dp.flux.start = wait;
    } else {
      const double earliest = opts.min_gap_ns + wait;
      const double turn = wrap_2pi(cal.axis_sign * (target - prev_axis - cal.phase_offset));
      double d = turn / kTwoPi * cal.axis_period;
      const double r = opts.delay_resolution_ns;
      auto snap = [r](double x) { return r > 0 ? std::round(x / r) * r : x; };
      while (snap(d) < earliest - 1e-12) d += cal.axis_period;
      d = snap(d);
      if (d - wait > horizon) {
        throw CalibrationError("compile: required delay exceeds " +
                               std::to_string(opts.horizon_periods) + " axis periods");
      }
      dp.flux.start = prev_end + d;
    }
    wait = 0;
    prev_end = dp.flux.end();
    prev_axis = target;
    seq.pulses.push_back(dp);
  }
  seq.total_duration = prev_end + wait;
  seq.frame_shift = shift;
  if (seq.pulses.empty() && shift != 0) {
    // A lone z rotation is the delay that would advance the next axis by -shift.
    seq.total_duration += wrap_2pi(-cal.axis_sign * shift) / kTwoPi * cal.axis_period;
  }
  seq.validate();
  return seq;
}

DemuxSequence compile_gate(const std::string& name, const Calibration& cal,
                           const CompileOptions& opts) {
  return compile_program(gate_program(name), cal, opts);
}

PulseSchedule to_schedule(const DemuxSequence& seq, const DeviceParams& p) {
  PulseSchedule s;
  s.drive = p.drive_mode;
  s.drive_amplitude = p.drive_amplitude_v;
  double lag = 0;
  for (std::size_t k = 0; k < seq.pulses.size(); ++k) {
    if (k > 0) lag += p.latency_ns;
    FluxPulse f = seq.pulses[k].flux;
    f.start += lag;
    s.pulses.push_back(f);
  }
  s.total_duration = seq.total_duration + lag;
  s.validate();
  return s;
}

void write_sequence_csv(std::ostream& out, const DemuxSequence& seq) {
  out << "pulse_index,start_ns,duration_ns,delta_i_uA,axis_angle_rad\n";
  char buf[160];
  for (std::size_t k = 0; k < seq.pulses.size(); ++k) {
    const auto& p = seq.pulses[k];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.9f\n", k, p.flux.start, p.flux.duration,
                  p.flux.delta_i, wrap_2pi(p.axis_angle));
    out << buf;
  }
}

// ---- execution ----------------------------------------------------------------------

namespace {

bool has_distortion(const DeviceParams& p) {
  const auto& d = p.distortion;
  return d.amplitude_error != 0 || d.timing_jitter_ns > 0 || d.settle_fraction != 0;
}

/// Final state after playing `prog` from |g>.
State play(const DeviceParams& p, const Calibration& cal, const DemuxProgram& prog,
           const DemuxRunOptions& opts, Rng& rng) {
  PulseSchedule s = to_schedule(compile_program(prog, cal, opts.compile), p);
  if (has_distortion(p)) s = distort(p, s, rng);
  return evolve(p, s, State::ground(), {opts.dt, false}).final_state;
}

Mat2 ideal_for(const std::string& gate) {
  try {
    return ideal_gate(gate);
  } catch (const std::invalid_argument&) {
    return program_unitary(gate_program(gate));
  }
}

}  // namespace

GateExecutor demux_executor(const DeviceParams& p, const Calibration& cal, const std::string& gate,
                            const DemuxRunOptions& opts) {
  p.validate();
  cal.validate();
  const DemuxProgram body = gate_program(gate);
  return [p, cal, body, opts](Axis prep, Axis meas) {
    DemuxProgram prog;
    if (const auto r = preparation_rotation(prep)) prog.push_back(DemuxStep::pulse(r->angle, r->phi));
    prog.insert(prog.end(), body.begin(), body.end());
    if (const auto r = measurement_rotation(meas)) prog.push_back(DemuxStep::pulse(r->angle, r->phi));
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(prep),
                        static_cast<std::uint64_t>(meas)));
    const State rho = play(p, cal, prog, opts, rng);
    return 1 - observed_pe(rho.excited_population(), p);
  };
}

std::vector<FidelityRow> QptReport::rows() const {
  std::vector<FidelityRow> out;
  for (const auto& g : gates) out.push_back({g.gate, g.fidelity});
  return out;
}

QptReport qpt_pipeline(const DeviceParams& p, const Calibration& cal,
                       const std::vector<std::string>& gates, const Shots& shots,
                       const DemuxRunOptions& opts, unsigned jobs,
                       const ReconstructionOptions& recon) {
  QptReport report;
  for (std::size_t g = 0; g < gates.size(); ++g) {
    DemuxRunOptions o = opts;
    o.seed = derive_seed(opts.seed, g, 1);
    QptGateResult r;
    r.gate = gates[g];
    const Mat2 ideal = ideal_for(gates[g]);
    Rng rng(derive_seed(opts.seed, g, 2));
    r.record = qpt_record(demux_executor(p, cal, gates[g], o), shots, rng, jobs);
    r.reconstruction = reconstruct(r.record, recon);
    r.fidelity = average_gate_fidelity(r.reconstruction.choi, ideal);
    report.gates.push_back(std::move(r));
  }
  return report;
}

DemuxBackend::DemuxBackend(DeviceParams p, Calibration cal, DemuxRunOptions opts)
    : p_(std::move(p)), cal_(cal), opts_(opts) {
  p_.validate();
  cal_.validate();
  opts_.compile.validate();
}

Mat2 DemuxBackend::run(const PhysicalPulseList& pl, Rng& rng) const {
  DemuxProgram prog;
  std::size_t idle = 0;
  const double slot = cal_.pulse_duration(kPi);
  for (std::size_t k = 0; k <= pl.pulses.size(); ++k) {
    while (idle < pl.idle_positions.size() &&
           static_cast<std::size_t>(pl.idle_positions[idle]) == k) {
      prog.push_back(DemuxStep::idle(slot));
      ++idle;
    }
    if (k < pl.pulses.size()) {
      prog.push_back(DemuxStep::pulse(pl.pulses[k].rotation, pl.pulses[k].axis_angle));
    }
  }
  return play(p_, cal_, prog, opts_, rng).matrix();
}

double DemuxBackend::measure_ground(const Mat2& rho, const Shots& shots, Rng& rng) const {
  const double pe = std::clamp(rho(1, 1).real(), 0.0, 1.0);
  return sample_probability(1 - observed_pe(pe, p_), shots, rng);
}

}  // namespace qdx
