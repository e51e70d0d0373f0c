// qdx: command-line front end. Every subcommand writes CSV or plain-text
// files into the output directory; see README.md for the config schema.

#include <CLI11.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "cli_context.hpp"
#include "qdx/analysis.hpp"
#include "qdx/benchmarking.hpp"
#include "qdx/demuxyz.hpp"
#include "qdx/error.hpp"
#include "qdx/matrix_io.hpp"
#include "qdx/tomography.hpp"

using namespace qdx;
using namespace qdx::cli;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kFit = 3, kCalibration = 4, kInvariant = 5 };

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

/// File-name-safe form of a gate name: "Y_-pi/2" -> "Y_-pi_2".
std::string slug(const std::string& name) {
  std::string s;
  for (char c : name) s += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
  return s;
}

void plan(const Context& ctx, const std::string& what) {
  std::cout << "plan " << ctx.command() << ": " << what << "\n"
            << "seed " << ctx.seed() << ", jobs " << ctx.jobs() << ", output "
            << ctx.out_dir().string() << "\n";
}

// ---- benchmarking -----------------------------------------------------------------

GateNoiseModel noise_from(const Context& ctx) {
  GateNoiseModel n;
  const auto& c = ctx.config();
  n.depolarizing = c.get_double("noise.depolarizing", 0.0);
  n.amplitude_damping = c.get_double("noise.amplitude_damping", 0.0);
  n.overrotation = c.get_double("noise.overrotation", 0.0);
  n.axis_error = c.get_double("noise.axis_error", 0.0);
  n.validate();
  return n;
}

RBConfig rb_config(const Context& ctx, const std::string& s, int last, int count, int sequences) {
  const auto& c = ctx.config();
  RBConfig r;
  if (c.has(s + ".lengths")) {
    for (double m : c.get_doubles(s + ".lengths")) r.lengths.push_back(static_cast<int>(m));
  } else {
    r.lengths = log_spaced_lengths(static_cast<int>(c.get_int(s + ".length_first", 1)),
                                   static_cast<int>(c.get_int(s + ".length_last", last)),
                                   static_cast<int>(c.get_int(s + ".length_count", count)));
  }
  r.sequences_per_length = static_cast<int>(c.get_int(s + ".sequences", sequences));
  r.shots = ctx.shots(s + ".shots", 0);
  r.seed = ctx.seed();
  r.jobs = ctx.jobs();
  r.seconds_per_sequence = c.get_double(s + ".seconds_per_sequence", 0.0);
  r.validate();
  return r;
}

std::unique_ptr<Backend> make_backend(Context& ctx, const std::string& s) {
  const std::string kind = ctx.config().get_string(s + ".backend", "channel");
  if (kind == "channel") {
    const double vis = ctx.config().get_double("noise.visibility", 1.0);
    return std::make_unique<ChannelBackend>(noise_from(ctx), vis);
  }
  if (kind == "pulse") {
    const DeviceParams p = ctx.device("device_demux.cfg");
    const std::string cal_path = ctx.config().get_string(s + ".calibration", "");
    Calibration cal;
    if (cal_path.empty()) {
      cal = calibrate(p, CalibrationPlan::defaults_for(p)).cal;
    } else {
      ctx.hash_file(ctx.resolve(cal_path));
      cal = load_calibration(ctx.resolve(cal_path));
    }
    return std::make_unique<DemuxBackend>(p, cal);
  }
  throw ConfigError(s + ".backend must be 'channel' or 'pulse'");
}

void write_rb_fit(std::ostream& out, const RBFit& f) {
  write_fit_report(out, f.fit);
  out << "F_avg " << fmt("%.9f", f.fidelity) << " " << fmt("%.3g", f.fidelity_err) << "\n";
}

int cmd_rb(Context& ctx) {
  const auto cfg = rb_config(ctx, "rb", 1000, 15, 30);
  const bool weighted = ctx.config().get_bool("rb.weighted_fit", false);
  auto backend = make_backend(ctx, "rb");
  ctx.finish_config();
  if (ctx.dry_run()) {
    plan(ctx, std::to_string(cfg.lengths.size()) + " lengths up to " +
                  std::to_string(cfg.lengths.back()) + ", " +
                  std::to_string(cfg.sequences_per_length) + " sequences per length");
    return kOk;
  }
  const auto rec = run_rb(*backend, cfg);
  {
    auto out = ctx.open("rb_decay.csv");
    write_decay_csv(out, rec);
  }
  ctx.announce("rb_decay.csv");
  const auto fit = fit_rb(rec, weighted);
  {
    auto out = ctx.open("rb_fit.txt");
    write_rb_fit(out, fit);
  }
  std::cout << "F_avg = " << fmt("%.6f", fit.fidelity) << " +- " << fmt("%.2g", fit.fidelity_err)
            << "  (p = " << fmt("%.6f", fit.p) << ")\n";
  ctx.announce("rb_fit.txt");
  return kOk;
}

int cmd_pb(Context& ctx) {
  const auto cfg = rb_config(ctx, "pb", 1000, 15, 30);
  const bool bias = ctx.config().get_bool("pb.bias_correct", false);
  const bool weighted = ctx.config().get_bool("pb.weighted_fit", false);
  auto backend = make_backend(ctx, "pb");
  ctx.finish_config();
  if (ctx.dry_run()) {
    plan(ctx, std::to_string(cfg.lengths.size()) + " lengths x " +
                  std::to_string(cfg.sequences_per_length) + " sequences x 3 readouts");
    return kOk;
  }
  const auto rec = run_pb(*backend, cfg, bias);
  {
    auto out = ctx.open("pb_purity.csv");
    write_decay_csv(out, rec.purity);
  }
  {
    auto out = ctx.open("pb_ground.csv");
    write_decay_csv(out, rec.ground);
  }
  ctx.announce("pb_purity.csv");
  ctx.announce("pb_ground.csv");
  const auto pb = fit_pb(rec.purity, weighted);
  const auto rb = fit_rb(rec.ground, weighted);
  const auto coh = coherent_error(1 - rb.fidelity, pb.eps_inc);
  {
    auto out = ctx.open("pb_fit.txt");
    write_fit_report(out, pb.fit);
    out << "eps_inc " << fmt("%.9g", pb.eps_inc) << " " << fmt("%.3g", pb.eps_inc_err) << "\n";
    write_rb_fit(out, rb);
    out << "eps_coh " << fmt("%.9g", coh.value) << (coh.negative ? " negative" : "") << "\n";
  }
  std::cout << "u = " << fmt("%.6f", pb.u) << ", eps_inc = " << fmt("%.3g", pb.eps_inc)
            << ", F_avg = " << fmt("%.6f", rb.fidelity) << ", eps_coh = " << fmt("%.3g", coh.value)
            << "\n";
  ctx.announce("pb_fit.txt");
  return kOk;
}

StabilityConfig stability_config(Context& ctx) {
  StabilityConfig s;
  s.rb = rb_config(ctx, "stability", 3000, 19, 1);
  s.iterations = static_cast<int>(ctx.config().get_int("stability.iterations", 4800));
  s.window = static_cast<int>(ctx.config().get_int("stability.window", 30));
  s.iteration_period_s = ctx.config().get_double("stability.period_s", 30.0);
  if (s.iterations < 1 || s.window < 1) throw ConfigError("stability: iterations and window >= 1");
  return s;
}

void write_series(std::ostream& out, const StabilitySeries& s) {
  out << "time_s,fidelity,fidelity_err,window\n";
  char buf[128];
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.3f,%.12g,%.6g,%d\n", s.times[k], s.fidelity[k],
                  s.fidelity_err[k], s.window_used[k]);
    out << buf;
  }
}

int cmd_stability(Context& ctx) {
  const auto cfg = stability_config(ctx);
  auto backend = make_backend(ctx, "stability");
  ctx.finish_config();
  if (ctx.dry_run()) {
    plan(ctx, std::to_string(cfg.iterations) + " iterations x " +
                  std::to_string(cfg.rb.lengths.size()) + " lengths, window " +
                  std::to_string(cfg.window));
    return kOk;
  }
  const auto series = temporal_stability(*backend, cfg);
  {
    auto out = ctx.open("stability.csv");
    write_series(out, series);
  }
  std::cout << "mean F_avg = "
            << fmt("%.6f", std::accumulate(series.fidelity.begin(), series.fidelity.end(), 0.0) /
                               static_cast<double>(series.fidelity.size()))
            << "\n";
  ctx.announce("stability.csv");
  return kOk;
}

/// Two numeric columns (time, value) from a CSV; '#' lines and a text header
/// row are skipped.
TimeSeries read_series(const std::string& path, int time_col, int value_col) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  TimeSeries s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const auto need = static_cast<std::size_t>(std::max(time_col, value_col));
    if (cells.size() <= need) throw ConfigError(path + ": too few columns");
    try {
      s.times.push_back(std::stod(cells[static_cast<std::size_t>(time_col)]));
      s.values.push_back(std::stod(cells[static_cast<std::size_t>(value_col)]));
    } catch (const std::logic_error&) {
      if (!s.times.empty()) throw ConfigError(path + ": non-numeric row '" + line + "'");
    }
  }
  return s;
}

int cmd_allan(Context& ctx) {
  const std::string input = ctx.config().get_string("allan.input", "");
  const int tcol = static_cast<int>(ctx.config().get_int("allan.time_column", 0));
  const int vcol = static_cast<int>(ctx.config().get_int("allan.value_column", 1));
  std::optional<StabilityConfig> scfg;
  std::unique_ptr<Backend> backend;
  if (input.empty()) {
    scfg = stability_config(ctx);
    backend = make_backend(ctx, "stability");
  } else {
    ctx.hash_file(ctx.resolve(input));
  }
  ctx.finish_config();
  if (ctx.dry_run()) {
    plan(ctx, input.empty() ? "simulate a stability series, then overlapping Allan deviation"
                            : "overlapping Allan deviation of " + input);
    return kOk;
  }
  TimeSeries s;
  if (input.empty()) {
    const auto series = temporal_stability(*backend, *scfg);
    s.times = series.times;
    s.values = series.fidelity;
  } else {
    s = read_series(ctx.resolve(input), tcol, vcol);
  }
  const auto taus = default_allan_taus(s);
  const auto pts = allan_deviation(s, taus);
  {
    auto out = ctx.open("allan.csv");
    out << "tau_s,adev,adev_err\n";
    char buf[96];
    for (const auto& p : pts) {
      std::snprintf(buf, sizeof buf, "%.6g,%.9g,%.6g\n", p.tau, p.deviation, p.stderr);
      out << buf;
    }
  }
  std::vector<double> t, a;
  for (const auto& p : pts) {
    if (p.deviation > 0) {
      t.push_back(p.tau);
      a.push_back(p.deviation);
    }
  }
  if (t.size() >= 2) std::cout << "log-log slope = " << fmt("%.3f", loglog_slope(t, a)) << "\n";
  ctx.announce("allan.csv");
  return kOk;
}

// ---- pulse physics ----------------------------------------------------------------

ScanOptions scan_options(const Context& ctx, const std::string& s, std::int64_t shots) {
  ScanOptions o;
  o.shots = ctx.shots(s + ".shots", shots);
  o.seed = ctx.seed();
  o.jobs = ctx.jobs();
  o.dt = ctx.config().get_double(s + ".dt_ns", 0.0);
  return o;
}

void write_map(const Context& ctx, const std::string& name, const HeatMap& m) {
  auto out = ctx.open(name);
  write_heatmap_csv(out, m);
  ctx.announce(name);
}

int cmd_swap(Context& ctx) {
  const auto p = ctx.device("device_swap.cfg");
  const auto freqs = ctx.grid("swap.f_ghz", 4.05, 4.82, 78);
  const auto hold = ctx.grid("swap.t_ns", 0, 2000, 41);
  const auto opts = scan_options(ctx, "swap", 1000);
  ctx.finish_config();
  if (ctx.dry_run()) {
    plan(ctx, std::to_string(freqs.size()) + " frequencies x " + std::to_string(hold.size()) +
                  " hold times, both preparations");
    return kOk;
  }
  const auto g = swap_spectroscopy(p, false, freqs, hold, opts);
  ScanOptions oe = opts;
  oe.seed = derive_seed(opts.seed, 1);
  const auto e = swap_spectroscopy(p, true, freqs, hold, oe);
  write_map(ctx, "swap_ground_pe.csv", g.pe);
  write_map(ctx, "swap_ground_survival.csv", g.prepared_survival);
  write_map(ctx, "swap_excited_pe.csv", e.pe);
  return kOk;
}

int cmd_idle_scan(Context& ctx) {
  const auto base = ctx.device("device_swap.cfg");
  const auto freqs = ctx.grid("idle.f_ghz", 4.05, 4.82, 155);
  const Shots shots = ctx.shots("idle.shots", 2000);
  const double pct = ctx.config().get_double("idle.percentile", 90.0);
  const double ex_lo = ctx.config().get_double("idle.exclude_lo_ghz", 0.0);
  const double ex_hi = ctx.config().get_double("idle.exclude_hi_ghz", 0.0);
  ctx.finish_config();
  if (ctx.dry_run()) {
    plan(ctx, std::to_string(freqs.size()) + " idle biases, P(e|g) and P(e|e)");
    return kOk;
  }
  std::vector<double> peg(freqs.size()), pee(freqs.size()), inet(freqs.size());
  std::vector<bool> masked(freqs.size());
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    DeviceParams p = base;
    p.i_idle_ua = current_from_freq(p, freqs[k], p.i_offset_ua - 1e-9);
    inet[k] = p.i_idle_ua;
    // Readout and pi pulse are recalibrated at every bias, so preparation is ideal.
    Rng rg(derive_seed(ctx.seed(), k, 0)), re(derive_seed(ctx.seed(), k, 1));
    peg[k] = measure(State::ground(), p, shots, rg);
    pee[k] = measure(State::excited(), p, shots, re);
    masked[k] = freqs[k] >= ex_lo && freqs[k] <= ex_hi;
  }
  const double level = percentile(peg, pct, masked);
  {
    auto out = ctx.open("idle_scan.csv");
    out << "# percentile_" << fmt("%g", pct) << " " << fmt("%.6f", level) << "\n";
    out << "f_idle_ghz,i_net_ua,pe_given_g,pe_given_e,excluded\n";
    char buf[128];
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.6f,%.4f,%.6f,%.6f,%d\n", freqs[k], inet[k], peg[k], pee[k],
                    masked[k] ? 1 : 0);
      out << buf;
    }
  }
  std::cout << fmt("%g", pct) << "th percentile of P(e|g) = " << fmt("%.4f", level) << "\n";
  ctx.announce("idle_scan.csv");
  return kOk;
}

struct ChevronGrid {
  std::vector<double> detunings_ghz;
  std::vector<double> delta_i;
  std::vector<double> durations;
  double rise = 0;
};

ChevronGrid chevron_grid(Context& ctx, const DeviceParams& p, const std::string& s) {
  ChevronGrid g;
  for (double mhz : ctx.grid(s + ".detuning_mhz", -40, 40, 41)) g.detunings_ghz.push_back(1e-3 * mhz);
  g.delta_i = currents_for_detunings(p, g.detunings_ghz);
  g.durations = ctx.grid(s + ".t_ns", 0, 200, 101);
  g.rise = ctx.config().get_double(s + ".rise_ns", p.rise_time_ns);
  return g;
}

int cmd_chevron(Context& ctx) {
  auto p = ctx.device("device_demux.cfg");
  p.drive_amplitude_v = ctx.config().get_double("chevron.drive_v", p.drive_amplitude_v);
  const auto g = chevron_grid(ctx, p, "chevron");
  const auto opts = scan_options(ctx, "chevron", 0);
  ctx.finish_config();
  if (ctx.dry_run()) {
    plan(ctx, std::to_string(g.durations.size()) + " durations x " +
                  std::to_string(g.delta_i.size()) + " amplitudes");
    return kOk;
  }
  auto m = rabi_chevron(p, g.delta_i, g.durations, g.rise, opts);
  write_map(ctx, "chevron.csv", m);
  std::cout << "asymmetry = " << fmt("%.4g", chevron_asymmetry(m)) << "\n";
  return kOk;
}

int cmd_onoff(Context& ctx) {
  const auto p = ctx.device("device_demux.cfg");
  const auto drives = ctx.config().get_doubles("onoff.drive_v", {0.0, 0.25, 0.5, 0.75, 1.0});
  const auto g = chevron_grid(ctx, p, "onoff");
  const auto opts = scan_options(ctx, "onoff", 1000);
  const std::string mode = ctx.config().get_string("onoff.drive_mode", "continuous");
  const double visibility = ctx.config().get_double("onoff.visibility", 0.9);
  ctx.finish_config();
  if (mode != "continuous" && mode != "gated") throw ConfigError("onoff.drive_mode: continuous or gated");
  if (ctx.dry_run()) {
    plan(ctx, std::to_string(drives.size()) + " drive amplitudes, chevron " +
                  std::to_string(g.durations.size()) + " x " + std::to_string(g.delta_i.size()));
    return kOk;
  }
  std::vector<HeatMap> maps;
  for (std::size_t k = 0; k < drives.size(); ++k) {
    DeviceParams pk = p;
    pk.drive_amplitude_v = drives[k];
    pk.drive_mode = mode == "gated" ? DriveMode::Gated : DriveMode::Continuous;
    pk.visibility = visibility;
    ScanOptions o = opts;
    o.seed = derive_seed(opts.seed, k);
    maps.push_back(rabi_chevron(pk, g.delta_i, g.durations, g.rise, o));
  }
  const auto res = on_off_stats(maps, drives);
  write_map(ctx, "onoff.csv", res.stat);
  std::cout << "on-off ratio = " << fmt("%.2f", res.ratio) << "\n";
  return kOk;
}

Calibration calibration_for(Context& ctx, const DeviceParams& p, const std::string& key) {
  const std::string path = ctx.config().get_string(key, "");
  if (!path.empty()) {
    ctx.hash_file(ctx.resolve(path));
    return load_calibration(ctx.resolve(path));
  }
  ScanOptions o;
  o.jobs = ctx.jobs();
  return calibrate(p, CalibrationPlan::defaults_for(p), o).cal;
}

int cmd_ramsey_axis(Context& ctx) {
  const auto p = ctx.device("device_fringe.cfg");
  const auto dt = ctx.grid("ramsey.dt_mid_ns", 0, 25, 251);
  const auto mid_mhz = ctx.grid("ramsey.f_mid_mhz", 0, 0, 1);
  const auto opts = scan_options(ctx, "ramsey", 0);
  const auto cal_key = "ramsey.calibration";
  ctx.config().get_string(cal_key, "");
  ctx.finish_config();
  if (ctx.dry_run()) {
    plan(ctx, std::to_string(dt.size()) + " delays x " + std::to_string(mid_mhz.size()) +
                  " middle-pulse frequencies");
    return kOk;
  }
  const auto cal = calibration_for(ctx, p, cal_key);
  // Middle pulses move the qubit by f_mid relative to idle; 0 is a plain delay.
  std::vector<double> mid;
  for (double f : mid_mhz) mid.push_back(f == 0 ? 0.0 : delta_i_for_frequency(p, p.idle_frequency() + 1e-3 * f));
  const RamseyAxisSetup setup{cal.delta_i_res, cal.pulse_duration(kPi / 2), p.rise_time_ns};
  write_map(ctx, "ramsey_axis.csv", ramsey_axis_scan(p, setup, mid, dt, opts));
  return kOk;
}

void write_trace(const Context& ctx, const std::string& name, const std::string& xlabel,
                 const std::vector<double>& x, const std::vector<double>& y, const FitResult& fit) {
  auto out = ctx.open(name);
  out << xlabel << ",pe,fit\n";
  char buf[96];
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.6f,%.9g,%.9g\n", x[k], y[k], model_value(fit.model, fit.params, x[k]));
    out << buf;
  }
  ctx.announce(name);
}

int cmd_calibrate(Context& ctx) {
  const auto p = ctx.device("device_demux.cfg");
  auto cplan = CalibrationPlan::defaults_for(p);
  const auto& c = ctx.config();
  cplan.rabi_durations = c.get_doubles("calibrate.rabi_durations_ns", cplan.rabi_durations);
  cplan.ramsey_delays = c.get_doubles("calibrate.ramsey_delays_ns", cplan.ramsey_delays);
  const auto opts = scan_options(ctx, "calibrate", 0);
  ctx.finish_config();
  if (ctx.dry_run()) {
    plan(ctx, "chevron " + std::to_string(cplan.amplitude_delta_i.size()) + " amplitudes, Rabi " +
                  std::to_string(cplan.rabi_durations.size()) + " durations, Ramsey " +
                  std::to_string(cplan.ramsey_delays.size()) + " delays");
    return kOk;
  }
  const auto fc = calibrate(p, cplan, opts);
  write_map(ctx, "calibrate_chevron.csv", fc.amplitude.chevron);
  write_trace(ctx, "calibrate_rabi.csv", "duration_ns", fc.duration.durations, fc.duration.pe,
              fc.duration.fit);
  write_trace(ctx, "calibrate_ramsey.csv", "delay_ns", fc.timing.delays, fc.timing.pe,
              fc.timing.fit);
  {
    auto out = ctx.open("calibration.cfg");
    write_calibration(out, fc.cal);
  }
  ctx.announce("calibration.cfg");
  std::cout << "delta_i_res = " << fmt("%.4f", fc.cal.delta_i_res) << " uA, t_pi = "
            << fmt("%.3f", fc.cal.t_pi) << " ns, Rabi = " << fmt("%.3f", 1e3 / (2 * fc.cal.t_pi))
            << " MHz, axis period = " << fmt("%.4f", fc.cal.axis_period)
            << " ns, phase offset = " << fmt("%.4f", fc.cal.phase_offset) << " rad\n";
  return kOk;
}

// ---- tomography ------------------------------------------------------------------------

int cmd_qpt(Context& ctx) {
  const auto p = ctx.device("device_demux.cfg");
  const auto gates = ctx.strings("qpt.gates", {"X_pi/2", "Y_-pi/2", "T", "S", "H"});
  const Shots shots = ctx.shots("qpt.shots", 0);
  DemuxRunOptions run;
  run.seed = ctx.seed();
  run.compile.rise_ns = p.rise_time_ns;
  run.compile.delay_resolution_ns = ctx.config().get_double("qpt.delay_resolution_ns", 0.0);
  ReconstructionOptions recon;
  recon.max_iterations = static_cast<int>(ctx.config().get_int("qpt.max_iterations", recon.max_iterations));
  if (ctx.config().has("qpt.invert_visibility")) {
    recon.invert_visibility = ctx.config().get_double("qpt.invert_visibility");
  }
  recon.validate();
  const auto cal_key = "qpt.calibration";
  ctx.config().get_string(cal_key, "");
  ctx.finish_config();
  for (const auto& g : gates) gate_program(g);  // reject unknown names before any work
  if (ctx.dry_run()) {
    plan(ctx, "gates " + join(gates) + ", 36 settings each");
    return kOk;
  }
  const auto cal = calibration_for(ctx, p, cal_key);
  const auto report = qpt_pipeline(p, cal, gates, shots, run, ctx.jobs(), recon);
  for (const auto& g : report.gates) {
    const std::string s = slug(g.gate);
    {
      auto out = ctx.open("qpt_record_" + s + ".txt");
      write_record(out, g.record);
    }
    {
      auto out = ctx.open("choi_" + s + ".txt");
      write_matrix(out, g.reconstruction.choi);
    }
    {
      auto out = ctx.open("sequence_" + s + ".csv");
      write_sequence_csv(out, compile_gate(g.gate, cal, run.compile));
    }
    for (const auto& f : {"qpt_record_", "choi_", "sequence_"}) {
      ctx.announce(std::string(f) + s + (std::string(f) == "sequence_" ? ".csv" : ".txt"));
    }
  }
  {
    auto out = ctx.open("qpt_table.csv");
    write_fidelity_table(out, report.rows());
  }
  ctx.announce("qpt_table.csv");
  for (const auto& r : report.rows()) std::cout << r.gate << "  " << fmt("%.2f", 100 * r.fidelity) << " %\n";
  return kOk;
}

int cmd_verify(Context& ctx) {
  const std::string dir = ctx.config().has("verify.choi_dir")
                              ? ctx.resolve(ctx.config().get_string("verify.choi_dir"))
                              : data_path("choi");
  const std::vector<std::string> gates = {"X_pi/2", "Y_-pi/2", "T", "S", "H"};
  const std::vector<std::string> files = {"C_X90", "C_Ym90", "C_T", "C_S", "C_H"};
  const std::vector<double> expected = {95.65, 96.23, 93.75, 88.93, 91.36};
  ctx.finish_config();
  std::vector<std::string> paths;
  for (const auto& f : files) paths.push_back(dir + "/" + f + ".txt");
  for (const auto& path : paths) ctx.hash_file(path);
  if (ctx.dry_run()) {
    plan(ctx, "average gate fidelity of the five bundled Choi matrices in " + dir);
    return kOk;
  }
  std::vector<Mat4> choi;
  for (const auto& path : paths) choi.push_back(load_matrix(path));
  const auto rows = report_fidelities(gates, choi);
  bool ok = true;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double pct = 100 * rows[k].fidelity;
    const bool hit = std::abs(pct - expected[k]) <= 0.1;
    ok = ok && hit;
    std::cout << rows[k].gate << "  " << fmt("%.2f", pct) << " %  (expected "
              << fmt("%.2f", expected[k]) << ") " << (hit ? "ok" : "MISMATCH") << "\n";
  }
  {
    auto out = ctx.open("verify_table.csv");
    write_fidelity_table(out, rows);
  }
  ctx.announce("verify_table.csv");
  return ok ? kOk : kInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdx: flux-pulse qubit simulation and gate characterisation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "64-bit seed (default: run.seed or 0)");
  app.add_option("-c,--config", g.config_path, "key-value experiment config")->check(CLI::ExistingFile);
  app.add_option("-d,--device", g.device_path, "device file (overrides run.device)")->check(CLI::ExistingFile);
  app.add_option("-j,--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("-o,--out", g.out_dir, "output directory (else QDX_OUTPUT_DIR, else qdx_out)");
  app.add_flag("--dry-run", g.dry_run, "validate the config and print the plan only");
  app.add_flag("--timestamp", g.timestamp, "add a generation-time header line to outputs");

  using Handler = std::function<int(Context&)>;
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"swap-spec", "swap spectroscopy maps from |g> and |e>", cmd_swap},
      {"idle-scan", "P(e|g) over idle biases with a percentile level", cmd_idle_scan},
      {"rb", "randomized benchmarking decay and fit", cmd_rb},
      {"pb", "purity benchmarking and incoherent error", cmd_pb},
      {"rb-stability", "moving-window fidelity series", cmd_stability},
      {"allan", "overlapping Allan deviation of a series", cmd_allan},
      {"chevron", "Rabi chevron map", cmd_chevron},
      {"onoff", "chevrons over drive amplitudes and the on-off ratio", cmd_onoff},
      {"ramsey-axis", "relative axis angle versus middle delay", cmd_ramsey_axis},
      {"calibrate", "three-step flux-pulse gate calibration", cmd_calibrate},
      {"qpt", "process tomography of flux-pulse gates", cmd_qpt},
      {"verify", "fidelities of the bundled Choi matrices", cmd_verify},
  };
  std::map<CLI::App*, Handler> handlers;
  app.fallthrough();  // global flags may follow the subcommand
  for (const auto& [name, help, fn] : commands) handlers[app.add_subcommand(name, help)] = fn;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    for (auto& [sub, fn] : handlers) {
      if (sub->parsed()) {
        Context ctx(sub->get_name(), g);
        return fn(ctx);
      }
    }
    return kConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return kFit;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return kCalibration;
  } catch (const InvariantError& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return kInvariant;
  } catch (const InvalidState& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return kInvariant;
  } catch (const InvalidChannel& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
