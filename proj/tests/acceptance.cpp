// End-to-end acceptance run. Prints one PASS/FAIL line per criterion with
// its wall time, and exits nonzero when any criterion fails.
//
// Usage: acceptance [path-to-qdx-binary]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "qdx/analysis.hpp"
#include "qdx/benchmarking.hpp"
#include "qdx/clifford.hpp"
#include "qdx/demuxyz.hpp"
#include "qdx/matrix_io.hpp"
#include "qdx/tomography.hpp"

using namespace qdx;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& name) { return std::string(QDX_DATA_DIR) + "/" + name; }

/// Collects failed checks of one criterion with a short reason each.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: got %.10g, want %.10g +- %.3g", what.c_str(), got, want, tol);
    expect(std::abs(got - want) <= tol, buf);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double stddev(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

FullCalibration calibrate_defaults(const DeviceParams& p) {
  ScanOptions o;
  o.jobs = 4;
  return calibrate(p, CalibrationPlan::defaults_for(p), o);
}

const std::vector<std::string> kGates = {"X_pi/2", "Y_-pi/2", "T", "S", "H"};
const std::vector<std::string> kChoiFiles = {"C_X90", "C_Ym90", "C_T", "C_S", "C_H"};

std::vector<Mat4> bundled_choi() {
  std::vector<Mat4> out;
  for (const auto& f : kChoiFiles) out.push_back(load_matrix(data("choi/" + f + ".txt")));
  return out;
}

void bundled_fidelities(Checks& c) {
  const std::vector<double> expected = {95.65, 96.23, 93.75, 88.93, 91.36};
  const auto rows = report_fidelities(kGates, bundled_choi());
  std::string line;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    c.near(100 * rows[k].fidelity, expected[k], 0.1, rows[k].gate + " fidelity (%)");
    line += rows[k].gate + " " + fmt("%.2f", 100 * rows[k].fidelity) + "  ";
  }
  c.note(line);
}

DecayRecord exact_decay(const std::vector<int>& lengths, double a, double p, double b, int shift) {
  DecayRecord r;
  r.lengths = lengths;
  for (int m : lengths) r.values.push_back({a * std::pow(p, m - shift) + b});
  return r;
}

void rb_formula(Checks& c) {
  c.near(rb_fidelity(0.99857), 0.999285, 1e-7, "F from p");
  const auto f = fit_rb(exact_decay(log_spaced_lengths(1, 5000, 28), 0.418, 0.99857, 0.558, 0));
  c.near(f.A, 0.418, 1e-9, "A");
  c.near(f.p, 0.99857, 1e-9, "p");
  c.near(f.B, 0.558, 1e-9, "B");
  c.note("F = " + fmt("%.7f", rb_fidelity(0.99857)));
}

void pb_formula(Checks& c) {
  c.near(incoherent_error(0.99798), 5.05e-4, 1e-5, "eps_inc from u");
  const auto f = fit_pb(exact_decay(log_spaced_lengths(1, 5000, 28), 0.85, 0.99798, 0.09, 1));
  c.near(f.u, 0.99798, 1e-9, "u");
  c.near(f.eps_inc, 5.05e-4, 1e-5, "fitted eps_inc");
  const auto coh = coherent_error(0.00094, 0.00050);
  c.near(coh.value, 0.00044, 1e-15, "eps_coh");
  c.expect(!coh.negative, "eps_coh flagged negative");
  c.note("eps_inc = " + fmt("%.4e", incoherent_error(0.99798)) + ", eps_coh = " + fmt("%.5f", coh.value));
}

void rb_oracle(Checks& c) {
  const auto lengths = log_spaced_lengths(1, 1500, 15);
  c.expect(lengths.size() == 15, "15 distinct lengths");
  std::string line;
  for (double lambda : {1.1e-3, 4e-3, 2e-2}) {
    RBConfig cfg;
    cfg.lengths = lengths;
    cfg.sequences_per_length = 30;
    cfg.seed = 9;
    cfg.jobs = 4;
    const auto f = fit_rb(run_rb(ChannelBackend({lambda, 0, 0, 0}), cfg));
    const double oracle = oracle::composed_channel_fidelity(lambda);
    const double eps = 1 - oracle;
    c.expect(eps >= 5e-4 && eps <= 1e-2, "noise level outside the target error range");
    c.expect(std::abs(f.fidelity - oracle) <= 3 * f.fidelity_err,
             "lambda " + fmt("%g", lambda) + ": |F_fit - F_oracle| = " +
                 fmt("%.3g", std::abs(f.fidelity - oracle)) + " > 3 sigma = " +
                 fmt("%.3g", 3 * f.fidelity_err));
    line += "eps " + fmt("%.2e", eps) + " dF " + fmt("%.1e", f.fidelity - oracle) + "  ";
  }
  c.note(line);
}

bool pauli_preserving(const Mat2& u) {
  const std::array<Mat2, 3> p = {Pauli<>::X(), Pauli<>::Y(), Pauli<>::Z()};
  for (const auto& a : p) {
    const Mat2 q = u * a * u.adjoint();
    bool hit = false;
    for (const auto& b : p) hit = hit || (q - b).norm() < 1e-9 || (q + b).norm() < 1e-9;
    if (!hit) return false;
  }
  return true;
}

void clifford_suite(Checks& c) {
  const auto& t = CliffordTable::instance();
  c.expect(t.gates().size() == 24, "24 elements");
  for (int a = 0; a < 24; ++a) {
    c.expect(pauli_preserving(t.gate(a).unitary), "element " + std::to_string(a) + " not Clifford");
    for (int b = 0; b < a; ++b) {
      c.expect(!equal_up_to_phase(t.gate(a).unitary, t.gate(b).unitary), "duplicate element");
    }
    for (int b = 0; b < 24; ++b) {
      const Mat2 prod = t.gate(b).unitary * t.gate(a).unitary;
      c.expect(equal_up_to_phase(prod, t.gate(t.compose(a, b)).unitary), "closure");
    }
  }

  Rng rng(11);
  for (int k = 0; k < 1000; ++k) {
    const int m = 1 + static_cast<int>(uniform_index(rng, 200));
    std::vector<int> seq(static_cast<std::size_t>(m));
    for (int& g : seq) g = static_cast<int>(uniform_index(rng, 24));
    seq.push_back(recovery_index(seq));
    Mat2 u = Mat2::Identity();
    for (int g : seq) u = t.gate(g).unitary * u;
    c.expect(phase_distance(u, Mat2::Identity()) < 1e-8, "recovery sequence " + std::to_string(k));
  }

  // Rows as (axis, angle, primitives applied left to right).
  using P = Primitive;
  struct Row {
    Vec3 axis;
    double angle;
    PrimitiveSequence seq;
  };
  const double h = kPi / 2;
  const double w = 2 * kPi / 3;
  const std::vector<Row> rows = {
      {{1, 0, 0}, 0, {P::I}},
      {{1, 0, 0}, kPi, {P::XPi}},
      {{0, 1, 0}, kPi, {P::XPi, P::ZPi}},
      {{0, 0, 1}, kPi, {P::ZPi}},
      {{1, 1, 1}, w, {P::XHalf, P::ZHalf}},
      {{1, 1, -1}, w, {P::ZMinusHalf, P::XHalf}},
      {{1, -1, 1}, w, {P::ZHalf, P::XHalf}},
      {{1, -1, -1}, w, {P::XHalf, P::ZMinusHalf}},
      {{-1, 1, 1}, w, {P::ZHalf, P::XMinusHalf}},
      {{-1, 1, -1}, w, {P::XMinusHalf, P::ZMinusHalf}},
      {{-1, -1, 1}, w, {P::XMinusHalf, P::ZHalf}},
      {{-1, -1, -1}, w, {P::ZMinusHalf, P::XMinusHalf}},
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
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Mat2 u = Mat2::Identity();
    for (P prim : rows[i].seq) u = primitive_unitary(prim) * u;
    const Mat2 target = bloch_rotation(rows[i].axis, rows[i].angle);
    c.expect(equal_up_to_phase(u, target), "row " + std::to_string(i) + " product");
    c.expect(equal_up_to_phase(t.gate(static_cast<int>(i)).unitary, target),
             "row " + std::to_string(i) + " element");
  }

  Rng draw(13);
  long total = 0;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    const int g = static_cast<int>(uniform_index(draw, 24));
    total += compile_virtual_z(decompose(g, draw)).microwave_slots();
  }
  const double mean = static_cast<double>(total) / draws;
  c.near(mean, 23.0 / 24.0, 0.01, "mean microwave pulses per Clifford");
  c.note("mean pulses " + fmt("%.4f", mean));
}

void pulse_anchors(Checks& c) {
  const auto demux = load_device(data("device_demux.cfg"));
  c.near(demux.rabi_per_volt_mhz * demux.drive_amplitude_v, 12.30, 1e-9, "Rabi rate (MHz)");
  c.near(1e3 * (demux.f_cw_ghz - demux.idle_frequency()), 101.0, 0.05, "demux detuning (MHz)");
  const auto a = calibrate_defaults(demux).cal;
  c.near(a.t_pi, 40.65, 0.2, "pi time (ns)");
  c.near(a.axis_period, 9.90, 0.05, "axis period (ns)");
  const auto fr = load_device(data("device_fringe.cfg"));
  c.near(1e3 * (fr.f_cw_ghz - fr.idle_frequency()), 105.0, 0.05, "fringe detuning (MHz)");
  const auto b = calibrate_defaults(fr).cal;
  c.near(b.axis_period, 9.52, 0.05, "fringe period (ns)");
  c.note("t_pi " + fmt("%.3f", a.t_pi) + " ns, periods " + fmt("%.4f", a.axis_period) + " / " +
         fmt("%.4f", b.axis_period) + " ns");
}

bool is_cptp_choi(const Mat4& m) {
  try {
    ChoiMatrix checked(m);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void qpt_round_trip(Checks& c) {
  const auto choi = bundled_choi();
  const Mat4& ct = choi[2];
  const auto r = reconstruct(oracle::exact_record(ct));
  c.expect((r.choi - ct).norm() <= 1e-3, "C_T round trip Frobenius " + fmt("%.3g", (r.choi - ct).norm()));
  c.expect(is_cptp_choi(r.choi), "C_T reconstruction not CPTP");

  // Heavy shot noise and arbitrary channels still come back CPTP.
  Rng rng(8);
  for (int k = 0; k < 10; ++k) {
    const Mat4& base = choi[static_cast<std::size_t>(k) % choi.size()];
    auto rec = oracle::exact_record(base);
    for (double& p : rec.probability) p = sample_probability(p, Shots(10), rng);
    ReconstructionOptions o;
    o.max_iterations = 500;
    c.expect(is_cptp_choi(reconstruct(rec, o).choi), "noisy reconstruction not CPTP");
  }

  const auto p = load_device(data("device_demux.cfg"));
  const auto cal = calibrate_defaults(p).cal;
  DemuxRunOptions o;
  o.compile.delay_resolution_ns = cal.axis_period / 1000;
  const auto rep = qpt_pipeline(p, cal, kGates, Shots::infinite(), o, 4);
  std::string line;
  for (const auto& g : rep.gates) {
    c.expect(g.fidelity >= 0.99, g.gate + " end-to-end fidelity " + fmt("%.5f", g.fidelity));
    c.expect(is_cptp_choi(g.reconstruction.choi), g.gate + " reconstruction not CPTP");
    line += g.gate + " " + fmt("%.3f", 100 * g.fidelity) + "  ";
  }
  c.note("round trip " + fmt("%.2e", (r.choi - ct).norm()) + "; " + line);
}

TimeSeries uniform_series(const std::vector<double>& v) {
  TimeSeries s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s.times.push_back(static_cast<double>(i));
    s.values.push_back(v[i]);
  }
  return s;
}

double slope_at(const TimeSeries& s, const std::vector<double>& taus) {
  std::vector<double> ad;
  for (const auto& pt : allan_deviation(s, taus)) ad.push_back(pt.deviation);
  return loglog_slope(taus, ad);
}

void allan_properties(Checks& c) {
  const auto flat = uniform_series(std::vector<double>(300, 0.999));
  for (const auto& pt : allan_deviation(flat, default_allan_taus(flat))) {
    c.expect(pt.deviation == 0.0, "constant series deviation " + fmt("%g", pt.deviation));
  }
  Rng rng(3);
  std::vector<double> white(20000);
  for (double& x : white) x = standard_normal(rng);
  const double sw = slope_at(uniform_series(white), {10, 20, 50, 100});
  c.near(sw, -0.5, 0.1, "white-noise slope");
  std::vector<double> drift(3000);
  for (std::size_t i = 0; i < drift.size(); ++i) drift[i] = 1e-4 * static_cast<double>(i);
  const double sd = slope_at(uniform_series(drift), {5, 10, 20, 50});
  c.near(sd, 1.0, 0.1, "drift slope");

  std::vector<double> v(white.begin(), white.begin() + 500);
  double acc = 0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) acc += (v[i + 1] - v[i]) * (v[i + 1] - v[i]);
  const double brute = std::sqrt(0.5 * acc / static_cast<double>(v.size() - 1));
  const double got = allan_deviation(uniform_series(v), {1.0})[0].deviation;
  c.expect(got == brute, "base-tau estimator " + fmt("%.17g", got) + " vs " + fmt("%.17g", brute));
  c.note("slopes " + fmt("%.3f", sw) + " / " + fmt("%.3f", sd));
}

void desk_scale(Checks& c) {
  // (a) Stationary backend: window scatter should follow 1/sqrt(window).
  StabilityConfig s;
  s.rb.lengths = log_spaced_lengths(1, 1500, 8);
  s.rb.shots = Shots(100);
  s.rb.seed = 10;
  s.rb.jobs = 4;
  s.iterations = 4800;
  const ChannelBackend backend({0.004, 0, 0, 0});
  const auto per = stability_iterations(backend, s);
  c.expect(per.size() == 4800, "iteration count");
  const std::vector<double> windows = {5, 10, 20, 40, 80};
  std::vector<double> scatter;
  for (double w : windows) {
    const auto series = stability_from_iterations(s.rb.lengths, per, static_cast<int>(w), 30, 4);
    // Interior only, where every window is full.
    const std::vector<double> in(series.fidelity.begin() + 40, series.fidelity.end() - 40);
    scatter.push_back(stddev(in));
  }
  const double slope = loglog_slope(windows, scatter);
  c.near(slope, -0.5, 0.1, "log scatter vs log window slope");

  // (b) On-off scan with readout visibility 0.9 and finite shots.
  auto p = load_device(data("device_demux.cfg"));
  p.visibility = 0.9;
  p.drive_mode = DriveMode::Continuous;
  std::vector<double> det;
  for (int k = 0; k <= 40; ++k) det.push_back(1e-3 * (-40 + 2 * k));
  const auto di = currents_for_detunings(p, det);
  std::vector<double> t;
  for (int k = 0; k <= 100; ++k) t.push_back(2.0 * k);
  const std::vector<double> drives = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<HeatMap> maps;
  for (std::size_t k = 0; k < drives.size(); ++k) {
    DeviceParams pk = p;
    pk.drive_amplitude_v = drives[k];
    maps.push_back(rabi_chevron(pk, di, t, p.rise_time_ns, {Shots(1000), derive_seed(1, k), 4, 0}));
  }
  const double ratio = on_off_stats(maps, drives).ratio;
  c.expect(ratio >= 10, "on-off ratio " + fmt("%.2f", ratio));
  c.note("scatter slope " + fmt("%.3f", slope) + ", on-off ratio " + fmt("%.1f", ratio));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs the CLI into `dir`; returns its exit status.
int run_cli(const std::string& exe, const std::string& args, const fs::path& dir) {
  const std::string cmd = "\"" + exe + "\" " + args + " --out \"" + dir.string() + "\" > \"" +
                          (dir.string() + ".log") + "\" 2>&1";
  return std::system(cmd.c_str());
}

void determinism(Checks& c, const std::string& exe) {
  if (exe.empty() || !fs::exists(exe)) {
    c.expect(false, "qdx binary not found: '" + exe + "'");
    return;
  }
  const fs::path root = fs::temp_directory_path() / ("qdx_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  // Unused keys are rejected, so each subcommand gets its own file.
  std::ofstream(root / "rb.cfg") << "[rb]\nshots = 200\nsequences = 10\nlength_last = 600\n"
                                 << "[noise]\ndepolarizing = 0.004\nvisibility = 0.95\n";
  std::ofstream(root / "qpt.cfg") << "[qpt]\nshots = 2000\n";
  const auto cfg = [&](const char* name) { return "--config \"" + (root / name).string() + "\""; };
  const std::string realism = "--device \"" + data("device_realism.cfg") + "\"";
  const std::vector<std::pair<std::string, std::string>> cmds = {
      {"verify", "verify"},
      {"rb", "rb " + cfg("rb.cfg") + " --seed 17"},
      {"qpt", "qpt " + cfg("qpt.cfg") + " " + realism + " --seed 17"},
  };
  int files = 0;
  for (const auto& [name, args] : cmds) {
    std::vector<fs::path> dirs;
    for (const char* jobs : {"1", "1", "4"}) {
      const fs::path dir = root / (name + "_" + std::to_string(dirs.size()));
      const int rc = run_cli(exe, args + " --jobs " + jobs, dir);
      c.expect(rc == 0, name + " exited with status " + std::to_string(rc));
      dirs.push_back(dir);
    }
    std::set<std::string> names;
    for (const auto& d : dirs) {
      if (!fs::exists(d)) continue;
      for (const auto& e : fs::directory_iterator(d)) names.insert(e.path().filename().string());
    }
    c.expect(!names.empty(), name + " wrote no files");
    for (const auto& f : names) {
      const std::string ref = slurp(dirs[0] / f);
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        c.expect(fs::exists(dirs[k] / f) && slurp(dirs[k] / f) == ref,
                 name + ": " + f + " differs in run " + std::to_string(k));
      }
      ++files;
    }
  }
  c.note(std::to_string(files) + " files compared across 3 runs each (jobs 1, 1, 4)");
  if (c.failures().empty()) fs::remove_all(root);
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<void(Checks&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::string exe = argc > 1 ? argv[1] : "";
  const std::vector<Criterion> criteria = {
      {1, "bundled Choi matrices give the reference fidelities", 1, bundled_fidelities},
      {2, "RB fidelity formula and exact fit recovery", 1, rb_formula},
      {3, "PB incoherent and coherent error", 1, pb_formula},
      {4, "RB fit matches the composed-channel oracle", 120, rb_oracle},
      {5, "Clifford group, recovery, decompositions, pulse count", 30, clifford_suite},
      {6, "pulse-physics anchors", 60, pulse_anchors},
      {7, "QPT round trip, CPTP outputs, noiseless flux-pulse gates", 300, qpt_round_trip},
      {8, "Allan deviation properties", 30, allan_properties},
      {9, "stability scatter scaling and on-off ratio", 600, desk_scale},
      {10, "CLI output determinism", 600, [&](Checks& c) { determinism(c, exe); }},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checks c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > cr.budget_s) {
      c.expect(false, "runtime " + fmt("%.2f", secs) + " s over budget " + fmt("%.0f", cr.budget_s) + " s");
    }
    const bool ok = c.failures().empty();
    failed += ok ? 0 : 1;
    std::printf("%s %2d  %-58s %8.2f s\n", ok ? "PASS" : "FAIL", cr.id, cr.title, secs);
    for (const auto& n : c.notes()) std::printf("        %s\n", n.c_str());
    for (const auto& f : c.failures()) std::printf("        failed: %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
