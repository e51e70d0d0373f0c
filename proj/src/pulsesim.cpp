#include "qdx/pulsesim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "qdx/error.hpp"
#include "qdx/parallel.hpp"

namespace qdx {

// ---------------------------------------------------------------------------
// Device

void DeviceParams::validate() const {
  if (!(f_max_ghz > 0)) throw ConfigError("device: f_max_ghz must be positive");
  if (!(i_period_ua > 0)) throw ConfigError("device: i_period_ua must be positive");
  if (!(visibility > 0 && visibility <= 1)) throw ConfigError("device: visibility must be in (0, 1]");
  if (!(t1_us > 0) || !(t2_us > 0)) throw ConfigError("device: T1 and T2 must be positive");
  if (t2_us > 2 * t1_us + 1e-9) throw ConfigError("device: T2 exceeds 2 T1");
  if (rise_time_ns < 0 || latency_ns < 0) throw ConfigError("device: negative timing constant");
  if (!(distortion.settle_tau_ns > 0)) throw ConfigError("device: settle_tau_ns must be positive");
  for (const auto& d : tls_dips) {
    if (!(d.width_mhz > 0) || !(d.t1_us > 0)) throw ConfigError("device: bad TLS dip");
  }
}

double DeviceParams::idle_frequency() const { return freq_from_current(*this, i_idle_ua); }

bool DeviceParams::decoherent() const {
  return std::isfinite(t1_us) || std::isfinite(t2_us) || !tls_dips.empty();
}

DeviceParams device_from_config(const KvConfig& cfg) {
  DeviceParams p;
  const std::string s = "device.";
  p.f_max_ghz = cfg.get_double(s + "f_max_ghz", p.f_max_ghz);
  p.i_offset_ua = cfg.get_double(s + "i_offset_ua", p.i_offset_ua);
  p.i_period_ua = cfg.get_double(s + "i_period_ua", p.i_period_ua);
  p.rabi_per_volt_mhz = cfg.get_double(s + "rabi_per_volt_mhz", p.rabi_per_volt_mhz);
  p.drive_amplitude_v = cfg.get_double(s + "drive_amplitude_v", p.drive_amplitude_v);
  p.t1_us = cfg.get_double(s + "t1_us", p.t1_us);
  p.t2_us = cfg.get_double(s + "t2_us", p.t2_us);
  p.visibility = cfg.get_double(s + "visibility", p.visibility);
  p.readout_f_ghz = cfg.get_double(s + "readout_f_ghz", p.readout_f_ghz);
  p.rise_time_ns = cfg.get_double(s + "rise_time_ns", p.rise_time_ns);
  p.latency_ns = cfg.get_double(s + "latency_ns", p.latency_ns);
  p.distortion.amplitude_error = cfg.get_double(s + "amplitude_error", 0.0);
  p.distortion.timing_jitter_ns = cfg.get_double(s + "timing_jitter_ns", 0.0);
  p.distortion.settle_fraction = cfg.get_double(s + "settle_fraction", 0.0);
  p.distortion.settle_tau_ns = cfg.get_double(s + "settle_tau_ns", p.distortion.settle_tau_ns);

  const std::string mode = cfg.get_string(s + "drive_mode", "continuous");
  if (mode == "continuous") {
    p.drive_mode = DriveMode::Continuous;
  } else if (mode == "gated") {
    p.drive_mode = DriveMode::Gated;
  } else if (mode == "off") {
    p.drive_mode = DriveMode::Off;
  } else {
    throw ConfigError("device: drive_mode must be continuous, gated or off");
  }

  if (cfg.has(s + "i_idle_ua") && cfg.has(s + "idle_f_ghz")) {
    throw ConfigError("device: give either i_idle_ua or idle_f_ghz, not both");
  }
  if (cfg.has(s + "idle_f_ghz")) {
    const double f = cfg.get_double(s + "idle_f_ghz");
    p.i_idle_ua = current_from_freq(p, f, p.i_offset_ua - 1e-9);
  } else {
    p.i_idle_ua = cfg.get_double(s + "i_idle_ua", p.i_idle_ua);
  }
  // The drive is placed either absolutely or relative to the idle point.
  if (cfg.has(s + "f_cw_ghz") && cfg.has(s + "cw_detuning_ghz")) {
    throw ConfigError("device: give either f_cw_ghz or cw_detuning_ghz, not both");
  }
  if (cfg.has(s + "cw_detuning_ghz")) {
    p.f_cw_ghz = p.idle_frequency() + cfg.get_double(s + "cw_detuning_ghz");
  } else {
    p.f_cw_ghz = cfg.get_double(s + "f_cw_ghz", p.f_cw_ghz);
  }

  for (const auto& key : cfg.keys_with_prefix("tls.")) {
    const auto v = cfg.get_doubles(key);
    if (v.size() != 3) throw ConfigError(key + ": expected 'center_ghz, width_mhz, t1_us'");
    p.tls_dips.push_back({v[0], v[1], v[2]});
  }
  p.validate();
  return p;
}

DeviceParams load_device(const std::string& path) {
  const auto cfg = KvConfig::load(path);
  auto p = device_from_config(cfg);
  cfg.check_all_used();
  return p;
}

void write_device(std::ostream& out, const DeviceParams& p) {
  char buf[128];
  auto line = [&](const char* k, double v) {
    std::snprintf(buf, sizeof buf, "%s = %.12g\n", k, v);
    out << buf;
  };
  out << "[device]\n";
  line("f_max_ghz", p.f_max_ghz);
  line("i_offset_ua", p.i_offset_ua);
  line("i_period_ua", p.i_period_ua);
  line("i_idle_ua", p.i_idle_ua);
  line("f_cw_ghz", p.f_cw_ghz);
  line("rabi_per_volt_mhz", p.rabi_per_volt_mhz);
  line("drive_amplitude_v", p.drive_amplitude_v);
  out << "drive_mode = "
      << (p.drive_mode == DriveMode::Gated ? "gated"
                                           : p.drive_mode == DriveMode::Off ? "off" : "continuous")
      << "\n";
  line("t1_us", p.t1_us);
  line("t2_us", p.t2_us);
  line("visibility", p.visibility);
  line("readout_f_ghz", p.readout_f_ghz);
  line("rise_time_ns", p.rise_time_ns);
  line("latency_ns", p.latency_ns);
  line("amplitude_error", p.distortion.amplitude_error);
  line("timing_jitter_ns", p.distortion.timing_jitter_ns);
  line("settle_fraction", p.distortion.settle_fraction);
  line("settle_tau_ns", p.distortion.settle_tau_ns);
  if (!p.tls_dips.empty()) {
    out << "[tls]\n";
    for (std::size_t k = 0; k < p.tls_dips.size(); ++k) {
      std::snprintf(buf, sizeof buf, "dip%zu = %.12g, %.12g, %.12g\n", k, p.tls_dips[k].center_ghz,
                    p.tls_dips[k].width_mhz, p.tls_dips[k].t1_us);
      out << buf;
    }
  }
}

double freq_from_current(const DeviceParams& p, double i_net_ua) {
  return p.f_max_ghz * std::sqrt(std::abs(std::cos(kPi * (i_net_ua - p.i_offset_ua) / p.i_period_ua)));
}

double current_from_freq(const DeviceParams& p, double f_ghz, double branch_hint_ua) {
  const double x = f_ghz / p.f_max_ghz;
  if (!(x >= 0 && x <= 1)) {
    throw std::invalid_argument("current_from_freq: frequency outside [0, f_max]");
  }
  const double base = p.i_period_ua / kPi * std::acos(x * x);
  const double center =
      p.i_offset_ua + p.i_period_ua * std::round((branch_hint_ua - p.i_offset_ua) / p.i_period_ua);
  return branch_hint_ua < center ? center - base : center + base;
}

double delta_i_for_frequency(const DeviceParams& p, double f_ghz) {
  return current_from_freq(p, f_ghz, p.i_idle_ua) - p.i_idle_ua;
}

double t1_at(const DeviceParams& p, double f_ghz) {
  double rate = 1.0 / p.t1_us;
  for (const auto& d : p.tls_dips) {
    const double u = (f_ghz - d.center_ghz) * 1e3 / (0.5 * d.width_mhz);
    rate += (1.0 / d.t1_us) / (1 + u * u);
  }
  return 1.0 / rate;
}

// ---------------------------------------------------------------------------
// Schedules

double FluxPulse::envelope(double t) const {
  if (t < start || t > end() || duration <= 0) return 0;
  const double r = std::min(rise_time, 0.5 * duration);
  if (r <= 0) return t < end() ? 1.0 : 0.0;
  return std::clamp(std::min((t - start) / r, (end() - t) / r), 0.0, 1.0);
}

void PulseSchedule::validate() const {
  if (!(total_duration >= 0)) throw std::invalid_argument("schedule: negative total duration");
  double last_end = 0;
  for (std::size_t k = 0; k < pulses.size(); ++k) {
    const auto& fp = pulses[k];
    if (!(fp.duration >= 0) || !(fp.rise_time >= 0) || !(fp.start >= 0)) {
      throw std::invalid_argument("schedule: pulse with negative timing");
    }
    if (k > 0 && fp.start < last_end - 1e-9) {
      throw std::invalid_argument("schedule: pulses overlap or are out of order");
    }
    last_end = fp.end();
  }
  if (last_end > total_duration + 1e-9) {
    throw std::invalid_argument("schedule: pulses extend past total duration");
  }
}

namespace {

struct Model {
  const DeviceParams& p;
  const PulseSchedule& s;
  double omega;  // GHz

  double current(double t) const {
    double i = p.i_idle_ua;
    const double frac = p.distortion.settle_fraction;
    for (const auto& fp : s.pulses) {
      i += fp.delta_i * fp.envelope(t);
      if (frac != 0 && t > fp.end()) {
        i += frac * fp.delta_i * std::exp(-(t - fp.end()) / p.distortion.settle_tau_ns);
      }
    }
    return i;
  }

  double drive(double t) const {
    switch (s.drive) {
      case DriveMode::Off: return 0;
      case DriveMode::Continuous: return omega;
      case DriveMode::Gated:
        for (const auto& fp : s.pulses)
          if (t >= fp.start && t < fp.end()) return omega;
        return 0;
    }
    return 0;
  }

  /// Propagator exp(-i pi h (Delta sz + Omega sx)) for a step of length h
  /// with the Hamiltonian sampled at tm.
  Mat2 step(double tm, double h, double* f_out = nullptr) const {
    const double f = freq_from_current(p, current(tm));
    if (f_out) *f_out = f;
    const double delta = f - p.f_cw_ghz;
    const double om = drive(tm);
    const double rate = std::hypot(delta, om);
    if (rate == 0) return Mat2::Identity();
    return bloch_rotation(Vec3(om, 0, delta), 2 * kPi * h * rate);
  }

  /// Fourth-order Magnus step over [tm - h/2, tm + h/2], used where the
  /// Hamiltonian varies (ramps, settling tails). With H = (v . sigma)/2 and
  /// Gauss nodes t1 < t2 the exponent is -i a . sigma,
  /// a = pi h (v1 + v2)/2 + (2 pi)^2 sqrt(3) h^2 / 24 (v2 x v1).
  Mat2 magnus_step(double tm, double h, double* f_out = nullptr) const {
    const double off = h * std::sqrt(3.0) / 6;
    auto field = [&](double t) {
      const double f = freq_from_current(p, current(t));
      return Vec3(drive(t), 0, f - p.f_cw_ghz);
    };
    const Vec3 v1 = field(tm - off);
    const Vec3 v2 = field(tm + off);
    if (f_out) *f_out = freq_from_current(p, current(tm));
    const Vec3 a = kPi * h * 0.5 * (v1 + v2) +
                   (4 * kPi * kPi) * std::sqrt(3.0) * h * h / 24 * v2.cross(v1);
    const double n = a.norm();
    if (n == 0) return Mat2::Identity();
    return bloch_rotation(a, 2 * n);
  }

  std::vector<double> breakpoints() const {
    std::vector<double> b = {0.0, s.total_duration};
    for (const auto& fp : s.pulses) {
      const double r = std::min(fp.rise_time, 0.5 * fp.duration);
      for (double t : {fp.start, fp.start + r, fp.end() - r, fp.end()}) {
        b.push_back(std::clamp(t, 0.0, s.total_duration));
      }
    }
    std::sort(b.begin(), b.end());
    std::vector<double> out;
    for (double t : b)
      if (out.empty() || t - out.back() > 1e-12) out.push_back(t);
    return out;
  }

  /// True when the Hamiltonian is constant on (a, b).
  bool flat(double a, double b) const {
    for (const auto& fp : s.pulses) {
      const double r = std::min(fp.rise_time, 0.5 * fp.duration);
      if (r > 0) {
        if (a < fp.start + r && b > fp.start) return false;
        if (a < fp.end() && b > fp.end() - r) return false;
      }
      if (p.distortion.settle_fraction != 0 && b > fp.end() && fp.delta_i != 0) return false;
    }
    return true;
  }

  double max_rate() const {
    double m = 0;
    const auto b = breakpoints();
    auto probe = [&](double t) {
      const double om = drive(t);
      if (om == 0) return;
      const double delta = freq_from_current(p, current(t)) - p.f_cw_ghz;
      m = std::max({m, std::abs(delta), om});
    };
    for (std::size_t k = 0; k < b.size(); ++k) {
      probe(b[k]);
      if (k + 1 < b.size()) {
        for (int j = 1; j < 8; ++j) probe(b[k] + (b[k + 1] - b[k]) * j / 8.0);
      }
    }
    return m;
  }
};

void apply_decoherence(Mat2& rho, double h_ns, double t1_us, double tphi_us) {
  if (std::isfinite(t1_us)) {
    const double keep = std::exp(-h_ns / (1e3 * t1_us));  // 1 - gamma
    const std::complex<double> moved = (1 - keep) * rho(1, 1);
    rho(0, 0) += moved;
    rho(1, 1) *= keep;
    const double s = std::sqrt(keep);
    rho(0, 1) *= s;
    rho(1, 0) *= s;
  }
  if (std::isfinite(tphi_us)) {
    const double d = std::exp(-h_ns / (1e3 * tphi_us));
    rho(0, 1) *= d;
    rho(1, 0) *= d;
  }
}

double pure_dephasing_time(const DeviceParams& p) {
  const double rate = 1.0 / p.t2_us - 0.5 / p.t1_us;
  return rate > 0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

constexpr double kResolution = 0.05;
constexpr double kMaxDt = 1.0;

}  // namespace

double auto_dt(const DeviceParams& p, const PulseSchedule& s) {
  const Model m{p, s, p.rabi_ghz(s.drive_amplitude)};
  const double rate = m.max_rate();
  return rate > 0 ? std::min(kMaxDt, kResolution / rate) : kMaxDt;
}

SimResult evolve(const DeviceParams& p, const PulseSchedule& s, const State& rho0,
                 const EvolveOptions& opts) {
  s.validate();
  const Model m{p, s, p.rabi_ghz(s.drive_amplitude)};
  const double rate = m.max_rate();
  double dt = opts.dt;
  if (dt <= 0) {
    dt = rate > 0 ? std::min(kMaxDt, kResolution / rate) : kMaxDt;
  } else if (rate > 0 && dt > kResolution / rate * (1 + 1e-12)) {
    throw std::invalid_argument("evolve: dt does not resolve the fastest rotation");
  }

  const bool noisy = p.decoherent();
  const double tphi = pure_dephasing_time(p);
  Mat2 rho = rho0.matrix();
  SimResult out;
  if (opts.record) {
    out.times.push_back(0);
    out.pe.push_back(rho(1, 1).real());
  }

  const auto b = m.breakpoints();
  for (std::size_t k = 0; k + 1 < b.size(); ++k) {
    const double a = b[k];
    const double len = b[k + 1] - a;
    const bool fl = m.flat(a, b[k + 1]);
    // Flat segments are exact in one step when the dynamics commute with the
    // noise (no noise, or no drive so the Hamiltonian is diagonal).
    const bool single = fl && !opts.record && (!noisy || m.drive(a + 0.5 * len) == 0);
    const int n = single ? 1 : std::max(1, static_cast<int>(std::ceil(len / dt - 1e-9)));
    const double h = len / n;
    for (int j = 0; j < n; ++j) {
      const double tm = a + (j + 0.5) * h;
      double f = 0;
      const Mat2 u = fl ? m.step(tm, h, &f) : m.magnus_step(tm, h, &f);
      if (noisy) {
        const double t1 = t1_at(p, f);
        apply_decoherence(rho, 0.5 * h, t1, tphi);
        rho = u * rho * u.adjoint();
        apply_decoherence(rho, 0.5 * h, t1, tphi);
      } else {
        rho = u * rho * u.adjoint();
      }
      const double tr = rho.trace().real();
      const double pe = rho(1, 1).real();
      if (!std::isfinite(tr) || std::abs(tr - 1) > 1e-9 || pe < -1e-9 || pe > 1 + 1e-9) {
        throw InvariantError("evolve: state left the physical set");
      }
      if (opts.record) {
        out.times.push_back(a + (j + 1) * h);
        out.pe.push_back(std::clamp(pe, 0.0, 1.0));
      }
    }
  }
  rho = 0.5 * (rho + rho.adjoint()).eval();
  out.final_state = State(rho, 1e-8);
  return out;
}

Mat2 schedule_unitary(const DeviceParams& p, const PulseSchedule& s, double dt) {
  s.validate();
  const Model m{p, s, p.rabi_ghz(s.drive_amplitude)};
  if (dt <= 0) dt = auto_dt(p, s);
  Mat2 u = Mat2::Identity();
  const auto b = m.breakpoints();
  for (std::size_t k = 0; k + 1 < b.size(); ++k) {
    const double a = b[k];
    const double len = b[k + 1] - a;
    const bool fl = m.flat(a, b[k + 1]);
    const int n = fl ? 1 : std::max(1, static_cast<int>(std::ceil(len / dt - 1e-9)));
    const double h = len / n;
    for (int j = 0; j < n; ++j) {
      const double tm = a + (j + 0.5) * h;
      u = (fl ? m.step(tm, h) : m.magnus_step(tm, h)) * u;
    }
  }
  return u;
}

PulseSchedule distort(const DeviceParams& p, const PulseSchedule& s, Rng& rng) {
  PulseSchedule out = s;
  const auto& d = p.distortion;
  for (auto& fp : out.pulses) {
    fp.delta_i *= 1 + d.amplitude_error;
    if (d.timing_jitter_ns > 0) {
      const double shift = d.timing_jitter_ns * standard_normal(rng);
      fp.start = std::max(0.0, fp.start + shift);
    }
  }
  // Jitter may push neighbours into each other; keep order and separation.
  for (std::size_t k = 1; k < out.pulses.size(); ++k) {
    const double min_start = out.pulses[k - 1].end();
    if (out.pulses[k].start < min_start) out.pulses[k].start = min_start;
  }
  if (!out.pulses.empty()) {
    out.total_duration = std::max(out.total_duration, out.pulses.back().end());
  }
  return out;
}

double observed_pe(double pe, const DeviceParams& p) { return 0.5 + p.visibility * (pe - 0.5); }

double measure(const State& rho, const DeviceParams& p, const Shots& shots, Rng& rng) {
  return sample_probability(observed_pe(rho.excited_population(), p), shots, rng);
}

void write_heatmap_csv(std::ostream& out, const HeatMap& m) {
  char buf[64];
  out << m.row_label << "\\" << m.col_label;
  for (double c : m.cols) {
    std::snprintf(buf, sizeof buf, ",%.10g", c);
    out << buf;
  }
  out << '\n';
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%.10g", m.rows[r]);
    out << buf;
    for (double v : m.values[r]) {
      std::snprintf(buf, sizeof buf, ",%.10g", v);
      out << buf;
    }
    out << '\n';
  }
}

namespace {

HeatMap blank_map(std::string row_label, std::string col_label, const std::vector<double>& rows,
                  const std::vector<double>& cols) {
  if (rows.empty() || cols.empty()) throw std::invalid_argument("scan grids must be non-empty");
  HeatMap m;
  m.row_label = std::move(row_label);
  m.col_label = std::move(col_label);
  m.rows = rows;
  m.cols = cols;
  m.values.assign(rows.size(), std::vector<double>(cols.size(), 0.0));
  return m;
}

template <typename CellFn>
void fill_map(HeatMap& m, const ScanOptions& opts, CellFn&& cell) {
  const std::size_t nc = m.cols.size();
  parallel_for(m.rows.size() * nc, opts.jobs, [&](std::size_t k) {
    const std::size_t r = k / nc;
    const std::size_t c = k % nc;
    Rng rng(derive_seed(opts.seed, r, c));
    m.values[r][c] = cell(r, c, rng);
  });
}

}  // namespace

HeatMap rabi_chevron(const DeviceParams& p, const std::vector<double>& delta_i,
                     const std::vector<double>& durations, double rise_ns, const ScanOptions& opts) {
  HeatMap m = blank_map("t_ns", "delta_i_ua", durations, delta_i);
  fill_map(m, opts, [&](std::size_t r, std::size_t c, Rng& rng) {
    PulseSchedule s;
    s.drive = p.drive_mode;
    s.drive_amplitude = p.drive_amplitude_v;
    s.total_duration = durations[r];
    if (durations[r] > 0) s.pulses.push_back({delta_i[c], 0.0, durations[r], rise_ns});
    const auto res = evolve(p, s, State::ground(), {opts.dt, false});
    return measure(res.final_state, p, opts.shots, rng);
  });
  return m;
}

std::vector<double> currents_for_detunings(const DeviceParams& p,
                                           const std::vector<double>& detunings_ghz) {
  std::vector<double> out;
  out.reserve(detunings_ghz.size());
  for (double d : detunings_ghz) out.push_back(delta_i_for_frequency(p, p.f_cw_ghz + d));
  return out;
}

double chevron_asymmetry(const HeatMap& m) {
  const std::size_t n = m.cols.size();
  double num = 0, den = 0;
  for (const auto& row : m.values) {
    for (std::size_t c = 0; c < n / 2; ++c) {
      num += std::abs(row[c] - row[n - 1 - c]);
      den += row[c] + row[n - 1 - c];
    }
  }
  return den > 0 ? num / den : 0.0;
}

HeatMap ramsey_axis_scan(const DeviceParams& p, const RamseyAxisSetup& setup,
                         const std::vector<double>& delta_i_mid, const std::vector<double>& dt_mid,
                         const ScanOptions& opts) {
  HeatMap m = blank_map("dt_mid_ns", "delta_i_mid_ua", dt_mid, delta_i_mid);
  fill_map(m, opts, [&](std::size_t r, std::size_t c, Rng& rng) {
    PulseSchedule s;
    s.drive = p.drive_mode;
    s.drive_amplitude = p.drive_amplitude_v;
    s.pulses.push_back({setup.delta_i_res, 0.0, setup.t_half, setup.rise_ns});
    const double mid_start = setup.t_half;
    if (delta_i_mid[c] != 0 && dt_mid[r] > 0) {
      s.pulses.push_back({delta_i_mid[c], mid_start, dt_mid[r], setup.rise_ns});
    }
    const double second = mid_start + dt_mid[r] + p.latency_ns;
    s.pulses.push_back({setup.delta_i_res, second, setup.t_half, setup.rise_ns});
    s.total_duration = second + setup.t_half;
    const auto res = evolve(p, s, State::ground(), {opts.dt, false});
    return measure(res.final_state, p, opts.shots, rng);
  });
  return m;
}

SwapSpectroscopy swap_spectroscopy(const DeviceParams& p, bool prepare_excited,
                                   const std::vector<double>& freqs_ghz,
                                   const std::vector<double>& hold_ns, const ScanOptions& opts) {
  SwapSpectroscopy out;
  out.pe = blank_map("t_ns", "f_q_ghz", hold_ns, freqs_ghz);
  std::vector<double> di;
  di.reserve(freqs_ghz.size());
  for (double f : freqs_ghz) di.push_back(delta_i_for_frequency(p, f));
  const State rho0 = prepare_excited ? State::excited() : State::ground();
  fill_map(out.pe, opts, [&](std::size_t r, std::size_t c, Rng& rng) {
    PulseSchedule s;
    s.drive = DriveMode::Off;
    s.total_duration = hold_ns[r];
    if (hold_ns[r] > 0) s.pulses.push_back({di[c], 0.0, hold_ns[r], p.rise_time_ns});
    const auto res = evolve(p, s, rho0, {opts.dt, false});
    return measure(res.final_state, p, opts.shots, rng);
  });
  out.prepared_survival = out.pe;
  if (!prepare_excited) {
    for (auto& row : out.prepared_survival.values)
      for (double& v : row) v = 1 - v;
  }
  return out;
}

double delta_pe5(const std::vector<double>& column) {
  if (column.size() < 10) throw std::invalid_argument("delta_pe5: need at least ten values");
  std::vector<double> v = column;
  std::sort(v.begin(), v.end());
  double lo = 0, hi = 0;
  for (int k = 0; k < 5; ++k) {
    lo += v[static_cast<std::size_t>(k)];
    hi += v[v.size() - 1 - static_cast<std::size_t>(k)];
  }
  return (hi - lo) / 5;
}

OnOffResult on_off_stats(const std::vector<HeatMap>& maps, const std::vector<double>& drive_v) {
  if (maps.empty() || maps.size() != drive_v.size()) {
    throw std::invalid_argument("on_off_stats: one map per drive amplitude required");
  }
  OnOffResult out;
  out.stat = blank_map("drive_v", maps.front().col_label, drive_v, maps.front().cols);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0;
  for (std::size_t v = 0; v < maps.size(); ++v) {
    if (maps[v].cols.size() != maps.front().cols.size()) {
      throw std::invalid_argument("on_off_stats: maps have different column grids");
    }
    for (std::size_t c = 0; c < maps[v].cols.size(); ++c) {
      std::vector<double> col;
      col.reserve(maps[v].rows.size());
      for (const auto& row : maps[v].values) col.push_back(row[c]);
      const double d = delta_pe5(col);
      out.stat.values[v][c] = d;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  const double floor = std::numeric_limits<double>::epsilon();
  out.ratio = std::max(hi, floor) / std::max(lo, floor);
  return out;
}

}  // namespace qdx
