#include "qdx/benchmarking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "qdx/error.hpp"
#include "qdx/parallel.hpp"

namespace qdx {

void GateNoiseModel::validate() const {
  if (!(depolarizing >= 0 && depolarizing <= 1) ||
      !(amplitude_damping >= 0 && amplitude_damping <= 1)) {
    throw std::invalid_argument("noise probabilities must lie in [0, 1]");
  }
  if (!std::isfinite(overrotation) || !std::isfinite(axis_error)) {
    throw std::invalid_argument("coherent error terms must be finite");
  }
}

ChannelBackend::ChannelBackend(GateNoiseModel noise, double visibility)
    : noise_(noise), visibility_(visibility) {
  noise_.validate();
  if (!(visibility > 0 && visibility <= 1)) throw std::invalid_argument("visibility must be in (0, 1]");
}

namespace {

void slot_noise(Mat2& rho, const GateNoiseModel& n) {
  if (n.depolarizing > 0) {
    rho *= 1 - n.depolarizing;
    rho(0, 0) += 0.5 * n.depolarizing;
    rho(1, 1) += 0.5 * n.depolarizing;
  }
  if (n.amplitude_damping > 0) {
    const double keep = 1 - n.amplitude_damping;
    rho(0, 0) += n.amplitude_damping * rho(1, 1);
    rho(1, 1) *= keep;
    const double s = std::sqrt(keep);
    rho(0, 1) *= s;
    rho(1, 0) *= s;
  }
}

/// Re-raises `e` with sequence coordinates prepended, keeping its category.
[[noreturn]] void rethrow_with_context(const std::string& where) {
  try {
    throw;
  } catch (const InvariantError& e) {
    throw InvariantError(where + ": " + e.what());
  } catch (const FitError& e) {
    throw FitError(where + ": " + e.what());
  } catch (const CalibrationError& e) {
    throw CalibrationError(where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const InvalidState& e) {
    throw InvalidState(where + ": " + e.what());
  } catch (const InvalidChannel& e) {
    throw InvalidChannel(where + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
}

std::string where(int m, int j) {
  return "sequence " + std::to_string(j) + " at length " + std::to_string(m);
}

}  // namespace

Mat2 ChannelBackend::run(const PhysicalPulseList& pl, Rng& /*rng*/) const {
  Mat2 rho = Mat2::Zero();
  rho(0, 0) = 1;
  std::size_t idle = 0;
  auto idles_before = [&](std::size_t k) {
    while (idle < pl.idle_positions.size() &&
           static_cast<std::size_t>(pl.idle_positions[idle]) == k) {
      slot_noise(rho, noise_);
      ++idle;
    }
  };
  for (std::size_t k = 0; k < pl.pulses.size(); ++k) {
    idles_before(k);
    const auto& p = pl.pulses[k];
    const double angle = p.rotation + std::copysign(noise_.overrotation, p.rotation);
    const Mat2 u = inplane_rotation(p.axis_angle + noise_.axis_error, angle);
    rho = u * rho * u.adjoint();
    slot_noise(rho, noise_);
  }
  idles_before(pl.pulses.size());
  const Mat2 z = z_rotation(pl.frame_phase);
  return z * rho * z.adjoint();
}

double ChannelBackend::measure_ground(const Mat2& rho, const Shots& shots, Rng& rng) const {
  const double pe = std::clamp(rho(1, 1).real(), 0.0, 1.0);
  const double pe_obs = 0.5 + visibility_ * (pe - 0.5);
  return sample_probability(1 - pe_obs, shots, rng);
}

std::vector<int> log_spaced_lengths(int first, int last, int count) {
  if (first < 1 || last < first || count < 1) throw std::invalid_argument("bad length grid");
  std::vector<int> out;
  for (int k = 0; k < count; ++k) {
    const double f = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    const int m = static_cast<int>(std::lround(std::exp(std::log(first) + f * (std::log(last) - std::log(first)))));
    if (out.empty() || m > out.back()) out.push_back(m);
  }
  return out;
}

void RBConfig::validate() const {
  if (lengths.empty()) throw std::invalid_argument("RB config: no sequence lengths");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) throw std::invalid_argument("RB config: lengths must be positive");
    if (i > 0 && lengths[i] <= lengths[i - 1]) {
      throw std::invalid_argument("RB config: lengths must be strictly increasing");
    }
  }
  if (sequences_per_length < 1) throw std::invalid_argument("RB config: N must be at least 1");
}

std::vector<double> DecayRecord::means() const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) {
    double s = 0;
    for (double x : v) s += x;
    out.push_back(v.empty() ? 0.0 : s / static_cast<double>(v.size()));
  }
  return out;
}

void write_decay_csv(std::ostream& out, const DecayRecord& r) {
  out << "m,sequence,value,timestamp_s\n";
  char buf[128];
  for (std::size_t i = 0; i < r.lengths.size(); ++i) {
    for (std::size_t j = 0; j < r.values[i].size(); ++j) {
      const double ts = r.timestamps.empty() ? 0.0 : r.timestamps[i][j];
      std::snprintf(buf, sizeof buf, "%d,%zu,%.12g,%.6f\n", r.lengths[i], j, r.values[i][j], ts);
      out << buf;
    }
  }
}

namespace {

std::vector<int> draw_cliffords(int m, Rng& rng) {
  std::vector<int> c(static_cast<std::size_t>(m));
  for (auto& x : c) x = static_cast<int>(uniform_index(rng, kCliffordCount));
  return c;
}

void check_identity(const std::vector<int>& cliffords, int recovery) {
  const auto& t = CliffordTable::instance();
  int acc = 0;
  for (int c : cliffords) acc = t.compose(acc, c);
  if (t.compose(acc, recovery) != 0) {
    throw InvariantError("RB sequence with recovery is not the identity");
  }
}

RBSequence build_sequence(std::vector<int> cliffords, const std::vector<int>& extra, Rng& rng) {
  RBSequence s;
  s.cliffords = std::move(cliffords);
  s.recovery = recovery_index(s.cliffords);
  check_identity(s.cliffords, s.recovery);
  for (int c : s.cliffords) {
    const auto d = decompose(c, rng);
    s.primitives.insert(s.primitives.end(), d.begin(), d.end());
  }
  const auto r = decompose(s.recovery, rng);
  s.primitives.insert(s.primitives.end(), r.begin(), r.end());
  for (int c : extra) {
    const auto d = decompose(c, rng);
    s.primitives.insert(s.primitives.end(), d.begin(), d.end());
  }
  s.compiled = compile_virtual_z(s.primitives);
  return s;
}

DecayRecord blank_record(const RBConfig& c) {
  DecayRecord r;
  r.lengths = c.lengths;
  const auto n = static_cast<std::size_t>(c.sequences_per_length);
  r.values.assign(c.lengths.size(), std::vector<double>(n, 0.0));
  r.timestamps.assign(c.lengths.size(), std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < c.lengths.size(); ++i)
    for (std::size_t j = 0; j < n; ++j)
      r.timestamps[i][j] = static_cast<double>(i * n + j) * c.seconds_per_sequence;
  return r;
}

// Clifford indices of the readout rotations that map <sx> and <sy> onto <sz>.
constexpr int kMeasureX = 15;  // rotation by pi/2 about -y
constexpr int kMeasureY = 12;  // rotation by pi/2 about +x

}  // namespace

RBSequence draw_sequence(int m, Rng& rng, const std::vector<int>& extra) {
  if (m < 0) throw std::invalid_argument("sequence length must be non-negative");
  return build_sequence(draw_cliffords(m, rng), extra, rng);
}

DecayRecord run_rb(const Backend& backend, const RBConfig& config) {
  config.validate();
  DecayRecord rec = blank_record(config);
  const auto n = static_cast<std::size_t>(config.sequences_per_length);
  parallel_for(config.lengths.size() * n, config.jobs, [&](std::size_t k) {
    const std::size_t i = k / n;
    const std::size_t j = k % n;
    try {
      Rng rng(derive_seed(config.seed, i, j));
      const auto seq = draw_sequence(config.lengths[i], rng);
      const Mat2 rho = backend.run(seq.compiled, rng);
      rec.values[i][j] = backend.measure_ground(rho, config.shots, rng);
    } catch (...) {
      rethrow_with_context(where(config.lengths[i], static_cast<int>(j)));
    }
  });
  return rec;
}

PurityRecord run_pb(const Backend& backend, const RBConfig& config, bool bias_correct) {
  config.validate();
  if (bias_correct && !config.shots.is_infinite() && config.shots.count() < 2) {
    throw std::invalid_argument("bias correction needs at least two shots");
  }
  PurityRecord out;
  out.purity = blank_record(config);
  out.ground = blank_record(config);
  out.bias_corrected = bias_correct;
  const auto n = static_cast<std::size_t>(config.sequences_per_length);
  parallel_for(config.lengths.size() * n, config.jobs, [&](std::size_t k) {
    const std::size_t i = k / n;
    const std::size_t j = k % n;
    try {
      // One physical realisation of the sequence; the readout variants only
      // append their basis change, so all three see the same coherent errors.
      Rng draw(derive_seed(config.seed, i, j));
      const auto base = build_sequence(draw_cliffords(config.lengths[i], draw), {}, draw);
      double purity = 0;
      const int extras[3] = {-1, kMeasureX, kMeasureY};
      for (int v = 0; v < 3; ++v) {
        Rng rng(derive_seed(config.seed, i, j, static_cast<std::uint64_t>(v) + 1));
        PrimitiveSequence prims = base.primitives;
        if (extras[v] >= 0) {
          const auto d = decompose(extras[v], rng);
          prims.insert(prims.end(), d.begin(), d.end());
        }
        const auto compiled = compile_virtual_z(prims);
        const double pg = backend.measure_ground(backend.run(compiled, rng), config.shots, rng);
        if (v == 0) out.ground.values[i][j] = pg;
        double s2 = (2 * pg - 1) * (2 * pg - 1);
        if (bias_correct && !config.shots.is_infinite()) {
          const double inv = 1.0 / static_cast<double>(config.shots.count());
          s2 = (s2 - inv) / (1 - inv);
        }
        purity += s2;
      }
      out.purity.values[i][j] = purity;
    } catch (...) {
      rethrow_with_context(where(config.lengths[i], static_cast<int>(j)));
    }
  });
  return out;
}

namespace {

FitResult fit_decay(const DecayRecord& record, bool weighted, int exponent_shift) {
  std::set<int> distinct(record.lengths.begin(), record.lengths.end());
  if (distinct.size() < 3) throw std::invalid_argument("decay fit needs at least three lengths");
  std::vector<double> x, y;
  const auto means = record.means();
  for (std::size_t i = 0; i < record.lengths.size(); ++i) {
    x.push_back(static_cast<double>(record.lengths[i] - exponent_shift));
    y.push_back(means[i]);
  }
  FitOptions opts;
  if (weighted) {
    std::vector<double> w;
    for (std::size_t i = 0; i < record.values.size(); ++i) {
      const auto& v = record.values[i];
      double var = 0;
      for (double a : v) var += (a - means[i]) * (a - means[i]);
      const double nv = static_cast<double>(v.size());
      var = v.size() > 1 ? var / (nv - 1) / nv : 0.0;
      w.push_back(1.0 / std::max(var, 1e-12));
    }
    opts.weights = w;
  }
  FitResult fit = fit_nlls(FitModel::ExpDecay, x, y, opts);
  if (!fit.converged) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "decay fit did not converge (residual norm %.3g after %d iterations)",
                  fit.residual_norm, fit.iterations);
    throw FitError(buf);
  }
  return fit;
}

}  // namespace

double rb_fidelity(double p) { return 0.5 + 0.5 * p; }

RBFit fit_rb(const DecayRecord& record, bool weighted) {
  RBFit r;
  r.fit = fit_decay(record, weighted, 0);
  r.A = r.fit.params[0];
  r.p = r.fit.params[1];
  r.B = r.fit.params[2];
  r.A_err = r.fit.stderrs[0];
  r.p_err = r.fit.stderrs[1];
  r.B_err = r.fit.stderrs[2];
  r.fidelity = rb_fidelity(r.p);
  r.fidelity_err = 0.5 * r.p_err;
  return r;
}

double incoherent_error(double u) {
  if (!(u >= 0)) throw std::invalid_argument("unitarity must be non-negative");
  return 0.5 * (1 - std::sqrt(u));
}

PBFit fit_pb(const DecayRecord& record, bool weighted) {
  PBFit r;
  r.fit = fit_decay(record, weighted, 1);
  r.A = r.fit.params[0];
  r.u = r.fit.params[1];
  r.B = r.fit.params[2];
  r.A_err = r.fit.stderrs[0];
  r.u_err = r.fit.stderrs[1];
  r.B_err = r.fit.stderrs[2];
  r.eps_inc = incoherent_error(std::max(0.0, r.u));
  r.eps_inc_err = r.u > 0 ? r.u_err / (4 * std::sqrt(r.u)) : 0.0;
  return r;
}

CoherentError coherent_error(double epsilon, double epsilon_inc) {
  if (!(epsilon >= 0) || !(epsilon_inc >= 0)) {
    throw std::invalid_argument("error rates must be non-negative");
  }
  CoherentError c;
  c.value = epsilon - epsilon_inc;
  c.negative = c.value < 0;
  return c;
}

std::pair<int, int> window_bounds(int j, int window, int iterations) {
  if (window < 1 || iterations < 1 || j < 0 || j >= iterations) {
    throw std::invalid_argument("window_bounds: bad arguments");
  }
  const int left = window / 2;
  const int right = window - 1 - left;
  const int e = std::min({right, j, iterations - 1 - j});
  const int extra = (left > right && e == right && j - e - 1 >= 0) ? 1 : 0;
  return {j - e - extra, j + e};
}

std::vector<std::vector<double>> stability_iterations(const Backend& backend,
                                                      const StabilityConfig& config) {
  RBConfig rb = config.rb;
  rb.sequences_per_length = 1;
  rb.validate();
  if (config.window < 1 || config.iterations < config.window) {
    throw std::invalid_argument("stability: need window >= 1 and iterations >= window");
  }
  std::vector<std::vector<double>> out(static_cast<std::size_t>(config.iterations),
                                       std::vector<double>(rb.lengths.size(), 0.0));
  parallel_for(out.size(), rb.jobs, [&](std::size_t it) {
    for (std::size_t i = 0; i < rb.lengths.size(); ++i) {
      try {
        Rng rng(derive_seed(rb.seed, it, i, 0x5eed));
        const auto seq = draw_sequence(rb.lengths[i], rng);
        out[it][i] = backend.measure_ground(backend.run(seq.compiled, rng), rb.shots, rng);
      } catch (...) {
        rethrow_with_context("iteration " + std::to_string(it) + ", length " +
                             std::to_string(rb.lengths[i]));
      }
    }
  });
  return out;
}

StabilitySeries stability_from_iterations(const std::vector<int>& lengths,
                                          const std::vector<std::vector<double>>& per_iteration,
                                          int window, double period_s, unsigned jobs) {
  const int n_it = static_cast<int>(per_iteration.size());
  StabilitySeries s;
  s.times.resize(per_iteration.size());
  s.fidelity.resize(per_iteration.size());
  s.fidelity_err.resize(per_iteration.size());
  s.window_used.resize(per_iteration.size());
  parallel_for(per_iteration.size(), jobs, [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    const auto [lo, hi] = window_bounds(j, window, n_it);
    DecayRecord rec;
    rec.lengths = lengths;
    rec.values.assign(lengths.size(), {});
    for (int k = lo; k <= hi; ++k)
      for (std::size_t i = 0; i < lengths.size(); ++i)
        rec.values[i].push_back(per_iteration[static_cast<std::size_t>(k)][i]);
    const auto fit = fit_rb(rec);
    s.times[jj] = static_cast<double>(j) * period_s;
    s.fidelity[jj] = fit.fidelity;
    s.fidelity_err[jj] = fit.fidelity_err;
    s.window_used[jj] = hi - lo + 1;
  });
  return s;
}

StabilitySeries temporal_stability(const Backend& backend, const StabilityConfig& config) {
  const auto per = stability_iterations(backend, config);
  return stability_from_iterations(config.rb.lengths, per, config.window, config.iteration_period_s,
                                   config.rb.jobs);
}

double depolarizing_clifford_p(double lambda) {
  const auto& t = CliffordTable::instance();
  double total = 0;
  for (int c = 0; c < kCliffordCount; ++c) {
    const auto& alts = t.decompositions(c);
    double acc = 0;
    for (const auto& seq : alts) {
      acc += std::pow(1 - lambda, compile_virtual_z(seq).microwave_slots());
    }
    total += acc / static_cast<double>(alts.size());
  }
  return total / kCliffordCount;
}

}  // namespace qdx
