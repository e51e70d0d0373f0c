#pragma once

// Randomized and purity benchmarking: sequence generation, execution on a
// pluggable backend, decay fits and moving-window stability analysis.

#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include "qdx/analysis.hpp"
#include "qdx/clifford.hpp"
#include "qdx/core.hpp"
#include "qdx/random.hpp"

namespace qdx {

/// Per-slot error channel of the channel backend. Each microwave slot (pulse
/// or idle) applies the coherent error to its rotation, then depolarizing,
/// then amplitude damping.
struct GateNoiseModel {
  double depolarizing = 0;       // lambda: rho -> (1 - lambda) rho + lambda I/2
  double amplitude_damping = 0;  // gamma
  double overrotation = 0;       // rad added to |rotation| of every pulse
  double axis_error = 0;         // rad added to every pulse axis angle

  void validate() const;
};

/// Executes compiled pulse lists starting from |g>.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual Mat2 run(const PhysicalPulseList& pulses, Rng& rng) const = 0;
  /// Sampled probability of reading |g>.
  virtual double measure_ground(const Mat2& rho, const Shots& shots, Rng& rng) const = 0;
};

class ChannelBackend : public Backend {
 public:
  explicit ChannelBackend(GateNoiseModel noise = {}, double visibility = 1.0);
  Mat2 run(const PhysicalPulseList& pulses, Rng& rng) const override;
  double measure_ground(const Mat2& rho, const Shots& shots, Rng& rng) const override;
  const GateNoiseModel& noise() const { return noise_; }

 private:
  GateNoiseModel noise_;
  double visibility_;
};

/// log-spaced integers in [first, last] with duplicates removed.
std::vector<int> log_spaced_lengths(int first, int last, int count);

struct RBConfig {
  std::vector<int> lengths;
  int sequences_per_length = 1;
  Shots shots = Shots::infinite();
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  double seconds_per_sequence = 0;  // synthetic wall clock for timestamps

  void validate() const;
};

struct DecayRecord {
  std::vector<int> lengths;
  std::vector<std::vector<double>> values;      // [length][sequence]
  std::vector<std::vector<double>> timestamps;  // seconds, same shape

  std::vector<double> means() const;
};

void write_decay_csv(std::ostream& out, const DecayRecord& r);

/// A drawn RB sequence before and after compilation.
struct RBSequence {
  std::vector<int> cliffords;
  int recovery = 0;
  PrimitiveSequence primitives;
  PhysicalPulseList compiled;
};

/// Random sequence of length m plus recovery; `extra` Clifford indices are
/// appended after the recovery (readout basis changes). Throws
/// InvariantError if the group product is not the identity.
RBSequence draw_sequence(int m, Rng& rng, const std::vector<int>& extra = {});

DecayRecord run_rb(const Backend& backend, const RBConfig& config);

struct PurityRecord {
  DecayRecord purity;       // <sx>^2 + <sy>^2 + <sz>^2 per sequence
  DecayRecord ground;       // P_g of the plain (z) readout, usable as RB data
  bool bias_corrected = false;
};

/// Three readouts per sequence. Purity uses plug-in squared means unless
/// `bias_correct` removes the finite-shot bias.
PurityRecord run_pb(const Backend& backend, const RBConfig& config, bool bias_correct = false);

struct RBFit {
  FitResult fit;
  double p = 0, p_err = 0;
  double A = 0, A_err = 0;
  double B = 0, B_err = 0;
  double fidelity = 0, fidelity_err = 0;  // 1/2 + p/2
};

/// Fits A p^m + B to the per-length means. Throws FitError when the fit
/// does not converge.
RBFit fit_rb(const DecayRecord& record, bool weighted = false);

/// F = 1/d + p (1 - 1/d) with d = 2.
double rb_fidelity(double p);

struct PBFit {
  FitResult fit;
  double u = 0, u_err = 0;
  double A = 0, A_err = 0;
  double B = 0, B_err = 0;
  double eps_inc = 0, eps_inc_err = 0;
};

/// Fits A' u^(m-1) + B' to the per-length mean purities.
PBFit fit_pb(const DecayRecord& record, bool weighted = false);

/// (1 - sqrt(u)) / 2.
double incoherent_error(double u);

struct CoherentError {
  double value = 0;
  bool negative = false;  // fits disagree; reported, not clamped
};

CoherentError coherent_error(double epsilon, double epsilon_inc);

struct StabilityConfig {
  RBConfig rb;  // sequences_per_length is forced to 1
  int iterations = 0;
  int window = 1;
  double iteration_period_s = 30;
};

struct StabilitySeries {
  std::vector<double> times;  // seconds, iteration centres
  std::vector<double> fidelity;
  std::vector<double> fidelity_err;
  std::vector<int> window_used;
};

/// Window bounds [lo, hi] centred on j. Odd windows are symmetric; even
/// windows put the extra iteration before the centre. Near the edges the
/// window shrinks so it stays centred.
std::pair<int, int> window_bounds(int j, int window, int iterations);

/// One sequence per length per iteration, then a refit on a moving window.
StabilitySeries temporal_stability(const Backend& backend, const StabilityConfig& config);

/// P_g per [iteration][length]; exposed so windows can be refit cheaply.
std::vector<std::vector<double>> stability_iterations(const Backend& backend,
                                                      const StabilityConfig& config);

StabilitySeries stability_from_iterations(const std::vector<int>& lengths,
                                          const std::vector<std::vector<double>>& per_iteration,
                                          int window, double period_s, unsigned jobs);

/// Mean survival factor E[(1 - lambda)^n] per random Clifford, where n is the
/// number of microwave slots of a uniformly drawn minimal decomposition.
double depolarizing_clifford_p(double lambda);

}  // namespace qdx
