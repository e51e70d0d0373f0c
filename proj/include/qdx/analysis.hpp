#pragma once

// Nonlinear least-squares fits for the decay and oscillation models used by
// the benchmarking and calibration code, plus Allan deviation and
// percentile statistics for time series.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qdx {

enum class FitModel {
  ExpDecay,        // A p^x + B                                   params A, p, B
  Sinusoid,        // offset + amp sin(2 pi f x + phase)           params offset, amp, freq, phase
  DampedSinusoid,  // offset + amp exp(-x/tau) sin(2 pi f x + phase) params offset, amp, freq, phase, tau
  CosineFringe,    // offset + amp cos(2 pi f x + phase)           params offset, amp, freq, phase
};

std::vector<std::string> model_parameter_names(FitModel model);
double model_value(FitModel model, const std::vector<double>& params, double x);

struct FitOptions {
  std::optional<std::vector<double>> initial;
  std::optional<std::vector<double>> weights;  // per-point, multiplies squared residuals
  int max_iterations = 200;
  double relative_tolerance = 1e-12;
};

struct FitResult {
  FitModel model = FitModel::ExpDecay;
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> stderrs;  // empty unless converged
  double residual_norm = 0;     // sqrt of the (weighted) sum of squares
  bool converged = false;
  bool degenerate = false;      // constant data; parameters are a convention
  int iterations = 0;

  double param(const std::string& name) const;
  double error(const std::string& name) const;
};

/// Levenberg-Marquardt fit. Throws FitError on a singular Jacobian at the
/// optimum; returns converged = false when the iteration budget runs out.
FitResult fit_nlls(FitModel model, const std::vector<double>& x, const std::vector<double>& y,
                   const FitOptions& options = {});

/// Deterministic starting point used when FitOptions::initial is absent.
std::vector<double> initial_guess(FitModel model, const std::vector<double>& x,
                                  const std::vector<double>& y);

/// "name value stderr" lines, shared by every fit report.
void write_fit_report(std::ostream& out, const FitResult& fit);

struct TimeSeries {
  std::vector<double> times;  // seconds, strictly increasing, nominally uniform
  std::vector<double> values;
};

struct AllanPoint {
  double tau = 0;
  double deviation = 0;
  double stderr = 0;
};

/// Overlapping Allan deviation. The error bar is AD / sqrt(floor(N/m) - 1),
/// with m = tau / spacing the number of samples per averaging block.
std::vector<AllanPoint> allan_deviation(const TimeSeries& series, const std::vector<double>& taus);

/// Non-overlapping estimator, kept for cross-checks.
std::vector<AllanPoint> allan_deviation_nonoverlapping(const TimeSeries& series,
                                                       const std::vector<double>& taus);

/// Taus at every integer multiple of the spacing up to span/3, log-thinned to
/// about `per_decade` points per decade.
std::vector<double> default_allan_taus(const TimeSeries& series, int per_decade = 10);

/// Linear-interpolation percentile, q in [0, 100]. Entries whose mask is true
/// are excluded first.
double percentile(const std::vector<double>& values, double q,
                  const std::vector<bool>& exclude = {});

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qdx
