#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qdx/analysis.hpp"

namespace qdx {

namespace {

double validate_spacing(const TimeSeries& s) {
  if (s.times.size() != s.values.size()) throw std::invalid_argument("time series length mismatch");
  if (s.times.size() < 3) throw std::invalid_argument("time series needs at least three samples");
  const double dt = (s.times.back() - s.times.front()) / static_cast<double>(s.times.size() - 1);
  if (!(dt > 0)) throw std::invalid_argument("time series is not increasing");
  for (std::size_t i = 1; i < s.times.size(); ++i) {
    const double d = s.times[i] - s.times[i - 1];
    if (!(d > 0) || std::abs(d - dt) > 0.01 * dt) {
      throw std::invalid_argument("time series spacing is not uniform within 1%");
    }
  }
  return dt;
}

std::size_t block_size(double tau, double dt, std::size_t n) {
  const double m = tau / dt;
  const double mr = std::round(m);
  if (!(mr >= 1) || std::abs(m - mr) > 1e-6 * std::max(1.0, mr)) {
    throw std::invalid_argument("tau must be a positive integer multiple of the sample spacing");
  }
  const auto mi = static_cast<std::size_t>(mr);
  if (3 * mi > n) throw std::invalid_argument("tau exceeds a third of the series span");
  return mi;
}

}  // namespace

std::vector<AllanPoint> allan_deviation(const TimeSeries& series, const std::vector<double>& taus) {
  const double dt = validate_spacing(series);
  const auto& y = series.values;
  const std::size_t n = y.size();
  std::vector<AllanPoint> out;
  out.reserve(taus.size());
  for (double tau : taus) {
    const std::size_t m = block_size(tau, dt, n);
    const std::size_t terms = n - 2 * m + 1;
    double acc = 0;
    for (std::size_t j = 0; j < terms; ++j) {
      // Summing pairwise differences (not prefix sums) keeps a constant
      // series at exactly zero and avoids cancellation on large offsets.
      double d = 0;
      for (std::size_t i = 0; i < m; ++i) d += y[j + m + i] - y[j + i];
      if (m > 1) d /= static_cast<double>(m);
      acc += d * d;
    }
    const double var = acc / (2.0 * static_cast<double>(terms));
    const double ad = std::sqrt(var);
    const double n_eff = std::floor(static_cast<double>(n) / static_cast<double>(m)) - 1;
    out.push_back({tau, ad, ad / std::sqrt(n_eff)});
  }
  return out;
}

std::vector<AllanPoint> allan_deviation_nonoverlapping(const TimeSeries& series,
                                                       const std::vector<double>& taus) {
  const double dt = validate_spacing(series);
  const auto& y = series.values;
  const std::size_t n = y.size();
  std::vector<AllanPoint> out;
  for (double tau : taus) {
    const std::size_t m = block_size(tau, dt, n);
    const std::size_t blocks = n / m;
    std::vector<double> means(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
      double s = 0;
      for (std::size_t i = 0; i < m; ++i) s += y[b * m + i];
      means[b] = m == 1 ? s : s / static_cast<double>(m);
    }
    double acc = 0;
    for (std::size_t b = 0; b + 1 < blocks; ++b) {
      const double d = means[b + 1] - means[b];
      acc += d * d;
    }
    const double ad = std::sqrt(acc / (2.0 * static_cast<double>(blocks - 1)));
    out.push_back({tau, ad, ad / std::sqrt(static_cast<double>(blocks - 1))});
  }
  return out;
}

std::vector<double> default_allan_taus(const TimeSeries& series, int per_decade) {
  const double dt = validate_spacing(series);
  const std::size_t max_m = series.values.size() / 3;
  std::vector<double> taus;
  std::size_t last = 0;
  const double ratio = std::pow(10.0, 1.0 / std::max(1, per_decade));
  for (double mf = 1; mf <= static_cast<double>(max_m); mf *= ratio) {
    const auto m = static_cast<std::size_t>(std::round(mf));
    if (m != last && m >= 1 && m <= max_m) {
      taus.push_back(static_cast<double>(m) * dt);
      last = m;
    }
  }
  return taus;
}

double percentile(const std::vector<double>& values, double q, const std::vector<bool>& exclude) {
  if (!(q >= 0 && q <= 100)) throw std::invalid_argument("percentile: q outside [0, 100]");
  if (!exclude.empty() && exclude.size() != values.size()) {
    throw std::invalid_argument("percentile: mask length mismatch");
  }
  std::vector<double> kept;
  kept.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (exclude.empty() || !exclude[i]) kept.push_back(values[i]);
  }
  if (kept.empty()) throw std::invalid_argument("percentile: no values left after exclusion");
  std::sort(kept.begin(), kept.end());
  const double rank = q / 100.0 * static_cast<double>(kept.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, kept.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return kept[lo] + frac * (kept[hi] - kept[lo]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: bad input");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) throw std::invalid_argument("loglog_slope: non-positive value");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace qdx
