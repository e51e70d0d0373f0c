#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "qdx/analysis.hpp"
#include "qdx/error.hpp"

namespace qdx {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

std::size_t parameter_count(FitModel model) {
  switch (model) {
    case FitModel::ExpDecay: return 3;
    case FitModel::Sinusoid: return 4;
    case FitModel::DampedSinusoid: return 5;
    case FitModel::CosineFringe: return 4;
  }
  return 0;
}

/// Value and gradient with respect to the parameters at one abscissa.
double model_eval(FitModel model, const std::vector<double>& q, double x, double* grad) {
  switch (model) {
    case FitModel::ExpDecay: {
      const double px = std::pow(q[1], x);
      if (grad) {
        grad[0] = px;
        grad[1] = x == 0 ? 0.0 : q[0] * x * std::pow(q[1], x - 1);
        grad[2] = 1;
      }
      return q[0] * px + q[2];
    }
    case FitModel::Sinusoid:
    case FitModel::CosineFringe: {
      const double th = kTwoPi * q[2] * x + q[3];
      const double s = std::sin(th);
      const double c = std::cos(th);
      if (model == FitModel::Sinusoid) {
        if (grad) {
          grad[0] = 1;
          grad[1] = s;
          grad[2] = q[1] * c * kTwoPi * x;
          grad[3] = q[1] * c;
        }
        return q[0] + q[1] * s;
      }
      if (grad) {
        grad[0] = 1;
        grad[1] = c;
        grad[2] = -q[1] * s * kTwoPi * x;
        grad[3] = -q[1] * s;
      }
      return q[0] + q[1] * c;
    }
    case FitModel::DampedSinusoid: {
      const double th = kTwoPi * q[2] * x + q[3];
      const double s = std::sin(th);
      const double c = std::cos(th);
      const double e = std::exp(-x / q[4]);
      if (grad) {
        grad[0] = 1;
        grad[1] = e * s;
        grad[2] = q[1] * e * c * kTwoPi * x;
        grad[3] = q[1] * e * c;
        grad[4] = q[1] * e * s * x / (q[4] * q[4]);
      }
      return q[0] + q[1] * e * s;
    }
  }
  return 0;
}

struct Problem {
  FitModel model;
  const std::vector<double>& x;
  const std::vector<double>& y;
  std::vector<double> sqrt_w;

  double cost(const std::vector<double>& q) const {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = sqrt_w[i] * (y[i] - model_eval(model, q, x[i], nullptr));
      s += r * r;
    }
    return s;
  }

  void linearize(const std::vector<double>& q, Eigen::MatrixXd& jac, Eigen::VectorXd& res) const {
    const auto k = parameter_count(model);
    jac.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(k));
    res.resize(static_cast<Eigen::Index>(x.size()));
    std::vector<double> g(k);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double f = model_eval(model, q, x[i], g.data());
      const auto row = static_cast<Eigen::Index>(i);
      res(row) = sqrt_w[i] * (y[i] - f);
      for (std::size_t j = 0; j < k; ++j) jac(row, static_cast<Eigen::Index>(j)) = sqrt_w[i] * g[j];
    }
  }
};

double wrap_phase(double phi) {
  double w = std::remainder(phi, kTwoPi);
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

/// Offset/amplitude/phase by linear least squares at a fixed frequency.
/// Returns the residual sum of squares.
double linear_at_frequency(FitModel model, const std::vector<double>& x,
                           const std::vector<double>& y, double freq, double* offset, double* amp,
                           double* phase) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double th = kTwoPi * freq * x[static_cast<std::size_t>(i)];
    a(i, 0) = 1;
    a(i, 1) = std::sin(th);
    a(i, 2) = std::cos(th);
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  if (offset) *offset = c(0);
  // amp sin(th + phi) = amp cos(phi) sin(th) + amp sin(phi) cos(th)
  // amp cos(th + phi) = amp cos(phi) cos(th) - amp sin(phi) sin(th)
  if (amp) *amp = std::hypot(c(1), c(2));
  if (phase) {
    *phase = model == FitModel::CosineFringe ? std::atan2(-c(1), c(2)) : std::atan2(c(2), c(1));
  }
  return (a * c - b).squaredNorm();
}

void canonicalize(FitModel model, std::vector<double>& q) {
  if (model == FitModel::ExpDecay) return;
  if (q[2] < 0) {
    q[2] = -q[2];
    q[3] = -q[3];
    if (model != FitModel::CosineFringe) q[1] = -q[1];
  }
  if (q[1] < 0) {
    q[1] = -q[1];
    q[3] += std::numbers::pi;
  }
  q[3] = wrap_phase(q[3]);
}

}  // namespace

std::vector<std::string> model_parameter_names(FitModel model) {
  switch (model) {
    case FitModel::ExpDecay: return {"A", "p", "B"};
    case FitModel::Sinusoid: return {"offset", "amp", "freq", "phase"};
    case FitModel::DampedSinusoid: return {"offset", "amp", "freq", "phase", "tau"};
    case FitModel::CosineFringe: return {"offset", "amp", "freq", "phase"};
  }
  return {};
}

double model_value(FitModel model, const std::vector<double>& params, double x) {
  if (params.size() != parameter_count(model)) {
    throw std::invalid_argument("model_value: wrong parameter count");
  }
  return model_eval(model, params, x, nullptr);
}

double FitResult::param(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return params[i];
  throw std::invalid_argument("unknown fit parameter " + name);
}

double FitResult::error(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) {
      if (stderrs.empty()) throw FitError("fit did not converge; no standard errors");
      return stderrs[i];
    }
  throw std::invalid_argument("unknown fit parameter " + name);
}

std::vector<double> initial_guess(FitModel model, const std::vector<double>& x,
                                  const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("initial_guess: need at least two points");

  if (model == FitModel::ExpDecay) {
    // Sort by abscissa so "head" and "tail" are meaningful for any input order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    const std::size_t tail = std::max<std::size_t>(1, n / 5);
    double b = 0;
    for (std::size_t k = n - tail; k < n; ++k) b += y[order[k]];
    b /= static_cast<double>(tail);
    double head = y[order[0]];
    double a = head - b;
    // Log-linear regression of |y - B| against x over points clearly above
    // the tail level.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    const double floor = 0.05 * std::abs(a);
    for (std::size_t k = 0; k < n - tail; ++k) {
      const double d = std::abs(y[order[k]] - b);
      if (d <= floor || d <= 0) continue;
      const double lx = x[order[k]];
      const double ly = std::log(d);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++cnt;
    }
    double p = 0.99;
    if (cnt >= 2) {
      const double den = cnt * sxx - sx * sx;
      if (den > 0) {
        const double slope = (cnt * sxy - sx * sy) / den;
        const double cand = std::exp(slope);
        if (std::isfinite(cand) && cand > 0 && cand < 1) p = cand;
        const double intercept = (sy - slope * sx) / cnt;
        const double amp = std::exp(intercept);
        if (std::isfinite(amp)) a = std::copysign(amp, a);
      }
    }
    return {a, p, b};
  }

  // Coarse spectrum by direct summation up to the Nyquist rate of the mean
  // spacing, then a fine scan of the linear least-squares residual around
  // the peak.
  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const double span = *xmax_it - *xmin_it;
  if (!(span > 0)) throw FitError("oscillation fit needs distinct abscissae");
  const double nyquist = 0.5 * static_cast<double>(n - 1) / span;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  const int bins = static_cast<int>(std::max<std::size_t>(200, 8 * n));
  const double df = nyquist / bins;
  double best_f = df;
  double best_pow = -1;
  for (int k = 1; k <= bins; ++k) {
    const double f = k * df;
    double re = 0, im = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double th = kTwoPi * f * x[i];
      re += (y[i] - mean) * std::cos(th);
      im += (y[i] - mean) * std::sin(th);
    }
    const double pw = re * re + im * im;
    if (pw > best_pow) {
      best_pow = pw;
      best_f = f;
    }
  }
  double best_rss = std::numeric_limits<double>::infinity();
  double f0 = best_f;
  for (int k = -40; k <= 40; ++k) {
    const double f = best_f + k * df / 20;
    if (f <= 0) continue;
    const double rss = linear_at_frequency(model, x, y, f, nullptr, nullptr, nullptr);
    if (rss < best_rss) {
      best_rss = rss;
      f0 = f;
    }
  }
  double off = 0, amp = 0, phase = 0;
  linear_at_frequency(model, x, y, f0, &off, &amp, &phase);
  if (model == FitModel::DampedSinusoid) return {off, amp, f0, phase, 2 * span};
  return {off, amp, f0, phase};
}

FitResult fit_nlls(FitModel model, const std::vector<double>& x, const std::vector<double>& y,
                   const FitOptions& options) {
  const std::size_t k = parameter_count(model);
  const std::size_t n = x.size();
  if (y.size() != n) throw std::invalid_argument("fit_nlls: x and y lengths differ");
  if (n < k + 1) throw std::invalid_argument("fit_nlls: need at least params + 1 points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw std::invalid_argument("fit_nlls: non-finite data");
    }
  }

  FitResult out;
  out.model = model;
  out.names = model_parameter_names(model);

  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  const double ymean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  if (*ymax - *ymin <= 1e-14 * std::max(1.0, std::abs(ymean))) {
    if (model != FitModel::ExpDecay) throw FitError("constant data has no oscillation to fit");
    out.params = {0.0, 1.0, ymean};
    out.stderrs = {0.0, 0.0, 0.0};
    out.converged = true;
    out.degenerate = true;
    return out;
  }

  Problem prob{model, x, y, std::vector<double>(n, 1.0)};
  if (options.weights) {
    if (options.weights->size() != n) throw std::invalid_argument("fit_nlls: weight count");
    for (std::size_t i = 0; i < n; ++i) {
      if (!((*options.weights)[i] >= 0)) throw std::invalid_argument("fit_nlls: negative weight");
      prob.sqrt_w[i] = std::sqrt((*options.weights)[i]);
    }
  }

  std::vector<double> q = options.initial ? *options.initial : initial_guess(model, x, y);
  if (q.size() != k) throw std::invalid_argument("fit_nlls: initial guess has wrong size");

  double cost = prob.cost(q);
  if (!std::isfinite(cost)) throw FitError("fit_nlls: model is not finite at the initial guess");

  Eigen::MatrixXd jac;
  Eigen::VectorXd res;
  double lambda = -1;
  bool converged = false;
  int it = 0;
  for (; it < options.max_iterations && !converged; ++it) {
    if (cost == 0) {
      converged = true;
      break;
    }
    prob.linearize(q, jac, res);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * res;
    Eigen::VectorXd scale = jtj.diagonal();
    const double max_diag = scale.maxCoeff();
    for (Eigen::Index j = 0; j < scale.size(); ++j) scale(j) = std::max(scale(j), 1e-12 * max_diag);
    if (lambda < 0) lambda = 1e-3;

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal() += lambda * scale;
      const Eigen::VectorXd step = lhs.ldlt().solve(g);
      std::vector<double> trial = q;
      for (std::size_t j = 0; j < k; ++j) trial[j] += step(static_cast<Eigen::Index>(j));
      const double tcost = prob.cost(trial);
      if (step.allFinite() && std::isfinite(tcost) && tcost <= cost) {
        const double rel = (cost - tcost) / cost;
        double qn = 0;
        for (double v : q) qn += v * v;
        const bool tiny_step = step.norm() <= 1e-15 * (std::sqrt(qn) + 1e-15);
        q = trial;
        cost = tcost;
        accepted = true;
        if ((rel < options.relative_tolerance && lambda <= 1.0) || tiny_step) converged = true;
        lambda = std::max(lambda * 0.3, 1e-12);
      } else {
        lambda *= 4;
        if (lambda > 1e16) {
          // No descent direction left at working precision.
          converged = true;
          break;
        }
      }
    }
  }

  canonicalize(model, q);
  out.params = q;
  out.iterations = it;
  out.residual_norm = std::sqrt(prob.cost(q));
  out.converged = converged;
  if (!converged) return out;

  prob.linearize(q, jac, res);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jtj);
  const double emax = es.eigenvalues().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > 1e-14 * emax)) {
    throw FitError("fit_nlls: singular Jacobian at the optimum");
  }
  const Eigen::MatrixXd cov_unit = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                                   es.eigenvectors().transpose();
  const double s2 = prob.cost(q) / static_cast<double>(n - k);
  out.stderrs.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    out.stderrs[j] = std::sqrt(std::max(0.0, s2 * cov_unit(static_cast<Eigen::Index>(j),
                                                            static_cast<Eigen::Index>(j))));
  }
  return out;
}

void write_fit_report(std::ostream& out, const FitResult& fit) {
  char buf[160];
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const double err = fit.stderrs.empty() ? std::numeric_limits<double>::quiet_NaN() : fit.stderrs[i];
    std::snprintf(buf, sizeof buf, "%s %.12g %.6g\n", fit.names[i].c_str(), fit.params[i], err);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "residual_norm %.6g\nconverged %d\niterations %d\n",
                fit.residual_norm, fit.converged ? 1 : 0, fit.iterations);
  out << buf;
}

}  // namespace qdx
