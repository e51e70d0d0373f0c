#include "qdx/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "qdx/error.hpp"
#include "qdx/parallel.hpp"

namespace qdx {

std::string axis_label(Axis a) {
  switch (a) {
    case Axis::PlusZ: return "+z";
    case Axis::MinusZ: return "-z";
    case Axis::PlusX: return "+x";
    case Axis::MinusX: return "-x";
    case Axis::PlusY: return "+y";
    case Axis::MinusY: return "-y";
  }
  return "?";
}

Axis parse_axis(const std::string& label) {
  for (Axis a : kAxes)
    if (axis_label(a) == label) return a;
  throw ConfigError("unknown axis label '" + label + "'");
}

Mat2 axis_state(Axis a) {
  BlochVector<double> v;
  switch (a) {
    case Axis::PlusZ: v.z = 1; break;
    case Axis::MinusZ: v.z = -1; break;
    case Axis::PlusX: v.x = 1; break;
    case Axis::MinusX: v.x = -1; break;
    case Axis::PlusY: v.y = 1; break;
    case Axis::MinusY: v.y = -1; break;
  }
  return density_from_bloch(v).matrix();
}

std::optional<InplaneRotation> preparation_rotation(Axis a) {
  const double h = kPi / 2;
  switch (a) {
    case Axis::PlusZ: return std::nullopt;
    case Axis::MinusZ: return InplaneRotation{0, kPi};
    case Axis::PlusX: return InplaneRotation{h, h};    // Ry(pi/2)
    case Axis::MinusX: return InplaneRotation{h, -h};  // Ry(-pi/2)
    case Axis::PlusY: return InplaneRotation{0, -h};   // Rx(-pi/2)
    case Axis::MinusY: return InplaneRotation{0, h};   // Rx(pi/2)
  }
  return std::nullopt;
}

std::optional<InplaneRotation> measurement_rotation(Axis a) {
  const double h = kPi / 2;
  switch (a) {
    case Axis::PlusZ: return std::nullopt;
    case Axis::MinusZ: return InplaneRotation{0, kPi};
    case Axis::PlusX: return InplaneRotation{h, -h};
    case Axis::MinusX: return InplaneRotation{h, h};
    case Axis::PlusY: return InplaneRotation{0, h};
    case Axis::MinusY: return InplaneRotation{0, -h};
  }
  return std::nullopt;
}

void MeasurementRecord::validate() const {
  for (double p : probability) {
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("record probability outside [0, 1]");
  }
}

void write_record(std::ostream& out, const MeasurementRecord& r) {
  char buf[128];
  for (Axis prep : kAxes) {
    for (Axis meas : kAxes) {
      const int k = qpt_index(prep, meas);
      const auto n = r.shots[static_cast<std::size_t>(k)];
      std::snprintf(buf, sizeof buf, "%s %s %.17g %s\n", axis_label(prep).c_str(),
                    axis_label(meas).c_str(), r.probability[static_cast<std::size_t>(k)],
                    n == 0 ? "inf" : std::to_string(n).c_str());
      out << buf;
    }
  }
}

MeasurementRecord read_record(std::istream& in) {
  MeasurementRecord r;
  std::array<bool, kQptEntries> seen{};
  std::string line;
  int count = 0;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string prep, meas, prob, shots;
    if (!(ls >> prep >> meas >> prob >> shots)) throw ConfigError("record line needs four fields");
    const int k = qpt_index(parse_axis(prep), parse_axis(meas));
    const auto ku = static_cast<std::size_t>(k);
    if (seen[ku]) throw ConfigError("duplicate record entry " + prep + " " + meas);
    seen[ku] = true;
    try {
      r.probability[ku] = std::stod(prob);
      r.shots[ku] = shots == "inf" ? 0 : std::stoull(shots);
    } catch (const std::exception&) {
      throw ConfigError("malformed record line: " + line);
    }
    ++count;
  }
  if (count != kQptEntries) throw ConfigError("record must contain exactly 36 entries");
  r.validate();
  return r;
}

MeasurementRecord qpt_record(const GateExecutor& executor, const Shots& shots, Rng& rng,
                             unsigned jobs) {
  MeasurementRecord r;
  const std::uint64_t base = rng();
  parallel_for(kQptEntries, jobs, [&](std::size_t k) {
    const Axis prep = kAxes[k / 6];
    const Axis meas = kAxes[k % 6];
    double p = 0;
    try {
      p = executor(prep, meas);
    } catch (const std::exception& e) {
      throw InvariantError("QPT entry " + std::to_string(k) + " (" + axis_label(prep) + ", " +
                           axis_label(meas) + "): " + e.what());
    }
    Rng local(derive_seed(base, k));
    r.probability[k] = sample_probability(p, shots, local);
    r.shots[k] = shots.is_infinite() ? 0 : shots.count();
  });
  return r;
}

GateExecutor unitary_executor(const Mat2& u) {
  return [u](Axis prep, Axis meas) {
    const Mat2 rho = u * axis_state(prep) * u.adjoint();
    return std::clamp((axis_state(meas) * rho).trace().real(), 0.0, 1.0);
  };
}

ChoiMatrix::ChoiMatrix(const Mat4& m, double tol) : m_(m) {
  const auto chk = check_choi(m);
  if (chk.hermiticity > tol) throw InvalidChannel("Choi matrix is not Hermitian");
  if (chk.min_eigenvalue < -tol) throw InvalidChannel("Choi matrix is not positive semidefinite");
  if (chk.tp_deviation > tol) throw InvalidChannel("Choi matrix is not trace preserving");
  if (std::abs(m.trace().real() - 2) > tol) throw InvalidChannel("Choi matrix trace is not 2");
}

namespace {

/// rho^T (x) Pi for entry k; predict(C, k) = Re Tr[M_k C].
std::array<Mat4, kQptEntries> build_operators() {
  std::array<Mat4, kQptEntries> ops;
  for (Axis prep : kAxes) {
    for (Axis meas : kAxes) {
      const Mat2 rt = axis_state(prep).transpose();
      const Mat2 pi = axis_state(meas);
      Mat4 m;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = rt(i, j) * pi;
      ops[static_cast<std::size_t>(qpt_index(prep, meas))] = m;
    }
  }
  return ops;
}

const std::array<Mat4, kQptEntries>& operators() {
  static const auto ops = build_operators();
  return ops;
}

std::array<double, kQptEntries> target(const MeasurementRecord& r, const ReconstructionOptions& o) {
  std::array<double, kQptEntries> t = r.probability;
  if (o.invert_visibility) {
    const double v = *o.invert_visibility;
    for (double& p : t) p = std::clamp(0.5 + (p - 0.5) / v, 0.0, 1.0);
  }
  return t;
}

double cost_against(const Mat4& c, const std::array<double, kQptEntries>& t) {
  double s = 0;
  for (int k = 0; k < kQptEntries; ++k) {
    const double r = predict(c, k) - t[static_cast<std::size_t>(k)];
    s += r * r;
  }
  return s;
}

Mat4 hermitian_part(const Mat4& c) { return 0.5 * (c + c.adjoint()); }

Mat4 psd_clip(const Mat4& c) {
  const auto eig = hermitian_eigen(c);
  Eigen::Vector4d lam = eig.values;
  for (int i = 0; i < 4; ++i) lam(i) = std::max(0.0, lam(i));
  const double tr = lam.sum();
  if (!(tr > 0)) return Mat4::Identity() / 2.0;
  lam *= 2.0 / tr;
  const Mat4 v = eig.vectors;
  return v * lam.cast<std::complex<double>>().asDiagonal() * v.adjoint();
}

Mat4 tp_correct(const Mat4& c) {
  const Mat2 d = Mat2::Identity() - partial_trace_output(c);
  Mat4 out = c;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      out(2 * i, 2 * j) += 0.5 * d(i, j);
      out(2 * i + 1, 2 * j + 1) += 0.5 * d(i, j);
    }
  return out;
}

}  // namespace

double predict(const Mat4& c, int index) {
  if (index < 0 || index >= kQptEntries) throw std::invalid_argument("QPT index out of range");
  return (operators()[static_cast<std::size_t>(index)] * c).trace().real();
}

void ReconstructionOptions::validate() const {
  if (!(step_size > 0) || max_iterations < 1 || !(tolerance > 0) || projection_rounds < 1) {
    throw std::invalid_argument("reconstruction options must be positive");
  }
  if (invert_visibility && !(*invert_visibility > 0 && *invert_visibility <= 1)) {
    throw std::invalid_argument("visibility must be in (0, 1]");
  }
}

double qpt_cost(const Mat4& c, const MeasurementRecord& r) {
  return cost_against(c, r.probability);
}

Mat4 project_cptp(const Mat4& c, int rounds) {
  Mat4 x = hermitian_part(c);
  for (int r = 0; r < rounds; ++r) x = tp_correct(psd_clip(x));
  x = hermitian_part(x);
  const double lmin = hermitian_eigen(x).values(0);
  if (lmin < 0) {
    // Convex mix with I/2 keeps trace preservation and lifts lmin to zero.
    const double t = -lmin / (0.5 - lmin);
    x = (1 - t) * x + t * Mat4::Identity() / 2.0;
  }
  return x;
}

Reconstruction reconstruct(const MeasurementRecord& record, const ReconstructionOptions& opts) {
  opts.validate();
  record.validate();
  const auto t = target(record, opts);
  const auto& ops = operators();

  Reconstruction out;
  Mat4 c = Mat4::Identity() / 2.0;
  double cost = cost_against(c, t);
  out.initial_cost = cost;
  double step = opts.step_size;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    Mat4 grad = Mat4::Zero();
    for (int k = 0; k < kQptEntries; ++k) {
      const double r = predict(c, k) - t[static_cast<std::size_t>(k)];
      grad += 2 * r * ops[static_cast<std::size_t>(k)];
    }
    bool accepted = false;
    Mat4 trial;
    double tcost = 0;
    while (step > 1e-12) {
      trial = project_cptp(c - step * grad, opts.projection_rounds);
      tcost = cost_against(trial, t);
      if (tcost <= cost) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.converged = true;  // no descent left at working precision
      break;
    }
    const double change = cost - tcost;
    c = trial;
    cost = tcost;
    // Recover from earlier halvings so one bad step does not slow every later one.
    step = std::min(opts.step_size, step * 1.5);
    if (change < opts.tolerance) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.choi = c;
  out.cost = cost;
  out.iterations = it;
  return out;
}

Mat4 linear_inversion(const MeasurementRecord& record) {
  // Real parametrisation of Hermitian 4x4 matrices: 4 diagonal entries plus
  // real and imaginary parts of the 6 upper off-diagonal entries.
  std::vector<Mat4> basis;
  for (int i = 0; i < 4; ++i) {
    Mat4 b = Mat4::Zero();
    b(i, i) = 1;
    basis.push_back(b);
  }
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      Mat4 re = Mat4::Zero();
      re(i, j) = 1;
      re(j, i) = 1;
      basis.push_back(re);
      Mat4 im = Mat4::Zero();
      im(i, j) = std::complex<double>(0, 1);
      im(j, i) = std::complex<double>(0, -1);
      basis.push_back(im);
    }
  Eigen::MatrixXd a(kQptEntries, 16);
  Eigen::VectorXd b(kQptEntries);
  for (int k = 0; k < kQptEntries; ++k) {
    for (int q = 0; q < 16; ++q) a(k, q) = predict(basis[static_cast<std::size_t>(q)], k);
    b(k) = record.probability[static_cast<std::size_t>(k)];
  }
  const Eigen::VectorXd x = a.completeOrthogonalDecomposition().solve(b);
  Mat4 c = Mat4::Zero();
  for (int q = 0; q < 16; ++q) c += x(q) * basis[static_cast<std::size_t>(q)];
  return c;
}

Mat2 ideal_gate(const std::string& name) {
  using C = std::complex<double>;
  if (name == "I") return Mat2::Identity();
  if (name == "X_pi") return bloch_rotation(Vec3(1, 0, 0), kPi);
  if (name == "X_pi/2") return bloch_rotation(Vec3(1, 0, 0), kPi / 2);
  if (name == "Y_-pi/2") return bloch_rotation(Vec3(0, 1, 0), -kPi / 2);
  Mat2 m = Mat2::Zero();
  if (name == "T") {
    m(0, 0) = 1;
    m(1, 1) = std::polar(1.0, kPi / 4);
    return m;
  }
  if (name == "S") {
    m(0, 0) = 1;
    m(1, 1) = C(0, 1);
    return m;
  }
  if (name == "H") {
    m << 1, 1, 1, -1;
    return m / std::sqrt(2.0);
  }
  throw std::invalid_argument("unknown gate name '" + name + "'");
}

std::vector<FidelityRow> report_fidelities(const std::vector<std::string>& gates,
                                           const std::vector<Mat4>& choi) {
  if (gates.size() != choi.size()) throw std::invalid_argument("one Choi matrix per gate required");
  std::vector<FidelityRow> rows;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    rows.push_back({gates[i], average_gate_fidelity<double>(choi[i], ideal_gate(gates[i]))});
  }
  return rows;
}

void write_fidelity_table(std::ostream& out, const std::vector<FidelityRow>& rows) {
  out << "gate,average_gate_fidelity_percent\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.3f\n", r.gate.c_str(), 100 * r.fidelity);
    out << buf;
  }
}

}  // namespace qdx
