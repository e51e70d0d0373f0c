#pragma once

// Single-qubit linear algebra: rotations, states, Bloch geometry, channels in
// Choi form and fidelity metrics. Everything here is templated on the real
// scalar type; the rest of the library instantiates it with double.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdx/error.hpp"

namespace qdx {

template <typename Scalar>
using Matrix2c = Eigen::Matrix<std::complex<Scalar>, 2, 2>;
template <typename Scalar>
using Matrix4c = Eigen::Matrix<std::complex<Scalar>, 4, 4>;
template <typename Scalar>
using Vector4c = Eigen::Matrix<std::complex<Scalar>, 4, 1>;
template <typename Scalar>
using Vector3r = Eigen::Matrix<Scalar, 3, 1>;

using Mat2 = Matrix2c<double>;
using Mat4 = Matrix4c<double>;
using Vec3 = Vector3r<double>;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr double kPi = std::numbers::pi;

template <typename Scalar = double>
struct Pauli {
  static Matrix2c<Scalar> I() { return Matrix2c<Scalar>::Identity(); }
  static Matrix2c<Scalar> X() {
    Matrix2c<Scalar> m;
    m << 0, 1, 1, 0;
    return m;
  }
  static Matrix2c<Scalar> Y() {
    using C = std::complex<Scalar>;
    Matrix2c<Scalar> m;
    m << C(0), C(0, -1), C(0, 1), C(0);
    return m;
  }
  static Matrix2c<Scalar> Z() {
    Matrix2c<Scalar> m;
    m << 1, 0, 0, -1;
    return m;
  }
};

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& m, double tol = 1e-10) {
  return m.rows() == m.cols() && (m - m.adjoint()).norm() < tol;
}

template <typename Derived>
bool is_unitary(const Eigen::MatrixBase<Derived>& m, double tol = 1e-10) {
  using Plain = typename Derived::PlainObject;
  return m.rows() == m.cols() &&
         (m.adjoint() * m - Plain::Identity(m.rows(), m.cols())).norm() < tol;
}

/// min over phi of ||U - e^{i phi} V||_F. The optimal phase is arg tr(V^dag U);
/// the residual is then formed directly, since the expanded closed form
/// loses half the digits to cancellation.
template <typename DerivedA, typename DerivedB>
double phase_distance(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v) {
  using C = std::complex<double>;
  const C overlap = (v.adjoint() * u).trace();
  const C phase = std::abs(overlap) > 0 ? overlap / std::abs(overlap) : C(1, 0);
  return (u - phase * v).norm();
}

template <typename DerivedA, typename DerivedB>
bool equal_up_to_phase(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v,
                       double tol = 1e-8) {
  return phase_distance(u, v) < tol;
}

template <typename Scalar>
struct HermitianEigen {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;  // ascending
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic> vectors;  // columns
};

/// Cyclic complex Jacobi diagonalisation for small Hermitian matrices.
/// Sweeps until the off-diagonal Frobenius norm drops below
/// `tol * max(1, ||A||_F)`.
template <typename Derived>
HermitianEigen<typename Eigen::NumTraits<typename Derived::Scalar>::Real> hermitian_eigen(
    const Eigen::MatrixBase<Derived>& input, double tol = 1e-12) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  using C = std::complex<Real>;
  using MatX = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;

  const Eigen::Index n = input.rows();
  if (n != input.cols()) {
    throw std::invalid_argument("hermitian_eigen: matrix is not square");
  }
  MatX a = 0.5 * (input + input.adjoint());
  MatX v = MatX::Identity(n, n);
  const Real scale = std::max<Real>(1, a.norm());

  auto off_norm = [&] {
    Real s = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > tol * scale; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Real mag = std::abs(a(p, q));
        if (mag < std::numeric_limits<Real>::min()) continue;
        const C phase = a(p, q) / mag;  // e^{i alpha}
        const Real tau = (a(q, q).real() - a(p, p).real()) / (2 * mag);
        const Real t = (tau >= 0 ? 1 : -1) / (std::abs(tau) + std::sqrt(1 + tau * tau));
        const Real c = 1 / std::sqrt(1 + t * t);
        const Real s = t * c;
        // J = Phi * R with Phi = diag(1, conj(e^{i alpha})) on (p, q).
        for (Eigen::Index k = 0; k < n; ++k) {
          const C akp = a(k, p);
          const C akq = a(k, q) * std::conj(phase);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const C apk = a(p, k);
          const C aqk = a(q, k) * phase;
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const C vkp = v(k, p);
          const C vkq = v(k, q) * std::conj(phase);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index x, Eigen::Index y) { return a(x, x).real() < a(y, y).real(); });

  HermitianEigen<Real> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.values(i) = a(src, src).real();
    out.vectors.col(i) = v.col(src);
  }
  return out;
}

/// exp(-i angle (n . sigma) / 2) with n = axis / |axis|.
template <typename Scalar = double>
Matrix2c<Scalar> bloch_rotation(const Vector3r<Scalar>& axis, Scalar angle) {
  const Scalar len = axis.norm();
  if (!(len > 0)) {
    throw std::invalid_argument("bloch_rotation: zero rotation axis");
  }
  const Vector3r<Scalar> n = axis / len;
  using P = Pauli<Scalar>;
  const std::complex<Scalar> minus_i(0, -1);
  return std::cos(angle / 2) * P::I() +
         minus_i * std::sin(angle / 2) * (n.x() * P::X() + n.y() * P::Y() + n.z() * P::Z());
}

/// Rotation about the in-plane axis (cos phi, sin phi, 0).
template <typename Scalar = double>
Matrix2c<Scalar> inplane_rotation(Scalar phi, Scalar angle) {
  return bloch_rotation<Scalar>(Vector3r<Scalar>(std::cos(phi), std::sin(phi), 0), angle);
}

template <typename Scalar = double>
Matrix2c<Scalar> z_rotation(Scalar angle) {
  return bloch_rotation<Scalar>(Vector3r<Scalar>(0, 0, 1), angle);
}

template <typename Scalar = double>
struct BlochVector {
  Scalar x = 0;
  Scalar y = 0;
  Scalar z = 0;

  Scalar norm() const { return std::sqrt(x * x + y * y + z * z); }
  Vector3r<Scalar> vec() const { return {x, y, z}; }
};

/// Qubit state. Hermitian, unit trace, positive semidefinite; checked on
/// construction. Ground |g> is basis state 0 with Bloch z = +1.
template <typename Scalar = double>
class DensityMatrix {
 public:
  DensityMatrix() : m_(Matrix2c<Scalar>::Zero()) { m_(0, 0) = 1; }

  explicit DensityMatrix(const Matrix2c<Scalar>& m, double tol = 1e-10) : m_(m) {
    if (!is_hermitian(m_, tol)) throw InvalidState("density matrix is not Hermitian");
    if (std::abs(m_.trace() - std::complex<Scalar>(1)) > tol) {
      throw InvalidState("density matrix trace is not 1");
    }
    const auto eig = hermitian_eigen(m_);
    if (eig.values.minCoeff() < -tol) throw InvalidState("density matrix has a negative eigenvalue");
  }

  static DensityMatrix ground() { return DensityMatrix(); }
  static DensityMatrix excited() {
    Matrix2c<Scalar> m = Matrix2c<Scalar>::Zero();
    m(1, 1) = 1;
    return DensityMatrix(m);
  }
  static DensityMatrix pure(const Eigen::Matrix<std::complex<Scalar>, 2, 1>& psi) {
    const auto n = psi.normalized();
    return DensityMatrix(n * n.adjoint());
  }

  const Matrix2c<Scalar>& matrix() const { return m_; }
  Scalar excited_population() const { return m_(1, 1).real(); }
  Scalar ground_population() const { return m_(0, 0).real(); }

 private:
  Matrix2c<Scalar> m_;
};

using State = DensityMatrix<double>;

template <typename Scalar>
BlochVector<Scalar> bloch_from_density(const DensityMatrix<Scalar>& rho) {
  using P = Pauli<Scalar>;
  const auto& m = rho.matrix();
  return {(P::X() * m).trace().real(), (P::Y() * m).trace().real(), (P::Z() * m).trace().real()};
}

template <typename Scalar>
DensityMatrix<Scalar> density_from_bloch(const BlochVector<Scalar>& v) {
  if (v.norm() > 1 + 1e-10) throw InvalidState("Bloch vector longer than 1");
  using P = Pauli<Scalar>;
  return DensityMatrix<Scalar>(0.5 * (P::I() + v.x * P::X() + v.y * P::Y() + v.z * P::Z()));
}

/// Squared Bloch norm <sx>^2 + <sy>^2 + <sz>^2 = 2 Tr(rho^2) - 1.
template <typename Scalar>
Scalar purity(const DensityMatrix<Scalar>& rho) {
  const auto b = bloch_from_density(rho);
  return b.x * b.x + b.y * b.y + b.z * b.z;
}

// ---------------------------------------------------------------------------
// Channels in Choi form: C = sum_ij |i><j| (x) E(|i><j|), trace d = 2.

/// Tr over the output factor; equals the identity for trace-preserving maps.
template <typename Scalar>
Matrix2c<Scalar> partial_trace_output(const Matrix4c<Scalar>& c) {
  Matrix2c<Scalar> r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r(i, j) = c(2 * i, 2 * j) + c(2 * i + 1, 2 * j + 1);
  return r;
}

template <typename Scalar>
Matrix4c<Scalar> choi_from_kraus(const std::vector<Matrix2c<Scalar>>& kraus) {
  Matrix4c<Scalar> c = Matrix4c<Scalar>::Zero();
  for (const auto& k : kraus) {
    Vector4c<Scalar> v;
    for (int i = 0; i < 2; ++i) v.template segment<2>(2 * i) = k.col(i);
    c += v * v.adjoint();
  }
  return c;
}

template <typename Scalar>
Matrix4c<Scalar> choi_from_unitary(const Matrix2c<Scalar>& u) {
  return choi_from_kraus<Scalar>({u});
}

/// Fully depolarising channel, rho -> I/2.
template <typename Scalar = double>
Matrix4c<Scalar> choi_depolarizing() {
  return Matrix4c<Scalar>::Identity() / Scalar(2);
}

struct ChoiCheck {
  double hermiticity = 0;     // ||C - C^dag||_F
  double min_eigenvalue = 0;
  double tp_deviation = 0;    // ||Tr_out C - I||_F
};

template <typename Scalar>
ChoiCheck check_choi(const Matrix4c<Scalar>& c) {
  ChoiCheck r;
  r.hermiticity = (c - c.adjoint()).norm();
  r.min_eigenvalue = hermitian_eigen(c).values.minCoeff();
  r.tp_deviation = (partial_trace_output(c) - Matrix2c<Scalar>::Identity()).norm();
  return r;
}

template <typename Scalar>
bool is_cptp(const Matrix4c<Scalar>& c, double tol = 1e-8) {
  const auto r = check_choi(c);
  return r.hermiticity < tol && r.min_eigenvalue > -tol && r.tp_deviation < tol;
}

/// E(rho) = sum_ij rho_ij E(|i><j|), read off the Choi blocks.
template <typename Scalar>
DensityMatrix<Scalar> apply_choi(const Matrix4c<Scalar>& c, const DensityMatrix<Scalar>& rho,
                                 double tol = 1e-6) {
  if (!is_cptp(c, tol)) throw InvalidChannel("apply_choi: Choi matrix is not CPTP");
  Matrix2c<Scalar> out = Matrix2c<Scalar>::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out += rho.matrix()(i, j) * c.template block<2, 2>(2 * i, 2 * j);
  // Re-hermitise; the tolerance above admits tiny asymmetries from data files.
  out = 0.5 * (out + out.adjoint()).eval();
  out /= out.trace();
  return DensityMatrix<Scalar>(out, std::max(1e-10, 10 * tol));
}

/// <<U|C|U>> / d^2 with |U>> = sum_i |i> (x) U|i>.
template <typename Scalar>
Scalar process_fidelity(const Matrix4c<Scalar>& c, const Matrix2c<Scalar>& u) {
  Vector4c<Scalar> v;
  for (int i = 0; i < 2; ++i) v.template segment<2>(2 * i) = u.col(i);
  return (v.adjoint() * c * v)(0, 0).real() / Scalar(4);
}

template <typename Scalar>
Scalar average_gate_fidelity(const Matrix4c<Scalar>& c, const Matrix2c<Scalar>& u_ideal) {
  if (!is_unitary(u_ideal, 1e-8)) {
    throw std::invalid_argument("average_gate_fidelity: ideal gate is not unitary");
  }
  constexpr Scalar d = 2;
  return (d * process_fidelity(c, u_ideal) + 1) / (d + 1);
}

/// Dynamic-size overload used when matrices come from files.
inline double average_gate_fidelity(const ComplexMatrix& c, const ComplexMatrix& u_ideal) {
  if (c.rows() != 4 || c.cols() != 4 || u_ideal.rows() != 2 || u_ideal.cols() != 2) {
    throw std::invalid_argument("average_gate_fidelity: expected a 4x4 Choi matrix and a 2x2 gate");
  }
  return average_gate_fidelity<double>(Mat4(c), Mat2(u_ideal));
}

}  // namespace qdx
