#pragma once

// Dense Hermitian spectral kernel: eigendecomposition, operator norm, positive
// square roots and spectral intervals.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <string>

#include "freeharm/error.hpp"

namespace freeharm {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Largest entry modulus; 0 for an empty matrix.
inline double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// The inner product <u, v> = u^* v, conjugate-linear in the first slot.
inline Complex inner(const CVector& u, const CVector& v) { return u.dot(v); }

/// A square complex matrix that is Hermitian within 1e-12 relative tolerance.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  /// Validates Hermitian symmetry; throws InputError otherwise.
  explicit HermitianMatrix(CMatrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw InputError("Hermitian matrix must be square");
    const double defect = max_abs(m_ - m_.adjoint());
    if (defect > 1e-12 * (1.0 + max_abs(m_))) {
      std::ostringstream os;
      os << "matrix is not Hermitian (max |M - M^*| = " << defect << ")";
      throw InputError(os.str());
    }
    symmetrize();
  }

  /// Takes the Hermitian part of a matrix known to be Hermitian up to rounding.
  static HermitianMatrix hermitian_part(const CMatrix& m) {
    HermitianMatrix h;
    h.m_ = 0.5 * (m + m.adjoint());
    return h;
  }

  static HermitianMatrix identity(Eigen::Index n) {
    HermitianMatrix h;
    h.m_ = CMatrix::Identity(n, n);
    return h;
  }

  static HermitianMatrix diagonal(const RVector& d) {
    HermitianMatrix h;
    h.m_ = d.cast<Complex>().asDiagonal();
    return h;
  }

  Eigen::Index dim() const noexcept { return m_.rows(); }
  const CMatrix& matrix() const noexcept { return m_; }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  void symmetrize() {
    m_ = 0.5 * (m_ + m_.adjoint()).eval();
  }

  CMatrix m_;
};

/// M = V diag(values) V^*, values ascending.
struct EigenDecomposition {
  RVector values;
  CMatrix vectors;

  CMatrix reconstruct() const { return vectors * values.cast<Complex>().asDiagonal() * vectors.adjoint(); }
};

inline EigenDecomposition herm_eig(const HermitianMatrix& m) {
  if (m.dim() == 0) return {RVector(0), CMatrix(0, 0)};
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m.matrix(), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw Error("Hermitian eigensolver failed to converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Validating overload for raw matrices.
inline EigenDecomposition herm_eig(const CMatrix& m) { return herm_eig(HermitianMatrix(m)); }

inline RVector herm_eigenvalues(const HermitianMatrix& m) {
  if (m.dim() == 0) return RVector(0);
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("Hermitian eigensolver failed to converge");
  return solver.eigenvalues();
}

inline double min_eigenvalue(const HermitianMatrix& m) {
  const RVector v = herm_eigenvalues(m);
  return v.size() == 0 ? 0.0 : v(0);
}

/// Largest singular value, as sqrt(lambda_max(A^* A)) after scaling A to unit max entry.
inline double op_norm(const CMatrix& a) {
  const double scale = max_abs(a);
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  const CMatrix b = a / scale;
  const CMatrix g = b.rows() >= b.cols() ? CMatrix(b.adjoint() * b) : CMatrix(b * b.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(g, Eigen::EigenvaluesOnly);
  return scale * std::sqrt(std::max(solver.eigenvalues()(g.rows() - 1), 0.0));
}

/// Moore-Penrose pseudo-inverse; singular values below rel_cutoff * sigma_max are dropped.
inline CMatrix pseudo_inverse(const CMatrix& a, double rel_cutoff = 1e-10) {
  if (a.size() == 0) return CMatrix(a.cols(), a.rows());
  Eigen::BDCSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& s = svd.singularValues();
  const double cut = rel_cutoff * (s.size() ? s(0) : 0.0);
  RVector inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = s(i) > cut ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.cast<Complex>().asDiagonal() * svd.matrixU().adjoint();
}

struct SpectralInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool within(double lower, double upper, double slack = 0.0) const {
    return lo >= lower - slack && hi <= upper + slack;
  }
};

inline SpectralInterval spec_interval(const HermitianMatrix& m) {
  const RVector v = herm_eigenvalues(m);
  if (v.size() == 0) return {};
  return {v(0), v(v.size() - 1)};
}

/// Scale-relative positivity tolerance 1e-10 * (1 + lambda_max).
inline double default_psd_tolerance(double lambda_max) { return 1e-10 * (1.0 + std::abs(lambda_max)); }

namespace detail {

template <class F>
HermitianMatrix spectral_map(const EigenDecomposition& e, F&& f) {
  RVector mapped(e.values.size());
  for (Eigen::Index i = 0; i < mapped.size(); ++i) mapped(i) = f(e.values(i));
  return HermitianMatrix::hermitian_part(e.vectors * mapped.cast<Complex>().asDiagonal() * e.vectors.adjoint());
}

inline double resolve_tolerance(const EigenDecomposition& e, std::optional<double> tol) {
  if (tol) return *tol;
  return default_psd_tolerance(e.values.size() ? e.values(e.values.size() - 1) : 0.0);
}

}  // namespace detail

/// Positive square root. Eigenvalues in [-tol, 0) are treated as zero.
inline HermitianMatrix psd_sqrt(const HermitianMatrix& m, std::optional<double> tol = std::nullopt) {
  const EigenDecomposition e = herm_eig(m);
  const double t = detail::resolve_tolerance(e, tol);
  if (e.values.size() && e.values(0) < -t) {
    std::ostringstream os;
    os << "psd_sqrt: eigenvalue " << e.values(0) << " below -" << t;
    throw SingularityError(os.str(), e.values(0));
  }
  return detail::spectral_map(e, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

/// Inverse positive square root; every eigenvalue must exceed tol.
inline HermitianMatrix psd_inv_sqrt(const HermitianMatrix& m, std::optional<double> tol = std::nullopt) {
  const EigenDecomposition e = herm_eig(m);
  const double t = detail::resolve_tolerance(e, tol);
  if (e.values.size() && e.values(0) <= t) {
    std::ostringstream os;
    os << "psd_inv_sqrt: eigenvalue " << e.values(0) << " not above " << t;
    throw SingularityError(os.str(), e.values(0));
  }
  return detail::spectral_map(e, [](double x) { return 1.0 / std::sqrt(x); });
}

}  // namespace freeharm
