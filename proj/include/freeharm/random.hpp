#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>

#include "freeharm/freegroup.hpp"
#include "freeharm/spectral.hpp"

namespace freeharm {

/// The single seeded generator threaded through every randomized routine.
using Rng = std::mt19937_64;

inline CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = nd(rng);
      const double im = nd(rng);
      m(i, j) = Complex(re, im);
    }
  return m;
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases of diag(R) removed.
inline CMatrix haar_unitary(Eigen::Index n, Rng& rng) {
  const CMatrix z = complex_gaussian(n, n, rng);
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double a = std::abs(r(j, j));
    if (a > 0) q.col(j) *= r(j, j) / a;
  }
  return q;
}

/// N x d matrix with orthonormal columns.
inline CMatrix random_frame(Eigen::Index n, Eigen::Index d, Rng& rng) {
  return haar_unitary(n, rng).leftCols(d);
}

inline CVector random_unit_vector(Eigen::Index n, Rng& rng) {
  CVector v = complex_gaussian(n, 1, rng).col(0);
  return v / v.norm();
}

/// Random Hermitian matrix scaled to operator norm exactly 1.
inline HermitianMatrix random_hermitian_unit_norm(Eigen::Index n, Rng& rng) {
  const CMatrix g = complex_gaussian(n, n, rng);
  CMatrix h = 0.5 * (g + g.adjoint());
  const double nrm = op_norm(h);
  if (nrm > 0) h /= nrm;
  return HermitianMatrix::hermitian_part(h);
}

inline Permutation random_permutation(std::size_t d, Rng& rng) {
  std::vector<int> v(d);
  std::iota(v.begin(), v.end(), 0);
  // Fisher-Yates with explicit draws so the sequence does not depend on the std::shuffle implementation.
  for (std::size_t i = d; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> u(0, i - 1);
    std::swap(v[i - 1], v[u(rng)]);
  }
  return Permutation(std::move(v));
}

}  // namespace freeharm
