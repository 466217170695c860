#pragma once

// Gram realizations, translation operators, transports and relative energy.

#include <string>
#include <utility>

#include "freeharm/pdfun.hpp"

namespace freeharm {

/// Coordinates of Phi(g)_j: column (g, j) of `factor`, in (shortlex g, j) order.
struct GramRealization {
  std::size_t r_prime = 0;
  std::size_t d = 0;
  HermitianMatrix gram;
  CMatrix factor;

  Eigen::Index column(std::size_t ball_index, std::size_t j) const {
    return static_cast<Eigen::Index>(ball_index * d + j);
  }
  CVector phi(const Word& g, std::size_t j) const {
    return factor.col(column(shared_ball(r_prime).index_of(g), j));
  }
};

inline GramRealization realize(const PdFunction& c, std::size_t r_prime) {
  GramRealization out;
  out.r_prime = r_prime;
  out.d = c.d();
  out.gram = gram(c, r_prime);
  const double tol = default_verdict_tolerance(r_prime, c.d());
  const double lmin = min_eigenvalue(out.gram);
  if (lmin < -tol) throw PositivityError("realize: Gram matrix is indefinite", lmin);
  out.factor = psd_sqrt(out.gram, tol).matrix();
  return out;
}

struct EnergyReport {
  double energy = 0.0;
  double transport_norm = 0.0;
  std::pair<std::string, std::string> pair;
  std::size_t r_prime = 0;
};

namespace detail {

inline void require_same_shape(const PdFunction& c, const PdFunction& d, std::size_t r_prime) {
  if (c.d() != d.d()) throw InputError("relative energy needs functions with the same matrix size");
  if (2 * r_prime > c.r() || 2 * r_prime > d.r())
    throw DomainError("relative energy radius " + std::to_string(r_prime) + " exceeds half the domain radius");
}

inline constexpr double kStrictGramFloor = 1e-12;

}  // namespace detail

/// lambda_max of the pencil G_D v = lambda G_C v, by whitening with G_C^{-1/2}.
inline EnergyReport relative_energy(const PdFunction& c, const PdFunction& d, std::size_t r_prime,
                                    std::pair<std::string, std::string> ids = {"C", "D"}) {
  detail::require_same_shape(c, d, r_prime);
  const HermitianMatrix gc = gram(c, r_prime);
  const HermitianMatrix gd = gram(d, r_prime);
  const EigenDecomposition e = herm_eig(gc);
  if (e.values(0) < detail::kStrictGramFloor)
    throw PositivityError("relative energy: Gram of the source is not strictly positive", e.values(0));
  RVector inv_sqrt = e.values.cwiseSqrt().cwiseInverse();
  const CMatrix w = e.vectors * inv_sqrt.cast<Complex>().asDiagonal() * e.vectors.adjoint();
  const RVector ev = herm_eigenvalues(HermitianMatrix::hermitian_part(w * gd.matrix() * w));
  EnergyReport rep;
  rep.energy = std::max(ev(ev.size() - 1), 0.0);
  rep.transport_norm = std::sqrt(rep.energy);
  rep.pair = std::move(ids);
  rep.r_prime = r_prime;
  return rep;
}

/// T = factor_D * factor_C^{-1}: sends Phi_C(g)_j to Phi_D(g)_j in orthonormal coordinates.
inline CMatrix transport_operator(const GramRealization& from, const GramRealization& to) {
  if (from.factor.rows() != to.factor.rows()) throw InputError("transport between realizations of different size");
  const EigenDecomposition e = herm_eig(from.gram);
  if (e.values(0) < detail::kStrictGramFloor)
    throw PositivityError("transport: source realization is singular", e.values(0));
  const RVector inv = e.values.cwiseSqrt().cwiseInverse();
  const CMatrix f_inv = e.vectors * inv.cast<Complex>().asDiagonal() * e.vectors.adjoint();
  return to.factor * f_inv;
}

inline CMatrix transport_operator(const PdFunction& c, const PdFunction& d, std::size_t r_prime) {
  detail::require_same_shape(c, d, r_prime);
  return transport_operator(realize(c, r_prime), realize(d, r_prime));
}

/// Matrix of Phi(g)_j -> Phi(hg)_j for g in B_{r'}, in the coordinates of
/// realize(C, ambient_radius). Vectors orthogonal to the B_{r'} span map to 0.
inline CMatrix translation(const PdFunction& c, const Word& h, std::size_t r_prime, std::size_t ambient_radius) {
  if (r_prime + h.length() > ambient_radius)
    throw DomainError("translation: |h| + r' exceeds the ambient radius");
  if (2 * ambient_radius > c.r())
    throw DomainError("translation: ambient radius " + std::to_string(ambient_radius) +
                      " needs a domain of radius " + std::to_string(2 * ambient_radius));
  const GramRealization amb = realize(c, ambient_radius);
  const Ball& amb_ball = shared_ball(ambient_radius);
  const Ball& src = shared_ball(r_prime);
  const auto d = static_cast<Eigen::Index>(c.d());
  const auto cols = static_cast<Eigen::Index>(src.size()) * d;
  CMatrix p(amb.factor.rows(), cols), q(amb.factor.rows(), cols);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::size_t gi = amb_ball.index_of(src[i]);
    const std::size_t hgi = amb_ball.index_of(h * src[i]);
    p.middleCols(static_cast<Eigen::Index>(i) * d, d) = amb.factor.middleCols(static_cast<Eigen::Index>(gi) * d, d);
    q.middleCols(static_cast<Eigen::Index>(i) * d, d) = amb.factor.middleCols(static_cast<Eigen::Index>(hgi) * d, d);
  }
  return q * pseudo_inverse(p);
}

inline CMatrix translation(const PdFunction& c, const Word& h, std::size_t r_prime) {
  return translation(c, h, r_prime, r_prime + h.length());
}

}  // namespace freeharm
