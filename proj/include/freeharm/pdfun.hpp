#pragma once

// Matrix-valued positive definite functions on balls of the free group.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "freeharm/freegroup.hpp"
#include "freeharm/random.hpp"
#include "freeharm/spectral.hpp"

namespace freeharm {

/// Process-wide cache of balls; entries are immutable once built.
inline const Ball& shared_ball(std::size_t r) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<Ball>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[r];
  if (!slot) slot = std::make_unique<Ball>(r);
  return *slot;
}

/// Image of a word under the representation with generator images ua, ub.
inline CMatrix word_unitary(const Word& w, const CMatrix& ua, const CMatrix& ub) {
  CMatrix u = CMatrix::Identity(ua.rows(), ua.cols());
  for (Letter l : w.letters()) {
    switch (l) {
      case Letter::a: u = u * ua; break;
      case Letter::b: u = u * ub; break;
      case Letter::A: u = u * ua.adjoint(); break;
      case Letter::B: u = u * ub.adjoint(); break;
    }
  }
  return u;
}

/// A normalized function B_r -> Mat_{d x d}(C) with C(g^-1) = C(g)^*.
///
/// Only the shortlex-smaller element of each pair {g, g^-1} is stored, so the
/// adjoint symmetry holds by construction; the other value is produced on read.
class PdFunction {
 public:
  /// Validating constructor. `values` must hold exactly one entry per
  /// representative word of B_r; the diagnostic names the first offending word.
  static PdFunction from_representatives(std::size_t d, std::size_t r, const std::map<Word, CMatrix>& values,
                                         double normalization_tol = 1e-12) {
    if (d == 0) throw InputError("matrix size d must be positive");
    PdFunction f(d, r);
    const Ball& b = *f.ball_;
    for (const auto& [w, m] : values) {
      if (w.length() > r) throw InputError("word '" + w.str() + "' lies outside the ball of radius " + std::to_string(r));
      if (!w.is_inverse_representative()) {
        const Word rep = w.inverse();
        auto it = values.find(rep);
        if (it == values.end() || max_abs(it->second.adjoint() - m) > normalization_tol * (1.0 + max_abs(m)))
          throw InputError("word '" + w.str() + "' violates adjoint symmetry with '" + rep.str() + "'");
        continue;
      }
      if (m.rows() != static_cast<Eigen::Index>(d) || m.cols() != static_cast<Eigen::Index>(d))
        throw InputError("value at word '" + w.str() + "' is not " + std::to_string(d) + "x" + std::to_string(d));
      f.reps_[b.index_of(w)] = m;
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (b[i].is_inverse_representative() && f.reps_[i].size() == 0)
        throw InputError("missing value for word '" + (b[i].is_identity() ? std::string("e") : b[i].str()) + "'");
    }
    const CMatrix& at_e = f.reps_[0];
    if (max_abs(at_e - CMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))) >
        normalization_tol)
      throw InputError("word 'e' violates normalization: C(e) != I");
    return f;
  }

  /// Builds a function by evaluating `value(w)` on representative words. C(e) is set to I.
  template <class F>
  static PdFunction tabulate(std::size_t d, std::size_t r, F&& value) {
    if (d == 0) throw InputError("matrix size d must be positive");
    PdFunction f(d, r);
    const auto n = static_cast<Eigen::Index>(d);
    for (std::size_t i = 0; i < f.ball_->size(); ++i) {
      const Word& w = (*f.ball_)[i];
      if (!w.is_inverse_representative()) continue;
      f.reps_[i] = w.is_identity() ? CMatrix::Identity(n, n) : CMatrix(value(w));
      if (f.reps_[i].rows() != n || f.reps_[i].cols() != n)
        throw InputError("tabulated value at '" + w.str() + "' has the wrong shape");
    }
    return f;
  }

  std::size_t d() const noexcept { return d_; }
  std::size_t r() const noexcept { return r_; }
  const Ball& domain() const noexcept { return *ball_; }

  /// C(w); the adjoint of the stored representative when w is not one.
  CMatrix at(const Word& w) const {
    const std::size_t i = ball_->index_of(w);
    if (reps_[i].size() != 0) return reps_[i];
    return reps_[ball_->index_of(w.inverse())].adjoint();
  }

  CMatrix at_index(std::size_t i) const { return at((*ball_)[i]); }

  /// (word, value) for every stored representative, in shortlex order.
  std::vector<std::pair<Word, CMatrix>> representatives() const {
    std::vector<std::pair<Word, CMatrix>> out;
    for (std::size_t i = 0; i < ball_->size(); ++i)
      if (reps_[i].size() != 0) out.emplace_back((*ball_)[i], reps_[i]);
    return out;
  }

  PdFunction restrict_to(std::size_t radius) const {
    if (radius > r_) throw DomainError("cannot restrict to a larger radius");
    PdFunction f(d_, radius);
    for (std::size_t i = 0; i < f.ball_->size(); ++i) f.reps_[i] = reps_[i];
    return f;
  }

  /// Exact equality of the stored entries.
  bool operator==(const PdFunction& o) const {
    if (d_ != o.d_ || r_ != o.r_) return false;
    for (std::size_t i = 0; i < reps_.size(); ++i) {
      if (reps_[i].size() != o.reps_[i].size()) return false;
      if (reps_[i].size() && reps_[i] != o.reps_[i]) return false;
    }
    return true;
  }

 private:
  PdFunction(std::size_t d, std::size_t r) : d_(d), r_(r), ball_(&shared_ball(r)), reps_(ball_->size()) {}

  std::size_t d_;
  std::size_t r_;
  const Ball* ball_;
  std::vector<CMatrix> reps_;
};

inline std::size_t default_gram_radius(const PdFunction& c) { return c.r() / 2; }

/// Gram matrix over B_{r'} x [d]: entry ((g, j), (h, k)) = C(h^-1 g)_{j,k}.
inline HermitianMatrix gram(const PdFunction& c, std::size_t r_prime) {
  if (2 * r_prime > c.r())
    throw DomainError("gram radius " + std::to_string(r_prime) + " needs a domain of radius " +
                      std::to_string(2 * r_prime) + ", have " + std::to_string(c.r()));
  const Ball& b = shared_ball(r_prime);
  const auto d = static_cast<Eigen::Index>(c.d());
  const auto n = static_cast<Eigen::Index>(b.size()) * d;
  CMatrix g(n, n);
  for (std::size_t gi = 0; gi < b.size(); ++gi) {
    for (std::size_t hi = 0; hi < b.size(); ++hi) {
      const Word w = b[hi].inverse() * b[gi];
      g.block(static_cast<Eigen::Index>(gi) * d, static_cast<Eigen::Index>(hi) * d, d, d) = c.at(w);
    }
  }
  // Exactly Hermitian: block (h, g) is the adjoint of block (g, h) by the storage invariant.
  return HermitianMatrix::hermitian_part(g);
}

inline HermitianMatrix gram(const PdFunction& c) { return gram(c, default_gram_radius(c)); }

enum class PositivityStatus { strict, semidefinite, indefinite };

inline const char* to_string(PositivityStatus s) {
  switch (s) {
    case PositivityStatus::strict: return "strict";
    case PositivityStatus::semidefinite: return "semidefinite";
    case PositivityStatus::indefinite: return "indefinite";
  }
  return "?";
}

struct PositivityVerdict {
  PositivityStatus status = PositivityStatus::indefinite;
  double min_eigenvalue = 0.0;
  std::size_t gram_radius = 0;
  double tolerance = 0.0;

  bool at_least_semidefinite() const { return status != PositivityStatus::indefinite; }
};

inline double default_verdict_tolerance(std::size_t r_prime, std::size_t d) {
  return 1e-9 * static_cast<double>(ball_size(r_prime) * d);
}

inline PositivityVerdict classify(double min_eig, std::size_t radius, double tol) {
  PositivityVerdict v;
  v.min_eigenvalue = min_eig;
  v.gram_radius = radius;
  v.tolerance = tol;
  if (min_eig > tol)
    v.status = PositivityStatus::strict;
  else if (std::abs(min_eig) <= tol)
    v.status = PositivityStatus::semidefinite;
  else
    v.status = PositivityStatus::indefinite;
  return v;
}

/// Verdict from the smallest eigenvalue of gram(C, floor(r/2)).
inline PositivityVerdict is_positive_definite(const PdFunction& c, std::optional<double> tol = std::nullopt) {
  const std::size_t rp = default_gram_radius(c);
  const double t = tol.value_or(default_verdict_tolerance(rp, c.d()));
  return classify(min_eigenvalue(gram(c, rp)), rp, t);
}

/// Delta_r: the identity at e and zero elsewhere.
inline PdFunction delta(std::size_t r, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return PdFunction::tabulate(d, r, [n](const Word&) { return CMatrix::Zero(n, n); });
}

/// (1 - eps) C + eps Delta_r.
inline PdFunction mix(const PdFunction& c, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw InputError("mixing weight must lie in [0, 1]");
  return PdFunction::tabulate(c.d(), c.r(), [&](const Word& w) -> CMatrix { return (1.0 - eps) * c.at(w); });
}

/// Sum over B_r of the entry moduli.
inline double one_norm(const PdFunction& c) {
  double s = 0.0;
  for (const Word& w : c.domain()) s += c.at(w).cwiseAbs().sum();
  return s;
}

/// C(w) = <U(w) xi_j, xi_k> for a unitary representation with generator images
/// ua, ub and an orthonormal frame (columns of `frame`).
inline PdFunction from_representation(std::size_t r, const CMatrix& frame, const CMatrix& ua, const CMatrix& ub) {
  const CMatrix overlap = frame.adjoint() * frame;
  if (max_abs(overlap - CMatrix::Identity(frame.cols(), frame.cols())) > 1e-10)
    throw InputError("frame is not orthonormal");
  return PdFunction::tabulate(static_cast<std::size_t>(frame.cols()), r, [&](const Word& w) -> CMatrix {
    return (word_unitary(w, ua, ub) * frame).adjoint() * frame;
  });
}

/// Unmixed positive definite function from Haar-random U_a, U_b and a random frame.
inline PdFunction random_unitary_pd(std::size_t r, std::size_t d, std::size_t n_ambient, Rng& rng) {
  if (d == 0 || n_ambient < d) throw InputError("random_nspd needs 1 <= d <= N");
  const auto n = static_cast<Eigen::Index>(n_ambient);
  const CMatrix ua = haar_unitary(n, rng);
  const CMatrix ub = haar_unitary(n, rng);
  const CMatrix frame = random_frame(n, static_cast<Eigen::Index>(d), rng);
  return from_representation(r, frame, ua, ub);
}

/// A random element of NSPD(r, d): a unitary-representation function mixed with Delta at eps_floor.
inline PdFunction random_nspd(std::size_t r, std::size_t d, std::size_t n_ambient, double eps_floor,
                              std::uint64_t seed) {
  if (!(eps_floor > 0.0 && eps_floor < 1.0)) throw InputError("eps_floor must lie in (0, 1)");
  Rng rng(seed);
  return mix(random_unitary_pd(r, d, n_ambient, rng), eps_floor);
}

}  // namespace freeharm
