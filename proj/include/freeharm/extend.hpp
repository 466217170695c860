#pragma once

// Radial extension of positive definite functions from B_r to B_R, and the
// pairwise relative-energy gain such extensions incur.

#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "freeharm/realize.hpp"

namespace freeharm {

enum class ExtensionMethod { projection, central };

inline const char* to_string(ExtensionMethod m) { return m == ExtensionMethod::projection ? "projection" : "central"; }

inline ExtensionMethod parse_method(const std::string& s) {
  if (s == "projection") return ExtensionMethod::projection;
  if (s == "central") return ExtensionMethod::central;
  throw InputError("unknown extension method '" + s + "' (expected projection or central)");
}

struct ExtendParams {
  ExtensionMethod method = ExtensionMethod::projection;
  double tol = 1e-8;
  std::size_t max_iter = 20000;
  // Projection stops once the Gram floor reaches eta (capped at half the input's floor).
  double eta = 1e-6;
  std::size_t phase_iter = 1000;
  double pinv_cutoff = 1e-10;
  // Permutes the slot and position lists of the affine projection; results must not depend on it.
  std::optional<std::uint64_t> shuffle_seed;
};

struct ExtensionResult {
  PdFunction extended;
  ExtensionMethod method = ExtensionMethod::projection;
  std::size_t iterations = 0;
  double residual = 0.0;
  double min_eigenvalue = 0.0;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, ExtensionResult result) : Error(what), result_(std::move(result)) {}
  const ExtensionResult& result() const noexcept { return result_; }
  double residual() const noexcept { return result_.residual; }

 private:
  ExtensionResult result_;
};

namespace detail {

/// Frobenius distance from a Hermitian matrix to the PSD cone, and its smallest eigenvalue.
inline std::pair<double, double> psd_residual(const HermitianMatrix& m) {
  const RVector ev = herm_eigenvalues(m);
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) < 0) s += ev(i) * ev(i);
  return {std::sqrt(s), ev.size() ? ev(0) : 0.0};
}

// Block layout of the Gram over B_s: every block (g, h) holds slot(h^-1 g) or its adjoint.
struct SlotLayout {
  std::size_t K = 0;
  Eigen::Index d = 0;
  std::vector<Word> slot_word;                                     // representative of each slot
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> positions;  // (g, h) with h^-1 g = slot word
  std::vector<bool> pinned;

  SlotLayout(std::size_t s, std::size_t r, Eigen::Index dim) : d(dim) {
    const Ball& b = shared_ball(s);
    K = b.size();
    std::unordered_map<Word, std::size_t, WordHash> index;
    for (std::size_t gi = 0; gi < K; ++gi) {
      for (std::size_t hi = 0; hi < K; ++hi) {
        const Word w = b[hi].inverse() * b[gi];
        if (!w.is_inverse_representative()) continue;
        auto [it, fresh] = index.emplace(w, slot_word.size());
        if (fresh) {
          slot_word.push_back(w);
          positions.emplace_back();
          pinned.push_back(w.length() <= r);
        }
        positions[it->second].emplace_back(gi, hi);
      }
    }
  }

  void shuffle(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> order(slot_word.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
    std::vector<Word> sw;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pos;
    std::vector<bool> pin;
    for (std::size_t i : order) {
      sw.push_back(slot_word[i]);
      pos.push_back(positions[i]);
      pin.push_back(pinned[i]);
    }
    for (auto& p : pos)
      for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
    slot_word = std::move(sw);
    positions = std::move(pos);
    pinned = std::move(pin);
  }

  CMatrix block(const CMatrix& m, std::size_t gi, std::size_t hi) const {
    return m.block(static_cast<Eigen::Index>(gi) * d, static_cast<Eigen::Index>(hi) * d, d, d);
  }

  void write(CMatrix& m, std::size_t slot, const CMatrix& value) const {
    for (const auto& [gi, hi] : positions[slot]) {
      m.block(static_cast<Eigen::Index>(gi) * d, static_cast<Eigen::Index>(hi) * d, d, d) = value;
      if (gi != hi) m.block(static_cast<Eigen::Index>(hi) * d, static_cast<Eigen::Index>(gi) * d, d, d) = value.adjoint();
    }
  }

  /// Orthogonal projection of a Hermitian matrix onto the group-invariant matrices with pinned slots.
  CMatrix project(const CMatrix& y, const std::vector<CMatrix>& pins, std::vector<CMatrix>& slots) const {
    CMatrix out(y.rows(), y.cols());
    for (std::size_t sl = 0; sl < slot_word.size(); ++sl) {
      if (!pinned[sl]) {
        CMatrix acc = CMatrix::Zero(d, d);
        for (const auto& [gi, hi] : positions[sl]) acc += block(y, gi, hi);
        slots[sl] = acc / static_cast<double>(positions[sl].size());
      } else {
        slots[sl] = pins[sl];
      }
      write(out, sl, slots[sl]);
    }
    return out;
  }
};

inline ExtensionResult extend_projection(const PdFunction& c, std::size_t R, const ExtendParams& params,
                                         double input_floor) {
  const std::size_t s = (R + 1) / 2;
  const auto d = static_cast<Eigen::Index>(c.d());
  SlotLayout layout(s, c.r(), d);
  if (params.shuffle_seed) layout.shuffle(*params.shuffle_seed);
  std::vector<CMatrix> pins(layout.slot_word.size()), slots(layout.slot_word.size());
  for (std::size_t sl = 0; sl < pins.size(); ++sl) {
    pins[sl] = layout.pinned[sl] ? c.at(layout.slot_word[sl]) : CMatrix::Zero(d, d);
    slots[sl] = pins[sl];
  }
  const Eigen::Index n = static_cast<Eigen::Index>(layout.K) * d;

  // Cone targets tau, tau/2, ... down to eta, warm-started; each phase but the last gets phase_iter steps.
  const double eta = std::min(params.eta, 0.5 * input_floor);
  double tau = std::max(eta, 0.5 * input_floor);
  std::size_t phase_left = tau > eta ? params.phase_iter : params.max_iter;
  CMatrix x(n, n);
  for (std::size_t sl = 0; sl < pins.size(); ++sl) layout.write(x, sl, pins[sl]);
  CMatrix p = CMatrix::Zero(n, n);

  std::size_t it = 0;
  double residual = 0.0, lmin = 0.0;
  for (;; ++it) {
    std::tie(residual, lmin) = psd_residual(HermitianMatrix::hermitian_part(x));
    if (lmin >= eta || it >= params.max_iter) break;
    if (phase_left-- == 0) {
      tau = std::max(eta, 0.5 * tau);
      phase_left = tau > eta ? params.phase_iter : params.max_iter;
      p.setZero();
    }
    const EigenDecomposition e = herm_eig(HermitianMatrix::hermitian_part(x + p));
    RVector clipped = e.values.cwiseMax(tau);
    const CMatrix y = e.vectors * clipped.cast<Complex>().asDiagonal() * e.vectors.adjoint();
    p = x + p - y;
    x = layout.project(0.5 * (y + y.adjoint()), pins, slots);
  }

  std::unordered_map<Word, std::size_t, WordHash> slot_index;
  for (std::size_t sl = 0; sl < layout.slot_word.size(); ++sl) slot_index.emplace(layout.slot_word[sl], sl);
  PdFunction ext = PdFunction::tabulate(c.d(), R, [&](const Word& w) -> CMatrix {
    if (w.length() <= c.r()) return c.at(w);
    return slots[slot_index.at(w)];
  });
  ExtensionResult res{std::move(ext), ExtensionMethod::projection, it, residual, lmin};
  if (lmin < eta && residual > params.tol)
    throw NonConvergenceError("projection extension did not converge in " + std::to_string(it) +
                                  " iterations (residual " + std::to_string(residual) + ")",
                              std::move(res));
  return res;
}

}  // namespace detail

/// Central value for g from values known on I_{g_up}: X = B1 A^+ B2 over the
/// common neighbours of e and g in Cay(F, g_up).
template <class Known>
CMatrix one_step_extend(const Known& known, const Word& g, std::size_t d, std::size_t search_radius,
                        double pinv_cutoff = 1e-10) {
  if (g.is_identity()) throw DomainError("one_step_extend: g must not be the identity");
  const auto dd = static_cast<Eigen::Index>(d);
  std::vector<Word> clique;
  for (const Word& s : shared_ball(search_radius)) {
    if (s.is_identity() || s == g || !known.contains(s)) continue;
    const Word sg = s.inverse() * g;
    if (sg.is_identity() || !known.contains(sg)) continue;
    bool ok = true;
    for (const Word& t : clique)
      if (!known.contains(t.inverse() * s)) {
        ok = false;
        break;
      }
    if (ok) clique.push_back(s);
  }
  if (clique.empty()) return CMatrix::Zero(dd, dd);
  const auto m = static_cast<Eigen::Index>(clique.size());
  CMatrix a(m * dd, m * dd), b1(dd, m * dd), b2(m * dd, dd);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Word& s = clique[static_cast<std::size_t>(i)];
    b1.middleCols(i * dd, dd) = known.at(s.inverse() * g);
    b2.middleRows(i * dd, dd) = known.at(s);
    for (Eigen::Index j = 0; j < m; ++j)
      a.block(i * dd, j * dd, dd, dd) = known.at(clique[static_cast<std::size_t>(j)].inverse() * s);
  }
  const CMatrix a_pinv = pseudo_inverse(a, pinv_cutoff);
  const double scale = 1.0 + max_abs(b2) + max_abs(b1);
  if (max_abs(b2 - a * a_pinv * b2) > 1e-8 * scale || max_abs(b1 - b1 * a_pinv * a) > 1e-8 * scale)
    throw CompletionError("one_step_extend: border blocks at '" + g.str() + "' leave the range of the overlap Gram");
  return b1 * a_pinv * b2;
}

namespace detail {

struct KnownValues {
  std::unordered_map<Word, CMatrix, WordHash> values;
  bool contains(const Word& w) const { return values.count(w) != 0; }
  const CMatrix& at(const Word& w) const { return values.at(w); }
};

inline ExtensionResult extend_central(const PdFunction& c, std::size_t R, const ExtendParams& params) {
  KnownValues known;
  for (const Word& w : c.domain()) known.values.emplace(w, c.at(w));
  std::size_t steps = 0;
  for (const Word& g : shared_ball(R)) {
    if (g.length() <= c.r() || !g.is_inverse_representative()) continue;
    CMatrix v = one_step_extend(known, g, c.d(), R, params.pinv_cutoff);
    known.values.emplace(g.inverse(), v.adjoint());
    known.values.emplace(g, std::move(v));
    ++steps;
  }
  PdFunction ext = PdFunction::tabulate(c.d(), R, [&](const Word& w) -> CMatrix {
    if (w.length() <= c.r()) return c.at(w);
    return known.at(w);
  });
  const auto [residual, lmin] = psd_residual(gram(ext, R / 2));
  if (residual > std::max(params.tol, default_verdict_tolerance(R / 2, c.d())))
    throw CompletionError("central extension is not positive semidefinite (min eigenvalue " + std::to_string(lmin) +
                          ")");
  return {std::move(ext), ExtensionMethod::central, steps, residual, lmin};
}

}  // namespace detail

/// Extends a strictly positive definite C on B_r to B_R. The restriction to B_r is bit-identical to C.
inline ExtensionResult extend_radial(const PdFunction& c, std::size_t R, const ExtendParams& params = {}) {
  if (R <= c.r()) throw DomainError("extension radius must exceed the domain radius");
  const PositivityVerdict v = is_positive_definite(c);
  if (v.status != PositivityStatus::strict)
    throw PositivityError("extend_radial needs a strictly positive definite input", v.min_eigenvalue);
  if (params.method == ExtensionMethod::central) return detail::extend_central(c, R, params);
  return detail::extend_projection(c, R, params, v.min_eigenvalue);
}

struct ExtensionSummary {
  std::size_t iterations = 0;
  double residual = std::numeric_limits<double>::quiet_NaN();
  double min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
};

struct GainReport {
  std::size_t r = 0;
  std::size_t R = 0;
  ExtensionMethod method = ExtensionMethod::projection;
  Eigen::MatrixXd energies_before;
  Eigen::MatrixXd energies_after;
  Eigen::MatrixXd gain;
  std::vector<ExtensionSummary> extensions;
  std::vector<std::optional<std::string>> row_errors;
  bool non_convergence = false;

  std::size_t size() const { return static_cast<std::size_t>(gain.rows()); }
  bool ok() const {
    for (const auto& e : row_errors)
      if (e) return false;
    return true;
  }
};

/// Extends every input with the same parameters, then compares pairwise energies at
/// radius floor(r/2) before and floor(R/2) after. Failed extensions leave NaN rows.
inline GainReport energy_gain(const std::vector<PdFunction>& cs, std::size_t R, const ExtendParams& params = {},
                              std::size_t workers = 1) {
  if (cs.empty()) throw InputError("energy_gain needs at least one function");
  const std::size_t r = cs.front().r(), d = cs.front().d();
  for (const auto& c : cs)
    if (c.r() != r || c.d() != d) throw InputError("energy_gain inputs must share radius and matrix size");
  const std::size_t n = cs.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  GainReport rep;
  rep.r = r;
  rep.R = R;
  rep.method = params.method;
  rep.extensions.resize(n);
  rep.row_errors.resize(n);
  std::vector<std::optional<PdFunction>> ext(n);
  std::vector<char> nonconv(n, 0);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        ExtensionResult res = extend_radial(cs[i], R, params);
        rep.extensions[i] = {res.iterations, res.residual, res.min_eigenvalue};
        ext[i] = std::move(res.extended);
      } catch (const NonConvergenceError& e) {
        rep.extensions[i] = {e.result().iterations, e.result().residual, e.result().min_eigenvalue};
        rep.row_errors[i] = e.what();
        nonconv[i] = 1;
      } catch (const Error& e) {
        rep.row_errors[i] = e.what();
      }
    }
  };
  const std::size_t nw = std::max<std::size_t>(1, std::min(workers, n));
  if (nw == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nw; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (char c : nonconv) rep.non_convergence = rep.non_convergence || c;

  rep.energies_before = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), nan);
  rep.energies_after = rep.energies_before;
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto mi = static_cast<Eigen::Index>(m), ki = static_cast<Eigen::Index>(k);
      try {
        rep.energies_before(mi, ki) = relative_energy(cs[m], cs[k], r / 2).energy;
        if (ext[m] && ext[k]) rep.energies_after(mi, ki) = relative_energy(*ext[m], *ext[k], R / 2).energy;
      } catch (const Error& e) {
        if (!rep.row_errors[m]) rep.row_errors[m] = e.what();
      }
    }
  }
  rep.gain = rep.energies_after - rep.energies_before;
  return rep;
}

}  // namespace freeharm
