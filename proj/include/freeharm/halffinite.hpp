#pragma once

// Half-finite approximation at desk scale: permuted families over Sym(d),
// block transports theta, the averaged operator q, the repaired unitary
// representation zeta, the witness vector y, and matrix-element comparisons.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freeharm/contour.hpp"
#include "freeharm/realize.hpp"

namespace freeharm {

inline constexpr std::size_t kMaxPermutedDegree = 5;

enum class InstanceKind { tensor_exact, perturbed };

inline const char* to_string(InstanceKind k) { return k == InstanceKind::tensor_exact ? "tensor_exact" : "perturbed"; }

/// Commuting unitary pair (rho_left, rho_right) with an approximate finite-quotient frame.
struct CommutingPairInstance {
  InstanceKind kind = InstanceKind::tensor_exact;
  std::size_t N = 0;
  std::size_t d = 0;
  std::size_t m = 0;
  std::size_t r = 2;
  double eps = 0.05;
  double delta = 0.0;
  CMatrix rho_left_a, rho_left_b, rho_right_a, rho_right_b;
  CMatrix kappa_a, kappa_b;
  CMatrix frame;  // N x d, columns x_1..x_d
  CVector x;
  CVector alpha;
  FiniteQuotientAction act{Permutation::identity(1), Permutation::identity(1)};

  CMatrix rho_left(const Word& g) const { return word_unitary(g, rho_left_a, rho_left_b); }
  CMatrix rho_right(const Word& g) const { return word_unitary(g, rho_right_a, rho_right_b); }
  CMatrix kappa(const Word& g) const { return word_unitary(g, kappa_a, kappa_b); }
};

/// Measured values behind each instance invariant.
struct InstanceAudit {
  double unitarity_defect = 0.0;
  double commutator = 0.0;
  double frame_defect = 0.0;
  double kappa_frame_defect = 0.0;
  double kappa_distance = 0.0;
  double x_distance = 0.0;
  double alpha_norm_defect = 0.0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

inline InstanceAudit audit_instance(const CommutingPairInstance& inst) {
  InstanceAudit a;
  const auto n = static_cast<Eigen::Index>(inst.N);
  const CMatrix id = CMatrix::Identity(n, n);
  auto shape = [&](const CMatrix& u) { return u.rows() == n && u.cols() == n; };
  for (const CMatrix* u : {&inst.rho_left_a, &inst.rho_left_b, &inst.rho_right_a, &inst.rho_right_b, &inst.kappa_a,
                           &inst.kappa_b}) {
    if (!shape(*u)) {
      a.violations.push_back("operator has the wrong shape");
      return a;
    }
    a.unitarity_defect = std::max(a.unitarity_defect, op_norm(u->adjoint() * *u - id));
  }
  if (inst.frame.rows() != n || inst.frame.cols() != static_cast<Eigen::Index>(inst.d) || inst.x.size() != n ||
      inst.alpha.size() != static_cast<Eigen::Index>(inst.d) || inst.act.d() != inst.d) {
    a.violations.push_back("frame, vector or action has the wrong size");
    return a;
  }
  for (const CMatrix* l : {&inst.rho_left_a, &inst.rho_left_b})
    for (const CMatrix* r : {&inst.rho_right_a, &inst.rho_right_b})
      a.commutator = std::max(a.commutator, op_norm(*l * *r - *r * *l));
  a.frame_defect = max_abs(inst.frame.adjoint() * inst.frame -
                           CMatrix::Identity(static_cast<Eigen::Index>(inst.d), static_cast<Eigen::Index>(inst.d)));
  for (Letter s : {Letter::a, Letter::b}) {
    const CMatrix& k = s == Letter::a ? inst.kappa_a : inst.kappa_b;
    const Permutation p = inst.act.generator(s);
    for (std::size_t j = 0; j < inst.d; ++j)
      a.kappa_frame_defect =
          std::max(a.kappa_frame_defect, (k * inst.frame.col(static_cast<Eigen::Index>(j)) -
                                          inst.frame.col(p(static_cast<int>(j))))
                                             .norm());
  }
  for (Letter s : {Letter::a, Letter::b, Letter::A, Letter::B}) {
    const Word w = Word::generator(s);
    a.kappa_distance = std::max(a.kappa_distance, op_norm(inst.kappa(w) - inst.rho_left(w)));
  }
  a.x_distance = (inst.x - inst.frame * inst.alpha).norm();
  a.alpha_norm_defect = std::abs(inst.alpha.squaredNorm() - 1.0);

  const double slack = 1e-10;
  if (a.unitarity_defect > 1e-10) a.violations.push_back("an operator is not unitary");
  if (a.commutator > 1e-10) a.violations.push_back("rho_left and rho_right do not commute");
  if (a.frame_defect > 1e-10) a.violations.push_back("frame is not orthonormal");
  if (a.kappa_frame_defect > 1e-10) a.violations.push_back("kappa does not permute the frame by sigma");
  if (a.kappa_distance > inst.delta + slack) a.violations.push_back("kappa is farther than delta from rho_left");
  if (a.x_distance > inst.delta + slack) a.violations.push_back("x is farther than delta from the frame combination");
  if (a.alpha_norm_defect > 1e-10) a.violations.push_back("alpha is not a unit vector");
  return a;
}

/// P_sigma e_j = e_{sigma(j)}.
inline CMatrix permutation_matrix(const Permutation& p) {
  const auto d = static_cast<Eigen::Index>(p.degree());
  CMatrix m = CMatrix::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) m(p(static_cast<int>(j)), j) = 1.0;
  return m;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// exp(i t H) for Hermitian H.
inline CMatrix unitary_exponential(const HermitianMatrix& h, double t) {
  const EigenDecomposition e = herm_eig(h);
  CVector ph(e.values.size());
  for (Eigen::Index i = 0; i < ph.size(); ++i) ph(i) = std::polar(1.0, t * e.values(i));
  return e.vectors * ph.asDiagonal() * e.vectors.adjoint();
}

/// Generated commuting pair on C^d (x) C^m. The perturbed kind rotates the frame and
/// kappa by W = exp(i delta_target H) while rho_left stays the exact tensor action.
inline CommutingPairInstance make_instance(InstanceKind kind, std::size_t N, std::size_t d, std::size_t m,
                                           double delta_target, std::uint64_t seed, std::size_t r = 2,
                                           double eps = 0.05) {
  if (d == 0 || d > kMaxPermutedDegree) throw InputError("instance degree d must lie in [1, 5]");
  if (m == 0) throw InputError("tensor factor m must be positive");
  if (N == 0) N = d * m;
  if (N != d * m) throw InputError("ambient dimension N must equal d*m");
  if (!(eps > 0.0 && eps < 1.0)) throw InputError("eps must lie in (0, 1)");
  if (kind == InstanceKind::perturbed && !(delta_target > 0.0)) throw InputError("perturbed instances need delta > 0");
  Rng rng(seed);
  CommutingPairInstance inst;
  inst.kind = kind;
  inst.N = N;
  inst.d = d;
  inst.m = m;
  inst.r = r;
  inst.eps = eps;
  const Permutation sa = random_permutation(d, rng), sb = random_permutation(d, rng);
  inst.act = FiniteQuotientAction(sa, sb);
  const auto md = static_cast<Eigen::Index>(m), dd = static_cast<Eigen::Index>(d);
  const CMatrix ua = haar_unitary(md, rng), ub = haar_unitary(md, rng);
  const CVector xi = random_unit_vector(md, rng);
  inst.alpha = random_unit_vector(dd, rng);
  const CMatrix id_m = CMatrix::Identity(md, md), id_d = CMatrix::Identity(dd, dd);
  inst.rho_left_a = kron(permutation_matrix(sa), id_m);
  inst.rho_left_b = kron(permutation_matrix(sb), id_m);
  inst.rho_right_a = kron(id_d, ua);
  inst.rho_right_b = kron(id_d, ub);
  CMatrix frame(static_cast<Eigen::Index>(N), dd);
  for (Eigen::Index j = 0; j < dd; ++j) frame.col(j) = kron(id_d.col(j), xi);
  inst.x = frame * inst.alpha;
  if (kind == InstanceKind::tensor_exact) {
    inst.frame = frame;
    inst.kappa_a = inst.rho_left_a;
    inst.kappa_b = inst.rho_left_b;
    inst.delta = 0.0;
  } else {
    const HermitianMatrix h = random_hermitian_unit_norm(static_cast<Eigen::Index>(N), rng);
    const CMatrix w = unitary_exponential(h, delta_target);
    inst.frame = w * frame;
    inst.kappa_a = w * inst.rho_left_a * w.adjoint();
    inst.kappa_b = w * inst.rho_left_b * w.adjoint();
    double dist = (inst.x - inst.frame * inst.alpha).norm();
    for (Letter s : {Letter::a, Letter::b, Letter::A, Letter::B}) {
      const Word g = Word::generator(s);
      dist = std::max(dist, op_norm(inst.kappa(g) - inst.rho_left(g)));
    }
    inst.delta = dist;
  }
  const InstanceAudit a = audit_instance(inst);
  if (!a.ok()) throw GeneratorError("generated instance violates: " + a.violations.front());
  return inst;
}

/// Block operator on the direct sum over Sym(d) that sends block s to block target[s].
struct BlockMonomial {
  std::vector<std::size_t> target;
  std::vector<CMatrix> blocks;

  std::size_t size() const { return blocks.size(); }

  std::vector<CVector> apply(const std::vector<CVector>& v) const {
    std::vector<CVector> out(v.size());
    for (std::size_t s = 0; s < blocks.size(); ++s) out[target[s]] = blocks[s] * v[s];
    return out;
  }

  /// Distinct sources go to distinct targets, so the norm is the largest block norm.
  double norm() const {
    double n = 0.0;
    for (const auto& b : blocks) n = std::max(n, op_norm(b));
    return n;
  }

  BlockMonomial adjoint() const {
    BlockMonomial out;
    out.target.resize(size());
    out.blocks.resize(size());
    for (std::size_t s = 0; s < size(); ++s) {
      out.target[target[s]] = s;
      out.blocks[target[s]] = blocks[s].adjoint();
    }
    return out;
  }

  CMatrix dense() const {
    if (blocks.empty()) return CMatrix(0, 0);
    const Eigen::Index b = blocks.front().rows();
    const auto n = static_cast<Eigen::Index>(size()) * b;
    CMatrix out = CMatrix::Zero(n, n);
    for (std::size_t s = 0; s < size(); ++s)
      out.block(static_cast<Eigen::Index>(target[s]) * b, static_cast<Eigen::Index>(s) * b, b, b) = blocks[s];
    return out;
  }
};

/// (a b)(v) = a(b(v)).
inline BlockMonomial compose(const BlockMonomial& a, const BlockMonomial& b) {
  BlockMonomial out;
  out.target.resize(b.size());
  out.blocks.resize(b.size());
  for (std::size_t s = 0; s < b.size(); ++s) {
    out.target[s] = a.target[b.target[s]];
    out.blocks[s] = a.blocks[b.target[s]] * b.blocks[s];
  }
  return out;
}

inline double distance(const BlockMonomial& a, const BlockMonomial& b) {
  if (a.target == b.target) {
    double n = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) n = std::max(n, op_norm(a.blocks[s] - b.blocks[s]));
    return n;
  }
  return op_norm(a.dense() - b.dense());
}

/// left * mono * right for block-diagonal left, right.
inline BlockMonomial sandwich(const std::vector<CMatrix>& left, const BlockMonomial& mono,
                              const std::vector<CMatrix>& right) {
  BlockMonomial out = mono;
  for (std::size_t s = 0; s < mono.size(); ++s) out.blocks[s] = left[mono.target[s]] * mono.blocks[s] * right[s];
  return out;
}

/// C_sigma for every sigma in Sym(d) (lexicographic order), mixed with Delta at eps, on B_{2 r_work}.
inline std::vector<PdFunction> permuted_family(const CommutingPairInstance& inst, std::size_t r_work,
                                               std::uint64_t audit_seed = 0) {
  if (r_work > inst.r) throw DomainError("working radius exceeds the instance radius");
  if (inst.d > kMaxPermutedDegree) throw InputError("permuted families are limited to d <= 5");
  const std::vector<Permutation> perms = all_permutations(inst.d);
  const auto dd = static_cast<Eigen::Index>(inst.d);
  const Ball& half = shared_ball(r_work);
  Rng rng(audit_seed);
  std::uniform_int_distribution<std::size_t> pick(0, half.size() - 1);
  std::vector<PdFunction> out;
  out.reserve(perms.size());
  for (const Permutation& sg : perms) {
    CMatrix fr(inst.frame.rows(), dd);
    for (Eigen::Index j = 0; j < dd; ++j) fr.col(j) = inst.frame.col(sg(static_cast<int>(j)));
    PdFunction c = from_representation(2 * r_work, fr, inst.rho_right_a, inst.rho_right_b);
    for (int t = 0; t < 50; ++t) {
      const Word& gp = half[pick(rng)];
      const Word& hp = half[pick(rng)];
      const CMatrix direct = (inst.rho_right(gp) * fr).adjoint() * (inst.rho_right(hp) * fr);
      const double defect = max_abs(direct - c.at(hp.inverse() * gp));
      if (defect > 1e-10)
        throw RepresentationError("C_sigma is not a function of h'^-1 g' (defect " + std::to_string(defect) + ")");
    }
    out.push_back(mix(c, inst.eps));
  }
  return out;
}

enum class SqrtMethod { eigen, contour };

inline const char* to_string(SqrtMethod m) { return m == SqrtMethod::eigen ? "eigen" : "contour"; }

inline SqrtMethod parse_sqrt_method(const std::string& s) {
  if (s == "eigen") return SqrtMethod::eigen;
  if (s == "contour") return SqrtMethod::contour;
  throw InputError("unknown quadrature '" + s + "' (expected eigen or contour)");
}

struct PipelineOptions {
  std::size_t r_work = 1;
  SqrtMethod sqrt_method = SqrtMethod::eigen;
  ContourOptions contour;
  std::uint64_t audit_seed = 0;
};

struct PipelineState {
  std::size_t d = 0;
  std::size_t r_work = 0;
  std::size_t K = 0;
  double eps = 0.0;
  double L = 0.0;
  SqrtMethod sqrt_method = SqrtMethod::eigen;
  std::vector<Permutation> perms;
  std::map<Permutation, std::size_t> perm_index;
  std::vector<PdFunction> family;
  std::vector<GramRealization> realizations;
  std::vector<CMatrix> factor_inv;
  std::vector<Permutation> gamma;
  std::vector<BlockMonomial> theta;
  std::vector<HermitianMatrix> q;
  std::vector<CMatrix> q_sqrt;
  std::vector<CMatrix> q_inv_sqrt;
  std::vector<BlockMonomial> zeta;
  std::vector<CVector> y;

  std::size_t blocks() const { return perms.size(); }
  Eigen::Index block_dim() const { return static_cast<Eigen::Index>(K * d); }
  std::size_t gamma_index(const Permutation& g) const {
    const auto it = std::lower_bound(gamma.begin(), gamma.end(), g);
    if (it == gamma.end() || !(*it == g)) throw DomainError("permutation is not in the quotient image");
    return static_cast<std::size_t>(it - gamma.begin());
  }
};

/// Block (gamma sigma <- sigma) = factor_{gamma sigma} factor_sigma^{-1}.
inline BlockMonomial build_theta(const PipelineState& st, const Permutation& g) {
  BlockMonomial t;
  t.target.resize(st.blocks());
  t.blocks.resize(st.blocks());
  for (std::size_t s = 0; s < st.blocks(); ++s) {
    const std::size_t ts = st.perm_index.at(g * st.perms[s]);
    t.target[s] = ts;
    t.blocks[s] = st.realizations[ts].factor * st.factor_inv[s];
  }
  return t;
}

/// q = (1/|Gamma|) sum theta^* theta; block sigma is the average of F_s^-1 G_{gamma s} F_s^-1.
inline std::vector<HermitianMatrix> average_q(const PipelineState& st) {
  std::vector<HermitianMatrix> q(st.blocks());
  const Eigen::Index n = st.block_dim();
  for (std::size_t s = 0; s < st.blocks(); ++s) {
    CMatrix acc = CMatrix::Zero(n, n);
    for (const BlockMonomial& t : st.theta) acc += t.blocks[s].adjoint() * t.blocks[s];
    q[s] = HermitianMatrix::hermitian_part(acc / static_cast<double>(st.theta.size()));
  }
  return q;
}

/// zeta(gamma) = q^{1/2} theta(gamma) q^{-1/2}.
inline BlockMonomial repair(const PipelineState& st, const Permutation& g) {
  return sandwich(st.q_sqrt, st.theta[st.gamma_index(g)], st.q_inv_sqrt);
}

/// Coefficient vector over B_{r_work} x [d] with `coef` placed at word w.
inline CVector place_coefficients(const PipelineState& st, const Word& w, const CVector& coef) {
  CVector c = CVector::Zero(st.block_dim());
  const auto i = static_cast<Eigen::Index>(shared_ball(st.r_work).index_of(w));
  c.segment(i * static_cast<Eigen::Index>(st.d), static_cast<Eigen::Index>(st.d)) = coef;
  return c;
}

inline CVector permuted_alpha(const CVector& alpha, const Permutation& s) {
  CVector out(alpha.size());
  for (Eigen::Index j = 0; j < alpha.size(); ++j) out(j) = alpha(s(static_cast<int>(j)));
  return out;
}

/// y = (1/sqrt(d!)) (+)_sigma sum_j alpha_{sigma j} Phi_{D_sigma}(e)_j.
inline std::vector<CVector> witness_vector(const PipelineState& st, const CVector& alpha) {
  if (alpha.size() != static_cast<Eigen::Index>(st.d)) throw InputError("alpha has the wrong length");
  if (std::abs(alpha.squaredNorm() - 1.0) > 1e-10) throw InputError("alpha must be a unit vector");
  const double scale = 1.0 / std::sqrt(static_cast<double>(st.blocks()));
  std::vector<CVector> y(st.blocks());
  for (std::size_t s = 0; s < st.blocks(); ++s)
    y[s] = scale * (st.realizations[s].factor * place_coefficients(st, Word(), permuted_alpha(alpha, st.perms[s])));
  return y;
}

/// T(g') y: moves the coefficients of y from (e, j) to (g', j) in every block.
inline std::vector<CVector> right_translate_witness(const PipelineState& st, const CVector& alpha, const Word& gp) {
  if (gp.length() > st.r_work) throw DomainError("g' lies outside the working ball");
  const double scale = 1.0 / std::sqrt(static_cast<double>(st.blocks()));
  std::vector<CVector> v(st.blocks());
  for (std::size_t s = 0; s < st.blocks(); ++s)
    v[s] = scale * (st.realizations[s].factor * place_coefficients(st, gp, permuted_alpha(alpha, st.perms[s])));
  return v;
}

inline Complex block_inner(const std::vector<CVector>& u, const std::vector<CVector>& v) {
  Complex s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i].dot(v[i]);
  return s;
}

inline double block_norm(const std::vector<CVector>& u) { return std::sqrt(std::abs(block_inner(u, u))); }

inline PipelineState build_pipeline(const CommutingPairInstance& inst, const PipelineOptions& opts = {}) {
  if (2 * opts.r_work > inst.r) throw DomainError("pipeline needs 2 * r_work <= instance radius");
  PipelineState st;
  st.d = inst.d;
  st.r_work = opts.r_work;
  st.K = ball_size(opts.r_work);
  st.eps = inst.eps;
  st.L = std::sqrt(static_cast<double>(st.K) / inst.eps);
  st.sqrt_method = opts.sqrt_method;
  st.perms = all_permutations(inst.d);
  for (std::size_t i = 0; i < st.perms.size(); ++i) st.perm_index.emplace(st.perms[i], i);
  st.family = permuted_family(inst, opts.r_work, opts.audit_seed);
  for (const PdFunction& dfun : st.family) {
    GramRealization gr = realize(dfun, opts.r_work);
    const EigenDecomposition e = herm_eig(gr.gram);
    if (e.values(0) < detail::kStrictGramFloor) throw PositivityError("realization factor is singular", e.values(0));
    const RVector inv = e.values.cwiseSqrt().cwiseInverse();
    st.factor_inv.push_back(e.vectors * inv.cast<Complex>().asDiagonal() * e.vectors.adjoint());
    st.realizations.push_back(std::move(gr));
  }
  st.gamma = QuotientClosure(inst.act).elements();
  for (const Permutation& g : st.gamma) st.theta.push_back(build_theta(st, g));
  st.q = average_q(st);
  std::optional<Contour> contour;
  if (opts.sqrt_method == SqrtMethod::contour) contour = Contour::rectangle(st.L, opts.contour);
  for (const HermitianMatrix& qb : st.q) {
    if (contour) {
      const CMatrix root = contour_sqrt(qb, *contour).matrix();
      st.q_sqrt.push_back(root);
      st.q_inv_sqrt.push_back(root.inverse());
    } else {
      st.q_sqrt.push_back(psd_sqrt(qb).matrix());
      st.q_inv_sqrt.push_back(psd_inv_sqrt(qb).matrix());
    }
  }
  for (const Permutation& g : st.gamma) st.zeta.push_back(repair(st, g));
  st.y = witness_vector(st, inst.alpha);
  return st;
}

struct MatrixElement {
  Word g, gp;
  Complex value;
  Complex reference;
  double error = 0.0;
};

/// <zeta(sigma(g)) T(g') y, y> against <rho_left(g) rho_right(g') x, x>.
inline MatrixElement matrix_element(const PipelineState& st, const CommutingPairInstance& inst, const Word& g,
                                    const Word& gp) {
  if (g.length() > st.r_work || gp.length() > st.r_work) throw DomainError("matrix_element: word outside the working ball");
  const BlockMonomial& z = st.zeta[st.gamma_index(inst.act.evaluate(g))];
  const std::vector<CVector> v = z.apply(right_translate_witness(st, inst.alpha, gp));
  MatrixElement me{g, gp, block_inner(v, st.y), (inst.rho_left(g) * inst.rho_right(gp) * inst.x).dot(inst.x), 0.0};
  me.error = std::abs(me.value - me.reference);
  return me;
}

/// <zeta(gamma) T(g') y, y> and <T(g') zeta(gamma) y, y>, the latter defined when zeta(gamma) y
/// keeps its coefficients at e.
inline std::pair<Complex, Complex> commutation_pair(const PipelineState& st, const CVector& alpha, std::size_t gi,
                                                    const Word& gp) {
  const BlockMonomial& z = st.zeta[gi];
  const Complex lhs = block_inner(z.apply(right_translate_witness(st, alpha, gp)), st.y);
  const std::vector<CVector> zy = z.apply(st.y);
  const Eigen::Index dd = static_cast<Eigen::Index>(st.d);
  const auto gpi = static_cast<Eigen::Index>(shared_ball(st.r_work).index_of(gp));
  std::vector<CVector> moved(st.blocks());
  for (std::size_t s = 0; s < st.blocks(); ++s) {
    const CVector coef = st.factor_inv[s] * zy[s];
    const double off = (coef.norm() > 0) ? std::sqrt(std::max(0.0, coef.squaredNorm() - coef.head(dd).squaredNorm())) : 0.0;
    if (off > 1e-8) throw DomainError("zeta(gamma) y is not supported at e; T(g') is undefined on it");
    CVector c = CVector::Zero(st.block_dim());
    c.segment(gpi * dd, dd) = coef.head(dd);
    moved[s] = st.realizations[s].factor * c;
  }
  return {lhs, block_inner(moved, st.y)};
}

struct GroupRingTerm {
  Word g, gp;
  Complex coefficient;
};

struct GroupRingReport {
  double rho_norm2 = 0.0;            // ||rho(phi) x||^2, computed directly
  double rho_norm2_expansion = 0.0;  // the same from matrix elements of rho
  double zeta_norm2 = 0.0;           // ||zeta(phi) y||^2 from pipeline matrix elements
  double eps_pair = 0.0;
  double coefficient_l1 = 0.0;
  double difference = 0.0;
  double budget = 0.0;
  bool holds() const { return difference <= budget + 1e-12; }
};

/// Expands ||phi x||^2 = sum conj(c_t) c_s <rho(g_s^-1 g_t, g'_s^-1 g'_t) x, x> on both sides.
inline GroupRingReport group_ring_check(const PipelineState& st, const CommutingPairInstance& inst,
                                        const std::vector<GroupRingTerm>& phi) {
  for (const auto& t : phi)
    if (2 * t.g.length() > st.r_work || 2 * t.gp.length() > st.r_work)
      throw DomainError("group ring support must lie in B_{r_work/2} x B_{r_work/2}");
  GroupRingReport rep;
  CVector v = CVector::Zero(inst.x.size());
  for (const auto& t : phi) {
    v += t.coefficient * (inst.rho_left(t.g) * inst.rho_right(t.gp) * inst.x);
    rep.coefficient_l1 += std::abs(t.coefficient);
  }
  rep.rho_norm2 = v.squaredNorm();
  Complex rho_sum = 0.0, zeta_sum = 0.0;
  for (const auto& s : phi) {
    for (const auto& t : phi) {
      const MatrixElement me = matrix_element(st, inst, s.g.inverse() * t.g, s.gp.inverse() * t.gp);
      const Complex w = std::conj(t.coefficient) * s.coefficient;
      rho_sum += w * me.reference;
      zeta_sum += w * me.value;
      rep.eps_pair = std::max(rep.eps_pair, me.error);
    }
  }
  rep.rho_norm2_expansion = rho_sum.real();
  rep.zeta_norm2 = zeta_sum.real();
  rep.difference = std::abs(rep.rho_norm2 - rep.zeta_norm2);
  rep.budget = rep.eps_pair * rep.coefficient_l1 * rep.coefficient_l1;
  return rep;
}

struct BoundCheck {
  std::string name;
  double value = 0.0;
  double budget = 0.0;
  bool asserted = true;
  bool holds() const { return !asserted || value <= budget; }
};

struct PipelineReport {
  double L = 0.0;
  std::size_t K = 0;
  double delta = 0.0;
  SpectralInterval q_spectrum;
  double numerical_budget = 0.0;  // 320 L^10 K delta
  bool numerical_condition = false;
  std::vector<BoundCheck> checks;
  std::vector<MatrixElement> elements;
  double max_element_error = 0.0;
  std::optional<double> max_commutation_gap;
  std::vector<std::string> notes;

  std::vector<std::string> failures() const {
    std::vector<std::string> f;
    for (const auto& c : checks)
      if (!c.holds()) f.push_back(c.name);
    return f;
  }
};

/// Every bound of the repair chain, evaluated on a built pipeline.
inline PipelineReport pipeline_diagnostics(const PipelineState& st, const CommutingPairInstance& inst,
                                           const ContourOptions& contour_opts = {}, std::uint64_t seed = 0) {
  PipelineReport rep;
  rep.L = st.L;
  rep.K = st.K;
  rep.delta = inst.delta;
  const double L = st.L, K = static_cast<double>(st.K), delta = inst.delta;
  rep.numerical_budget = 320.0 * std::pow(L, 10) * K * delta;
  rep.numerical_condition = rep.numerical_budget <= st.eps;
  auto add = [&](std::string name, double value, double budget, bool asserted = true) {
    rep.checks.push_back({std::move(name), value, budget, asserted});
  };

  // State invariants.
  double family_floor = std::numeric_limits<double>::infinity();
  for (const auto& gr : st.realizations) family_floor = std::min(family_floor, min_eigenvalue(gr.gram));
  add("family_gram_floor", st.eps - family_floor, 1e-10);
  rep.q_spectrum = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& qb : st.q) {
    const SpectralInterval s = spec_interval(qb);
    rep.q_spectrum.lo = std::min(rep.q_spectrum.lo, s.lo);
    rep.q_spectrum.hi = std::max(rep.q_spectrum.hi, s.hi);
  }
  add("q_spectrum_lower", 1.0 / (L * L) - rep.q_spectrum.lo, 1e-8);
  add("q_spectrum_upper", rep.q_spectrum.hi - L * L, 1e-8);
  add("witness_norm", std::abs(block_norm(st.y) - 1.0), 1e-10);

  // Transport norms between all pairs, and the theta norm bound.
  double tmax = 0.0;
  for (std::size_t s = 0; s < st.blocks(); ++s)
    for (std::size_t t = 0; t < st.blocks(); ++t)
      tmax = std::max(tmax, op_norm(st.realizations[t].factor * st.factor_inv[s]));
  add("transport_norm_max", tmax, L + 1e-6);
  double theta_max = 0.0;
  for (const auto& t : st.theta) theta_max = std::max(theta_max, t.norm());
  add("theta_norm_max", theta_max, L + 1e-8);

  // Nearly isometric transports along sigma(g), g in B_1.
  double eggs = 0.0;
  for (const Word& g : shared_ball(1)) {
    const Permutation p = inst.act.evaluate(g);
    for (std::size_t s = 0; s < st.blocks(); ++s) {
      const std::size_t t = st.perm_index.at(p * st.perms[s]);
      const double n = op_norm(st.realizations[t].factor * st.factor_inv[s]);
      eggs = std::max(eggs, n * n);
    }
  }
  add("eggs_energy_max", eggs, 1.0 + 2.0 * K * delta / st.eps + 1e-6);

  // Frame-permutation proximity of inner products.
  {
    Rng rng(seed);
    const Ball& half = shared_ball(st.r_work);
    std::uniform_int_distribution<std::size_t> pick(0, half.size() - 1);
    double worst = -std::numeric_limits<double>::infinity();
    const auto dd = static_cast<Eigen::Index>(st.d);
    for (const Word& g : shared_ball(1)) {
      const Permutation p = inst.act.evaluate(g);
      for (std::size_t s = 0; s < st.blocks(); ++s) {
        const CVector beta = complex_gaussian(dd, 1, rng).col(0), eta = complex_gaussian(dd, 1, rng).col(0);
        const Word& gp = half[pick(rng)];
        const Word& hp = half[pick(rng)];
        CVector u1 = CVector::Zero(inst.x.size()), v1 = u1, u2 = u1, v2 = u1;
        const Permutation ps = p * st.perms[s];
        for (Eigen::Index j = 0; j < dd; ++j) {
          u1 += beta(j) * inst.frame.col(st.perms[s](static_cast<int>(j)));
          v1 += eta(j) * inst.frame.col(st.perms[s](static_cast<int>(j)));
          u2 += beta(j) * inst.frame.col(ps(static_cast<int>(j)));
          v2 += eta(j) * inst.frame.col(ps(static_cast<int>(j)));
        }
        const CMatrix rg = inst.rho_right(gp), rh = inst.rho_right(hp);
        const double diff = std::abs((rg * u1).dot(rh * v1) - (rg * u2).dot(rh * v2));
        worst = std::max(worst, diff - (2.0 * delta * beta.norm() * eta.norm()));
      }
    }
    add("prox_ind_excess", worst, 1e-8);
  }

  // Averaging identity, unitarity and homomorphism of the repair.
  double avg = 0.0, unit = 0.0;
  for (const auto& t : st.theta) {
    for (std::size_t s = 0; s < st.blocks(); ++s)
      avg = std::max(avg, op_norm(t.blocks[s].adjoint() * st.q[t.target[s]].matrix() * t.blocks[s] - st.q[s].matrix()));
  }
  for (const auto& z : st.zeta)
    for (const auto& b : z.blocks) unit = std::max(unit, op_norm(b.adjoint() * b - CMatrix::Identity(b.rows(), b.cols())));
  add("averaging_identity", avg, 1e-8);
  add("zeta_unitarity", unit, 1e-8);

  {
    const std::size_t ng = st.gamma.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (ng * ng <= 400) {
      for (std::size_t i = 0; i < ng; ++i)
        for (std::size_t j = 0; j < ng; ++j) pairs.emplace_back(i, j);
    } else {
      Rng rng(seed + 1);
      std::uniform_int_distribution<std::size_t> u(0, ng - 1);
      for (int k = 0; k < 400; ++k) pairs.emplace_back(u(rng), u(rng));
    }
    double th = 0.0, zh = 0.0;
    for (const auto& [i, j] : pairs) {
      const std::size_t ij = st.gamma_index(st.gamma[i] * st.gamma[j]);
      th = std::max(th, distance(compose(st.theta[i], st.theta[j]), st.theta[ij]));
      zh = std::max(zh, distance(compose(st.zeta[i], st.zeta[j]), st.zeta[ij]));
    }
    add("theta_homomorphism", th, 1e-10);
    add("zeta_homomorphism", zh, 1e-8);
  }

  // The repair bound chain, along sigma(g) for g in B_1.
  {
    std::vector<std::size_t> gens;
    for (const Word& g : shared_ball(1)) gens.push_back(st.gamma_index(inst.act.evaluate(g)));
    std::sort(gens.begin(), gens.end());
    gens.erase(std::unique(gens.begin(), gens.end()), gens.end());

    double comm = 0.0, comm_sqrt = 0.0, dev = 0.0;
    for (std::size_t gi : gens) {
      const BlockMonomial& t = st.theta[gi];
      for (std::size_t s = 0; s < st.blocks(); ++s) {
        const std::size_t ts = t.target[s];
        comm = std::max(comm, op_norm(st.q[ts].matrix() * t.blocks[s] - t.blocks[s] * st.q[s].matrix()));
        comm_sqrt = std::max(comm_sqrt, op_norm(t.blocks[s] * st.q_sqrt[s] - st.q_sqrt[ts] * t.blocks[s]));
      }
    }
    for (std::size_t gi = 0; gi < st.gamma.size(); ++gi) dev = std::max(dev, distance(st.zeta[gi], st.theta[gi]));
    add("q_theta_commutator", comm, 4.0 * L * L * K * delta + 1e-10);

    const Contour c = Contour::rectangle(L, contour_opts);
    double worst_ratio = 0.0, worst_value = 0.0, worst_budget = 0.0;
    const Eigen::Index n = st.block_dim();
    std::vector<CMatrix> res(st.blocks());
    std::vector<EigenDecomposition> qe;
    for (const auto& qb : st.q) qe.push_back(herm_eig(qb));
    // At most 256 evenly strided nodes.
    const std::size_t stride = (c.nodes().size() + 255) / 256;
    for (std::size_t ni = 0; ni < c.nodes().size(); ni += stride) {
      const QuadratureNode& node = c.nodes()[ni];
      double dist = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < st.blocks(); ++s) {
        CVector inv(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          dist = std::min(dist, std::abs(node.z - qe[s].values(i)));
          inv(i) = 1.0 / (node.z - qe[s].values(i));
        }
        res[s] = qe[s].vectors * inv.asDiagonal() * qe[s].vectors.adjoint();
      }
      const double budget = 4.0 * L * L * K * delta / (dist * dist) + 1e-10;
      for (std::size_t gi : gens) {
        const BlockMonomial& t = st.theta[gi];
        std::vector<CMatrix> diff(st.blocks());
        double frob = 0.0;
        for (std::size_t s = 0; s < st.blocks(); ++s) {
          diff[s] = t.blocks[s] * res[s] - res[t.target[s]] * t.blocks[s];
          frob = std::max(frob, diff[s].norm());
        }
        if (worst_budget != 0.0 && frob / budget <= worst_ratio) continue;  // frob >= op norm
        double v = 0.0;
        for (const auto& m : diff) v = std::max(v, op_norm(m));
        if (v / budget > worst_ratio || worst_budget == 0.0) {
          worst_ratio = v / budget;
          worst_value = v;
          worst_budget = budget;
        }
      }
    }
    add("resolvent_commutator_worst_node", worst_value, worst_budget);
    add("sqrt_commutator", comm_sqrt, 320.0 * std::pow(L, 9) * K * delta + 1e-10);
    add("repair_deviation", dev, rep.numerical_budget + 1e-8, delta > 0 && rep.numerical_condition);
    add("repair_deviation_inverse_R", dev, st.eps, false);
  }

  {
    const double d_fact = static_cast<double>(st.blocks());
    const double printed = 1.0 / d_fact;
    rep.notes.push_back("witness normalized by 1/sqrt(d!); the printed 1/d! would give norm " +
                        std::to_string(printed * std::sqrt(d_fact)));
    rep.notes.push_back("R is read as 1/eps in the eggs budget and 1 - 1/R as 1 - eps");
  }

  const Ball& bw = shared_ball(st.r_work);
  for (const Word& g : bw)
    for (const Word& gp : bw) {
      rep.elements.push_back(matrix_element(st, inst, g, gp));
      rep.max_element_error = std::max(rep.max_element_error, rep.elements.back().error);
    }
  add("matrix_element_error", rep.max_element_error, 5.0 * st.eps, rep.numerical_condition);

  if (inst.delta == 0.0) {
    double gap = 0.0;
    for (std::size_t gi = 0; gi < st.gamma.size(); ++gi)
      for (const Word& gp : bw) {
        const auto [a, b] = commutation_pair(st, inst.alpha, gi, gp);
        gap = std::max(gap, std::abs(a - b));
      }
    rep.max_commutation_gap = gap;
    add("commutation_surrogate", gap, 5.0 * st.eps);
  }
  return rep;
}

}  // namespace freeharm
