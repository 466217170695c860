#include <gtest/gtest.h>

#include "freeharm/io.hpp"
#include "oracles.hpp"

using namespace freeharm;
using freeharm::io::json;

namespace {

Word W(const char* s) { return Word::parse(s); }

CommutingPairInstance tensor(std::size_t d, std::size_t m, std::uint64_t seed, std::size_t r = 2) {
  return make_instance(InstanceKind::tensor_exact, 0, d, m, 0.0, seed, r, 0.05);
}

CommutingPairInstance perturbed(std::size_t d, std::size_t m, std::uint64_t seed, double delta = 1e-3) {
  return make_instance(InstanceKind::perturbed, 0, d, m, delta, seed, 2, 0.05);
}

double max_theta_defect(const PipelineState& st) {
  double worst = 0.0;
  for (const auto& g1 : st.gamma)
    for (const auto& g2 : st.gamma)
      worst = std::max(worst, distance(compose(st.theta[st.gamma_index(g1)], st.theta[st.gamma_index(g2)]),
                                       st.theta[st.gamma_index(g1 * g2)]));
  return worst;
}

}  // namespace

// ---- instances --------------------------------------------------------------

TEST(Instance, TensorPassesAudit) {
  const CommutingPairInstance inst = tensor(2, 2, 7);
  const InstanceAudit a = audit_instance(inst);
  EXPECT_TRUE(a.ok());
  EXPECT_EQ(inst.delta, 0.0);
  EXPECT_LE(a.commutator, 1e-10);
  EXPECT_LE(a.unitarity_defect, 1e-10);
  EXPECT_EQ(inst.N, 4u);
  EXPECT_LE(a.x_distance, 1e-15);
  EXPECT_LE(op_norm(inst.kappa_a - inst.rho_left_a), 0.0);
  // kappa permutes the frame by sigma, checked column by column.
  for (int j = 0; j < 2; ++j)
    EXPECT_LE((inst.kappa_a * inst.frame.col(j) - inst.frame.col(inst.act.sigma_a()(j))).norm(), 1e-12);
}

TEST(Instance, PerturbedDeltaInRange) {
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const CommutingPairInstance inst = perturbed(3, 2, s);
    EXPECT_GT(inst.delta, 0.0);
    EXPECT_LE(inst.delta, 2e-3);
    const InstanceAudit a = audit_instance(inst);
    EXPECT_TRUE(a.ok()) << (a.violations.empty() ? "" : a.violations.front());
    double measured = 0.0;
    for (const char* g : {"a", "b", "A", "B"})
      measured = std::max(measured, op_norm(inst.kappa(W(g)) - inst.rho_left(W(g))));
    EXPECT_LE(measured, inst.delta + 1e-10);
    EXPECT_LE((inst.x - inst.frame * inst.alpha).norm(), inst.delta + 1e-10);
  }
}

TEST(Instance, Deterministic) {
  EXPECT_EQ(io::to_json(perturbed(2, 3, 9)).dump(), io::to_json(perturbed(2, 3, 9)).dump());
  EXPECT_NE(io::to_json(tensor(2, 3, 9)).dump(), io::to_json(tensor(2, 3, 10)).dump());
}

TEST(Instance, InvalidParameters) {
  EXPECT_THROW(tensor(6, 2, 1), InputError);
  EXPECT_THROW(make_instance(InstanceKind::tensor_exact, 5, 2, 2, 0.0, 1), InputError);
  EXPECT_THROW(make_instance(InstanceKind::perturbed, 0, 2, 2, 0.0, 1), InputError);
  EXPECT_THROW(make_instance(InstanceKind::tensor_exact, 0, 2, 2, 0.0, 1, 2, 1.5), InputError);
}

// ---- permuted family --------------------------------------------------------

TEST(Family, TensorValues) {
  const CommutingPairInstance inst = tensor(3, 2, 4);
  const auto fam = permuted_family(inst, 2);
  ASSERT_EQ(fam.size(), 6u);
  const CVector xi = inst.frame.col(0).head(2);
  const CMatrix u_a = inst.rho_right_a.topLeftCorner(2, 2), u_b = inst.rho_right_b.topLeftCorner(2, 2);
  for (const auto& f : fam) {
    EXPECT_EQ(f.r(), 4u);
    EXPECT_LE(max_abs(f.at(Word()) - CMatrix::Identity(3, 3)), 1e-12);
    EXPECT_GE(min_eigenvalue(gram(f, 2)), inst.eps - 1e-10);
    for (const Word& w : Ball(2)) {
      if (w.is_identity()) continue;
      const Complex c = (word_unitary(w, u_a, u_b) * xi).dot(xi);
      const CMatrix expect = (1 - inst.eps) * c * CMatrix::Identity(3, 3);
      EXPECT_LE(max_abs(f.at(w) - expect), 1e-12) << w.str();
    }
  }
}

TEST(Family, ScalarCase) {
  const CommutingPairInstance inst = tensor(1, 3, 2);
  const auto fam = permuted_family(inst, 1);
  ASSERT_EQ(fam.size(), 1u);
  for (const Word& w : Ball(2)) {
    const CVector x1 = inst.frame.col(0);
    const Complex c = (inst.rho_right(w) * x1).dot(x1);
    const Complex expect = w.is_identity() ? Complex(1.0) : (1 - inst.eps) * c;
    EXPECT_NEAR(std::abs(fam[0].at(w)(0, 0) - expect), 0.0, 1e-12);
  }
}

TEST(Family, AuditRejectsNonHomomorphism) {
  CommutingPairInstance inst = tensor(2, 2, 3);
  inst.rho_right_a *= 1.1;
  EXPECT_THROW(permuted_family(inst, 1), RepresentationError);
  EXPECT_THROW(permuted_family(tensor(2, 2, 3, 1), 2), DomainError);
}

// ---- theta, q, zeta, witness ------------------------------------------------

TEST(Pipeline, TensorIsUnitary) {
  const CommutingPairInstance inst = tensor(3, 2, 1);
  const PipelineState st = build_pipeline(inst);
  EXPECT_EQ(st.K, 5u);
  EXPECT_DOUBLE_EQ(st.L, 10.0);
  EXPECT_EQ(st.blocks(), 6u);
  const std::size_t id = st.gamma_index(Permutation::identity(3));
  EXPECT_LE(op_norm(st.theta[id].dense() - CMatrix::Identity(90, 90)), 1e-12);
  for (const auto& t : st.theta) {
    const CMatrix dt = t.dense();
    EXPECT_LE(op_norm(dt.adjoint() * dt - CMatrix::Identity(90, 90)), 1e-10);
  }
  for (const auto& q : st.q) EXPECT_LE(op_norm(q.matrix() - CMatrix::Identity(15, 15)), 1e-10);
  for (std::size_t i = 0; i < st.gamma.size(); ++i) EXPECT_LE(distance(st.zeta[i], st.theta[i]), 1e-10);
  EXPECT_LE(max_theta_defect(st), 1e-10);
}

TEST(Pipeline, TrivialQuotientGivesIdentityQ) {
  CommutingPairInstance inst = tensor(2, 2, 5);
  inst.act = FiniteQuotientAction(Permutation::identity(2), Permutation::identity(2));
  inst.rho_left_a = inst.rho_left_b = inst.kappa_a = inst.kappa_b = CMatrix::Identity(4, 4);
  const PipelineState st = build_pipeline(inst);
  EXPECT_EQ(st.gamma.size(), 1u);
  for (const auto& q : st.q) EXPECT_LE(op_norm(q.matrix() - CMatrix::Identity(10, 10)), 1e-12);
}

TEST(Pipeline, PerturbedRepair) {
  const CommutingPairInstance inst = perturbed(3, 2, 2);
  const PipelineState st = build_pipeline(inst);
  const double L = st.L;
  for (std::size_t i = 0; i < st.gamma.size(); ++i) {
    const CMatrix t = st.theta[i].dense(), z = st.zeta[i].dense();
    CMatrix q = CMatrix::Zero(t.rows(), t.cols());
    for (std::size_t s = 0; s < st.blocks(); ++s)
      q.block(static_cast<Eigen::Index>(s) * 15, static_cast<Eigen::Index>(s) * 15, 15, 15) = st.q[s].matrix();
    EXPECT_LE(op_norm(t.adjoint() * q * t - q), 1e-8);
    EXPECT_LE(op_norm(z.adjoint() * z - CMatrix::Identity(t.rows(), t.cols())), 1e-8);
    EXPECT_LE(st.theta[i].norm(), L + 1e-8);
  }
  for (const auto& q : st.q) EXPECT_TRUE(spec_interval(q).within(1 / (L * L), L * L, 1e-8));
  EXPECT_LE(max_theta_defect(st), 1e-10);
  for (const auto& g1 : st.gamma)
    for (const auto& g2 : st.gamma)
      EXPECT_LE(distance(compose(st.zeta[st.gamma_index(g1)], st.zeta[st.gamma_index(g2)]), st.zeta[st.gamma_index(g1 * g2)]),
                1e-8);
}

TEST(Pipeline, WitnessNorm) {
  const CommutingPairInstance i1 = tensor(1, 2, 3);
  const PipelineState s1 = build_pipeline(i1);
  EXPECT_NEAR(block_norm(s1.y), 1.0, 1e-10);
  EXPECT_NEAR(std::abs(i1.alpha(0)), 1.0, 1e-12);
  EXPECT_LE((s1.y[0] - i1.alpha(0) * s1.realizations[0].phi(Word(), 0)).norm(), 1e-12);
  const PipelineState s2 = build_pipeline(perturbed(2, 2, 3));
  const CVector e1 = CVector::Unit(2, 0);
  EXPECT_NEAR(block_norm(witness_vector(s2, e1)), 1.0, 1e-10);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 5; ++t) {
    CVector a = oracle::random_vector(2, rng);
    a.normalize();
    EXPECT_NEAR(block_norm(witness_vector(s2, a)), 1.0, 1e-10);
  }
  EXPECT_THROW(witness_vector(s2, CVector::Ones(2)), InputError);
}

TEST(Pipeline, Errors) {
  EXPECT_THROW(build_pipeline(tensor(2, 2, 1, 1)), DomainError);
  const CommutingPairInstance inst = tensor(2, 2, 1);
  const PipelineState st = build_pipeline(inst);
  EXPECT_THROW(matrix_element(st, inst, W("aa"), Word()), DomainError);
  EXPECT_THROW(group_ring_check(st, inst, {{W("a"), Word(), 1.0}}), DomainError);
  EXPECT_THROW(parse_sqrt_method("pade"), InputError);
}

// ---- matrix elements and the group-ring chain -------------------------------

TEST(MatrixElements, IdentityPair) {
  const CommutingPairInstance inst = perturbed(2, 2, 6);
  const MatrixElement me = matrix_element(build_pipeline(inst), inst, Word(), Word());
  EXPECT_NEAR(std::abs(me.value - 1.0), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(me.reference - 1.0), 0.0, 1e-10);
  EXPECT_LE(me.error, 1e-10);
}

TEST(MatrixElements, TensorWithinFiveEps) {
  const CommutingPairInstance inst = tensor(3, 2, 1);
  const PipelineState st = build_pipeline(inst);
  double worst = 0.0;
  int pairs = 0;
  for (const Word& g : Ball(1))
    for (const Word& gp : Ball(1)) {
      worst = std::max(worst, matrix_element(st, inst, g, gp).error);
      ++pairs;
    }
  EXPECT_EQ(pairs, 25);
  EXPECT_LE(worst, 5 * inst.eps);
}

TEST(MatrixElements, ScalarHandFormula) {
  const CommutingPairInstance inst = tensor(1, 3, 8);
  const PipelineState st = build_pipeline(inst);
  for (const Word& gp : Ball(1)) {
    const Complex c = (inst.rho_right(gp) * inst.x).dot(inst.x);
    const Complex hand = gp.is_identity() ? Complex(1.0) : (1 - inst.eps) * c;
    for (const Word& g : Ball(1)) {
      const MatrixElement me = matrix_element(st, inst, g, gp);
      EXPECT_NEAR(std::abs(me.value - hand), 0.0, 1e-10);
      EXPECT_NEAR(std::abs(me.reference - c), 0.0, 1e-10);
    }
  }
}

TEST(MatrixElements, ContourMatchesEigen) {
  const CommutingPairInstance inst = perturbed(2, 2, 4);
  PipelineOptions po;
  po.sqrt_method = SqrtMethod::contour;
  const PipelineState a = build_pipeline(inst), b = build_pipeline(inst, po);
  for (std::size_t s = 0; s < a.blocks(); ++s) EXPECT_LE(max_abs(a.q_sqrt[s] - b.q_sqrt[s]), 1e-6);
  for (const Word& g : Ball(1))
    for (const Word& gp : Ball(1))
      EXPECT_LE(std::abs(matrix_element(a, inst, g, gp).value - matrix_element(b, inst, g, gp).value), 1e-6);
}

TEST(GroupRing, UnitTerms) {
  const CommutingPairInstance inst = make_instance(InstanceKind::tensor_exact, 0, 2, 2, 0.0, 3, 4, 0.05);
  PipelineOptions po;
  po.r_work = 2;
  const PipelineState st = build_pipeline(inst, po);
  const GroupRingReport e = group_ring_check(st, inst, {{Word(), Word(), 1.0}});
  EXPECT_NEAR(e.rho_norm2, 1.0, 1e-10);
  EXPECT_NEAR(e.zeta_norm2, 1.0, 1e-10);
  EXPECT_LE(e.difference, 1e-10);
  EXPECT_TRUE(e.holds());
  const GroupRingReport single = group_ring_check(st, inst, {{W("a"), W("B"), Complex(0.0, 1.0)}});
  EXPECT_NEAR(single.rho_norm2, 1.0, 1e-10);
  EXPECT_NEAR(single.zeta_norm2, 1.0, single.eps_pair + 1e-10);
  EXPECT_TRUE(single.holds());
}

TEST(GroupRing, RandomTermsExpansionAndBound) {
  const CommutingPairInstance inst = make_instance(InstanceKind::tensor_exact, 0, 2, 2, 0.0, 5, 4, 0.05);
  PipelineOptions po;
  po.r_work = 2;
  const PipelineState st = build_pipeline(inst, po);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  std::normal_distribution<double> n;
  const Ball b1(1);
  for (int t = 0; t < 3; ++t) {
    std::vector<GroupRingTerm> phi;
    for (int k = 0; k < 4; ++k) phi.push_back({b1[pick(rng)], b1[pick(rng)], Complex(n(rng), n(rng))});
    const GroupRingReport rep = group_ring_check(st, inst, phi);
    // Brute-force |rho(phi) x|^2 from the operators themselves.
    CVector v = CVector::Zero(inst.x.size());
    for (const auto& term : phi) v += term.coefficient * (inst.rho_left(term.g) * inst.rho_right(term.gp) * inst.x);
    EXPECT_NEAR(rep.rho_norm2, v.squaredNorm(), 1e-10 * (1 + v.squaredNorm()));
    EXPECT_NEAR(rep.rho_norm2_expansion, rep.rho_norm2, 1e-9 * (1 + rep.rho_norm2));
    EXPECT_TRUE(rep.holds()) << rep.difference << " > " << rep.budget;
  }
}

// ---- diagnostics ------------------------------------------------------------

TEST(Diagnostics, TensorAllChecksHold) {
  const CommutingPairInstance inst = tensor(3, 2, 1);
  const PipelineState st = build_pipeline(inst);
  const PipelineReport rep = pipeline_diagnostics(st, inst, {}, 1);
  EXPECT_TRUE(rep.failures().empty()) << rep.failures().front();
  EXPECT_DOUBLE_EQ(rep.L, 10.0);
  EXPECT_TRUE(rep.max_commutation_gap.has_value());
  EXPECT_LE(*rep.max_commutation_gap, 5 * inst.eps);
  EXPECT_EQ(rep.elements.size(), 25u);
  EXPECT_LE(rep.max_element_error, 0.25);
  std::set<std::string> names;
  for (const auto& c : rep.checks) names.insert(c.name);
  for (const char* n : {"q_spectrum_lower", "q_spectrum_upper", "zeta_unitarity", "averaging_identity", "theta_homomorphism",
                        "transport_norm_max", "eggs_energy_max", "prox_ind_excess", "matrix_element_error"})
    EXPECT_TRUE(names.count(n)) << n;
  for (const auto& c : rep.checks)
    if (c.name == "eggs_energy_max") EXPECT_NEAR(c.value, 1.0, 1e-8);
}

TEST(Diagnostics, PerturbedChecksHold) {
  const CommutingPairInstance inst = perturbed(2, 2, 1);
  const PipelineState st = build_pipeline(inst);
  const PipelineReport rep = pipeline_diagnostics(st, inst, {}, 1);
  EXPECT_TRUE(rep.failures().empty()) << rep.failures().front();
  EXPECT_FALSE(rep.numerical_condition);
  EXPECT_NEAR(rep.numerical_budget, 320 * std::pow(st.L, 10) * st.K * inst.delta, 1e-6 * rep.numerical_budget);
  EXPECT_FALSE(rep.max_commutation_gap.has_value());
}

// ---- io ---------------------------------------------------------------------

TEST(Io, PdFunctionRoundTrip) {
  const PdFunction f = random_nspd(2, 2, 3, 0.05, 1);
  const json j = io::to_json(f);
  EXPECT_EQ(j["schema"], "freeharm/1");
  EXPECT_EQ(j["entries"][0]["word"], "");
  EXPECT_EQ(j["entries"].size(), 9u);
  EXPECT_EQ(io::pdfunction_from_json(json::parse(j.dump())), f);
}

TEST(Io, LoaderNamesOffendingWord) {
  auto expect_names = [](json j, const std::string& word) {
    try {
      io::pdfunction_from_json(j);
      ADD_FAILURE() << "accepted " << j.dump();
    } catch (const InputError& e) {
      EXPECT_NE(std::string(e.what()).find("'" + word + "'"), std::string::npos) << e.what();
    }
  };
  const json good = io::to_json(random_nspd(1, 1, 2, 0.1, 3));
  json missing = good;
  missing["entries"].erase(2);
  expect_names(missing, "b");
  json unnorm = good;
  unnorm["entries"][0]["m"] = json::array({json::array({json::array({2.0, 0.0})})});
  expect_names(unnorm, "e");
  json asym = good;
  asym["entries"].push_back({{"word", "A"}, {"m", json::array({json::array({json::array({0.9, 0.9})})})}});
  expect_names(asym, "A");
  json outside = good;
  outside["entries"].push_back({{"word", "ab"}, {"m", json::array({json::array({json::array({0.0, 0.0})})})}});
  expect_names(outside, "ab");
  json dup = good;
  dup["entries"].push_back(good["entries"][1]);
  expect_names(dup, "a");
  json bad_word = good;
  bad_word["entries"][1]["word"] = "aA";
  expect_names(bad_word, "aA");
  json shape = good;
  shape["entries"][1]["m"] = json::array({json::array({json::array({0.1, 0.0}), json::array({0.1, 0.0})})});
  EXPECT_THROW(io::pdfunction_from_json(shape), InputError);
  EXPECT_THROW(io::pdfunction_from_json(json::object()), InputError);
}

TEST(Io, InstanceRoundTripAndValidation) {
  const CommutingPairInstance inst = perturbed(2, 2, 4);
  const json j = io::to_json(inst);
  EXPECT_EQ(j["action"]["d"], 2);
  const CommutingPairInstance back = io::instance_from_json(json::parse(j.dump()));
  EXPECT_EQ(io::to_json(back).dump(), j.dump());
  json broken = j;
  broken["alpha"][0] = json::array({5.0, 0.0});
  EXPECT_THROW(io::instance_from_json(broken), InputError);
  json bad_perm = j;
  bad_perm["action"]["sigma_a"] = json::array({1, 1});
  EXPECT_THROW(io::instance_from_json(bad_perm), InputError);
}

TEST(Io, ActionFormat) {
  const FiniteQuotientAction a(Permutation({1, 2, 0}), Permutation({1, 0, 2}));
  const json j = io::to_json(a);
  EXPECT_EQ(j.dump(), R"({"d":3,"sigma_a":[2,3,1],"sigma_b":[2,1,3]})");
  const FiniteQuotientAction b = io::action_from_json(j);
  EXPECT_EQ(b.sigma_a(), a.sigma_a());
  EXPECT_EQ(b.sigma_b(), a.sigma_b());
}

TEST(Io, ReportsAndCsv) {
  const EnergyReport e = relative_energy(delta(2, 1), delta(2, 1), 1, {"x", "y"});
  const json ej = io::to_json(e);
  EXPECT_EQ(ej["pair"], json::array({"x", "y"}));
  EXPECT_EQ(ej["r_prime"], 1);
  EXPECT_DOUBLE_EQ(ej["energy"].get<double>(), 1.0);
  const GainReport g = energy_gain({delta(2, 1), delta(2, 1)}, 3);
  const std::string csv = io::gain_csv(g);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "m,k,before,after,gain");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  const json gj = io::to_json(g);
  EXPECT_EQ(gj["gain"].size(), 2u);
  EXPECT_TRUE(io::number(std::nan("")).is_null());
}
