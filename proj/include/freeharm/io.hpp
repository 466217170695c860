#pragma once

// JSON encodings for words, functions, instances and reports.

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "freeharm/extend.hpp"
#include "freeharm/halffinite.hpp"
#include "json.hpp"

namespace freeharm::io {

using nlohmann::json;

inline constexpr const char* kSchema = "freeharm/1";

inline std::string word_to_string(const Word& w) { return w.str(); }

/// "e" and "" both denote the identity; other strings must be reduced.
inline Word word_from_string(const std::string& s) {
  if (s.empty() || s == "e") return Word();
  return Word::parse_reduced(s);
}

/// A finite double, or null for NaN and infinities.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const json& j, const std::string& ctx) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw InputError(ctx + ": expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json matrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline CMatrix matrix_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw InputError(ctx + ": expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0) : 0;
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw InputError(ctx + ": ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = complex_from_json(row[static_cast<std::size_t>(k)], ctx);
  }
  return m;
}

inline json vector_to_json(const CVector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(complex_to_json(v(i)));
  return a;
}

inline CVector vector_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw InputError(ctx + ": expected a vector");
  CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = complex_from_json(j[i], ctx);
  return v;
}

inline json real_matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(number(m(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class T>
T field(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw InputError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(ctx + ": field '" + key + "' has the wrong type");
  }
}

// ---- PdFunction -------------------------------------------------------------

inline json to_json(const PdFunction& c) {
  json entries = json::array();
  for (const auto& [w, m] : c.representatives()) entries.push_back({{"word", word_to_string(w)}, {"m", matrix_to_json(m)}});
  return {{"schema", kSchema}, {"d", c.d()}, {"r", c.r()}, {"entries", std::move(entries)}};
}

/// Validates domain, normalization and adjoint symmetry; the message names the first offending word.
inline PdFunction pdfunction_from_json(const json& j) {
  const std::string ctx = "positive definite function";
  const auto d = field<std::size_t>(j, "d", ctx);
  const auto r = field<std::size_t>(j, "r", ctx);
  if (d == 0 || d > 64) throw InputError(ctx + ": d out of range");
  if (r > 8) throw InputError(ctx + ": r out of range");
  if (!j.contains("entries") || !j["entries"].is_array()) throw InputError(ctx + ": missing 'entries' array");
  std::map<Word, CMatrix> values;
  for (const json& e : j["entries"]) {
    const auto ws = field<std::string>(e, "word", ctx);
    Word w;
    try {
      w = word_from_string(ws);
    } catch (const InputError&) {
      throw InputError(ctx + ": word '" + ws + "' is not a reduced word over a, b, A, B");
    }
    if (!e.contains("m")) throw InputError(ctx + ": entry '" + ws + "' has no matrix");
    if (!values.emplace(w, matrix_from_json(e["m"], "entry '" + ws + "'")).second)
      throw InputError(ctx + ": word '" + ws + "' appears twice");
  }
  return PdFunction::from_representatives(d, r, values);
}

// ---- permutations and instances ---------------------------------------------

inline json permutation_to_json(const Permutation& p) {
  json a = json::array();
  for (int v : p.images()) a.push_back(v + 1);
  return a;
}

inline Permutation permutation_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw InputError(ctx + ": expected a list of 1-based images");
  std::vector<int> v;
  for (const json& x : j) {
    if (!x.is_number_integer()) throw InputError(ctx + ": images must be integers");
    v.push_back(x.get<int>() - 1);
  }
  return Permutation(std::move(v));
}

inline json to_json(const FiniteQuotientAction& a) {
  return {{"d", a.d()}, {"sigma_a", permutation_to_json(a.sigma_a())}, {"sigma_b", permutation_to_json(a.sigma_b())}};
}

inline FiniteQuotientAction action_from_json(const json& j) {
  const std::string ctx = "action";
  const auto d = field<std::size_t>(j, "d", ctx);
  FiniteQuotientAction a(permutation_from_json(j.value("sigma_a", json()), "sigma_a"),
                         permutation_from_json(j.value("sigma_b", json()), "sigma_b"));
  if (a.d() != d) throw InputError("action: permutation degree differs from d");
  return a;
}

inline json to_json(const CommutingPairInstance& inst) {
  return {{"schema", kSchema},
          {"kind", to_string(inst.kind)},
          {"N", inst.N},
          {"d", inst.d},
          {"m", inst.m},
          {"r", inst.r},
          {"eps", inst.eps},
          {"delta", inst.delta},
          {"action", to_json(inst.act)},
          {"rho_left_a", matrix_to_json(inst.rho_left_a)},
          {"rho_left_b", matrix_to_json(inst.rho_left_b)},
          {"rho_right_a", matrix_to_json(inst.rho_right_a)},
          {"rho_right_b", matrix_to_json(inst.rho_right_b)},
          {"kappa_a", matrix_to_json(inst.kappa_a)},
          {"kappa_b", matrix_to_json(inst.kappa_b)},
          {"frame", matrix_to_json(inst.frame)},
          {"x", vector_to_json(inst.x)},
          {"alpha", vector_to_json(inst.alpha)}};
}

inline CommutingPairInstance instance_from_json(const json& j) {
  const std::string ctx = "instance";
  CommutingPairInstance inst;
  const auto kind = field<std::string>(j, "kind", ctx);
  if (kind == "tensor_exact")
    inst.kind = InstanceKind::tensor_exact;
  else if (kind == "perturbed")
    inst.kind = InstanceKind::perturbed;
  else
    throw InputError(ctx + ": unknown kind '" + kind + "'");
  inst.N = field<std::size_t>(j, "N", ctx);
  inst.d = field<std::size_t>(j, "d", ctx);
  inst.m = field<std::size_t>(j, "m", ctx);
  inst.r = field<std::size_t>(j, "r", ctx);
  inst.eps = field<double>(j, "eps", ctx);
  inst.delta = field<double>(j, "delta", ctx);
  if (inst.d == 0 || inst.d > kMaxPermutedDegree) throw InputError(ctx + ": d must lie in [1, 5]");
  if (!(inst.eps > 0.0 && inst.eps < 1.0)) throw InputError(ctx + ": eps must lie in (0, 1)");
  if (!j.contains("action")) throw InputError(ctx + ": missing field 'action'");
  inst.act = action_from_json(j["action"]);
  auto mat = [&](const char* k) { return matrix_from_json(j.contains(k) ? j[k] : json(), std::string(ctx) + "." + k); };
  inst.rho_left_a = mat("rho_left_a");
  inst.rho_left_b = mat("rho_left_b");
  inst.rho_right_a = mat("rho_right_a");
  inst.rho_right_b = mat("rho_right_b");
  inst.kappa_a = mat("kappa_a");
  inst.kappa_b = mat("kappa_b");
  inst.frame = mat("frame");
  inst.x = vector_from_json(j.contains("x") ? j["x"] : json(), ctx + ".x");
  inst.alpha = vector_from_json(j.contains("alpha") ? j["alpha"] : json(), ctx + ".alpha");
  const InstanceAudit a = audit_instance(inst);
  if (!a.ok()) throw InputError(ctx + ": " + a.violations.front());
  return inst;
}

// ---- reports ----------------------------------------------------------------

inline json to_json(const PositivityVerdict& v) {
  return {{"status", to_string(v.status)},
          {"min_eigenvalue", v.min_eigenvalue},
          {"gram_radius", v.gram_radius},
          {"tolerance", v.tolerance}};
}

inline json to_json(const EnergyReport& e) {
  return {{"pair", json::array({e.pair.first, e.pair.second})},
          {"r_prime", e.r_prime},
          {"transport_norm", e.transport_norm},
          {"energy", e.energy}};
}

inline json to_json(const ExtensionResult& e) {
  return {{"method", to_string(e.method)},
          {"iterations", e.iterations},
          {"residual", number(e.residual)},
          {"min_eigenvalue", number(e.min_eigenvalue)},
          {"extended", to_json(e.extended)}};
}

inline json to_json(const GainReport& g) {
  json ext = json::array(), errors = json::array();
  for (std::size_t i = 0; i < g.extensions.size(); ++i) {
    ext.push_back({{"index", i},
                   {"iterations", g.extensions[i].iterations},
                   {"residual", number(g.extensions[i].residual)},
                   {"min_eigenvalue", number(g.extensions[i].min_eigenvalue)}});
    if (g.row_errors[i]) errors.push_back({{"row", i}, {"error", *g.row_errors[i]}});
  }
  return {{"r", g.r},
          {"R", g.R},
          {"method", to_string(g.method)},
          {"energies_before", real_matrix_to_json(g.energies_before)},
          {"energies_after", real_matrix_to_json(g.energies_after)},
          {"gain", real_matrix_to_json(g.gain)},
          {"extensions", std::move(ext)},
          {"row_errors", std::move(errors)}};
}

inline std::string csv_number(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// One row per ordered pair (m, k).
inline std::string gain_csv(const GainReport& g) {
  std::ostringstream os;
  os << "m,k,before,after,gain\n";
  for (Eigen::Index m = 0; m < g.gain.rows(); ++m)
    for (Eigen::Index k = 0; k < g.gain.cols(); ++k)
      os << m << ',' << k << ',' << csv_number(g.energies_before(m, k)) << ',' << csv_number(g.energies_after(m, k))
         << ',' << csv_number(g.gain(m, k)) << '\n';
  return os.str();
}

inline json to_json(const MatrixElement& e) {
  return {{"g", word_to_string(e.g)},
          {"g_prime", word_to_string(e.gp)},
          {"value", complex_to_json(e.value)},
          {"reference", complex_to_json(e.reference)},
          {"error", e.error}};
}

inline json to_json(const BoundCheck& c) {
  return {{"name", c.name}, {"value", number(c.value)}, {"budget", number(c.budget)}, {"asserted", c.asserted},
          {"holds", c.holds()}};
}

inline json to_json(const GroupRingReport& g) {
  return {{"rho_norm2", g.rho_norm2},   {"rho_norm2_expansion", g.rho_norm2_expansion},
          {"zeta_norm2", g.zeta_norm2}, {"eps_pair", g.eps_pair},
          {"coefficient_l1", g.coefficient_l1}, {"difference", g.difference},
          {"budget", g.budget},         {"holds", g.holds()}};
}

inline json to_json(const PipelineReport& p) {
  json checks = json::array(), elements = json::array(), notes = json::array();
  for (const auto& c : p.checks) checks.push_back(to_json(c));
  for (const auto& e : p.elements) elements.push_back(to_json(e));
  for (const auto& n : p.notes) notes.push_back(n);
  json out = {{"L", p.L},
              {"K", p.K},
              {"delta", p.delta},
              {"q_spectrum", json::array({p.q_spectrum.lo, p.q_spectrum.hi})},
              {"repair_budget", p.numerical_budget},
              {"repair_budget_condition", p.numerical_condition},
              {"checks", std::move(checks)},
              {"max_element_error", p.max_element_error},
              {"matrix_elements", std::move(elements)},
              {"notes", std::move(notes)}};
  out["max_commutation_gap"] = p.max_commutation_gap ? json(*p.max_commutation_gap) : json(nullptr);
  return out;
}

// ---- files ------------------------------------------------------------------

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
}

}  // namespace freeharm::io
