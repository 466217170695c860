// freeharm: batch front end for instance generation, certification,
// extension, energy gain and the half-finite pipeline.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "freeharm/freeharm.hpp"
#include "freeharm/io.hpp"

namespace {

using freeharm::io::json;
namespace fh = freeharm;

enum Exit { kOk = 0, kInvariant = 1, kInput = 2, kNonConvergence = 3 };

struct RunConfig {
  std::string command;
  std::string kind;
  std::uint64_t seed = 1;
  std::optional<std::size_t> r, R, d, N, m;
  std::optional<double> eps, delta, tol;
  std::string method = "projection";
  std::string quadrature = "eigen";
  std::vector<std::string> inputs;
  std::string out;
  std::size_t workers = 1;
  std::optional<std::size_t> max_iter;
};

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json config_json(const RunConfig& c) {
  return {{"command", c.command}, {"kind", c.kind},       {"seed", c.seed},       {"r", opt(c.r)},
          {"R", opt(c.R)},        {"d", opt(c.d)},          {"N", opt(c.N)},        {"m", opt(c.m)},
          {"eps", opt(c.eps)},    {"delta", opt(c.delta)},  {"tol", opt(c.tol)},    {"method", c.method},
          {"quadrature", c.quadrature}, {"in", c.inputs},   {"out", c.out},         {"workers", c.workers},
          {"max_iter", opt(c.max_iter)}};
}

class Timer {
 public:
  void phase(const std::string& name) {
    stop();
    current_ = name;
    start_ = std::chrono::steady_clock::now();
  }
  json finish() {
    stop();
    json j = json::object();
    for (const auto& [k, v] : seconds_) j[k] = v;
    return j;
  }

 private:
  void stop() {
    if (current_.empty()) return;
    seconds_[current_] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    current_.clear();
  }
  std::string current_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, double> seconds_;
};

json envelope(const RunConfig& c) {
  return {{"schema", fh::io::kSchema}, {"tool", "freeharm"}, {"version", FREEHARM_VERSION},
          {"command", c.command}, {"config", config_json(c)}};
}

void emit(const RunConfig& c, const std::string& text) {
  if (c.out.empty())
    std::cout << text;
  else
    fh::io::write_text_file(c.out, text);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <class T>
T require(const std::optional<T>& v, const char* flag) {
  if (!v) throw fh::InputError(std::string("missing required flag ") + flag);
  return *v;
}

void check_range(std::size_t v, std::size_t lo, std::size_t hi, const char* flag) {
  if (v < lo || v > hi)
    throw fh::InputError(std::string(flag) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

void check_open_unit(double v, const char* flag) {
  if (!(v > 0.0 && v < 1.0)) throw fh::InputError(std::string(flag) + " must lie in (0, 1)");
}

fh::PdFunction load_function(const std::string& path) { return fh::io::pdfunction_from_json(fh::io::read_json_file(path)); }

const std::string& single_input(const RunConfig& c) {
  if (c.inputs.size() != 1) throw fh::InputError("expected exactly one --in file");
  return c.inputs.front();
}

fh::ExtendParams extend_params(const RunConfig& c) {
  fh::ExtendParams p;
  p.method = fh::parse_method(c.method);
  if (c.tol) {
    if (!(*c.tol > 0.0)) throw fh::InputError("--tol must be positive");
    p.tol = *c.tol;
  }
  if (c.max_iter) p.max_iter = *c.max_iter;
  return p;
}

// ---- commands ---------------------------------------------------------------

int cmd_gen(const RunConfig& c) {
  const std::size_t r = c.r.value_or(2), d = c.d.value_or(2);
  json out;
  if (c.kind == "nspd" || c.kind == "delta") {
    check_range(r, 0, 6, "--r");
    check_range(d, 1, 16, "--d");
    if (c.kind == "delta") {
      out = fh::io::to_json(fh::delta(r, d));
    } else {
      const std::size_t n = c.N.value_or(std::max<std::size_t>(2 * d, 2));
      if (n < d || n > 256) throw fh::InputError("--N must lie in [d, 256]");
      const double eps = c.eps.value_or(0.05);
      check_open_unit(eps, "--eps");
      const fh::PdFunction f = fh::random_nspd(r, d, n, eps, c.seed);
      const fh::PositivityVerdict v = fh::is_positive_definite(f);
      if (v.status != fh::PositivityStatus::strict) throw fh::GeneratorError("generated function is not strict");
      out = fh::io::to_json(f);
    }
  } else if (c.kind == "tensor" || c.kind == "perturbed") {
    const std::size_t m = c.m.value_or(2);
    check_range(d, 1, fh::kMaxPermutedDegree, "--d");
    check_range(m, 1, 64, "--m");
    check_range(r, 0, 6, "--r");
    const double eps = c.eps.value_or(0.05);
    check_open_unit(eps, "--eps");
    const double delta = c.kind == "perturbed" ? c.delta.value_or(1e-3) : 0.0;
    if (c.kind == "perturbed" && !(delta > 0.0 && delta < 1.0)) throw fh::InputError("--delta must lie in (0, 1)");
    const auto kind = c.kind == "tensor" ? fh::InstanceKind::tensor_exact : fh::InstanceKind::perturbed;
    out = fh::io::to_json(fh::make_instance(kind, c.N.value_or(0), d, m, delta, c.seed, r, eps));
  } else {
    throw fh::InputError("--kind must be one of nspd, delta, tensor, perturbed");
  }
  emit(c, out.dump(1) + "\n");
  spdlog::info("gen {}: wrote {}", c.kind, c.out.empty() ? "stdout" : c.out);
  return kOk;
}

int cmd_check(const RunConfig& c) {
  Timer t;
  t.phase("load");
  const fh::PdFunction f = load_function(single_input(c));
  t.phase("verdict");
  const fh::PositivityVerdict v = fh::is_positive_definite(f, c.tol);
  json rep = envelope(c);
  rep["result"] = fh::io::to_json(v);
  rep["failures"] = json::array();
  if (v.status == fh::PositivityStatus::indefinite) rep["failures"].push_back("indefinite");
  rep["timings"] = t.finish();
  emit(c, rep.dump(1) + "\n");
  return v.status == fh::PositivityStatus::indefinite ? kInvariant : kOk;
}

int cmd_energy(const RunConfig& c) {
  if (c.inputs.size() != 2) throw fh::InputError("energy needs two --in files");
  Timer t;
  t.phase("load");
  const fh::PdFunction a = load_function(c.inputs[0]), b = load_function(c.inputs[1]);
  const std::size_t rp = c.r.value_or(std::min(a.r(), b.r()) / 2);
  t.phase("energy");
  const fh::EnergyReport e = fh::relative_energy(a, b, rp, {c.inputs[0], c.inputs[1]});
  json rep = envelope(c);
  rep["result"] = fh::io::to_json(e);
  rep["failures"] = json::array();
  rep["timings"] = t.finish();
  emit(c, rep.dump(1) + "\n");
  return kOk;
}

json certify(const fh::PdFunction& input, const fh::ExtensionResult& res, json& failures) {
  const fh::PositivityVerdict v = fh::is_positive_definite(res.extended, 1e-6);
  const bool exact = res.extended.restrict_to(input.r()) == input;
  if (!v.at_least_semidefinite()) failures.push_back("extension_not_semidefinite");
  if (!exact) failures.push_back("restriction_changed");
  return {{"verdict", fh::io::to_json(v)}, {"restriction_exact", exact}};
}

int cmd_extend(const RunConfig& c) {
  Timer t;
  t.phase("load");
  const fh::PdFunction f = load_function(single_input(c));
  const std::size_t R = require(c.R, "--R");
  check_range(R, f.r() + 1, 8, "--R");
  const fh::ExtendParams p = extend_params(c);
  json rep = envelope(c);
  rep["failures"] = json::array();
  int code = kOk;
  t.phase("extend");
  try {
    const fh::ExtensionResult res = fh::extend_radial(f, R, p);
    t.phase("certify");
    rep["certification"] = certify(f, res, rep["failures"]);
    rep["status"] = "ok";
    rep["result"] = fh::io::to_json(res);
  } catch (const fh::NonConvergenceError& e) {
    spdlog::warn("{}", e.what());
    rep["status"] = "infeasible-numerically";
    rep["result"] = fh::io::to_json(e.result());
    rep["failures"].push_back("non_convergence");
    code = kNonConvergence;
  }
  if (code == kOk && !rep["failures"].empty()) code = kInvariant;
  rep["timings"] = t.finish();
  emit(c, rep.dump(1) + "\n");
  return code;
}

int cmd_gain(const RunConfig& c) {
  if (c.inputs.empty()) throw fh::InputError("gain needs at least one --in file");
  Timer t;
  t.phase("load");
  std::vector<fh::PdFunction> fs;
  for (const auto& path : c.inputs) fs.push_back(load_function(path));
  const std::size_t R = require(c.R, "--R");
  check_range(R, fs.front().r() + 1, 8, "--R");
  check_range(c.workers, 1, 256, "--workers");
  const fh::ExtendParams p = extend_params(c);
  t.phase("gain");
  const fh::GainReport g = fh::energy_gain(fs, R, p, c.workers);
  json rep = envelope(c);
  rep["result"] = fh::io::to_json(g);
  json failures = json::array();
  bool floor_ok = true, diag_ok = true;
  for (Eigen::Index i = 0; i < g.gain.rows(); ++i) {
    for (Eigen::Index k = 0; k < g.gain.cols(); ++k)
      if (std::isfinite(g.gain(i, k)) && g.gain(i, k) < -1e-8) floor_ok = false;
    for (const Eigen::MatrixXd* m : {&g.energies_before, &g.energies_after})
      if (std::isfinite((*m)(i, i)) && std::abs((*m)(i, i) - 1.0) > 1e-10) diag_ok = false;
  }
  if (!floor_ok) failures.push_back("gain_floor");
  if (!diag_ok) failures.push_back("energy_diagonal");
  for (std::size_t i = 0; i < g.row_errors.size(); ++i)
    if (g.row_errors[i]) failures.push_back("row_error:" + std::to_string(i));
  rep["failures"] = failures;
  rep["timings"] = t.finish();
  if (ends_with(c.out, ".csv")) {
    fh::io::write_text_file(c.out, fh::io::gain_csv(g));
    std::cout << rep.dump(1) << "\n";
  } else {
    emit(c, rep.dump(1) + "\n");
  }
  if (g.non_convergence) return kNonConvergence;
  return failures.empty() ? kOk : kInvariant;
}

int cmd_pipeline(const RunConfig& c) {
  Timer t;
  const std::size_t r_work = c.r.value_or(1);
  check_range(r_work, 1, 3, "--r");
  t.phase("instance");
  fh::CommutingPairInstance inst;
  if (!c.inputs.empty()) {
    inst = fh::io::instance_from_json(fh::io::read_json_file(single_input(c)));
  } else {
    const std::size_t d = c.d.value_or(3), m = c.m.value_or(2);
    check_range(d, 1, fh::kMaxPermutedDegree, "--d");
    check_range(m, 1, 64, "--m");
    const double eps = c.eps.value_or(0.05);
    check_open_unit(eps, "--eps");
    const std::string kind = c.kind.empty() ? "tensor" : c.kind;
    if (kind != "tensor" && kind != "perturbed") throw fh::InputError("pipeline --kind must be tensor or perturbed");
    const double delta = kind == "perturbed" ? c.delta.value_or(1e-3) : 0.0;
    inst = fh::make_instance(kind == "tensor" ? fh::InstanceKind::tensor_exact : fh::InstanceKind::perturbed,
                             c.N.value_or(0), d, m, delta, c.seed, 2 * r_work, eps);
  }
  fh::PipelineOptions opts;
  opts.r_work = r_work;
  opts.sqrt_method = fh::parse_sqrt_method(c.quadrature);
  opts.audit_seed = c.seed;
  t.phase("build");
  const fh::PipelineState st = fh::build_pipeline(inst, opts);
  t.phase("diagnostics");
  const fh::PipelineReport pr = fh::pipeline_diagnostics(st, inst, opts.contour, c.seed);
  json rep = envelope(c);
  rep["result"] = fh::io::to_json(pr);
  json failures = json::array();
  for (const auto& f : pr.failures()) failures.push_back(f);

  t.phase("group_ring");
  json rings = json::array();
  const std::size_t r_half = r_work / 2;
  if (r_half >= 1) {
    fh::Rng rng(c.seed);
    const fh::Ball& support = fh::shared_ball(r_half);
    std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
    std::normal_distribution<double> coef(0.0, 1.0);
    for (int i = 0; i < 10; ++i) {
      std::vector<fh::GroupRingTerm> phi;
      for (int k = 0; k < 4; ++k) phi.push_back({support[pick(rng)], support[pick(rng)], {coef(rng), coef(rng)}});
      const fh::GroupRingReport g = fh::group_ring_check(st, inst, phi);
      if (!g.holds()) failures.push_back("group_ring:" + std::to_string(i));
      rings.push_back(fh::io::to_json(g));
    }
  }
  rep["group_ring"] = rings;
  rep["failures"] = failures;
  rep["timings"] = t.finish();
  emit(c, rep.dump(1) + "\n");
  return failures.empty() ? kOk : kInvariant;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("freeharm");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("FREEHARM_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  RunConfig cfg;
  CLI::App app{"freeharm: positive definite functions on free groups and half-finite approximation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FREEHARM_VERSION);

  auto add_common = [&](CLI::App* s, bool inputs) {
    s->add_option("--seed", cfg.seed, "random seed");
    s->add_option("--out", cfg.out, "output file (stdout when omitted)");
    if (inputs) s->add_option("--in", cfg.inputs, "input file(s)")->take_all();
  };
  auto* gen = app.add_subcommand("gen", "generate a function or a commuting-pair instance");
  gen->add_option("--kind", cfg.kind, "nspd | delta | tensor | perturbed")->required();
  gen->add_option("--r", cfg.r, "domain radius (instances: nominal radius)");
  gen->add_option("--d", cfg.d, "matrix size / frame size");
  gen->add_option("--N", cfg.N, "ambient dimension");
  gen->add_option("--m", cfg.m, "tensor factor dimension");
  gen->add_option("--eps", cfg.eps, "mixing weight");
  gen->add_option("--delta", cfg.delta, "target perturbation for --kind perturbed");
  add_common(gen, false);

  auto* check = app.add_subcommand("check", "positivity verdict for a function file");
  check->add_option("--tol", cfg.tol, "verdict tolerance");
  add_common(check, true);

  auto* energy = app.add_subcommand("energy", "relative energy between two function files");
  energy->add_option("--r", cfg.r, "Gram radius r'");
  add_common(energy, true);

  auto* extend = app.add_subcommand("extend", "extend a function to a larger ball");
  extend->add_option("--R", cfg.R, "target radius")->required();
  extend->add_option("--method", cfg.method, "projection | central");
  extend->add_option("--tol", cfg.tol, "convergence tolerance");
  extend->add_option("--max-iter", cfg.max_iter, "iteration cap for the projection method");
  add_common(extend, true);

  auto* gain = app.add_subcommand("gain", "pairwise energy gain under extension");
  gain->add_option("--R", cfg.R, "target radius")->required();
  gain->add_option("--method", cfg.method, "projection | central");
  gain->add_option("--tol", cfg.tol, "convergence tolerance");
  gain->add_option("--max-iter", cfg.max_iter, "iteration cap for the projection method");
  gain->add_option("--workers", cfg.workers, "concurrent extensions");
  add_common(gain, true);

  auto* pipeline = app.add_subcommand("pipeline", "half-finite approximation pipeline");
  pipeline->add_option("--kind", cfg.kind, "tensor | perturbed (when no --in is given)");
  pipeline->add_option("--r", cfg.r, "working radius");
  pipeline->add_option("--d", cfg.d, "frame size");
  pipeline->add_option("--N", cfg.N, "ambient dimension");
  pipeline->add_option("--m", cfg.m, "tensor factor dimension");
  pipeline->add_option("--eps", cfg.eps, "mixing weight");
  pipeline->add_option("--delta", cfg.delta, "target perturbation");
  pipeline->add_option("--quadrature", cfg.quadrature, "eigen | contour square root of q");
  add_common(pipeline, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  try {
    if (gen->parsed()) return (cfg.command = "gen", cmd_gen(cfg));
    if (check->parsed()) return (cfg.command = "check", cmd_check(cfg));
    if (energy->parsed()) return (cfg.command = "energy", cmd_energy(cfg));
    if (extend->parsed()) return (cfg.command = "extend", cmd_extend(cfg));
    if (gain->parsed()) return (cfg.command = "gain", cmd_gain(cfg));
    if (pipeline->parsed()) return (cfg.command = "pipeline", cmd_pipeline(cfg));
  } catch (const fh::InputError& e) {
    spdlog::error("{}", e.what());
    return kInput;
  } catch (const fh::DomainError& e) {
    spdlog::error("{}", e.what());
    return kInput;
  } catch (const fh::NonConvergenceError& e) {
    spdlog::error("{}", e.what());
    return kNonConvergence;
  } catch (const fh::Error& e) {
    spdlog::error("{}", e.what());
    return kInvariant;
  }
  return kInput;
}
