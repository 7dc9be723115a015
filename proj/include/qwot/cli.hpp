#pragma once

// qwot command-line driver. run_cli is the whole program; tools/qwot.cpp only
// forwards argv.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qwot/classical_lp.hpp"
#include "qwot/cones.hpp"
#include "qwot/cost.hpp"
#include "qwot/io.hpp"
#include "qwot/quantum.hpp"
#include "qwot/solver.hpp"
#include "qwot/wasserstein.hpp"

namespace qwot {

enum ExitCode : int { kExitOk = 0, kExitVerdictFail = 1, kExitInput = 2, kExitNotConverged = 3 };

//----------------------------------------------------------------------------
// Counterexample data (3-decimal reference values)
//----------------------------------------------------------------------------

inline constexpr double kCounterexampleP = 2.35;
inline constexpr double kCounterexampleBracket = -0.572;
inline constexpr double kCounterexampleSlack = 0.015;
inline constexpr double kCounterexampleGap = 1e-6;
inline constexpr double kCounterexampleTol = 1e-8;

inline ComplexMatrix counterexample_rho() {
  using c = cplx;
  return ComplexMatrix{{0.317, c(-0.219, -0.299), c(0.177, -0.028)},
                       {c(-0.219, 0.299), 0.507, c(-0.049, 0.241)},
                       {c(0.177, 0.028), c(-0.049, -0.241), 0.176}};
}

inline ComplexMatrix counterexample_omega() {
  using c = cplx;
  return ComplexMatrix{{0.415, c(0.112, 0.081), c(0.365, 0.105)},
                       {c(0.112, -0.081), 0.153, c(0.164, -0.102)},
                       {c(0.365, -0.105), c(0.164, 0.102), 0.432}};
}

inline ComplexMatrix counterexample_observable() {
  using c = cplx;
  return ComplexMatrix{{-2.991, c(-0.119, 1.802), c(1.033, -3.505)},
                       {c(-0.119, -1.802), -2.806, c(1.300, 3.082)},
                       {c(1.033, 3.505), c(1.300, -3.082), -0.370}};
}

// Problem-file form of the counterexample, as shipped in tests/fixtures.
inline json counterexample_document() {
  return {{"schema", kSchemaVersion},
          {"dim", 3},
          {"rounded", true},
          {"p", kCounterexampleP},
          {"states", {{"rho", matrix_to_json(counterexample_rho())},
                      {"omega", matrix_to_json(counterexample_omega())}}},
          {"observables", json::array({{{"name", "A0"}, {"matrix", matrix_to_json(counterexample_observable())}}})}};
}

//----------------------------------------------------------------------------
// Triangle-inequality failure on qubits
//----------------------------------------------------------------------------

struct PauliFailureInstance {
  ObservableCollection observables;
  State rho;    // Bloch angle -theta/2 in the x-z plane
  State tau;    // angle 0
  State omega;  // angle theta/2
  double theta = 0.0;
  double predicted_violation = 0.0;
};

// Pauli matrices moved from exponent 2 to p, so C_{A,p} = C_{Pauli,2}, and
// three pure states on a short arc. The quadratic divergence of pure qubits
// is the chord length, whose square is not subadditive along the arc.
inline PauliFailureInstance pauli_failure_instance(double p, double epsilon = 0.05) {
  if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("pauli_failure_instance: p must be > 0");
  if (!(epsilon > 0.0) || !(epsilon < 4.0)) throw DomainError("pauli_failure_instance: epsilon must be in (0, 4)");
  std::vector<HermitianOperator> obs;
  for (const auto& s : {pauli_x(), pauli_y(), pauli_z()}) obs.push_back(two_level_transport(s, 2.0, p));
  const double c = 1.0 - epsilon / 4.0;
  const double theta = 4.0 * std::acos(c);
  auto at = [](double a) { return qubit_state(std::sin(a), 0.0, std::cos(a)); };
  const double e = std::min(1.0 / p, 1.0);
  const double far = 4.0 * std::pow(std::sin(theta / 2.0), 2);
  const double near = 4.0 * std::pow(std::sin(theta / 4.0), 2);
  return {ObservableCollection(std::move(obs)), at(-theta / 2.0), at(0.0), at(theta / 2.0), theta,
          std::pow(far, e) - 2.0 * std::pow(near, e)};
}

//----------------------------------------------------------------------------
// Triangle scans
//----------------------------------------------------------------------------

enum class PureSlot { Left, Mid, Right, None };

struct ScanSample {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::vector<State> states;  // rho, tau, omega
  ObservableCollection observables;
  bool solved = false;
  bool defined = false;
  bool health_ok = true;
  double violation = 0.0;
  std::string failure;
};

// Seeded triple: K uniform in {1,2,3}, Gaussian Hermitian observables with
// unit operator norm, full-rank states except the pure slot.
inline ScanSample scan_instance(std::size_t dim, std::uint64_t seed, std::size_t index, PureSlot slot) {
  ScanSample s;
  s.index = index;
  s.seed = seed ^ static_cast<std::uint64_t>(index);
  std::mt19937_64 rng(s.seed);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
  std::vector<HermitianOperator> obs;
  for (std::size_t i = 0; i < k; ++i) {
    const auto a = random_observable(dim, rng());
    const double n = operator_norm(a);
    obs.push_back(n > 0.0 ? (1.0 / n) * a : a);
  }
  s.observables = ObservableCollection(std::move(obs));
  const int pure = slot == PureSlot::Left ? 0 : slot == PureSlot::Mid ? 1 : slot == PureSlot::Right ? 2 : -1;
  for (int i = 0; i < 3; ++i) {
    s.states.push_back(i == pure ? random_pure_state(dim, rng()) : random_state(dim, dim, rng()));
  }
  return s;
}

inline void run_scan_sample(ScanSample& s, double p, const SolveOptions& opts) {
  try {
    const auto t = triangle_check(s.states[0], s.states[1], s.states[2], s.observables, p, opts);
    s.solved = true;
    s.defined = t.defined();
    s.violation = t.violation();
    s.health_ok = t.rho_omega.health_ok() && t.rho_tau.health_ok() && t.tau_omega.health_ok();
  } catch (const NotConverged& e) {
    s.failure = std::string("not converged: ") + e.what();
  } catch (const Error& e) {
    s.failure = e.what();
  }
}

// Work-stealing over sample indices; results land at their index so the
// reduction order never depends on scheduling.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) body(i);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

//----------------------------------------------------------------------------
// JSON helpers
//----------------------------------------------------------------------------

inline json states_json(const std::vector<State>& states) {
  json j = json::array();
  for (const auto& s : states) j.push_back(matrix_to_json(s.matrix()));
  return j;
}

inline json observables_json(const ObservableCollection& a) {
  json j = json::array();
  for (const auto& obs : a) j.push_back(matrix_to_json(obs.matrix()));
  return j;
}

inline json divergence_json(const DivergenceReport& r) {
  json j = {{"p", r.p},
            {"distance_pow", r.distance_pow},
            {"self_rho_pow", r.self_rho_pow},
            {"self_omega_pow", r.self_omega_pow},
            {"divergence_pow", r.divergence_pow},
            {"divergence", r.divergence ? json(*r.divergence) : json(nullptr)},
            {"defined", r.defined()},
            {"clamped", r.clamped},
            {"health_ok", r.health_ok()},
            {"cross", transport_json(r.cross)},
            {"self_rho", transport_json(r.self_rho.solver)},
            {"self_omega", transport_json(r.self_omega.solver)}};
  auto closed = [](const SelfCost& s) {
    return s.closed_form ? json{{"value", *s.closed_form}, {"discrepancy", s.discrepancy}} : json(nullptr);
  };
  j["self_rho_closed_form"] = closed(r.self_rho);
  j["self_omega_closed_form"] = closed(r.self_omega);
  return j;
}

// Coefficients of B on the spectral projections of A.
inline json spectral_values(const HermitianOperator& b, const EigenDecomposition& eig) {
  json vals = json::array();
  for (std::size_t g = 0; g < eig.multiplicity_groups.size(); ++g) {
    const auto pr = eig.group_projector(g);
    vals.push_back(trace_of_product(pr, b.matrix()).real() / pr.trace().real());
  }
  return vals;
}

inline json decomposition_json(const ConeDecomposition& d) {
  const auto eig = eigh(d.observable);
  json w = json::array();
  for (const auto& x : d.witnesses) {
    w.push_back({{"p_source", x.p_source}, {"spectral_values", spectral_values(x.b, eig)}});
  }
  return {{"p_target", d.p_target},
          {"observable_eigenvalues", eig.distinct_eigenvalues()},
          {"eigenbasis", matrix_to_json(eig.eigenvectors)},
          {"witnesses", w},
          {"parameters", d.parameters},
          {"residual", d.residual},
          {"commutator", d.commutator},
          {"tolerance", d.tolerance()},
          {"ok", d.ok()}};
}

//----------------------------------------------------------------------------
// Driver
//----------------------------------------------------------------------------

namespace detail {

struct Invocation {
  std::string name;
  json options = json::object();
  json input = nullptr;
  json results = json::object();
  json residuals = json::object();
  bool converged = true;
  int code = kExitOk;
};

inline SolverMethod parse_method(const std::string& m) {
  if (m == "ipm") return SolverMethod::InteriorPoint;
  if (m == "admm") return SolverMethod::Admm;
  throw InputError("--method: expected ipm or admm");
}

inline double require_p(std::optional<double> flag, const ProblemFile& pf) {
  if (flag) return *flag;
  if (pf.p) return *pf.p;
  throw InputError("p: give --p or set \"p\" in the problem file");
}

inline json render(const Invocation& inv, std::optional<double> wall) {
  json report = {{"schema", kSchemaVersion},
                 {"version", kVersion},
                 {"command", {{"name", inv.name}, {"options", inv.options}}},
                 {"inputs_digest", digest({{"command", inv.name}, {"options", inv.options}, {"input", inv.input}})},
                 {"results", inv.results},
                 {"residuals", inv.residuals},
                 {"converged", inv.converged},
                 {"exit_code", inv.code}};
  if (wall) report["wall_time_s"] = *wall;
  return report;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantum Wasserstein distances, divergences and cost-operator cones", "qwot"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string out_path;
  bool timing = false;
  double tol = kDefaultSolverTol;
  int max_iters = kDefaultMaxIters;
  std::string method = "ipm";
  auto common = [&](CLI::App* sub, bool solver) {
    sub->add_option("--out", out_path, "Write the JSON report here instead of stdout");
    sub->add_flag("--timing", timing, "Include wall time in the report");
    if (solver) {
      sub->add_option("--tol", tol, "Solver tolerance")->check(CLI::PositiveNumber);
      sub->add_option("--max-iters", max_iters, "Solver iteration cap")->check(CLI::PositiveNumber);
      sub->add_option("--method", method, "ipm or admm")->check(CLI::IsMember({"ipm", "admm"}));
    }
  };

  std::string file;
  std::optional<double> p_flag;
  std::string rho_name = "rho";
  std::string omega_name = "omega";
  bool with_plan = false;

  auto* dist = app.add_subcommand("distance", "Optimal transport cost and distance");
  dist->add_option("file", file, "Problem file")->required();
  dist->add_option("--p", p_flag, "Exponent");
  dist->add_option("--rho", rho_name, "State name for rho");
  dist->add_option("--omega", omega_name, "State name for omega");
  dist->add_flag("--plan", with_plan, "Include the optimal plan");
  common(dist, true);

  auto* div = app.add_subcommand("divergence", "Wasserstein divergence");
  div->add_option("file", file, "Problem file")->required();
  div->add_option("--p", p_flag, "Exponent");
  div->add_option("--rho", rho_name, "State name for rho");
  div->add_option("--omega", omega_name, "State name for omega");
  common(div, true);

  auto* ver = app.add_subcommand("verify-counterexample", "Negative divergence bracket on the built-in qutrit data");
  ver->add_option("--p", p_flag, "Exponent (default 2.35)");
  common(ver, true);

  std::size_t dim = 2;
  std::size_t samples = 100;
  std::uint64_t seed = 1;
  std::string slot = "none";
  std::string family = "random";
  std::size_t threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  double epsilon = 0.05;
  double threshold = 1e-5;
  auto* scan = app.add_subcommand("triangle-scan", "Seeded search for triangle-inequality violations");
  scan->add_option("--dim", dim, "Hilbert space dimension")->check(CLI::PositiveNumber);
  scan->add_option("--p", p_flag, "Exponent (default 2, or 1 for pauli-failure)");
  scan->add_option("--samples", samples, "Number of triples");
  scan->add_option("--seed", seed, "Base seed");
  scan->add_option("--pure-slot", slot, "left, mid, right or none")->check(CLI::IsMember({"left", "mid", "right", "none"}));
  scan->add_option("--family", family, "random or pauli-failure")->check(CLI::IsMember({"random", "pauli-failure"}));
  scan->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  scan->add_option("--epsilon", epsilon, "Arc parameter of the pauli-failure triple");
  scan->add_option("--threshold", threshold, "Violations above this are reported as found");
  common(scan, true);

  std::optional<double> p_target_flag;
  std::string dmethod = "cut";
  std::size_t obs_index = 0;
  std::size_t levels = 4;
  std::optional<double> p_tilde;
  auto* dec = app.add_subcommand("decompose", "Cost-operator cone decompositions");
  dec->add_option("file", file, "Problem file with the observable (not needed for strict-gap)");
  dec->add_option("--p", p_flag, "Source exponent");
  dec->add_option("--p-target", p_target_flag, "Target exponent");
  dec->add_option("--method", dmethod, "cut, two-level, three-level, reduce, strict-gap or search")
      ->check(CLI::IsMember({"cut", "two-level", "three-level", "reduce", "strict-gap", "search"}));
  dec->add_option("--observable", obs_index, "Index into the file's observables");
  dec->add_option("--levels", levels, "Spectrum size for search");
  dec->add_option("--samples", samples, "Spectra for search");
  dec->add_option("--seed", seed, "Seed for search");
  dec->add_option("--p-tilde", p_tilde, "Auxiliary exponent for strict-gap");
  common(dec, false);

  auto* cmp = app.add_subcommand("classical-compare", "Quantum optimum against the classical LP on commuting data");
  cmp->add_option("file", file, "Problem file")->required();
  cmp->add_option("--p", p_flag, "Exponent");
  cmp->add_option("--rho", rho_name, "State name for rho");
  cmp->add_option("--omega", omega_name, "State name for omega");
  common(cmp, true);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "qwot: " << e.what() << "\n";
    return kExitInput;
  }

  const auto t0 = std::chrono::steady_clock::now();
  detail::Invocation inv;
  auto solver_options = [&] {
    inv.options["tol"] = tol;
    inv.options["max_iters"] = max_iters;
    inv.options["method"] = method;
    return SolveOptions{tol, max_iters, detail::parse_method(method)};
  };

  try {
    if (*dist || *div || *cmp) {
      const auto pf = load_problem(file);
      inv.input = pf.source;
      if (!dist->count("--tol") && !div->count("--tol") && !cmp->count("--tol")) tol = pf.tol;
      if (!dist->count("--max-iters") && !div->count("--max-iters") && !cmp->count("--max-iters")) max_iters = pf.max_iters;
      const double p = detail::require_p(p_flag, pf);
      const auto opts = solver_options();
      inv.options["p"] = p;
      inv.options["rho"] = rho_name;
      inv.options["omega"] = omega_name;
      const auto& rho = pf.state(rho_name);
      const auto& omega = pf.state(omega_name);
      const auto a = pf.collection();

      if (*dist) {
        inv.name = "distance";
        inv.options["plan"] = with_plan;
        TransportResult r;
        try {
          r = optimal_transport(rho, omega, a, p, opts);
        } catch (const NotConverged& e) {
          r = e.best();
          inv.code = kExitNotConverged;
          err << "qwot: " << e.what() << "\n";
        }
        inv.converged = r.converged;
        inv.results = {{"value", r.value},
                       {"exponent", std::min(1.0, 1.0 / p)},
                       {"distance", std::pow(std::max(0.0, r.value), std::min(1.0, 1.0 / p))},
                       {"dual_value", r.dual_value},
                       {"iterations", r.iterations}};
        if (with_plan) inv.results["plan"] = matrix_to_json(r.plan.matrix());
        inv.residuals = {{"gap", r.gap}, {"primal", r.primal_residual}, {"dual", r.dual_residual}};
      } else if (*div) {
        inv.name = "divergence";
        const auto r = divergence(rho, omega, a, p, opts);
        inv.results = divergence_json(r);
        inv.converged = r.converged();
        inv.residuals = {{"gap_cross", r.cross.gap},
                         {"gap_self_rho", r.self_rho.solver.gap},
                         {"gap_self_omega", r.self_omega.solver.gap}};
        if (!r.health_ok()) {
          err << "qwot: self-distance closed form and solver disagree by more than " << kSelfHealthTol << "\n";
          inv.code = kExitVerdictFail;
        }
      } else {
        inv.name = "classical-compare";
        std::vector<HermitianOperator> all(a.observables());
        all.push_back(rho.op());
        all.push_back(omega.op());
        JointEigenbasis jb;
        try {
          jb = joint_eigenbasis(ObservableCollection(std::move(all)));
        } catch (const UnsupportedStructure&) {
          throw InputError("states and observables are not simultaneously diagonalizable");
        }
        const std::size_t k = a.size();
        DiscreteDistribution mu;
        DiscreteDistribution nu;
        for (std::size_t i = 0; i < pf.dim; ++i) {
          std::vector<double> x(jb.values[i].begin(), jb.values[i].begin() + static_cast<std::ptrdiff_t>(k));
          mu.atoms.push_back(x);
          nu.atoms.push_back(x);
          mu.weights.push_back(std::max(0.0, jb.values[i][k]));
          nu.weights.push_back(std::max(0.0, jb.values[i][k + 1]));
        }
        auto renorm = [](std::vector<double>& w) {
          double s = 0.0;
          for (double x : w) s += x;
          for (double& x : w) x /= s;
        };
        renorm(mu.weights);
        renorm(nu.weights);
        const auto cm = cost_matrix(mu, nu, ClassicalCostFunction::power(p));
        const auto lp = solve_classical_lp({mu, nu, cm});
        TransportResult q;
        try {
          q = optimal_transport(rho, omega, a, p, opts);
        } catch (const NotConverged& e) {
          q = e.best();
          inv.code = kExitNotConverged;
        }
        inv.converged = q.converged;
        const double slack = 1e-6;
        const bool holds = q.value <= lp.value + slack;
        inv.results = {{"quantum", q.value},
                       {"classical", lp.value},
                       {"difference", lp.value - q.value},
                       {"slack", slack},
                       {"quantum_le_classical", holds},
                       {"classical_plan", lp.plan},
                       {"atoms", mu.atoms},
                       {"weights_rho", mu.weights},
                       {"weights_omega", nu.weights}};
        inv.residuals = {{"gap", q.gap}, {"primal", q.primal_residual}, {"dual", q.dual_residual}};
        if (!holds && inv.code == kExitOk) inv.code = kExitVerdictFail;
      }
    } else if (*ver) {
      inv.name = "verify-counterexample";
      const double p = p_flag.value_or(kCounterexampleP);
      // Optimal values are O(50); relative 1e-8 keeps absolute gaps below 1e-6.
      if (!ver->count("--tol")) tol = kCounterexampleTol;
      const auto opts = solver_options();
      inv.options["p"] = p;
      const auto rho = State::from_rounded(counterexample_rho());
      const auto omega = State::from_rounded(counterexample_omega());
      const ObservableCollection a({HermitianOperator::hermitian_part(counterexample_observable())});
      inv.input = counterexample_document();
      const auto r = divergence(rho, omega, a, p, opts);
      inv.results = divergence_json(r);
      inv.converged = r.converged();
      const double worst_gap = std::max({r.cross.gap, r.self_rho.solver.gap, r.self_omega.solver.gap});
      inv.residuals = {{"gap_cross", r.cross.gap},
                       {"gap_self_rho", r.self_rho.solver.gap},
                       {"gap_self_omega", r.self_omega.solver.gap},
                       {"max_gap", worst_gap}};
      const bool gaps_ok = worst_gap <= kCounterexampleGap;
      bool pass = gaps_ok;
      json verdict;
      if (p == kCounterexampleP) {
        const bool near = std::abs(r.divergence_pow - kCounterexampleBracket) <= kCounterexampleSlack;
        pass = pass && near;
        verdict = {{"check", "bracket within reference interval"},
                   {"reference", kCounterexampleBracket},
                   {"slack", kCounterexampleSlack},
                   {"deviation", r.divergence_pow - kCounterexampleBracket}};
      } else if (p == 2.0) {
        pass = pass && r.divergence_pow >= -1e-6;
        verdict = {{"check", "quadratic bracket nonnegative"}, {"slack", 1e-6}};
      } else {
        verdict = {{"check", "none (no reference at this p)"}};
      }
      verdict["gap_limit"] = kCounterexampleGap;
      verdict["gaps_ok"] = gaps_ok;
      verdict["pass"] = pass;
      inv.results["verdict"] = verdict;
      if (!pass) inv.code = kExitVerdictFail;
    } else if (*scan) {
      inv.name = "triangle-scan";
      const bool pauli = family == "pauli-failure";
      const double p = p_flag.value_or(pauli ? 1.0 : 2.0);
      const auto opts = solver_options();
      inv.options["p"] = p;
      inv.options["family"] = family;
      if (pauli) {
        inv.options["epsilon"] = epsilon;
        const auto inst = pauli_failure_instance(p, epsilon);
        const auto t = triangle_check(inst.rho, inst.tau, inst.omega, inst.observables, p, opts);
        inv.converged = t.rho_omega.converged() && t.rho_tau.converged() && t.tau_omega.converged();
        inv.results = {{"theta", inst.theta},
                       {"predicted_violation", inst.predicted_violation},
                       {"violation", t.violation()},
                       {"defined", t.defined()},
                       {"violation_found", t.defined() && t.violation() > threshold},
                       {"d_rho_omega", divergence_json(t.rho_omega)},
                       {"d_rho_tau", divergence_json(t.rho_tau)},
                       {"d_tau_omega", divergence_json(t.tau_omega)},
                       {"states", states_json({inst.rho, inst.tau, inst.omega})},
                       {"observables", observables_json(inst.observables)}};
        inv.residuals = {{"violation_error", std::abs(t.violation() - inst.predicted_violation)}};
      } else {
        check_dimension(dim, kScanDimGuard, "--dim");
        const PureSlot ps = slot == "left" ? PureSlot::Left : slot == "mid" ? PureSlot::Mid
                          : slot == "right" ? PureSlot::Right : PureSlot::None;
        inv.options["dim"] = dim;
        inv.options["samples"] = samples;
        inv.options["seed"] = seed;
        inv.options["pure_slot"] = slot;
        inv.options["threshold"] = threshold;
        std::vector<ScanSample> runs(samples);
        parallel_for(samples, threads, [&](std::size_t i) {
          runs[i] = scan_instance(dim, seed, i, ps);
          run_scan_sample(runs[i], p, opts);
        });
        std::size_t defined = 0;
        std::size_t undefined = 0;
        std::size_t failed = 0;
        std::size_t unhealthy = 0;
        std::optional<std::size_t> worst;
        json failures = json::array();
        for (const auto& s : runs) {
          if (!s.solved) {
            ++failed;
            failures.push_back({{"index", s.index}, {"seed", s.seed}, {"error", s.failure}});
            continue;
          }
          if (!s.health_ok) ++unhealthy;
          if (!s.defined) {
            ++undefined;
            continue;
          }
          ++defined;
          if (!worst || s.violation > runs[*worst].violation) worst = s.index;
        }
        inv.converged = failed == 0;
        const double max_violation = worst ? runs[*worst].violation : 0.0;
        inv.results = {{"samples", samples},
                       {"defined", defined},
                       {"undefined", undefined},
                       {"failed", failed},
                       {"health_failures", unhealthy},
                       {"max_violation", worst ? json(max_violation) : json(nullptr)},
                       {"violation_found", worst && max_violation > threshold},
                       {"failures", failures}};
        if (worst) {
          const auto& s = runs[*worst];
          inv.results["worst_instance"] = {{"index", s.index},
                                           {"seed", s.seed},
                                           {"states", states_json(s.states)},
                                           {"observables", observables_json(s.observables)}};
        }
        if (failed > 0) inv.code = kExitNotConverged;
      }
    } else if (*dec) {
      inv.name = "decompose";
      inv.options["method"] = dmethod;
      if (dmethod == "strict-gap") {
        if (!p_flag || !p_target_flag) throw InputError("strict-gap: --p and --p-target are required");
        inv.options["p"] = *p_flag;
        inv.options["p_target"] = *p_target_flag;
        if (p_tilde) inv.options["p_tilde"] = *p_tilde;
        const auto g = strict_gap_witness(*p_flag, *p_target_flag, p_tilde);
        inv.results = {{"p_tilde", g.p_tilde},
                       {"lhs", g.lhs},
                       {"min_rhs", g.min_rhs},
                       {"rhs_at_best", g.rhs_at_best},
                       {"best_defect", g.best_defect},
                       {"best_seed", g.best_seed},
                       {"starts", g.starts},
                       {"defect_threshold", kGapDefectThreshold},
                       {"certified", g.certified}};
      } else if (dmethod == "search") {
        if (!p_flag || !p_target_flag) throw InputError("search: --p and --p-target are required");
        inv.options["p"] = *p_flag;
        inv.options["p_target"] = *p_target_flag;
        inv.options["levels"] = levels;
        inv.options["samples"] = samples;
        inv.options["seed"] = seed;
        const auto s = well_ordering_search(*p_flag, *p_target_flag, levels, samples, seed);
        json rows = json::array();
        for (const auto& x : s.samples) rows.push_back({{"lambda", x.lambda}, {"best_defect", x.best_defect}});
        inv.results = {{"levels", s.levels},
                       {"samples", rows},
                       {"max_defect", s.max_defect},
                       {"claim", "none; small defects are numerical evidence only"}};
      } else {
        if (file.empty()) throw InputError("decompose: a problem file is required for --method " + dmethod);
        const auto pf = load_problem(file);
        inv.input = pf.source;
        const double p = detail::require_p(p_flag, pf);
        inv.options["p"] = p;
        inv.options["observable"] = obs_index;
        if (obs_index >= pf.observables.size()) throw InputError("--observable: index out of range");
        const auto& a = pf.observables[obs_index].second;
        auto target = [&] {
          if (!p_target_flag) throw InputError(dmethod + ": --p-target is required");
          inv.options["p_target"] = *p_target_flag;
          return *p_target_flag;
        };
        if (dmethod == "cut") {
          const auto d = cut_cone_decompose(a, p);
          inv.results = decomposition_json(d);
          inv.residuals = {{"reconstruction", d.residual}};
        } else if (dmethod == "two-level") {
          const double pt = target();
          const auto b = two_level_transport(a, p, pt);
          const double res = max_abs_diff(cost_operator(ObservableCollection({a}), p).matrix.matrix(),
                                          cost_operator(ObservableCollection({b}), pt).matrix.matrix());
          inv.results = {{"observable_eigenvalues", eigh(a).distinct_eigenvalues()},
                         {"witness", {{"p_source", pt}, {"spectral_values", spectral_values(b, eigh(a))}}},
                         {"witness_matrix", matrix_to_json(b.matrix())},
                         {"residual", res}};
          inv.residuals = {{"reconstruction", res}};
        } else if (dmethod == "three-level") {
          const auto d = three_level_decompose(a, p, target());
          inv.results = decomposition_json(d);
          inv.residuals = {{"reconstruction", d.residual}};
        } else {
          const double pt = target();
          const auto r = spectrum_reduce(a, p, pt);
          json blocks = json::array();
          for (const auto& [i, j] : r.uncovered_blocks) blocks.push_back({i, j});
          inv.results = {{"lambda", r.lambda},
                         {"mu", r.mu},
                         {"lambda_prime", r.lambda_prime},
                         {"b", matrix_to_json(r.b.matrix())},
                         {"a_prime", matrix_to_json(r.a_prime.matrix())},
                         {"covered_residual", r.covered_residual},
                         {"uncovered_blocks", blocks},
                         {"uncovered_residual", r.uncovered_residual}};
          if (r.lambda.size() <= 3) {
            const auto full = reduce_decompose(a, p, pt);
            inv.results["full"] = decomposition_json(full);
          }
          inv.residuals = {{"covered", r.covered_residual}};
        }
      }
    }
  } catch (const NotConverged& e) {
    err << "qwot: " << e.what() << "\n";
    inv.converged = false;
    inv.code = kExitNotConverged;
    inv.results["best"] = transport_json(e.best());
  } catch (const NumericalFailure& e) {
    err << "qwot: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const Error& e) {
    err << "qwot: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    err << "qwot: " << e.what() << "\n";
    return kExitInput;
  }

  std::optional<double> wall;
  if (timing) wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string text = serialize(detail::render(inv, wall)) + "\n";
  if (out_path.empty()) {
    out << text;
  } else {
    std::ofstream f(out_path);
    if (!f) {
      err << "qwot: cannot write " << out_path << "\n";
      return kExitInput;
    }
    f << text;
  }
  return inv.code;
}

}  // namespace qwot
