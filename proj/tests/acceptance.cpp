// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qwot/cli.hpp"

using namespace qwot;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::size_t threads() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

// Unit operator norm so the absolute residual thresholds are meaningful.
HermitianOperator normalized_observable(std::size_t d, std::uint64_t seed) {
  const auto a = random_observable(d, seed);
  return (1.0 / operator_norm(a)) * a;
}

ObservableCollection random_collection(std::size_t d, std::mt19937_64& rng) {
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
  std::vector<HermitianOperator> obs;
  for (std::size_t i = 0; i < k; ++i) obs.push_back(normalized_observable(d, rng()));
  return ObservableCollection(std::move(obs));
}

json run_json(const std::vector<std::string>& args, int& code) {
  std::ostringstream out;
  std::ostringstream err;
  code = run_cli(args, out, err);
  return out.str().empty() ? json(nullptr) : json::parse(out.str());
}

Outcome counterexample() {
  const auto t0 = Clock::now();
  int code = 0;
  const auto j = run_json({"verify-counterexample"}, code);
  const double wall = seconds_since(t0);
  if (j.is_null()) return {false, "no report (exit " + std::to_string(code) + ")"};
  const double bracket = j["results"]["divergence_pow"].get<double>();
  const double gap = j["residuals"]["max_gap"].get<double>();
  const bool near = std::abs(bracket - kCounterexampleBracket) <= kCounterexampleSlack;
  const bool pass = near && gap <= kCounterexampleGap && wall <= 60.0;
  return {pass, "bracket=" + fmt("%.7f", bracket) + " reference=" + fmt("%.3f", kCounterexampleBracket) +
                    "+/-" + fmt("%.3f", kCounterexampleSlack) + " max_gap=" + fmt("%.2e", gap) +
                    " time=" + fmt("%.1fs", wall)};
}

Outcome self_calibration() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const std::size_t d = 2 + seed % 2;
    const auto rho = random_state(d, d, rng());
    const auto a = random_collection(d, rng);
    const double solver = optimal_transport(rho, rho, a, 2.0).value;
    worst = std::max(worst, std::abs(solver - quadratic_self_distance_sq(rho, a)));
  }
  return {worst <= 1e-5, "max |solver - closed form| = " + fmt("%.2e", worst)};
}

Outcome pure_marginal() {
  const double ps[] = {1.0, 1.5, 2.0, 3.0};
  double worst_value = 0.0;
  double worst_plan = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(2000 + seed);
    const std::size_t d = 2 + seed % 2;
    const auto rho = random_state(d, d, rng());
    const auto omega = random_pure_state(d, rng());
    const auto a = random_collection(d, rng);
    const auto cost = cost_operator(a, ps[seed % 4]);
    const auto r = solve_transport(rho, omega, cost);
    const auto prod = kron(omega.matrix(), transpose_op(rho.matrix()));
    worst_value = std::max(worst_value, std::abs(r.value - trace_of_product(prod, cost.matrix.matrix()).real()));
    worst_plan = std::max(worst_plan, max_abs_diff(r.plan.matrix(), prod));
  }
  return {worst_value <= 1e-6 && worst_plan <= 1e-6,
          "max value error " + fmt("%.2e", worst_value) + ", max plan error " + fmt("%.2e", worst_plan)};
}

Outcome quadratic_nonnegative() {
  double lowest = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(3000 + seed);
    const std::size_t d = 2 + seed % 2;
    const auto rho = random_state(d, d, rng());
    const auto omega = random_state(d, d, rng());
    const auto a = random_collection(d, rng);
    lowest = std::min(lowest, divergence(rho, omega, a, 2.0).divergence_pow);
  }
  return {lowest >= -1e-6, "min divergence_pow = " + fmt("%.3e", lowest)};
}

struct ScanSummary {
  std::size_t failed = 0;
  std::size_t undefined = 0;
  double max_violation = -std::numeric_limits<double>::infinity();
};

ScanSummary scan(std::size_t count, std::uint64_t seed, PureSlot slot, double p,
                 const std::function<std::size_t(std::size_t)>& dim_of) {
  std::vector<ScanSample> runs(count);
  parallel_for(count, threads(), [&](std::size_t i) {
    runs[i] = scan_instance(dim_of(i), seed, i, slot);
    run_scan_sample(runs[i], p, SolveOptions{});
  });
  ScanSummary s;
  for (const auto& r : runs) {
    if (!r.solved) {
      ++s.failed;
    } else if (!r.defined) {
      ++s.undefined;
    } else {
      s.max_violation = std::max(s.max_violation, r.violation);
    }
  }
  return s;
}

Outcome triangle_one_pure() {
  const auto t0 = Clock::now();
  std::string detail;
  bool pass = true;
  const std::pair<PureSlot, const char*> slots[] = {
      {PureSlot::Left, "left"}, {PureSlot::Mid, "mid"}, {PureSlot::Right, "right"}};
  std::uint64_t seed = 4000;
  for (const auto& [slot, name] : slots) {
    const auto s = scan(200, seed++, slot, 2.0, [](std::size_t i) { return 2 + i % 2; });
    pass = pass && s.failed == 0 && s.undefined == 0 && s.max_violation <= 1e-5;
    detail += std::string(name) + ": max " + fmt("%.3e", s.max_violation) + " (failed " +
              std::to_string(s.failed) + ", undefined " + std::to_string(s.undefined) + "); ";
  }
  const double wall = seconds_since(t0);
  pass = pass && wall <= 600.0;
  return {pass, detail + "time=" + fmt("%.1fs", wall)};
}

Outcome qubit_inheritance() {
  std::string detail;
  bool pass = true;
  std::uint64_t seed = 5000;
  for (double p : {2.0, 3.0, 4.5}) {
    const auto s = scan(100, seed++, PureSlot::None, p, [](std::size_t) { return 2; });
    pass = pass && s.failed == 0 && s.undefined == 0 && s.max_violation <= 1e-5;
    detail += "p=" + fmt("%.1f", p) + ": max " + fmt("%.3e", s.max_violation) + "; ";
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

// 8 (1 - c^2)(2 c^2 - 1) with c = 1 - eps/4, eps = 0.05.
constexpr double kPauliFailureGolden = 0.188874609375;

Outcome triangle_failure() {
  const auto inst = pauli_failure_instance(1.0, 0.05);
  const auto t = triangle_check(inst.rho, inst.tau, inst.omega, inst.observables, 1.0);
  if (!t.defined()) return {false, "divergence undefined"};
  const double v = t.violation();
  const bool pass = v >= 0.1 && std::abs(v - kPauliFailureGolden) <= 1e-5;
  return {pass, "violation=" + fmt("%.9f", v) + " golden=" + fmt("%.12f", kPauliFailureGolden)};
}

Outcome cone_decompositions() {
  std::mt19937_64 rng(6000);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double cut = 0.0;
  const double ps[] = {0.5, 1.0, 2.0, 3.7};
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(i) % 5;
    const auto d = cut_cone_decompose(normalized_observable(n, rng()), ps[i % 4]);
    cut = std::max({cut, d.residual, d.commutator});
  }
  double three = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double p = 0.1 + 0.9 * unit(rng);
    const double pt = 0.5 + 3.5 * unit(rng);
    const auto d = three_level_decompose(normalized_observable(3, rng()), p, pt);
    three = std::max({three, d.residual, d.commutator});
  }
  double reduce = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double p = 0.3 + 2.7 * unit(rng);
    const double pt = p + 2.0 * unit(rng);
    const auto a = normalized_observable(3, rng());
    const auto r = spectrum_reduce(a, p, pt);
    const auto full = reduce_decompose(a, p, pt);
    reduce = std::max({reduce, r.covered_residual, full.residual, full.commutator});
  }
  double two = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double p = 0.3 + 4.0 * unit(rng);
    const double pt = 0.3 + 4.0 * unit(rng);
    const auto a = normalized_observable(2, rng());
    const auto b = two_level_transport(a, p, pt);
    two = std::max(two, max_abs_diff(cost_operator(ObservableCollection({a}), p).matrix.matrix(),
                                     cost_operator(ObservableCollection({b}), pt).matrix.matrix()));
  }
  const bool pass = cut <= 1e-9 && three <= 1e-9 && reduce <= 1e-9 && two <= 1e-12;
  return {pass, "cut " + fmt("%.1e", cut) + ", three-level " + fmt("%.1e", three) + ", reduce " +
                    fmt("%.1e", reduce) + ", two-level " + fmt("%.1e", two)};
}

Outcome infinity_cost() {
  const auto q1 = HermitianOperator::diagonal(std::vector<double>{1, 0, 0});
  const auto q2 = HermitianOperator::diagonal(std::vector<double>{0, 0, 1});
  double worst = 0.0;
  for (double p : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    for (double lambda : {0.5, 1.0, 2.0}) {
      const auto r = infinity_cost_approx(q1, q2, lambda, p);
      const double predicted = lambda / std::pow(2.0, p) * r.spurious_norm;
      worst = std::max(worst, std::abs(r.approx_error - predicted));
    }
  }
  const double at50 = infinity_cost_approx(q1, q2, 1.0, 50.0).approx_error;
  return {worst <= 1e-12 && at50 <= 1e-12,
          "max |error - prediction| " + fmt("%.1e", worst) + ", error at p=50 " + fmt("%.1e", at50)};
}

double birkhoff_min(const std::vector<std::vector<double>>& c) {
  std::vector<std::size_t> perm(c.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += c[i][perm[i]];
    best = std::min(best, s / static_cast<double>(c.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Outcome commuting_reduction() {
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(7000 + seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t d = 2 + seed % 3;
    const double p = seed % 2 == 0 ? 1.0 : 2.0;
    const auto u = random_unitary(d, rng());
    auto in_basis = [&](const std::vector<double>& v) {
      return HermitianOperator::hermitian_part(u * ComplexMatrix::diagonal(v) * u.adjoint());
    };
    auto weights = [&] {
      std::vector<double> w(d);
      for (double& x : w) x = 0.05 + unit(rng);
      const double s = std::accumulate(w.begin(), w.end(), 0.0);
      for (double& x : w) x /= s;
      return w;
    };
    const std::size_t k = 1 + seed % 2;
    std::vector<std::vector<double>> lam(k, std::vector<double>(d));
    std::vector<HermitianOperator> obs;
    for (auto& l : lam) {
      for (double& x : l) x = 2.0 * unit(rng) - 1.0;
      obs.push_back(in_basis(l));
    }
    const auto wr = weights();
    const auto wo = weights();
    const State rho(in_basis(wr), 1e-9);
    const State omega(in_basis(wo), 1e-9);
    DiscreteDistribution mu;
    DiscreteDistribution nu;
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<double> x;
      for (const auto& l : lam) x.push_back(l[i]);
      mu.atoms.push_back(x);
      nu.atoms.push_back(x);
    }
    mu.weights = wr;
    nu.weights = wo;
    const double classical = solve_classical_lp({mu, nu, cost_matrix(mu, nu, ClassicalCostFunction::power(p))}).value;
    const double quantum = optimal_transport(rho, omega, ObservableCollection(std::move(obs)), p).value;
    worst_excess = std::max(worst_excess, quantum - classical);
  }
  double lp_error = 0.0;
  std::mt19937_64 rng(7500);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  for (std::size_t n : {2u, 3u}) {
    for (int trial = 0; trial < 50; ++trial) {
      DiscreteDistribution mu;
      DiscreteDistribution nu;
      for (std::size_t i = 0; i < n; ++i) {
        mu.atoms.push_back({unit(rng)});
        nu.atoms.push_back({unit(rng)});
        mu.weights.push_back(1.0 / static_cast<double>(n));
        nu.weights.push_back(1.0 / static_cast<double>(n));
      }
      const auto c = cost_matrix(mu, nu, ClassicalCostFunction::power(trial % 2 == 0 ? 1.0 : 2.0));
      lp_error = std::max(lp_error, std::abs(solve_classical_lp({mu, nu, c}).value - birkhoff_min(c)));
    }
  }
  return {worst_excess <= 1e-6 && lp_error <= 1e-12,
          "max(quantum - classical) " + fmt("%.2e", worst_excess) + ", LP vs vertex enumeration " +
              fmt("%.1e", lp_error)};
}

Outcome property_suites() {
  double lieb = std::numeric_limits<double>::infinity();
  double cs = std::numeric_limits<double>::infinity();
  double pure = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(8000 + seed);
    const std::size_t d = 2 + seed % 3;
    const auto rho = random_state(d, 1 + rng() % d, rng());
    const auto phi = random_channel(d, d, 1 + rng() % 3, rng());
    const auto a = random_observable(d, rng());
    const State out(channel_apply(phi, rho.op()), 1e-9);
    lieb = std::min(lieb, sqrt_product_trace(out, a) - sqrt_product_trace(rho, channel_adjoint_apply(phi, a)));

    const auto x = random_state(d, 1 + rng() % d, rng());
    const auto y = random_observable(d, rng());
    const double t = trace_of_product(x.matrix(), y.matrix()).real();
    cs = std::min(cs, sqrt_product_trace(x, y) - t * t);

    const auto psi = random_pure_state(d, rng());
    const double tp = trace_of_product(psi.matrix(), y.matrix()).real();
    pure = std::max(pure, std::abs(sqrt_product_trace(psi, y) - tp * tp));
  }
  return {lieb >= -1e-9 && cs >= -1e-9 && pure <= 1e-9,
          "min Lieb slack " + fmt("%.2e", lieb) + ", min Cauchy-Schwarz slack " + fmt("%.2e", cs) +
              ", max pure-state defect " + fmt("%.1e", pure)};
}

Outcome harness() {
  int code_gap = 0;
  int code_search = 0;
  const auto gap = run_json({"decompose", "--method", "strict-gap", "--p", "1", "--p-target", "2"}, code_gap);
  const auto search = run_json({"decompose", "--method", "search", "--p", "1", "--p-target", "2", "--levels",
                                "4", "--samples", "3", "--seed", "9"},
                               code_search);
  bool ok = code_gap == kExitOk && code_search == kExitOk && !gap.is_null() && !search.is_null();
  if (ok) {
    const auto& g = gap["results"];
    ok = g.contains("certified") && g["lhs"].is_number() && g["min_rhs"].is_number() && g["best_defect"].is_number();
    const auto& s = search["results"];
    ok = ok && s["samples"].size() == 3 && s["max_defect"].is_number();
    for (const auto& row : s["samples"]) ok = ok && row["lambda"].size() == 4 && row["best_defect"].is_number();
  }
  return {ok, ok ? "strict-gap certified=" + std::string(gap["results"]["certified"].get<bool>() ? "true" : "false") +
                       ", search max_defect=" + fmt("%.3e", search["results"]["max_defect"].get<double>())
                 : "malformed or missing report"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 counterexample reproduction", counterexample},
      {"2 quadratic self-distance calibration", self_calibration},
      {"3 pure-marginal exactness", pure_marginal},
      {"4 quadratic divergence nonnegativity", quadratic_nonnegative},
      {"5 triangle inequality with one pure state, p=2", triangle_one_pure},
      {"6 qubit triangle inequality, p in {2,3,4.5}", qubit_inheritance},
      {"7 triangle failure at p=1", triangle_failure},
      {"8 cone decompositions", cone_decompositions},
      {"9 infinity cost construction", infinity_cost},
      {"10 commuting reduction", commuting_reduction},
      {"11 Lieb and Cauchy-Schwarz properties", property_suites},
      {"H search and report harness", harness},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s [%s] %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
