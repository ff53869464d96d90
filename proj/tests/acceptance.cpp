// Acceptance suite: one line per criterion, non-zero exit if any fails.
//
// Criteria 1-10 run their scenarios through the CLI layer so that criterion 11
// can re-run the very same configs with 4 workers and compare reports byte for byte.

#include "ppv/cli.hpp"
#include "ppv/partitions.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using ppv::cli::json;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

// every config run by criteria 1-10 and its 1-worker report, replayed by criterion 11
std::vector<std::pair<json, json>> g_runs;

json run(const json& config) {
  ppv::cli::Overrides ov;
  ov.workers = 1;
  json report = ppv::cli::run_config(config, ov).report;
  g_runs.emplace_back(config, report);
  return report;
}

double z_to(const json& est, double target) {
  const double se = est["std_error"].get<double>();
  const double d = est["mean"].get<double>() - target;
  if (se == 0.0) return d == 0.0 ? 0.0 : INFINITY;
  return d / se;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

json unit_interval(double c) {
  return {{"kind", "constant"}, {"window", {{"lo", {0.0}}, {"hi", {1.0}}}}, {"c", c}};
}

json uniform_nu(double half_width, double c, double core = 0.0) {
  json j = {{"kind", "uniform"}, {"dim", 1}, {"half_width", half_width}, {"c", c}};
  if (core > 0.0) j["core"] = core;
  return j;
}

// 1. Bell numbers and the type multiplicities for n = 4.
Outcome partitions() {
  const int bell[] = {1, 2, 5, 15, 52, 203};
  Outcome o;
  for (int n = 1; n <= 6; ++n) {
    if (static_cast<int>(ppv::enumerate_partitions(n).size()) != bell[n - 1]) {
      o.passed = false;
      o.detail += "n=" + std::to_string(n) + " wrong count; ";
    }
  }
  const json rep = run({{"schema_version", 1}, {"scenario", "partitions"}, {"n", 4}});
  std::vector<int> mult;
  for (const auto& t : rep["results"]["types"]) mult.push_back(t["count"].get<int>());
  o.passed = o.passed && mult == std::vector<int>{1, 4, 3, 6, 1};
  o.detail += "Bell(1..6)=1,2,5,15,52,203; n=4 types";
  for (const auto& t : rep["results"]["types"]) o.detail += " " + t["type"].get<std::string>() + ":" + t["count"].dump();
  return o;
}

// 2. Diagonal indicator, ε=(1,1): LHS = RHS = 1, singletons-only hook fails hard.
Outcome diagonal() {
  json c = {{"schema_version", 1},         {"scenario", "verify-mecke-palm"},
            {"seed", 20240601},            {"replicates", 100000},
            {"intensity", unit_interval(1.0)}, {"process", {{"kind", "diag-indicator"}, {"arity", 2}}},
            {"eps", "11"}};
  const json rep = run(c);
  json hooked = c;
  hooked["hook"] = "singletons-only";
  const json bad = run(hooked);
  const double z_lhs = z_to(rep["results"]["lhs"], 1.0);
  const double rhs = rep["results"]["rhs"]["total"]["mean"].get<double>();
  const double z_bad = std::abs(bad["results"]["gate"]["z_score"].get<double>());
  Outcome o;
  o.passed = std::abs(z_lhs) <= 4.0 && rep["passed"] == true && std::abs(rhs - 1.0) <= 1e-12 && bad["passed"] == false &&
             z_bad > 20.0;
  o.detail = "LHS " + fmt(rep["results"]["lhs"]["mean"]) + " (z=" + fmt(z_lhs, 3) + "), RHS " + fmt(rhs) +
             ", gate z=" + fmt(rep["results"]["gate"]["z_score"], 3) + "; singletons-only hook z=" + fmt(z_bad, 4);
  return o;
}

// 3. e^{-|ω|} under σ(X)=1: series vs closed form, MC vs series.
Outcome oracle() {
  const json rep = run({{"schema_version", 1},
                        {"scenario", "oracle"},
                        {"seed", 33},
                        {"replicates", 200000},
                        {"intensity", unit_interval(1.0)},
                        {"process", {{"kind", "exp-count"}, {"arity", 0}, {"theta", 1.0}}},
                        {"bound_hint", 1.0}});
  const double closed = std::exp(std::exp(-1.0) - 1.0);
  const double series = rep["results"]["series"]["value"].get<double>();
  const double bound = rep["results"]["series"]["truncation_bound"].get<double>();
  const auto& mc = rep["results"]["monte_carlo"];
  const double diff = std::abs(mc["mean"].get<double>() - series);
  const double allowed = 4.0 * mc["std_error"].get<double>() + bound;
  Outcome o;
  o.passed = std::abs(series - closed) <= 1e-10 && diff <= allowed;
  o.detail = "series-closed=" + fmt(series - closed, 3) + ", |MC-series|=" + fmt(diff, 3) + " <= " + fmt(allowed, 3) +
             " (truncation " + fmt(bound, 3) + ")";
  return o;
}

// 4. E N^n = Bell(n), n = 1..5, 10^6 replicates.
Outcome poisson_moments() {
  const double bell[] = {1, 2, 5, 15, 52};
  Outcome o;
  for (int n = 1; n <= 5; ++n) {
    const json rep = run({{"schema_version", 1},
                          {"scenario", "moments"},
                          {"seed", 400 + n},
                          {"replicates", 1000000},
                          {"intensity", unit_interval(1.0)},
                          {"factors", {{{"process", {{"kind", "const"}, {"arity", 1}}}, {"power", n}, {"eps", "1"}}}}});
    const double z = z_to(rep["results"]["lhs"], bell[n - 1]);
    const double rhs = rep["results"]["rhs"]["total"]["mean"].get<double>();
    const bool ok = rep["passed"] == true && std::abs(z) <= 4.0 && std::abs(rhs - bell[n - 1]) <= 1e-9 * bell[n - 1];
    o.passed = o.passed && ok;
    o.detail += "n=" + std::to_string(n) + " z=" + fmt(z, 2) + (ok ? "" : " (FAIL)") + "; ";
  }
  o.detail += "SE(N^5) ~ " + fmt(std::sqrt(4140.0 - 52.0 * 52.0) / 1000.0, 3) + " at 10^6";
  return o;
}

// 5. Eleven-group second moment vs the generic expansion, shared streams.
Outcome second_moment_groups() {
  const json processes[] = {
      {{"kind", "coordinate-product"}, {"arity", 2}, {"offset", 0.5}},
      {{"kind", "count-weighted"}, {"arity", 2}, {"box", {{"lo", {0.0}}, {"hi", {0.6}}}}, {"offset", 0.2}},
      {{"kind", "exp-count"}, {"arity", 2}, {"theta", 0.3}},
  };
  Outcome o;
  int i = 0;
  for (const auto& p : processes) {
    const json rep = run({{"schema_version", 1},
                          {"scenario", "moments"},
                          {"seed", 500 + i++},
                          {"replicates", 4000},
                          {"check", "second-moment-groups"},
                          {"intensity", unit_interval(1.3)},
                          {"factors", {{{"process", p}, {"power", 2}, {"eps", "11"}}}}});
    const double diff = rep["results"]["abs_difference"].get<double>();
    const double mult = rep["results"]["multiplicity_sum"].get<double>();
    o.passed = o.passed && rep["passed"] == true && mult == 15.0;
    o.detail += p["kind"].get<std::string>() + " |diff|=" + fmt(diff, 3) + " mult=" + fmt(mult) + "; ";
  }
  return o;
}

// 6. ε=(0,1) squared mixed integral: two-term expansion and both nesting orders.
Outcome mixed_second_moment() {
  const json processes[] = {
      {{"kind", "coordinate-product"}, {"arity", 2}, {"offset", 1.0}},
      {{"kind", "count-weighted"}, {"arity", 2}, {"box", {{"lo", {0.0}}, {"hi", {0.6}}}}, {"offset", 0.2}},
  };
  Outcome o;
  int i = 0;
  for (const auto& p : processes) {
    const json rep = run({{"schema_version", 1},
                          {"scenario", "moments"},
                          {"seed", 600 + i++},
                          {"replicates", 50000},
                          {"check", "mixed-second-moment"},
                          {"intensity", {{"kind", "linear"}, {"window", {{"lo", {0.0}}, {"hi", {1.0}}}}, {"c0", 0.5}, {"slope", {1.0}}}},
                          {"factors", {{{"process", p}, {"power", 2}, {"eps", "01"}}}}});
    const auto& r = rep["results"];
    o.passed = o.passed && rep["passed"] == true;
    o.detail += p["kind"].get<std::string>() + " expansion z=" + fmt(r["expansion_gate"]["z_score"], 3) +
                " order z=" + fmt(r["order_gate"]["z_score"], 3) + "; ";
  }
  return o;
}

// 7. Simple system, |ν|=2, T=3.
Outcome simple_levy() {
  json c = {{"schema_version", 1}, {"scenario", "levy-system"}, {"seed", 700},
            {"replicates", 100000}, {"levy", uniform_nu(1.0, 1.0)}, {"horizon", 3.0},
            {"functional", {{"kind", "count"}}}};
  const json count = run(c);
  c["functional"] = {{"kind", "tail"}, {"a", 0.5}};
  c["seed"] = 701;
  const json tail = run(c);
  // ν(|z| > 0.5) = 1 for density 1 on [-1, 1]
  const double tail_exact = 3.0 * 1.0;
  const auto& cr = count["results"];
  const auto& tr = tail["results"];
  Outcome o;
  o.passed = count["passed"] == true && tail["passed"] == true && std::abs(z_to(cr["lhs"], 6.0)) <= 4.0 &&
             std::abs(cr["rhs"]["mean"].get<double>() - 6.0) <= 1e-9 && std::abs(z_to(tr["lhs"], tail_exact)) <= 4.0 &&
             std::abs(tr["rhs"]["mean"].get<double>() - tail_exact) <= 1e-9;
  o.detail = "count LHS " + fmt(cr["lhs"]["mean"]) + " RHS " + fmt(cr["rhs"]["mean"]) + " (z=" +
             fmt(cr["gate"]["z_score"], 3) + "); tail LHS " + fmt(tr["lhs"]["mean"]) + " RHS " + fmt(tr["rhs"]["mean"]) +
             " vs T·ν(|z|>a)=" + fmt(tail_exact);
  return o;
}

// 8. General mixed system, n=2, all four ε.
Outcome general_levy() {
  const double mass = 2.0, horizon = 1.5;
  const double pairs = mass * horizon * mass * horizon / 2.0;
  Outcome o;
  int i = 0;
  for (const char* eps : {"11", "10", "01", "00"}) {
    const json rep = run({{"schema_version", 1},
                          {"scenario", "levy-system"},
                          {"seed", 800 + i++},
                          {"replicates", 100000},
                          {"levy", uniform_nu(1.0, 1.0)},
                          {"horizon", horizon},
                          {"functional", {{"kind", "count"}, {"arity", 2}}},
                          {"eps", eps}});
    const auto& r = rep["results"];
    bool ok = rep["passed"] == true;
    if (std::string(eps) == "11") ok = ok && std::abs(z_to(r["lhs"], pairs)) <= 4.0 && std::abs(z_to(r["rhs"], pairs)) <= 4.0;
    o.passed = o.passed && ok;
    o.detail += std::string("ε=") + eps + " z=" + fmt(r["gate"]["z_score"], 3) + (ok ? "" : " (FAIL)") + "; ";
  }
  o.detail += "(|ν|T)^2/2=" + fmt(pairs);
  return o;
}

// 9. Compensated count F ≡ 1.
Outcome martingale() {
  const double mass = 2.0, t = 3.0;
  const json rep = run({{"schema_version", 1},
                        {"scenario", "martingale"},
                        {"seed", 900},
                        {"replicates", 100000},
                        {"levy", uniform_nu(1.0, 1.0)},
                        {"t", t},
                        {"functional", {{"kind", "count"}}}});
  const auto& r = rep["results"];
  const double zm = z_to(r["mean"], 0.0);
  const double rel = std::abs(r["second_moment"]["mean"].get<double>() / (mass * t) - 1.0);
  Outcome o;
  o.passed = std::abs(zm) <= 4.0 && rel <= 0.05 && r["bracket_gate"]["passed"] == true;
  o.detail = "E M z=" + fmt(zm, 3) + ", E M^2=" + fmt(r["second_moment"]["mean"]) + " vs |ν|t=" + fmt(mass * t) +
             " (rel " + fmt(100 * rel, 3) + "%), E[M]-E<M> z=" + fmt(r["bracket_gate"]["z_score"], 3);
  return o;
}

// 10. Exit law, D=(-1,1), A=D, B=(1.5,2.5).
Outcome exit_law() {
  const json rep = run({{"schema_version", 1},
                        {"scenario", "exit-law"},
                        {"seed", 1000},
                        {"replicates", 100000},
                        {"levy", uniform_nu(2.0, 0.5, 0.0625)},
                        {"domain", {{"lo", {-1.0}}, {"hi", {1.0}}}},
                        {"a", {{"lo", {-1.0}}, {"hi", {1.0}}}},
                        {"b", {{"lo", {1.5}}, {"hi", {2.5}}}},
                        {"start", {0.0}},
                        {"interval", {0.0, 8.0}},
                        {"gate", {{"z_max", 4.0}, {"rel_tol", 0.02}}}});
  const auto& r = rep["results"];
  Outcome o;
  o.passed = rep["passed"] == true;
  o.detail = "LHS " + fmt(r["lhs"]["mean"]) + " RHS " + fmt(r["rhs"]["mean"]) + " (z=" + fmt(r["gate"]["z_score"], 3) +
             "), grid bias " + fmt(r["grid_bias"], 3) + ", P(τ>T)=" + fmt(r["survival"]["mean"], 3);
  return o;
}

// 11. Same seed, 1 vs 4 workers: identical reports.
Outcome reproducibility() {
  Outcome o;
  std::size_t same = 0;
  for (const auto& [config, first] : g_runs) {
    ppv::cli::Overrides ov;
    ov.workers = 4;
    const json again = ppv::cli::run_config(config, ov).report;
    if (ppv::cli::reproducible_part(again).dump() == ppv::cli::reproducible_part(first).dump()) {
      ++same;
    } else {
      o.passed = false;
      o.detail += "scenario " + config["scenario"].get<std::string>() + " differs; ";
    }
  }
  o.passed = o.passed && !g_runs.empty();
  o.detail += std::to_string(same) + "/" + std::to_string(g_runs.size()) + " reports bit-identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "partition oracles", 1.0, partitions},
      {2, "diagonal discriminator", 30.0, diagonal},
      {3, "triple-evaluator agreement", 30.0, oracle},
      {4, "Poisson moment suite", 300.0, poisson_moments},
      {5, "second-moment group consistency", 120.0, second_moment_groups},
      {6, "mixed second moment", 120.0, mixed_second_moment},
      {7, "simple Levy system", 60.0, simple_levy},
      {8, "general mixed Levy system", 300.0, general_levy},
      {9, "martingale suite", 60.0, martingale},
      {10, "exit law", 300.0, exit_law},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs < c.budget_s;
    const bool ok = o.passed && in_budget;
    failures += ok ? 0 : 1;
    std::printf("criterion %2d: %s  %s  [%.1fs, budget %.0fs%s]  %s\n", c.id, ok ? "PASS" : "FAIL", c.name.c_str(), secs,
                c.budget_s, in_budget ? "" : " EXCEEDED", o.detail.c_str());
    std::fflush(stdout);
  }
  {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = reproducibility();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += o.passed ? 0 : 1;
    std::printf("criterion 11: %s  reproducibility (workers 1 vs 4)  [%.1fs]  %s\n", o.passed ? "PASS" : "FAIL", secs,
                o.detail.c_str());
  }
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
