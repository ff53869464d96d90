#include "ppv/cli.hpp"

#include "ppv/levy_systems.hpp"
#include "ppv/moment_engine.hpp"
#include "ppv/palm_engine.hpp"
#include "ppv/partitions.hpp"
#include "ppv/series_oracle.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace ppv::cli {

namespace {

// ---------------------------------------------------------------------------
// Schema reader: typed access with field paths, unknown keys rejected on done().

class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return *j_; }

  Node object_at(const std::string& key) {
    Node n = child(key, true);
    n.expect_object();
    return n;
  }
  std::optional<Node> object_maybe(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return object_at(key);
  }
  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  double number(const std::string& key) { return child(key, true).as_number(); }
  double number_or(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
  std::optional<double> number_maybe(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }
  std::int64_t integer(const std::string& key, std::int64_t lo, std::int64_t hi) {
    return child(key, true).as_integer(lo, hi);
  }
  std::int64_t integer_or(const std::string& key, std::int64_t fallback, std::int64_t lo, std::int64_t hi) {
    return has(key) ? integer(key, lo, hi) : fallback;
  }
  bool boolean_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    Node n = child(key, true);
    if (!n.raw().is_boolean()) throw ConfigError(n.path(), "expected a boolean");
    return n.raw().get<bool>();
  }
  std::string string(const std::string& key) {
    Node n = child(key, true);
    if (!n.raw().is_string()) throw ConfigError(n.path(), "expected a string");
    return n.raw().get<std::string>();
  }
  std::string string_or(const std::string& key, const std::string& fallback) { return has(key) ? string(key) : fallback; }
  std::string choice(const std::string& key, const std::vector<std::string>& allowed, const std::string& fallback) {
    if (!has(key)) return fallback;
    const std::string v = string(key);
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(path_ + "." + key, "unknown value '" + v + "' (expected one of: " + list + ")");
    }
    return v;
  }
  std::vector<double> numbers(const std::string& key) {
    Node n = child(key, true);
    if (!n.raw().is_array()) throw ConfigError(n.path(), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < n.raw().size(); ++i) out.push_back(Node(n.raw()[i], n.path() + "[" + std::to_string(i) + "]").as_number());
    return out;
  }
  Point point(const std::string& key, int dim) {
    const auto v = numbers(key);
    if (static_cast<int>(v.size()) != dim) {
      throw ConfigError(path_ + "." + key, "expected " + std::to_string(dim) + " coordinates");
    }
    Point p(dim);
    for (int i = 0; i < dim; ++i) p[i] = v[static_cast<std::size_t>(i)];
    return p;
  }
  std::vector<Node> array(const std::string& key) {
    Node n = child(key, true);
    if (!n.raw().is_array()) throw ConfigError(n.path(), "expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < n.raw().size(); ++i) {
      Node e(n.raw()[i], n.path() + "[" + std::to_string(i) + "]");
      e.expect_object();
      out.push_back(e);
    }
    return out;
  }

  /// Marks keys handled elsewhere as known.
  void accept(std::initializer_list<const char*> keys) {
    for (const char* k : keys) seen_.insert(k);
  }
  void done() const {
    for (const auto& [k, v] : j_->items()) {
      if (!seen_.count(k)) throw ConfigError(path_ + "." + k, "unknown key");
    }
  }

 private:
  Node child(const std::string& key, bool required) {
    seen_.insert(key);
    if (!has(key)) {
      if (required) throw ConfigError(path_ + "." + key, "missing required field");
    }
    return Node(j_->at(key), path_ + "." + key);
  }
  void expect_object() const {
    if (!j_->is_object()) throw ConfigError(path_, "expected an object");
  }
  double as_number() const {
    if (!j_->is_number()) throw ConfigError(path_, "expected a number");
    const double v = j_->get<double>();
    if (!std::isfinite(v)) throw ConfigError(path_, "must be finite");
    return v;
  }
  std::int64_t as_integer(std::int64_t lo, std::int64_t hi) const {
    if (!j_->is_number_integer()) throw ConfigError(path_, "expected an integer");
    const auto v = j_->get<std::int64_t>();
    if (v < lo || v > hi) {
      throw ConfigError(path_, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return v;
  }

  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Catalog constructors throw invalid_argument; report them against the block.
template <class F>
auto guarded(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

Window read_window(Node n) {
  const auto lo = n.numbers("lo");
  const auto hi = n.numbers("hi");
  n.done();
  return guarded(n.path(), [&] { return Window(lo, hi); });
}

IntensitySpec read_intensity(Node n) {
  const std::string kind = n.choice("kind", {"constant", "linear", "gaussian-bump", "tabulated"}, "constant");
  const Window w = read_window(n.object_at("window"));
  std::optional<IntensitySpec> out;
  if (kind == "constant") {
    const double c = n.number_or("c", 1.0);
    out = guarded(n.path(), [&] { return constant_intensity(w, c); });
  } else if (kind == "linear") {
    const double c0 = n.number("c0");
    const auto slope = n.numbers("slope");
    out = guarded(n.path(), [&] { return linear_intensity(w, c0, slope); });
  } else if (kind == "gaussian-bump") {
    const double base = n.number_or("base", 0.0), amp = n.number("amplitude"), width = n.number("width");
    const Point center = n.point("center", w.dim());
    out = guarded(n.path(), [&] { return gaussian_bump_intensity(w, base, amp, center, width); });
  } else {
    const int cells = static_cast<int>(n.integer("cells_per_axis", 1, 4096));
    auto values = n.numbers("values");
    out = guarded(n.path(), [&] { return tabulated_intensity(w, cells, values); });
  }
  if (const auto r = n.number_maybe("exclude_core")) {
    out = guarded(n.path() + ".exclude_core", [&] { return exclude_core(*out, *r); });
  }
  n.done();
  return *out;
}

ProcessSpec read_process(Node n, int dim) {
  const std::string kind = n.choice(
      "kind", {"const", "coordinate-product", "diag-indicator", "count-weighted", "exp-count", "offdiag-product"},
      "const");
  const int arity = static_cast<int>(n.integer_or("arity", kind == "diag-indicator" ? 2 : 1, 0, 8));
  std::optional<ProcessSpec> out;
  if (kind == "const") {
    const double c = n.number_or("c", 1.0);
    out = guarded(n.path(), [&] { return const_process(arity, c); });
  } else if (kind == "coordinate-product" || kind == "offdiag-product") {
    const double scale = n.number_or("scale", 1.0), offset = n.number_or("offset", 0.0);
    out = guarded(n.path(), [&] {
      return kind == "coordinate-product" ? coordinate_product_process(arity, scale, offset)
                                          : offdiag_product_process(arity, scale, offset);
    });
  } else if (kind == "diag-indicator") {
    out = guarded(n.path(), [&] { return diag_indicator_process(arity); });
  } else if (kind == "count-weighted") {
    const Window box = read_window(n.object_at("box"));
    if (box.dim() != dim) throw ConfigError(n.path() + ".box", "dimension differs from the intensity window");
    const double offset = n.number_or("offset", 0.0);
    out = guarded(n.path(), [&] { return count_weighted_process(arity, box, offset); });
  } else {
    const double theta = n.number_or("theta", 1.0);
    out = guarded(n.path(), [&] { return exp_count_process(arity, theta); });
  }
  n.done();
  return *out;
}

EpsilonVector read_eps(Node& n, const std::string& key, int arity) {
  const std::string bits = n.string(key);
  const std::string field = n.path() + "." + key;
  const EpsilonVector eps = guarded(field, [&] { return EpsilonVector::parse(bits); });
  if (static_cast<int>(eps.size()) != arity) {
    throw ConfigError(field, "length " + std::to_string(eps.size()) + " does not match arity " + std::to_string(arity));
  }
  return eps;
}

GateSpec read_gate(Node& root) {
  GateSpec g;
  if (auto n = root.object_maybe("gate")) {
    g.z_max = n->number_or("z_max", g.z_max);
    if (!(g.z_max > 0.0)) throw ConfigError(n->path() + ".z_max", "must be positive");
    g.abs_floor = n->number_maybe("abs_floor");
    if (g.abs_floor && *g.abs_floor < 0.0) throw ConfigError(n->path() + ".abs_floor", "must be >= 0");
    g.rel_tol = n->number_or("rel_tol", 0.0);
    if (g.rel_tol < 0.0) throw ConfigError(n->path() + ".rel_tol", "must be >= 0");
    n->done();
  }
  return g;
}

QuadratureSpec read_quadrature(Node& root) {
  QuadratureSpec q;
  if (auto n = root.object_maybe("quadrature")) {
    const std::string s = n->choice("scheme", {"auto", "tensor", "qmc"}, "auto");
    q.scheme = s == "tensor" ? QuadratureScheme::TensorMidpoint
               : s == "qmc"  ? QuadratureScheme::QuasiRandom
                             : QuadratureScheme::Automatic;
    q.points_per_axis = static_cast<std::size_t>(n->integer_or("points_per_axis", 0, 0, 1 << 20));
    q.total_points = static_cast<std::size_t>(n->integer_or("total_points", 0, 0, 1 << 26));
    q.max_evaluations = static_cast<std::size_t>(
        n->integer_or("max_evaluations", static_cast<std::int64_t>(q.max_evaluations), 1, std::int64_t{1} << 40));
    n->done();
  }
  return q;
}

LevyMeasureSpec read_levy(Node n) {
  const std::string kind = n.choice("kind", {"uniform", "density"}, "uniform");
  if (kind == "uniform") {
    const int dim = static_cast<int>(n.integer_or("dim", 1, 1, kMaxDim));
    const double hw = n.number("half_width"), c = n.number_or("c", 1.0), core = n.number_or("core", 0.0);
    n.done();
    return guarded(n.path(), [&] { return uniform_levy(dim, hw, c, core); });
  }
  const IntensitySpec density = read_intensity(n.object_at("density"));
  n.done();
  if (density.window().contains(Point::Zero(density.dim())) && density.density(Point::Zero(density.dim())) > 0.0) {
    throw ConfigError(n.path() + ".density", "ν must not charge the origin; set exclude_core");
  }
  return LevyMeasureSpec(density);
}

JumpFunctional read_functional(Node n, int dim) {
  const std::string kind = n.choice("kind", {"count", "tail", "occupation", "size-power", "landing"}, "count");
  const int arity = static_cast<int>(n.integer_or("arity", 1, 1, 3));
  auto window = [&](const char* key) {
    const Window w = read_window(n.object_at(key));
    if (w.dim() != dim) throw ConfigError(n.path() + "." + key, "dimension differs from ν");
    return w;
  };
  std::optional<JumpFunctional> out;
  if (kind == "count") {
    out = count_functional(arity);
  } else if (kind == "tail") {
    out = tail_functional(n.number("a"), arity);
  } else if (kind == "occupation") {
    out = occupation_functional(window("window"), arity);
  } else if (kind == "size-power") {
    if (arity != 1) throw ConfigError(n.path() + ".arity", "size-power has arity 1");
    const double p = n.number("p");
    if (p < 0.0) throw ConfigError(n.path() + ".p", "must be >= 0");
    out = size_power_functional(p);
  } else {
    if (arity != 1) throw ConfigError(n.path() + ".arity", "landing has arity 1");
    out = landing_functional(window("window"));
  }
  n.done();
  return *out;
}

TimeFactor read_factor(Node n) {
  const std::string kind = n.choice("kind", {"unit", "linear", "window"}, "unit");
  TimeFactor out = unit_factor();
  if (kind == "linear") out = linear_factor(n.number_or("slope", 1.0));
  if (kind == "window") {
    const double a = n.number("a");
    if (!(a > 0.0)) throw ConfigError(n.path() + ".a", "must be positive");
    out = window_factor(a);
  }
  n.done();
  return out;
}

// ---------------------------------------------------------------------------
// Report pieces.

json to_json(const Estimate& e) { return {{"mean", e.mean}, {"std_error", e.std_error}, {"replicates", e.replicates}}; }

json to_json(const GateResult& g) {
  return {{"difference", g.difference}, {"combined_se", g.combined_se}, {"z_score", g.z_score},
          {"threshold", g.threshold}, {"passed", g.passed}};
}

json to_json(const RhsEstimate& r) {
  json terms = json::array();
  for (const auto& t : r.terms) {
    terms.push_back({{"label", t.label}, {"partition", t.partition}, {"k", t.k}, {"multiplicity", t.multiplicity},
                     {"value", to_json(t.value)}, {"mode", t.mode}});
  }
  return {{"total", to_json(r.total)}, {"terms", terms}, {"notes", r.notes}};
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string terms_csv(const RhsEstimate& r) {
  std::ostringstream s;
  s << "label,partition,k,multiplicity,mean,std_error,mode\n";
  for (const auto& t : r.terms) {
    s << t.label << ",\"" << t.partition << "\"," << t.k << ',' << num(t.multiplicity) << ',' << num(t.value.mean)
      << ',' << num(t.value.std_error) << ',' << t.mode << '\n';
  }
  return s.str();
}

std::string pm(const Estimate& e) {
  std::ostringstream s;
  s.precision(6);
  s << e.mean << " ± " << e.std_error;
  return s.str();
}

std::string verdict(const GateResult& g) {
  std::ostringstream s;
  s.precision(3);
  s << "z=" << g.z_score << (g.passed ? " PASS" : " FAIL");
  return s.str();
}

struct Context {
  McBudget mc;
  GateSpec gate;
  QuadratureSpec quad;
};

struct ScenarioResult {
  bool passed = true;
  json results = json::object();
  std::map<std::string, std::string> tables;
  std::vector<std::string> summary;
};

// ---------------------------------------------------------------------------
// Scenarios.

ScenarioResult run_partitions(Node& root) {
  const int n = static_cast<int>(root.integer("n", 1, 10));
  std::optional<EpsilonVector> eps;
  if (root.has("eps")) eps = read_eps(root, "eps", n);
  const auto parts = eps ? enumerate_epsilon_partitions(n, *eps) : enumerate_partitions(n);

  // group by type, coarsest first
  std::map<std::vector<int>, std::vector<const Partition*>, std::greater<>> groups;
  for (const auto& p : parts) {
    auto sizes = p.block_sizes();
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    groups[sizes].push_back(&p);
  }
  ScenarioResult out;
  json types = json::array();
  std::ostringstream csv;
  csv << "type,partition,blocks\n";
  out.summary.push_back(std::to_string(parts.size()) + " partitions of {1.." + std::to_string(n) + "}" +
                        (eps ? " admissible for ε=" + eps->to_string() : ""));
  for (const auto& [sizes, members] : groups) {
    json list = json::array();
    std::string type = members.front()->type();
    std::string line = "  " + type + " (" + std::to_string(members.size()) + "):";
    for (const auto* p : members) {
      list.push_back(p->to_string());
      line += " " + p->to_string();
      csv << type << ",\"" << p->to_string() << "\"," << p->block_count() << '\n';
    }
    types.push_back({{"type", type}, {"count", members.size()}, {"partitions", list}});
    out.summary.push_back(line);
  }
  out.results = {{"n", n}, {"count", parts.size()}, {"types", types}};
  if (eps) out.results["eps"] = eps->to_string();
  out.tables["partitions"] = csv.str();
  return out;
}

ScenarioResult run_palm(Node& root, const Context& ctx) {
  const IntensitySpec sigma = read_intensity(root.object_at("intensity"));
  const ProcessSpec f = read_process(root.object_at("process"), sigma.dim());
  const EpsilonVector eps = read_eps(root, "eps", f.arity);
  VerifyOptions o;
  o.mc = ctx.mc;
  o.quad = ctx.quad;
  o.gate = ctx.gate;
  const std::string mode = root.choice("mode", {"mc-outer", "quadrature-outer", "shared"}, "mc-outer");
  o.mode = mode == "shared" ? RhsMode::Shared : mode == "quadrature-outer" ? RhsMode::QuadratureOuter : RhsMode::McOuter;
  const std::string hook = root.choice("hook", {"none", "singletons-only", "unfiltered"}, "none");
  o.hook = hook == "singletons-only" ? ExpansionHook::SingletonsOnly
           : hook == "unfiltered"    ? ExpansionHook::Unfiltered
                                     : ExpansionHook::None;
  const auto rep = verify_identity(f, eps, sigma, o);
  ScenarioResult out;
  out.passed = rep.passed();
  out.results = {{"sigma_mass", sigma.mass()}, {"lhs", to_json(rep.lhs)}, {"rhs", to_json(rep.rhs)},
                 {"gate", to_json(rep.gate)}};
  out.tables["terms"] = terms_csv(rep.rhs);
  out.summary.push_back("lhs " + pm(rep.lhs) + "  rhs " + pm(rep.rhs.total) + "  " + verdict(rep.gate));
  for (const auto& t : rep.rhs.terms) out.summary.push_back("  k=" + std::to_string(t.k) + " " + t.partition + "  " + pm(t.value));
  return out;
}

MomentSpec read_moment_spec(Node& n, int dim) {
  MomentSpec spec;
  for (auto& fnode : n.array("factors")) {
    MomentFactor mf;
    mf.process = read_process(fnode.object_at("process"), dim);
    mf.power = static_cast<int>(fnode.integer_or("power", 1, 1, 8));
    mf.eps = read_eps(fnode, "eps", mf.process.arity);
    fnode.done();
    spec.factors.push_back(std::move(mf));
  }
  if (spec.factors.empty()) throw ConfigError(n.path() + ".factors", "needs at least one factor");
  if (auto w = n.object_maybe("weight")) {
    spec.weight = read_process(*w, dim);
    if (spec.weight->arity != 0) throw ConfigError(w->path() + ".arity", "weight must be a 0-process");
  }
  return spec;
}

ScenarioResult run_moments(Node& root, const Context& ctx, const Overrides& ov) {
  const IntensitySpec sigma = read_intensity(root.object_at("intensity"));
  MomentSpec spec;
  if (ov.moment_spec) {
    if (root.has("factors")) throw ConfigError("$.factors", "given both in the config and via --spec");
    Node s(*ov.moment_spec, "spec");
    if (!ov.moment_spec->is_object()) throw ConfigError("spec", "expected an object");
    if (s.integer("schema_version", 1, 1000) != kSchemaVersion) throw ConfigError("spec.schema_version", "unsupported");
    spec = read_moment_spec(s, sigma.dim());
    s.done();
  } else {
    spec = read_moment_spec(root, sigma.dim());
  }
  MomentOptions o;
  o.mc = ctx.mc;
  o.quad = ctx.quad;
  o.gate = ctx.gate;
  const std::string mode = root.choice("mode", {"mc-outer", "quadrature-outer", "shared"}, "mc-outer");
  o.mode = mode == "shared" ? RhsMode::Shared : mode == "quadrature-outer" ? RhsMode::QuadratureOuter : RhsMode::McOuter;
  o.symmetrize = root.boolean_or("symmetrize", false);
  const std::string check = root.choice("check", {"expansion", "second-moment-groups", "mixed-second-moment"}, "expansion");

  ScenarioResult out;
  if (check == "expansion") {
    const auto rep = guarded("$.factors", [&] { return evaluate_moment(spec, sigma, o); });
    out.passed = rep.passed();
    out.results = {{"lhs", to_json(rep.lhs)}, {"rhs", to_json(rep.rhs)}, {"gate", to_json(rep.gate)}};
    out.tables["terms"] = terms_csv(rep.rhs);
    out.summary.push_back("lhs " + pm(rep.lhs) + "  rhs " + pm(rep.rhs.total) + "  " + verdict(rep.gate) + "  (" +
                          std::to_string(rep.rhs.terms.size()) + " terms)");
    return out;
  }
  if (spec.factors.size() != 1 || spec.weight) {
    throw ConfigError("$.check", check + " needs exactly one factor and no weight");
  }
  const auto& fac = spec.factors.front();
  if (check == "second-moment-groups") {
    if (fac.process.arity != 2 || fac.power != 2 || fac.eps != EpsilonVector{1, 1}) {
      throw ConfigError("$.check", "second-moment-groups needs a 2-process, power 2, eps \"11\"");
    }
    // both sides on the same shared draws
    o.mode = RhsMode::Shared;
    o.symmetrize = true;
    const auto groups = second_moment_2process_explicit(fac.process, sigma, o);
    // same streams as the explicit evaluator
    const RhsOptions ro{RhsMode::Shared, o.scenario, true};
    const auto generic = estimate_rhs(expand_moment_terms(spec), sigma, o.mc, o.quad, ro);
    const double diff = std::abs(groups.total.mean - generic.total.mean);
    const double tol = 1e-12 * std::max(1.0, std::abs(generic.total.mean));
    double mult = 0.0;
    for (const auto& t : groups.terms) mult += t.multiplicity;
    out.passed = diff <= tol && mult == 15.0;
    out.results = {{"explicit", to_json(groups)}, {"generic", to_json(generic)}, {"abs_difference", diff},
                   {"tolerance", tol}, {"multiplicity_sum", mult}};
    out.tables["groups"] = terms_csv(groups);
    out.tables["terms"] = terms_csv(generic);
    out.summary.push_back("groups " + pm(groups.total) + "  generic " + pm(generic.total) + "  |diff|=" + num(diff) +
                          (out.passed ? " PASS" : " FAIL"));
    return out;
  }
  if (fac.process.arity != 2 || fac.power != 2 || fac.eps != EpsilonVector{0, 1}) {
    throw ConfigError("$.check", "mixed-second-moment needs a 2-process, power 2, eps \"01\"");
  }
  const auto rep = second_moment_mixed_explicit(fac.process, sigma, o);
  out.passed = rep.passed();
  out.results = {{"lhs_sigma_outer", to_json(rep.lhs_sigma_outer)}, {"lhs_omega_outer", to_json(rep.lhs_omega_outer)},
                 {"rhs_explicit", to_json(rep.rhs_explicit)},       {"rhs_generic", to_json(rep.rhs_generic)},
                 {"order_gate", to_json(rep.order_gate)},           {"expansion_gate", to_json(rep.expansion_gate)},
                 {"generic_gate", to_json(rep.generic_gate)}};
  out.tables["terms"] = terms_csv(rep.rhs_explicit);
  out.summary.push_back("σ⊗ω " + pm(rep.lhs_sigma_outer) + "  ω⊗σ " + pm(rep.lhs_omega_outer) + "  " +
                        verdict(rep.order_gate));
  out.summary.push_back("two-term " + pm(rep.rhs_explicit.total) + "  " + verdict(rep.expansion_gate));
  out.summary.push_back("generic " + pm(rep.rhs_generic.total) + "  " + verdict(rep.generic_gate));
  return out;
}

ScenarioResult run_oracle(Node& root, const Context& ctx) {
  const IntensitySpec sigma = read_intensity(root.object_at("intensity"));
  SeriesSpec spec;
  spec.g = read_process(root.object_at("process"), sigma.dim());
  if (spec.g.arity != 0) throw ConfigError("$.process.arity", "the oracle takes a 0-process");
  if (root.has("n_max")) spec.n_max = static_cast<int>(root.integer("n_max", 0, 10000));
  spec.bound_hint = root.number_maybe("bound_hint");
  const auto series = expectation_series(spec, sigma, ctx.quad);
  if (!series.complete) throw CapExceededError("oracle series stopped after order " + std::to_string(series.last_order) + ": " + series.note);
  const Estimate mc = aggregate(checked_samples(ctx.mc.replicates, ctx.mc.workers, [&](std::size_t r) {
    Stream s(ctx.mc.seed, "oracle/mc", r);
    return spec.g(sample_configuration(sigma, s));
  }));
  GateSpec g = ctx.gate;
  if (series.truncation_bound) g.abs_floor = g.abs_floor.value_or(0.0) + *series.truncation_bound;
  const auto gr = gate(mc, Estimate::exact(series.value), g);
  ScenarioResult out;
  out.passed = gr.passed;
  out.results = {{"series", {{"value", series.value},
                             {"n_max", series.n_max},
                             {"last_order", series.last_order},
                             {"complete", series.complete},
                             {"order_terms", series.order_terms},
                             {"note", series.note}}},
                 {"monte_carlo", to_json(mc)},
                 {"gate", to_json(gr)}};
  out.results["series"]["truncation_bound"] = series.truncation_bound ? json(*series.truncation_bound) : json(nullptr);
  std::ostringstream csv;
  csv << "order,term\n";
  for (std::size_t n = 0; n < series.order_terms.size(); ++n) csv << n << ',' << num(series.order_terms[n]) << '\n';
  out.tables["orders"] = csv.str();
  out.summary.push_back("series " + num(series.value) + "  mc " + pm(mc) + "  " + verdict(gr));
  return out;
}

LevyOptions levy_options(Node& root, const Context& ctx, int dim) {
  LevyOptions o;
  o.mc = ctx.mc;
  o.gate = ctx.gate;
  o.z_points = static_cast<std::size_t>(root.integer_or("z_points", 0, 0, 1 << 16));
  if (root.has("drift")) o.drift = root.point("drift", dim);
  if (root.has("start")) o.start = root.point("start", dim);
  return o;
}

ScenarioResult levy_result(const LevyReport& rep) {
  ScenarioResult out;
  out.passed = rep.passed();
  out.results = {{"lhs", to_json(rep.lhs)}, {"rhs", to_json(rep.rhs)}, {"gate", to_json(rep.gate)}, {"notes", rep.notes}};
  out.summary.push_back("lhs " + pm(rep.lhs) + "  rhs " + pm(rep.rhs) + "  " + verdict(rep.gate));
  if (rep.semigroup) {
    out.results["semigroup"] = {{"value", *rep.semigroup}, {"gate", to_json(*rep.semigroup_gate)}};
    out.summary.push_back("semigroup " + num(*rep.semigroup) + "  " + verdict(*rep.semigroup_gate));
  }
  return out;
}

double positive(Node& root, const std::string& key) {
  const double v = root.number(key);
  if (!(v > 0.0)) throw ConfigError(root.path() + "." + key, "must be positive");
  return v;
}

ScenarioResult run_levy_system(Node& root, const Context& ctx) {
  const LevyMeasureSpec levy = read_levy(root.object_at("levy"));
  const double horizon = positive(root, "horizon");
  const JumpFunctional f = read_functional(root.object_at("functional"), levy.dim());
  LevyOptions o = levy_options(root, ctx, levy.dim());
  GeneralLevyOptions g;
  g.semigroup = root.boolean_or("semigroup", false);
  g.semigroup_cells = static_cast<std::size_t>(root.integer_or("semigroup_cells", static_cast<std::int64_t>(g.semigroup_cells), 4, 4096));
  std::optional<TimeFactor> factor;
  if (auto n = root.object_maybe("factor")) factor = read_factor(*n);
  const bool paths = root.boolean_or("paths_csv", false);

  LevyReport rep;
  if (factor) {
    if (root.has("eps")) throw ConfigError("$.eps", "not used together with factor");
    if (f.arity != 1) throw ConfigError("$.functional.arity", "factor needs arity 1");
    rep = predictable_factor_check(*factor, f, levy, horizon, o);
  } else if (root.has("eps")) {
    const EpsilonVector eps = read_eps(root, "eps", f.arity);
    rep = levy_system_general(f, eps, levy, horizon, o, g);
  } else if (f.arity == 1 && !g.semigroup) {
    rep = levy_system_simple(f, levy, horizon, o);
  } else {
    rep = levy_system_general(f, EpsilonVector::ones(static_cast<std::size_t>(f.arity)), levy, horizon, o, g);
  }
  ScenarioResult out = levy_result(rep);
  out.results["nu_mass"] = levy.mass();
  if (paths) out.tables["paths"] = path_summary_csv(levy, horizon, o);
  return out;
}

ScenarioResult run_exit_law(Node& root, const Context& ctx) {
  const LevyMeasureSpec levy = read_levy(root.object_at("levy"));
  ExitLawSpec s;
  s.domain = read_window(root.object_at("domain"));
  s.a = read_window(root.object_at("a"));
  s.b = read_window(root.object_at("b"));
  const auto interval = root.numbers("interval");
  if (interval.size() != 2) throw ConfigError("$.interval", "expected [lo, hi]");
  s.i_lo = interval[0];
  s.i_hi = interval[1];
  s.time_cells = static_cast<std::size_t>(root.integer_or("time_cells", 64, 1, 1 << 16));
  s.space_cells = static_cast<std::size_t>(root.integer_or("space_cells", 129, 1, 1 << 12));
  LevyOptions o = levy_options(root, ctx, levy.dim());
  const auto rep = guarded("$", [&] { return exit_law_check(levy, s, o); });
  ScenarioResult out;
  out.passed = rep.passed();
  out.results = {{"lhs", to_json(rep.lhs)},           {"rhs", to_json(rep.rhs)},   {"rhs_exact", to_json(rep.rhs_exact)},
                 {"grid_bias", rep.grid_bias},        {"survival", to_json(rep.survival)},
                 {"gate", to_json(rep.gate)}};
  out.summary.push_back("lhs " + pm(rep.lhs) + "  rhs(grid) " + pm(rep.rhs) + "  " + verdict(rep.gate));
  out.summary.push_back("rhs(exact) " + pm(rep.rhs_exact) + "  grid bias " + num(rep.grid_bias) + "  P(no exit) " +
                        pm(rep.survival));
  return out;
}

ScenarioResult run_martingale(Node& root, const Context& ctx) {
  const LevyMeasureSpec levy = read_levy(root.object_at("levy"));
  const double t = positive(root, "t");
  const JumpFunctional f = read_functional(root.object_at("functional"), levy.dim());
  if (f.arity != 1) throw ConfigError("$.functional.arity", "martingale checks need arity 1");
  LevyOptions o = levy_options(root, ctx, levy.dim());
  const auto rep = martingale_checks(f, levy, t, o);
  ScenarioResult out;
  out.passed = rep.passed();
  json inc = json::array();
  std::ostringstream csv;
  csv << "prefix,mean,std_error,z_score,passed\n";
  for (const auto& i : rep.increments) {
    inc.push_back({{"prefix", i.name}, {"value", to_json(i.value)}, {"gate", to_json(i.gate)}});
    csv << i.name << ',' << num(i.value.mean) << ',' << num(i.value.std_error) << ',' << num(i.gate.z_score) << ','
        << (i.gate.passed ? "true" : "false") << '\n';
  }
  out.results = {{"mean", to_json(rep.mean)},
                 {"second_moment", to_json(rep.second_moment)},
                 {"bracket", to_json(rep.bracket)},
                 {"predictable", to_json(rep.predictable)},
                 {"mean_gate", to_json(rep.mean_gate)},
                 {"second_moment_gate", to_json(rep.second_moment_gate)},
                 {"bracket_gate", to_json(rep.bracket_gate)},
                 {"increments", inc}};
  out.tables["increments"] = csv.str();
  out.summary.push_back("E M " + pm(rep.mean) + "  " + verdict(rep.mean_gate));
  out.summary.push_back("E M^2 " + pm(rep.second_moment) + "  E<M> " + pm(rep.predictable) + "  " +
                        verdict(rep.second_moment_gate));
  out.summary.push_back("E[M] " + pm(rep.bracket) + "  " + verdict(rep.bracket_gate));
  return out;
}

}  // namespace

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

RunOutcome run_config(const json& config, const Overrides& ov) {
  if (!config.is_object()) throw ConfigError("$", "config must be a JSON object");
  Node root(config, "$");
  const auto version = root.integer("schema_version", 0, 1000000);
  if (version != kSchemaVersion) {
    throw ConfigError("$.schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                              std::to_string(kSchemaVersion) + ")");
  }
  const std::string scenario = root.choice("scenario", scenario_kinds(), "");
  if (scenario.empty()) throw ConfigError("$.scenario", "missing required field");

  Context ctx;
  ctx.mc.seed = static_cast<std::uint64_t>(root.integer_or("seed", 1, 0, INT64_MAX));
  ctx.mc.replicates = static_cast<std::size_t>(root.integer_or("replicates", 10000, 2, INT64_MAX));
  ctx.mc.workers = static_cast<unsigned>(root.integer_or("workers", default_workers(), 1, 1024));
  if (ov.seed) ctx.mc.seed = *ov.seed;
  if (ov.replicates) ctx.mc.replicates = *ov.replicates;
  if (ov.workers) ctx.mc.workers = *ov.workers;
  if (ctx.mc.replicates < 2) throw ConfigError("--replicates", "must be >= 2");
  ctx.gate = read_gate(root);
  ctx.quad = read_quadrature(root);
  root.accept({"output"});
  if (root.has("output") && !config.at("output").is_string()) throw ConfigError("$.output", "expected a string");

  const auto start = std::chrono::steady_clock::now();
  ScenarioResult res;
  if (scenario == "partitions") {
    res = run_partitions(root);
  } else if (scenario == "verify-mecke-palm") {
    res = run_palm(root, ctx);
  } else if (scenario == "moments") {
    res = run_moments(root, ctx, ov);
  } else if (scenario == "oracle") {
    res = run_oracle(root, ctx);
  } else if (scenario == "levy-system") {
    res = run_levy_system(root, ctx);
  } else if (scenario == "exit-law") {
    res = run_exit_law(root, ctx);
  } else {
    res = run_martingale(root, ctx);
  }
  root.done();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  // echo without the worker count, which lives in "run"
  json echo = config;
  echo.erase("workers");
  echo["seed"] = ctx.mc.seed;
  echo["replicates"] = ctx.mc.replicates;
  if (ov.moment_spec) echo["spec"] = *ov.moment_spec;

  RunOutcome out;
  out.exit_code = res.passed ? kPass : kGateFailed;
  out.report = {{"schema_version", kSchemaVersion},
                {"scenario", scenario},
                {"seed", ctx.mc.seed},
                {"replicates", ctx.mc.replicates},
                {"config", echo},
                {"passed", res.passed},
                {"results", res.results},
                {"tables", json::array()},
                {"run", {{"wall_time_s", wall}, {"workers", ctx.mc.workers}}}};
  for (const auto& [name, csv] : res.tables) out.report["tables"].push_back(name);
  out.tables = std::move(res.tables);
  out.summary = std::move(res.summary);
  out.summary.push_back(std::string(res.passed ? "PASS " : "FAIL ") + scenario);
  return out;
}

json reproducible_part(const json& report) {
  json out = report;
  out.erase("run");
  return out;
}

void write_outputs(const RunOutcome& outcome, const std::string& report_path) {
  namespace fs = std::filesystem;
  const fs::path path(report_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(path);
    if (!out) throw ConfigError("--report", "cannot write " + report_path);
    out << outcome.report.dump(2) << '\n';
  }
  for (const auto& [name, csv] : outcome.tables) {
    fs::path table = path;
    table.replace_extension();
    table += "." + name + ".csv";
    std::ofstream out(table);
    if (!out) throw ConfigError("--report", "cannot write " + table.string());
    out << csv;
  }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Poisson functional and Lévy system verification"};
  app.require_subcommand(1);
  std::string config_path, report_path, spec_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<unsigned> workers;
  int partitions_n = 0;
  std::string partitions_eps;
  std::vector<CLI::App*> subs;
  for (const auto& kind : scenario_kinds()) {
    auto* sub = app.add_subcommand(kind, "run the " + kind + " scenario");
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--replicates", replicates, "Monte Carlo replicates (overrides the config)");
    sub->add_option("--report", report_path, "write the JSON report (and CSV tables) here; - prints it");
    sub->add_option("--workers", workers, "worker threads (default: PPV_WORKERS or all cores)")
        ->check(CLI::Range(1u, 1024u));
    if (kind == "moments") sub->add_option("--spec", spec_path, "moment factor spec (JSON)")->check(CLI::ExistingFile);
    if (kind == "partitions") {
      sub->add_option("--n", partitions_n, "ground set size (without a config)")->check(CLI::Range(1, 10));
      sub->add_option("--eps", partitions_eps, "keep only ε-admissible partitions");
    }
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kPass;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kConfigError;
  }
  std::string kind;
  for (auto* s : subs) {
    if (s->parsed()) kind = s->get_name();
  }

  try {
    json config;
    if (!config_path.empty()) {
      config = load_json(config_path);
    } else if (kind == "partitions" && partitions_n > 0) {
      config = {{"schema_version", kSchemaVersion}, {"scenario", "partitions"}, {"n", partitions_n}};
      if (!partitions_eps.empty()) config["eps"] = partitions_eps;
    } else {
      throw ConfigError("--config", "required");
    }
    if (!config.is_object()) throw ConfigError("$", "config must be a JSON object");
    if (!config.contains("scenario")) config["scenario"] = kind;
    if (config["scenario"] != kind) {
      throw ConfigError("$.scenario", "config is for '" + config["scenario"].dump() + "', not '" + kind + "'");
    }
    Overrides ov;
    ov.seed = seed;
    ov.replicates = replicates;
    ov.workers = workers;
    if (!spec_path.empty()) ov.moment_spec = load_json(spec_path);
    const RunOutcome outcome = run_config(config, ov);
    std::string target = report_path;
    if (target.empty() && config.contains("output")) target = config["output"].get<std::string>();
    for (const auto& line : outcome.summary) out << line << '\n';
    if (target == "-") {
      out << outcome.report.dump(2) << '\n';
    } else if (!target.empty()) {
      write_outputs(outcome, target);
    }
    return outcome.exit_code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const CapExceededError& e) {
    err << "numeric failure (budget): " << e.what() << '\n';
    return kNumericError;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  }
}

}  // namespace ppv::cli
