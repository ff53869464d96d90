#include "ppv/moment_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ppv {

namespace {

struct FactorGroup {
  int alpha;
  std::vector<int> flat;
};

using Pattern = std::array<int, 4>;

// f(v[p0], v[p1]) f(v[p2], v[p3]) over variables x, y, z, t.
struct GroupDef {
  Pattern pattern;
  int k;
  double multiplicity;
  const char* label;
};

constexpr std::array<GroupDef, 11> kGroups{{
    {{0, 0, 0, 0}, 1, 1.0, "f(x,x)f(x,x)"},
    {{0, 0, 0, 1}, 2, 2.0, "f(x,x)f(x,y)"},
    {{0, 0, 1, 0}, 2, 2.0, "f(x,x)f(y,x)"},
    {{0, 0, 1, 1}, 2, 1.0, "f(x,x)f(y,y)"},
    {{0, 1, 0, 1}, 2, 1.0, "f(x,y)f(x,y)"},
    {{0, 1, 1, 0}, 2, 1.0, "f(x,y)f(y,x)"},
    {{0, 0, 1, 2}, 3, 2.0, "f(x,x)f(y,z)"},
    {{0, 1, 2, 0}, 3, 2.0, "f(x,y)f(z,x)"},
    {{0, 1, 0, 2}, 3, 1.0, "f(x,y)f(x,z)"},
    {{1, 0, 2, 0}, 3, 1.0, "f(y,x)f(z,x)"},
    {{0, 1, 2, 3}, 4, 1.0, "f(x,y)f(z,t)"},
}};

// Relabel by first occurrence.
Pattern first_occurrence(const Pattern& p) {
  Pattern out{};
  std::array<int, 4> map{-1, -1, -1, -1};
  int next = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    auto& m = map[static_cast<std::size_t>(p[i])];
    if (m < 0) m = next++;
    out[i] = m;
  }
  return out;
}

// Canonical form under relabelling and swapping the two factors.
Pattern canonical(const Pattern& p) {
  const Pattern a = first_occurrence(p);
  const Pattern b = first_occurrence({p[2], p[3], p[0], p[1]});
  return std::min(a, b);
}

}  // namespace

LabeledIndex moment_index(const MomentSpec& spec) {
  std::vector<int> arities, powers;
  for (const auto& f : spec.factors) {
    arities.push_back(f.process.arity);
    powers.push_back(f.power);
  }
  return LabeledIndex(arities, powers);
}

std::vector<MomentTerm> expand_moment_terms(const MomentSpec& spec) {
  if (spec.factors.empty()) throw std::invalid_argument("moment spec: at least one factor is required");
  std::vector<EpsilonVector> eps;
  for (std::size_t a = 0; a < spec.factors.size(); ++a) {
    const auto& f = spec.factors[a];
    if (f.process.arity < 1) throw std::invalid_argument("moment spec: factor " + std::to_string(a) + " must have arity >= 1");
    if (f.power < 1) throw std::invalid_argument("moment spec: factor " + std::to_string(a) + " power must be >= 1");
    if (static_cast<int>(f.eps.size()) != f.process.arity) {
      throw std::invalid_argument("moment spec: factor " + std::to_string(a) + " epsilon length does not match arity");
    }
    eps.push_back(f.eps);
  }
  const LabeledIndex index = moment_index(spec);
  if (index.size() > kMaxPartitionSize) {
    throw CapExceededError("moment spec: linearised index has " + std::to_string(index.size()) +
                           " coordinates; the partition cap is " + std::to_string(kMaxPartitionSize));
  }
  const auto lp = enumerate_labeled_partitions(index, eps);

  std::vector<FactorGroup> groups;
  for (int a = 0; a < index.factor_count(); ++a) {
    for (int g = 0; g < index.power(a); ++g) groups.push_back({a, index.group(a, g)});
  }
  std::vector<ProcessSpec> processes;
  for (const auto& f : spec.factors) processes.push_back(f.process);

  std::vector<MomentTerm> out;
  out.reserve(lp.partitions.size());
  for (const auto& p : lp.partitions) {
    MomentTerm t;
    t.partition = p;
    t.k = p.block_count();
    t.block_eps = block_epsilon(p, lp.flat_eps);
    t.label = p.to_string();
    std::vector<int> block(static_cast<std::size_t>(p.size()));
    for (int s = 0; s < p.size(); ++s) block[static_cast<std::size_t>(s)] = p.block_of(s);
    t.integrand = [processes, weight = spec.weight, groups, block, be = t.block_eps](PointSpan y,
                                                                                     const Configuration& omega) {
      PointList aug;
      for (std::size_t j = 0; j < be.size(); ++j) {
        if (be[j]) aug.push_back(y[j]);
      }
      const Configuration w = omega.with_points(aug);
      double v = weight ? (*weight)(w) : 1.0;
      PointList x;
      for (const auto& g : groups) {
        if (v == 0.0) break;
        x.clear();
        for (int s : g.flat) x.push_back(y[static_cast<std::size_t>(block[static_cast<std::size_t>(s)])]);
        v *= processes[static_cast<std::size_t>(g.alpha)](x, w);
      }
      return v;
    };
    out.push_back(std::move(t));
  }
  return out;
}

Estimate estimate_moment_lhs(const MomentSpec& spec, const IntensitySpec& intensity, const MomentOptions& options,
                             NestOrder order) {
  const std::string id = options.scenario + "/lhs";
  const auto samples = checked_samples(options.mc.replicates, options.mc.workers, [&](std::size_t r) {
    Stream stream(options.mc.seed, id, r);
    const Configuration omega = sample_configuration(intensity, stream);
    double v = spec.weight ? (*spec.weight)(omega) : 1.0;
    for (const auto& f : spec.factors) {
      if (v == 0.0) break;
      const double i = mixed_multiple_integral(f.process, omega, f.eps, intensity, options.quad, order);
      v *= std::pow(i, f.power);
    }
    return v;
  });
  return aggregate(samples);
}

VerificationReport evaluate_moment(const MomentSpec& spec, const IntensitySpec& intensity,
                                   const MomentOptions& options) {
  const auto terms = expand_moment_terms(spec);
  VerificationReport rep;
  rep.lhs = estimate_moment_lhs(spec, intensity, options);
  rep.rhs = estimate_rhs(terms, intensity, options.mc, options.quad,
                         {.mode = options.mode, .scenario = options.scenario, .symmetrize = options.symmetrize});
  rep.gate_spec = options.gate;
  rep.gate = gate(rep.lhs, rep.rhs.total, options.gate);
  return rep;
}

std::vector<ExpansionTerm> second_moment_groups(const ProcessSpec& f) {
  if (f.arity != 2) throw std::invalid_argument("second moment: f must be a 2-process");
  std::vector<ExpansionTerm> out;
  for (const auto& g : kGroups) {
    ExpansionTerm t;
    t.partition = Partition::from_blocks([&] {
      std::vector<std::vector<int>> blocks(static_cast<std::size_t>(g.k));
      for (int i = 0; i < 4; ++i) blocks[static_cast<std::size_t>(g.pattern[static_cast<std::size_t>(i)])].push_back(i);
      return blocks;
    }());
    t.k = g.k;
    t.block_eps = EpsilonVector::ones(static_cast<std::size_t>(g.k));
    t.label = g.label;
    t.multiplicity = g.multiplicity;
    t.integrand = [f, p = g.pattern](PointSpan y, const Configuration& omega) {
      const Configuration w = omega.with_points(y);
      const PointList a{y[static_cast<std::size_t>(p[0])], y[static_cast<std::size_t>(p[1])]};
      const double fa = f(a, w);
      if (fa == 0.0) return 0.0;
      const PointList b{y[static_cast<std::size_t>(p[2])], y[static_cast<std::size_t>(p[3])]};
      return fa * f(b, w);
    };
    out.push_back(std::move(t));
  }
  return out;
}

int second_moment_group_of(const Partition& p) {
  if (p.size() != 4) throw std::invalid_argument("second_moment_group_of: partition of {1,2,3,4} expected");
  const Pattern c = canonical({p.block_of(0), p.block_of(1), p.block_of(2), p.block_of(3)});
  for (std::size_t g = 0; g < kGroups.size(); ++g) {
    if (canonical(kGroups[g].pattern) == c) return static_cast<int>(g);
  }
  throw std::logic_error("second_moment_group_of: no group matches");
}

RhsEstimate second_moment_2process_explicit(const ProcessSpec& f, const IntensitySpec& intensity,
                                            const MomentOptions& options) {
  return estimate_rhs(second_moment_groups(f), intensity, options.mc, options.quad,
                      {.mode = options.mode, .scenario = options.scenario, .symmetrize = options.symmetrize});
}

std::vector<ExpansionTerm> mixed_second_moment_terms(const ProcessSpec& f) {
  if (f.arity != 2) throw std::invalid_argument("mixed second moment: f must be a 2-process");
  std::vector<ExpansionTerm> out(2);
  out[0].partition = Partition::from_blocks({{0}, {1, 3}, {2}});
  out[0].k = 3;
  out[0].block_eps = {0, 1, 0};
  out[0].label = "f(x,y)f(z,y)";
  out[0].integrand = [f](PointSpan y, const Configuration& omega) {
    const PointList aug{y[1]};
    const Configuration w = omega.with_points(aug);
    const PointList a{y[0], y[1]}, b{y[2], y[1]};
    return f(a, w) * f(b, w);
  };
  out[1].partition = Partition::from_blocks({{0}, {1}, {2}, {3}});
  out[1].k = 4;
  out[1].block_eps = {0, 1, 0, 1};
  out[1].label = "f(x,y)f(z,t)";
  out[1].integrand = [f](PointSpan y, const Configuration& omega) {
    const PointList aug{y[1], y[3]};
    const Configuration w = omega.with_points(aug);
    const PointList a{y[0], y[1]}, b{y[2], y[3]};
    return f(a, w) * f(b, w);
  };
  return out;
}

MixedSecondMomentReport second_moment_mixed_explicit(const ProcessSpec& f, const IntensitySpec& intensity,
                                                     const MomentOptions& options) {
  const MomentSpec spec{{{f, 2, EpsilonVector{0, 1}}}, std::nullopt};
  MixedSecondMomentReport rep;
  MomentOptions o = options;
  o.scenario = options.scenario + "/sigma-outer";
  rep.lhs_sigma_outer = estimate_moment_lhs(spec, intensity, o, NestOrder::FirstOutermost);
  o.scenario = options.scenario + "/omega-outer";
  rep.lhs_omega_outer = estimate_moment_lhs(spec, intensity, o, NestOrder::LastOutermost);
  const RhsOptions ro{.mode = options.mode, .scenario = options.scenario + "/explicit", .symmetrize = options.symmetrize};
  rep.rhs_explicit = estimate_rhs(mixed_second_moment_terms(f), intensity, options.mc, options.quad, ro);
  const RhsOptions go{.mode = options.mode, .scenario = options.scenario + "/generic", .symmetrize = options.symmetrize};
  rep.rhs_generic = estimate_rhs(expand_moment_terms(spec), intensity, options.mc, options.quad, go);
  rep.order_gate = gate(rep.lhs_sigma_outer, rep.lhs_omega_outer, options.gate);
  rep.expansion_gate = gate(rep.lhs_omega_outer, rep.rhs_explicit.total, options.gate);
  rep.generic_gate = gate(rep.rhs_explicit.total, rep.rhs_generic.total, options.gate);
  return rep;
}

}  // namespace ppv
