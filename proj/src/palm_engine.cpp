#include "ppv/palm_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ppv {

namespace {

TermIntegrand partition_integrand(const ProcessSpec& f, const Partition& p, const EpsilonVector& block_eps) {
  const int n = p.size();
  std::vector<int> block(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) block[static_cast<std::size_t>(i)] = p.block_of(i);
  return [f, block, block_eps](PointSpan y, const Configuration& omega) {
    PointList x;
    x.reserve(block.size());
    for (int b : block) x.push_back(y[static_cast<std::size_t>(b)]);
    PointList aug;
    for (std::size_t j = 0; j < block_eps.size(); ++j) {
      if (block_eps[j]) aug.push_back(y[j]);
    }
    return f(x, omega.with_points(aug));
  };
}

EpsilonVector max_block_eps(const Partition& p, const EpsilonVector& eps) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(p.block_count()), 0);
  for (int i = 0; i < p.size(); ++i) {
    if (eps[static_cast<std::size_t>(i)]) out[static_cast<std::size_t>(p.block_of(i))] = 1;
  }
  return EpsilonVector(std::move(out));
}

// y_1..y_k i.i.d. from σ/σ(X), redrawn until distinct from each other and from ω.
PointList draw_distinct(const IntensitySpec& intensity, Stream& stream, int k, const Configuration& omega) {
  PointList y(static_cast<std::size_t>(k));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (auto& p : y) p = sample_sigma_point(intensity, stream);
    if (!omega.collides(y)) return y;
  }
  throw NumericError("could not draw distinct points from the intensity (atomic density?)");
}

double symmetrized(const TermIntegrand& g, PointSpan y, const Configuration& omega) {
  const std::size_t k = y.size();
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  PointList buf(k);
  double sum = 0.0;
  std::size_t count = 0;
  do {
    for (std::size_t i = 0; i < k; ++i) buf[i] = y[perm[i]];
    sum += g(buf, omega);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return sum / static_cast<double>(count);
}

TermEstimate term_header(const ExpansionTerm& t, const char* mode) {
  TermEstimate e;
  e.label = t.label;
  e.partition = t.partition.size() > 0 ? t.partition.to_string() : std::string();
  e.k = t.k;
  e.multiplicity = t.multiplicity;
  e.mode = mode;
  return e;
}

Estimate mc_outer_term(const ExpansionTerm& t, std::size_t j, const IntensitySpec& intensity, const McBudget& mc,
                       const std::string& scenario) {
  const double scale = t.multiplicity * std::pow(intensity.mass(), t.k);
  const std::string id = scenario + "/rhs/" + std::to_string(j);
  const auto samples = checked_samples(mc.replicates, mc.workers, [&](std::size_t r) {
    Stream stream(mc.seed, id, r);
    const Configuration omega = sample_configuration(intensity, stream);
    const PointList y = draw_distinct(intensity, stream, t.k, omega);
    return scale * t.integrand(y, omega);
  });
  return aggregate(samples);
}

}  // namespace

const char* to_string(RhsMode mode) {
  switch (mode) {
    case RhsMode::McOuter:
      return "mc-outer";
    case RhsMode::QuadratureOuter:
      return "quadrature-outer";
    case RhsMode::Shared:
      return "shared";
  }
  return "?";
}

std::vector<PalmTerm> expand_rhs(const ProcessSpec& f, const EpsilonVector& eps, ExpansionHook hook) {
  const int n = static_cast<int>(eps.size());
  if (f.arity != n) {
    throw std::invalid_argument("expand_rhs: arity " + std::to_string(f.arity) + " does not match epsilon length " +
                                std::to_string(n));
  }
  std::vector<Partition> parts;
  switch (hook) {
    case ExpansionHook::None:
      parts = enumerate_epsilon_partitions(n, eps);
      break;
    case ExpansionHook::SingletonsOnly:
      parts = {enumerate_partitions(n).back()};
      break;
    case ExpansionHook::Unfiltered:
      parts = enumerate_partitions(n);
      break;
  }
  std::vector<PalmTerm> out;
  out.reserve(parts.size());
  for (const auto& p : parts) {
    PalmTerm t;
    t.partition = p;
    t.k = p.block_count();
    t.block_eps = hook == ExpansionHook::Unfiltered ? max_block_eps(p, eps) : block_epsilon(p, eps);
    t.integrand = partition_integrand(f, p, t.block_eps);
    t.label = p.to_string();
    out.push_back(std::move(t));
  }
  return out;
}

Estimate estimate_lhs(const ProcessSpec& f, const EpsilonVector& eps, const IntensitySpec& intensity,
                      const McBudget& mc, const QuadratureSpec& quad, const LhsOptions& options) {
  if (f.arity != static_cast<int>(eps.size())) throw std::invalid_argument("estimate_lhs: arity does not match epsilon");
  const std::string id = options.scenario + "/lhs";
  const auto samples = checked_samples(mc.replicates, mc.workers, [&](std::size_t r) {
    Stream stream(mc.seed, id, r);
    const Configuration omega = sample_configuration(intensity, stream);
    return mixed_multiple_integral(f, omega, eps, intensity, quad, options.order);
  });
  return aggregate(samples);
}

RhsEstimate estimate_rhs(const std::vector<ExpansionTerm>& terms, const IntensitySpec& intensity, const McBudget& mc,
                         const QuadratureSpec& quad, const RhsOptions& options) {
  RhsEstimate out;
  if (terms.empty()) {
    out.total = Estimate::exact(0.0);
    return out;
  }
  const double m = intensity.mass();

  if (options.mode == RhsMode::Shared) {
    int kmax = 0;
    for (const auto& t : terms) kmax = std::max(kmax, t.k);
    const std::size_t nt = terms.size();
    std::vector<double> per_term(mc.replicates * nt);
    const std::string id = options.scenario + "/rhs/shared";
    const auto totals = checked_samples(mc.replicates, mc.workers, [&](std::size_t r) {
      Stream stream(mc.seed, id, r);
      const Configuration omega = sample_configuration(intensity, stream);
      const PointList y = draw_distinct(intensity, stream, kmax, omega);
      double total = 0.0;
      for (std::size_t j = 0; j < nt; ++j) {
        const auto& t = terms[j];
        const PointSpan yk(y.data(), static_cast<std::size_t>(t.k));
        const double g = options.symmetrize ? symmetrized(t.integrand, yk, omega) : t.integrand(yk, omega);
        const double v = t.multiplicity * std::pow(m, t.k) * g;
        per_term[r * nt + j] = v;
        total += v;
      }
      return total;
    });
    out.total = aggregate(totals);
    std::vector<double> column(mc.replicates);
    for (std::size_t j = 0; j < nt; ++j) {
      for (std::size_t r = 0; r < mc.replicates; ++r) column[r] = per_term[r * nt + j];
      auto e = term_header(terms[j], "shared");
      e.value = aggregate(column);
      out.terms.push_back(std::move(e));
    }
    return out;
  }

  std::vector<std::size_t> quad_terms, mc_terms;
  const int d = intensity.dim();
  for (std::size_t j = 0; j < terms.size(); ++j) {
    if (options.mode == RhsMode::QuadratureOuter && terms[j].k * d <= 3) {
      quad_terms.push_back(j);
    } else {
      mc_terms.push_back(j);
    }
  }
  if (options.mode == RhsMode::QuadratureOuter && !mc_terms.empty()) {
    out.notes.push_back(std::to_string(mc_terms.size()) + " term(s) with k*d > 3 evaluated in mc-outer mode");
  }
  out.terms.resize(terms.size());
  std::vector<Estimate> parts;

  if (!quad_terms.empty()) {
    const std::size_t nq = quad_terms.size();
    std::vector<double> per_term(mc.replicates * nq);
    const std::string id = options.scenario + "/rhs/quadrature";
    const auto totals = checked_samples(mc.replicates, mc.workers, [&](std::size_t r) {
      Stream stream(mc.seed, id, r);
      const Configuration omega = sample_configuration(intensity, stream);
      double total = 0.0;
      for (std::size_t q = 0; q < nq; ++q) {
        const auto& t = terms[quad_terms[q]];
        const double v = t.multiplicity * quadrature_integrate(
                                              [&](PointSpan y) { return t.integrand(y, omega); }, t.k, intensity, quad);
        per_term[r * nq + q] = v;
        total += v;
      }
      return total;
    });
    parts.push_back(aggregate(totals));
    std::vector<double> column(mc.replicates);
    for (std::size_t q = 0; q < nq; ++q) {
      for (std::size_t r = 0; r < mc.replicates; ++r) column[r] = per_term[r * nq + q];
      auto e = term_header(terms[quad_terms[q]], "quadrature-outer");
      e.value = aggregate(column);
      out.terms[quad_terms[q]] = std::move(e);
    }
  }
  for (std::size_t j : mc_terms) {
    auto e = term_header(terms[j], "mc-outer");
    e.value = mc_outer_term(terms[j], j, intensity, mc, options.scenario);
    parts.push_back(e.value);
    out.terms[j] = std::move(e);
  }
  out.total = sum_independent(parts);
  return out;
}

VerificationReport verify_identity(const ProcessSpec& f, const EpsilonVector& eps, const IntensitySpec& intensity,
                                   const VerifyOptions& options) {
  VerificationReport rep;
  rep.lhs = estimate_lhs(f, eps, intensity, options.mc, options.quad, {.scenario = options.scenario});
  const auto terms = expand_rhs(f, eps, options.hook);
  rep.rhs = estimate_rhs(terms, intensity, options.mc, options.quad,
                         {.mode = options.mode, .scenario = options.scenario});
  rep.gate_spec = options.gate;
  rep.gate = gate(rep.lhs, rep.rhs.total, options.gate);
  return rep;
}

}  // namespace ppv
