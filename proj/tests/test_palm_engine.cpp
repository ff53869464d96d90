#include "doctest.h"
#include "ppv/palm_engine.hpp"

#include <cmath>

using namespace ppv;

namespace {

const IntensitySpec& unit_box() {
  static const IntensitySpec s = constant_intensity(Window({0.0}, {1.0}), 1.0);
  return s;
}

const IntensitySpec& sloped() {
  static const IntensitySpec s = linear_intensity(Window({0.0}, {2.0}), 0.5, std::vector<double>{0.4});
  return s;
}

McBudget budget(std::size_t n, std::uint64_t seed = 7) { return {.replicates = n, .seed = seed, .workers = 1}; }

bool within(const Estimate& e, double target, double z = 4.0) {
  return std::abs(e.mean - target) <= z * e.std_error + 1e-12 * std::max(1.0, std::abs(target));
}

}  // namespace

TEST_CASE("expand_rhs term lists") {
  CHECK(expand_rhs(const_process(2), {1, 1}).size() == 2);
  CHECK(expand_rhs(const_process(2), {1, 0}).size() == 1);
  CHECK(expand_rhs(const_process(4), EpsilonVector::ones(4)).size() == 15);
  for (int n = 1; n <= 4; ++n) {
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<std::uint8_t> bits;
      for (int i = 0; i < n; ++i) bits.push_back((mask >> i) & 1u);
      const EpsilonVector e(bits);
      const auto terms = expand_rhs(const_process(n), e);
      CHECK(terms.size() == enumerate_epsilon_partitions(n, e).size());
      for (const auto& t : terms) CHECK(t.k == t.partition.block_count());
    }
  }
  const auto two = expand_rhs(const_process(2), {1, 1});
  CHECK(two[0].k == 1);
  CHECK(two[1].k == 2);
  CHECK_THROWS_AS(expand_rhs(const_process(2), {1}), std::invalid_argument);
  CHECK(expand_rhs(const_process(3), {1, 1, 1}, ExpansionHook::SingletonsOnly).size() == 1);
  CHECK(expand_rhs(const_process(3), {1, 0, 0}, ExpansionHook::Unfiltered).size() == 5);
}

TEST_CASE("estimate_lhs") {
  const auto& s = sloped();
  SUBCASE("counting") {
    const auto e = estimate_lhs(const_process(1), {1}, s, budget(20000));
    CHECK(within(e, s.mass()));
  }
  SUBCASE("σ-coordinate is deterministic") {
    const auto e = estimate_lhs(const_process(1), {0}, s, budget(100));
    CHECK(e.mean == doctest::Approx(s.mass()).epsilon(1e-12));
    CHECK(e.std_error < 1e-12);
  }
  SUBCASE("diagonal indicator counts atoms") {
    const auto e = estimate_lhs(diag_indicator_process(2), {1, 1}, s, budget(20000));
    CHECK(within(e, s.mass()));
  }
  SUBCASE("non-finite values name the replicate") {
    ProcessSpec bad{1, [](PointSpan, const Configuration& w) { return w.size() > 2 ? NAN : 1.0; }};
    CHECK_THROWS_WITH_AS(estimate_lhs(bad, {1}, s, budget(1000)), doctest::Contains("replicate"), NumericError);
  }
  SUBCASE("worker count does not change the result") {
    const auto f = count_weighted_process(2, Window({0.0}, {1.0}), 0.5);
    const auto a = estimate_lhs(f, {1, 0}, s, {.replicates = 3000, .seed = 3, .workers = 1});
    const auto b = estimate_lhs(f, {1, 0}, s, {.replicates = 3000, .seed = 3, .workers = 4});
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
  }
}

TEST_CASE("estimate_rhs") {
  const auto& s = unit_box();
  SUBCASE("diagonal indicator: k=1 term carries the mass, k=2 term vanishes") {
    const auto r = estimate_rhs(expand_rhs(diag_indicator_process(2), {1, 1}), s, budget(2000));
    REQUIRE(r.terms.size() == 2);
    CHECK(r.terms[0].value.mean == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.terms[1].value.mean == 0.0);
    CHECK(r.total.mean == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("deterministic integrand gives the σ-integral") {
    const auto& t = sloped();
    const auto f = coordinate_product_process(1);  // φ(x) = x
    const double exact = 0.5 * 2.0 + 0.4 * 8.0 / 3.0;  // ∫_0^2 x (0.5 + 0.4x) dx
    const auto mc = estimate_rhs(expand_rhs(f, {1}), t, budget(20000));
    CHECK(within(mc.total, exact));
    const auto q = estimate_rhs(expand_rhs(f, {1}), t, budget(10), {}, {.mode = RhsMode::QuadratureOuter});
    CHECK(q.total.mean == doctest::Approx(exact).epsilon(1e-3));
  }
  SUBCASE("exp-count closes with the generating function") {
    for (double m : {0.5, 2.0}) {
      const auto box = constant_intensity(Window({0.0}, {1.0}), m);
      const double exact = m * std::exp(-1.0) * std::exp(m * (std::exp(-1.0) - 1.0));
      const auto terms = expand_rhs(exp_count_process(1), {1});
      CHECK(within(estimate_rhs(terms, box, budget(20000)).total, exact));
      CHECK(within(estimate_rhs(terms, box, budget(400), {.points_per_axis = 8}, {.mode = RhsMode::QuadratureOuter}).total,
                   exact));
      CHECK(within(estimate_rhs(terms, box, budget(20000), {}, {.mode = RhsMode::Shared}).total, exact));
    }
  }
  SUBCASE("quadrature-outer falls back for large k·d") {
    const auto r = estimate_rhs(expand_rhs(const_process(4), EpsilonVector::ones(4)), s, budget(50), {},
                                {.mode = RhsMode::QuadratureOuter});
    CHECK_FALSE(r.notes.empty());
    CHECK(r.total.mean == doctest::Approx(15.0).epsilon(1e-12));
  }
  SUBCASE("diagonal-vanishing f: only the singleton term survives") {
    const auto f = offdiag_product_process(3, 1.0, 0.5);
    const auto r = estimate_rhs(expand_rhs(f, EpsilonVector::ones(3)), s, budget(2000));
    for (const auto& t : r.terms) {
      if (t.k < 3) CHECK(t.value.mean == 0.0);
    }
    const auto single = estimate_rhs(expand_rhs(f, EpsilonVector::ones(3), ExpansionHook::SingletonsOnly), s, budget(2000));
    CHECK(within(single.total, r.total.mean, 6.0));
  }
}

TEST_CASE("permutation equivariance of the right side") {
  const auto& s = sloped();
  ProcessSpec asym{3, [](PointSpan x, const Configuration& w) {
                     return (1.0 + x[0][0]) * (2.0 - 0.5 * x[1][0]) * std::exp(-0.3 * x[2][0]) *
                            (1.0 + static_cast<double>(w.size()));
                   }};
  const EpsilonVector e{1, 0, 1};
  const int perm[] = {2, 0, 1};
  // g(x_0, x_1, x_2) = asym(x_perm^{-1}) so that g with permuted ε is the same integral
  ProcessSpec g{3, [&](PointSpan x, const Configuration& w) {
                  PointList y(3);
                  for (int i = 0; i < 3; ++i) y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(perm[i])];
                  return asym(y, w);
                }};
  std::vector<std::uint8_t> pe(3);
  for (int i = 0; i < 3; ++i) pe[static_cast<std::size_t>(perm[i])] = e.bits()[static_cast<std::size_t>(i)];
  const auto a = estimate_rhs(expand_rhs(asym, e), s, budget(20000, 11));
  const auto b = estimate_rhs(expand_rhs(g, EpsilonVector(pe)), s, budget(20000, 12));
  CHECK(gate(a.total, b.total).passed);
}

TEST_CASE("verify_identity") {
  const auto& s = sloped();
  VerifyOptions o;
  o.mc = budget(20000);
  SUBCASE("deterministic f, every ε") {
    for (const auto& e : {EpsilonVector{1, 1}, EpsilonVector{1, 0}, EpsilonVector{0, 1}, EpsilonVector{0, 0}}) {
      const auto rep = verify_identity(coordinate_product_process(2, 1.0, 0.2), e, s, o);
      CHECK(rep.passed());
    }
  }
  SUBCASE("diagonal indicator and the singletons-only hook") {
    const auto unit = unit_box();
    const auto good = verify_identity(diag_indicator_process(2), {1, 1}, unit, o);
    CHECK(good.passed());
    o.hook = ExpansionHook::SingletonsOnly;
    const auto bad = verify_identity(diag_indicator_process(2), {1, 1}, unit, o);
    CHECK_FALSE(bad.passed());
    CHECK(bad.gate.z_score > 20.0);
  }
  SUBCASE("unfiltered hook is wrong when ε has zeros") {
    o.hook = ExpansionHook::Unfiltered;
    const auto bad = verify_identity(const_process(2), {1, 0}, s, o);
    CHECK_FALSE(bad.passed());
  }
  SUBCASE("count-weighted process against its hand expansion") {
    const Window b({0.0}, {1.0});
    const auto f = count_weighted_process(1, b, 0.0);  // φ(x) ω(B) with φ(x) = x
    const auto rep = verify_identity(f, {1}, s, o);
    CHECK(rep.passed());
    // E Σ x ω(B) = ∫_B φ dσ + σ(B) ∫ φ dσ
    const double phi_b = 0.5 * 0.5 + 0.4 / 3.0;
    const double phi_all = 0.5 * 2.0 + 0.4 * 8.0 / 3.0;
    const double sigma_b = 0.5 + 0.2;
    CHECK(within(rep.rhs.total, phi_b + sigma_b * phi_all));
    CHECK(within(rep.lhs, phi_b + sigma_b * phi_all));
  }
  SUBCASE("quadrature-outer mode agrees") {
    o.mc = budget(300);
    o.mode = RhsMode::QuadratureOuter;
    o.quad.points_per_axis = 16;
    const auto lhs_heavy = estimate_lhs(count_weighted_process(2, Window({0.5}, {1.5}), 0.1), {1, 1}, s, budget(20000));
    const auto rhs = estimate_rhs(expand_rhs(count_weighted_process(2, Window({0.5}, {1.5}), 0.1), {1, 1}), s, o.mc,
                                  o.quad, {.mode = RhsMode::QuadratureOuter});
    CHECK(gate(lhs_heavy, rhs.total, {.rel_tol = 0.01}).passed);
  }
}
