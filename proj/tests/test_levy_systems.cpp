#include "doctest.h"
#include "ppv/levy_systems.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include <algorithm>
#include <cmath>

using namespace ppv;

namespace {

McBudget budget(std::size_t n, std::uint64_t seed = 5) { return {.replicates = n, .seed = seed, .workers = 1}; }

bool within(const Estimate& e, double target, double z = 4.0) {
  return std::abs(e.mean - target) <= z * e.std_error + 1e-9 * std::max(1.0, std::abs(target));
}

// c on [-2, 2] minus (-1/16, 1/16): |ν| = c (4 - 1/8)
constexpr double kC = 0.5;
constexpr double kMass = kC * (4.0 - 0.125);
LevyMeasureSpec nu1() { return uniform_levy(1, 2.0, kC, 0.0625); }
// ν(|z| > a) for a in [1/16, 2]
double tail_mass(double a) { return kC * 2.0 * (2.0 - a); }

Window interval(double lo, double hi) { return Window::cube(1, lo, hi); }

double ks_exp(std::vector<double> xs, double rate) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = 1.0 - std::exp(-rate * xs[i]);
    d = std::max({d, std::abs(cdf - i / n), std::abs((i + 1) / n - cdf)});
  }
  return d;
}

}  // namespace

TEST_CASE("simulate_path") {
  SUBCASE("mean jump count |ν|T") {
    const auto nu = uniform_levy(1, 1.0, 1.0, 0.0);  // |ν| = 2
    std::vector<double> m(100000);
    for (std::size_t r = 0; r < m.size(); ++r) {
      Stream s(1, "count", r);
      m[r] = static_cast<double>(simulate_path(nu, Point(), 3.0, s).jump_count());
    }
    CHECK(within(aggregate(m), 6.0));
  }
  SUBCASE("tiny horizon has no jumps") {
    const auto nu = uniform_levy(1, 0.5, 1.0, 0.0);
    for (std::size_t r = 0; r < 1000; ++r) {
      Stream s(2, "tiny", r);
      CHECK(simulate_path(nu, Point(), 1e-12, s).jump_count() == 0);
    }
  }
  SUBCASE("invalid horizon") {
    Stream s(1, "bad", 0);
    CHECK_THROWS_AS(simulate_path(nu1(), Point(), 0.0, s), std::invalid_argument);
  }
  SUBCASE("ordering and pathwise jump consistency") {
    Point b(1);
    b << 0.3;
    for (std::size_t r = 0; r < 200; ++r) {
      Stream s(3, "pathwise", r);
      const auto p = simulate_path(nu1(), b, 4.0, s);
      CHECK(std::is_sorted(p.times.begin(), p.times.end()));
      for (std::size_t i = 0; i < p.jump_count(); ++i) {
        CHECK(p.times[i] > 0.0);
        CHECK(p.times[i] <= 4.0);
        if (i) CHECK(p.times[i] > p.times[i - 1]);
        CHECK((p.at(p.times[i]) - p.before(p.times[i]) - p.sizes[i]).norm() < 1e-12);
        CHECK(std::abs(p.sizes[i][0]) >= 0.0625);
      }
      const double t = 1.2345;
      if (std::find(p.times.begin(), p.times.end(), t) == p.times.end()) CHECK((p.at(t) - p.before(t)).norm() == 0.0);
    }
  }
  SUBCASE("exponential spacings (KS)") {
    const auto nu = uniform_levy(1, 1.0, 0.75, 0.0);  // |ν| = 1.5
    std::vector<double> first, second;
    for (std::size_t r = 0; r < 20000; ++r) {
      Stream s(4, "ks", r);
      const auto p = simulate_path(nu, Point(), 60.0, s);
      REQUIRE(p.jump_count() >= 2);
      first.push_back(p.times[0]);
      second.push_back(p.times[1] - p.times[0]);
    }
    const double crit = 1.95 / std::sqrt(20000.0);  // alpha = 0.001
    CHECK(ks_exp(first, 1.5) < crit);
    CHECK(ks_exp(second, 1.5) < crit);
    CHECK(ks_exp(first, 1.8) > crit);
  }
  SUBCASE("rectangle counts are Poisson (chi-square)") {
    // (0.5, 1.5] x [0.5, 1.5): mass 1 * kC * 1
    const double mean = 0.5;
    std::vector<double> hist(5, 0.0);
    const std::size_t n = 100000;
    for (std::size_t r = 0; r < n; ++r) {
      Stream s(5, "rect", r);
      const auto p = simulate_path(nu1(), Point(), 2.0, s);
      std::size_t k = 0;
      for (std::size_t i = 0; i < p.jump_count(); ++i) {
        if (p.times[i] > 0.5 && p.times[i] <= 1.5 && p.sizes[i][0] >= 0.5 && p.sizes[i][0] < 1.5) ++k;
      }
      hist[std::min<std::size_t>(k, 4)] += 1.0;
    }
    boost::math::poisson_distribution<> pois(mean);
    double chi2 = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      const double p = k < 4 ? boost::math::pdf(pois, k) : boost::math::cdf(boost::math::complement(pois, 3));
      const double expect = p * static_cast<double>(n);
      chi2 += (hist[k] - expect) * (hist[k] - expect) / expect;
    }
    CHECK(chi2 < boost::math::quantile(boost::math::chi_squared(4), 0.999));
  }
}

TEST_CASE("path helpers") {
  PathRecord p;
  p.horizon = 2.0;
  p.times = {0.5, 1.5};
  p.sizes = {Point::Constant(1, 1.0), Point::Constant(1, -2.0)};
  p.drift = Point::Constant(1, 1.0);
  p.start = Point::Constant(1, 0.0);
  CHECK(p.before(0.5)[0] == doctest::Approx(0.5));
  CHECK(p.at(0.5)[0] == doctest::Approx(1.5));
  CHECK(p.count_until(1.5) == 2);
  // ∫_0^2 X_u du with X_u = u + 1{u>=0.5} - 2·1{u>=1.5}
  JumpFunctional pos{1, JumpForm::PreJump, [](std::span<const JumpArg> a) { return a[0].x[0]; }, {}, 1, "x"};
  NodeSet one;
  one.points = {Point::Constant(1, 0.0)};
  one.weights = {1.0};
  CHECK(compensator(pos, p, one, 2.0) == doctest::Approx(2.0 + 1.5 - 1.0));
  CHECK(jump_sum(pos, p, 2.0) == doctest::Approx(0.5 + 2.5));
  CHECK(jump_sum(pos, p, 1.0) == doctest::Approx(0.5));
  const auto nodes = levy_nodes(nu1());
  double total = 0.0;
  for (double w : nodes.weights) total += w;
  CHECK(total == doctest::Approx(kMass).epsilon(1e-12));
}

TEST_CASE("levy_system_simple") {
  LevyOptions o;
  o.mc = budget(20000);
  const double t = 1.5;
  SUBCASE("counting jumps") {
    const auto rep = levy_system_simple(count_functional(), nu1(), t, o);
    CHECK(rep.passed());
    CHECK(rep.rhs.mean == doctest::Approx(kMass * t).epsilon(1e-12));
    CHECK(within(rep.lhs, kMass * t));
  }
  SUBCASE("tail indicator, both forms") {
    const auto rep = levy_system_simple(tail_functional(1.0), nu1(), t, o);
    CHECK(rep.passed());
    CHECK(rep.rhs.mean == doctest::Approx(t * tail_mass(1.0)).epsilon(1e-12));
    JumpFunctional pp{1, JumpForm::PrePost,
                      [](std::span<const JumpArg> a) { return (a[0].v - a[0].x).norm() > 1.0 ? 1.0 : 0.0; }, {}, 0,
                      "tail-pp"};
    const auto rep2 = levy_system_simple(pp, nu1(), t, o);
    CHECK(rep2.lhs.mean == rep.lhs.mean);
    CHECK(rep2.rhs.mean == doctest::Approx(rep.rhs.mean).epsilon(1e-12));
  }
  SUBCASE("occupation of A against a direct occupation-time estimate") {
    const Window a = interval(-0.5, 1.0);
    const auto rep = levy_system_simple(occupation_functional(a), nu1(), t, o);
    CHECK(rep.passed());
    std::vector<double> occ(o.mc.replicates);
    for (std::size_t r = 0; r < occ.size(); ++r) {
      Stream s(99, "occupation", r);
      const auto p = simulate_path(nu1(), Point(), t, s);
      double time = 0.0, prev = 0.0;
      Point x = Point::Zero(1);
      for (std::size_t i = 0; i <= p.jump_count(); ++i) {
        const double next = i < p.jump_count() ? p.times[i] : t;
        if (a.contains(x)) time += next - prev;
        if (i < p.jump_count()) x += p.sizes[i];
        prev = next;
      }
      occ[r] = kMass * time;
    }
    CHECK(gate(rep.lhs, aggregate(occ), {}).passed);
    CHECK(gate(rep.rhs, aggregate(occ), {}).passed);
  }
  SUBCASE("with drift") {
    LevyOptions od = o;
    od.drift = Point::Constant(1, 0.7);
    const auto rep = levy_system_simple(occupation_functional(interval(0.0, 1.0)), nu1(), t, od);
    CHECK(rep.passed());
    CHECK(rep.rhs.mean > 0.0);
  }
  SUBCASE("arity must be one") {
    CHECK_THROWS_AS(levy_system_simple(count_functional(2), nu1(), t, o), std::invalid_argument);
  }
  SUBCASE("deterministic in the worker count") {
    LevyOptions o4 = o;
    o4.mc.workers = 4;
    const auto a = levy_system_simple(tail_functional(0.5), nu1(), t, o);
    const auto b = levy_system_simple(tail_functional(0.5), nu1(), t, o4);
    CHECK(a.lhs.mean == b.lhs.mean);
    CHECK(a.rhs.std_error == b.rhs.std_error);
  }
}

TEST_CASE("levy_system_general") {
  LevyOptions o;
  o.mc = budget(20000);
  const double t = 1.2;
  const double lt = kMass * t;
  SUBCASE("ordered pairs over every ε") {
    for (const EpsilonVector eps : {EpsilonVector{1, 1}, EpsilonVector{1, 0}, EpsilonVector{0, 1}, EpsilonVector{0, 0}}) {
      const auto rep = levy_system_general(count_functional(2), eps, nu1(), t, o);
      CAPTURE(eps[0]);
      CAPTURE(eps[1]);
      CHECK(rep.passed());
      CHECK(within(rep.lhs, lt * lt / 2));
      CHECK(within(rep.rhs, lt * lt / 2));
    }
  }
  SUBCASE("ε=(0,0) with a deterministic integrand") {
    JumpFunctional f{2, JumpForm::PreJump,
                     [](std::span<const JumpArg> a) { return a[0].u * (a[1].v[0] > 0.0 ? 1.0 : 0.0); }, {}, 1, "det"};
    const auto rep = levy_system_general(f, {0, 0}, nu1(), t, o);
    CHECK(rep.passed());
    // ∫_{u1<u2<T} u1 du · |ν| · ν(z>0) = T^3/6 · |ν| · |ν|/2
    CHECK(within(rep.lhs, t * t * t / 6 * kMass * kMass / 2));
  }
  SUBCASE("mixed product of tail indicators") {
    const double p = tail_mass(1.0) / kMass;
    const auto rep = levy_system_general(tail_functional(1.0, 2), {1, 0}, nu1(), t, o);
    CHECK(rep.passed());
    CHECK(within(rep.rhs, lt * lt / 2 * p * p));
  }
  SUBCASE("later positions see the earlier σ jump") {
    // F = 1{x2 - x1 ... }: occupation of the second pre-jump position
    const auto rep = levy_system_general(occupation_functional(interval(0.5, 2.5), 2), {0, 1}, nu1(), t, o);
    CHECK(rep.passed());
    const auto rep3 = levy_system_general(count_functional(3), {1, 0, 1}, nu1(), 1.0, o);
    CHECK(rep3.passed());
    CHECK(within(rep3.rhs, std::pow(kMass, 3) / 6));
  }
  SUBCASE("n = 1 reproduces the simple system") {
    for (const auto& f : {count_functional(), tail_functional(0.75), occupation_functional(interval(-1.0, 0.3))}) {
      const auto simple = levy_system_simple(f, nu1(), t, o);
      const auto general = levy_system_general(f, {1}, nu1(), t, o);
      CHECK(general.lhs.mean == simple.lhs.mean);
      CHECK(general.lhs.std_error == simple.lhs.std_error);
      CHECK(general.rhs.mean == simple.rhs.mean);
      CHECK(general.rhs.std_error == simple.rhs.std_error);
    }
  }
  SUBCASE("semigroup evaluator") {
    GeneralLevyOptions g;
    g.semigroup = true;
    const auto rep = levy_system_general(occupation_functional(interval(-0.5, 1.0)), {1}, nu1(), t, o, g);
    REQUIRE(rep.semigroup);
    CHECK(rep.passed());
    const auto cnt = levy_system_general(count_functional(), {1}, nu1(), t, o, g);
    CHECK(*cnt.semigroup == doctest::Approx(lt).epsilon(1e-10));
    LevyOptions od = o;
    od.drift = Point::Constant(1, -0.4);
    const auto drifted = levy_system_general(occupation_functional(interval(-1.0, 0.0)), {1}, nu1(), t, od, g);
    CHECK(drifted.passed());
  }
  SUBCASE("arity mismatch") {
    CHECK_THROWS_AS(levy_system_general(count_functional(2), {1}, nu1(), t, o), std::invalid_argument);
    CHECK_THROWS_AS(levy_system_general(count_functional(4), {1, 1, 1, 1}, nu1(), t, o), std::invalid_argument);
  }
}

TEST_CASE("exit_law_check") {
  LevyOptions o;
  o.mc = budget(20000);
  ExitLawSpec s;
  s.domain = interval(-1.0, 1.0);
  s.a = interval(-0.75, 0.75);
  s.i_lo = 0.0;
  s.i_hi = 2.0;
  SUBCASE("symmetric landing sets") {
    s.b = interval(1.25, 3.0);
    const auto right = exit_law_check(nu1(), s, o);
    s.b = interval(-3.0, -1.25);
    const auto left = exit_law_check(nu1(), s, o);
    CHECK(right.passed());
    CHECK(left.passed());
    CHECK(gate(right.lhs, left.lhs, {}).passed);
    CHECK(right.lhs.mean > 0.01);
    CHECK(std::abs(right.grid_bias) < 0.05 * right.rhs_exact.mean);
    CHECK(gate(right.lhs, right.rhs_exact, {}).passed);
  }
  SUBCASE("unreachable target") {
    s.b = interval(10.0, 12.0);
    const auto rep = exit_law_check(nu1(), s, o);
    CHECK(rep.lhs.mean == 0.0);
    CHECK(rep.rhs.mean == 0.0);
    CHECK(rep.passed());
  }
  SUBCASE("whole domain, every exit by a far jump") {
    s.a = interval(-1.0, 1.0);
    s.b = interval(1.125, 4.0);
    s.i_hi = 12.0;
    const auto rep = exit_law_check(nu1(), s, o);
    CHECK(rep.survival.mean < 1e-3);
    CHECK(rep.passed());
  }
  SUBCASE("drift exits continuously") {
    LevyOptions od = o;
    od.drift = Point::Constant(1, 0.5);
    od.mc = budget(5000);
    s.b = interval(-3.0, -1.25);
    const auto rep = exit_law_check(nu1(), s, od);
    CHECK(rep.passed());
  }
  SUBCASE("invalid input") {
    s.b = interval(1.25, 3.0);
    LevyOptions bad = o;
    bad.start = Point::Constant(1, 1.5);
    CHECK_THROWS_AS(exit_law_check(nu1(), s, bad), std::invalid_argument);
    s.b = interval(0.5, 3.0);
    CHECK_THROWS_AS(exit_law_check(nu1(), s, o), std::invalid_argument);
    s.b = interval(1.0, 3.0);
    s.a = interval(-0.5, 1.0);
    CHECK_THROWS_AS(exit_law_check(nu1(), s, o), std::invalid_argument);
  }
}

TEST_CASE("martingale_checks") {
  LevyOptions o;
  o.mc = budget(20000);
  const double t = 1.5;
  SUBCASE("centred Poisson count") {
    const auto rep = martingale_checks(count_functional(), nu1(), t, o);
    CHECK(rep.passed());
    CHECK(within(rep.mean, 0.0));
    CHECK(within(rep.second_moment, kMass * t));
    CHECK(rep.predictable.mean == doctest::Approx(kMass * t).epsilon(1e-12));
    CHECK(rep.increments.size() == 4);
  }
  SUBCASE("zero functional") {
    JumpFunctional zero{1, JumpForm::PreJump, [](std::span<const JumpArg>) { return 0.0; }, {}, 0, "zero"};
    const auto rep = martingale_checks(zero, nu1(), t, o);
    CHECK(rep.passed());
    CHECK(rep.mean.mean == 0.0);
    CHECK(rep.second_moment.mean == 0.0);
    CHECK(rep.bracket.mean == 0.0);
  }
  SUBCASE("thinned count") {
    const auto rep = martingale_checks(tail_functional(1.0), nu1(), t, o);
    CHECK(rep.passed());
    CHECK(within(rep.second_moment, t * tail_mass(1.0)));
  }
  SUBCASE("path-dependent integrand with drift") {
    LevyOptions od = o;
    od.drift = Point::Constant(1, 0.3);
    const auto rep = martingale_checks(occupation_functional(interval(-0.5, 1.5)), nu1(), t, od);
    CHECK(rep.passed());
  }
}

TEST_CASE("predictable_factor_check") {
  LevyOptions o;
  o.mc = budget(20000);
  const double t = 2.0;
  SUBCASE("unit factor is the simple system") {
    const auto a = predictable_factor_check(unit_factor(), tail_functional(0.5), nu1(), t, o);
    const auto b = levy_system_simple(tail_functional(0.5), nu1(), t, o);
    CHECK(a.lhs.mean == b.lhs.mean);
    CHECK(a.rhs.mean == doctest::Approx(b.rhs.mean).epsilon(1e-14));
  }
  SUBCASE("linear factor") {
    const auto rep = predictable_factor_check(linear_factor(), count_functional(), nu1(), t, o);
    CHECK(rep.passed());
    CHECK(rep.rhs.mean == doctest::Approx(kMass * t * t / 2).epsilon(1e-12));
  }
  SUBCASE("half horizon") {
    const auto rep = predictable_factor_check(window_factor(t / 2), count_functional(), nu1(), t, o);
    CHECK(rep.passed());
    CHECK(rep.rhs.mean == doctest::Approx(kMass * t / 2).epsilon(1e-12));
  }
}

TEST_CASE("path summary csv") {
  LevyOptions o;
  o.mc = budget(3);
  const auto csv = path_summary_csv(nu1(), 1.0, o);
  CHECK(csv.rfind("replicate,jumps,first_jump,x_T_0\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
