#include "ppv/levy_systems.hpp"

#include "ppv/series_oracle.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ppv {

namespace {

struct GaussRule {
  std::vector<double> x;  // on [-1, 1]
  std::vector<double> w;
};

template <unsigned N>
GaussRule make_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  GaussRule r;
  const auto& a = G::abscissa();
  const auto& wt = G::weights();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) {
      r.x.push_back(0.0);
      r.w.push_back(wt[i]);
    } else {
      r.x.push_back(-a[i]);
      r.w.push_back(wt[i]);
      r.x.push_back(a[i]);
      r.w.push_back(wt[i]);
    }
  }
  return r;
}

// Gauss-Legendre rule exact for polynomials of the given degree; 8 points if unknown.
const GaussRule& rule_for_degree(int degree) {
  static const std::array<GaussRule, 8> rules{make_rule<1>(), make_rule<2>(), make_rule<3>(), make_rule<4>(),
                                              make_rule<5>(), make_rule<6>(), make_rule<7>(), make_rule<8>()};
  const int n = degree < 0 ? 8 : std::clamp((degree + 2) / 2, 1, 8);
  return rules[static_cast<std::size_t>(n - 1)];
}

Point zero_point(int d) { return Point::Zero(d); }

Point or_zero(const Point& p, int d) {
  if (p.size() == 0) return zero_point(d);
  if (p.size() != d) throw std::invalid_argument("levy: drift/start dimension does not match the Lévy measure");
  return p;
}

void check_horizon(double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("levy: horizon must be finite and positive");
}

// Sorted cut points of (0, until] from jump times and functional breaks.
std::vector<double> cuts_for(const PathRecord* path, const std::vector<double>& breaks, double until) {
  std::vector<double> cuts{0.0, until};
  if (path) {
    for (double u : path->times) {
      if (u < until) cuts.push_back(u);
    }
  }
  for (double b : breaks) {
    if (b > 0.0 && b < until) cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

bool inside_open(const Window& w, const Point& x) {
  return ((x.array() > w.lo().array()) && (x.array() < w.hi().array())).all();
}

Window shifted(const Window& w, const Point& by) {
  const Point lo = w.lo() + by, hi = w.hi() + by;
  return Window(std::span<const double>(lo.data(), static_cast<std::size_t>(lo.size())),
                std::span<const double>(hi.data(), static_cast<std::size_t>(hi.size())));
}

JumpFunctional squared(const JumpFunctional& f) {
  JumpFunctional g = f;
  g.evaluator = [inner = f.evaluator](std::span<const JumpArg> a) {
    const double v = inner(a);
    return v * v;
  };
  g.u_degree = f.u_degree < 0 ? -1 : 2 * f.u_degree;
  return g;
}

std::size_t z_points_or_default(std::size_t n, int d) {
  return n ? n : resolve_quadrature({}, 1, d).points_per_axis;
}

}  // namespace

LevyMeasureSpec::LevyMeasureSpec(IntensitySpec density) : nu_(std::move(density)) {}

LevyMeasureSpec uniform_levy(int dim, double half_width, double c, double core) {
  if (!(half_width > core) || core < 0.0) throw std::invalid_argument("uniform levy: need 0 <= core < half_width");
  const auto base = constant_intensity(Window::cube(dim, -half_width, half_width), c);
  return LevyMeasureSpec(core > 0.0 ? exclude_core(base, core) : base);
}

Point PathRecord::before(double t) const {
  Point x = start + drift * t;
  for (std::size_t i = 0; i < times.size() && times[i] < t; ++i) x += sizes[i];
  return x;
}

Point PathRecord::at(double t) const {
  Point x = start + drift * t;
  for (std::size_t i = 0; i < times.size() && times[i] <= t; ++i) x += sizes[i];
  return x;
}

std::size_t PathRecord::count_until(double t) const {
  return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
}

PathRecord simulate_path(const LevyMeasureSpec& levy, const Point& drift, double horizon, Stream& stream,
                         std::optional<Point> start) {
  check_horizon(horizon);
  const int d = levy.dim();
  PathRecord p;
  p.horizon = horizon;
  p.drift = or_zero(drift, d);
  p.start = start ? or_zero(*start, d) : zero_point(d);
  const auto m = static_cast<std::size_t>(stream.poisson(levy.mass() * horizon));
  p.times.resize(m);
  for (auto& u : p.times) u = horizon * (1.0 - stream.uniform());
  std::sort(p.times.begin(), p.times.end());
  p.sizes.reserve(m);
  for (std::size_t i = 0; i < m; ++i) p.sizes.push_back(sample_sigma_point(levy.measure(), stream));
  return p;
}

double JumpFunctional::operator()(std::span<const double> u, std::span<const Point> x,
                                  std::span<const Point> z) const {
  std::array<JumpArg, 4> buf;
  if (u.size() > buf.size()) throw std::invalid_argument("jump functional: arity above 4");
  for (std::size_t i = 0; i < u.size(); ++i) {
    buf[i].u = u[i];
    buf[i].x = x[i];
    buf[i].v = form == JumpForm::PrePost ? Point(x[i] + z[i]) : z[i];
  }
  return evaluator(std::span<const JumpArg>(buf.data(), u.size()));
}

double JumpFunctional::single(double u, const Point& x, const Point& z) const {
  JumpArg a{u, x, form == JumpForm::PrePost ? Point(x + z) : z};
  return evaluator(std::span<const JumpArg>(&a, 1));
}

JumpFunctional count_functional(int arity) {
  return {arity, JumpForm::PreJump, [](std::span<const JumpArg>) { return 1.0; }, {}, 0, "count"};
}

JumpFunctional tail_functional(double a, int arity) {
  return {arity, JumpForm::PreJump,
          [a](std::span<const JumpArg> args) {
            for (const auto& g : args) {
              if (!(g.v.norm() > a)) return 0.0;
            }
            return 1.0;
          },
          {}, 0, "tail"};
}

JumpFunctional occupation_functional(const Window& a, int arity) {
  return {arity, JumpForm::PreJump,
          [a](std::span<const JumpArg> args) { return a.contains(args.back().x) ? 1.0 : 0.0; }, {}, 0, "occupation"};
}

JumpFunctional size_power_functional(double p) {
  return {1, JumpForm::PreJump, [p](std::span<const JumpArg> args) { return std::pow(args[0].v.norm(), p); }, {}, 0,
          "size-power"};
}

JumpFunctional landing_functional(const Window& b) {
  return {1, JumpForm::PrePost, [b](std::span<const JumpArg> args) { return b.contains(args[0].v) ? 1.0 : 0.0; }, {},
          0, "landing"};
}

TimeFactor unit_factor() { return {[](double) { return 1.0; }, {}, 0, "one"}; }

TimeFactor linear_factor(double slope) { return {[slope](double u) { return slope * u; }, {}, 1, "linear"}; }

TimeFactor window_factor(double a) {
  return {[a](double u) { return u > 0.0 && u <= a ? 1.0 : 0.0; }, {a}, 0, "indicator"};
}

NodeSet levy_nodes(const LevyMeasureSpec& levy, std::size_t points_per_axis) {
  return tensor_nodes(levy.measure(), z_points_or_default(points_per_axis, levy.dim()), 0);
}

double jump_sum(const JumpFunctional& f, const PathRecord& path, double until) {
  double total = 0.0;
  Point x = path.start;
  for (std::size_t i = 0; i < path.times.size() && path.times[i] <= until; ++i) {
    const double u = path.times[i];
    const Point pre = x + path.drift * u;
    total += f.single(u, pre, path.sizes[i]);
    x += path.sizes[i];
  }
  return total;
}

double compensator(const JumpFunctional& f, const PathRecord& path, const NodeSet& z_nodes, double until) {
  const auto cuts = cuts_for(&path, f.time_breaks, until);
  const bool moving = path.drift.size() > 0 && path.drift.squaredNorm() > 0.0;
  const GaussRule& rule = rule_for_degree(moving ? -1 : f.u_degree);
  double total = 0.0;
  std::size_t next_jump = 0;
  Point base = path.start;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c], b = cuts[c + 1];
    while (next_jump < path.times.size() && path.times[next_jump] <= a) base += path.sizes[next_jump++];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double piece = 0.0;
    for (std::size_t q = 0; q < rule.x.size(); ++q) {
      const double u = mid + half * rule.x[q];
      const Point x = base + path.drift * u;
      double inner = 0.0;
      for (std::size_t k = 0; k < z_nodes.points.size(); ++k) inner += z_nodes.weights[k] * f.single(u, x, z_nodes.points[k]);
      piece += rule.w[q] * inner;
    }
    total += half * piece;
  }
  return total;
}

namespace {

Estimate lhs_jump_sums(const JumpFunctional& f, const LevyMeasureSpec& levy, double horizon, const LevyOptions& o) {
  const int d = levy.dim();
  const Point drift = or_zero(o.drift, d), start = or_zero(o.start, d);
  const std::string id = o.scenario + "/lhs";
  return aggregate(checked_samples(o.mc.replicates, o.mc.workers, [&](std::size_t r) {
    Stream stream(o.mc.seed, id, r);
    return jump_sum(f, simulate_path(levy, drift, horizon, stream, start), horizon);
  }));
}

Estimate compensator_mean(const JumpFunctional& f, const LevyMeasureSpec& levy, double horizon, const LevyOptions& o,
                          const std::string& id) {
  const int d = levy.dim();
  const Point drift = or_zero(o.drift, d), start = or_zero(o.start, d);
  const NodeSet nodes = levy_nodes(levy, o.z_points);
  return aggregate(checked_samples(o.mc.replicates, o.mc.workers, [&](std::size_t r) {
    Stream stream(o.mc.seed, id, r);
    return compensator(f, simulate_path(levy, drift, horizon, stream, start), nodes, horizon);
  }));
}

}  // namespace

LevyReport levy_system_simple(const JumpFunctional& f, const LevyMeasureSpec& levy, double horizon,
                              const LevyOptions& options) {
  if (f.arity != 1) throw std::invalid_argument("levy_system_simple: functional must have arity 1");
  check_horizon(horizon);
  LevyReport rep;
  rep.lhs = lhs_jump_sums(f, levy, horizon, options);
  rep.rhs = compensator_mean(f, levy, horizon, options, options.scenario + "/rhs");
  rep.gate = gate(rep.lhs, rep.rhs, options.gate);
  return rep;
}

namespace {

double semigroup_lattice(const JumpFunctional& f, const LevyMeasureSpec& levy, double horizon, const Point& drift,
                         const Point& start, std::size_t cells) {
  const auto& nu = levy.measure();
  const double lo = nu.window().lo()[0], hi = nu.window().hi()[0];
  const double h = (hi - lo) / static_cast<double>(cells);
  std::vector<double> mass(cells);
  PointList z(cells);
  double grid_mass = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    z[i] = Point::Constant(1, lo + (static_cast<double>(i) + 0.5) * h);
    mass[i] = nu.density(z[i]) * h;
    grid_mass += mass[i];
  }
  if (!(grid_mass > 0.0)) throw NumericError("semigroup evaluator: ν has no mass on the grid");
  const double lambda = nu.mass();
  const Point b = or_zero(drift, 1), x0 = or_zero(start, 1);
  const bool moving = b[0] != 0.0;
  const int n_max = default_series_order(lambda * horizon);

  // ν̃^{*n} on the lattice n (lo + h/2) + j h
  std::vector<std::vector<double>> conv{{1.0}};
  for (int n = 1; n <= n_max; ++n) {
    const auto& prev = conv.back();
    std::vector<double> next(prev.size() + cells - 1, 0.0);
    for (std::size_t j = 0; j < prev.size(); ++j) {
      if (prev[j] == 0.0) continue;
      for (std::size_t i = 0; i < cells; ++i) next[j + i] += prev[j] * mass[i] / grid_mass;
    }
    conv.push_back(std::move(next));
  }

  // G_n(u) = Σ_j q_n[j] Σ_z ν(z) F(u, x_j + b u, x_j + b u + z)
  auto inner = [&](int n, double u) {
    const auto& q = conv[static_cast<std::size_t>(n)];
    const double offset = x0[0] + b[0] * u + static_cast<double>(n) * (lo + 0.5 * h);
    double s = 0.0;
    Point x(1);
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (q[j] == 0.0) continue;
      x[0] = offset + static_cast<double>(j) * h;
      double row = 0.0;
      for (std::size_t i = 0; i < cells; ++i) {
        if (mass[i] != 0.0) row += mass[i] * f.single(u, x, z[i]);
      }
      s += q[j] * row;
    }
    return s;
  };

  const auto cuts = cuts_for(nullptr, f.time_breaks, horizon);
  double total = 0.0;
  if (!moving && f.u_degree == 0) {
    // G_n constant on each piece; integrate the Poisson weights exactly
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c], e = cuts[c + 1], mid = 0.5 * (a + e);
      for (int n = 0; n <= n_max; ++n) {
        const double w = (boost::math::gamma_p(n + 1.0, lambda * e) - boost::math::gamma_p(n + 1.0, lambda * a)) / lambda;
        if (w < 1e-300) continue;
        total += w * inner(n, mid);
      }
    }
    return total;
  }
  const GaussRule& rule = rule_for_degree(-1);
  constexpr int kSub = 8;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    for (int s = 0; s < kSub; ++s) {
      const double a = cuts[c] + (cuts[c + 1] - cuts[c]) * s / kSub;
      const double e = cuts[c] + (cuts[c + 1] - cuts[c]) * (s + 1) / kSub;
      const double half = 0.5 * (e - a), mid = 0.5 * (a + e);
      for (std::size_t q = 0; q < rule.x.size(); ++q) {
        const double u = mid + half * rule.x[q];
        double g = 0.0;
        for (int n = 0; n <= n_max; ++n) {
          const double w = std::exp(-lambda * u + n * std::log(lambda * u + 1e-300) - std::lgamma(n + 1.0));
          if (w < 1e-300) continue;
          g += w * inner(n, u);
        }
        total += half * rule.w[q] * g;
      }
    }
  }
  return total;
}

}  // namespace

double semigroup_evaluator(const JumpFunctional& f, const LevyMeasureSpec& levy, double horizon, const Point& drift,
                           const Point& start, std::size_t cells) {
  if (levy.dim() != 1 || f.arity != 1) throw std::invalid_argument("semigroup evaluator: n = 1 and d = 1 only");
  if (cells < 4 || cells % 2) throw std::invalid_argument("semigroup evaluator: cells must be even and >= 4");
  check_horizon(horizon);
  // indicator edges landing on lattice points give an O(h) bias; one Richardson step removes it
  const double fine = semigroup_lattice(f, levy, horizon, drift, start, cells);
  const double coarse = semigroup_lattice(f, levy, horizon, drift, start, cells / 2);
  return 2.0 * fine - coarse;
}

LevyReport levy_system_general(const JumpFunctional& f, const EpsilonVector& eps, const LevyMeasureSpec& levy,
                               double horizon, const LevyOptions& options, const GeneralLevyOptions& general) {
  const int n = static_cast<int>(eps.size());
  if (f.arity != n) throw std::invalid_argument("levy_system_general: arity does not match epsilon length");
  if (n < 1 || n > 3) throw std::invalid_argument("levy_system_general: arity must be 1, 2 or 3");
  check_horizon(horizon);
  const int d = levy.dim();
  const Point drift = or_zero(options.drift, d), start = or_zero(options.start, d);
  LevyReport rep;

  if (n == 1) {
    rep.lhs = eps[0] ? lhs_jump_sums(f, levy, horizon, options)
                     : compensator_mean(f, levy, horizon, options, options.scenario + "/lhs");
    rep.rhs = compensator_mean(f, levy, horizon, options, options.scenario + "/rhs");
    rep.gate = gate(rep.lhs, rep.rhs, options.gate);
    if (general.semigroup) {
      if (d != 1) {
        rep.notes.push_back("semigroup evaluator skipped: d != 1");
      } else {
        rep.semigroup = semigroup_evaluator(f, levy, horizon, drift, start, general.semigroup_cells);
        rep.semigroup_gate = gate(rep.lhs, Estimate::exact(*rep.semigroup), options.gate);
      }
    }
    return rep;
  } else if (general.semigroup) {
    rep.notes.push_back("semigroup evaluator is available for n = 1 only");
  }

  const double lambda_t = levy.mass() * horizon;
  const auto& nu = levy.measure();
  const int zeros = n - static_cast<int>(eps.count_ones());
  const int ones = n - zeros;

  // LHS: jumps on ε=1 coordinates, one (u, z) draw per ε=0 coordinate
  const std::string lhs_id = options.scenario + "/lhs";
  rep.lhs = aggregate(checked_samples(options.mc.replicates, options.mc.workers, [&](std::size_t r) {
    Stream stream(options.mc.seed, lhs_id, r);
    const PathRecord path = simulate_path(levy, drift, horizon, stream, start);
    std::array<double, 3> u{};
    std::array<Point, 3> x, z;
    for (int j = 0; j < n; ++j) {
      if (!eps[static_cast<std::size_t>(j)]) {
        u[static_cast<std::size_t>(j)] = horizon * (1.0 - stream.uniform());
        z[static_cast<std::size_t>(j)] = sample_sigma_point(nu, stream);
        x[static_cast<std::size_t>(j)] = path.before(u[static_cast<std::size_t>(j)]);
      }
    }
    const double weight = std::pow(lambda_t, zeros);
    const std::size_t m = path.jump_count();
    if (ones > 0 && m == 0) return 0.0;
    std::vector<Point> pre(m);
    for (std::size_t i = 0; i < m; ++i) pre[i] = path.before(path.times[i]);
    std::array<std::size_t, 3> idx{};
    double total = 0.0;
    for (;;) {
      int o = 0;
      for (int j = 0; j < n; ++j) {
        if (eps[static_cast<std::size_t>(j)]) {
          const std::size_t i = idx[static_cast<std::size_t>(o++)];
          u[static_cast<std::size_t>(j)] = path.times[i];
          x[static_cast<std::size_t>(j)] = pre[i];
          z[static_cast<std::size_t>(j)] = path.sizes[i];
        }
      }
      bool ordered = true;
      for (int j = 1; j < n; ++j) ordered = ordered && u[static_cast<std::size_t>(j - 1)] < u[static_cast<std::size_t>(j)];
      if (ordered) {
        total += f(std::span<const double>(u.data(), static_cast<std::size_t>(n)),
                   std::span<const Point>(x.data(), static_cast<std::size_t>(n)),
                   std::span<const Point>(z.data(), static_cast<std::size_t>(n)));
      }
      int k = 0;
      for (; k < ones; ++k) {
        if (++idx[static_cast<std::size_t>(k)] < m) break;
        idx[static_cast<std::size_t>(k)] = 0;
      }
      if (k == ones) break;
    }
    return weight * total;
  }));

  // RHS: sorted uniform times, i.i.d. ν̃ sizes, earlier ε=1 sizes added to later positions
  const std::string rhs_id = options.scenario + "/rhs";
  const double rhs_weight = std::pow(lambda_t, n) / std::tgamma(n + 1.0);
  rep.rhs = aggregate(checked_samples(options.mc.replicates, options.mc.workers, [&](std::size_t r) {
    Stream stream(options.mc.seed, rhs_id, r);
    const PathRecord path = simulate_path(levy, drift, horizon, stream, start);
    std::array<double, 3> u{};
    std::array<Point, 3> x, z;
    for (int j = 0; j < n; ++j) u[static_cast<std::size_t>(j)] = horizon * (1.0 - stream.uniform());
    std::sort(u.begin(), u.begin() + n);
    Point shift = zero_point(d);
    for (int j = 0; j < n; ++j) {
      const auto sj = static_cast<std::size_t>(j);
      z[sj] = sample_sigma_point(nu, stream);
      x[sj] = path.before(u[sj]) + shift;
      if (eps[sj]) shift += z[sj];
    }
    return rhs_weight * f(std::span<const double>(u.data(), static_cast<std::size_t>(n)),
                          std::span<const Point>(x.data(), static_cast<std::size_t>(n)),
                          std::span<const Point>(z.data(), static_cast<std::size_t>(n)));
  }));
  rep.gate = gate(rep.lhs, rep.rhs, options.gate);
  return rep;
}

ExitLawReport exit_law_check(const LevyMeasureSpec& levy, const ExitLawSpec& spec, const LevyOptions& options) {
  const int d = levy.dim();
  if (spec.domain.dim() != d || spec.a.dim() != d || spec.b.dim() != d) {
    throw std::invalid_argument("exit law: D, A, B must have the dimension of ν");
  }
  const Point drift = or_zero(options.drift, d), start = or_zero(options.start, d);
  if (!inside_open(spec.domain, start)) throw std::invalid_argument("exit law: start point is outside D");
  if (!spec.domain.intersect(spec.a) || spec.domain.intersect(spec.a)->volume() < spec.a.volume() * (1 - 1e-12)) {
    throw std::invalid_argument("exit law: A must be a nonempty subset of D");
  }
  if (spec.domain.intersect(spec.b)) throw std::invalid_argument("exit law: B must lie outside D");
  double gap2 = 0.0;
  for (int k = 0; k < d; ++k) {
    const double g = std::max({0.0, spec.b.lo()[k] - spec.a.hi()[k], spec.a.lo()[k] - spec.b.hi()[k]});
    gap2 += g * g;
  }
  if (!(gap2 > 0.0)) throw std::invalid_argument("exit law: dist(A, B) must be positive");
  if (!(spec.i_lo >= 0.0 && spec.i_hi > spec.i_lo)) throw std::invalid_argument("exit law: need 0 <= I.lo < I.hi");
  if (spec.time_cells < 1 || spec.space_cells < 1) throw std::invalid_argument("exit law: grid needs cells");
  const double horizon = spec.i_hi;

  // ν(B - y) kernel, exact and per grid cell centre
  auto kernel = [&](const Point& y) {
    if (!spec.a.contains(y)) return 0.0;
    return levy.box_mass(shifted(spec.b, -y));
  };
  const std::size_t sc = spec.space_cells;
  std::size_t cells_total = 1;
  for (int k = 0; k < d; ++k) cells_total *= sc;
  std::vector<double> cell_kernel(cells_total);
  const Point width = (spec.domain.hi() - spec.domain.lo()) / static_cast<double>(sc);
  for (std::size_t c = 0; c < cells_total; ++c) {
    Point y(d);
    std::size_t rest = c;
    for (int k = 0; k < d; ++k) {
      y[k] = spec.domain.lo()[k] + (static_cast<double>(rest % sc) + 0.5) * width[k];
      rest /= sc;
    }
    cell_kernel[c] = kernel(y);
  }
  auto cell_of = [&](const Point& y) {
    std::size_t c = 0, stride = 1;
    for (int k = 0; k < d; ++k) {
      const double t = (y[k] - spec.domain.lo()[k]) / width[k];
      const auto i = static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(sc) - 0.5));
      c += i * stride;
      stride *= sc;
    }
    return c;
  };

  // first exit time on the killed path; continuous exits only with drift
  struct Exit {
    double tau = std::numeric_limits<double>::infinity();
    Point pre, post;
  };
  auto first_exit = [&](const PathRecord& p) {
    Exit e;
    Point base = p.start;
    double t0 = 0.0;
    for (std::size_t i = 0; i <= p.times.size(); ++i) {
      const double t1 = i < p.times.size() ? p.times[i] : p.horizon;
      if (drift.squaredNorm() > 0.0) {
        double hit = std::numeric_limits<double>::infinity();
        for (int k = 0; k < d; ++k) {
          if (drift[k] > 0.0) hit = std::min(hit, (spec.domain.hi()[k] - base[k]) / drift[k]);
          if (drift[k] < 0.0) hit = std::min(hit, (spec.domain.lo()[k] - base[k]) / drift[k]);
        }
        if (hit <= t1 && hit >= t0) {
          e.tau = hit;
          e.pre = base + drift * hit;
          e.post = e.pre;
          return e;
        }
      }
      if (i == p.times.size()) break;
      const Point pre = base + drift * t1;
      base += p.sizes[i];
      if (!inside_open(spec.domain, base + drift * t1)) {
        e.tau = t1;
        e.pre = pre;
        e.post = base + drift * t1;
        return e;
      }
      t0 = t1;
    }
    return e;
  };

  ExitLawReport rep;
  const std::string lhs_id = options.scenario + "/lhs";
  std::vector<double> survived(options.mc.replicates);
  rep.lhs = aggregate(checked_samples(options.mc.replicates, options.mc.workers, [&](std::size_t r) {
    Stream stream(options.mc.seed, lhs_id, r);
    const PathRecord p = simulate_path(levy, drift, horizon, stream, start);
    const Exit e = first_exit(p);
    survived[r] = std::isinf(e.tau) ? 1.0 : 0.0;
    const bool hit = e.tau > spec.i_lo && e.tau <= spec.i_hi && spec.a.contains(e.pre) && spec.b.contains(e.post);
    return hit ? 1.0 : 0.0;
  }));
  rep.survival = aggregate(survived);

  // killed-path occupation over (u, y) cells; time cells split segments, y cells take the centre value
  const std::string rhs_id = options.scenario + "/rhs";
  std::vector<double> exact(options.mc.replicates);
  const double dt = horizon / static_cast<double>(spec.time_cells);
  const GaussRule& rule = rule_for_degree(-1);
  rep.rhs = aggregate(checked_samples(options.mc.replicates, options.mc.workers, [&](std::size_t r) {
    Stream stream(options.mc.seed, rhs_id, r);
    const PathRecord p = simulate_path(levy, drift, horizon, stream, start);
    const double stop = std::min(first_exit(p).tau, horizon);
    std::vector<double> cuts{spec.i_lo, stop};
    for (std::size_t k = 1; k < spec.time_cells; ++k) {
      const double t = dt * static_cast<double>(k);
      if (t > spec.i_lo && t < stop) cuts.push_back(t);
    }
    for (double t : p.times) {
      if (t > spec.i_lo && t < stop) cuts.push_back(t);
    }
    std::sort(cuts.begin(), cuts.end());
    double grid = 0.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c], b = cuts[c + 1];
      if (b > a) grid += (b - a) * cell_kernel[cell_of(p.at(0.5 * (a + b)))];
    }
    // exact integral: ν(B - y) is evaluated once per inter-jump piece (GL in u with drift)
    std::vector<double> pieces{spec.i_lo, stop};
    for (double t : p.times) {
      if (t > spec.i_lo && t < stop) pieces.push_back(t);
    }
    std::sort(pieces.begin(), pieces.end());
    double direct = 0.0;
    for (std::size_t c = 0; c + 1 < pieces.size(); ++c) {
      const double a = pieces[c], b = pieces[c + 1];
      if (!(b > a)) continue;
      if (drift.squaredNorm() == 0.0) {
        direct += (b - a) * kernel(p.at(0.5 * (a + b)));
      } else {
        const double half = 0.5 * (b - a);
        for (std::size_t q = 0; q < rule.x.size(); ++q) direct += half * rule.w[q] * kernel(p.at(0.5 * (a + b) + half * rule.x[q]));
      }
    }
    exact[r] = direct;
    return grid;
  }));
  rep.rhs_exact = aggregate(exact);
  rep.grid_bias = rep.rhs.mean - rep.rhs_exact.mean;
  rep.gate = gate(rep.lhs, rep.rhs, options.gate);
  return rep;
}

std::vector<PrefixFunctional> default_prefix_functionals() {
  return {
      {"jumped", [](const PathRecord& p, double s) { return p.count_until(s) > 0 ? 1.0 : 0.0; }},
      {"even-count", [](const PathRecord& p, double s) { return p.count_until(s) % 2 == 0 ? 1.0 : 0.0; }},
      {"tanh-position", [](const PathRecord& p, double s) { return std::tanh(p.at(s)[0]); }},
      {"early-first-jump",
       [](const PathRecord& p, double s) { return !p.times.empty() && p.times[0] <= 0.5 * s ? 1.0 : 0.0; }},
  };
}

bool MartingaleReport::passed() const {
  bool ok = mean_gate.passed && second_moment_gate.passed && bracket_gate.passed;
  for (const auto& i : increments) ok = ok && i.gate.passed;
  return ok;
}

MartingaleReport martingale_checks(const JumpFunctional& f, const LevyMeasureSpec& levy, double t,
                                   const LevyOptions& options) {
  if (f.arity != 1) throw std::invalid_argument("martingale checks: functional must have arity 1");
  check_horizon(t);
  const int d = levy.dim();
  const Point drift = or_zero(options.drift, d), start = or_zero(options.start, d);
  const NodeSet nodes = levy_nodes(levy, options.z_points);
  const JumpFunctional f2 = squared(f);
  // ∫∫F² finite on the horizon
  {
    PathRecord still;
    still.horizon = t;
    still.drift = drift;
    still.start = start;
    if (!std::isfinite(compensator(f2, still, nodes, t))) throw NumericError("martingale checks: ∫∫F² is not finite");
  }
  const auto prefixes = default_prefix_functionals();
  const std::size_t n = options.mc.replicates, np = prefixes.size();
  const double s = 0.5 * t;
  std::vector<double> mt(n), mt2(n), br(n), pr(n), diff_sq(n), diff_br(n), inc(n * np);
  const std::string id = options.scenario + "/paths";
  checked_samples(n, options.mc.workers, [&](std::size_t r) {
    Stream stream(options.mc.seed, id, r);
    const PathRecord p = simulate_path(levy, drift, t, stream, start);
    const double m_t = jump_sum(f, p, t) - compensator(f, p, nodes, t);
    const double m_s = jump_sum(f, p, s) - compensator(f, p, nodes, s);
    const double bracket = jump_sum(f2, p, t);
    const double pred = compensator(f2, p, nodes, t);
    mt[r] = m_t;
    mt2[r] = m_t * m_t;
    br[r] = bracket;
    pr[r] = pred;
    diff_sq[r] = m_t * m_t - pred;
    diff_br[r] = bracket - pred;
    for (std::size_t k = 0; k < np; ++k) inc[r * np + k] = (m_t - m_s) * prefixes[k].h(p, s);
    return m_t;
  });
  MartingaleReport rep;
  rep.mean = aggregate(mt);
  rep.second_moment = aggregate(mt2);
  rep.bracket = aggregate(br);
  rep.predictable = aggregate(pr);
  const Estimate zero = Estimate::exact(0.0);
  rep.mean_gate = gate(rep.mean, zero, options.gate);
  GateSpec paired = options.gate;
  if (!paired.abs_floor) paired.abs_floor = 1e-9 * std::max(1.0, std::abs(rep.predictable.mean));
  rep.second_moment_gate = gate(aggregate(diff_sq), zero, paired);
  rep.bracket_gate = gate(aggregate(diff_br), zero, paired);
  std::vector<double> column(n);
  for (std::size_t k = 0; k < np; ++k) {
    for (std::size_t r = 0; r < n; ++r) column[r] = inc[r * np + k];
    MartingaleReport::Increment i;
    i.name = prefixes[k].name;
    i.value = aggregate(column);
    i.gate = gate(i.value, zero, options.gate);
    rep.increments.push_back(std::move(i));
  }
  return rep;
}

LevyReport predictable_factor_check(const TimeFactor& g, const JumpFunctional& f, const LevyMeasureSpec& levy,
                                    double horizon, const LevyOptions& options) {
  if (!g.g) throw std::invalid_argument("predictable factor: g is empty");
  JumpFunctional h = f;
  h.evaluator = [g = g.g, inner = f.evaluator](std::span<const JumpArg> a) {
    const double gu = g(a[0].u);
    return gu == 0.0 ? 0.0 : gu * inner(a);
  };
  h.time_breaks.insert(h.time_breaks.end(), g.breaks.begin(), g.breaks.end());
  h.u_degree = f.u_degree < 0 || g.degree < 0 ? -1 : f.u_degree + g.degree;
  return levy_system_simple(h, levy, horizon, options);
}

std::string path_summary_csv(const LevyMeasureSpec& levy, double horizon, const LevyOptions& options) {
  const int d = levy.dim();
  const Point drift = or_zero(options.drift, d), start = or_zero(options.start, d);
  std::ostringstream out;
  out.precision(17);
  out << "replicate,jumps,first_jump";
  for (int k = 0; k < d; ++k) out << ",x_T_" << k;
  out << '\n';
  const std::string id = options.scenario + "/lhs";
  for (std::size_t r = 0; r < options.mc.replicates; ++r) {
    Stream stream(options.mc.seed, id, r);
    const PathRecord p = simulate_path(levy, drift, horizon, stream, start);
    out << r << ',' << p.jump_count() << ',';
    if (!p.times.empty()) out << p.times[0];
    const Point x = p.at(horizon);
    for (int k = 0; k < d; ++k) out << ',' << x[k];
    out << '\n';
  }
  return out.str();
}

}  // namespace ppv
