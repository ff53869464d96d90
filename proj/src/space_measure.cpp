#include "ppv/space_measure.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <memory>
#include <sstream>

namespace ppv {

namespace {

Point to_point(std::span<const double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p[static_cast<Eigen::Index>(i)] = v[i];
  return p;
}

const std::vector<std::uint32_t>& primes() {
  static const std::vector<std::uint32_t> table = [] {
    std::vector<std::uint32_t> out;
    for (std::uint32_t n = 2; out.size() < 2048; ++n) {
      bool prime = true;
      for (std::uint32_t p : out) {
        if (p * p > n) break;
        if (n % p == 0) {
          prime = false;
          break;
        }
      }
      if (prime) out.push_back(n);
    }
    return out;
  }();
  return table;
}

// Nodes per axis for a tensor rule over `dims` total axes.
std::size_t default_axis_points(int dims) {
  switch (dims) {
    case 1:
      return 64;
    case 2:
      return 32;
    case 3:
      return 16;
    case 4:
      return 12;
    default:
      return 8;
  }
}

int two_adic(std::size_t n) {
  int v = 0;
  while (n % 2 == 0) {
    n /= 2;
    ++v;
  }
  return v;
}

// ∫ density over [a, b] on a 1-d window, split at the density breaks.
double integrate_1d(const IntensitySpec& s, double a, double b) {
  std::vector<double> cuts{a};
  for (double c : s.breaks()) {
    if (c > a && c < b) cuts.push_back(c);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  Point x(1);
  auto f = [&](double t) {
    x[0] = t;
    return s.density(x);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-13);
  }
  return total;
}

}  // namespace

Window::Window(std::span<const double> lo, std::span<const double> hi) {
  if (lo.empty() || lo.size() != hi.size()) throw std::invalid_argument("Window: bounds must have equal, nonzero length");
  if (lo.size() > static_cast<std::size_t>(kMaxDim)) throw std::invalid_argument("Window: dimension exceeds 3");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) {
      throw std::invalid_argument("Window: need finite lo < hi on every axis");
    }
  }
  lo_ = to_point(lo);
  hi_ = to_point(hi);
}

Window::Window(std::initializer_list<double> lo, std::initializer_list<double> hi)
    : Window(std::span<const double>(lo.begin(), lo.size()), std::span<const double>(hi.begin(), hi.size())) {}

Window Window::cube(int dim, double lo, double hi) {
  std::vector<double> l(static_cast<std::size_t>(dim), lo), h(static_cast<std::size_t>(dim), hi);
  return Window(l, h);
}

double Window::volume() const { return (hi_ - lo_).prod(); }

bool Window::contains(const Point& x) const {
  return x.size() == lo_.size() && (x.array() >= lo_.array()).all() && (x.array() <= hi_.array()).all();
}

std::optional<Window> Window::intersect(const Window& other) const {
  if (other.dim() != dim()) throw std::invalid_argument("Window::intersect: dimension mismatch");
  std::vector<double> lo(static_cast<std::size_t>(dim())), hi(lo.size());
  for (int i = 0; i < dim(); ++i) {
    lo[i] = std::max(lo_[i], other.lo_[i]);
    hi[i] = std::min(hi_[i], other.hi_[i]);
    if (!(lo[i] < hi[i])) return std::nullopt;
  }
  return Window(lo, hi);
}

IntensitySpec::IntensitySpec(Window window, DensityFn density, std::optional<double> mass_hint,
                             std::optional<double> density_bound, std::string label)
    : window_(std::move(window)), density_(std::move(density)), label_(std::move(label)) {
  if (!density_) throw std::invalid_argument("IntensitySpec: density is empty");
  if (density_bound) {
    bound_ = *density_bound;
  } else {
    // vertex grid including the boundary
    const int d = window_.dim();
    const std::size_t n = default_axis_points(d);
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    Point u(d);
    double best = 0.0;
    for (;;) {
      for (int a = 0; a < d; ++a) u[a] = static_cast<double>(idx[a]) / static_cast<double>(2 * n);
      const double v = density_(window_.map_unit(u));
      if (!std::isfinite(v) || v < 0.0) {
        throw NumericError("IntensitySpec: density is negative or non-finite at " + format_point(window_.map_unit(u)));
      }
      best = std::max(best, v);
      int a = 0;
      for (; a < d; ++a) {
        if (++idx[a] <= 2 * n) break;
        idx[a] = 0;
      }
      if (a == d) break;
    }
    bound_ = 1.1 * best;
  }
  if (!(bound_ > 0.0) || !std::isfinite(bound_)) throw NumericError("IntensitySpec: density bound must be positive and finite");
  mass_ = mass_hint ? *mass_hint : sigma_mass(*this);
  if (!(mass_ > 0.0) || !std::isfinite(mass_)) {
    throw NumericError("IntensitySpec: total mass must be finite and strictly positive");
  }
}

double IntensitySpec::box_mass(const Window& box) const {
  const auto cut = window_.intersect(box);
  if (!cut) return 0.0;
  if (dim() == 1) return integrate_1d(*this, cut->lo()[0], cut->hi()[0]);
  const int d = dim();
  const std::size_t n = 128 / static_cast<std::size_t>(d);
  const Point h = (cut->hi() - cut->lo()) / static_cast<double>(n);
  const double cell = h.prod();
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  Point x(d);
  detail::Neumaier acc;
  for (;;) {
    for (int a = 0; a < d; ++a) x[a] = cut->lo()[a] + (static_cast<double>(idx[a]) + 0.5) * h[a];
    acc.add(cell * density_(x));
    int a = 0;
    for (; a < d; ++a) {
      if (++idx[a] < n) break;
      idx[a] = 0;
    }
    if (a == d) break;
  }
  return acc.value();
}

IntensitySpec constant_intensity(const Window& w, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("constant intensity: c must be positive");
  return IntensitySpec(w, [c](const Point&) { return c; }, c * w.volume(), c, "constant");
}

IntensitySpec linear_intensity(const Window& w, double c0, std::span<const double> slope) {
  const int d = w.dim();
  if (static_cast<int>(slope.size()) != d) throw std::invalid_argument("linear intensity: slope length must equal dim");
  Point s(d);
  for (int a = 0; a < d; ++a) s[a] = slope[a];
  // extremes of an affine function on a box sit at corners
  double lo = c0, hi = c0, mid = c0;
  for (int a = 0; a < d; ++a) {
    lo += std::min(s[a] * w.lo()[a], s[a] * w.hi()[a]);
    hi += std::max(s[a] * w.lo()[a], s[a] * w.hi()[a]);
    mid += s[a] * 0.5 * (w.lo()[a] + w.hi()[a]);
  }
  if (lo < 0.0) throw std::invalid_argument("linear intensity: density negative on the window");
  if (!(hi > 0.0)) throw std::invalid_argument("linear intensity: density vanishes identically");
  return IntensitySpec(
      w, [c0, s](const Point& x) { return c0 + s.dot(x); }, mid * w.volume(), hi, "linear");
}

IntensitySpec gaussian_bump_intensity(const Window& w, double base, double amplitude, const Point& center,
                                      double width) {
  const int d = w.dim();
  if (center.size() != d) throw std::invalid_argument("gaussian-bump: center dimension mismatch");
  if (base < 0.0 || amplitude < 0.0 || !(width > 0.0) || !(base + amplitude > 0.0)) {
    throw std::invalid_argument("gaussian-bump: need base, amplitude >= 0, width > 0, base + amplitude > 0");
  }
  double gauss_mass = 1.0;
  for (int a = 0; a < d; ++a) {
    const double s = width * std::sqrt(2.0);
    gauss_mass *= width * std::sqrt(M_PI / 2.0) * (std::erf((w.hi()[a] - center[a]) / s) - std::erf((w.lo()[a] - center[a]) / s));
  }
  const double inv = 1.0 / (2.0 * width * width);
  return IntensitySpec(
      w, [=](const Point& x) { return base + amplitude * std::exp(-(x - center).squaredNorm() * inv); },
      base * w.volume() + amplitude * gauss_mass, base + amplitude, "gaussian-bump");
}

IntensitySpec tabulated_intensity(const Window& w, int cells_per_axis, std::vector<double> values) {
  const int d = w.dim();
  if (cells_per_axis < 1) throw std::invalid_argument("tabulated: cells_per_axis must be >= 1");
  std::size_t expected = 1;
  for (int a = 0; a < d; ++a) expected *= static_cast<std::size_t>(cells_per_axis);
  if (values.size() != expected) throw std::invalid_argument("tabulated: value count must be cells_per_axis^dim");
  double total = 0.0, top = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("tabulated: values must be finite and >= 0");
    total += v;
    top = std::max(top, v);
  }
  const double cell = w.volume() / static_cast<double>(expected);
  auto table = std::make_shared<const std::vector<double>>(std::move(values));
  const Point lo = w.lo();
  const Point span = w.hi() - w.lo();
  IntensitySpec out(
      w,
      [table, lo, span, cells_per_axis, d](const Point& x) {
        std::size_t flat = 0;
        std::size_t stride = 1;
        for (int a = 0; a < d; ++a) {
          auto i = static_cast<long>(std::floor((x[a] - lo[a]) / span[a] * cells_per_axis));
          i = std::clamp(i, 0L, static_cast<long>(cells_per_axis - 1));
          flat += static_cast<std::size_t>(i) * stride;
          stride *= static_cast<std::size_t>(cells_per_axis);
        }
        return (*table)[flat];
      },
      total * cell, top, "tabulated-grid");
  std::vector<double> cuts;
  if (d == 1) {
    for (int i = 1; i < cells_per_axis; ++i) cuts.push_back(lo[0] + span[0] * i / cells_per_axis);
  }
  out.set_breaks(std::move(cuts));
  return out;
}

IntensitySpec exclude_core(const IntensitySpec& base, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("exclude_core: radius must be >= 0");
  if (radius == 0.0) return base;
  DensityFn inner = base.density_fn();
  DensityFn cut = [inner, radius](const Point& x) { return x.norm() < radius ? 0.0 : inner(x); };
  std::optional<double> mass;
  std::vector<double> breaks = base.breaks();
  if (base.dim() == 1) {
    mass = base.mass() - base.box_mass(Window({-radius}, {radius}));
    breaks.push_back(-radius);
    breaks.push_back(radius);
  }
  IntensitySpec out(base.window(), cut, mass, base.density_bound(), base.label() + "-cored");
  out.set_breaks(std::move(breaks));
  return out;
}

ResolvedQuadrature resolve_quadrature(const QuadratureSpec& quad, int k, int dim) {
  ResolvedQuadrature out;
  out.points_per_axis = quad.points_per_axis ? quad.points_per_axis : default_axis_points(k * dim);
  out.total_points = quad.total_points ? quad.total_points : 4096;
  switch (quad.scheme) {
    case QuadratureScheme::TensorMidpoint:
      out.scheme = QuadratureScheme::TensorMidpoint;
      break;
    case QuadratureScheme::QuasiRandom:
      out.scheme = QuadratureScheme::QuasiRandom;
      break;
    case QuadratureScheme::Automatic:
      out.scheme = k * dim > 4 ? QuadratureScheme::QuasiRandom : QuadratureScheme::TensorMidpoint;
      break;
  }
  if (out.points_per_axis == 0 || out.total_points == 0) throw std::invalid_argument("quadrature: node count must be >= 1");
  return out;
}

std::size_t tensor_axis_count(std::size_t n, int coordinate) {
  if (coordinate == 0) return n;
  std::vector<int> used{two_adic(n)};
  std::size_t candidate = n;
  for (int j = 1; j <= coordinate; ++j) {
    for (;;) {
      if (candidate <= 1) {
        throw std::invalid_argument("tensor quadrature: too few nodes per axis to keep coordinate grids disjoint");
      }
      --candidate;
      const int v = two_adic(candidate);
      if (std::find(used.begin(), used.end(), v) == used.end()) {
        used.push_back(v);
        break;
      }
    }
  }
  return candidate;
}

NodeSet tensor_nodes(const IntensitySpec& intensity, std::size_t points_per_axis, int coordinate) {
  const Window& w = intensity.window();
  const int d = w.dim();
  const std::size_t n = tensor_axis_count(points_per_axis, coordinate);
  const Point h = (w.hi() - w.lo()) / static_cast<double>(n);
  const double cell = h.prod();
  NodeSet out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  Point x(d);
  for (;;) {
    for (int a = 0; a < d; ++a) x[a] = w.lo()[a] + (static_cast<double>(idx[a]) + 0.5) * h[a];
    const double rho = intensity.density(x);
    if (!std::isfinite(rho)) detail::throw_non_finite_density(x, rho);
    if (rho != 0.0) {
      out.points.push_back(x);
      out.weights.push_back(rho * cell);
    }
    int a = 0;
    for (; a < d; ++a) {
      if (++idx[a] < n) break;
      idx[a] = 0;
    }
    if (a == d) break;
  }
  return out;
}

double halton(std::uint64_t index, int dim) {
  const auto& p = primes();
  if (dim < 0 || static_cast<std::size_t>(dim) >= p.size()) throw std::invalid_argument("halton: dimension out of range");
  const std::uint64_t base = p[static_cast<std::size_t>(dim)];
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

double sigma_mass(const IntensitySpec& intensity, const QuadratureSpec& quad) {
  return quadrature_integrate([](PointSpan) { return 1.0; }, 1, intensity, quad);
}

Point sample_sigma_point(const IntensitySpec& intensity, Stream& stream) {
  const Window& w = intensity.window();
  const int d = w.dim();
  const double bound = intensity.density_bound();
  Point u(d);
  for (std::size_t attempt = 0; attempt < 100'000'000; ++attempt) {
    for (int a = 0; a < d; ++a) u[a] = stream.uniform();
    Point x = w.map_unit(u);
    const double rho = intensity.density(x);
    if (!std::isfinite(rho) || rho < 0.0) detail::throw_non_finite_density(x, rho);
    if (rho > bound) {
      throw NumericError("sample_sigma_point: density " + std::to_string(rho) + " exceeds the rejection bound " +
                         std::to_string(bound) + " at " + format_point(x) + " (density bound invalid)");
    }
    if (stream.uniform() * bound < rho) return x;
  }
  throw NumericError("sample_sigma_point: rejection sampler made no progress");
}

namespace detail {

void throw_cap(std::size_t needed, std::size_t cap, int k) {
  std::ostringstream msg;
  msg << "quadrature over " << k << " coordinates needs " << needed << " evaluations, above the cap of " << cap
      << "; use the Monte Carlo evaluator for this integral";
  throw CapExceededError(msg.str());
}

void throw_non_finite(PointSpan nodes, double value) {
  std::ostringstream msg;
  msg << "integrand is not finite (" << value << ") at nodes";
  for (const auto& p : nodes) msg << ' ' << format_point(p);
  throw NumericError(msg.str());
}

void throw_non_finite_density(const Point& node, double value) {
  std::ostringstream msg;
  msg << "density is not finite (" << value << ") at node " << format_point(node);
  throw NumericError(msg.str());
}

}  // namespace detail

}  // namespace ppv
