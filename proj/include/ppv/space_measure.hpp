#pragma once

#include "ppv/core.hpp"
#include "ppv/mc_stats.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ppv {

/// Closed axis-aligned box [lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}].
class Window {
 public:
  Window() = default;
  Window(std::span<const double> lo, std::span<const double> hi);
  Window(std::initializer_list<double> lo, std::initializer_list<double> hi);
  /// The d-dimensional cube [lo, hi]^d.
  static Window cube(int dim, double lo, double hi);

  int dim() const { return static_cast<int>(lo_.size()); }
  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }
  double volume() const;
  bool contains(const Point& x) const;
  /// Maps u in [0,1]^d to the box.
  Point map_unit(const Point& u) const { return lo_ + (hi_ - lo_).cwiseProduct(u); }
  /// Intersection with another box of the same dimension; empty if disjoint.
  std::optional<Window> intersect(const Window& other) const;

 private:
  Point lo_;
  Point hi_;
};

using DensityFn = std::function<double(const Point&)>;

/// Finite non-atomic measure on a window, given by a density.
class IntensitySpec {
 public:
  /// `mass_hint` and `density_bound` are used verbatim when given; otherwise the
  /// mass is integrated with the default quadrature and the bound estimated on
  /// a vertex grid.
  IntensitySpec(Window window, DensityFn density, std::optional<double> mass_hint = {},
                std::optional<double> density_bound = {}, std::string label = "custom");

  const Window& window() const { return window_; }
  int dim() const { return window_.dim(); }
  double density(const Point& x) const { return density_(x); }
  const DensityFn& density_fn() const { return density_; }
  /// sigma(window).
  double mass() const { return mass_; }
  double density_bound() const { return bound_; }
  const std::string& label() const { return label_; }

  /// Coordinates (on every axis) where the density may jump; used to split 1-d integrals.
  const std::vector<double>& breaks() const { return breaks_; }
  IntensitySpec& set_breaks(std::vector<double> b) {
    breaks_ = std::move(b);
    return *this;
  }

  /// sigma(box ∩ window), integrated to near machine precision in d = 1.
  double box_mass(const Window& box) const;

 private:
  Window window_;
  DensityFn density_;
  double mass_ = 0.0;
  double bound_ = 0.0;
  std::string label_;
  std::vector<double> breaks_;
};

// Density catalog. Each returns an intensity with exact mass and supremum where available.
IntensitySpec constant_intensity(const Window& w, double c);
IntensitySpec linear_intensity(const Window& w, double c0, std::span<const double> slope);
IntensitySpec gaussian_bump_intensity(const Window& w, double base, double amplitude, const Point& center,
                                      double width);
IntensitySpec tabulated_intensity(const Window& w, int cells_per_axis, std::vector<double> values);
/// Same measure with the open ball {|x| < radius} removed.
IntensitySpec exclude_core(const IntensitySpec& base, double radius);

enum class QuadratureScheme { Automatic, TensorMidpoint, QuasiRandom };

struct QuadratureSpec {
  QuadratureScheme scheme = QuadratureScheme::Automatic;
  /// Tensor rule: nodes per axis for the first coordinate; 0 selects 64/32/16 for d = 1/2/3.
  std::size_t points_per_axis = 0;
  /// Quasi-random rule: number of Halton points; 0 selects 4096.
  std::size_t total_points = 0;
  /// Largest admissible number of integrand evaluations for one integral.
  std::size_t max_evaluations = std::size_t{1} << 24;
};

/// The rule actually used for a k-fold integral in dimension d.
struct ResolvedQuadrature {
  QuadratureScheme scheme = QuadratureScheme::TensorMidpoint;
  std::size_t points_per_axis = 0;
  std::size_t total_points = 0;
};

ResolvedQuadrature resolve_quadrature(const QuadratureSpec& quad, int k, int dim);

/// Nodes per axis used for coordinate `coordinate` of a tensor rule with base count n.
///
/// Successive coordinates get counts with distinct 2-adic valuations, so their
/// midpoints never coincide and the tensor rule never samples a diagonal.
std::size_t tensor_axis_count(std::size_t n, int coordinate);

/// Weighted nodes for one coordinate: sigma(dx) ≈ Σ weight_i δ_{point_i}.
struct NodeSet {
  PointList points;
  std::vector<double> weights;
};

/// Midpoint nodes of the window for tensor coordinate `coordinate`; zero-weight nodes dropped.
NodeSet tensor_nodes(const IntensitySpec& intensity, std::size_t points_per_axis, int coordinate);

/// Coordinate `dim` of Halton point `index` (radical inverse in the dim-th prime base).
double halton(std::uint64_t index, int dim);

double sigma_mass(const IntensitySpec& intensity, const QuadratureSpec& quad = {});

/// One point with law sigma / sigma(window), by rejection against the density bound.
Point sample_sigma_point(const IntensitySpec& intensity, Stream& stream);

namespace detail {

struct Neumaier {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

[[noreturn]] void throw_cap(std::size_t needed, std::size_t cap, int k);
[[noreturn]] void throw_non_finite(PointSpan nodes, double value);
[[noreturn]] void throw_non_finite_density(const Point& node, double value);

}  // namespace detail

/// ∫ g(y_1..y_k) sigma(dy_1)...sigma(dy_k) by the resolved rule.
template <class G>
double quadrature_integrate(G&& g, int k, const IntensitySpec& intensity, const QuadratureSpec& quad = {}) {
  if (k < 1) throw std::invalid_argument("quadrature_integrate: arity must be >= 1");
  const int d = intensity.dim();
  const ResolvedQuadrature rule = resolve_quadrature(quad, k, d);
  PointList args(static_cast<std::size_t>(k));
  detail::Neumaier acc;

  if (rule.scheme == QuadratureScheme::TensorMidpoint) {
    std::vector<NodeSet> nodes;
    double total = 1.0;
    for (int j = 0; j < k; ++j) {
      nodes.push_back(tensor_nodes(intensity, rule.points_per_axis, j));
      total *= std::pow(static_cast<double>(tensor_axis_count(rule.points_per_axis, j)), d);
    }
    if (total > static_cast<double>(quad.max_evaluations)) {
      detail::throw_cap(static_cast<std::size_t>(total), quad.max_evaluations, k);
    }
    for (const auto& n : nodes) {
      if (n.points.empty()) return 0.0;
    }
    std::vector<std::size_t> idx(static_cast<std::size_t>(k), 0);
    for (int j = 0; j < k; ++j) args[j] = nodes[j].points[0];
    for (;;) {
      double w = 1.0;
      for (int j = 0; j < k; ++j) w *= nodes[j].weights[idx[j]];
      const double v = g(PointSpan(args));
      if (!std::isfinite(v)) detail::throw_non_finite(args, v);
      acc.add(w * v);
      // odometer, coordinate 0 fastest
      int j = 0;
      for (; j < k; ++j) {
        if (++idx[j] < nodes[j].points.size()) {
          args[j] = nodes[j].points[idx[j]];
          break;
        }
        idx[j] = 0;
        args[j] = nodes[j].points[0];
      }
      if (j == k) break;
    }
    return acc.value();
  }

  const std::size_t n = rule.total_points;
  if (n > quad.max_evaluations) detail::throw_cap(n, quad.max_evaluations, k);
  const Window& w = intensity.window();
  const double scale = std::pow(w.volume(), k) / static_cast<double>(n);
  Point u(d);
  for (std::size_t i = 0; i < n; ++i) {
    double weight = scale;
    for (int j = 0; j < k; ++j) {
      for (int a = 0; a < d; ++a) u[a] = halton(i + 1, j * d + a);
      args[j] = w.map_unit(u);
      const double rho = intensity.density(args[j]);
      if (!std::isfinite(rho)) detail::throw_non_finite_density(args[j], rho);
      weight *= rho;
    }
    if (weight == 0.0) continue;
    const double v = g(PointSpan(args));
    if (!std::isfinite(v)) detail::throw_non_finite(args, v);
    acc.add(weight * v);
  }
  return acc.value();
}

}  // namespace ppv
