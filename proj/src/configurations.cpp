#include "ppv/configurations.hpp"

#include <algorithm>
#include <sstream>

namespace ppv {

Configuration::Configuration(PointList points) : points_(std::move(points)) {
  std::sort(points_.begin(), points_.end(), lex_less);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (same_point(points_[i - 1], points_[i])) {
      throw DuplicatePointError("configuration has a repeated point " + format_point(points_[i]));
    }
  }
}

bool Configuration::contains(const Point& x) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), x, lex_less);
  return it != points_.end() && same_point(*it, x);
}

std::size_t Configuration::count_in(const Window& box) const {
  return static_cast<std::size_t>(
      std::count_if(points_.begin(), points_.end(), [&](const Point& p) { return box.contains(p); }));
}

Configuration Configuration::with_points(PointSpan extra) const {
  Configuration out;
  out.points_.reserve(points_.size() + extra.size());
  out.points_ = points_;
  for (const auto& p : extra) {
    auto it = std::lower_bound(out.points_.begin(), out.points_.end(), p, lex_less);
    if (it != out.points_.end() && same_point(*it, p)) continue;
    out.points_.insert(it, p);
  }
  return out;
}

bool Configuration::collides(PointSpan extra) const {
  for (std::size_t i = 0; i < extra.size(); ++i) {
    if (contains(extra[i])) return true;
    for (std::size_t j = 0; j < i; ++j) {
      if (same_point(extra[i], extra[j])) return true;
    }
  }
  return false;
}

EpsilonVector::EpsilonVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_) {
    if (b > 1) throw std::invalid_argument("EpsilonVector: entries must be 0 or 1");
  }
}

EpsilonVector::EpsilonVector(std::initializer_list<int> bits) {
  for (int b : bits) {
    if (b != 0 && b != 1) throw std::invalid_argument("EpsilonVector: entries must be 0 or 1");
    bits_.push_back(static_cast<std::uint8_t>(b));
  }
}

EpsilonVector EpsilonVector::parse(std::string_view bits) {
  std::vector<std::uint8_t> out;
  for (char c : bits) {
    if (c != '0' && c != '1') throw std::invalid_argument("epsilon bits must be a string of 0 and 1");
    out.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  if (out.empty()) throw std::invalid_argument("epsilon bits must be nonempty");
  return EpsilonVector(std::move(out));
}

std::size_t EpsilonVector::count_ones() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string EpsilonVector::to_string() const {
  std::string s;
  for (auto b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

Configuration sample_configuration(const IntensitySpec& intensity, Stream& stream) {
  const std::uint64_t n = stream.poisson(intensity.mass());
  for (;;) {
    PointList pts;
    pts.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) pts.push_back(sample_sigma_point(intensity, stream));
    try {
      return Configuration(std::move(pts));
    } catch (const DuplicatePointError&) {
      // probability zero under a non-atomic σ; draw the points again
    }
  }
}

double point_integral(const ProcessSpec& f, const Configuration& omega) {
  if (f.arity != 1) throw std::invalid_argument("point_integral: process must have arity 1");
  detail::Neumaier acc;
  for (const auto& p : omega) acc.add(f(PointSpan(&p, 1), omega));
  return acc.value();
}

double mixed_multiple_integral(const ProcessSpec& f, const Configuration& omega, const EpsilonVector& eps,
                               const IntensitySpec& intensity, const QuadratureSpec& quad, NestOrder order) {
  const int n = f.arity;
  if (n < 1 || static_cast<std::size_t>(n) != eps.size()) {
    throw std::invalid_argument("mixed_multiple_integral: epsilon length must equal the process arity");
  }
  const int sigma_coords = n - static_cast<int>(eps.count_ones());
  if (sigma_coords < n && omega.empty()) return 0.0;

  const ResolvedQuadrature rule = sigma_coords > 0 ? resolve_quadrature(quad, sigma_coords, intensity.dim())
                                                   : ResolvedQuadrature{};
  PointList args(static_cast<std::size_t>(n));

  if (sigma_coords > 0 && rule.scheme == QuadratureScheme::QuasiRandom) {
    // atoms outer, joint quasi-random rule over the σ-coordinates inner
    std::vector<int> atom_coords, sigma_idx;
    for (int i = 0; i < n; ++i) (eps[static_cast<std::size_t>(i)] ? atom_coords : sigma_idx).push_back(i);
    std::vector<std::size_t> idx(atom_coords.size(), 0);
    detail::Neumaier acc;
    for (;;) {
      for (std::size_t j = 0; j < atom_coords.size(); ++j) args[atom_coords[j]] = omega[idx[j]];
      QuadratureSpec q = quad;
      q.scheme = QuadratureScheme::QuasiRandom;
      acc.add(quadrature_integrate(
          [&](PointSpan ys) {
            for (std::size_t j = 0; j < sigma_idx.size(); ++j) args[sigma_idx[j]] = ys[j];
            return f(PointSpan(args), omega);
          },
          sigma_coords, intensity, q));
      std::size_t j = 0;
      for (; j < idx.size(); ++j) {
        if (++idx[j] < omega.size()) break;
        idx[j] = 0;
      }
      if (j == idx.size()) break;
    }
    return acc.value();
  }

  // Tensor nesting: one weighted node list per coordinate.
  std::vector<NodeSet> nodes(static_cast<std::size_t>(n));
  NodeSet atoms;
  atoms.points = omega.points();
  atoms.weights.assign(omega.size(), 1.0);
  double sigma_evals = 1.0;
  int sigma_index = 0;
  for (int i = 0; i < n; ++i) {
    if (eps[static_cast<std::size_t>(i)]) {
      nodes[i] = atoms;
    } else {
      nodes[i] = tensor_nodes(intensity, rule.points_per_axis, sigma_index);
      sigma_evals *= std::pow(static_cast<double>(tensor_axis_count(rule.points_per_axis, sigma_index)),
                              intensity.dim());
      ++sigma_index;
    }
  }
  if (sigma_evals > static_cast<double>(quad.max_evaluations)) {
    detail::throw_cap(static_cast<std::size_t>(sigma_evals), quad.max_evaluations, sigma_coords);
  }
  for (const auto& ns : nodes) {
    if (ns.points.empty()) return 0.0;
  }
  // nest[0] is the innermost (fastest) coordinate
  std::vector<int> nest(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nest[i] = order == NestOrder::LastOutermost ? i : n - 1 - i;

  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) args[i] = nodes[i].points[0];
  detail::Neumaier acc;
  for (;;) {
    double w = 1.0;
    for (int i = 0; i < n; ++i) w *= nodes[i].weights[idx[i]];
    const double v = f(PointSpan(args), omega);
    if (!std::isfinite(v)) detail::throw_non_finite(args, v);
    acc.add(w * v);
    int j = 0;
    for (; j < n; ++j) {
      const int c = nest[j];
      if (++idx[c] < nodes[c].points.size()) {
        args[c] = nodes[c].points[idx[c]];
        break;
      }
      idx[c] = 0;
      args[c] = nodes[c].points[0];
    }
    if (j == n) break;
  }
  return acc.value();
}

namespace {

double point_product(const Point& x) { return x.prod(); }

std::string params_json(std::initializer_list<std::pair<const char*, double>> kv) {
  std::ostringstream out;
  out.precision(17);
  out << '{';
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) out << ',';
    first = false;
    out << '"' << k << "\":" << v;
  }
  out << '}';
  return out.str();
}

}  // namespace

ProcessSpec const_process(int arity, double c) {
  return {arity, [c](PointSpan, const Configuration&) { return c; }, false, "const",
          params_json({{"arity", arity}, {"c", c}})};
}

ProcessSpec coordinate_product_process(int arity, double scale, double offset) {
  return {arity,
          [scale, offset](PointSpan x, const Configuration&) {
            double v = scale;
            for (const auto& p : x) v *= offset + point_product(p);
            return v;
          },
          false, "coordinate-product", params_json({{"arity", arity}, {"scale", scale}, {"offset", offset}})};
}

ProcessSpec diag_indicator_process(int arity) {
  if (arity < 2) throw std::invalid_argument("diag-indicator needs arity >= 2");
  return {arity,
          [](PointSpan x, const Configuration&) {
            for (std::size_t i = 1; i < x.size(); ++i) {
              if (!same_point(x[i], x[0])) return 0.0;
            }
            return 1.0;
          },
          false, "diag-indicator", params_json({{"arity", arity}})};
}

ProcessSpec count_weighted_process(int arity, const Window& box, double offset) {
  std::ostringstream params;
  params.precision(17);
  params << "{\"arity\":" << arity << ",\"offset\":" << offset << ",\"box_lo\":[";
  for (int a = 0; a < box.dim(); ++a) params << (a ? "," : "") << box.lo()[a];
  params << "],\"box_hi\":[";
  for (int a = 0; a < box.dim(); ++a) params << (a ? "," : "") << box.hi()[a];
  params << "]}";
  return {arity,
          [box, offset](PointSpan x, const Configuration& omega) {
            double v = static_cast<double>(omega.count_in(box));
            for (const auto& p : x) v *= offset + point_product(p);
            return v;
          },
          false, "count-weighted", params.str()};
}

ProcessSpec exp_count_process(int arity, double theta) {
  return {arity,
          [theta](PointSpan, const Configuration& omega) {
            return std::exp(-theta * static_cast<double>(omega.size()));
          },
          false, "exp-count", params_json({{"arity", arity}, {"theta", theta}})};
}

ProcessSpec offdiag_product_process(int arity, double scale, double offset) {
  return {arity,
          [scale, offset](PointSpan x, const Configuration&) {
            double v = scale;
            for (std::size_t i = 0; i < x.size(); ++i) {
              for (std::size_t j = 0; j < i; ++j) {
                if (same_point(x[i], x[j])) return 0.0;
              }
              v *= offset + point_product(x[i]);
            }
            return v;
          },
          true, "offdiag-product", params_json({{"arity", arity}, {"scale", scale}, {"offset", offset}})};
}

}  // namespace ppv
