#pragma once

#include "ppv/core.hpp"
#include "ppv/mc_stats.hpp"
#include "ppv/space_measure.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace ppv {

class DuplicatePointError : public Error {
 public:
  using Error::Error;
};

/// A finite set of distinct points, kept in lexicographic order.
///
/// Doubles as the point measure Σ δ_y over its atoms.
class Configuration {
 public:
  Configuration() = default;
  /// Throws DuplicatePointError if two points coincide.
  explicit Configuration(PointList points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const PointList& points() const { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  bool contains(const Point& x) const;
  /// ω(box).
  std::size_t count_in(const Window& box) const;
  /// Set union ω ∪ extra; coincident points collapse.
  Configuration with_points(PointSpan extra) const;
  /// True if some point of `extra` is an atom of ω or repeats within `extra`.
  bool collides(PointSpan extra) const;

 private:
  PointList points_;
};

using ProcessFn = std::function<double(PointSpan, const Configuration&)>;

/// A k-process f(x_1..x_k; ω). Arity 0 is a random variable f(ω).
struct ProcessSpec {
  int arity = 0;
  ProcessFn evaluator;
  bool vanishes_on_diagonals = false;
  /// Catalog name and JSON-encoded parameters, empty for ad-hoc processes.
  std::string catalog_id;
  std::string catalog_params;

  double operator()(PointSpan x, const Configuration& omega) const { return evaluator(x, omega); }
  double operator()(const Configuration& omega) const { return evaluator(PointSpan{}, omega); }
};

/// ε = (ε_1..ε_n) ∈ {0,1}^n.
class EpsilonVector {
 public:
  EpsilonVector() = default;
  explicit EpsilonVector(std::vector<std::uint8_t> bits);
  EpsilonVector(std::initializer_list<int> bits);
  /// Parses a string of '0'/'1' characters.
  static EpsilonVector parse(std::string_view bits);
  static EpsilonVector ones(std::size_t n) { return EpsilonVector(std::vector<std::uint8_t>(n, 1)); }
  static EpsilonVector zeros(std::size_t n) { return EpsilonVector(std::vector<std::uint8_t>(n, 0)); }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  std::size_t count_ones() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::string to_string() const;
  bool operator==(const EpsilonVector&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// ω ~ Poisson(σ): N ~ Poisson(σ(window)), then N i.i.d. points of law σ/σ(window).
Configuration sample_configuration(const IntensitySpec& intensity, Stream& stream);

/// Σ_{x ∈ ω} f(x; ω).
double point_integral(const ProcessSpec& f, const Configuration& omega);

/// Which coordinate of a mixed integral is the outermost loop.
enum class NestOrder { LastOutermost, FirstOutermost };

/// ∫ f(x; ω) ω_{ε_1}(dx_1)...ω_{ε_n}(dx_n) with ω_1 = ω and ω_0 = σ.
///
/// ε_i = 1 coordinates run over all atoms, repetitions across coordinates
/// included; ε_i = 0 coordinates are σ-quadratures.
double mixed_multiple_integral(const ProcessSpec& f, const Configuration& omega, const EpsilonVector& eps,
                               const IntensitySpec& intensity, const QuadratureSpec& quad = {},
                               NestOrder order = NestOrder::LastOutermost);

// Process catalog.

/// f ≡ c.
ProcessSpec const_process(int arity, double c = 1.0);
/// f = scale · Π_i (offset + Π_a x_{i,a}).
ProcessSpec coordinate_product_process(int arity, double scale = 1.0, double offset = 0.0);
/// f = 1 when all arguments coincide (arity ≥ 2).
ProcessSpec diag_indicator_process(int arity = 2);
/// f = Π_i (offset + Π_a x_{i,a}) · ω(B).
ProcessSpec count_weighted_process(int arity, const Window& box, double offset = 0.0);
/// f = exp(-θ |ω|), constant in the point arguments.
ProcessSpec exp_count_process(int arity, double theta = 1.0);
/// Coordinate product times the indicator that all arguments are distinct.
ProcessSpec offdiag_product_process(int arity, double scale = 1.0, double offset = 0.0);

}  // namespace ppv
