#pragma once

#include "ppv/mc_stats.hpp"
#include "ppv/palm_engine.hpp"
#include "ppv/space_measure.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ppv {

/// Finite Lévy measure ν given as a density on a bounded jump window.
class LevyMeasureSpec {
 public:
  explicit LevyMeasureSpec(IntensitySpec density);

  int dim() const { return nu_.dim(); }
  double mass() const { return nu_.mass(); }
  const IntensitySpec& measure() const { return nu_; }
  /// ν(box).
  double box_mass(const Window& box) const { return nu_.box_mass(box); }

 private:
  IntensitySpec nu_;
};

/// Uniform density c on [-half_width, half_width]^d with the ball |z| < core removed.
LevyMeasureSpec uniform_levy(int dim, double half_width, double c, double core);

/// One compound Poisson path on (0, T].
struct PathRecord {
  double horizon = 0.0;
  std::vector<double> times;
  PointList sizes;
  Point drift;
  Point start;

  std::size_t jump_count() const { return times.size(); }
  /// X_{t-} = start + b t + Σ_{u_i < t} z_i.
  Point before(double t) const;
  /// X_t = start + b t + Σ_{u_i <= t} z_i.
  Point at(double t) const;
  /// Number of jumps with u_i <= t.
  std::size_t count_until(double t) const;
};

PathRecord simulate_path(const LevyMeasureSpec& levy, const Point& drift, double horizon, Stream& stream,
                         std::optional<Point> start = std::nullopt);

enum class JumpForm {
  /// F(u, x, w) with x = X_{u-}, w = X_u = x + z.
  PrePost,
  /// F(u, x, z) with x = X_{u-}, z = ΔX_u.
  PreJump,
};

/// (u, x, v) for one coordinate; v is w or z according to the functional's form.
struct JumpArg {
  double u = 0.0;
  Point x;
  Point v;
};

struct JumpFunctional {
  int arity = 1;
  JumpForm form = JumpForm::PrePost;
  std::function<double(std::span<const JumpArg>)> evaluator;
  /// Times where F jumps in u; u-integrals are split there.
  std::vector<double> time_breaks;
  /// Polynomial degree of F in u between breaks for fixed positions; < 0 if unknown.
  int u_degree = -1;
  std::string catalog_id;

  /// F evaluated from pre-jump positions and jump sizes.
  double operator()(std::span<const double> u, std::span<const Point> x, std::span<const Point> z) const;
  double single(double u, const Point& x, const Point& z) const;
};

// Functional catalog.

/// F ≡ 1 (the horizon indicator is applied by the engines).
JumpFunctional count_functional(int arity = 1);
/// 1{|z| > a} on every coordinate.
JumpFunctional tail_functional(double a, int arity = 1);
/// 1{X_{u-} ∈ A} on the last coordinate.
JumpFunctional occupation_functional(const Window& a, int arity = 1);
/// |z|^p.
JumpFunctional size_power_functional(double p);
/// 1{X_u ∈ B}.
JumpFunctional landing_functional(const Window& b);

/// Deterministic left-continuous time factor g(u).
struct TimeFactor {
  std::function<double(double)> g;
  std::vector<double> breaks;
  int degree = 0;
  std::string catalog_id;
};

TimeFactor unit_factor();
TimeFactor linear_factor(double slope = 1.0);
/// 1{u ∈ (0, a]}.
TimeFactor window_factor(double a);

struct LevyOptions {
  McBudget mc;
  GateSpec gate;
  /// ν-nodes per axis for z-integrals; 0 uses the quadrature default.
  std::size_t z_points = 0;
  Point drift;
  /// Starting point; zero if empty.
  Point start;
  std::string scenario = "levy";
};

struct LevyReport {
  Estimate lhs;
  Estimate rhs;
  GateResult gate;
  /// Semigroup evaluator, when computed.
  std::optional<double> semigroup;
  std::optional<GateResult> semigroup_gate;
  std::vector<std::string> notes;

  bool passed() const { return gate.passed && (!semigroup_gate || semigroup_gate->passed); }
};

/// ν-weighted nodes for z-integrals; points_per_axis 0 uses the quadrature default.
NodeSet levy_nodes(const LevyMeasureSpec& levy, std::size_t points_per_axis = 0);

/// Σ_{u_i <= until} F(u_i, X_{u_i-}, X_{u_i}).
double jump_sum(const JumpFunctional& f, const PathRecord& path, double until);
/// ∫_0^until ∫ F(u, X_u, X_u + z) ν(dz) du along one path.
double compensator(const JumpFunctional& f, const PathRecord& path, const NodeSet& z_nodes, double until);

LevyReport levy_system_simple(const JumpFunctional& f, const LevyMeasureSpec& levy, double horizon,
                              const LevyOptions& options = {});

struct GeneralLevyOptions {
  bool semigroup = false;
  /// Grid cells over the ν window for the semigroup evaluator (even; also run at half for extrapolation).
  std::size_t semigroup_cells = 128;
};

LevyReport levy_system_general(const JumpFunctional& f, const EpsilonVector& eps, const LevyMeasureSpec& levy,
                               double horizon, const LevyOptions& options = {},
                               const GeneralLevyOptions& general = {});

/// ∫_0^T ∫∫ F(u, x, x + z) p_u(dx) ν(dz) du with p_u from the truncated convolution series (n = 1, d = 1),
/// on lattices of `cells` and `cells / 2` cells combined by one Richardson step.
double semigroup_evaluator(const JumpFunctional& f, const LevyMeasureSpec& levy, double horizon, const Point& drift,
                           const Point& start, std::size_t cells);

struct ExitLawSpec {
  Window domain;
  Window a;
  Window b;
  /// Time interval I = (i_lo, i_hi]; i_hi is also the simulation horizon.
  double i_lo = 0.0;
  double i_hi = 1.0;
  std::size_t time_cells = 64;
  std::size_t space_cells = 129;
};

struct ExitLawReport {
  Estimate lhs;
  /// Grid (Dirichlet-kernel histogram) estimate of the right side.
  Estimate rhs;
  /// Exact pathwise occupation integral on the same paths as rhs.
  Estimate rhs_exact;
  double grid_bias = 0.0;
  /// P(τ_D > horizon) estimate.
  Estimate survival;
  GateResult gate;

  bool passed() const { return gate.passed; }
};

ExitLawReport exit_law_check(const LevyMeasureSpec& levy, const ExitLawSpec& spec, const LevyOptions& options = {});

/// Bounded functional of the path on [0, s].
struct PrefixFunctional {
  std::string name;
  std::function<double(const PathRecord&, double s)> h;
};

std::vector<PrefixFunctional> default_prefix_functionals();

struct MartingaleReport {
  Estimate mean;            // E M_t
  Estimate second_moment;   // E M_t^2
  Estimate bracket;         // E [M]_t
  Estimate predictable;     // E <M>_t
  GateResult mean_gate;
  GateResult second_moment_gate;
  /// Paired E([M]_t - <M>_t) against 0.
  GateResult bracket_gate;
  struct Increment {
    std::string name;
    Estimate value;  // E (M_t - M_s) h
    GateResult gate;
  };
  std::vector<Increment> increments;

  bool passed() const;
};

MartingaleReport martingale_checks(const JumpFunctional& f, const LevyMeasureSpec& levy, double t,
                                   const LevyOptions& options = {});

LevyReport predictable_factor_check(const TimeFactor& g, const JumpFunctional& f, const LevyMeasureSpec& levy,
                                    double horizon, const LevyOptions& options = {});

/// One CSV row per path: replicate, jumps, first jump time, X_T.
std::string path_summary_csv(const LevyMeasureSpec& levy, double horizon, const LevyOptions& options);

}  // namespace ppv
