#pragma once

#include "ppv/configurations.hpp"
#include "ppv/mc_stats.hpp"
#include "ppv/partitions.hpp"
#include "ppv/space_measure.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ppv {

using TermIntegrand = std::function<double(PointSpan y, const Configuration& omega)>;

/// One summand of a partition expansion: multiplicity · ∫_{X^k_≠} E integrand(y; ω) σ^k(dy).
///
/// The integrand performs its own augmentation of ω.
struct ExpansionTerm {
  Partition partition;
  int k = 0;
  EpsilonVector block_eps;
  TermIntegrand integrand;
  std::string label;
  double multiplicity = 1.0;
};

using PalmTerm = ExpansionTerm;

/// Test hooks that deliberately break the expansion.
enum class ExpansionHook {
  None,
  /// Keep only the all-singleton partition (correct only for f vanishing on diagonals).
  SingletonsOnly,
  /// Use every partition of {1..n}, ignoring ε-admissibility; a block's ε is its maximum.
  Unfiltered,
};

std::vector<PalmTerm> expand_rhs(const ProcessSpec& f, const EpsilonVector& eps,
                                 ExpansionHook hook = ExpansionHook::None);

enum class RhsMode {
  /// Per term: independent ω and y ~ σ/σ(X), weighted by σ(X)^k.
  McOuter,
  /// Per replicate: one ω, tensor quadrature over y. Falls back to McOuter when k·d > 3.
  QuadratureOuter,
  /// Per replicate: one ω and one y-tuple shared by all terms (common random numbers).
  Shared,
};

struct RhsOptions {
  RhsMode mode = RhsMode::McOuter;
  std::string scenario = "palm";
  /// Shared mode: average each integrand over all k! orderings of y.
  bool symmetrize = false;
};

struct TermEstimate {
  std::string label;
  std::string partition;
  int k = 0;
  double multiplicity = 1.0;
  Estimate value;
  std::string mode;
};

struct RhsEstimate {
  Estimate total;
  std::vector<TermEstimate> terms;
  std::vector<std::string> notes;
};

struct LhsOptions {
  std::string scenario = "palm";
  NestOrder order = NestOrder::LastOutermost;
};

/// Monte Carlo of E ∫ f dω_ε.
Estimate estimate_lhs(const ProcessSpec& f, const EpsilonVector& eps, const IntensitySpec& intensity,
                      const McBudget& mc, const QuadratureSpec& quad = {}, const LhsOptions& options = {});

RhsEstimate estimate_rhs(const std::vector<ExpansionTerm>& terms, const IntensitySpec& intensity,
                         const McBudget& mc, const QuadratureSpec& quad = {}, const RhsOptions& options = {});

struct VerificationReport {
  Estimate lhs;
  RhsEstimate rhs;
  GateSpec gate_spec;
  GateResult gate;

  bool passed() const { return gate.passed; }
};

struct VerifyOptions {
  McBudget mc;
  QuadratureSpec quad;
  GateSpec gate;
  RhsMode mode = RhsMode::McOuter;
  ExpansionHook hook = ExpansionHook::None;
  std::string scenario = "palm";
};

VerificationReport verify_identity(const ProcessSpec& f, const EpsilonVector& eps, const IntensitySpec& intensity,
                                   const VerifyOptions& options = {});

const char* to_string(RhsMode mode);

}  // namespace ppv
