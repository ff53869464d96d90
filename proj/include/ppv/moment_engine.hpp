#pragma once

#include "ppv/palm_engine.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ppv {

struct MomentFactor {
  ProcessSpec process;
  int power = 1;
  EpsilonVector eps;
};

/// E f_0(ω) Π_α (∫ f_α dω_{ε_(α)})^{n_α}.
struct MomentSpec {
  std::vector<MomentFactor> factors;
  /// Optional 0-process weight f_0.
  std::optional<ProcessSpec> weight;
};

using MomentTerm = ExpansionTerm;

/// Labeled index S of the linearised product.
LabeledIndex moment_index(const MomentSpec& spec);

/// One term per labeled partition in 𝒫^ε(S), in enumeration order.
std::vector<MomentTerm> expand_moment_terms(const MomentSpec& spec);

struct MomentOptions {
  McBudget mc;
  QuadratureSpec quad;
  GateSpec gate;
  RhsMode mode = RhsMode::McOuter;
  bool symmetrize = false;
  std::string scenario = "moment";
};

/// Monte Carlo of f_0(ω) Π (mixed integral)^{n_α}.
Estimate estimate_moment_lhs(const MomentSpec& spec, const IntensitySpec& intensity, const MomentOptions& options,
                             NestOrder order = NestOrder::LastOutermost);

VerificationReport evaluate_moment(const MomentSpec& spec, const IntensitySpec& intensity,
                                   const MomentOptions& options = {});

/// The eleven integral groups of E(∫∫ f dω dω)^2 for a 2-process, with multiplicities 1,2,2,1,1,1,2,2,1,1,1.
std::vector<ExpansionTerm> second_moment_groups(const ProcessSpec& f);

/// Group (0..10) of second_moment_groups that a partition of {1,2,3,4} falls into
/// once f(x1,x2)f(x3,x4) is rewritten with relabelled variables.
int second_moment_group_of(const Partition& p);

RhsEstimate second_moment_2process_explicit(const ProcessSpec& f, const IntensitySpec& intensity,
                                            const MomentOptions& options = {});

/// The two terms of E(∫∫ f(x1,x2) σ(dx1) ω(dx2))^2.
std::vector<ExpansionTerm> mixed_second_moment_terms(const ProcessSpec& f);

struct MixedSecondMomentReport {
  /// Squared ε=(0,1) integral, σ coordinate outermost.
  Estimate lhs_sigma_outer;
  /// Same integral with the ω coordinate outermost.
  Estimate lhs_omega_outer;
  RhsEstimate rhs_explicit;
  RhsEstimate rhs_generic;
  GateResult order_gate;
  GateResult expansion_gate;
  GateResult generic_gate;

  bool passed() const { return order_gate.passed && expansion_gate.passed && generic_gate.passed; }
};

MixedSecondMomentReport second_moment_mixed_explicit(const ProcessSpec& f, const IntensitySpec& intensity,
                                                     const MomentOptions& options = {});

}  // namespace ppv
