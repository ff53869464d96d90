#pragma once

#include "ppv/configurations.hpp"
#include "ppv/space_measure.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ppv {

/// E g(ω) = e^{-σ(X)} Σ_n (1/n!) ∫ g({y_1..y_n}) σ^n(dy), truncated at n_max.
struct SeriesSpec {
  /// A 0-process; its coefficient of order n is g evaluated on {y_1..y_n}.
  ProcessSpec g;
  /// Defaults to ceil(m + 10 sqrt(m) + 10) for m = σ(X).
  std::optional<int> n_max;
  /// sup |g|, enables the truncation bound.
  std::optional<double> bound_hint;
};

struct SeriesResult {
  double value = 0.0;
  /// sup|g| · P(N > last_order); empty without a bound hint.
  std::optional<double> truncation_bound;
  int n_max = 0;
  int last_order = -1;
  bool complete = true;
  /// e^{-m} (1/n!) ∫ g_(n) dσ^n for n = 0..last_order.
  std::vector<double> order_terms;
  std::string note;
};

int default_series_order(double mass);

/// P(N > n) for N ~ Poisson(mean).
double poisson_tail(double mean, int n);

SeriesResult expectation_series(const SeriesSpec& spec, const IntensitySpec& intensity, const QuadratureSpec& quad = {});

}  // namespace ppv
