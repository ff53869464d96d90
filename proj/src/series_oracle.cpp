#include "ppv/series_oracle.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>

namespace ppv {

int default_series_order(double mass) {
  return static_cast<int>(std::ceil(mass + 10.0 * std::sqrt(mass) + 10.0));
}

double poisson_tail(double mean, int n) {
  if (n < 0) return 1.0;
  // P(N <= n) = Q(n + 1, mean)
  return boost::math::gamma_p(static_cast<double>(n) + 1.0, mean);
}

SeriesResult expectation_series(const SeriesSpec& spec, const IntensitySpec& intensity, const QuadratureSpec& quad) {
  if (spec.g.arity != 0) throw std::invalid_argument("expectation_series: g must be a 0-process");
  const double m = intensity.mass();
  SeriesResult out;
  out.n_max = spec.n_max.value_or(default_series_order(m));
  if (out.n_max < 0) throw std::invalid_argument("expectation_series: n_max must be >= 0");

  const double log_em = -m;
  detail::Neumaier acc;
  for (int n = 0; n <= out.n_max; ++n) {
    double integral = 0.0;
    if (n == 0) {
      integral = spec.g(Configuration());
    } else {
      try {
        integral = quadrature_integrate(
            [&](PointSpan y) { return spec.g(Configuration(PointList(y.begin(), y.end()))); }, n, intensity, quad);
      } catch (const CapExceededError& e) {
        out.complete = false;
        out.note = "order " + std::to_string(n) + " skipped: " + e.what();
        break;
      }
    }
    // e^{-m}/n! folded into the log to stay finite for large n
    const double term = integral * std::exp(log_em - std::lgamma(static_cast<double>(n) + 1.0));
    out.order_terms.push_back(term);
    acc.add(term);
    out.last_order = n;
  }
  out.value = acc.value();
  if (spec.bound_hint) out.truncation_bound = *spec.bound_hint * poisson_tail(m, out.last_order);
  return out;
}

}  // namespace ppv
