#pragma once

#include "ppv/core.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace ppv {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter apply(Counter ctr, Key key);
};

/// Identifies one independent random stream.
struct StreamKey {
  std::uint64_t master_seed = 0;
  std::string scenario_id;
  std::uint64_t replicate_index = 0;
};

/// Counter-based random stream; satisfies UniformRandomBitGenerator.
///
/// The stream for (seed, scenario, replicate) is a pure function of the key, so
/// any scheduling of replicates over workers reproduces the same numbers.
class Stream {
 public:
  using result_type = std::uint32_t;

  explicit Stream(const StreamKey& key);
  Stream(std::uint64_t master_seed, std::string_view scenario_id, std::uint64_t replicate_index);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform on [0,1) with 53 random bits.
  double uniform();
  /// Uniform on (0,1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double exponential(double rate);
  std::uint64_t poisson(double mean);

 private:
  Philox4x32::Key key_{};
  std::uint64_t block_ = 0;
  std::uint64_t replicate_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
};

std::uint64_t hash_scenario(std::string_view scenario_id);

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t replicates = 1;

  static Estimate exact(double value) { return {value, 0.0, 1}; }
};

/// Mean and standard error of at least two finite samples, reduced in index order.
Estimate aggregate(std::span<const double> samples);

/// Sum of independent estimates; standard errors combined in quadrature.
Estimate sum_independent(std::span<const Estimate> parts);

/// Neumaier-compensated sum in index order.
double compensated_sum(std::span<const double> values);

struct GateSpec {
  double z_max = 4.0;
  /// Absolute slack; defaults to 1e-9 * max(1, |a.mean|).
  std::optional<double> abs_floor;
  /// Optional relative slack: the threshold is at least rel_tol * max(|a|,|b|).
  double rel_tol = 0.0;
};

struct GateResult {
  double difference = 0.0;
  double combined_se = 0.0;
  double z_score = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

GateResult gate(const Estimate& a, const Estimate& b, const GateSpec& spec = {});

/// Default worker count: PPV_WORKERS if set, else the hardware concurrency.
unsigned default_workers();

/// Runs body(r) for r in [0, count) on `workers` threads.
///
/// Each replicate must write only to its own slots. If any replicate throws,
/// the exception of the smallest failing index is rethrown, independent of
/// scheduling.
template <class Body>
void for_each_replicate(std::size_t count, unsigned workers, Body&& body) {
  if (workers <= 1 || count < 2) {
    for (std::size_t r = 0; r < count; ++r) body(r);
    return;
  }
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = count;
  std::exception_ptr error;
  auto run = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      const std::size_t end = std::min(count, (c + 1) * kChunk);
      for (std::size_t r = c * kChunk; r < end; ++r) {
        try {
          body(r);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (r < error_index) {
            error_index = r;
            error = std::current_exception();
          }
          break;
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, chunks));
  pool.reserve(n);
  for (unsigned w = 0; w < n; ++w) pool.emplace_back(run);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Convenience: one scalar sample per replicate.
template <class Fn>
std::vector<double> sample_replicates(std::size_t count, unsigned workers, Fn&& fn) {
  std::vector<double> out(count);
  for_each_replicate(count, workers, [&](std::size_t r) { out[r] = fn(r); });
  return out;
}

/// sample_replicates that tags numeric failures and non-finite values with the replicate index.
template <class Fn>
std::vector<double> checked_samples(std::size_t count, unsigned workers, Fn&& fn) {
  return sample_replicates(count, workers, [&](std::size_t r) {
    double v = 0.0;
    try {
      v = fn(r);
    } catch (const NumericError& e) {
      throw NumericError("replicate " + std::to_string(r) + ": " + e.what());
    }
    if (!std::isfinite(v)) throw NumericError("replicate " + std::to_string(r) + ": non-finite value " + std::to_string(v));
    return v;
  });
}

/// Monte Carlo budget shared by every estimator.
struct McBudget {
  std::size_t replicates = 10000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

}  // namespace ppv
