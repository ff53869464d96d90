#include "ppv/mc_stats.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>

namespace ppv {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Philox4x32::Counter Philox4x32::apply(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t hash_scenario(std::string_view scenario_id) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : scenario_id) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Stream::Stream(const StreamKey& key) : Stream(key.master_seed, key.scenario_id, key.replicate_index) {}

Stream::Stream(std::uint64_t master_seed, std::string_view scenario_id, std::uint64_t replicate_index)
    : replicate_(replicate_index) {
  const std::uint64_t k = splitmix64(splitmix64(master_seed) ^ hash_scenario(scenario_id));
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

Stream::result_type Stream::operator()() {
  if (used_ == 4) {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                  static_cast<std::uint32_t>(replicate_),
                                  static_cast<std::uint32_t>(replicate_ >> 32)};
    buffer_ = Philox4x32::apply(ctr, key_);
    ++block_;
    used_ = 0;
  }
  return buffer_[used_++];
}

double Stream::uniform() {
  const std::uint64_t a = (*this)() >> 5;
  const std::uint64_t b = (*this)() >> 6;
  return static_cast<double>(a * 67108864ull + b) * 0x1.0p-53;
}

double Stream::uniform_open() {
  const std::uint64_t a = (*this)() >> 5;
  const std::uint64_t b = (*this)() >> 6;
  return (static_cast<double>(a * 67108864ull + b) + 0.5) * 0x1.0p-53;
}

double Stream::exponential(double rate) { return -std::log(uniform_open()) / rate; }

std::uint64_t Stream::poisson(double mean) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(*this);
}

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

Estimate aggregate(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("aggregate: need at least two samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      std::ostringstream msg;
      msg << "sample " << i << " is not finite (" << samples[i] << ")";
      throw NumericError(msg.str());
    }
  }
  const double n = static_cast<double>(samples.size());
  const double mean = compensated_sum(samples) / n;
  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = samples[i] - mean;
    sq[i] = d * d;
  }
  const double var = compensated_sum(sq) / (n - 1.0);
  return {mean, std::sqrt(var / n), samples.size()};
}

Estimate sum_independent(std::span<const Estimate> parts) {
  Estimate total{0.0, 0.0, 0};
  std::vector<double> means;
  means.reserve(parts.size());
  double var = 0.0;
  for (const auto& p : parts) {
    means.push_back(p.mean);
    var += p.std_error * p.std_error;
    total.replicates = std::max(total.replicates, p.replicates);
  }
  total.mean = compensated_sum(means);
  total.std_error = std::sqrt(var);
  if (total.replicates == 0) total.replicates = 1;
  return total;
}

GateResult gate(const Estimate& a, const Estimate& b, const GateSpec& spec) {
  GateResult out;
  out.difference = a.mean - b.mean;
  out.combined_se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  const double floor = spec.abs_floor.value_or(1e-9 * std::max(1.0, std::abs(a.mean)));
  out.threshold = spec.z_max * out.combined_se + floor;
  if (spec.rel_tol > 0.0) {
    out.threshold = std::max(out.threshold, spec.rel_tol * std::max(std::abs(a.mean), std::abs(b.mean)));
  }
  if (out.combined_se > 0.0) {
    out.z_score = out.difference / out.combined_se;
  } else if (out.difference == 0.0) {
    out.z_score = 0.0;
  } else {
    out.z_score = std::copysign(std::numeric_limits<double>::infinity(), out.difference);
  }
  out.passed = std::abs(out.difference) <= out.threshold;
  return out;
}

unsigned default_workers() {
  if (const char* env = std::getenv("PPV_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

std::string format_point(const Point& p) {
  std::ostringstream out;
  out.precision(17);
  out << '(';
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (i) out << ", ";
    out << p[i];
  }
  out << ')';
  return out.str();
}

}  // namespace ppv
