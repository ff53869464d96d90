#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppv {

/// Largest supported spatial dimension. Points live on the stack.
inline constexpr int kMaxDim = 3;

using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using PointList = std::vector<Point>;
using PointSpan = std::span<const Point>;

/// Strict lexicographic order on coordinates; used for canonical configurations.
inline bool lex_less(const Point& a, const Point& b) {
  const Eigen::Index n = std::min(a.size(), b.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a[i] < b[i]) return true;
    if (b[i] < a[i]) return false;
  }
  return a.size() < b.size();
}

inline bool same_point(const Point& a, const Point& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise unusable numeric value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A configured evaluation budget (quadrature nodes, partition count) would be exceeded.
class CapExceededError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; `field` is a dotted path into the config document.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

std::string format_point(const Point& p);

}  // namespace ppv
