#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bvflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised for malformed inputs and violated preconditions (CLI exit code 1).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure fails to reach its target (CLI exit code 2).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box in state space.
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec lower, Vec upper);
  /// Cube [-half_width, half_width]^dim.
  static Box centered(int dim, double half_width);

  [[nodiscard]] int dim() const { return static_cast<int>(lo.size()); }
  [[nodiscard]] bool contains(const Vec& u, double slack = 0.0) const;
  [[nodiscard]] double diameter() const { return (hi - lo).norm(); }
  /// Maps a point of the unit cube onto the box.
  [[nodiscard]] Vec from_unit(const Vec& unit) const;
};

struct TimeInterval {
  double start = 0.0;
  double end = 1.0;

  [[nodiscard]] double length() const { return end - start; }
  [[nodiscard]] bool contains(double t, double slack = 0.0) const {
    return t >= start - slack && t <= end + slack;
  }
};

}  // namespace bvflow
