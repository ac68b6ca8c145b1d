#pragma once

#include "bvflow/types.hpp"

#include <cstdint>
#include <vector>

namespace bvflow {

/// Deterministic Halton low-discrepancy sequence in [0,1)^dim.
class HaltonSequence {
 public:
  explicit HaltonSequence(int dim, std::uint64_t skip = 1);

  Vec next();
  [[nodiscard]] int dim() const { return dim_; }

  static double radical_inverse(std::uint64_t index, unsigned base);

 private:
  int dim_;
  std::uint64_t index_;
  std::vector<unsigned> bases_;
};

/// `count` unit vectors in R^dim: evenly spaced (half-offset) angles in 2-D,
/// {+e, -e} in 1-D, normalized Halton points of [-1,1]^dim otherwise.
std::vector<Vec> probe_directions(int dim, int count);

}  // namespace bvflow
