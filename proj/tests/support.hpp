#pragma once

#include "bvflow/energy.hpp"

#include <cmath>

namespace bvtest {

inline const double fold_t = 2.0 / (3.0 * std::sqrt(3.0));
inline const double fold_u = -1.0 / std::sqrt(3.0);
inline const double landing_u = 2.0 / std::sqrt(3.0);

inline bvflow::EnergyModel tilted() {
  return bvflow::make_builtin("tilted_double_well", bvflow::default_params("tilted_double_well"));
}

inline bvflow::EnergyModel quadratic() {
  return bvflow::make_builtin("quadratic_track", bvflow::default_params("quadratic_track"));
}

inline bvflow::EnergyModel well2d() {
  return bvflow::make_builtin("double_well_2d", bvflow::default_params("double_well_2d"));
}

inline bvflow::Vec scalar(double x) { return bvflow::Vec::Constant(1, x); }

inline bvflow::Vec pair(double x, double y) {
  bvflow::Vec v(2);
  v << x, y;
  return v;
}

}  // namespace bvtest
