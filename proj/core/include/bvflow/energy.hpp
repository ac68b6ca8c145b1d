#pragma once

#include "bvflow/types.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace bvflow {

using ParamMap = std::map<std::string, double>;

/// Time-dependent energy E_t(u) on R^d together with its analytic derivatives.
///
/// The evaluators are pure functions of (t, u); a model is immutable once built
/// and may be shared between threads.
struct EnergyModel {
  using ScalarFn = std::function<double(double, const Vec&)>;
  using VectorFn = std::function<Vec(double, const Vec&)>;
  using MatrixFn = std::function<Mat(double, const Vec&)>;
  using CubicFn = std::function<double(double, const Vec&, const Vec&)>;

  std::string name;
  int dim = 1;
  ParamMap params;
  double horizon = 1.0;

  ScalarFn value;
  VectorFn gradient;
  MatrixFn hessian;
  /// Partial time derivative of the energy.
  ScalarFn power;
  /// D^3 E_t(u)[v, v, v].
  CubicFn third_directional;

  /// Time derivative of the gradient, by central differences in t with
  /// step 1e-6 * horizon.
  [[nodiscard]] Vec gradient_time_derivative(double t, const Vec& u) const;
};

/// Builds the third-order directional derivative from central differences of
/// the Hessian; used for models without an analytic third derivative.
EnergyModel::CubicFn fd_third_directional(EnergyModel::MatrixFn hessian, double step = 1e-4);

/// Complete parameter map for a builtin family, with the documented defaults.
ParamMap default_params(const std::string& family);

/// Builtin families:
///  - quadratic_track: 1/2 |u - a(t)|^2, a(t) = a0 + a1 t (keys dim, T, a0_i, a1_i)
///  - tilted_double_well (d = 1): u^4/4 - u^2/2 - l(t) u + c0
///  - double_well_2d: (u^2 - 1)^2/4 + v^2/2 - l(t) u + c0
/// with l(t) = load0 + load_rate t (keys T, load0, load_rate). The shift c0 makes
/// the energy nonnegative on [0, T].
EnergyModel make_builtin(const std::string& family, const ParamMap& params);

struct SampleRegion {
  Box box;
  TimeInterval times;
};

struct ValidationReport {
  double max_rel_error_gradient = 0.0;
  double max_rel_error_hessian = 0.0;
  double max_rel_error_power = 0.0;
  double max_hessian_asymmetry = 0.0;
  int sample_count = 0;
  bool pass = false;
};

/// Compares gradient, Hessian and power against central differences at
/// Halton-distributed samples. Relative errors are |a - b| / (1 + |b|) with
/// the analytic value as b; the Hessian is differenced from the gradient.
ValidationReport validate_derivatives(const EnergyModel& model, const SampleRegion& region,
                                      int n_samples, double step = 1e-5, double tol = 1e-6);

struct PowerControlEstimate {
  double C1 = 0.0;
  double C2 = 0.0;
  int violation_count = 0;
  int samples = 0;
};

/// Smallest (C1, C2) with |P| <= C1 E + C2 on the sample, minimizing
/// C1 * mean(E) + C2.
PowerControlEstimate check_power_control(const EnergyModel& model, const SampleRegion& region,
                                         int n_samples);

struct CoercivityReport {
  bool bounded = false;
  double radius = 0.0;      // of the origin-centred ball containing the sampled sublevel
  double box_radius = 0.0;  // half-diagonal of the search box
  int sublevel_points = 0;
};

/// Samples G(u) = sup_t |E_t(u)| on a regular lattice of the box and reports
/// whether {G <= rho} stays away from the box boundary.
CoercivityReport check_coercivity(const EnergyModel& model, double rho, const Box& search_box,
                                  int points_per_axis = 41, int time_samples = 21);

/// E_t(u) + <y, u> + 1/2 u^T K u.
EnergyModel perturb_generic(const EnergyModel& model, const Vec& y, const Mat& K);

/// Dense polynomial with a time-polynomial linear tilt:
///   E_t(u) = shift + sum_k c_k u^{alpha_k} - sum_i l_i(t) u_i,
///   l_i(t) = sum_j tilt[i][j] t^j.
struct PolynomialSpec {
  int dim = 1;
  double horizon = 1.0;
  double shift = 0.0;
  std::vector<std::pair<std::vector<int>, double>> terms;
  std::vector<std::vector<double>> tilt;
};

EnergyModel make_polynomial(const PolynomialSpec& poly);

}  // namespace bvflow
