#pragma once

#include "bvflow/energy.hpp"
#include "bvflow/types.hpp"

#include <cstddef>
#include <vector>

namespace bvflow {

/// Step control for the implicit Euler integrator of eps u' + DE_t(u) = 0.
///
/// A step is accepted when its Newton solve converges and its energy-identity
/// defect is at most audit_tol * (dt / T + dissipation of the step); rejected
/// steps are halved. After `growth_after` consecutive accepts the step grows
/// by `growth`, capped at dt_max.
struct IntegratorOptions {
  double dt_initial = 1e-7;  // absolute
  double dt_max = 1e-3;      // absolute
  double dt_min_factor = 1e-12;
  double audit_tol = 2e-6;
  double newton_tol = 1e-10;
  int newton_max_iter = 40;
  double growth = 1.5;
  int growth_after = 5;
  std::size_t max_steps = 40'000'000;
};

/// One eps-solution sampled on the accepted time grid.
struct Trajectory {
  double epsilon = 0.0;
  int dim = 0;
  std::vector<double> times;
  std::vector<double> states;  // row-major, times.size() x dim
  std::vector<double> energies;
  std::vector<double> powers;
  /// (eps/2)|u'|^2 + |DE|^2/(2 eps) with u' the quotient of the adjacent step
  /// (the step ending at a node; the first step for node 0).
  std::vector<double> diss_density;
  /// |energy-identity defect| of the step ending at each node (0 at node 0).
  std::vector<double> step_residuals;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] Vec state(std::size_t k) const;
  /// Piecewise-linear interpolation of the states.
  [[nodiscard]] Vec state_at(double t) const;
  [[nodiscard]] double start() const { return times.front(); }
  [[nodiscard]] double end() const { return times.back(); }
};

/// Adaptive implicit Euler with a damped Newton inner solve.
Trajectory integrate(const EnergyModel& model, double epsilon, const Vec& u0,
                     const TimeInterval& span, const IntegratorOptions& opts = {});

/// Implicit Euler on a prescribed time grid (no step control); used for
/// refinement studies.
Trajectory integrate_on_grid(const EnergyModel& model, double epsilon, const Vec& u0,
                             const std::vector<double>& times, const IntegratorOptions& opts = {});

/// The grid with every interval split at its midpoint.
std::vector<double> halve_steps(const std::vector<double>& times);

/// |int_s^t diss + E_t(u(t)) - E_s(u(s)) - int_s^t P| by the trapezoid rule on
/// the stored grid (stored values are linearly interpolated at s and t).
double energy_identity_residual(const Trajectory& traj, double s, double t);

/// Trapezoid approximation of int_s^t |DE_r(u(r))| |u'(r)| dr.
double dissipation_integral(const Trajectory& traj, const EnergyModel& model, double s, double t);

/// Trapezoid integral of the stored dissipation density over [s, t].
double diss_density_integral(const Trajectory& traj, double s, double t);

}  // namespace bvflow
