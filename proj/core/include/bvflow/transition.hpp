#pragma once

#include "bvflow/critical.hpp"
#include "bvflow/energy.hpp"
#include "bvflow/types.hpp"

#include <string>
#include <vector>

namespace bvflow {

/// Polyline in state space with a parameter in [0, 1] per node.
struct TransitionPath {
  std::vector<Vec> nodes;
  std::vector<double> s;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }
  /// Sets s to normalized arclength (0 everywhere for a constant path).
  void parameterize_by_length();
};

struct HeteroclinicOptions {
  Box search_box;
  double landing_tol = 1e-9;
  double capture_radius = 1e-3;
  double max_pseudo_time = 1e6;
  double rtol = 1e-10;
  double atol = 1e-13;
  /// Upper bound on |d theta| per step, as a fraction of the box diameter.
  double trust_fraction = 1e-2;
  /// Upper bound on the distance between stored nodes, same units.
  double node_spacing_fraction = 2.5e-4;
  std::size_t max_steps = 5'000'000;
  int catalog_starts = 64;
  int max_relaunches = 4;
  CriticalTolerances tol;
};

struct JumpTransition {
  double t_star = 0.0;
  Vec u_minus;
  Vec u_plus;
  TransitionPath path;
  double cost = 0.0;
  double arclength = 0.0;
  bool converged = false;
  double landing_grad_norm = 0.0;
  double pseudo_time = 0.0;
  int pieces = 0;          // gradient-flow pieces (more than one after a saddle relaunch)
  std::string status;      // landed | returned_to_start | max_pseudo_time
};

/// Launch offset used when none is given: 1e-4 times the box diameter.
double default_launch_offset(const Box& box);

/// Integrates the frozen-time flow theta' = -DE_{t*}(theta) from
/// u_from + delta * direction (Dormand-Prince 5(4), step bounded by the trust
/// region and the node spacing) until |DE| <= landing_tol near a catalogued
/// critical point. Landings on saddles are continued along the descent
/// eigenvector. Throws NumericalFailure on leaving the search box or running
/// out of steps.
JumpTransition solve_heteroclinic(const EnergyModel& model, double t_star, const Vec& u_from,
                                  const Vec& direction, double delta, const HeteroclinicOptions& opts);

/// Trapezoid quadrature of int |DE_{t*}(theta)| |theta'| over the polyline.
/// Depends on node positions only.
double transition_cost(const std::vector<Vec>& nodes, const EnergyModel& model, double t_star);

/// Cumulative transition_cost at each node.
std::vector<double> cumulative_cost(const std::vector<Vec>& nodes, const EnergyModel& model, double t_star);

/// Keeps the nodes and sets s to the normalized cumulative cost, so that the
/// dissipation is affine in s. Throws InvalidInput for zero-cost paths.
TransitionPath reparameterize_unit(const TransitionPath& path, const EnergyModel& model, double t_star);

/// New polyline with `n_nodes` nodes uniformly spaced in cumulative cost,
/// the integrand |DE| taken linear along each original segment.
TransitionPath resample_uniform_cost(const TransitionPath& path, const EnergyModel& model, double t_star,
                                     int n_nodes);

/// max_k |E(theta_{k+1}) - E(theta_k) - <DE(mid_k), d theta_k>| / (|d theta_k| max_j |DE(theta_j)|).
double chain_rule_residual(const std::vector<Vec>& nodes, const EnergyModel& model, double t_star);

/// Discrete symmetric Hausdorff distance between node sets (subsampled to at
/// most `max_nodes` nodes each).
double hausdorff_distance(const std::vector<Vec>& a, const std::vector<Vec>& b, std::size_t max_nodes = 400);

struct TransitionCount {
  int clusters = 0;
  int landed = 0;  // probes that reached u_plus
  int probes = 0;
};

/// Launches heteroclinics from u_minus along n_probe_dirs directions and
/// counts Hausdorff clusters (threshold cluster_fraction * box diameter) of
/// the paths that land at u_plus.
TransitionCount count_transitions(const EnergyModel& model, double t_star, const Vec& u_minus,
                                  const Vec& u_plus, int n_probe_dirs, const HeteroclinicOptions& opts,
                                  double cluster_fraction = 0.02);

}  // namespace bvflow
