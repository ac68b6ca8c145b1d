#pragma once

#include "bvflow/critical.hpp"
#include "bvflow/energy.hpp"
#include "bvflow/flow.hpp"
#include "bvflow/transition.hpp"
#include "bvflow/types.hpp"

#include <utility>
#include <vector>

namespace bvflow {

struct BVSegment {
  int index = 0;
  double t_begin = 0.0;
  double t_end = 0.0;
  CriticalBranch branch;
};

struct BVJump {
  double t = 0.0;
  Vec u_minus;
  Vec u_plus;
  JumpTransition transition;
};

struct BVOptions {
  Box domain;                    // continuation and heteroclinic search box
  double capture_radius = 1e-2;  // u0 must sit this close to a nondegenerate minimum
  double cost_tol = 1e-5;        // jump relation
  double balance_tol = 1e-5;     // energy balance on each segment
  int max_jumps = 16;
  double launch_offset = -1.0;   // negative: default_launch_offset(domain)
  ContinuationOptions continuation;  // domain and t_end are overwritten
  HeteroclinicOptions heteroclinic;  // search_box is overwritten
};

/// Limit curve: critical branches between jumps, with the jump transitions
/// and defect atoms (t_j, transition cost).
struct BVSolution {
  double t_begin = 0.0;
  double t_end = 0.0;
  std::vector<BVSegment> segments;
  std::vector<BVJump> jumps;
  std::vector<double> jump_set;
  std::vector<std::pair<double, double>> energy_record;  // (t, E_t(u(t))) at branch samples
  std::vector<std::pair<double, double>> defect_atoms;   // (t_j, mass)
  std::vector<double> segment_balance;                   // balance residual over each segment

  /// u(t), the right limit at jump times. Interpolated along the stored
  /// branch and polished by Newton at time t.
  [[nodiscard]] Vec state_at(const EnergyModel& model, double t) const;
  /// u_-(t): differs from state_at only at jump times.
  [[nodiscard]] Vec left_state(const EnergyModel& model, double t) const;
};

/// Branch following plus heteroclinic jumps from a well-prepared u0.
/// Throws InvalidInput when u0 is not captured by a nondegenerate minimum,
/// NumericalFailure on non-transversal folds, failed heteroclinics, folds
/// closer than fold_time_tol, or a violated jump relation.
BVSolution construct_bv(const EnergyModel& model, const Vec& u0, const TimeInterval& span,
                        const BVOptions& opts);

/// |sum of atoms in [s, t] + E_t(u_+(t)) - E_s(u_-(s)) - int_s^t P(r, u(r)) dr|,
/// the power integral by adaptive Simpson between jump times.
double energy_balance_residual(const BVSolution& bv, const EnergyModel& model, double s, double t,
                               bool include_atoms = true);

struct DefectProfile {
  double epsilon = 0.0;
  std::vector<double> window_edges;
  std::vector<double> window_masses;
  double total_mass = 0.0;
};

/// Dissipation-density mass of each window [edges[k], edges[k+1]].
DefectProfile defect_profile(const Trajectory& traj, const std::vector<double>& window_edges);

struct CompareOptions {
  double exclusion_radius = 0.05;
  double window_halfwidth = -1.0;  // negative: 0.05 * T
  double mass_rel_tol = 0.05;
  double outside_mass_tol = 0.02;
  double lower_bound_tol = 1e-3;
  IntegratorOptions integrator;
};

struct ConvergenceRow {
  double epsilon = 0.0;
  double sup_distance = 0.0;
  std::vector<double> window_masses;       // diss_density mass per jump window
  std::vector<double> window_dissipation;  // int |DE| |u'| per jump window
  std::vector<double> window_masses_half;    // at half the window width
  std::vector<double> window_masses_double;  // at twice the window width
  double outside_mass = 0.0;
  double total_mass = 0.0;
  double energy_residual = 0.0;
  std::size_t steps = 0;
};

struct ConvergenceReport {
  double window_halfwidth = 0.0;
  std::vector<double> jump_times;
  std::vector<double> atom_masses;
  std::vector<ConvergenceRow> rows;
  bool sup_decreasing = false;
  bool window_mass_converged = false;
  bool outside_mass_vanishing = false;
  bool dissipation_lower_bound = false;
};

/// Runs the flow for each epsilon (in parallel) and measures sup distance to
/// the limit at t_samples, defect masses per jump window and outside them.
ConvergenceReport compare_vanishing_viscosity(const EnergyModel& model, const Vec& u0,
                                              const std::vector<double>& epsilons, const BVSolution& bv,
                                              const std::vector<double>& t_samples,
                                              const CompareOptions& opts = {});

}  // namespace bvflow
