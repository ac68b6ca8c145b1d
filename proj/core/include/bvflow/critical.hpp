#pragma once

#include "bvflow/energy.hpp"
#include "bvflow/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bvflow {

enum class CriticalKind { nondegenerate_min, saddle, degenerate };

std::string to_string(CriticalKind kind);

struct CriticalTolerances {
  double newton_tol = 1e-10;
  double degeneracy_tol = 1e-7;
  double fold_time_tol = 1e-8;
  double merge_tol = 1e-6;
  int newton_max_iter = 200;
};

struct CriticalPoint {
  double t = 0.0;
  Vec u;
  double grad_norm = 0.0;
  Vec hess_eigs;  // ascending
  CriticalKind kind = CriticalKind::saddle;

  /// Eigenvalue of smallest magnitude (signed).
  [[nodiscard]] double lambda_min() const;
};

/// Classifies (t, u) from its gradient and Hessian spectrum.
CriticalPoint classify(const EnergyModel& model, double t, const Vec& u,
                       const CriticalTolerances& tol = {});

/// Newton iteration on DE_t(u) = 0 from `guess`; nothing if it does not reach
/// newton_tol or leaves `box` (when given).
std::optional<Vec> newton_critical(const EnergyModel& model, double t, const Vec& guess,
                                   const CriticalTolerances& tol = {},
                                   const Box* box = nullptr);

struct CriticalSet {
  std::vector<CriticalPoint> points;  // sorted lexicographically by u
  /// Smallest pairwise distance (infinity for fewer than two points); the
  /// numerical isolation witness.
  double min_pairwise_distance = 0.0;
  int converged_starts = 0;
};

/// Multistart Newton from Halton-distributed starts over `search_box`.
CriticalSet find_critical(const EnergyModel& model, double t, const Box& search_box, int n_starts,
                          const CriticalTolerances& tol = {});

enum class BranchEnd { fold, reached_time_boundary, left_domain };

std::string to_string(BranchEnd end);

struct ContinuationOptions {
  Box domain;
  double max_arc_step = 1e-2;
  double min_arc_step = 1e-10;
  double t_end = -1.0;  // negative: the model horizon
  int max_samples = 200000;
  /// Times at which the gap to other critical points is probed (0 disables).
  int gap_probes = 8;
  int gap_starts = 32;
  CriticalTolerances tol;
};

struct CriticalBranch {
  std::vector<CriticalPoint> samples;  // in continuation order
  BranchEnd termination = BranchEnd::reached_time_boundary;
  double t_star = 0.0;  // terminal time (fold time for folds)
  Vec u_star;           // terminal state
  double min_gap_to_other_branches = 0.0;

  [[nodiscard]] double t_begin() const { return samples.front().t; }
  [[nodiscard]] double t_end() const { return samples.back().t; }
};

/// Pseudo-arclength continuation of the critical curve through `start` in the
/// (t, u) space. `direction` = +1 follows increasing t initially. Stops at the
/// time boundary, on leaving the domain, or at a fold, which is refined by
/// bisection in arclength on the sign of the near-zero Hessian eigenvalue.
CriticalBranch continue_branch(const EnergyModel& model, const CriticalPoint& start, int direction,
                               const ContinuationOptions& opts);

struct TransversalityReport {
  double t_star = 0.0;
  Vec u_star;
  int null_dim = 0;
  Vec null_vector;
  double T2_value = 0.0;
  double T3_value = 0.0;
  bool pass = false;
};

/// Null dimension, <d/dt DE, v> and D^3E[v,v,v] at a degenerate critical
/// point. Throws NumericalFailure when no eigenvalue is below degeneracy_tol.
TransversalityReport check_transversality(const EnergyModel& model, double t_star, const Vec& u_star,
                                          const CriticalTolerances& tol = {}, double tv_tol = 1e-6);

struct LojasiewiczFit {
  double theta = 0.0;
  double C = 0.0;
  double fit_r2 = 0.0;
  double radius = 0.0;
  int samples = 0;
};

/// Fits |E(v) - E(u*)|^theta ~ C |DE(v)| on spheres of the given radii
/// (theta = least-squares slope of log|DE| against log|E - E*|).
LojasiewiczFit estimate_lojasiewicz(const EnergyModel& model, double t, const Vec& u_star,
                                    const std::vector<double>& radii, int n_dirs = 16);

struct E4Check {
  bool holds = false;
  /// Max over directions of (E(v) - E*) / |DE(v)| at the smallest radius.
  double limsup_estimate = 0.0;
};

E4Check check_E4(const EnergyModel& model, double t, const Vec& u_star,
                 const std::vector<double>& radii, int n_dirs = 16, double e4_tol = 1e-3);

}  // namespace bvflow
