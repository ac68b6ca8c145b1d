#pragma once

#include "bvflow/energy.hpp"
#include "bvflow/types.hpp"

#include <string>
#include <vector>

namespace bvflow {

enum class CostMethod { quadrature_1d, grid_dijkstra, heteroclinic };

std::string to_string(CostMethod method);
CostMethod cost_method_from_string(const std::string& name);

struct CostEstimate {
  double t = 0.0;
  Vec u1;
  Vec u2;
  double value = 0.0;
  CostMethod method = CostMethod::quadrature_1d;
  std::vector<Vec> witness_path;
  double resolution = 0.0;
};

/// int_{min(u1,u2)}^{max(u1,u2)} |dE_t/du| du by composite Simpson with
/// n_quad panels per piece, split at the sign changes of dE/du. In one
/// dimension this is the exact infimum over curves.
CostEstimate cost_1d(const EnergyModel& model, double t, double u1, double u2, int n_quad = 2000);

struct GridSpec {
  Box box;
  double spacing = 1e-2;
};

/// Lattice shortest path (label-setting Dijkstra) with edge weight
/// mean(|DE_t|) at the endpoints times the edge length. Neighbours: the
/// 3^d - 1 axis/diagonal offsets, plus the (1,2) knight offsets in 2-D.
/// The exact endpoints are joined to the lattice nodes of their cells. An
/// upper bound for the continuum cost.
CostEstimate cost_grid(const EnergyModel& model, double t, const Vec& u1, const Vec& u2, const GridSpec& grid);

struct CostPropertyReport {
  std::vector<Vec> points;
  Mat costs;                 // costs(i, j) = c(u_i, u_j)
  double resolution = 0.0;
  bool positive = true;      // off-diagonal > resolution
  bool symmetric = true;     // |c_ij - c_ji| <= resolution
  double max_asymmetry = 0.0;
  bool triangle = true;      // c_ij <= c_ik + c_kj + resolution
  double worst_triangle_excess = 0.0;  // max c_ij - c_ik - c_kj
  bool lower_semicontinuous = true;
  double worst_lsc_gap = 0.0;  // max (c(u_i, u_j) - c(u_i^k, u_j^k)) over the sampled sequences
  bool energy_lower_bound = true;  // c_ij >= E(u_i) - E(u_j) - resolution
};

/// All-pairs costs with the chosen oracle and the metric properties
/// (positivity, symmetry, triangle inequality, sampled lower semicontinuity
/// along u_i + 2^-k r e -> u_i, chain-rule lower bound).
CostPropertyReport check_cost_properties(const EnergyModel& model, double t, const std::vector<Vec>& points,
                                         CostMethod oracle, const GridSpec& grid = {}, int n_quad = 2000);

}  // namespace bvflow
