#pragma once

#include "bvflow/cost.hpp"
#include "bvflow/critical.hpp"
#include "bvflow/flow.hpp"
#include "bvflow/limit.hpp"
#include "bvflow/transition.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace bvflow::csv {

/// 17 significant digits, enough to round-trip any double.
std::string format(double x);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(std::ostream& os) const;
  [[nodiscard]] std::size_t column(const std::string& name) const;
};

/// Plain comma-separated parser (no quoting); the first line is the header.
Table read(std::istream& is);

Table trajectory_table(const Trajectory& traj);
/// t, u_1..u_d, grad_norm, lambda_min, kind; a leading segment column when segment >= 0.
Table branch_table(const std::vector<CriticalPoint>& points, int segment = -1);
Table transition_table(const JumpTransition& jump, const EnergyModel& model);
/// Transition schema for any polyline at frozen time t (s = normalized arclength).
Table path_table(const std::vector<Vec>& nodes, const EnergyModel& model, double t);
Table cost_table(const CostPropertyReport& report, CostMethod method);
Table bv_segments_table(const BVSolution& bv);
Table bv_jumps_table(const BVSolution& bv);
Table convergence_table(const ConvergenceReport& report);

/// `key = value` lines.
using Report = std::vector<std::pair<std::string, std::string>>;
void write_report(std::ostream& os, const Report& report);

}  // namespace bvflow::csv
