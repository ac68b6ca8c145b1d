#include "bvflow/csv.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace bvflow::csv {

std::string format(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return {buf, res.ptr};
}

void Table::write(std::ostream& os) const {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InvalidInput("csv: no column '" + name + "'");
}

Table read(std::istream& is) {
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw InvalidInput("csv: ragged row");
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

namespace {

void add_vector_columns(std::vector<std::string>& header, const std::string& prefix, int dim) {
  for (int i = 1; i <= dim; ++i) header.push_back(prefix + std::to_string(i));
}

void append(std::vector<std::string>& row, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(format(v[i]));
}

}  // namespace

Table trajectory_table(const Trajectory& traj) {
  Table t;
  t.header = {"t"};
  add_vector_columns(t.header, "u_", traj.dim);
  t.header.insert(t.header.end(), {"energy", "power", "diss_density", "step_residual"});
  for (std::size_t k = 0; k < traj.size(); ++k) {
    std::vector<std::string> row{format(traj.times[k])};
    append(row, traj.state(k));
    row.push_back(format(traj.energies[k]));
    row.push_back(format(traj.powers[k]));
    row.push_back(format(traj.diss_density[k]));
    row.push_back(format(traj.step_residuals[k]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table branch_table(const std::vector<CriticalPoint>& points, int segment) {
  Table t;
  if (segment >= 0) t.header.push_back("segment");
  t.header.push_back("t");
  const int dim = points.empty() ? 0 : static_cast<int>(points.front().u.size());
  add_vector_columns(t.header, "u_", dim);
  t.header.insert(t.header.end(), {"grad_norm", "lambda_min", "kind"});
  for (const auto& p : points) {
    std::vector<std::string> row;
    if (segment >= 0) row.push_back(std::to_string(segment));
    row.push_back(format(p.t));
    append(row, p.u);
    row.push_back(format(p.grad_norm));
    row.push_back(format(p.lambda_min()));
    row.push_back(to_string(p.kind));
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

Table polyline_table(const std::vector<Vec>& nodes, const std::vector<double>& s, const EnergyModel& model,
                     double t_star) {
  Table t;
  const int dim = nodes.empty() ? 0 : static_cast<int>(nodes.front().size());
  t.header = {"s"};
  add_vector_columns(t.header, "theta_", dim);
  t.header.insert(t.header.end(), {"grad_norm", "cum_cost", "cum_arclength"});
  const auto cost = cumulative_cost(nodes, model, t_star);
  double length = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (k > 0) length += (nodes[k] - nodes[k - 1]).norm();
    std::vector<std::string> row{format(s[k])};
    append(row, nodes[k]);
    row.push_back(format(model.gradient(t_star, nodes[k]).norm()));
    row.push_back(format(cost[k]));
    row.push_back(format(length));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

Table transition_table(const JumpTransition& jump, const EnergyModel& model) {
  return polyline_table(jump.path.nodes, jump.path.s, model, jump.t_star);
}

Table path_table(const std::vector<Vec>& nodes, const EnergyModel& model, double t) {
  TransitionPath path;
  path.nodes = nodes;
  path.parameterize_by_length();
  return polyline_table(path.nodes, path.s, model, t);
}

Table cost_table(const CostPropertyReport& report, CostMethod method) {
  Table t;
  t.header = {"i", "j", "value", "method", "resolution"};
  for (Eigen::Index i = 0; i < report.costs.rows(); ++i) {
    for (Eigen::Index j = 0; j < report.costs.cols(); ++j) {
      t.rows.push_back({std::to_string(i), std::to_string(j), format(report.costs(i, j)), to_string(method),
                        format(report.resolution)});
    }
  }
  return t;
}

Table bv_segments_table(const BVSolution& bv) {
  Table out;
  for (const auto& seg : bv.segments) {
    Table part = branch_table(seg.branch.samples, seg.index);
    if (out.header.empty()) out.header = part.header;
    for (auto& r : part.rows) out.rows.push_back(std::move(r));
  }
  return out;
}

Table bv_jumps_table(const BVSolution& bv) {
  Table t;
  const int dim = bv.segments.empty() ? 0 : static_cast<int>(bv.segments.front().branch.samples.front().u.size());
  t.header = {"t_j"};
  add_vector_columns(t.header, "u_minus_", dim);
  add_vector_columns(t.header, "u_plus_", dim);
  t.header.insert(t.header.end(), {"cost", "arclength"});
  for (const auto& j : bv.jumps) {
    std::vector<std::string> row{format(j.t)};
    append(row, j.u_minus);
    append(row, j.u_plus);
    row.push_back(format(j.transition.cost));
    row.push_back(format(j.transition.arclength));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table convergence_table(const ConvergenceReport& report) {
  Table t;
  t.header = {"epsilon", "sup_distance"};
  const std::size_t nj = report.jump_times.size();
  for (std::size_t j = 1; j <= nj; ++j) t.header.push_back("window_mass_" + std::to_string(j));
  for (std::size_t j = 1; j <= nj; ++j) t.header.push_back("window_dissipation_" + std::to_string(j));
  for (std::size_t j = 1; j <= nj; ++j) t.header.push_back("window_mass_half_" + std::to_string(j));
  for (std::size_t j = 1; j <= nj; ++j) t.header.push_back("window_mass_double_" + std::to_string(j));
  t.header.insert(t.header.end(), {"outside_mass", "total_mass", "energy_residual", "steps"});
  for (const auto& r : report.rows) {
    std::vector<std::string> row{format(r.epsilon), format(r.sup_distance)};
    for (double v : r.window_masses) row.push_back(format(v));
    for (double v : r.window_dissipation) row.push_back(format(v));
    for (double v : r.window_masses_half) row.push_back(format(v));
    for (double v : r.window_masses_double) row.push_back(format(v));
    row.push_back(format(r.outside_mass));
    row.push_back(format(r.total_mass));
    row.push_back(format(r.energy_residual));
    row.push_back(std::to_string(r.steps));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_report(std::ostream& os, const Report& report) {
  for (const auto& [key, value] : report) os << key << " = " << value << '\n';
}

}  // namespace bvflow::csv
