#include "run.hpp"

#include "config.hpp"
#include "output.hpp"

#include "bvflow/cost.hpp"
#include "bvflow/critical.hpp"
#include "bvflow/csv.hpp"
#include "bvflow/energy.hpp"
#include "bvflow/flow.hpp"
#include "bvflow/limit.hpp"
#include "bvflow/parallel.hpp"
#include "bvflow/transition.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace bvflow::cli {

namespace {

using csv::format;

std::string format_vec(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? " " : "") + format(v[i]);
  return out;
}

/// Invariants that did not hold; a non-empty list turns into exit code 2.
using Failures = std::vector<std::string>;

void check(Failures& failures, bool ok, const std::string& what) {
  if (!ok) failures.push_back(what);
}

IntegratorOptions integrator_options(const Config& cfg, const std::string& block) {
  IntegratorOptions o;
  o.dt_initial = cfg.positive(block + ".dt_initial", o.dt_initial);
  o.dt_max = cfg.positive(block + ".dt_max", o.dt_max);
  o.audit_tol = cfg.positive(block + ".audit_tol", o.audit_tol);
  o.newton_tol = cfg.positive(block + ".newton_tol", o.newton_tol);
  o.max_steps = static_cast<std::size_t>(cfg.positive(block + ".max_steps", static_cast<double>(o.max_steps)));
  return o;
}

CriticalTolerances critical_tolerances(const Config& cfg) {
  CriticalTolerances t;
  t.newton_tol = cfg.positive("tolerances.newton", t.newton_tol);
  t.degeneracy_tol = cfg.positive("tolerances.degeneracy", t.degeneracy_tol);
  t.fold_time_tol = cfg.positive("tolerances.fold_time", t.fold_time_tol);
  t.merge_tol = cfg.positive("tolerances.merge", t.merge_tol);
  return t;
}

Vec state(const Config& cfg, const std::string& key, const EnergyModel& model) {
  Vec u = cfg.vector(key);
  if (u.size() != model.dim) throw InvalidInput("config: '" + key + "' must have " + std::to_string(model.dim) + " entries");
  return u;
}

std::vector<double> epsilon_list(const Config& cfg, const std::string& key, const std::vector<double>& fallback,
                                 bool decreasing) {
  const auto eps = cfg.numbers(key, fallback);
  if (eps.empty()) throw InvalidInput("config: '" + key + "' is empty");
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (!(eps[k] > 0.0)) throw InvalidInput("config: epsilon must be positive (got " + format(eps[k]) + ")");
    if (decreasing && k > 0 && !(eps[k] < eps[k - 1])) throw InvalidInput("config: '" + key + "' must strictly decrease");
  }
  return eps;
}

/// Keeps at most max_rows rows (always the first and last) of a long table.
csv::Table thin(csv::Table table, std::size_t max_rows) {
  if (max_rows < 2 || table.rows.size() <= max_rows) return table;
  const std::size_t stride = (table.rows.size() - 1 + max_rows - 2) / (max_rows - 1);
  csv::Table out;
  out.header = table.header;
  for (std::size_t k = 0; k < table.rows.size(); k += stride) out.rows.push_back(std::move(table.rows[k]));
  if ((table.rows.size() - 1) % stride != 0) out.rows.push_back(std::move(table.rows.back()));
  return out;
}

BVOptions bv_options(const Config& cfg, const Box& domain) {
  BVOptions o;
  o.domain = domain;
  o.capture_radius = cfg.positive("limit.capture_radius", o.capture_radius);
  o.cost_tol = cfg.positive("limit.cost_tol", o.cost_tol);
  o.balance_tol = cfg.positive("limit.balance_tol", o.balance_tol);
  o.max_jumps = cfg.integer("limit.max_jumps", o.max_jumps);
  if (cfg.has("jump.launch_offset")) o.launch_offset = cfg.positive("jump.launch_offset", 1.0);
  o.continuation.tol = critical_tolerances(cfg);
  o.continuation.max_arc_step = cfg.positive("branches.max_arc_step", o.continuation.max_arc_step);
  o.heteroclinic.tol = o.continuation.tol;
  o.heteroclinic.landing_tol = cfg.positive("jump.landing_tol", o.heteroclinic.landing_tol);
  return o;
}

void write_bv(OutputSink& sink, const BVSolution& bv, const EnergyModel& model, double t_requested) {
  sink.table("bv_segments.csv", csv::bv_segments_table(bv));
  sink.table("bv_jumps.csv", csv::bv_jumps_table(bv));
  for (std::size_t j = 0; j < bv.jumps.size(); ++j) {
    sink.table("transition_" + std::to_string(j + 1) + ".csv", csv::transition_table(bv.jumps[j].transition, model));
  }
  csv::Report r{{"t_begin", format(bv.t_begin)}, {"t_end", format(bv.t_end)},
                {"segments", std::to_string(bv.segments.size())}, {"jump_count", std::to_string(bv.jumps.size())},
                // True when max_jumps stopped the construction before t1.
                {"truncated", bv.t_end < t_requested ? "true" : "false"}};
  for (std::size_t j = 0; j < bv.jumps.size(); ++j) {
    const auto& jump = bv.jumps[j];
    const std::string p = "jump_" + std::to_string(j + 1) + ".";
    r.emplace_back(p + "t", format(jump.t));
    r.emplace_back(p + "u_minus", format_vec(jump.u_minus));
    r.emplace_back(p + "u_plus", format_vec(jump.u_plus));
    r.emplace_back(p + "atom_mass", format(bv.defect_atoms[j].second));
    r.emplace_back(p + "energy_drop",
                   format(model.value(jump.t, jump.u_minus) - model.value(jump.t, jump.u_plus)));
  }
  for (std::size_t k = 0; k < bv.segment_balance.size(); ++k) {
    r.emplace_back("balance_residual.segment_" + std::to_string(k), format(bv.segment_balance[k]));
  }
  r.emplace_back("balance_residual.full_span", format(energy_balance_residual(bv, model, bv.t_begin, bv.t_end)));
  sink.report("bv_summary.txt", r);
}

// --- subcommands ----------------------------------------------------------

Failures cmd_validate(const Config& cfg, OutputSink& sink) {
  std::vector<EnergyModel> models;
  if (cfg.boolean("validate.all_builtins", false)) {
    for (const char* family : {"quadratic_track", "tilted_double_well", "double_well_2d"}) {
      ParamMap p = default_params(family);
      if (cfg.has("horizon")) p["T"] = cfg.number("horizon");
      models.push_back(make_builtin(family, p));
    }
  } else {
    models.push_back(build_model(cfg));
  }
  const int samples = cfg.integer("validate.samples", 200);
  const double h = cfg.positive("validate.h", 1e-5);
  const double tol = cfg.positive("validate.tol", 1e-6);
  if (samples < 1) throw InvalidInput("config: validate.samples must be at least 1");

  Failures failures;
  csv::Table table;
  table.header = {"model", "max_rel_error_gradient", "max_rel_error_hessian", "max_rel_error_power",
                  "max_hessian_asymmetry", "samples", "pass", "C1", "C2", "power_violations", "coercive",
                  "sublevel_level", "sublevel_points", "sublevel_radius"};
  for (const auto& m : models) {
    const SampleRegion region{build_domain(cfg, m.dim), {0.0, m.horizon}};
    const auto v = validate_derivatives(m, region, samples, h, tol);
    const auto pc = check_power_control(m, region, samples);
    // Default sublevel: twice the largest energy of the box centre over time.
    double level = 0.0;
    const Vec centre = 0.5 * (region.box.lo + region.box.hi);
    for (int k = 0; k <= 20; ++k) level = std::max(level, 2.0 * m.value(m.horizon * k / 20.0, centre));
    level = cfg.positive("validate.coercivity_level", std::max(level, 1e-3));
    const auto co = check_coercivity(m, level, region.box);
    table.rows.push_back({m.name, format(v.max_rel_error_gradient), format(v.max_rel_error_hessian),
                          format(v.max_rel_error_power), format(v.max_hessian_asymmetry), std::to_string(v.sample_count),
                          v.pass ? "true" : "false", format(pc.C1), format(pc.C2), std::to_string(pc.violation_count),
                          co.bounded ? "true" : "false", format(level), std::to_string(co.sublevel_points),
                          format(co.radius)});
    check(failures, v.pass, "derivatives(" + m.name + ")");
    check(failures, pc.violation_count == 0, "power_control(" + m.name + ")");
    check(failures, co.bounded && co.sublevel_points > 0, "coercivity(" + m.name + ")");
  }
  sink.table("validation.csv", table);
  return failures;
}

Failures cmd_simulate(const Config& cfg, OutputSink& sink) {
  const EnergyModel model = build_model(cfg);
  const Vec u0 = state(cfg, "simulate.u0", model);
  const auto eps = epsilon_list(cfg, "simulate.epsilons", {1e-2}, false);
  const TimeInterval span{cfg.number("simulate.t0", 0.0), cfg.number("simulate.t1", model.horizon)};
  const auto opts = integrator_options(cfg, "simulate");
  const bool halving = cfg.boolean("simulate.halving_check", false);
  const auto max_rows = static_cast<std::size_t>(cfg.integer("simulate.max_rows", 20001));

  std::vector<Trajectory> trajs(eps.size());
  std::vector<double> halved(eps.size(), 0.0);
  parallel_for(eps.size(), [&](std::size_t i) {
    trajs[i] = integrate(model, eps[i], u0, span, opts);
    if (halving) {
      const Trajectory fine = integrate_on_grid(model, eps[i], u0, halve_steps(trajs[i].times), opts);
      halved[i] = energy_identity_residual(fine, fine.start(), fine.end());
    }
  });

  Failures failures;
  csv::Report r{{"model", model.name}, {"t0", format(span.start)}, {"t1", format(span.end)}};
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const auto& tr = trajs[i];
    sink.table("trajectory_" + std::to_string(i + 1) + ".csv", thin(csv::trajectory_table(tr), max_rows));
    const double residual = energy_identity_residual(tr, tr.start(), tr.end());
    const double diss = diss_density_integral(tr, tr.start(), tr.end());
    const std::string p = "run_" + std::to_string(i + 1) + ".";
    r.emplace_back(p + "epsilon", format(eps[i]));
    r.emplace_back(p + "steps", std::to_string(tr.size() - 1));
    r.emplace_back(p + "u_final", format_vec(tr.state(tr.size() - 1)));
    r.emplace_back(p + "dissipation", format(diss));
    r.emplace_back(p + "energy_identity_residual", format(residual));
    check(failures, residual < 1e-5 * (1.0 + diss), "energy_identity(epsilon=" + format(eps[i]) + ")");
    if (halving) {
      r.emplace_back(p + "halved_residual", format(halved[i]));
      check(failures, halved[i] * 1.5 <= residual, "halving_reduction(epsilon=" + format(eps[i]) + ")");
    }
  }
  sink.report("simulate_report.txt", r);
  return failures;
}

Failures cmd_branches(const Config& cfg, OutputSink& sink) {
  const EnergyModel model = build_model(cfg);
  const Box domain = build_domain(cfg, model.dim);
  const double t0 = cfg.number("branches.t0", 0.0);
  const auto tol = critical_tolerances(cfg);
  const int direction = cfg.integer("branches.direction", 1);
  if (direction != 1 && direction != -1) throw InvalidInput("config: branches.direction must be 1 or -1");

  std::vector<CriticalPoint> starts;
  if (cfg.has("branches.seeds")) {
    for (const auto& seed : cfg.vectors("branches.seeds")) {
      if (seed.size() != model.dim) throw InvalidInput("config: seed dimension does not match the model");
      const auto root = newton_critical(model, t0, seed, tol, &domain);
      if (!root) throw NumericalFailure("branches: Newton did not converge from seed " + format_vec(seed));
      starts.push_back(classify(model, t0, *root, tol));
    }
  } else {
    starts = find_critical(model, t0, domain, cfg.integer("branches.n_starts", 64), tol).points;
  }
  sink.table("critical_points.csv", csv::branch_table(starts));

  ContinuationOptions copts;
  copts.domain = domain;
  copts.tol = tol;
  copts.max_arc_step = cfg.positive("branches.max_arc_step", copts.max_arc_step);
  copts.t_end = cfg.number("branches.t_end", -1.0);

  Failures failures;
  csv::Report r{{"model", model.name}, {"t0", format(t0)}, {"critical_points", std::to_string(starts.size())}};
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const auto branch = continue_branch(model, starts[k], direction, copts);
    sink.table("branch_" + std::to_string(k + 1) + ".csv", csv::branch_table(branch.samples));
    const std::string p = "branch_" + std::to_string(k + 1) + ".";
    r.emplace_back(p + "start", format_vec(starts[k].u));
    r.emplace_back(p + "start_kind", to_string(starts[k].kind));
    r.emplace_back(p + "termination", to_string(branch.termination));
    r.emplace_back(p + "t_end", format(branch.t_star));
    r.emplace_back(p + "u_end", format_vec(branch.u_star));
    r.emplace_back(p + "samples", std::to_string(branch.samples.size()));
    if (branch.termination == BranchEnd::fold) {
      const auto tv = check_transversality(model, branch.t_star, branch.u_star, tol);
      r.emplace_back(p + "null_dim", std::to_string(tv.null_dim));
      r.emplace_back(p + "T2", format(tv.T2_value));
      r.emplace_back(p + "T3", format(tv.T3_value));
      r.emplace_back(p + "transversal", tv.pass ? "true" : "false");
      check(failures, tv.pass, "transversality(branch " + std::to_string(k + 1) + ")");
    }
  }
  sink.report("branches_report.txt", r);
  return failures;
}

Failures cmd_jump(const Config& cfg, OutputSink& sink) {
  const EnergyModel model = build_model(cfg);
  const Box domain = build_domain(cfg, model.dim);
  const auto tol = critical_tolerances(cfg);
  double t_star = 0.0;
  Vec u_star;
  if (cfg.has("jump.t_star")) {
    t_star = cfg.number("jump.t_star");
    u_star = state(cfg, "jump.u_star", model);
  } else {
    const double t0 = cfg.number("jump.t0", 0.0);
    const auto root = newton_critical(model, t0, state(cfg, "jump.u0", model), tol, &domain);
    if (!root) throw NumericalFailure("jump: no critical point near jump.u0");
    ContinuationOptions copts;
    copts.domain = domain;
    copts.tol = tol;
    const auto branch = continue_branch(model, classify(model, t0, *root, tol), 1, copts);
    if (branch.termination != BranchEnd::fold) {
      throw NumericalFailure("jump: branch from jump.u0 ends by " + to_string(branch.termination) + ", not at a fold");
    }
    t_star = branch.t_star;
    u_star = branch.u_star;
  }

  Failures failures;
  const auto tv = check_transversality(model, t_star, u_star, tol);
  check(failures, tv.pass, "transversality");
  HeteroclinicOptions hopts;
  hopts.search_box = domain;
  hopts.tol = tol;
  hopts.landing_tol = cfg.positive("jump.landing_tol", hopts.landing_tol);
  const double delta = cfg.positive("jump.launch_offset", default_launch_offset(domain));
  const Vec direction = tv.T3_value > 0.0 ? Vec(-tv.null_vector) : tv.null_vector;
  JumpTransition jt = solve_heteroclinic(model, t_star, u_star, direction, delta, hopts);
  if (jt.status == "returned_to_start") jt = solve_heteroclinic(model, t_star, u_star, -direction, delta, hopts);
  check(failures, jt.converged, "heteroclinic_landing");

  const double drop = model.value(t_star, jt.u_minus) - model.value(t_star, jt.u_plus);
  const double cost_tol = cfg.positive("limit.cost_tol", 1e-5);
  check(failures, std::abs(jt.cost - drop) <= cost_tol, "jump_relation");
  sink.table("transition.csv", csv::transition_table(jt, model));

  csv::Report r{{"model", model.name},
                {"t_star", format(t_star)},
                {"u_minus", format_vec(jt.u_minus)},
                {"u_plus", format_vec(jt.u_plus)},
                {"status", jt.status},
                {"pieces", std::to_string(jt.pieces)},
                {"null_dim", std::to_string(tv.null_dim)},
                {"T2", format(tv.T2_value)},
                {"T3", format(tv.T3_value)},
                {"transition_cost", format(jt.cost)},
                {"energy_drop", format(drop)},
                {"arclength", format(jt.arclength)},
                {"landing_grad_norm", format(jt.landing_grad_norm)},
                {"chain_rule_residual", format(chain_rule_residual(jt.path.nodes, model, t_star))}};
  if (model.dim == 1 && jt.converged) {
    r.emplace_back("cost_1d", format(cost_1d(model, t_star, jt.u_minus[0], jt.u_plus[0]).value));
  }
  const int probes = cfg.integer("jump.probe_dirs", 0);
  if (probes > 0 && jt.converged) {
    const auto count = count_transitions(model, t_star, u_star, jt.u_plus, probes, hopts);
    r.emplace_back("transition_clusters", std::to_string(count.clusters));
    r.emplace_back("probes_landed", std::to_string(count.landed));
  }
  sink.report("jump_report.txt", r);
  return failures;
}

Failures cmd_cost(const Config& cfg, OutputSink& sink) {
  const EnergyModel model = build_model(cfg);
  const double t = cfg.number("cost.t", 0.0);
  const auto points = cfg.vectors("cost.points");
  for (const auto& p : points) {
    if (p.size() != model.dim) throw InvalidInput("config: cost point dimension does not match the model");
  }
  const CostMethod method =
      cost_method_from_string(cfg.string("cost.oracle", model.dim == 1 ? "quadrature_1d" : "grid_dijkstra"));
  const GridSpec grid{build_domain(cfg, model.dim), cfg.positive("cost.spacing", 1e-2)};
  const auto rep = check_cost_properties(model, t, points, method, grid, cfg.integer("cost.n_quad", 2000));
  sink.table("costs.csv", csv::cost_table(rep, method));
  if (cfg.boolean("cost.write_witness", false)) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t j = i + 1; j < points.size(); ++j) {
        const auto est = method == CostMethod::quadrature_1d ? cost_1d(model, t, points[i][0], points[j][0])
                                                             : cost_grid(model, t, points[i], points[j], grid);
        sink.table("witness_" + std::to_string(i) + "_" + std::to_string(j) + ".csv",
                   csv::path_table(est.witness_path, model, t));
      }
    }
  }

  Failures failures;
  check(failures, rep.positive, "positivity");
  check(failures, rep.symmetric, "symmetry");
  check(failures, rep.triangle, "triangle_inequality");
  check(failures, rep.lower_semicontinuous, "lower_semicontinuity");
  check(failures, rep.energy_lower_bound, "energy_lower_bound");
  auto yes = [](bool b) { return std::string(b ? "true" : "false"); };
  sink.report("cost_report.txt", {{"model", model.name},
                                  {"t", format(t)},
                                  {"oracle", to_string(method)},
                                  {"resolution", format(rep.resolution)},
                                  {"positive", yes(rep.positive)},
                                  {"symmetric", yes(rep.symmetric)},
                                  {"max_asymmetry", format(rep.max_asymmetry)},
                                  {"triangle", yes(rep.triangle)},
                                  {"worst_triangle_excess", format(rep.worst_triangle_excess)},
                                  {"lower_semicontinuous", yes(rep.lower_semicontinuous)},
                                  {"worst_lsc_gap", format(rep.worst_lsc_gap)},
                                  {"energy_lower_bound", yes(rep.energy_lower_bound)}});
  return failures;
}

Failures cmd_limit(const Config& cfg, OutputSink& sink) {
  const EnergyModel model = build_model(cfg);
  const Box domain = build_domain(cfg, model.dim);
  const TimeInterval span{cfg.number("limit.t0", 0.0), cfg.number("limit.t1", model.horizon)};
  const BVSolution bv = construct_bv(model, state(cfg, "limit.u0", model), span, bv_options(cfg, domain));
  write_bv(sink, bv, model, span.end);
  return {};
}

Failures cmd_compare(const Config& cfg, OutputSink& sink) {
  const EnergyModel model = build_model(cfg);
  const Box domain = build_domain(cfg, model.dim);
  const Vec u0 = state(cfg, "compare.u0", model);
  const TimeInterval span{cfg.number("compare.t0", 0.0), cfg.number("compare.t1", model.horizon)};
  const auto eps = epsilon_list(cfg, "compare.epsilons", {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}, true);
  const BVSolution bv = construct_bv(model, u0, span, bv_options(cfg, domain));
  write_bv(sink, bv, model, span.end);

  CompareOptions copts;
  copts.exclusion_radius = cfg.positive("compare.exclusion_radius", copts.exclusion_radius);
  if (cfg.has("compare.window_halfwidth")) copts.window_halfwidth = cfg.positive("compare.window_halfwidth", 1.0);
  copts.mass_rel_tol = cfg.positive("compare.mass_rel_tol", copts.mass_rel_tol);
  copts.outside_mass_tol = cfg.positive("compare.outside_mass_tol", copts.outside_mass_tol);
  copts.integrator = integrator_options(cfg, "compare");
  const int n = cfg.integer("compare.n_samples", 201);
  if (n < 2) throw InvalidInput("config: compare.n_samples must be at least 2");
  std::vector<double> samples;
  for (int k = 0; k < n; ++k) {
    const double t = span.start + (span.end - span.start) * k / (n - 1);
    bool near_jump = false;
    for (double tj : bv.jump_set) near_jump = near_jump || std::abs(t - tj) < copts.exclusion_radius;
    if (!near_jump) samples.push_back(t);
  }
  const auto rep = compare_vanishing_viscosity(model, u0, eps, bv, samples, copts);
  sink.table("convergence.csv", csv::convergence_table(rep));

  const double sup_tol = cfg.positive("compare.sup_tol", 5e-3);
  Failures failures;
  check(failures, rep.sup_decreasing, "sup_distance_decreasing");
  check(failures, rep.rows.back().sup_distance < sup_tol, "final_sup_distance");
  check(failures, rep.window_mass_converged, "jump_window_mass");
  check(failures, rep.outside_mass_vanishing, "outside_mass");
  check(failures, rep.dissipation_lower_bound, "dissipation_lower_bound");
  auto yes = [](bool b) { return std::string(b ? "true" : "false"); };
  csv::Report r{{"model", model.name},
                {"epsilons", std::to_string(eps.size())},
                {"window_halfwidth", format(rep.window_halfwidth)},
                {"sample_times", std::to_string(samples.size())},
                {"final_sup_distance", format(rep.rows.back().sup_distance)},
                {"sup_decreasing", yes(rep.sup_decreasing)},
                {"window_mass_converged", yes(rep.window_mass_converged)},
                {"outside_mass_vanishing", yes(rep.outside_mass_vanishing)},
                {"dissipation_lower_bound", yes(rep.dissipation_lower_bound)}};
  for (std::size_t j = 0; j < rep.jump_times.size(); ++j) {
    r.emplace_back("atom_" + std::to_string(j + 1), format(rep.atom_masses[j]));
    r.emplace_back("final_window_mass_" + std::to_string(j + 1), format(rep.rows.back().window_masses[j]));
  }
  sink.report("compare_report.txt", r);
  return failures;
}

using Command = Failures (*)(const Config&, OutputSink&);

Command lookup(const std::string& name) {
  if (name == "validate") return cmd_validate;
  if (name == "simulate") return cmd_simulate;
  if (name == "branches") return cmd_branches;
  if (name == "jump") return cmd_jump;
  if (name == "cost") return cmd_cost;
  if (name == "limit") return cmd_limit;
  if (name == "compare") return cmd_compare;
  return nullptr;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"validate", "simulate", "branches", "jump", "cost", "limit", "compare"};
  return names;
}

int run(const std::string& subcommand, const std::string& config_path, const std::vector<std::string>& overrides,
        std::ostream& log) {
  std::unique_ptr<OutputSink> sink;
  auto diagnose = [&](int code, const std::string& kind, const std::string& what) {
    log << "bvflow " << subcommand << ": " << kind << ": " << what << '\n';
    if (sink) {
      try {
        sink->report("diagnostic.txt", {{"subcommand", subcommand}, {"exit_code", std::to_string(code)},
                                        {"kind", kind}, {"detail", what}});
      } catch (const std::exception&) {
      }
    }
    return code;
  };

  const Command cmd = lookup(subcommand);
  if (!cmd) return diagnose(config_error, "config error", "unknown subcommand '" + subcommand + "'");
  try {
    const Config cfg = Config::load(config_path, overrides);
    sink = std::make_unique<OutputSink>(cfg.string("output_dir", "bvflow_out"));
    // The echoed config leaves out output_dir so reruns elsewhere hash identically.
    auto echoed = cfg.tree();
    echoed.erase("output_dir");
    sink->write("config.json", echoed.dump(2) + "\n");
    const Failures failures = cmd(cfg, *sink);
    if (!failures.empty()) {
      std::string list;
      for (const auto& f : failures) list += (list.empty() ? "" : ", ") + f;
      return diagnose(numerical_failure, "failed invariant", list);
    }
    log << "bvflow " << subcommand << ": wrote " << sink->entries().size() << " files to " << sink->dir().string()
        << '\n';
    return ok;
  } catch (const InvalidInput& e) {
    return diagnose(config_error, "config error", e.what());
  } catch (const nlohmann::json::exception& e) {
    return diagnose(config_error, "config error", e.what());
  } catch (const NumericalFailure& e) {
    return diagnose(numerical_failure, "numerical failure", e.what());
  } catch (const std::exception& e) {
    return diagnose(numerical_failure, "numerical failure", e.what());
  }
}

}  // namespace bvflow::cli
