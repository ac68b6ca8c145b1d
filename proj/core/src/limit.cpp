#include "bvflow/limit.hpp"

#include "bvflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace bvflow {

namespace {

Vec segment_state(const BVSegment& seg, const EnergyModel& model, double t, const CriticalTolerances& tol) {
  const auto& samples = seg.branch.samples;
  if (samples.size() == 1 || t <= samples.front().t) return samples.front().u;
  if (t >= samples.back().t) return samples.back().u;
  const auto it = std::lower_bound(samples.begin(), samples.end(), t,
                                   [](const CriticalPoint& p, double value) { return p.t < value; });
  if (it->t == t) return it->u;
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (t - lo.t) / (hi.t - lo.t);
  const Vec guess = (1.0 - w) * lo.u + w * hi.u;
  // Polish, but never let Newton hop onto a neighbouring branch.
  const double bracket = (hi.u - lo.u).norm();
  if (auto polished = newton_critical(model, t, guess, tol)) {
    if ((*polished - guess).norm() <= bracket + 1e-12) return *polished;
  }
  return guess;
}

std::size_t find_segment(const BVSolution& bv, double t, bool left) {
  if (bv.segments.empty()) throw InvalidInput("empty BV solution");
  if (t < bv.t_begin || t > bv.t_end) throw InvalidInput("time outside the BV solution span");
  for (std::size_t k = 0; k < bv.segments.size(); ++k) {
    const auto& seg = bv.segments[k];
    if (left ? (t <= seg.t_end) : (t < seg.t_end || k + 1 == bv.segments.size())) return k;
  }
  return bv.segments.size() - 1;
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  // A fixed first split keeps the estimate honest for oscillating integrands.
  constexpr int pieces = 16;
  double sum = 0.0;
  for (int k = 0; k < pieces; ++k) {
    const double lo = a + (b - a) * k / pieces;
    const double hi = k + 1 == pieces ? b : a + (b - a) * (k + 1) / pieces;
    const double flo = f(lo), fhi = f(hi), fmid = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    sum += adaptive_simpson(f, lo, hi, flo, fmid, fhi, whole, tol / pieces, 40);
  }
  return sum;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

}  // namespace

Vec BVSolution::state_at(const EnergyModel& model, double t) const {
  const auto& seg = segments[find_segment(*this, t, false)];
  return segment_state(seg, model, t, {});
}

Vec BVSolution::left_state(const EnergyModel& model, double t) const {
  const auto& seg = segments[find_segment(*this, t, true)];
  return segment_state(seg, model, t, {});
}

BVSolution construct_bv(const EnergyModel& model, const Vec& u0, const TimeInterval& span, const BVOptions& opts) {
  if (u0.size() != model.dim) throw InvalidInput("construct_bv: u0 has the wrong dimension");
  if (opts.domain.dim() != model.dim) throw InvalidInput("construct_bv: domain dimension mismatch");
  if (!(span.end > span.start)) throw InvalidInput("construct_bv: empty time span");
  if (opts.max_jumps < 1) throw InvalidInput("construct_bv: max_jumps must be at least 1");

  const CriticalTolerances& tol = opts.continuation.tol;
  const auto root = newton_critical(model, span.start, u0, tol, &opts.domain);
  if (!root || (*root - u0).norm() > opts.capture_radius) {
    throw InvalidInput("construct_bv: u0 is not within capture_radius of a critical point");
  }
  CriticalPoint current = classify(model, span.start, *root, tol);
  if (current.kind != CriticalKind::nondegenerate_min) {
    throw InvalidInput("construct_bv: u0 is not captured by a nondegenerate minimum (" + to_string(current.kind) + ")");
  }

  ContinuationOptions copts = opts.continuation;
  copts.domain = opts.domain;
  copts.t_end = span.end;
  HeteroclinicOptions hopts = opts.heteroclinic;
  hopts.search_box = opts.domain;
  const double delta = opts.launch_offset > 0.0 ? opts.launch_offset : default_launch_offset(opts.domain);

  BVSolution bv;
  bv.t_begin = span.start;
  bv.t_end = span.end;

  while (true) {
    BVSegment seg;
    seg.index = static_cast<int>(bv.segments.size());
    seg.t_begin = current.t;
    seg.branch = continue_branch(model, current, +1, copts);
    const CriticalBranch& branch = seg.branch;
    if (branch.termination == BranchEnd::left_domain) {
      throw NumericalFailure("construct_bv: branch left the domain at t=" + fmt(branch.t_star));
    }
    seg.t_end = branch.termination == BranchEnd::fold ? branch.t_star : span.end;
    bv.segments.push_back(seg);
    if (branch.termination == BranchEnd::reached_time_boundary) break;

    const double t_star = branch.t_star;
    if (!bv.jumps.empty() && t_star - bv.jumps.back().t <= tol.fold_time_tol) {
      throw NumericalFailure("construct_bv: two folds within fold_time_tol at t=" + fmt(t_star));
    }
    const auto tv = check_transversality(model, t_star, branch.u_star, tol);
    if (!tv.pass) {
      throw NumericalFailure("construct_bv: non-transversal fold at t=" + fmt(t_star) + " (null_dim=" +
                             std::to_string(tv.null_dim) + ", T2=" + fmt(tv.T2_value) + ", T3=" + fmt(tv.T3_value) + ")");
    }
    // Along the null vector E changes like T3 s^3 / 6, so descend on the opposite side of T3.
    const Vec direction = tv.T3_value > 0.0 ? Vec(-tv.null_vector) : tv.null_vector;
    JumpTransition jt = solve_heteroclinic(model, t_star, branch.u_star, direction, delta, hopts);
    if (jt.status == "returned_to_start") jt = solve_heteroclinic(model, t_star, branch.u_star, -direction, delta, hopts);
    if (!jt.converged) {
      throw NumericalFailure("construct_bv: heteroclinic from the fold at t=" + fmt(t_star) + " ended with " + jt.status);
    }
    const double drop = model.value(t_star, jt.u_minus) - model.value(t_star, jt.u_plus);
    if (std::abs(jt.cost - drop) > opts.cost_tol) {
      throw NumericalFailure("construct_bv: jump relation violated at t=" + fmt(t_star) + " (cost " + fmt(jt.cost) +
                             ", energy drop " + fmt(drop) + ")");
    }

    BVJump jump;
    jump.t = t_star;
    jump.u_minus = jt.u_minus;
    jump.u_plus = jt.u_plus;
    jump.transition = jt;
    bv.jumps.push_back(jump);
    bv.jump_set.push_back(t_star);
    bv.defect_atoms.emplace_back(t_star, jt.cost);

    current = classify(model, t_star, jt.u_plus, tol);
    if (static_cast<int>(bv.jumps.size()) >= opts.max_jumps || t_star >= span.end) {
      // Stop here; a one-point segment carries the right limit.
      BVSegment last;
      last.index = static_cast<int>(bv.segments.size());
      last.t_begin = last.t_end = t_star;
      last.branch.samples = {current};
      last.branch.t_star = t_star;
      last.branch.u_star = current.u;
      bv.segments.push_back(last);
      bv.t_end = t_star;
      break;
    }
  }

  for (const auto& seg : bv.segments) {
    for (const auto& p : seg.branch.samples) bv.energy_record.emplace_back(p.t, model.value(p.t, p.u));
  }
  for (const auto& seg : bv.segments) {
    const double r = energy_balance_residual(bv, model, seg.t_begin, seg.t_end);
    if (r > opts.balance_tol) {
      throw NumericalFailure("construct_bv: energy balance residual " + fmt(r) + " on segment " + std::to_string(seg.index));
    }
    bv.segment_balance.push_back(r);
  }
  return bv;
}

double energy_balance_residual(const BVSolution& bv, const EnergyModel& model, double s, double t, bool include_atoms) {
  if (s > t) throw InvalidInput("energy_balance_residual: need s <= t");
  if (s < bv.t_begin || t > bv.t_end) throw InvalidInput("energy_balance_residual: interval outside the span");
  if (s == t) return 0.0;

  std::vector<double> breaks{s};
  double atoms = 0.0;
  for (const auto& [tj, mass] : bv.defect_atoms) {
    if (tj >= s && tj <= t) atoms += mass;
    if (tj > s && tj < t) breaks.push_back(tj);
  }
  breaks.push_back(t);

  const CriticalTolerances tol;
  double power = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], b = breaks[k + 1];
    const auto& seg = bv.segments[find_segment(bv, 0.5 * (a + b), false)];
    auto integrand = [&](double r) { return model.power(r, segment_state(seg, model, r, tol)); };
    power += integrate_adaptive(integrand, a, b, 1e-11);
  }
  const double e_t = model.value(t, bv.state_at(model, t));
  const double e_s = model.value(s, bv.left_state(model, s));
  return std::abs((include_atoms ? atoms : 0.0) + e_t - e_s - power);
}

DefectProfile defect_profile(const Trajectory& traj, const std::vector<double>& window_edges) {
  if (traj.size() < 2) throw InvalidInput("defect_profile: trajectory has fewer than two nodes");
  if (window_edges.size() < 2) throw InvalidInput("defect_profile: need at least two window edges");
  const double slack = 1e-12 * (1.0 + std::abs(traj.end()));
  for (std::size_t k = 0; k < window_edges.size(); ++k) {
    if (window_edges[k] < traj.start() - slack || window_edges[k] > traj.end() + slack) {
      throw InvalidInput("defect_profile: window edge outside the trajectory span");
    }
    if (k > 0 && !(window_edges[k] > window_edges[k - 1])) throw InvalidInput("defect_profile: edges must increase");
  }
  DefectProfile p;
  p.epsilon = traj.epsilon;
  p.window_edges = window_edges;
  for (std::size_t k = 0; k + 1 < window_edges.size(); ++k) {
    const double a = std::max(window_edges[k], traj.start());
    const double b = std::min(window_edges[k + 1], traj.end());
    p.window_masses.push_back(diss_density_integral(traj, a, b));
    p.total_mass += p.window_masses.back();
  }
  return p;
}

ConvergenceReport compare_vanishing_viscosity(const EnergyModel& model, const Vec& u0,
                                              const std::vector<double>& epsilons, const BVSolution& bv,
                                              const std::vector<double>& t_samples, const CompareOptions& opts) {
  if (epsilons.empty()) throw InvalidInput("compare: empty epsilon ladder");
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (!(epsilons[k] > 0.0)) throw InvalidInput("compare: epsilon must be positive");
    if (k > 0 && !(epsilons[k] < epsilons[k - 1])) throw InvalidInput("compare: epsilons must strictly decrease");
  }
  if (t_samples.empty()) throw InvalidInput("compare: no sample times");
  for (double t : t_samples) {
    if (t < bv.t_begin || t > bv.t_end) throw InvalidInput("compare: sample time outside the span");
    for (double tj : bv.jump_set) {
      if (std::abs(t - tj) < opts.exclusion_radius) throw InvalidInput("compare: sample time too close to a jump");
    }
  }

  ConvergenceReport rep;
  rep.window_halfwidth = opts.window_halfwidth > 0.0 ? opts.window_halfwidth : 0.05 * (bv.t_end - bv.t_begin);
  rep.jump_times = bv.jump_set;
  for (const auto& atom : bv.defect_atoms) rep.atom_masses.push_back(atom.second);
  const double delta = rep.window_halfwidth;

  std::vector<Vec> limit_states;
  limit_states.reserve(t_samples.size());
  for (double t : t_samples) limit_states.push_back(bv.state_at(model, t));

  rep.rows.resize(epsilons.size());
  parallel_for(epsilons.size(), [&](std::size_t i) {
    const Trajectory traj = integrate(model, epsilons[i], u0, {bv.t_begin, bv.t_end}, opts.integrator);
    ConvergenceRow row;
    row.epsilon = epsilons[i];
    row.steps = traj.size() - 1;
    for (std::size_t k = 0; k < t_samples.size(); ++k) {
      row.sup_distance = std::max(row.sup_distance, (traj.state_at(t_samples[k]) - limit_states[k]).norm());
    }
    auto mass = [&](double a, double b) {
      return diss_density_integral(traj, std::max(a, traj.start()), std::min(b, traj.end()));
    };
    for (double tj : bv.jump_set) {
      row.window_masses.push_back(mass(tj - delta, tj + delta));
      row.window_masses_half.push_back(mass(tj - 0.5 * delta, tj + 0.5 * delta));
      row.window_masses_double.push_back(mass(tj - 2.0 * delta, tj + 2.0 * delta));
      row.window_dissipation.push_back(dissipation_integral(traj, model, std::max(tj - delta, traj.start()),
                                                            std::min(tj + delta, traj.end())));
    }
    row.total_mass = mass(traj.start(), traj.end());
    // Windows can overlap when jumps are close; subtract their union.
    double inside = 0.0, covered_to = traj.start();
    for (double tj : bv.jump_set) {
      const double a = std::max(tj - delta, covered_to), b = std::min(tj + delta, traj.end());
      if (b > a) inside += mass(a, b);
      covered_to = std::max(covered_to, b);
    }
    row.outside_mass = std::max(0.0, row.total_mass - inside);
    row.energy_residual = energy_identity_residual(traj, traj.start(), traj.end());
    rep.rows[i] = std::move(row);
  });

  rep.sup_decreasing = true;
  for (std::size_t k = 1; k < rep.rows.size(); ++k) {
    if (!(rep.rows[k].sup_distance < rep.rows[k - 1].sup_distance)) rep.sup_decreasing = false;
  }
  const auto& last = rep.rows.back();
  rep.window_mass_converged = true;
  rep.dissipation_lower_bound = true;
  // liminf over the ladder: the smallest value among the last third of the epsilons.
  const std::size_t tail = rep.rows.size() - std::max<std::size_t>(1, (rep.rows.size() + 2) / 3);
  for (std::size_t j = 0; j < rep.atom_masses.size(); ++j) {
    const double atom = rep.atom_masses[j];
    if (std::abs(last.window_masses[j] - atom) > opts.mass_rel_tol * atom) rep.window_mass_converged = false;
    double liminf = last.window_dissipation[j];
    for (std::size_t k = tail; k < rep.rows.size(); ++k) liminf = std::min(liminf, rep.rows[k].window_dissipation[j]);
    if (liminf < atom - opts.lower_bound_tol) rep.dissipation_lower_bound = false;
  }
  rep.outside_mass_vanishing = last.outside_mass < opts.outside_mass_tol;
  for (std::size_t k = 1; k < rep.rows.size(); ++k) {
    if (rep.rows[k].outside_mass > 2.0 * rep.rows[k - 1].outside_mass) rep.outside_mass_vanishing = false;
  }
  return rep;
}

}  // namespace bvflow
