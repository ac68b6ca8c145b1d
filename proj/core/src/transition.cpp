#include "bvflow/transition.hpp"
#include "bvflow/parallel.hpp"
#include "bvflow/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace bvflow {

void TransitionPath::parameterize_by_length() {
  s.assign(nodes.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    total += (nodes[k] - nodes[k - 1]).norm();
    s[k] = total;
  }
  if (total > 0.0) {
    for (double& v : s) v /= total;
  }
}

double default_launch_offset(const Box& box) { return 1e-4 * box.diameter(); }

namespace {

// Dormand-Prince 5(4) tableau.
constexpr std::array<std::array<double, 6>, 7> kA{{
    {0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
}};
constexpr std::array<double, 7> kB{35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0};
constexpr std::array<double, 7> kBhat{5179.0 / 57600,    0,           7571.0 / 16695, 393.0 / 640,
                                      -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

struct FlowPiece {
  std::vector<Vec> nodes;
  double pseudo_time = 0.0;
  std::string status;
  std::optional<CriticalPoint> landing;
  double landing_grad_norm = 0.0;
};

struct Catalog {
  std::vector<CriticalPoint> points;
};

// Nearest catalogued point within the capture radius, polishing and
// recording a new one if the catalogue missed it.
std::optional<CriticalPoint> capture(const EnergyModel& model, double t_star, const Vec& theta,
                                     Catalog& catalog, const HeteroclinicOptions& opts) {
  const CriticalPoint* best = nullptr;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& p : catalog.points) {
    const double dist = (p.u - theta).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = &p;
    }
  }
  if (best && best_dist <= opts.capture_radius) return *best;
  const auto root = newton_critical(model, t_star, theta, opts.tol);
  if (!root || (*root - theta).norm() > opts.capture_radius) return std::nullopt;
  catalog.points.push_back(classify(model, t_star, *root, opts.tol));
  return catalog.points.back();
}

FlowPiece flow_piece(const EnergyModel& model, double t_star, const Vec& origin, const Vec& launch,
                     Catalog& catalog, const HeteroclinicOptions& opts) {
  const double diameter = opts.search_box.diameter();
  const double spacing = opts.node_spacing_fraction * diameter;
  const double trust = opts.trust_fraction * diameter;
  const double max_disp = std::min(spacing, trust);
  auto rhs = [&](const Vec& theta) -> Vec { return -model.gradient(t_star, theta); };

  FlowPiece piece;
  piece.nodes.push_back(origin);
  Vec theta = launch;
  piece.nodes.push_back(theta);
  Vec k1 = rhs(theta);
  double h = max_disp / std::max(k1.norm(), 1e-300);
  std::array<Vec, 7> k;
  std::size_t steps = 0;

  while (true) {
    if (++steps > opts.max_steps) throw NumericalFailure("solve_heteroclinic: step budget exhausted");
    if (piece.pseudo_time >= opts.max_pseudo_time) {
      piece.status = "max_pseudo_time";
      piece.landing_grad_norm = k1.norm();
      return piece;
    }
    h = std::min(h, max_disp / std::max(k1.norm(), 1e-300));
    h = std::min(h, opts.max_pseudo_time - piece.pseudo_time);

    k[0] = k1;
    for (int stage = 1; stage < 7; ++stage) {
      Vec y = theta;
      for (int j = 0; j < stage; ++j) {
        if (kA[stage][j] != 0.0) y += h * kA[stage][j] * k[j];
      }
      k[stage] = rhs(y);
    }
    Vec next = theta;
    Vec err = Vec::Zero(theta.size());
    for (int j = 0; j < 7; ++j) {
      next += h * kB[j] * k[j];
      err += h * (kB[j] - kBhat[j]) * k[j];
    }
    double err_norm = 0.0;
    for (int i = 0; i < theta.size(); ++i) {
      const double scale = opts.atol + opts.rtol * std::max(std::abs(theta[i]), std::abs(next[i]));
      err_norm = std::max(err_norm, std::abs(err[i]) / scale);
    }
    const bool finite = next.allFinite() && std::isfinite(err_norm);
    if (!finite || err_norm > 1.0 || (next - theta).norm() > 1.5 * max_disp) {
      const double factor = finite && err_norm > 0.0 ? std::max(0.1, 0.9 * std::pow(err_norm, -0.2)) : 0.1;
      h *= std::min(factor, 0.5);
      if (h < 1e-14) throw NumericalFailure("solve_heteroclinic: step size underflow");
      continue;
    }

    piece.pseudo_time += h;
    theta = next;
    k1 = k[6];
    piece.nodes.push_back(theta);
    if (!opts.search_box.contains(theta)) {
      throw NumericalFailure("solve_heteroclinic: trajectory left the search box");
    }
    const double g = k1.norm();
    if (g <= opts.landing_tol) {
      if (auto point = capture(model, t_star, theta, catalog, opts)) {
        piece.landing = *point;
        piece.landing_grad_norm = g;
        piece.status = (point->u - origin).norm() <= opts.capture_radius ? "returned_to_start" : "landed";
        return piece;
      }
    }
    const double growth = err_norm > 0.0 ? std::min(5.0, 0.9 * std::pow(err_norm, -0.2)) : 5.0;
    h *= std::max(1.0, growth);
  }
}

Vec descent_direction(const EnergyModel& model, const CriticalPoint& p) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(model.hessian(p.t, p.u));
  Vec v = eig.eigenvectors().col(0);
  Eigen::Index lead = 0;
  v.cwiseAbs().maxCoeff(&lead);
  if (v[lead] < 0.0) v = -v;
  return v;
}

double arclength(const std::vector<Vec>& nodes) {
  double total = 0.0;
  for (std::size_t k = 1; k < nodes.size(); ++k) total += (nodes[k] - nodes[k - 1]).norm();
  return total;
}

JumpTransition heteroclinic_with_catalog(const EnergyModel& model, double t_star, const Vec& u_from,
                                         const Vec& direction, double delta,
                                         const HeteroclinicOptions& opts, Catalog& catalog) {
  if (u_from.size() != model.dim || direction.size() != model.dim) {
    throw InvalidInput("solve_heteroclinic: dimension mismatch");
  }
  if (!(delta > 0.0)) throw InvalidInput("solve_heteroclinic: delta must be positive");
  if (direction.norm() == 0.0) throw InvalidInput("solve_heteroclinic: zero launch direction");
  const Vec dir = direction / direction.norm();

  JumpTransition jt;
  jt.t_star = t_star;
  jt.u_minus = u_from;

  FlowPiece piece = flow_piece(model, t_star, u_from, u_from + delta * dir, catalog, opts);
  std::vector<Vec> nodes = piece.nodes;
  jt.pseudo_time = piece.pseudo_time;
  jt.pieces = 1;

  // Saddle landings: continue along the unstable direction, taking the side
  // that reaches a different critical point with the lowest energy.
  int relaunches = 0;
  while (piece.status == "landed" && piece.landing->kind == CriticalKind::saddle &&
         relaunches < opts.max_relaunches) {
    ++relaunches;
    const CriticalPoint saddle = *piece.landing;
    const Vec v = descent_direction(model, saddle);
    std::optional<FlowPiece> chosen;
    double chosen_energy = std::numeric_limits<double>::infinity();
    for (double sign : {1.0, -1.0}) {
      FlowPiece candidate;
      try {
        candidate = flow_piece(model, t_star, saddle.u, saddle.u + sign * delta * v, catalog, opts);
      } catch (const NumericalFailure&) {
        continue;
      }
      if (candidate.status != "landed") continue;
      if ((candidate.landing->u - u_from).norm() <= opts.capture_radius) continue;
      const double e = model.value(t_star, candidate.landing->u);
      if (e < chosen_energy) {
        chosen_energy = e;
        chosen = std::move(candidate);
      }
    }
    if (!chosen) break;
    piece = std::move(*chosen);
    nodes.insert(nodes.end(), piece.nodes.begin() + 1, piece.nodes.end());
    jt.pseudo_time += piece.pseudo_time;
    ++jt.pieces;
  }

  jt.status = piece.status;
  jt.converged = piece.status == "landed";
  jt.landing_grad_norm = piece.landing_grad_norm;
  jt.u_plus = piece.landing ? piece.landing->u : nodes.back();
  jt.path.nodes = std::move(nodes);
  jt.path.parameterize_by_length();
  jt.cost = transition_cost(jt.path.nodes, model, t_star);
  jt.arclength = arclength(jt.path.nodes);
  return jt;
}

Catalog make_catalog(const EnergyModel& model, double t_star, const HeteroclinicOptions& opts) {
  Catalog catalog;
  catalog.points = find_critical(model, t_star, opts.search_box, opts.catalog_starts, opts.tol).points;
  return catalog;
}

}  // namespace

JumpTransition solve_heteroclinic(const EnergyModel& model, double t_star, const Vec& u_from,
                                  const Vec& direction, double delta, const HeteroclinicOptions& opts) {
  if (opts.search_box.dim() != model.dim) throw InvalidInput("solve_heteroclinic: box dimension mismatch");
  Catalog catalog = make_catalog(model, t_star, opts);
  return heteroclinic_with_catalog(model, t_star, u_from, direction, delta, opts, catalog);
}

std::vector<double> cumulative_cost(const std::vector<Vec>& nodes, const EnergyModel& model, double t_star) {
  std::vector<double> cum(nodes.size(), 0.0);
  if (nodes.empty()) return cum;
  double g_prev = model.gradient(t_star, nodes[0]).norm();
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const double g = model.gradient(t_star, nodes[k]).norm();
    cum[k] = cum[k - 1] + 0.5 * (g_prev + g) * (nodes[k] - nodes[k - 1]).norm();
    g_prev = g;
  }
  return cum;
}

double transition_cost(const std::vector<Vec>& nodes, const EnergyModel& model, double t_star) {
  if (nodes.size() < 2) throw InvalidInput("transition_cost: path needs at least two nodes");
  return cumulative_cost(nodes, model, t_star).back();
}

TransitionPath reparameterize_unit(const TransitionPath& path, const EnergyModel& model, double t_star) {
  if (path.size() < 2) throw InvalidInput("reparameterize_unit: path needs at least two nodes");
  const auto cum = cumulative_cost(path.nodes, model, t_star);
  if (!(cum.back() > 0.0)) throw InvalidInput("reparameterize_unit: zero-cost path");
  TransitionPath out;
  out.nodes = path.nodes;
  out.s.resize(cum.size());
  for (std::size_t k = 0; k < cum.size(); ++k) out.s[k] = cum[k] / cum.back();
  out.s.back() = 1.0;
  return out;
}

TransitionPath resample_uniform_cost(const TransitionPath& path, const EnergyModel& model, double t_star,
                                     int n_nodes) {
  if (path.size() < 2) throw InvalidInput("resample_uniform_cost: path needs at least two nodes");
  if (n_nodes < 2) throw InvalidInput("resample_uniform_cost: need at least two output nodes");
  std::vector<double> g(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) g[k] = model.gradient(t_star, path.nodes[k]).norm();
  const auto cum = cumulative_cost(path.nodes, model, t_star);
  const double total = cum.back();
  if (!(total > 0.0)) throw InvalidInput("resample_uniform_cost: zero-cost path");

  TransitionPath out;
  out.nodes.push_back(path.nodes.front());
  out.s.push_back(0.0);
  std::size_t seg = 0;
  for (int j = 1; j + 1 < n_nodes; ++j) {
    const double level = total * j / (n_nodes - 1.0);
    while (seg + 2 < path.size() && cum[seg + 1] < level) ++seg;
    // Solve L (g0 w + (g1 - g0) w^2 / 2) = level - cum[seg] for w in [0, 1].
    const double length = (path.nodes[seg + 1] - path.nodes[seg]).norm();
    const double g0 = g[seg], g1 = g[seg + 1];
    const double target = (level - cum[seg]) / std::max(length, 1e-300);
    const double a = 0.5 * (g1 - g0), b = g0;
    double w;
    if (std::abs(a) < 1e-14 * std::max(1.0, std::abs(b))) {
      w = b > 0.0 ? target / b : 0.0;
    } else {
      const double disc = std::max(0.0, b * b + 4.0 * a * target);
      w = 2.0 * target / (b + std::sqrt(disc));
    }
    w = std::clamp(w, 0.0, 1.0);
    out.nodes.push_back(path.nodes[seg] + w * (path.nodes[seg + 1] - path.nodes[seg]));
    out.s.push_back(static_cast<double>(j) / (n_nodes - 1.0));
  }
  out.nodes.push_back(path.nodes.back());
  out.s.push_back(1.0);
  return out;
}

double chain_rule_residual(const std::vector<Vec>& nodes, const EnergyModel& model, double t_star) {
  if (nodes.size() < 2) return 0.0;
  double g_max = 0.0;
  for (const auto& n : nodes) g_max = std::max(g_max, model.gradient(t_star, n).norm());
  if (g_max == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const Vec step = nodes[k + 1] - nodes[k];
    const double len = step.norm();
    if (len == 0.0) continue;
    const double de = model.value(t_star, nodes[k + 1]) - model.value(t_star, nodes[k]);
    const double linear = model.gradient(t_star, 0.5 * (nodes[k] + nodes[k + 1])).dot(step);
    worst = std::max(worst, std::abs(de - linear) / (len * g_max));
  }
  return worst;
}

double hausdorff_distance(const std::vector<Vec>& a, const std::vector<Vec>& b, std::size_t max_nodes) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto thin = [max_nodes](const std::vector<Vec>& v) {
    std::vector<const Vec*> out;
    const std::size_t stride = std::max<std::size_t>(1, (v.size() + max_nodes - 1) / max_nodes);
    for (std::size_t i = 0; i < v.size(); i += stride) out.push_back(&v[i]);
    if (out.back() != &v.back()) out.push_back(&v.back());
    return out;
  };
  const auto pa = thin(a), pb = thin(b);
  auto directed = [](const std::vector<const Vec*>& x, const std::vector<const Vec*>& y) {
    double worst = 0.0;
    for (const Vec* p : x) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec* q : y) best = std::min(best, (*p - *q).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(pa, pb), directed(pb, pa));
}

TransitionCount count_transitions(const EnergyModel& model, double t_star, const Vec& u_minus,
                                  const Vec& u_plus, int n_probe_dirs, const HeteroclinicOptions& opts,
                                  double cluster_fraction) {
  if (n_probe_dirs < 1) throw InvalidInput("count_transitions: need at least one probe direction");
  const Catalog base = make_catalog(model, t_star, opts);
  const auto dirs = probe_directions(model.dim, n_probe_dirs);
  const double delta = default_launch_offset(opts.search_box);

  std::vector<std::optional<JumpTransition>> results(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t i) {
    Catalog catalog = base;
    try {
      results[i] = heteroclinic_with_catalog(model, t_star, u_minus, dirs[i], delta, opts, catalog);
    } catch (const NumericalFailure&) {
      results[i].reset();
    }
  });

  TransitionCount count;
  count.probes = static_cast<int>(dirs.size());
  const double threshold = cluster_fraction * opts.search_box.diameter();
  std::vector<const std::vector<Vec>*> representatives;
  for (const auto& r : results) {
    if (!r || !r->converged || (r->u_plus - u_plus).norm() > opts.capture_radius) continue;
    ++count.landed;
    const bool known = std::any_of(representatives.begin(), representatives.end(), [&](const auto* rep) {
      return hausdorff_distance(*rep, r->path.nodes) <= threshold;
    });
    if (!known) representatives.push_back(&r->path.nodes);
  }
  count.clusters = static_cast<int>(representatives.size());
  return count;
}

}  // namespace bvflow
