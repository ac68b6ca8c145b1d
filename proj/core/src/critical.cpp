#include "bvflow/critical.hpp"
#include "bvflow/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bvflow {

std::string to_string(CriticalKind kind) {
  switch (kind) {
    case CriticalKind::nondegenerate_min: return "nondegenerate_min";
    case CriticalKind::saddle: return "saddle";
    case CriticalKind::degenerate: return "degenerate";
  }
  return "unknown";
}

std::string to_string(BranchEnd end) {
  switch (end) {
    case BranchEnd::fold: return "fold";
    case BranchEnd::reached_time_boundary: return "reached_time_boundary";
    case BranchEnd::left_domain: return "left_domain";
  }
  return "unknown";
}

double CriticalPoint::lambda_min() const {
  double best = hess_eigs[0];
  for (int i = 1; i < hess_eigs.size(); ++i) {
    if (std::abs(hess_eigs[i]) < std::abs(best)) best = hess_eigs[i];
  }
  return best;
}

CriticalPoint classify(const EnergyModel& model, double t, const Vec& u, const CriticalTolerances& tol) {
  CriticalPoint p;
  p.t = t;
  p.u = u;
  p.grad_norm = model.gradient(t, u).norm();
  Eigen::SelfAdjointEigenSolver<Mat> eig(model.hessian(t, u), Eigen::EigenvaluesOnly);
  p.hess_eigs = eig.eigenvalues();
  if (p.hess_eigs.cwiseAbs().minCoeff() <= tol.degeneracy_tol) {
    p.kind = CriticalKind::degenerate;
  } else if (p.hess_eigs.minCoeff() > 0.0) {
    p.kind = CriticalKind::nondegenerate_min;
  } else {
    p.kind = CriticalKind::saddle;
  }
  return p;
}

std::optional<Vec> newton_critical(const EnergyModel& model, double t, const Vec& guess,
                                   const CriticalTolerances& tol, const Box* box) {
  Vec u = guess;
  Vec g = model.gradient(t, u);
  double res = g.norm();
  const double max_step = box ? box->diameter() : std::numeric_limits<double>::infinity();
  bool converged = res <= tol.newton_tol;
  // Past the tolerance, keep iterating while the residual still drops so that
  // starts converging (linearly) onto a degenerate root agree to merge_tol.
  int polish = 0;
  for (int it = 0; it < tol.newton_max_iter && polish < 60; ++it) {
    const Mat H = model.hessian(t, u);
    Vec delta = H.completeOrthogonalDecomposition().solve(-g);
    if (!delta.allFinite()) break;
    if (delta.norm() > max_step) delta *= max_step / delta.norm();
    if (delta.norm() <= 1e-15 * (1.0 + u.norm())) break;
    double lambda = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Vec trial = u + lambda * delta;
      const Vec g_trial = model.gradient(t, trial);
      const double r = g_trial.norm();
      if (std::isfinite(r) && r < res) {
        u = trial;
        g = g_trial;
        res = r;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) break;
    if (box && !box->contains(u, 1e-9 * box->diameter())) return std::nullopt;
    if (res <= tol.newton_tol) {
      converged = true;
      ++polish;
    }
  }
  if (!converged || !u.allFinite()) return std::nullopt;
  if (box && !box->contains(u, 1e-9 * box->diameter())) return std::nullopt;
  return u;
}

namespace {

double min_pairwise(const std::vector<CriticalPoint>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, (pts[i].u - pts[j].u).norm());
  }
  return best;
}

bool lexicographic_less(const Vec& a, const Vec& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

}  // namespace

CriticalSet find_critical(const EnergyModel& model, double t, const Box& search_box, int n_starts,
                          const CriticalTolerances& tol) {
  if (n_starts < 1) throw InvalidInput("find_critical: n_starts must be at least 1");
  if (search_box.dim() != model.dim) throw InvalidInput("find_critical: box dimension mismatch");
  CriticalSet set;
  HaltonSequence seq(model.dim);
  for (int k = 0; k < n_starts; ++k) {
    const auto root = newton_critical(model, t, search_box.from_unit(seq.next()), tol, &search_box);
    if (!root) continue;
    ++set.converged_starts;
    CriticalPoint p = classify(model, t, *root, tol);
    auto same = std::find_if(set.points.begin(), set.points.end(), [&](const CriticalPoint& q) {
      return (q.u - p.u).norm() <= tol.merge_tol;
    });
    if (same == set.points.end()) {
      set.points.push_back(std::move(p));
    } else if (p.grad_norm < same->grad_norm) {
      *same = std::move(p);
    }
  }
  std::sort(set.points.begin(), set.points.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) { return lexicographic_less(a.u, b.u); });
  set.min_pairwise_distance = min_pairwise(set.points);
  return set;
}

namespace {

struct BranchPoint {
  Vec x;  // (t, u)
  Vec tangent;
};

Vec compose(double t, const Vec& u) {
  Vec x(u.size() + 1);
  x[0] = t;
  x.tail(u.size()) = u;
  return x;
}

Mat extended_jacobian(const EnergyModel& model, const Vec& x) {
  const int d = model.dim;
  const double t = x[0];
  const Vec u = x.tail(d);
  Mat J(d, d + 1);
  J.col(0) = model.gradient_time_derivative(t, u);
  J.rightCols(d) = model.hessian(t, u);
  return J;
}

Vec null_tangent(const EnergyModel& model, const Vec& x) {
  const Mat J = extended_jacobian(model, x);
  Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeFullV);
  Vec tau = svd.matrixV().col(J.cols() - 1);
  return tau / tau.norm();
}

// Newton on [DE(x); normal . (x - anchor) - offset] = 0 from `guess`.
std::optional<Vec> correct_on_hyperplane(const EnergyModel& model, const Vec& guess, const Vec& normal,
                                         const Vec& anchor, double offset, const CriticalTolerances& tol,
                                         int max_iter = 30) {
  const int d = model.dim;
  Vec x = guess;
  for (int it = 0; it < max_iter; ++it) {
    const Vec g = model.gradient(x[0], x.tail(d));
    const double constraint = normal.dot(x - anchor) - offset;
    if (g.norm() <= tol.newton_tol && std::abs(constraint) <= 1e-13 * (1.0 + x.norm())) return x;
    Mat A(d + 1, d + 1);
    A.topRows(d) = extended_jacobian(model, x);
    A.row(d) = normal.transpose();
    Vec rhs(d + 1);
    rhs.head(d) = -g;
    rhs[d] = -constraint;
    const Vec delta = A.partialPivLu().solve(rhs);
    if (!delta.allFinite()) return std::nullopt;
    x += delta;
    if (delta.norm() <= 1e-15 * (1.0 + x.norm())) {
      const Vec g2 = model.gradient(x[0], x.tail(d));
      if (g2.norm() <= tol.newton_tol) return x;
      return std::nullopt;
    }
  }
  const Vec g = model.gradient(x[0], x.tail(d));
  if (g.norm() <= tol.newton_tol) return x;
  return std::nullopt;
}

// Critical point at fixed time t, started from u.
std::optional<Vec> correct_at_time(const EnergyModel& model, double t, const Vec& u,
                                   const CriticalTolerances& tol) {
  return newton_critical(model, t, u, tol);
}

double gap_to_others(const EnergyModel& model, const CriticalPoint& p, const ContinuationOptions& opts) {
  const CriticalSet set = find_critical(model, p.t, opts.domain, opts.gap_starts, opts.tol);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : set.points) {
    const double dist = (q.u - p.u).norm();
    if (dist > 10.0 * opts.tol.merge_tol) best = std::min(best, dist);
  }
  return best;
}

}  // namespace

CriticalBranch continue_branch(const EnergyModel& model, const CriticalPoint& start, int direction,
                               const ContinuationOptions& opts) {
  const auto& tol = opts.tol;
  const int d = model.dim;
  if (direction != 1 && direction != -1) throw InvalidInput("continue_branch: direction must be +1 or -1");
  if (start.u.size() != d || opts.domain.dim() != d) throw InvalidInput("continue_branch: dimension mismatch");
  if (model.gradient(start.t, start.u).norm() > tol.newton_tol) {
    throw InvalidInput("continue_branch: start point is not critical to newton_tol");
  }
  const double t_upper = opts.t_end > 0.0 ? opts.t_end : model.horizon;
  const double t_lower = 0.0;

  CriticalBranch branch;
  branch.samples.push_back(classify(model, start.t, start.u, tol));

  BranchPoint cur{compose(start.t, start.u), null_tangent(model, compose(start.t, start.u))};
  if (cur.tangent[0] * direction < 0.0) cur.tangent = -cur.tangent;
  if (std::abs(cur.tangent[0]) < 1e-12) {
    throw InvalidInput("continue_branch: start point is a fold; no time direction to follow");
  }

  double h = opts.max_arc_step;
  auto finish = [&](BranchEnd end, const Vec& x) {
    branch.termination = end;
    branch.t_star = x[0];
    branch.u_star = x.tail(d);
  };

  while (true) {
    if (static_cast<int>(branch.samples.size()) >= opts.max_samples) {
      throw NumericalFailure("continue_branch: sample budget exhausted");
    }
    const Vec predicted = cur.x + h * cur.tangent;
    auto corrected = correct_on_hyperplane(model, predicted, cur.tangent, cur.x, h, tol);
    if (corrected && (*corrected - predicted).norm() > 0.5 * h) corrected.reset();
    if (!corrected) {
      h *= 0.5;
      if (h < opts.min_arc_step) throw NumericalFailure("continue_branch: corrector diverged at the arc-step floor");
      continue;
    }
    Vec x_new = *corrected;

    // Time boundary: land exactly on it.
    const double t_bound = direction > 0 ? t_upper : t_lower;
    if ((x_new[0] - t_bound) * direction >= 0.0) {
      const double w = (t_bound - cur.x[0]) / (x_new[0] - cur.x[0]);
      const Vec u_guess = cur.x.tail(d) + w * (x_new.tail(d) - cur.x.tail(d));
      const auto u_end = correct_at_time(model, t_bound, u_guess, tol);
      if (!u_end) throw NumericalFailure("continue_branch: could not land on the time boundary");
      if (!opts.domain.contains(*u_end)) {
        finish(BranchEnd::left_domain, cur.x);
        break;
      }
      branch.samples.push_back(classify(model, t_bound, *u_end, tol));
      finish(BranchEnd::reached_time_boundary, compose(t_bound, *u_end));
      break;
    }
    if (!opts.domain.contains(x_new.tail(d))) {
      finish(BranchEnd::left_domain, cur.x);
      break;
    }

    Vec tau_new = null_tangent(model, x_new);
    if (tau_new.dot(cur.tangent) < 0.0) tau_new = -tau_new;

    if (tau_new[0] * cur.tangent[0] < 0.0) {
      // Fold between cur and x_new: bisect on the sign of the near-zero eigenvalue.
      const Vec anchor = cur.x;
      const Vec normal = cur.tangent;
      auto mu_at = [&](const Vec& x) { return classify(model, x[0], x.tail(d), tol).lambda_min(); };
      double s_a = 0.0, s_b = normal.dot(x_new - anchor);
      Vec x_a = cur.x, x_b = x_new;
      double mu_a = mu_at(x_a), mu_b = mu_at(x_b);
      if (mu_a * mu_b > 0.0) {
        throw NumericalFailure("continue_branch: turning point without an eigenvalue crossing");
      }
      Vec best = std::abs(mu_a) < std::abs(mu_b) ? x_a : x_b;
      double best_mu = std::min(std::abs(mu_a), std::abs(mu_b));
      for (int it = 0; it < 200; ++it) {
        if (best_mu <= tol.degeneracy_tol && std::abs(x_a[0] - x_b[0]) <= tol.fold_time_tol) break;
        const double s_m = 0.5 * (s_a + s_b);
        const Vec guess = 0.5 * (x_a + x_b);
        const auto x_m = correct_on_hyperplane(model, guess, normal, anchor, s_m, tol);
        if (!x_m) throw NumericalFailure("continue_branch: fold refinement corrector failed");
        const double mu_m = mu_at(*x_m);
        if (std::abs(mu_m) < best_mu) {
          best_mu = std::abs(mu_m);
          best = *x_m;
        }
        if (mu_m * mu_a > 0.0) {
          s_a = s_m;
          x_a = *x_m;
          mu_a = mu_m;
        } else {
          s_b = s_m;
          x_b = *x_m;
          mu_b = mu_m;
        }
        if (s_b - s_a < 1e-16) break;
      }
      if (best_mu > tol.degeneracy_tol) {
        throw NumericalFailure("continue_branch: fold refinement did not reach degeneracy_tol");
      }
      branch.samples.push_back(classify(model, best[0], best.tail(d), tol));
      finish(BranchEnd::fold, best);
      break;
    }

    branch.samples.push_back(classify(model, x_new[0], x_new.tail(d), tol));
    cur = {x_new, tau_new};
    h = std::min(opts.max_arc_step, 1.5 * h);
  }

  branch.min_gap_to_other_branches = std::numeric_limits<double>::infinity();
  if (opts.gap_probes > 0) {
    const std::size_t n = branch.samples.size();
    const int probes = std::min<int>(opts.gap_probes, static_cast<int>(n));
    for (int k = 0; k < probes; ++k) {
      const std::size_t idx = probes == 1 ? 0 : static_cast<std::size_t>(k) * (n - 1) / (probes - 1);
      branch.min_gap_to_other_branches =
          std::min(branch.min_gap_to_other_branches, gap_to_others(model, branch.samples[idx], opts));
    }
  }
  return branch;
}

TransversalityReport check_transversality(const EnergyModel& model, double t_star, const Vec& u_star,
                                          const CriticalTolerances& tol, double tv_tol) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(model.hessian(t_star, u_star));
  const Vec& lambda = eig.eigenvalues();
  TransversalityReport rep;
  rep.t_star = t_star;
  rep.u_star = u_star;
  int smallest = 0;
  for (int i = 0; i < lambda.size(); ++i) {
    if (std::abs(lambda[i]) <= tol.degeneracy_tol) ++rep.null_dim;
    if (std::abs(lambda[i]) < std::abs(lambda[smallest])) smallest = i;
  }
  if (rep.null_dim == 0) {
    throw NumericalFailure("check_transversality: Hessian is invertible at the given point");
  }
  Vec v = eig.eigenvectors().col(smallest);
  Eigen::Index lead = 0;
  v.cwiseAbs().maxCoeff(&lead);
  if (v[lead] < 0.0) v = -v;
  rep.null_vector = v;
  rep.T2_value = model.gradient_time_derivative(t_star, u_star).dot(v);
  rep.T3_value = model.third_directional(t_star, u_star, v);
  rep.pass = rep.null_dim == 1 && std::abs(rep.T2_value) > tv_tol && std::abs(rep.T3_value) > tv_tol;
  return rep;
}

namespace {

struct SphereSample {
  double radius;
  double energy_gap;  // E(v) - E*
  double grad_norm;
};

std::vector<SphereSample> sample_spheres(const EnergyModel& model, double t, const Vec& u_star,
                                         const std::vector<double>& radii, int n_dirs) {
  if (radii.empty()) throw InvalidInput("need at least one sampling radius");
  const double e_star = model.value(t, u_star);
  std::vector<SphereSample> out;
  for (double r : radii) {
    if (!(r > 0.0)) throw InvalidInput("sampling radii must be positive");
    for (const Vec& dir : probe_directions(model.dim, n_dirs)) {
      const Vec v = u_star + r * dir;
      out.push_back({r, model.value(t, v) - e_star, model.gradient(t, v).norm()});
    }
  }
  return out;
}

double noise_floor(const EnergyModel& model, double t, const Vec& u_star) {
  return 1e3 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(model.value(t, u_star)));
}

}  // namespace

LojasiewiczFit estimate_lojasiewicz(const EnergyModel& model, double t, const Vec& u_star,
                                    const std::vector<double>& radii, int n_dirs) {
  const auto samples = sample_spheres(model, t, u_star, radii, n_dirs);
  const double floor = noise_floor(model, t, u_star);
  std::vector<double> xs, ys;
  for (const auto& s : samples) {
    if (std::abs(s.energy_gap) > floor && s.grad_norm > 0.0) {
      xs.push_back(std::log(std::abs(s.energy_gap)));
      ys.push_back(std::log(s.grad_norm));
    }
  }
  if (xs.size() < 2) throw NumericalFailure("estimate_lojasiewicz: energy differences below round-off");

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw NumericalFailure("estimate_lojasiewicz: degenerate sample (single energy level)");

  LojasiewiczFit fit;
  fit.theta = sxy / sxx;
  fit.fit_r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.radius = *std::max_element(radii.begin(), radii.end());
  fit.samples = static_cast<int>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fit.C = std::max(fit.C, std::exp(fit.theta * xs[i] - ys[i]));
  }
  return fit;
}

E4Check check_E4(const EnergyModel& model, double t, const Vec& u_star, const std::vector<double>& radii,
                 int n_dirs, double e4_tol) {
  const double r_min = *std::min_element(radii.begin(), radii.end());
  const auto samples = sample_spheres(model, t, u_star, {r_min}, n_dirs);
  const double floor = noise_floor(model, t, u_star);
  E4Check out;
  out.limsup_estimate = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& s : samples) {
    if (s.grad_norm == 0.0) continue;
    if (std::abs(s.energy_gap) > floor) any = true;
    out.limsup_estimate = std::max(out.limsup_estimate, s.energy_gap / s.grad_norm);
  }
  if (!any) throw NumericalFailure("check_E4: energy differences below round-off");
  out.holds = out.limsup_estimate >= -e4_tol;
  return out;
}

}  // namespace bvflow
