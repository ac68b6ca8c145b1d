#include "bvflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace bvflow {

namespace {

struct StepSolution {
  Vec u;
  double gradient_norm;
};

// Solves eps (u - prev) / dt + DE_t(u) = 0. Returns nothing if Newton fails or
// the step Jacobian eps/dt + D^2E is not positive definite at the solution
// (the incremental problem is then not locally convex and the step is not
// trusted).
std::optional<StepSolution> implicit_step(const EnergyModel& model, double epsilon, double t,
                                          double dt, const Vec& prev, const IntegratorOptions& opts) {
  const double inertia = epsilon / dt;
  const int d = model.dim;
  Vec u = prev;
  Vec g = model.gradient(t, u);
  Vec F = inertia * (u - prev) + g;
  double res = F.norm();
  // inertia * ulp(u) bounds the attainable residual for very short steps.
  const double tol = std::max(opts.newton_tol,
                              8.0 * std::numeric_limits<double>::epsilon() * inertia * (1.0 + prev.norm()));
  for (int it = 0; it < opts.newton_max_iter; ++it) {
    if (res <= tol) {
      const Mat J = inertia * Mat::Identity(d, d) + model.hessian(t, u);
      if (J.llt().info() != Eigen::Success) return std::nullopt;
      return StepSolution{u, g.norm()};
    }
    const Mat J = inertia * Mat::Identity(d, d) + model.hessian(t, u);
    const Vec delta = J.ldlt().solve(-F);
    if (!delta.allFinite()) return std::nullopt;
    double lambda = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Vec trial = u + lambda * delta;
      const Vec g_trial = model.gradient(t, trial);
      const Vec F_trial = inertia * (trial - prev) + g_trial;
      const double r = F_trial.norm();
      if (std::isfinite(r) && r < (1.0 - 1e-4 * lambda) * res) {
        u = trial;
        g = g_trial;
        F = F_trial;
        res = r;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) return std::nullopt;
  }
  if (res <= tol) {
    const Mat J = inertia * Mat::Identity(d, d) + model.hessian(t, u);
    if (J.llt().info() != Eigen::Success) return std::nullopt;
    return StepSolution{u, g.norm()};
  }
  return std::nullopt;
}

class TrajectoryBuilder {
 public:
  TrajectoryBuilder(const EnergyModel& model, double epsilon) : model_(model) {
    traj_.epsilon = epsilon;
    traj_.dim = model.dim;
  }

  void start(double t, const Vec& u) {
    const double e = model_.value(t, u);
    if (!std::isfinite(e)) throw NumericalFailure("non-finite energy at the initial state");
    push(t, u, e, model_.power(t, u), 0.0, 0.0);
    g0_ = model_.gradient(t, u).norm();
  }

  // Dissipation density at node 0 given the quotient of the first step.
  [[nodiscard]] double first_density(double quotient) const {
    const double eps = traj_.epsilon;
    return 0.5 * eps * quotient * quotient + g0_ * g0_ / (2.0 * eps);
  }

  struct Candidate {
    double energy;
    double power;
    double density;
    double defect;
    double dissipation;
  };

  [[nodiscard]] Candidate evaluate(double t, double dt, const StepSolution& step) const {
    const double eps = traj_.epsilon;
    Candidate c{};
    c.energy = model_.value(t, step.u);
    c.power = model_.power(t, step.u);
    // At accepted nodes the step quotient equals |DE| / eps.
    c.density = step.gradient_norm * step.gradient_norm / eps;
    double prev_density = traj_.diss_density.back();
    if (traj_.size() == 1) {
      prev_density = first_density(step.gradient_norm / eps);
    }
    c.dissipation = 0.5 * dt * (prev_density + c.density);
    c.defect = c.dissipation + c.energy - traj_.energies.back() -
               0.5 * dt * (traj_.powers.back() + c.power);
    return c;
  }

  void accept(double t, const StepSolution& step, const Candidate& c) {
    if (!std::isfinite(c.energy)) throw NumericalFailure("non-finite energy along the trajectory");
    if (traj_.size() == 1) {
      traj_.diss_density[0] = first_density(step.gradient_norm / traj_.epsilon);
    }
    push(t, step.u, c.energy, c.power, c.density, std::abs(c.defect));
  }

  [[nodiscard]] Vec last_state() const { return traj_.state(traj_.size() - 1); }
  [[nodiscard]] std::size_t size() const { return traj_.size(); }
  Trajectory take() { return std::move(traj_); }

 private:
  void push(double t, const Vec& u, double e, double p, double density, double residual) {
    traj_.times.push_back(t);
    for (int i = 0; i < u.size(); ++i) traj_.states.push_back(u[i]);
    traj_.energies.push_back(e);
    traj_.powers.push_back(p);
    traj_.diss_density.push_back(density);
    traj_.step_residuals.push_back(residual);
  }

  const EnergyModel& model_;
  Trajectory traj_;
  double g0_ = 0.0;
};

void check_inputs(const EnergyModel& model, double epsilon, const Vec& u0) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("epsilon must be positive");
  if (u0.size() != model.dim) throw InvalidInput("initial state has wrong dimension");
  if (!u0.allFinite()) throw InvalidInput("initial state must be finite");
}

// Linear interpolation helper on the stored grid; returns the interval index.
std::size_t locate(const std::vector<double>& times, double t) {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
  return std::min(k, times.size() - 2);
}

double interpolate(const std::vector<double>& times, const std::vector<double>& values, double t) {
  const std::size_t k = locate(times, t);
  const double w = (t - times[k]) / (times[k + 1] - times[k]);
  return (1.0 - w) * values[k] + w * values[k + 1];
}

// Exact integral over [s, t] of the piecewise-linear interpolant of `values`.
double integrate_linear(const std::vector<double>& times, const std::vector<double>& values,
                        double s, double t) {
  if (t <= s) return 0.0;
  double total = 0.0;
  const std::size_t first = locate(times, s);
  for (std::size_t k = first; k + 1 < times.size() && times[k] < t; ++k) {
    const double a = std::max(s, times[k]);
    const double b = std::min(t, times[k + 1]);
    if (b <= a) continue;
    const double span = times[k + 1] - times[k];
    const double va = values[k] + (values[k + 1] - values[k]) * (a - times[k]) / span;
    const double vb = values[k] + (values[k + 1] - values[k]) * (b - times[k]) / span;
    total += 0.5 * (b - a) * (va + vb);
  }
  return total;
}

void check_support(const Trajectory& traj, double s, double t) {
  if (traj.size() < 2) throw InvalidInput("trajectory has fewer than two nodes");
  const double slack = 1e-12 * (1.0 + std::abs(traj.end()));
  if (s > t || s < traj.start() - slack || t > traj.end() + slack) {
    throw InvalidInput("interval outside trajectory support");
  }
}

}  // namespace

Vec Trajectory::state(std::size_t k) const {
  return Eigen::Map<const Vec>(states.data() + k * static_cast<std::size_t>(dim), dim);
}

Vec Trajectory::state_at(double t) const {
  if (size() == 1) return state(0);
  const std::size_t k = locate(times, t);
  const double w = (t - times[k]) / (times[k + 1] - times[k]);
  return (1.0 - w) * state(k) + w * state(k + 1);
}

Trajectory integrate(const EnergyModel& model, double epsilon, const Vec& u0,
                     const TimeInterval& span, const IntegratorOptions& opts) {
  check_inputs(model, epsilon, u0);
  if (!(span.end > span.start) || span.start < 0.0 || span.end > model.horizon * (1.0 + 1e-12)) {
    throw InvalidInput("time span must be a nonempty subinterval of [0, T]");
  }
  if (!(opts.audit_tol > 0.0) || !(opts.newton_tol > 0.0) || !(opts.dt_initial > 0.0)) {
    throw InvalidInput("integrator tolerances must be positive");
  }

  const double horizon = model.horizon;
  const double dt_min = opts.dt_min_factor * horizon;
  TrajectoryBuilder builder(model, epsilon);
  builder.start(span.start, u0);

  double t = span.start;
  double dt = std::min(opts.dt_initial, opts.dt_max);
  int accepted_run = 0;
  Vec u = u0;
  while (t < span.end) {
    if (builder.size() > opts.max_steps) throw NumericalFailure("integrate: step budget exhausted");
    bool last = false;
    double h = dt;
    if (t + h >= span.end || span.end - (t + h) < 1e-3 * h) {
      h = span.end - t;
      last = true;
    }
    const double t_next = last ? span.end : t + h;
    const auto step = implicit_step(model, epsilon, t_next, h, u, opts);
    bool ok = false;
    if (step) {
      const auto c = builder.evaluate(t_next, h, *step);
      const double budget = opts.audit_tol * (h / horizon + c.dissipation);
      if (std::abs(c.defect) <= budget) {
        builder.accept(t_next, *step, c);
        u = step->u;
        t = t_next;
        ok = true;
        if (++accepted_run >= opts.growth_after) {
          dt = std::min(opts.dt_max, h * opts.growth);
          accepted_run = 0;
        } else if (!last) {
          dt = h;
        }
      }
    }
    if (!ok) {
      accepted_run = 0;
      dt = 0.5 * h;
      if (dt < dt_min) {
        throw NumericalFailure("integrate: step size fell below dt_min at t = " + std::to_string(t) +
                               " (Newton failure or energy-identity audit)");
      }
    }
  }
  return builder.take();
}

Trajectory integrate_on_grid(const EnergyModel& model, double epsilon, const Vec& u0,
                             const std::vector<double>& times, const IntegratorOptions& opts) {
  check_inputs(model, epsilon, u0);
  if (times.size() < 2) throw InvalidInput("time grid needs at least two nodes");
  TrajectoryBuilder builder(model, epsilon);
  builder.start(times.front(), u0);
  Vec u = u0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double h = times[k] - times[k - 1];
    if (!(h > 0.0)) throw InvalidInput("time grid must be strictly increasing");
    const auto step = implicit_step(model, epsilon, times[k], h, u, opts);
    if (!step) throw NumericalFailure("integrate_on_grid: Newton failed at t = " + std::to_string(times[k]));
    builder.accept(times[k], *step, builder.evaluate(times[k], h, *step));
    u = step->u;
  }
  return builder.take();
}

std::vector<double> halve_steps(const std::vector<double>& times) {
  std::vector<double> out;
  if (times.empty()) return out;
  out.reserve(2 * times.size());
  out.push_back(times.front());
  for (std::size_t k = 1; k < times.size(); ++k) {
    out.push_back(0.5 * (times[k - 1] + times[k]));
    out.push_back(times[k]);
  }
  return out;
}

double energy_identity_residual(const Trajectory& traj, double s, double t) {
  check_support(traj, s, t);
  if (s == t) return 0.0;
  const double diss = integrate_linear(traj.times, traj.diss_density, s, t);
  const double work = integrate_linear(traj.times, traj.powers, s, t);
  const double e_t = interpolate(traj.times, traj.energies, t);
  const double e_s = interpolate(traj.times, traj.energies, s);
  return std::abs(diss + e_t - e_s - work);
}

double diss_density_integral(const Trajectory& traj, double s, double t) {
  check_support(traj, s, t);
  return integrate_linear(traj.times, traj.diss_density, s, t);
}

double dissipation_integral(const Trajectory& traj, const EnergyModel& model, double s, double t) {
  check_support(traj, s, t);
  if (s == t) return 0.0;
  // Integrand |DE| |u'| at nodes that carry weight in [s, t].
  const std::size_t n = traj.size();
  const std::size_t lo = locate(traj.times, s);
  const std::size_t hi = std::min(n - 1, locate(traj.times, t) + 1);
  std::vector<double> integrand(n, 0.0);
  for (std::size_t k = lo; k <= hi; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = k == 0 ? 1 : k;
    const double quotient = (traj.state(b) - traj.state(a)).norm() / (traj.times[b] - traj.times[a]);
    integrand[k] = model.gradient(traj.times[k], traj.state(k)).norm() * quotient;
  }
  return integrate_linear(traj.times, integrand, s, t);
}

}  // namespace bvflow
