#include "bvflow/energy.hpp"
#include "bvflow/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bvflow {

namespace {

double require(const ParamMap& params, const std::string& key) {
  const auto it = params.find(key);
  if (it == params.end()) {
    throw InvalidInput("missing parameter '" + key + "'");
  }
  return it->second;
}

double require_horizon(const ParamMap& params) {
  const double horizon = require(params, "T");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidInput("horizon T must be positive");
  }
  return horizon;
}

// Global minimum of u^4/4 - u^2/2 - load*u, attained at the outermost root of
// u^3 - u = load on the side of sign(load).
double tilted_quartic_minimum(double load) {
  auto f = [load](double u) { return 0.25 * u * u * u * u - 0.5 * u * u - load * u; };
  double best = std::numeric_limits<double>::infinity();
  for (double u : {-2.0 - std::abs(load), 2.0 + std::abs(load)}) {
    // u^3 - u - load is convex (concave) on u > 0 (u < 0): Newton from outside
    // the outermost root converges monotonically.
    for (int it = 0; it < 200; ++it) {
      const double step = (u * u * u - u - load) / (3.0 * u * u - 1.0);
      u -= step;
      if (std::abs(step) < 1e-15 * (1.0 + std::abs(u))) break;
    }
    best = std::min(best, f(u));
  }
  return best;
}

// Constant that lifts the tilted quartic to a nonnegative energy for all
// loads between load(0) and load(T); the minimum over the load is concave, so
// the endpoints suffice.
double nonnegativity_shift(double load_start, double load_end, double base) {
  const double lowest =
      std::min(tilted_quartic_minimum(load_start), tilted_quartic_minimum(load_end)) + base;
  return lowest < 0.0 ? -lowest : 0.0;
}

EnergyModel make_quadratic_track(const ParamMap& params) {
  const double dim_value = require(params, "dim");
  const int dim = static_cast<int>(dim_value);
  if (dim < 1 || static_cast<double>(dim) != dim_value) {
    throw InvalidInput("quadratic_track: dim must be a positive integer");
  }
  const double horizon = require_horizon(params);
  Vec a0(dim), a1(dim);
  for (int i = 0; i < dim; ++i) {
    a0[i] = require(params, "a0_" + std::to_string(i + 1));
    a1[i] = require(params, "a1_" + std::to_string(i + 1));
  }

  EnergyModel m;
  m.name = "quadratic_track";
  m.dim = dim;
  m.params = params;
  m.horizon = horizon;
  m.value = [a0, a1](double t, const Vec& u) { return 0.5 * (u - a0 - t * a1).squaredNorm(); };
  m.gradient = [a0, a1](double t, const Vec& u) -> Vec { return u - a0 - t * a1; };
  m.hessian = [dim](double, const Vec&) -> Mat { return Mat::Identity(dim, dim); };
  m.power = [a0, a1](double t, const Vec& u) { return -(u - a0 - t * a1).dot(a1); };
  m.third_directional = [](double, const Vec&, const Vec&) { return 0.0; };
  return m;
}

EnergyModel make_tilted_double_well(const ParamMap& params) {
  const double horizon = require_horizon(params);
  const double load0 = require(params, "load0");
  const double rate = require(params, "load_rate");
  const double shift = nonnegativity_shift(load0, load0 + rate * horizon, 0.0);

  EnergyModel m;
  m.name = "tilted_double_well";
  m.dim = 1;
  m.params = params;
  m.params["c0"] = shift;
  m.horizon = horizon;
  m.value = [=](double t, const Vec& u) {
    const double x = u[0];
    return 0.25 * x * x * x * x - 0.5 * x * x - (load0 + rate * t) * x + shift;
  };
  m.gradient = [=](double t, const Vec& u) -> Vec {
    const double x = u[0];
    return Vec::Constant(1, x * x * x - x - (load0 + rate * t));
  };
  m.hessian = [](double, const Vec& u) -> Mat { return Mat::Constant(1, 1, 3.0 * u[0] * u[0] - 1.0); };
  m.power = [=](double, const Vec& u) { return -rate * u[0]; };
  m.third_directional = [](double, const Vec& u, const Vec& v) {
    return 6.0 * u[0] * v[0] * v[0] * v[0];
  };
  return m;
}

EnergyModel make_double_well_2d(const ParamMap& params) {
  const double horizon = require_horizon(params);
  const double load0 = require(params, "load0");
  const double rate = require(params, "load_rate");
  const double shift = nonnegativity_shift(load0, load0 + rate * horizon, 0.25);

  EnergyModel m;
  m.name = "double_well_2d";
  m.dim = 2;
  m.params = params;
  m.params["c0"] = shift;
  m.horizon = horizon;
  m.value = [=](double t, const Vec& u) {
    const double w = u[0] * u[0] - 1.0;
    return 0.25 * w * w + 0.5 * u[1] * u[1] - (load0 + rate * t) * u[0] + shift;
  };
  m.gradient = [=](double t, const Vec& u) -> Vec {
    Vec g(2);
    g << u[0] * u[0] * u[0] - u[0] - (load0 + rate * t), u[1];
    return g;
  };
  m.hessian = [](double, const Vec& u) -> Mat {
    Mat h = Mat::Zero(2, 2);
    h(0, 0) = 3.0 * u[0] * u[0] - 1.0;
    h(1, 1) = 1.0;
    return h;
  };
  m.power = [=](double, const Vec& u) { return -rate * u[0]; };
  m.third_directional = [](double, const Vec& u, const Vec& v) {
    return 6.0 * u[0] * v[0] * v[0] * v[0];
  };
  return m;
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw NumericalFailure(std::string("non-finite ") + what + " inside sampling region");
  }
}

std::vector<std::pair<double, Vec>> sample_points(const SampleRegion& region, int n) {
  HaltonSequence seq(region.box.dim() + 1);
  std::vector<std::pair<double, Vec>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const Vec x = seq.next();
    const double t = region.times.start + x[0] * region.times.length();
    out.emplace_back(t, region.box.from_unit(x.tail(region.box.dim())));
  }
  return out;
}

}  // namespace

Vec EnergyModel::gradient_time_derivative(double t, const Vec& u) const {
  const double h = 1e-6 * horizon;
  return (gradient(t + h, u) - gradient(t - h, u)) / (2.0 * h);
}

EnergyModel::CubicFn fd_third_directional(EnergyModel::MatrixFn hessian, double step) {
  return [hessian = std::move(hessian), step](double t, const Vec& u, const Vec& v) {
    const Mat hp = hessian(t, u + step * v);
    const Mat hm = hessian(t, u - step * v);
    return v.dot((hp - hm) * v) / (2.0 * step);
  };
}

ParamMap default_params(const std::string& family) {
  if (family == "quadratic_track") {
    return {{"dim", 1.0}, {"T", 1.0}, {"a0_1", 0.0}, {"a1_1", 1.0}};
  }
  if (family == "tilted_double_well" || family == "double_well_2d") {
    return {{"T", 1.0}, {"load0", 0.0}, {"load_rate", 1.0}};
  }
  throw InvalidInput("unknown energy family '" + family + "'");
}

EnergyModel make_builtin(const std::string& family, const ParamMap& params) {
  if (family == "quadratic_track") return make_quadratic_track(params);
  if (family == "tilted_double_well") return make_tilted_double_well(params);
  if (family == "double_well_2d") return make_double_well_2d(params);
  throw InvalidInput("unknown energy family '" + family + "'");
}

ValidationReport validate_derivatives(const EnergyModel& model, const SampleRegion& region,
                                      int n_samples, double step, double tol) {
  if (!(step > 0.0)) throw InvalidInput("validate_derivatives: step must be positive");
  if (n_samples < 1) throw InvalidInput("validate_derivatives: need at least one sample");
  if (region.box.dim() != model.dim) throw InvalidInput("validate_derivatives: box dimension mismatch");

  ValidationReport report;
  const int d = model.dim;
  for (const auto& [t, u] : sample_points(region, n_samples)) {
    const Vec g = model.gradient(t, u);
    const Mat H = model.hessian(t, u);
    const double P = model.power(t, u);
    require_finite(model.value(t, u), "energy");
    require_finite(P, "power");
    if (!g.allFinite()) throw NumericalFailure("non-finite gradient inside sampling region");
    if (!H.allFinite()) throw NumericalFailure("non-finite Hessian inside sampling region");

    Vec g_fd(d);
    Mat H_fd(d, d);
    for (int j = 0; j < d; ++j) {
      Vec up = u, um = u;
      up[j] += step;
      um[j] -= step;
      g_fd[j] = (model.value(t, up) - model.value(t, um)) / (2.0 * step);
      H_fd.col(j) = (model.gradient(t, up) - model.gradient(t, um)) / (2.0 * step);
    }
    const double P_fd = (model.value(t + step, u) - model.value(t - step, u)) / (2.0 * step);
    require_finite(g_fd.sum(), "difference quotient");

    report.max_rel_error_gradient =
        std::max(report.max_rel_error_gradient, (g - g_fd).norm() / (1.0 + g.norm()));
    report.max_rel_error_hessian =
        std::max(report.max_rel_error_hessian, (H - H_fd).norm() / (1.0 + H.norm()));
    report.max_rel_error_power =
        std::max(report.max_rel_error_power, std::abs(P - P_fd) / (1.0 + std::abs(P)));
    report.max_hessian_asymmetry =
        std::max(report.max_hessian_asymmetry, (H - H.transpose()).norm() / (1.0 + H.norm()));
    ++report.sample_count;
  }
  report.pass = report.max_rel_error_gradient < tol && report.max_rel_error_hessian < tol &&
                report.max_rel_error_power < tol && report.max_hessian_asymmetry <= 1e-12;
  return report;
}

PowerControlEstimate check_power_control(const EnergyModel& model, const SampleRegion& region,
                                         int n_samples) {
  if (n_samples < 1) throw InvalidInput("check_power_control: empty sampling grid");
  std::vector<double> energy, power;
  for (const auto& [t, u] : sample_points(region, n_samples)) {
    const double e = model.value(t, u);
    const double p = std::abs(model.power(t, u));
    require_finite(e, "energy");
    require_finite(p, "power");
    energy.push_back(e);
    power.push_back(p);
  }

  PowerControlEstimate est;
  est.samples = n_samples;
  const double max_power = *std::max_element(power.begin(), power.end());
  if (max_power == 0.0) return est;

  double mean_energy = 0.0;
  double slope_cap = 0.0;
  for (std::size_t i = 0; i < energy.size(); ++i) {
    mean_energy += energy[i] / static_cast<double>(energy.size());
    if (energy[i] > 0.0) slope_cap = std::max(slope_cap, power[i] / energy[i]);
  }
  auto offset_for = [&](double c1) {
    double c2 = 0.0;
    for (std::size_t i = 0; i < energy.size(); ++i) c2 = std::max(c2, power[i] - c1 * energy[i]);
    return c2;
  };
  auto objective = [&](double c1) { return c1 * mean_energy + offset_for(c1); };

  // The objective is convex and piecewise linear in C1.
  double a = 0.0, b = slope_cap;
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
  double f1 = objective(x1), f2 = objective(x2);
  for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + slope_cap); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = objective(x2);
    }
  }
  double c1 = 0.5 * (a + b);
  for (double candidate : {0.0, slope_cap}) {
    if (objective(candidate) < objective(c1)) c1 = candidate;
  }
  est.C1 = c1;
  // Round the offset up so that the fitted pair is feasible in floating point.
  est.C2 = offset_for(c1) * (1.0 + 1e-12) + 1e-300;
  for (std::size_t i = 0; i < energy.size(); ++i) {
    if (power[i] > est.C1 * energy[i] + est.C2) ++est.violation_count;
  }
  return est;
}

CoercivityReport check_coercivity(const EnergyModel& model, double rho, const Box& search_box,
                                  int points_per_axis, int time_samples) {
  if (!(rho > 0.0)) throw InvalidInput("check_coercivity: rho must be positive");
  if (points_per_axis < 2 || time_samples < 1) throw InvalidInput("check_coercivity: grid too coarse");
  if (search_box.dim() != model.dim) throw InvalidInput("check_coercivity: box dimension mismatch");

  const int d = model.dim;
  CoercivityReport report;
  report.box_radius = search_box.lo.cwiseAbs().cwiseMax(search_box.hi.cwiseAbs()).norm();
  report.bounded = true;

  std::vector<int> index(static_cast<std::size_t>(d), 0);
  const double steps = points_per_axis - 1;
  while (true) {
    Vec u(d);
    bool on_boundary = false;
    for (int i = 0; i < d; ++i) {
      const int k = index[static_cast<std::size_t>(i)];
      u[i] = search_box.lo[i] + (search_box.hi[i] - search_box.lo[i]) * (k / steps);
      on_boundary = on_boundary || k == 0 || k == points_per_axis - 1;
    }
    double sup_energy = 0.0;
    for (int k = 0; k < time_samples; ++k) {
      const double t = time_samples == 1 ? 0.0 : model.horizon * k / (time_samples - 1.0);
      const double e = model.value(t, u);
      require_finite(e, "energy");
      sup_energy = std::max(sup_energy, std::abs(e));
    }
    if (sup_energy <= rho) {
      ++report.sublevel_points;
      report.radius = std::max(report.radius, u.norm());
      if (on_boundary) report.bounded = false;
    }
    int axis = 0;
    while (axis < d && ++index[static_cast<std::size_t>(axis)] == points_per_axis) {
      index[static_cast<std::size_t>(axis)] = 0;
      ++axis;
    }
    if (axis == d) break;
  }
  return report;
}

EnergyModel perturb_generic(const EnergyModel& model, const Vec& y, const Mat& K) {
  const int d = model.dim;
  if (y.size() != d || K.rows() != d || K.cols() != d) {
    throw InvalidInput("perturb_generic: perturbation has wrong dimension");
  }
  if ((K - K.transpose()).norm() > 1e-14 * (1.0 + K.norm())) {
    throw InvalidInput("perturb_generic: K must be symmetric");
  }
  EnergyModel p = model;
  p.name = model.name + "+perturbed";
  p.value = [base = model.value, y, K](double t, const Vec& u) {
    return base(t, u) + y.dot(u) + 0.5 * u.dot(K * u);
  };
  p.gradient = [base = model.gradient, y, K](double t, const Vec& u) -> Vec {
    return base(t, u) + y + K * u;
  };
  p.hessian = [base = model.hessian, K](double t, const Vec& u) -> Mat { return base(t, u) + K; };
  // The perturbation is autonomous and quadratic: power and D^3 E are unchanged.
  return p;
}

}  // namespace bvflow
