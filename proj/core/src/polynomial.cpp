#include "bvflow/energy.hpp"

#include <cmath>

namespace bvflow {

namespace {

double ipow(double x, int k) { return k < 0 ? 0.0 : std::pow(x, k); }

struct Monomial {
  std::vector<int> exponents;
  double coefficient;

  [[nodiscard]] double value(const Vec& u) const {
    double p = coefficient;
    for (std::size_t i = 0; i < exponents.size(); ++i) p *= ipow(u[static_cast<Eigen::Index>(i)], exponents[i]);
    return p;
  }

  // Coefficient times the product with the exponents lowered by `lower`.
  [[nodiscard]] double derivative(const Vec& u, const std::vector<int>& lower) const {
    double p = coefficient;
    for (std::size_t i = 0; i < exponents.size(); ++i) {
      const int a = exponents[i];
      const int k = lower[i];
      for (int j = 0; j < k; ++j) p *= (a - j);
      if (p == 0.0) return 0.0;
      p *= ipow(u[static_cast<Eigen::Index>(i)], a - k);
    }
    return p;
  }
};

double horner(const std::vector<double>& coeffs, double t) {
  double s = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) s = s * t + *it;
  return s;
}

double horner_derivative(const std::vector<double>& coeffs, double t) {
  double s = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 1;) s = s * t + static_cast<double>(j) * coeffs[j];
  return s;
}

}  // namespace

EnergyModel make_polynomial(const PolynomialSpec& poly) {
  const int d = poly.dim;
  if (d < 1) throw InvalidInput("polynomial energy: dim must be positive");
  if (!(poly.horizon > 0.0)) throw InvalidInput("polynomial energy: horizon must be positive");
  std::vector<Monomial> terms;
  for (const auto& [alpha, c] : poly.terms) {
    if (static_cast<int>(alpha.size()) != d) {
      throw InvalidInput("polynomial energy: multi-index length differs from dim");
    }
    for (int a : alpha) {
      if (a < 0) throw InvalidInput("polynomial energy: negative exponent");
    }
    terms.push_back({alpha, c});
  }
  std::vector<std::vector<double>> tilt = poly.tilt;
  if (tilt.size() > static_cast<std::size_t>(d)) {
    throw InvalidInput("polynomial energy: more tilt rows than dimensions");
  }
  tilt.resize(static_cast<std::size_t>(d));
  const double shift = poly.shift;

  EnergyModel m;
  m.name = "polynomial";
  m.dim = d;
  m.horizon = poly.horizon;
  m.params["dim"] = d;
  m.params["T"] = poly.horizon;
  m.params["shift"] = shift;

  m.value = [terms, tilt, shift](double t, const Vec& u) {
    double e = shift;
    for (const auto& term : terms) e += term.value(u);
    for (std::size_t i = 0; i < tilt.size(); ++i) e -= horner(tilt[i], t) * u[static_cast<Eigen::Index>(i)];
    return e;
  };
  m.gradient = [terms, tilt, d](double t, const Vec& u) -> Vec {
    Vec g = Vec::Zero(d);
    std::vector<int> lower(static_cast<std::size_t>(d), 0);
    for (int j = 0; j < d; ++j) {
      lower[static_cast<std::size_t>(j)] = 1;
      for (const auto& term : terms) g[j] += term.derivative(u, lower);
      lower[static_cast<std::size_t>(j)] = 0;
      g[j] -= horner(tilt[static_cast<std::size_t>(j)], t);
    }
    return g;
  };
  m.hessian = [terms, d](double, const Vec& u) -> Mat {
    Mat h = Mat::Zero(d, d);
    std::vector<int> lower(static_cast<std::size_t>(d), 0);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        ++lower[static_cast<std::size_t>(i)];
        ++lower[static_cast<std::size_t>(j)];
        double s = 0.0;
        for (const auto& term : terms) s += term.derivative(u, lower);
        h(i, j) = s;
        h(j, i) = s;
        lower[static_cast<std::size_t>(i)] = 0;
        lower[static_cast<std::size_t>(j)] = 0;
      }
    }
    return h;
  };
  m.power = [tilt](double t, const Vec& u) {
    double p = 0.0;
    for (std::size_t i = 0; i < tilt.size(); ++i) {
      p -= horner_derivative(tilt[i], t) * u[static_cast<Eigen::Index>(i)];
    }
    return p;
  };
  m.third_directional = fd_third_directional(m.hessian);
  return m;
}

}  // namespace bvflow
