#include "bvflow/critical.hpp"
#include "bvflow/energy.hpp"
#include "bvflow/flow.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace bvflow;
using bvtest::scalar;

namespace {

double closed_form(double t, double eps) { return t - eps * (1.0 - std::exp(-t / eps)); }

}  // namespace

TEST_CASE("quadratic track follows the closed-form solution") {
  const auto m = bvtest::quadratic();
  const double eps = 1e-2;
  const auto tr = integrate(m, eps, scalar(0.0), {0.0, 1.0});
  CHECK(tr.start() == 0.0);
  CHECK(tr.end() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tr.state(0)[0] == 0.0);
  CHECK(tr.state(tr.size() - 1)[0] == doctest::Approx(closed_form(1.0, eps)).epsilon(1e-5));
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, std::abs(tr.state(k)[0] - closed_form(tr.times[k], eps)));
  CHECK(worst < 1e-5);

  // Array lengths and monotone times.
  CHECK(tr.states.size() == tr.size());
  CHECK(tr.energies.size() == tr.size());
  CHECK(tr.powers.size() == tr.size());
  CHECK(tr.diss_density.size() == tr.size());
  CHECK(tr.step_residuals.size() == tr.size());
  for (std::size_t k = 1; k < tr.size(); ++k) CHECK(tr.times[k] > tr.times[k - 1]);
}

TEST_CASE("energy identity and its refinement on the quadratic track") {
  const auto m = bvtest::quadratic();
  IntegratorOptions opts;
  opts.audit_tol = 1e-7;
  const auto tr = integrate(m, 1e-2, scalar(0.0), {0.0, 1.0}, opts);
  const double coarse = energy_identity_residual(tr, 0.0, 1.0);
  const auto fine = integrate_on_grid(m, 1e-2, scalar(0.0), halve_steps(tr.times), opts);
  const double refined = energy_identity_residual(fine, 0.0, 1.0);
  CHECK(refined < 1e-6);
  CHECK(refined * 1.5 <= coarse);
  CHECK(energy_identity_residual(tr, 0.4, 0.4) == 0.0);
}

TEST_CASE("equilibrium under a frozen load stays put") {
  auto p = default_params("tilted_double_well");
  p["load_rate"] = 0.0;
  const auto m = make_builtin("tilted_double_well", p);
  const auto tr = integrate(m, 1e-2, scalar(1.0), {0.0, 1.0});
  for (std::size_t k = 0; k < tr.size(); ++k) CHECK(std::abs(tr.state(k)[0] - 1.0) <= 1e-10);
}

TEST_CASE("small viscosity tracks the left branch and then the right one") {
  const auto m = bvtest::tilted();
  const auto tr = integrate(m, 1e-3, scalar(-1.0), {0.0, 1.0});
  const auto left = newton_critical(m, 0.3, scalar(-0.8));
  const auto right = newton_critical(m, 0.45, scalar(1.2));
  REQUIRE(left);
  REQUIRE(right);
  // The viscous state lags the branch by roughly eps times the branch speed.
  CHECK(std::abs(tr.state_at(0.3)[0] - (*left)[0]) < 5e-3);
  CHECK(std::abs(tr.state_at(0.45)[0] - (*right)[0]) < 1e-2);

  const double total = diss_density_integral(tr, 0.0, 1.0);
  CHECK(energy_identity_residual(tr, 0.0, 1.0) < IntegratorOptions{}.audit_tol * (1.0 + total));
  // Young: |DE| |u'| <= eps/2 |u'|^2 + |DE|^2 / (2 eps).
  for (auto [s, t] : {std::pair{0.0, 1.0}, {0.3, 0.45}, {0.5, 1.0}, {0.1, 0.2}}) {
    CHECK(dissipation_integral(tr, m, s, t) <= diss_density_integral(tr, s, t) * (1.0 + 1e-6) + 1e-12);
  }
  CHECK(dissipation_integral(tr, m, bvtest::fold_t - 0.05, bvtest::fold_t + 0.05) == doctest::Approx(0.75).epsilon(0.05));
  CHECK(dissipation_integral(tr, m, 0.2, 0.2) == 0.0);
}

TEST_CASE("energy minus power work is non-increasing") {
  const auto m = bvtest::tilted();
  IntegratorOptions opts;
  const auto tr = integrate(m, 1e-2, scalar(-1.0), {0.0, 1.0}, opts);
  double power_work = 0.0;
  double prev = tr.energies[0];
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double dt = tr.times[k] - tr.times[k - 1];
    power_work += 0.5 * dt * (tr.powers[k] + tr.powers[k - 1]);
    const double proxy = tr.energies[k] - power_work;
    CHECK(proxy <= prev + opts.audit_tol);
    prev = proxy;
  }
}

TEST_CASE("energy bound from the power control constants") {
  const auto m = bvtest::tilted();
  const auto pc = check_power_control(m, {Box::centered(1, 2.0), {0.0, 1.0}}, 400);
  const double bound = std::exp(pc.C1 * m.horizon) * (m.value(0.0, scalar(-1.0)) + pc.C2 * m.horizon);
  for (double eps : {1e-1, 1e-2}) {
    const auto tr = integrate(m, eps, scalar(-1.0), {0.0, 1.0});
    for (double e : tr.energies) CHECK(e <= bound);
  }
}

TEST_CASE("integrator input checks") {
  const auto m = bvtest::tilted();
  CHECK_THROWS_AS(integrate(m, 0.0, scalar(0.0), {0.0, 1.0}), InvalidInput);
  CHECK_THROWS_AS(integrate(m, -1.0, scalar(0.0), {0.0, 1.0}), InvalidInput);
  CHECK_THROWS_AS(integrate(m, 1e-2, bvtest::pair(0.0, 0.0), {0.0, 1.0}), InvalidInput);
  CHECK_THROWS_AS(integrate(m, 1e-2, scalar(std::nan("")), {0.0, 1.0}), InvalidInput);
  const auto tr = integrate(m, 1e-1, scalar(0.5), {0.0, 0.5});
  CHECK_THROWS_AS(energy_identity_residual(tr, 0.3, 0.2), InvalidInput);
  CHECK_THROWS_AS(energy_identity_residual(tr, 0.0, 0.7), InvalidInput);
  CHECK_THROWS_AS(dissipation_integral(tr, m, -0.1, 0.2), InvalidInput);
}

TEST_CASE("halve_steps inserts midpoints") {
  const auto h = halve_steps({0.0, 1.0, 3.0});
  REQUIRE(h.size() == 5);
  CHECK(h[1] == 0.5);
  CHECK(h[3] == 2.0);
}
