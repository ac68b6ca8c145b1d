#include "bvflow/cost.hpp"
#include "bvflow/critical.hpp"
#include "bvflow/transition.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace bvflow;
using bvtest::pair;
using bvtest::scalar;

namespace {

HeteroclinicOptions options(int dim, double half_width = 2.0) {
  HeteroclinicOptions o;
  o.search_box = Box::centered(dim, half_width);
  return o;
}

JumpTransition fold_jump() {
  const auto m = bvtest::tilted();
  return solve_heteroclinic(m, bvtest::fold_t, scalar(bvtest::fold_u), scalar(1.0), 1e-4, options(1));
}

}  // namespace

TEST_CASE("heteroclinic from the 1-D fold") {
  const auto m = bvtest::tilted();
  const auto jt = fold_jump();
  REQUIRE(jt.converged);
  CHECK(jt.status == "landed");
  CHECK(std::abs(jt.u_plus[0] - bvtest::landing_u) < 1e-4);
  CHECK(std::abs(jt.cost - 0.75) < 1e-4);
  const double drop = m.value(bvtest::fold_t, jt.u_minus) - m.value(bvtest::fold_t, jt.u_plus);
  CHECK(std::abs(jt.cost - drop) < 1e-5);
  CHECK(jt.landing_grad_norm <= 1e-9);
  CHECK(std::isfinite(jt.arclength));
  CHECK(jt.arclength == doctest::Approx(bvtest::landing_u - bvtest::fold_u).epsilon(1e-6));
  CHECK((jt.path.nodes.front() - jt.u_minus).norm() < 1e-12);
  CHECK((jt.path.nodes.back() - jt.u_plus).norm() < 1e-9);

  // Descent along the path.
  for (std::size_t k = 1; k < jt.path.size(); ++k) {
    CHECK(m.value(bvtest::fold_t, jt.path.nodes[k]) <= m.value(bvtest::fold_t, jt.path.nodes[k - 1]) + 1e-12);
  }
}

TEST_CASE("launching uphill returns to the fold") {
  const auto m = bvtest::tilted();
  const auto jt = solve_heteroclinic(m, bvtest::fold_t, scalar(bvtest::fold_u), scalar(-1.0), 1e-4, options(1));
  CHECK_FALSE(jt.converged);
  CHECK(jt.status == "returned_to_start");
}

TEST_CASE("no transition leaves a strict minimum") {
  const auto q = bvtest::quadratic();
  const auto jt = solve_heteroclinic(q, 0.3, scalar(0.3), scalar(1.0), 1e-4, options(1));
  CHECK_FALSE(jt.converged);
  const auto count = count_transitions(q, 0.3, scalar(0.3), scalar(0.3), 2, options(1));
  CHECK(count.clusters == 0);
}

TEST_CASE("2-D fold lands on the right well at the separable cost") {
  const auto w = bvtest::well2d();
  ContinuationOptions co;
  co.domain = Box::centered(2, 2.0);
  const auto br = continue_branch(w, classify(w, 0.0, pair(-1.0, 0.0)), 1, co);
  const auto tv = check_transversality(w, br.t_star, br.u_star);
  const auto jt = solve_heteroclinic(w, br.t_star, br.u_star, tv.null_vector, default_launch_offset(co.domain), options(2));
  REQUIRE(jt.converged);
  CHECK(jt.u_plus[0] == doctest::Approx(bvtest::landing_u).epsilon(1e-6));
  CHECK(std::abs(jt.u_plus[1]) < 1e-8);
  const double marginal = cost_1d(bvtest::tilted(), br.t_star, br.u_star[0], jt.u_plus[0]).value;
  CHECK(jt.cost == doctest::Approx(marginal).epsilon(1e-5));
  CHECK(count_transitions(w, br.t_star, br.u_star, jt.u_plus, 16, options(2)).clusters == 1);
}

TEST_CASE("1-D fold has exactly one transition") {
  const auto c = count_transitions(bvtest::tilted(), bvtest::fold_t, scalar(bvtest::fold_u), scalar(bvtest::landing_u), 2,
                                   options(1));
  CHECK(c.clusters == 1);
  CHECK(c.landed == 1);
}

TEST_CASE("saddle landing relaunches along the descent direction") {
  // Starting above the saddle of the 2-D well on the v axis flows into (0, 0),
  // which is a saddle; the solver must continue into a well.
  const auto w = bvtest::well2d();
  const auto jt = solve_heteroclinic(w, 0.0, pair(0.0, 1.0), pair(0.0, -1.0), 1e-3, options(2));
  REQUIRE(jt.converged);
  CHECK(jt.pieces >= 2);
  CHECK(std::abs(std::abs(jt.u_plus[0]) - 1.0) < 1e-6);
  const double drop = w.value(0.0, jt.u_minus) - w.value(0.0, jt.u_plus);
  CHECK(jt.cost == doctest::Approx(drop).epsilon(1e-4));
}

TEST_CASE("transition_cost on simple paths") {
  const auto m = bvtest::tilted();
  CHECK(transition_cost({scalar(0.3), scalar(0.3)}, m, 0.0) == 0.0);
  std::vector<Vec> straight;
  for (int k = 0; k <= 4000; ++k) {
    straight.push_back(scalar(bvtest::fold_u + (bvtest::landing_u - bvtest::fold_u) * k / 4000.0));
  }
  CHECK(transition_cost(straight, m, bvtest::fold_t) == doctest::Approx(0.75).epsilon(1e-6));
  CHECK_THROWS_AS(transition_cost({scalar(1.0)}, m, 0.0), InvalidInput);
}

TEST_CASE("unit reparameterization keeps the cost") {
  const auto m = bvtest::tilted();
  const auto jt = fold_jump();
  const auto unit = reparameterize_unit(jt.path, m, bvtest::fold_t);
  CHECK(unit.s.front() == 0.0);
  CHECK(unit.s.back() == 1.0);
  CHECK(transition_cost(unit.nodes, m, bvtest::fold_t) == doctest::Approx(jt.cost).epsilon(1e-12));
  const auto cum = cumulative_cost(unit.nodes, m, bvtest::fold_t);
  for (std::size_t k = 0; k < unit.size(); ++k) CHECK(cum[k] / cum.back() == doctest::Approx(unit.s[k]).epsilon(1e-12));

  // Resampling a two-node segment inserts nodes uniformly in cost.
  TransitionPath two;
  two.nodes = {scalar(-0.5), scalar(0.8)};
  two.parameterize_by_length();
  const auto resampled = resample_uniform_cost(two, m, bvtest::fold_t, 11);
  REQUIRE(resampled.size() == 11);
  CHECK(resampled.nodes.front()[0] == -0.5);
  CHECK(resampled.nodes.back()[0] == 0.8);
  const auto rc = cumulative_cost(resampled.nodes, m, bvtest::fold_t);
  for (std::size_t k = 1; k < rc.size(); ++k) CHECK(rc[k] - rc[k - 1] > 0.0);

  TransitionPath flat;
  flat.nodes = {scalar(1.0), scalar(1.0)};
  flat.parameterize_by_length();
  CHECK_THROWS_AS(reparameterize_unit(flat, m, 0.0), InvalidInput);
}

TEST_CASE("chain rule residual shrinks under refinement") {
  const auto m = bvtest::tilted();
  CHECK(chain_rule_residual({scalar(0.2), scalar(0.2)}, m, 0.0) == 0.0);
  auto path = [](int n) {
    std::vector<Vec> nodes;
    for (int k = 0; k <= n; ++k) nodes.push_back(scalar(-1.0 + 2.5 * k / n));
    return nodes;
  };
  const double r2 = chain_rule_residual(path(2), m, 0.0);
  const double r8 = chain_rule_residual(path(8), m, 0.0);
  const double r32 = chain_rule_residual(path(32), m, 0.0);
  CHECK(r2 > 0.0);
  CHECK(r8 < r2);
  CHECK(r32 < r8);
  CHECK(r8 / r32 > 8.0);  // second order
  CHECK(chain_rule_residual(fold_jump().path.nodes, m, bvtest::fold_t) < 1e-5);
}

TEST_CASE("arclength is stable when the step bound is halved") {
  const auto m = bvtest::tilted();
  auto o = options(1);
  const auto a = solve_heteroclinic(m, bvtest::fold_t, scalar(bvtest::fold_u), scalar(1.0), 1e-4, o);
  o.trust_fraction *= 0.5;
  o.node_spacing_fraction *= 0.5;
  const auto b = solve_heteroclinic(m, bvtest::fold_t, scalar(bvtest::fold_u), scalar(1.0), 1e-4, o);
  CHECK(std::abs(a.arclength - b.arclength) < 0.01 * a.arclength);
}

TEST_CASE("leaving the search box is an error") {
  // A pure downhill tilt has no critical point.
  PolynomialSpec poly;
  poly.dim = 1;
  poly.terms = {{{1}, -1.0}};
  const auto ramp = make_polynomial(poly);
  CHECK_THROWS_AS(solve_heteroclinic(ramp, 0.0, scalar(0.0), scalar(1.0), 1e-4, options(1)), NumericalFailure);
}

TEST_CASE("hausdorff distance") {
  CHECK(hausdorff_distance({scalar(0.0), scalar(1.0)}, {scalar(0.0), scalar(1.0)}) == 0.0);
  CHECK(hausdorff_distance({scalar(0.0)}, {scalar(0.0), scalar(2.0)}) == doctest::Approx(2.0));
}
