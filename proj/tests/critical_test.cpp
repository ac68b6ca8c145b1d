#include "bvflow/critical.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bvflow;
using bvtest::pair;
using bvtest::scalar;

namespace {

ContinuationOptions options(int dim, double half_width = 2.0) {
  ContinuationOptions o;
  o.domain = Box::centered(dim, half_width);
  return o;
}

const std::vector<double> radii{1e-3, 2e-3, 5e-3, 1e-2, 2e-2};

}  // namespace

TEST_CASE("multistart catalogue of the tilted well") {
  const auto m = bvtest::tilted();
  const auto at0 = find_critical(m, 0.0, Box::centered(1, 2.0), 32);
  REQUIRE(at0.points.size() == 3);
  CHECK(at0.points[0].u[0] == doctest::Approx(-1.0));
  CHECK(at0.points[1].u[0] == doctest::Approx(0.0));
  CHECK(at0.points[2].u[0] == doctest::Approx(1.0));
  CHECK(at0.points[0].kind == CriticalKind::nondegenerate_min);
  CHECK(at0.points[1].kind == CriticalKind::saddle);
  CHECK(at0.min_pairwise_distance > 10.0 * CriticalTolerances{}.merge_tol);
  for (const auto& p : at0.points) CHECK(m.gradient(0.0, p.u).norm() <= CriticalTolerances{}.newton_tol);

  const auto past = find_critical(m, 0.5, Box::centered(1, 2.0), 32);
  REQUIRE(past.points.size() == 1);
  const double u = past.points[0].u[0];
  CHECK(u * u * u - u == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(u > 1.0);

  const auto q = find_critical(bvtest::quadratic(), 0.3, Box::centered(1, 2.0), 16);
  REQUIRE(q.points.size() == 1);
  CHECK(q.points[0].u[0] == doctest::Approx(0.3));
}

TEST_CASE("isolation across sampled times") {
  for (const auto& m : {bvtest::tilted(), bvtest::well2d()}) {
    for (double t : {0.0, 0.2, 0.35, 0.6, 0.9}) {
      const auto cs = find_critical(m, t, Box::centered(m.dim, 2.5), 48);
      CHECK(!cs.points.empty());
      if (cs.points.size() > 1) CHECK(cs.min_pairwise_distance > 10.0 * CriticalTolerances{}.merge_tol);
    }
  }
}

TEST_CASE("fold of the left branch") {
  const auto m = bvtest::tilted();
  const auto br = continue_branch(m, classify(m, 0.0, scalar(-1.0)), 1, options(1));
  REQUIRE(br.termination == BranchEnd::fold);
  CHECK(std::abs(br.t_star - bvtest::fold_t) < 1e-6);
  CHECK(std::abs(br.u_star[0] - bvtest::fold_u) < 1e-6);
  const auto at_fold = classify(m, br.t_star, br.u_star);
  CHECK(std::abs(at_fold.lambda_min()) <= CriticalTolerances{}.degeneracy_tol);
  CHECK(at_fold.grad_norm <= CriticalTolerances{}.newton_tol);
  for (const auto& s : br.samples) CHECK(m.gradient(s.t, s.u).norm() <= 10.0 * CriticalTolerances{}.newton_tol);
  for (std::size_t k = 1; k < br.samples.size(); ++k) {
    const double dt = br.samples[k].t - br.samples[k - 1].t;
    const double du = (br.samples[k].u - br.samples[k - 1].u).norm();
    // The corrector may lengthen the predicted chord a little.
    CHECK(std::hypot(dt, du) <= options(1).max_arc_step * 1.01);
  }
}

TEST_CASE("right branch and quadratic branch reach the horizon") {
  const auto m = bvtest::tilted();
  const auto br = continue_branch(m, classify(m, 0.0, scalar(1.0)), 1, options(1));
  CHECK(br.termination == BranchEnd::reached_time_boundary);
  CHECK(br.t_star == doctest::Approx(1.0));
  const double u = br.u_star[0];
  CHECK(u * u * u - u == doctest::Approx(1.0).epsilon(1e-10));

  const auto q = bvtest::quadratic();
  const auto bq = continue_branch(q, classify(q, 0.0, scalar(0.0)), 1, options(1));
  CHECK(bq.termination == BranchEnd::reached_time_boundary);
  for (const auto& s : bq.samples) CHECK(s.u[0] == doctest::Approx(s.t).epsilon(1e-9));
}

TEST_CASE("a branch leaving the box is reported") {
  const auto q = bvtest::quadratic();
  const auto br = continue_branch(q, classify(q, 0.0, scalar(0.0)), 1, options(1, 0.5));
  CHECK(br.termination == BranchEnd::left_domain);
}

TEST_CASE("transversality at the folds") {
  const auto m = bvtest::tilted();
  const auto br = continue_branch(m, classify(m, 0.0, scalar(-1.0)), 1, options(1));
  const auto tv = check_transversality(m, br.t_star, br.u_star);
  CHECK(tv.null_dim == 1);
  CHECK(std::abs(tv.T2_value) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(std::abs(tv.T3_value) == doctest::Approx(6.0 / std::sqrt(3.0)).epsilon(1e-4));
  CHECK(tv.pass);

  CHECK_THROWS_AS(check_transversality(bvtest::quadratic(), 0.3, scalar(0.3)), NumericalFailure);

  const auto w = bvtest::well2d();
  const auto br2 = continue_branch(w, classify(w, 0.0, pair(-1.0, 0.0)), 1, options(2));
  REQUIRE(br2.termination == BranchEnd::fold);
  CHECK(br2.t_star == doctest::Approx(bvtest::fold_t).epsilon(1e-6));
  const auto tv2 = check_transversality(w, br2.t_star, br2.u_star);
  CHECK(tv2.null_dim == 1);
  CHECK(std::abs(tv2.null_vector[0]) == doctest::Approx(1.0));
  CHECK(std::abs(tv2.null_vector[1]) < 1e-8);
  CHECK(tv2.pass);
}

TEST_CASE("Lojasiewicz exponents") {
  const auto m = bvtest::tilted();
  const auto min_fit = estimate_lojasiewicz(m, 0.0, scalar(1.0), radii);
  CHECK(min_fit.theta == doctest::Approx(0.5).epsilon(0.1));
  const auto fold_fit = estimate_lojasiewicz(m, bvtest::fold_t, scalar(bvtest::fold_u), radii);
  CHECK(std::abs(fold_fit.theta - 2.0 / 3.0) < 0.05);
  const auto q = estimate_lojasiewicz(bvtest::quadratic(), 0.3, scalar(0.3), radii);
  CHECK(std::abs(q.theta - 0.5) < 0.02);
  CHECK(q.C == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-3));
  CHECK(q.fit_r2 > 0.99);
}

TEST_CASE("E4 at minima, saddles and folds") {
  const auto m = bvtest::tilted();
  CHECK(check_E4(bvtest::quadratic(), 0.3, scalar(0.3), radii).holds);
  CHECK(check_E4(m, bvtest::fold_t, scalar(bvtest::fold_u), radii).holds);
  CHECK(check_E4(m, 0.0, scalar(0.0), radii).holds);
  CHECK(check_E4(bvtest::well2d(), 0.0, pair(0.0, 0.0), radii).holds);
}

TEST_CASE("random small perturbations keep folds transversal") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> c(-0.05, 0.05);
  const auto base = bvtest::tilted();
  int folds = 0;
  for (int draw = 0; draw < 20; ++draw) {
    const auto m = perturb_generic(base, scalar(c(rng)), Mat::Constant(1, 1, c(rng)));
    const auto start = find_critical(m, 0.0, Box::centered(1, 2.0), 16).points.front();
    const auto br = continue_branch(m, start, 1, options(1));
    if (br.termination != BranchEnd::fold) continue;
    ++folds;
    CHECK(check_transversality(m, br.t_star, br.u_star).pass);
  }
  CHECK(folds == 20);
}
