// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "bvflow/cost.hpp"
#include "bvflow/critical.hpp"
#include "bvflow/energy.hpp"
#include "bvflow/flow.hpp"
#include "bvflow/limit.hpp"
#include "bvflow/parallel.hpp"
#include "bvflow/transition.hpp"
#include "output.hpp"
#include "run.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace bvflow;
using bvtest::pair;
using bvtest::scalar;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.pass) ++failures;
  std::printf("%s  [%2d] %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", id, name, out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

const std::vector<double> ladder{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
const std::vector<double> radii{1e-3, 2e-3, 5e-3, 1e-2, 2e-2};

BVOptions bv_options(int dim) {
  BVOptions o;
  o.domain = Box::centered(dim, 2.0);
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  const auto tilted = bvtest::tilted();
  const auto quadratic = bvtest::quadratic();
  const auto well2d = bvtest::well2d();

  criterion(1, "derivative validation", [&] {
    double worst = 0.0;
    bool pass = true;
    for (const auto& m : {quadratic, tilted, well2d}) {
      const auto r = validate_derivatives(m, {Box::centered(m.dim, 2.0), {0.0, m.horizon}}, 200, 1e-5, 1e-6);
      pass = pass && r.pass;
      worst = std::max({worst, r.max_rel_error_gradient, r.max_rel_error_hessian, r.max_rel_error_power});
    }
    return Outcome{pass && worst < 1e-6, fmt("max relative error %.2e over 3 builtins", worst)};
  });

  criterion(2, "closed-form flow oracle", [&] {
    IntegratorOptions o;
    o.audit_tol = 1e-7;
    const double eps = 1e-2;
    const auto tr = integrate(quadratic, eps, scalar(0.0), {0.0, 1.0}, o);
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double t = tr.times[k];
      worst = std::max(worst, std::abs(tr.state(k)[0] - (t - eps * (1.0 - std::exp(-t / eps)))));
    }
    return Outcome{worst < 1e-6, fmt("max |u - closed form| = %.2e on %.0f nodes", worst, static_cast<double>(tr.size()))};
  });

  criterion(3, "energy identity and refinement", [&] {
    struct Case {
      const EnergyModel* model;
      double eps;
      double u0;
    };
    std::vector<Case> suite{{&quadratic, 1e-2, 0.0}, {&quadratic, 1e-1, 0.0}};
    for (double e : ladder) suite.push_back({&tilted, e, -1.0});
    std::vector<double> res(suite.size()), refined(suite.size()), diss(suite.size());
    parallel_for(suite.size(), [&](std::size_t i) {
      const auto tr = integrate(*suite[i].model, suite[i].eps, scalar(suite[i].u0), {0.0, 1.0});
      res[i] = energy_identity_residual(tr, 0.0, 1.0);
      diss[i] = diss_density_integral(tr, 0.0, 1.0);
      const auto fine = integrate_on_grid(*suite[i].model, suite[i].eps, scalar(suite[i].u0), halve_steps(tr.times));
      refined[i] = energy_identity_residual(fine, 0.0, 1.0);
    });
    bool pass = true;
    double worst_rel = 0.0, worst_ratio = 1e300;
    for (std::size_t i = 0; i < suite.size(); ++i) {
      worst_rel = std::max(worst_rel, res[i] / (1.0 + diss[i]));
      worst_ratio = std::min(worst_ratio, res[i] / refined[i]);
      pass = pass && res[i] < 1e-5 * (1.0 + diss[i]) && res[i] >= 1.5 * refined[i];
    }
    return Outcome{pass, fmt("%.0f trajectories, max residual/(1+D) = %.2e, min halving ratio = %.2f",
                             static_cast<double>(suite.size()), worst_rel, worst_ratio)};
  });

  ContinuationOptions co;
  co.domain = Box::centered(1, 2.0);
  const auto branch = continue_branch(tilted, classify(tilted, 0.0, scalar(-1.0)), 1, co);

  criterion(4, "fold reproduction", [&] {
    const double et = branch.t_star - bvtest::fold_t, eu = branch.u_star[0] - bvtest::fold_u;
    return Outcome{branch.termination == BranchEnd::fold && std::abs(et) < 1e-6 && std::abs(eu) < 1e-6,
                   fmt("t* error %.2e, u* error %.2e", et, eu)};
  });

  criterion(5, "transversality at the fold", [&] {
    const auto tv = check_transversality(tilted, branch.t_star, branch.u_star);
    const bool pass = tv.null_dim == 1 && std::abs(std::abs(tv.T2_value) - 1.0) <= 1e-4 &&
                      std::abs(std::abs(tv.T3_value) - 6.0 / std::sqrt(3.0)) <= 1e-3 && tv.pass;
    return Outcome{pass, fmt("null_dim %.0f, T2 %.8f, T3 %.6f", tv.null_dim, tv.T2_value, tv.T3_value)};
  });

  criterion(6, "jump relation, three ways", [&] {
    HeteroclinicOptions ho;
    ho.search_box = Box::centered(1, 2.0);
    const auto jt = solve_heteroclinic(tilted, branch.t_star, branch.u_star, scalar(1.0), 1e-4, ho);
    const double drop = tilted.value(branch.t_star, jt.u_minus) - tilted.value(branch.t_star, jt.u_plus);
    const double quad = cost_1d(tilted, branch.t_star, jt.u_minus[0], jt.u_plus[0]).value;
    const double spread = std::max({jt.cost, drop, quad}) - std::min({jt.cost, drop, quad});
    const bool pass = jt.converged && std::abs(jt.u_plus[0] - bvtest::landing_u) < 1e-4 && spread < 1e-4 &&
                      std::abs(jt.cost - 0.75) < 1e-4;
    return Outcome{pass, fmt("u+ error %.2e; path cost %.9f, drop %.9f, quadrature %.9f", jt.u_plus[0] - bvtest::landing_u,
                             jt.cost, drop, quad)};
  });

  const auto bv = construct_bv(tilted, scalar(-1.0), {0.0, 1.0}, bv_options(1));
  std::vector<double> samples;
  for (int k = 0; k <= 200; ++k) {
    const double t = k / 200.0;
    if (std::abs(t - bv.jump_set.at(0)) >= 0.05) samples.push_back(t);
  }
  ConvergenceReport conv;
  const auto ladder_start = std::chrono::steady_clock::now();
  bool conv_ok = true;
  std::string conv_error;
  try {
    conv = compare_vanishing_viscosity(tilted, scalar(-1.0), ladder, bv, samples);
  } catch (const std::exception& e) {
    conv_ok = false;
    conv_error = e.what();
  }
  const double ladder_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - ladder_start).count();

  criterion(7, "defect concentration", [&] {
    if (!conv_ok) return Outcome{false, conv_error};
    const auto& last = conv.rows.back();
    const double rel = std::abs(last.window_masses[0] - 0.75) / 0.75;
    return Outcome{rel <= 0.05 && last.outside_mass < 0.02 && ladder_secs <= 300.0,
                   fmt("window mass %.5f (%.2f%% from 0.75), outside mass %.2e, ladder %.1f s", last.window_masses[0],
                       100.0 * rel, last.outside_mass, ladder_secs)};
  });

  criterion(8, "pointwise convergence", [&] {
    if (!conv_ok) return Outcome{false, conv_error};
    std::string seq;
    for (const auto& r : conv.rows) seq += fmt("%.2e ", r.sup_distance);
    return Outcome{conv.sup_decreasing && conv.rows.back().sup_distance < 5e-3, "sup distances " + seq};
  });

  criterion(9, "cost metric properties", [&] {
    const auto rep = check_cost_properties(tilted, 0.0, {scalar(-1.0), scalar(0.0), scalar(1.0)}, CostMethod::quadrature_1d);
    bool positive = true;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) positive = positive && (i == j || rep.costs(i, j) > 0.0);
    }
    const double c02 = rep.costs(0, 2), c01 = rep.costs(0, 1), c12 = rep.costs(1, 2);
    const bool exact_sym = rep.max_asymmetry == 0.0;
    const bool pass = positive && exact_sym && rep.triangle && std::abs(c02 - (c01 + c12)) < 1e-8 &&
                      std::abs(c01 - 0.25) < 1e-8 && std::abs(c12 - 0.25) < 1e-8 && std::abs(c02 - 0.5) < 1e-8;
    return Outcome{pass, fmt("c(-1,1) = %.12f, c(-1,0) = %.12f, c(0,1) = %.12f, asymmetry %.1e", c02, c01, c12,
                             rep.max_asymmetry)};
  });

  criterion(10, "oracle agreement", [&] {
    const double h = 1e-3;
    const double exact = cost_1d(tilted, 0.0, -1.0, 1.0).value;
    const double lattice = cost_grid(tilted, 0.0, scalar(-1.0), scalar(1.0), {Box::centered(1, 2.0), h}).value;
    const double bound = 2.0 * h * 11.0;  // max |E''| = 3 u^2 - 1 on [-2, 2]
    ContinuationOptions c2;
    c2.domain = Box::centered(2, 2.0);
    const auto b2 = continue_branch(well2d, classify(well2d, 0.0, pair(-1.0, 0.0)), 1, c2);
    const auto right = newton_critical(well2d, b2.t_star, pair(1.2, 0.0));
    const double sep = cost_1d(tilted, b2.t_star, b2.u_star[0], (*right)[0]).value;
    const double g2 = cost_grid(well2d, b2.t_star, b2.u_star, *right, {Box::centered(2, 2.0), 1e-2}).value;
    const double rel = std::abs(g2 - sep) / sep;
    return Outcome{std::abs(lattice - exact) <= bound && rel <= 0.05,
                   fmt("1-D lattice error %.2e (bound %.2e); 2-D fold lattice %.5f vs separable %.5f", lattice - exact,
                       bound, g2, sep)};
  });

  criterion(11, "Lojasiewicz exponents and E4", [&] {
    bool pass = true;
    double worst_half = 0.0;
    int points = 0;
    for (const auto& m : {quadratic, tilted, well2d}) {
      for (double t : {0.0, 0.5}) {
        for (const auto& p : find_critical(m, t, Box::centered(m.dim, 2.0), 32).points) {
          ++points;
          pass = pass && check_E4(m, t, p.u, radii).holds;
          if (p.kind != CriticalKind::degenerate) {
            const double theta = estimate_lojasiewicz(m, t, p.u, radii).theta;
            worst_half = std::max(worst_half, std::abs(theta - 0.5));
          }
        }
      }
    }
    const double fold_theta = estimate_lojasiewicz(tilted, branch.t_star, branch.u_star, radii).theta;
    pass = pass && check_E4(tilted, branch.t_star, branch.u_star, radii).holds;
    pass = pass && worst_half <= 0.05 && std::abs(fold_theta - 2.0 / 3.0) <= 0.05;
    return Outcome{pass, fmt("%.0f catalogued points, max |theta - 1/2| = %.4f, fold theta = %.4f", points, worst_half,
                             fold_theta)};
  });

  criterion(12, "balanced energy identity", [&] {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double tj = bv.jump_set.at(0);
    double worst = 0.0;
    int straddling = 0;
    for (int k = 0; k < 50; ++k) {
      double s = u(rng), t = u(rng);
      if (k % 5 == 0) {
        s = tj * u(rng);
        t = tj + (1.0 - tj) * u(rng);
      }
      if (s > t) std::swap(s, t);
      if (s <= tj && tj <= t) ++straddling;
      worst = std::max(worst, energy_balance_residual(bv, tilted, s, t));
    }
    const double without = energy_balance_residual(bv, tilted, 0.1, 0.9, false);
    return Outcome{worst < 1e-5 && std::abs(without - 0.75) <= 1e-3,
                   fmt("max residual %.2e over 50 pairs (%.0f straddling); without the atom %.6f", worst, straddling,
                       without)};
  });

  criterion(13, "genericity smoke test", [&] {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> c(-0.05, 0.05);
    int folds = 0, transversal = 0;
    for (int draw = 0; draw < 20; ++draw) {
      const auto m = perturb_generic(tilted, scalar(c(rng)), Mat::Constant(1, 1, c(rng)));
      const auto start = find_critical(m, 0.0, Box::centered(1, 2.0), 16).points.front();
      const auto br = continue_branch(m, start, 1, co);
      if (br.termination != BranchEnd::fold) continue;
      ++folds;
      if (check_transversality(m, br.t_star, br.u_star).pass) ++transversal;
    }
    return Outcome{folds == 20 && transversal == 20, fmt("%.0f of 20 draws fold, %.0f transversal", folds, transversal)};
  });

  criterion(14, "determinism of the compare run", [&] {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "bvflow_acceptance";
    fs::remove_all(root);
    const std::string config = std::string(BVFLOW_SOURCE_DIR) + "/configs/compare_tilted.json";
    std::ostringstream log;
    for (const char* name : {"first", "second"}) {
      const int code = cli::run("compare", config, {"output_dir=\"" + (root / name).string() + "\""}, log);
      if (code != 0) return Outcome{false, "compare exited with " + std::to_string(code) + ": " + log.str()};
    }
    int files = 0;
    bool same = true;
    for (const auto& entry : fs::directory_iterator(root / "first")) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      same = same && slurp(entry.path()) == slurp(root / "second" / entry.path().filename());
    }
    same = same && slurp(root / "first" / "MANIFEST") == slurp(root / "second" / "MANIFEST");
    return Outcome{same && files > 0, fmt("%.0f CSV files byte-identical across two runs", files)};
  });

  std::printf("%s: %d of 14 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
