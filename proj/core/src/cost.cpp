#include "bvflow/cost.hpp"

#include "bvflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

namespace bvflow {

std::string to_string(CostMethod method) {
  switch (method) {
    case CostMethod::quadrature_1d: return "quadrature_1d";
    case CostMethod::grid_dijkstra: return "grid_dijkstra";
    case CostMethod::heteroclinic: return "heteroclinic";
  }
  return "unknown";
}

CostMethod cost_method_from_string(const std::string& name) {
  if (name == "quadrature_1d") return CostMethod::quadrature_1d;
  if (name == "grid_dijkstra") return CostMethod::grid_dijkstra;
  if (name == "heteroclinic") return CostMethod::heteroclinic;
  throw InvalidInput("unknown cost method '" + name + "'");
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (b <= a) return 0.0;
  if (panels % 2 == 1) ++panels;
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return sum * h / 3.0;
}

}  // namespace

CostEstimate cost_1d(const EnergyModel& model, double t, double u1, double u2, int n_quad) {
  if (model.dim != 1) throw InvalidInput("cost_1d: model must be one-dimensional");
  if (n_quad < 2) throw InvalidInput("cost_1d: need at least two panels");
  CostEstimate est;
  est.t = t;
  est.u1 = Vec::Constant(1, u1);
  est.u2 = Vec::Constant(1, u2);
  est.method = CostMethod::quadrature_1d;
  est.witness_path = {est.u1, est.u2};
  const double a = std::min(u1, u2), b = std::max(u1, u2);
  est.resolution = (b - a) / n_quad;
  if (a == b) return est;

  auto slope = [&](double u) { return model.gradient(t, Vec::Constant(1, u))[0]; };
  // Split the interval at sign changes of the slope so each piece is smooth.
  std::vector<double> breaks{a};
  double prev_u = a, prev_f = slope(a);
  for (int i = 1; i <= n_quad; ++i) {
    const double u = i == n_quad ? b : a + (b - a) * i / n_quad;
    const double f = slope(u);
    if ((prev_f < 0.0 && f > 0.0) || (prev_f > 0.0 && f < 0.0)) {
      double lo = prev_u, hi = u, flo = prev_f;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = slope(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      breaks.push_back(0.5 * (lo + hi));
    }
    prev_u = u;
    prev_f = f;
  }
  breaks.push_back(b);

  auto integrand = [&](double u) { return std::abs(slope(u)); };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) total += simpson(integrand, breaks[k], breaks[k + 1], n_quad);
  est.value = total;
  return est;
}

namespace {

class Lattice {
 public:
  Lattice(const Box& box, double spacing) : box_(box) {
    const int d = box.dim();
    counts_.resize(static_cast<std::size_t>(d));
    step_.resize(d);
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) {
      const double extent = box.hi[i] - box.lo[i];
      const int n = static_cast<int>(std::llround(extent / spacing)) + 1;
      if (n < 2) throw InvalidInput("cost_grid: grid has fewer than two nodes per axis");
      counts_[static_cast<std::size_t>(i)] = n;
      step_[i] = extent / (n - 1);
      total *= static_cast<std::size_t>(n);
    }
    if (total > 50'000'000) throw InvalidInput("cost_grid: grid too large");
    size_ = total;
    build_offsets();
  }

  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] int dim() const { return box_.dim(); }
  [[nodiscard]] double max_step() const { return step_.maxCoeff(); }

  [[nodiscard]] std::vector<int> multi_index(std::size_t id) const {
    std::vector<int> idx(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      idx[i] = static_cast<int>(id % static_cast<std::size_t>(counts_[i]));
      id /= static_cast<std::size_t>(counts_[i]);
    }
    return idx;
  }

  [[nodiscard]] std::size_t id(const std::vector<int>& idx) const {
    std::size_t out = 0;
    for (std::size_t i = counts_.size(); i-- > 0;) out = out * static_cast<std::size_t>(counts_[i]) + static_cast<std::size_t>(idx[i]);
    return out;
  }

  [[nodiscard]] bool valid(const std::vector<int>& idx) const {
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= counts_[i]) return false;
    }
    return true;
  }

  [[nodiscard]] Vec position(const std::vector<int>& idx) const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = box_.lo[i] + step_[i] * idx[static_cast<std::size_t>(i)];
    return x;
  }

  // Corners of the cell containing x.
  [[nodiscard]] std::vector<std::size_t> cell_corners(const Vec& x) const {
    const int d = dim();
    std::vector<int> base(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      int k = static_cast<int>(std::floor((x[i] - box_.lo[i]) / step_[i]));
      base[static_cast<std::size_t>(i)] = std::clamp(k, 0, counts_[static_cast<std::size_t>(i)] - 2);
    }
    std::vector<std::size_t> out;
    for (int mask = 0; mask < (1 << d); ++mask) {
      std::vector<int> idx = base;
      for (int i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] += (mask >> i) & 1;
      out.push_back(id(idx));
    }
    return out;
  }

  [[nodiscard]] const std::vector<std::vector<int>>& offsets() const { return offsets_; }

 private:
  void build_offsets() {
    const int d = dim();
    std::vector<int> off(static_cast<std::size_t>(d), -1);
    while (true) {
      if (std::any_of(off.begin(), off.end(), [](int v) { return v != 0; })) offsets_.push_back(off);
      int axis = 0;
      while (axis < d && ++off[static_cast<std::size_t>(axis)] > 1) {
        off[static_cast<std::size_t>(axis)] = -1;
        ++axis;
      }
      if (axis == d) break;
    }
    if (d == 2) {
      for (int a : {-1, 1}) {
        for (int b : {-2, 2}) {
          offsets_.push_back({a, b});
          offsets_.push_back({b, a});
        }
      }
    }
  }

  Box box_;
  std::vector<int> counts_;
  Vec step_;
  std::size_t size_ = 0;
  std::vector<std::vector<int>> offsets_;
};

}  // namespace

CostEstimate cost_grid(const EnergyModel& model, double t, const Vec& u1, const Vec& u2, const GridSpec& grid) {
  if (grid.box.dim() != model.dim) throw InvalidInput("cost_grid: grid dimension mismatch");
  if (!(grid.spacing > 0.0)) throw InvalidInput("cost_grid: spacing must be positive");
  if (!grid.box.contains(u1) || !grid.box.contains(u2)) throw InvalidInput("cost_grid: endpoints outside the grid box");

  CostEstimate est;
  est.t = t;
  est.u1 = u1;
  est.u2 = u2;
  est.method = CostMethod::grid_dijkstra;
  if (u1 == u2) {
    est.witness_path = {u1, u2};
    return est;
  }

  const Lattice lattice(grid.box, grid.spacing);
  est.resolution = lattice.max_step();
  const std::size_t n = lattice.size();
  const std::size_t source = n, target = n + 1;

  std::vector<double> gnorm(n + 2);
  for (std::size_t v = 0; v < n; ++v) gnorm[v] = model.gradient(t, lattice.position(lattice.multi_index(v))).norm();
  gnorm[source] = model.gradient(t, u1).norm();
  gnorm[target] = model.gradient(t, u2).norm();

  auto position = [&](std::size_t v) -> Vec {
    if (v == source) return u1;
    if (v == target) return u2;
    return lattice.position(lattice.multi_index(v));
  };
  auto weight = [&](std::size_t a, std::size_t b) {
    return 0.5 * (gnorm[a] + gnorm[b]) * (position(a) - position(b)).norm();
  };

  const auto source_corners = lattice.cell_corners(u1);
  const auto target_corners = lattice.cell_corners(u2);
  const bool same_cell = source_corners == target_corners;

  std::vector<double> dist(n + 2, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> prev(n + 2, std::numeric_limits<std::size_t>::max());
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.push({0.0, source});

  auto relax = [&](std::size_t from, std::size_t to) {
    const double alt = dist[from] + weight(from, to);
    if (alt < dist[to]) {
      dist[to] = alt;
      prev[to] = from;
      queue.push({alt, to});
    }
  };

  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    if (v == target) break;
    if (v == source) {
      for (std::size_t c : source_corners) relax(source, c);
      if (same_cell) relax(source, target);
      continue;
    }
    const auto idx = lattice.multi_index(v);
    for (const auto& off : lattice.offsets()) {
      std::vector<int> nb = idx;
      for (std::size_t i = 0; i < nb.size(); ++i) nb[i] += off[i];
      if (lattice.valid(nb)) relax(v, lattice.id(nb));
    }
    if (std::find(target_corners.begin(), target_corners.end(), v) != target_corners.end()) relax(v, target);
  }
  if (!std::isfinite(dist[target])) throw NumericalFailure("cost_grid: target unreachable");

  est.value = dist[target];
  for (std::size_t v = target; v != std::numeric_limits<std::size_t>::max(); v = prev[v]) {
    est.witness_path.push_back(position(v));
  }
  std::reverse(est.witness_path.begin(), est.witness_path.end());
  return est;
}

CostPropertyReport check_cost_properties(const EnergyModel& model, double t, const std::vector<Vec>& points,
                                         CostMethod oracle, const GridSpec& grid, int n_quad) {
  if (points.size() < 2) throw InvalidInput("check_cost_properties: need at least two points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (points[i] == points[j]) throw InvalidInput("check_cost_properties: points must be distinct");
    }
  }
  if (oracle == CostMethod::heteroclinic) {
    throw InvalidInput("check_cost_properties: the heteroclinic solver is not an all-pairs oracle");
  }
  if (oracle == CostMethod::quadrature_1d && model.dim != 1) {
    throw InvalidInput("check_cost_properties: quadrature oracle needs a one-dimensional model");
  }

  // Returns the cost and the largest |DE| met along the witness path.
  auto evaluate_with_slope = [&](const Vec& a, const Vec& b) {
    CostEstimate e = oracle == CostMethod::quadrature_1d ? cost_1d(model, t, a[0], b[0], n_quad)
                                                          : cost_grid(model, t, a, b, grid);
    double slope = 0.0;
    for (const auto& node : e.witness_path) slope = std::max(slope, model.gradient(t, node).norm());
    return std::pair{e.value, slope};
  };
  auto evaluate = [&](const Vec& a, const Vec& b) { return evaluate_with_slope(a, b).first; };

  CostPropertyReport rep;
  rep.points = points;
  const auto m = static_cast<Eigen::Index>(points.size());
  rep.costs = Mat::Zero(m, m);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i != j) pairs.emplace_back(i, j);
    }
  }
  std::vector<double> slopes(pairs.size(), 0.0);
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    const auto [value, slope] =
        evaluate_with_slope(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
    rep.costs(i, j) = value;
    slopes[k] = slope;
  });
  const double path_gradient = slopes.empty() ? 0.0 : *std::max_element(slopes.begin(), slopes.end());
  // Value tolerance: quadrature error for Simpson, one cell of dissipation on the lattice.
  rep.resolution = oracle == CostMethod::quadrature_1d ? 1e-9 * (1.0 + rep.costs.maxCoeff())
                                                       : 2.0 * grid.spacing * std::max(path_gradient, 1.0);
  const double tol = rep.resolution;

  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      if (!(rep.costs(i, j) > tol)) rep.positive = false;
      rep.max_asymmetry = std::max(rep.max_asymmetry, std::abs(rep.costs(i, j) - rep.costs(j, i)));
      const double drop = model.value(t, points[static_cast<std::size_t>(i)]) - model.value(t, points[static_cast<std::size_t>(j)]);
      if (rep.costs(i, j) < drop - tol) rep.energy_lower_bound = false;
      for (Eigen::Index k = 0; k < m; ++k) {
        if (k == i || k == j) continue;
        rep.worst_triangle_excess = std::max(rep.worst_triangle_excess, rep.costs(i, j) - rep.costs(i, k) - rep.costs(k, j));
      }
    }
  }
  rep.symmetric = rep.max_asymmetry <= tol;
  rep.triangle = rep.worst_triangle_excess <= tol;

  // Sampled lower semicontinuity along u^k = u + (-1)^k 2^-k r e_1.
  double scale = 0.0;
  for (const auto& p : points) {
    for (const auto& q : points) scale = std::max(scale, (p - q).norm());
  }
  const double r0 = 0.05 * scale;
  rep.worst_lsc_gap = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      double liminf = std::numeric_limits<double>::infinity();
      for (int k = 2; k <= 6; ++k) {
        Vec shift = Vec::Zero(model.dim);
        shift[0] = (k % 2 == 0 ? 1.0 : -1.0) * r0 * std::ldexp(1.0, -k);
        Vec a = points[static_cast<std::size_t>(i)] + shift;
        Vec b = points[static_cast<std::size_t>(j)] - shift;
        if (oracle == CostMethod::grid_dijkstra) {
          a = a.cwiseMax(grid.box.lo).cwiseMin(grid.box.hi);
          b = b.cwiseMax(grid.box.lo).cwiseMin(grid.box.hi);
        }
        // Moving an endpoint by h changes a continuous cost by at most h times the local slope;
        // only a deficit beyond that allowance signals a jump down in the limit.
        const double h = shift.norm();
        const double slope = std::max({model.gradient(t, a).norm(), model.gradient(t, points[static_cast<std::size_t>(i)]).norm(),
                                       model.gradient(t, b).norm(), model.gradient(t, points[static_cast<std::size_t>(j)]).norm()});
        liminf = std::min(liminf, evaluate(a, b) + 2.0 * 1.05 * h * slope);
      }
      rep.worst_lsc_gap = std::max(rep.worst_lsc_gap, rep.costs(i, j) - liminf);
    }
  }
  rep.lower_semicontinuous = rep.worst_lsc_gap <= tol;
  return rep;
}

}  // namespace bvflow
