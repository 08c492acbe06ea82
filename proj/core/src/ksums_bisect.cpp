#include "claid/ksums_bisect.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

#include "claid/error.hpp"
#include "claid/rng.hpp"
#include "linalg.hpp"

namespace claid {

namespace {

std::span<const float> point(std::span<const float> points, std::size_t dim, std::size_t i) {
  return points.subspan(i * dim, dim);
}

ClusterSums empty_sums(std::size_t dim) {
  ClusterSums c;
  c.sum.assign(dim, 0.0);
  return c;
}

void add_point(ClusterSums& c, std::span<const float> x, double sign) {
  for (std::size_t k = 0; k < x.size(); ++k) c.sum[k] += sign * static_cast<double>(x[k]);
  c.sum_sq += sign * detail::dot_exact(x, x);
  c.size = sign > 0 ? c.size + 1 : c.size - 1;
}

// Rebuilds both clusters from the assignment in index order.
void rebuild(std::span<const float> points, std::size_t dim,
             std::span<const std::uint8_t> side, ClusterSums& b, ClusterSums& w) {
  b = empty_sums(dim);
  w = empty_sums(dim);
  for (std::size_t i = 0; i < side.size(); ++i) {
    add_point(side[i] == 0 ? b : w, point(points, dim, i), 1.0);
  }
}

double cluster_objective(const ClusterSums& c) {
  double norm_sq = 0.0;
  for (double v : c.sum) norm_sq += v * v;
  return static_cast<double>(c.size) * c.sum_sq - norm_sq;
}

}  // namespace

void KsumsParams::validate() const {
  if (max_rounds < 1) throw ValidationError("max_rounds must be at least 1");
}

double cluster_cost(std::span<const float> x, const ClusterSums& cluster) {
  const double xx = detail::dot_exact(x, x);
  return static_cast<double>(cluster.size) * xx - 2.0 * detail::dot_mixed(x, cluster.sum) +
         cluster.sum_sq;
}

double cluster_cost_unit(std::span<const float> x, std::span<const double> sum, std::size_t size) {
  return 2.0 * static_cast<double>(size) - 2.0 * detail::dot_mixed(x, sum);
}

double cluster_cost_direct(std::span<const float> x, std::span<const float> points,
                           std::size_t dim) {
  double total = 0.0;
  for (std::size_t j = 0; j * dim < points.size(); ++j) {
    const auto y = point(points, dim, j);
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = static_cast<double>(x[k]) - y[k];
      total += d * d;
    }
  }
  return total;
}

double ksums_objective(std::span<const float> points, std::size_t dim,
                       std::span<const std::uint8_t> side) {
  ClusterSums b;
  ClusterSums w;
  rebuild(points, dim, side, b, w);
  return cluster_objective(b) + cluster_objective(w);
}

PointBisection bisect_points(std::span<const float> points, std::size_t dim,
                             std::optional<SeedPositions> seeds, const KsumsParams& params) {
  params.validate();
  expects(dim > 0 && points.size() % dim == 0, "bisect: point buffer is not a multiple of dim");
  const std::size_t n = points.size() / dim;
  expects(n >= 2, "bisect: need at least two points");

  Rng rng(params.rng_seed);
  PointBisection out;
  out.side.assign(n, 0);

  if (seeds) {
    expects(seeds->b < n && seeds->w < n && seeds->b != seeds->w,
            "bisect: seeds must be two distinct members");
    const auto xb = point(points, dim, seeds->b);
    const auto xw = point(points, dim, seeds->w);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == seeds->b) continue;
      if (i == seeds->w) {
        out.side[i] = 1;
        continue;
      }
      const auto x = point(points, dim, i);
      out.side[i] = detail::dot_exact(x, xw) > detail::dot_exact(x, xb) ? 1 : 0;
    }
  } else {
    // Rejection keeps the split uniform over assignments with both sides nonempty.
    for (;;) {
      std::size_t ones = 0;
      for (auto& s : out.side) {
        s = static_cast<std::uint8_t>(rng.below(2));
        ones += s;
      }
      if (ones != 0 && ones != n) break;
    }
  }

  ClusterSums clusters[2];
  rebuild(points, dim, out.side, clusters[0], clusters[1]);
  out.objective_trace.push_back(cluster_objective(clusters[0]) + cluster_objective(clusters[1]));

  const bool unit = params.cost_form == CostForm::unit_shortcut;
  const double tolerance = 1e-12 * static_cast<double>(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int round = 0; round < params.max_rounds; ++round) {
    if (params.sample_with_replacement) {
      for (auto& o : order) o = static_cast<std::size_t>(rng.below(n));
    } else {
      rng.shuffle(std::span(order));
    }
    std::size_t moves = 0;
    for (std::size_t i : order) {
      const std::uint8_t own = out.side[i];
      const std::uint8_t other = own ^ 1U;
      if (clusters[own].size == 1) continue;  // never empty a cluster
      const auto x = point(points, dim, i);
      double stay = 0.0;
      double leave = 0.0;
      if (unit) {
        stay = cluster_cost_unit(x, clusters[own].sum, clusters[own].size);
        leave = cluster_cost_unit(x, clusters[other].sum, clusters[other].size);
      } else {
        stay = cluster_cost(x, clusters[own]);
        leave = cluster_cost(x, clusters[other]);
      }
      if (leave < stay - tolerance) {
        add_point(clusters[own], x, -1.0);
        add_point(clusters[other], x, 1.0);
        out.side[i] = other;
        ++moves;
      }
    }
    ++out.rounds_used;
    out.moves += moves;
    ClusterSums fresh[2];
    rebuild(points, dim, out.side, fresh[0], fresh[1]);
    out.objective_trace.push_back(cluster_objective(fresh[0]) + cluster_objective(fresh[1]));
    if (moves == 0) {
      out.converged = true;
      break;
    }
  }

  ClusterSums fresh[2];
  rebuild(points, dim, out.side, fresh[0], fresh[1]);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t k = 0; k < dim; ++k) {
      out.max_sum_drift = std::max(out.max_sum_drift, std::abs(fresh[c].sum[k] - clusters[c].sum[k]));
    }
  }
  assert(out.max_sum_drift <= 1e-4);
  out.b = std::move(fresh[0]);
  out.w = std::move(fresh[1]);
  out.objective = out.objective_trace.back();
  return out;
}

Bisection bisect(const FeatureGrid& grid, std::span<const PatchIndex> subset,
                 std::optional<SeedPair> seeds, const KsumsParams& params) {
  expects(subset.size() >= 2, "bisect: subset needs at least two patches");
  const std::size_t dim = grid.dim();
  std::vector<float> points(subset.size() * dim);
  std::optional<SeedPositions> seed_pos;
  if (seeds) seed_pos = SeedPositions{subset.size(), subset.size()};
  for (std::size_t i = 0; i < subset.size(); ++i) {
    expects(subset[i] < grid.size(), "bisect: patch index out of range");
    const auto row = grid.unit_row(subset[i]);
    std::copy(row.begin(), row.end(), points.begin() + static_cast<std::ptrdiff_t>(i * dim));
    if (seeds && subset[i] == seeds->seed_b) seed_pos->b = i;
    if (seeds && subset[i] == seeds->seed_w) seed_pos->w = i;
  }
  if (seed_pos) {
    expects(seed_pos->b < subset.size() && seed_pos->w < subset.size(),
            "bisect: seeds must belong to the subset");
  }

  PointBisection pb = bisect_points(points, dim, seed_pos, params);
  Bisection out;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    (pb.side[i] == 0 ? out.members_b : out.members_w).push_back(subset[i]);
  }
  std::sort(out.members_b.begin(), out.members_b.end());
  std::sort(out.members_w.begin(), out.members_w.end());
  out.sums_b = std::move(pb.b.sum);
  out.sums_w = std::move(pb.w.sum);
  out.n_b = pb.b.size;
  out.n_w = pb.w.size;
  out.objective = pb.objective;
  out.objective_trace = std::move(pb.objective_trace);
  out.rounds_used = pb.rounds_used;
  out.converged = pb.converged;
  return out;
}

}  // namespace claid
