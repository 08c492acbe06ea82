#include "claid/affinity_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>

#include "claid/error.hpp"
#include "linalg.hpp"

namespace claid {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr Eigen::Index kTile = 256;
// Pairs whose float Gram entry lands this close to alpha are re-evaluated in
// double precision so the strict comparison does not depend on GEMM rounding.
constexpr double kRecheckBand = 1e-4;

}  // namespace

void AffinityParams::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in [0, 1)");
  if (!(theta_fraction > 0.0 && theta_fraction <= 1.0)) {
    throw ValidationError("theta_fraction must lie in (0, 1]");
  }
}

std::vector<std::uint32_t> affinity_degrees(const FeatureGrid& grid,
                                            std::span<const PatchIndex> subset,
                                            const AffinityParams& params) {
  expects(!subset.empty(), "affinity_degrees: subset must be nonempty");
  const auto n = static_cast<Eigen::Index>(subset.size());
  const auto dim = static_cast<Eigen::Index>(grid.dim());
  for (PatchIndex p : subset) expects(p < grid.size(), "affinity_degrees: patch index out of range");

  RowMatrix block(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = grid.unit_row(subset[static_cast<std::size_t>(i)]);
    std::copy(row.begin(), row.end(), block.row(i).data());
  }

  std::vector<std::uint32_t> degree(subset.size(), 0);
  const double alpha = params.alpha;
  Eigen::MatrixXf gram;
  for (Eigen::Index i0 = 0; i0 < n; i0 += kTile) {
    const Eigen::Index ni = std::min(kTile, n - i0);
    for (Eigen::Index j0 = i0; j0 < n; j0 += kTile) {
      const Eigen::Index nj = std::min(kTile, n - j0);
      gram.noalias() = block.middleRows(i0, ni) * block.middleRows(j0, nj).transpose();
      for (Eigen::Index a = 0; a < ni; ++a) {
        const Eigen::Index gi = i0 + a;
        const Eigen::Index b_start = (j0 == i0) ? a + 1 : 0;
        for (Eigen::Index b = b_start; b < nj; ++b) {
          const double g = gram(a, b);
          bool edge = g > alpha;
          if (std::abs(g - alpha) < kRecheckBand) {
            edge = detail::dot_exact(grid.unit_row(subset[static_cast<std::size_t>(gi)]),
                                     grid.unit_row(subset[static_cast<std::size_t>(j0 + b)])) >
                   alpha;
          }
          if (edge) {
            ++degree[static_cast<std::size_t>(gi)];
            ++degree[static_cast<std::size_t>(j0 + b)];
          }
        }
      }
    }
  }
  return degree;
}

SeedPair select_seeds(std::span<const PatchIndex> subset,
                      std::span<const std::uint32_t> degrees, bool follow_prose) {
  expects(subset.size() >= 2, "select_seeds: subset needs at least two patches");
  expects(degrees.size() == subset.size(), "select_seeds: degree count mismatch");

  // Returns the position of the extreme degree, skipping `exclude`, ties to
  // the lowest patch index.
  auto pick = [&](bool want_max, std::size_t exclude) {
    std::size_t best = subset.size();
    for (std::size_t i = 0; i < subset.size(); ++i) {
      if (i == exclude) continue;
      if (best == subset.size()) {
        best = i;
        continue;
      }
      const bool better = want_max ? degrees[i] > degrees[best] : degrees[i] < degrees[best];
      const bool tie = degrees[i] == degrees[best] && subset[i] < subset[best];
      if (better || tie) best = i;
    }
    return best;
  };

  const std::size_t b = pick(follow_prose, subset.size());
  const std::size_t w = pick(!follow_prose, b);
  return {subset[b], subset[w]};
}

SeedPair select_seeds(const FeatureGrid& grid, std::span<const PatchIndex> subset,
                      const AffinityParams& params, bool follow_prose) {
  expects(subset.size() >= 2, "select_seeds: subset needs at least two patches");
  return select_seeds(subset, affinity_degrees(grid, subset, params), follow_prose);
}

Connectivity connectivity_from_degrees(std::span<const std::uint32_t> degrees) {
  Connectivity c;
  const std::uint64_t sum = std::accumulate(degrees.begin(), degrees.end(), std::uint64_t{0});
  c.c_total = sum / 2;
  const auto n = static_cast<double>(degrees.size());
  c.c_bar = degrees.size() < 2 ? 1.0 : 2.0 * static_cast<double>(c.c_total) / (n * (n - 1.0));
  return c;
}

Connectivity connectivity(const FeatureGrid& grid, std::span<const PatchIndex> subset,
                          const AffinityParams& params) {
  return connectivity_from_degrees(affinity_degrees(grid, subset, params));
}

std::size_t high_energy_count(std::size_t patches, double theta_fraction) {
  // The small slack keeps products like 0.3 * 10 from rounding up to 4.
  const double raw = theta_fraction * static_cast<double>(patches);
  const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(count, patches);
}

HighEnergySet high_energy_set(const FeatureGrid& grid, const AffinityParams& params) {
  const std::size_t n = grid.size();
  expects(n > 0, "high_energy_set: grid is empty");
  std::vector<double> l1(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (float v : grid.raw_row(static_cast<PatchIndex>(i))) s += std::abs(static_cast<double>(v));
    l1[i] = s;
  }
  std::vector<PatchIndex> order(n);
  std::iota(order.begin(), order.end(), PatchIndex{0});
  const std::size_t k = high_energy_count(n, params.theta_fraction);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](PatchIndex a, PatchIndex b) {
                      if (l1[a] != l1[b]) return l1[a] > l1[b];
                      return a < b;
                    });
  HighEnergySet h;
  h.members.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(h.members.begin(), h.members.end());
  h.mask.assign(n, 0);
  for (PatchIndex p : h.members) h.mask[p] = 1;
  return h;
}

double dummy_score(std::span<const PatchIndex> subset, const HighEnergySet& high_energy) {
  expects(!subset.empty(), "dummy_score: subset must be nonempty");
  std::size_t hits = 0;
  for (PatchIndex p : subset) hits += high_energy.contains(p) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(subset.size());
}

SubsetStats subset_stats(const FeatureGrid& grid, std::span<const PatchIndex> subset,
                         const HighEnergySet& high_energy, const AffinityParams& params) {
  SubsetStats s;
  s.degree = affinity_degrees(grid, subset, params);
  const Connectivity c = connectivity_from_degrees(s.degree);
  s.c_total = c.c_total;
  s.c_bar = c.c_bar;
  s.xi = dummy_score(subset, high_energy);
  return s;
}

}  // namespace claid
