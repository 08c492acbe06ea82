#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "claid/affinity_graph.hpp"
#include "claid/feature_io.hpp"

namespace claid {

enum class InitMode { seeded, random };

// How point-to-cluster costs are evaluated. `unit_shortcut` assumes unit
// vectors (2n - 2x'D); `general` keeps the norm terms and works on any input.
enum class CostForm { unit_shortcut, general };

struct KsumsParams {
  int max_rounds = 100;
  std::uint64_t rng_seed = 0;
  InitMode init_mode = InitMode::seeded;
  // Draw n members with replacement per round instead of a permutation.
  bool sample_with_replacement = false;
  CostForm cost_form = CostForm::unit_shortcut;

  void validate() const;
};

// Running statistics of one cluster: member count, vector sum D and the sum
// of squared norms.
struct ClusterSums {
  std::size_t size = 0;
  std::vector<double> sum;
  double sum_sq = 0.0;
};

// Total squared distance from x to every member of the cluster. When x is a
// member its own zero term is included; for a destination cluster x is not
// part of the sums. Both cases are n*x'x - 2*x'D + sum_sq.
double cluster_cost(std::span<const float> x, const ClusterSums& cluster);

// Same quantity for unit-norm data: 2n - 2*x'D.
double cluster_cost_unit(std::span<const float> x, std::span<const double> sum, std::size_t size);

// Sum of squared distances from x to each point, evaluated pair by pair.
double cluster_cost_direct(std::span<const float> x, std::span<const float> points,
                           std::size_t dim);

// Sum over clusters of all intra-cluster pairwise squared distances.
double ksums_objective(std::span<const float> points, std::size_t dim,
                       std::span<const std::uint8_t> side);

// Result of splitting n points held contiguously.
struct PointBisection {
  std::vector<std::uint8_t> side;  // 0 = b cluster, 1 = w cluster
  ClusterSums b;
  ClusterSums w;
  double objective = 0.0;
  // Objective after initialization and after every round.
  std::vector<double> objective_trace;
  int rounds_used = 0;
  std::size_t moves = 0;
  bool converged = false;
  double max_sum_drift = 0.0;
};

struct SeedPositions {
  std::size_t b = 0;
  std::size_t w = 0;
};

// Greedy single-point k-sums bisection. With seeds the remaining points join
// the seed with the larger dot product (ties to b); without seeds the split
// is uniformly random with both sides nonempty.
PointBisection bisect_points(std::span<const float> points, std::size_t dim,
                             std::optional<SeedPositions> seeds, const KsumsParams& params);

struct Bisection {
  std::vector<PatchIndex> members_b;
  std::vector<PatchIndex> members_w;
  std::vector<double> sums_b;
  std::vector<double> sums_w;
  std::size_t n_b = 0;
  std::size_t n_w = 0;
  double objective = 0.0;
  std::vector<double> objective_trace;
  int rounds_used = 0;
  bool converged = false;
};

// Bisects a patch subset on the normalized feature view.
Bisection bisect(const FeatureGrid& grid, std::span<const PatchIndex> subset,
                 std::optional<SeedPair> seeds, const KsumsParams& params);

}  // namespace claid
