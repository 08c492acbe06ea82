#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "claid/feature_io.hpp"

namespace claid {

struct AffinityParams {
  // Edge iff the normalized dot product is strictly greater than alpha.
  double alpha = 0.2;
  // Fraction of all patches, ranked by raw L1 norm, that form the high-energy set.
  double theta_fraction = 0.30;

  void validate() const;
};

struct SubsetStats {
  std::vector<std::uint32_t> degree;  // parallel to the subset
  std::uint64_t c_total = 0;
  double c_bar = 1.0;
  double xi = 0.0;
};

struct SeedPair {
  PatchIndex seed_b = 0;
  PatchIndex seed_w = 0;
};

// Per-member edge count within the subset, self-pairs excluded.
//
// The affinity matrix is never materialized: member vectors are gathered
// into a contiguous block and the upper triangle of the Gram matrix is
// evaluated tile by tile.
std::vector<std::uint32_t> affinity_degrees(const FeatureGrid& grid,
                                            std::span<const PatchIndex> subset,
                                            const AffinityParams& params);

// seed_b = argmin degree, seed_w = argmax degree among the remaining
// members; ties go to the lowest patch index. With `follow_prose` the roles
// are swapped (seed_b takes the maximum).
SeedPair select_seeds(std::span<const PatchIndex> subset,
                      std::span<const std::uint32_t> degrees, bool follow_prose = false);
SeedPair select_seeds(const FeatureGrid& grid, std::span<const PatchIndex> subset,
                      const AffinityParams& params, bool follow_prose = false);

struct Connectivity {
  std::uint64_t c_total = 0;
  double c_bar = 1.0;
};

Connectivity connectivity_from_degrees(std::span<const std::uint32_t> degrees);
Connectivity connectivity(const FeatureGrid& grid, std::span<const PatchIndex> subset,
                          const AffinityParams& params);

// Membership mask over all patches of the grid plus the sorted member list.
struct HighEnergySet {
  std::vector<PatchIndex> members;
  std::vector<std::uint8_t> mask;

  [[nodiscard]] bool contains(PatchIndex i) const { return mask[i] != 0; }
};

std::size_t high_energy_count(std::size_t patches, double theta_fraction);
HighEnergySet high_energy_set(const FeatureGrid& grid, const AffinityParams& params);

double dummy_score(std::span<const PatchIndex> subset, const HighEnergySet& high_energy);

// Degrees, edge count, density and dummy score in one pass.
SubsetStats subset_stats(const FeatureGrid& grid, std::span<const PatchIndex> subset,
                         const HighEnergySet& high_energy, const AffinityParams& params);

}  // namespace claid
