#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "claid/feature_io.hpp"
#include "claid/geometry.hpp"
#include "claid/hier_decomposer.hpp"

namespace claid {

enum class PoolMode { mean, max };

struct PoolParams {
  PoolMode mode = PoolMode::mean;
  // A map cell participates when at least this fraction of its area lies
  // under the region's pixel footprint.
  double min_cell_overlap = 0.5;
};

struct RegionDescriptor {
  std::string image_id;
  std::uint32_t region_id = 0;
  std::vector<float> vector;
  BBox bbox;
  std::size_t patch_count = 0;  // map cells pooled
  bool degenerate = false;
};

// Overlap area in pixels between each map cell and a footprint, row-major.
std::vector<double> cell_overlap_for_mask(const DescriptorMap& map,
                                          std::span<const std::uint8_t> mask,
                                          std::uint32_t grid_h, std::uint32_t grid_w,
                                          std::uint32_t patch_px);
std::vector<double> cell_overlap_for_box(const DescriptorMap& map, const BBox& box);

// Cells passing the overlap threshold, or the single best cell (lowest index
// on ties) when none does.
std::vector<std::size_t> participating_cells(const DescriptorMap& map,
                                             std::span<const double> overlap,
                                             double min_cell_overlap);

RegionDescriptor pool_cells(const DescriptorMap& map, std::span<const std::size_t> cells,
                            PoolMode mode);

RegionDescriptor pool_region(const DescriptorMap& map, std::span<const std::uint8_t> mask,
                             std::uint32_t grid_h, std::uint32_t grid_w, std::uint32_t patch_px,
                             const PoolParams& params = {});

RegionDescriptor pool_query(const DescriptorMap& map, const BBox& query_bbox,
                            const PoolParams& params = {});

// One descriptor per emitted node, region_id = node id, bbox from node_bbox.
std::vector<RegionDescriptor> describe_regions(const Hierarchy& hierarchy,
                                               const DescriptorMap& map,
                                               const std::string& image_id,
                                               std::uint32_t image_w_px,
                                               std::uint32_t image_h_px,
                                               const PoolParams& params = {});

}  // namespace claid
