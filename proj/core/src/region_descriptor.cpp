#include "claid/region_descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "claid/error.hpp"

namespace claid {

namespace {

BBox cell_rect(const DescriptorMap& map, std::size_t index) {
  const auto s = static_cast<float>(map.stride_px);
  const auto r = static_cast<float>(index / map.map_w);
  const auto c = static_cast<float>(index % map.map_w);
  return {c * s, r * s, (c + 1) * s, (r + 1) * s};
}

}  // namespace

std::vector<double> cell_overlap_for_mask(const DescriptorMap& map,
                                          std::span<const std::uint8_t> mask,
                                          std::uint32_t grid_h, std::uint32_t grid_w,
                                          std::uint32_t patch_px) {
  map.validate();
  expects(mask.size() == static_cast<std::size_t>(grid_h) * grid_w,
          "pool_region: mask size does not match grid");
  expects(patch_px > 0, "pool_region: patch_px must be positive");
  std::vector<double> overlap(map.cells(), 0.0);
  const std::uint32_t s = map.stride_px;
  for (std::uint32_t r = 0; r < grid_h; ++r) {
    for (std::uint32_t c = 0; c < grid_w; ++c) {
      if (mask[static_cast<std::size_t>(r) * grid_w + c] == 0) continue;
      const BBox patch{static_cast<float>(c * patch_px), static_cast<float>(r * patch_px),
                       static_cast<float>((c + 1) * patch_px),
                       static_cast<float>((r + 1) * patch_px)};
      const std::uint32_t c0 = (c * patch_px) / s;
      const std::uint32_t c1 = std::min(map.map_w - 1, ((c + 1) * patch_px - 1) / s);
      const std::uint32_t r0 = (r * patch_px) / s;
      const std::uint32_t r1 = std::min(map.map_h - 1, ((r + 1) * patch_px - 1) / s);
      for (std::uint32_t mr = r0; mr <= r1 && mr < map.map_h; ++mr) {
        for (std::uint32_t mc = c0; mc <= c1 && mc < map.map_w; ++mc) {
          const std::size_t cell = static_cast<std::size_t>(mr) * map.map_w + mc;
          overlap[cell] += intersection_area(patch, cell_rect(map, cell));
        }
      }
    }
  }
  return overlap;
}

std::vector<double> cell_overlap_for_box(const DescriptorMap& map, const BBox& box) {
  map.validate();
  std::vector<double> overlap(map.cells(), 0.0);
  for (std::size_t cell = 0; cell < map.cells(); ++cell) {
    overlap[cell] = intersection_area(box, cell_rect(map, cell));
  }
  return overlap;
}

std::vector<std::size_t> participating_cells(const DescriptorMap& map,
                                             std::span<const double> overlap,
                                             double min_cell_overlap) {
  const double cell_area = static_cast<double>(map.stride_px) * map.stride_px;
  std::vector<std::size_t> cells;
  std::size_t best = 0;
  for (std::size_t i = 0; i < overlap.size(); ++i) {
    if (overlap[i] >= min_cell_overlap * cell_area) cells.push_back(i);
    if (overlap[i] > overlap[best]) best = i;
  }
  if (cells.empty() && !overlap.empty() && overlap[best] > 0.0) cells.push_back(best);
  return cells;
}

RegionDescriptor pool_cells(const DescriptorMap& map, std::span<const std::size_t> cells,
                            PoolMode mode) {
  expects(!cells.empty(), "pool: no participating cells");
  std::vector<double> acc(map.dim_d, mode == PoolMode::max
                                         ? -std::numeric_limits<double>::infinity()
                                         : 0.0);
  for (std::size_t cell : cells) {
    const auto v = map.cell(cell);
    for (std::uint32_t k = 0; k < map.dim_d; ++k) {
      if (mode == PoolMode::max) {
        acc[k] = std::max(acc[k], static_cast<double>(v[k]));
      } else {
        acc[k] += v[k];
      }
    }
  }
  if (mode == PoolMode::mean) {
    for (double& a : acc) a /= static_cast<double>(cells.size());
  }
  double sq = 0.0;
  for (double a : acc) sq += a * a;
  const double norm = std::sqrt(sq);

  RegionDescriptor d;
  d.patch_count = cells.size();
  d.vector.assign(map.dim_d, 0.0F);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    d.degenerate = true;
    return d;
  }
  for (std::uint32_t k = 0; k < map.dim_d; ++k) d.vector[k] = static_cast<float>(acc[k] / norm);
  return d;
}

RegionDescriptor pool_region(const DescriptorMap& map, std::span<const std::uint8_t> mask,
                             std::uint32_t grid_h, std::uint32_t grid_w, std::uint32_t patch_px,
                             const PoolParams& params) {
  expects(std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }),
          "pool_region: mask is empty");
  const auto overlap = cell_overlap_for_mask(map, mask, grid_h, grid_w, patch_px);
  const auto cells = participating_cells(map, overlap, params.min_cell_overlap);
  expects(!cells.empty(), "pool_region: mask lies outside the descriptor map");
  return pool_cells(map, cells, params.mode);
}

RegionDescriptor pool_query(const DescriptorMap& map, const BBox& query_bbox,
                            const PoolParams& params) {
  expects(!query_bbox.empty(), "pool_query: bbox has zero area");
  const auto overlap = cell_overlap_for_box(map, query_bbox);
  const auto cells = participating_cells(map, overlap, params.min_cell_overlap);
  expects(!cells.empty(), "pool_query: bbox lies outside the descriptor map");
  RegionDescriptor d = pool_cells(map, cells, params.mode);
  d.bbox = query_bbox;
  return d;
}

std::vector<RegionDescriptor> describe_regions(const Hierarchy& hierarchy,
                                               const DescriptorMap& map,
                                               const std::string& image_id,
                                               std::uint32_t image_w_px,
                                               std::uint32_t image_h_px,
                                               const PoolParams& params) {
  std::vector<RegionDescriptor> out;
  out.reserve(hierarchy.emitted.size());
  for (NodeId id : hierarchy.emitted) {
    const RegionNode& node = hierarchy.node(id);
    const auto mask = node.mask(hierarchy.grid_h, hierarchy.grid_w);
    RegionDescriptor d =
        pool_region(map, mask, hierarchy.grid_h, hierarchy.grid_w, hierarchy.patch_px, params);
    d.image_id = image_id;
    d.region_id = id;
    d.bbox = node_bbox(node, hierarchy.grid_w, hierarchy.patch_px, image_w_px, image_h_px);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace claid
