#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "claid/affinity_graph.hpp"
#include "claid/feature_io.hpp"
#include "claid/geometry.hpp"
#include "claid/ksums_bisect.hpp"

namespace claid {

using NodeId = std::uint32_t;

enum class GridAdjacency : int { four = 4, eight = 8 };

struct DecomposeParams {
  double tau1 = 0.97;  // stop splitting once c_bar >= tau1
  double tau2 = 0.2;   // dummy when xi <= tau2; a negative value disables the filter
  std::size_t min_region_patches = 4;
  std::size_t min_bisect_size = 2;
  std::size_t max_nodes = 256;
  GridAdjacency connectivity = GridAdjacency::four;
  bool seeds_follow_prose = false;
  AffinityParams affinity;
  KsumsParams ksums;

  void validate() const;
};

struct NodeStats {
  std::uint64_t c_total = 0;
  double c_bar = 1.0;
  double xi = 0.0;
};

struct RegionNode {
  NodeId id = 0;
  std::vector<PatchIndex> members;  // sorted ascending
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  NodeStats stats;
  bool is_dummy = false;
  bool is_emitted = false;
  std::uint32_t depth = 0;

  // grid_h x grid_w row-major occupancy.
  [[nodiscard]] std::vector<std::uint8_t> mask(std::uint32_t grid_h, std::uint32_t grid_w) const;
};

struct Hierarchy {
  std::uint32_t grid_h = 0;
  std::uint32_t grid_w = 0;
  std::uint32_t patch_px = 0;
  std::vector<RegionNode> nodes;  // nodes[id].id == id
  NodeId root = 0;
  std::vector<NodeId> emitted;
  std::size_t cut_count = 0;
  bool truncated = false;

  [[nodiscard]] const RegionNode& node(NodeId id) const { return nodes.at(id); }
};

// Splits a patch set into spatially connected components on the grid, largest
// first, ties by lowest member index.
std::vector<std::vector<PatchIndex>> get_objects(
    std::span<const PatchIndex> members, std::uint32_t grid_h, std::uint32_t grid_w,
    GridAdjacency connectivity = GridAdjacency::four);

// Hierarchical bisecting decomposition. Random choices are driven by
// image_seed(image_id, params.ksums.rng_seed); node n draws from the stream
// derive_seed(that seed, n).
Hierarchy decompose(const FeatureGrid& grid, const DecomposeParams& params,
                    std::string_view image_id = {});

// Tight pixel box over the node's cells, clamped to the image.
BBox node_bbox(const RegionNode& node, std::uint32_t grid_w, std::uint32_t patch_px,
               std::uint32_t image_w_px, std::uint32_t image_h_px);

// JSON document: node records carry run-length-encoded mask rows.
// The resolved parameters are embedded when given.
std::string hierarchy_to_json(const Hierarchy& hierarchy, const std::string& image_id,
                              const DecomposeParams* params = nullptr);
Hierarchy hierarchy_from_json(const std::string& text, std::string* image_id = nullptr);

// Fully resolved parameter set as a JSON object.
std::string decompose_params_json(const DecomposeParams& params);

}  // namespace claid
