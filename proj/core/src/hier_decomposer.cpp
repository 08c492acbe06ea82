#include "claid/hier_decomposer.hpp"

#include <algorithm>
#include <deque>

#include "json.hpp"

#include "claid/error.hpp"
#include "claid/rng.hpp"

namespace claid {

using json = nlohmann::json;

namespace {

json params_object(const DecomposeParams& p) {
  return {
      {"tau1", p.tau1},
      {"tau2", p.tau2},
      {"min_region_patches", p.min_region_patches},
      {"min_bisect_size", p.min_bisect_size},
      {"max_nodes", p.max_nodes},
      {"connectivity", static_cast<int>(p.connectivity)},
      {"seeds_follow_prose", p.seeds_follow_prose},
      {"alpha", p.affinity.alpha},
      {"theta_fraction", p.affinity.theta_fraction},
      {"max_rounds", p.ksums.max_rounds},
      {"rng_seed", p.ksums.rng_seed},
      {"init_mode", p.ksums.init_mode == InitMode::seeded ? "seeded" : "random"},
      {"sample_with_replacement", p.ksums.sample_with_replacement},
      {"cost_form", p.ksums.cost_form == CostForm::unit_shortcut ? "unit_shortcut" : "general"},
  };
}

// Runs of set cells per row as [row, start, length] triples.
json encode_mask(const RegionNode& node, std::uint32_t grid_w) {
  json runs = json::array();
  const auto& m = node.members;
  std::size_t i = 0;
  while (i < m.size()) {
    const PatchIndex row = m[i] / grid_w;
    const PatchIndex start = m[i] % grid_w;
    std::size_t j = i + 1;
    while (j < m.size() && m[j] == m[j - 1] + 1 && m[j] / grid_w == row) ++j;
    runs.push_back({row, start, j - i});
    i = j;
  }
  return runs;
}

}  // namespace

void DecomposeParams::validate() const {
  if (!(tau1 > 0.0 && tau1 <= 1.0)) throw ValidationError("tau1 must lie in (0, 1]");
  if (!(tau2 < 1.0)) throw ValidationError("tau2 must be below 1");
  if (min_bisect_size < 1) throw ValidationError("min_bisect_size must be at least 1");
  if (max_nodes < 1) throw ValidationError("max_nodes must be at least 1");
  affinity.validate();
  ksums.validate();
}

std::vector<std::uint8_t> RegionNode::mask(std::uint32_t grid_h, std::uint32_t grid_w) const {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(grid_h) * grid_w, 0);
  for (PatchIndex p : members) m[p] = 1;
  return m;
}

std::vector<std::vector<PatchIndex>> get_objects(std::span<const PatchIndex> members,
                                                 std::uint32_t grid_h, std::uint32_t grid_w,
                                                 GridAdjacency connectivity) {
  const std::size_t n = static_cast<std::size_t>(grid_h) * grid_w;
  // 0 = not a member, 1 = unvisited member, 2 = visited.
  std::vector<std::uint8_t> state(n, 0);
  for (PatchIndex p : members) {
    expects(p < n, "get_objects: patch index out of range");
    state[p] = 1;
  }
  std::vector<PatchIndex> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end());

  const bool eight = connectivity == GridAdjacency::eight;
  std::vector<std::vector<PatchIndex>> components;
  std::deque<PatchIndex> queue;
  for (PatchIndex start : sorted) {
    if (state[start] != 1) continue;
    std::vector<PatchIndex> comp;
    state[start] = 2;
    queue.push_back(start);
    while (!queue.empty()) {
      const PatchIndex p = queue.front();
      queue.pop_front();
      comp.push_back(p);
      const auto r = static_cast<std::int64_t>(p / grid_w);
      const auto c = static_cast<std::int64_t>(p % grid_w);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (!eight && dr != 0 && dc != 0) continue;
          const std::int64_t rr = r + dr;
          const std::int64_t cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= grid_h || cc >= grid_w) continue;
          const auto q = static_cast<PatchIndex>(rr * grid_w + cc);
          if (state[q] == 1) {
            state[q] = 2;
            queue.push_back(q);
          }
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    components.push_back(std::move(comp));
  }
  std::stable_sort(components.begin(), components.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return components;
}

Hierarchy decompose(const FeatureGrid& grid, const DecomposeParams& params,
                    std::string_view image_id) {
  params.validate();
  expects(grid.size() > 0, "decompose: grid is empty");
  const std::uint64_t seed = image_seed(image_id, params.ksums.rng_seed);
  const HighEnergySet high_energy = high_energy_set(grid, params.affinity);

  Hierarchy h;
  h.grid_h = grid.grid_h();
  h.grid_w = grid.grid_w();
  h.patch_px = grid.patch_px();
  RegionNode root;
  root.members.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) root.members[i] = static_cast<PatchIndex>(i);
  h.nodes.push_back(std::move(root));
  h.root = 0;

  std::deque<NodeId> worklist{0};
  while (!worklist.empty()) {
    const NodeId id = worklist.front();
    worklist.pop_front();

    SubsetStats stats = subset_stats(grid, h.nodes[id].members, high_energy, params.affinity);
    const std::size_t size = h.nodes[id].members.size();
    {
      RegionNode& node = h.nodes[id];
      node.stats = {stats.c_total, stats.c_bar, stats.xi};
      const bool is_root = id == h.root;
      node.is_dummy = is_root || stats.xi <= params.tau2;
      if (!is_root && stats.xi > params.tau2 && size >= params.min_region_patches) {
        node.is_emitted = true;
        h.emitted.push_back(id);
      }
    }

    if (!(stats.c_bar < params.tau1) || size < 2 * params.min_bisect_size) continue;
    if (h.nodes.size() >= params.max_nodes) {
      h.truncated = true;
      continue;
    }

    std::optional<SeedPair> seeds;
    if (params.ksums.init_mode == InitMode::seeded) {
      seeds = select_seeds(h.nodes[id].members, stats.degree, params.seeds_follow_prose);
    }
    KsumsParams kp = params.ksums;
    kp.rng_seed = derive_seed(seed, id);
    const Bisection halves = bisect(grid, h.nodes[id].members, seeds, kp);

    auto parts = get_objects(halves.members_b, h.grid_h, h.grid_w, params.connectivity);
    auto parts_w = get_objects(halves.members_w, h.grid_h, h.grid_w, params.connectivity);
    for (auto& p : parts_w) parts.push_back(std::move(p));
    if (h.nodes.size() + parts.size() > params.max_nodes) {
      h.truncated = true;
      continue;
    }

    ++h.cut_count;
    const std::uint32_t depth = h.nodes[id].depth + 1;
    for (auto& members : parts) {
      RegionNode child;
      child.id = static_cast<NodeId>(h.nodes.size());
      child.members = std::move(members);
      child.parent = id;
      child.depth = depth;
      h.nodes[id].children.push_back(child.id);
      worklist.push_back(child.id);
      h.nodes.push_back(std::move(child));
    }
  }
  return h;
}

BBox node_bbox(const RegionNode& node, std::uint32_t grid_w, std::uint32_t patch_px,
               std::uint32_t image_w_px, std::uint32_t image_h_px) {
  expects(!node.members.empty(), "node_bbox: node is empty");
  PatchIndex rmin = ~PatchIndex{0};
  PatchIndex cmin = ~PatchIndex{0};
  PatchIndex rmax = 0;
  PatchIndex cmax = 0;
  for (PatchIndex p : node.members) {
    const PatchIndex r = p / grid_w;
    const PatchIndex c = p % grid_w;
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  BBox b{static_cast<float>(cmin * patch_px), static_cast<float>(rmin * patch_px),
         static_cast<float>((cmax + 1) * patch_px), static_cast<float>((rmax + 1) * patch_px)};
  if (image_w_px > 0) b.x1 = std::min(b.x1, static_cast<float>(image_w_px));
  if (image_h_px > 0) b.y1 = std::min(b.y1, static_cast<float>(image_h_px));
  return b;
}

std::string decompose_params_json(const DecomposeParams& params) {
  return params_object(params).dump();
}

std::string hierarchy_to_json(const Hierarchy& h, const std::string& image_id,
                              const DecomposeParams* params) {
  json nodes = json::array();
  for (const auto& n : h.nodes) {
    nodes.push_back({
        {"id", n.id},
        {"parent", n.parent ? json(*n.parent) : json(nullptr)},
        {"depth", n.depth},
        {"children", n.children},
        {"size", n.members.size()},
        {"c_total", n.stats.c_total},
        {"c_bar", n.stats.c_bar},
        {"xi", n.stats.xi},
        {"is_dummy", n.is_dummy},
        {"is_emitted", n.is_emitted},
        {"mask_rle", encode_mask(n, h.grid_w)},
    });
  }
  json doc = {
      {"format", "claid-hierarchy-1"},
      {"image_id", image_id},
      {"grid_h", h.grid_h},
      {"grid_w", h.grid_w},
      {"patch_px", h.patch_px},
      {"root", h.root},
      {"cut_count", h.cut_count},
      {"truncated", h.truncated},
      {"emitted", h.emitted},
      {"nodes", std::move(nodes)},
  };
  if (params != nullptr) doc["params"] = params_object(*params);
  return doc.dump(1) + "\n";
}

Hierarchy hierarchy_from_json(const std::string& text, std::string* image_id) {
  Hierarchy h;
  try {
    const json doc = json::parse(text);
    if (doc.value("format", "") != "claid-hierarchy-1") {
      throw FormatError("not a hierarchy document");
    }
    if (image_id != nullptr) *image_id = doc.at("image_id").get<std::string>();
    h.grid_h = doc.at("grid_h").get<std::uint32_t>();
    h.grid_w = doc.at("grid_w").get<std::uint32_t>();
    h.patch_px = doc.at("patch_px").get<std::uint32_t>();
    h.root = doc.at("root").get<NodeId>();
    h.cut_count = doc.at("cut_count").get<std::size_t>();
    h.truncated = doc.at("truncated").get<bool>();
    h.emitted = doc.at("emitted").get<std::vector<NodeId>>();
    for (const auto& jn : doc.at("nodes")) {
      RegionNode n;
      n.id = jn.at("id").get<NodeId>();
      if (!jn.at("parent").is_null()) n.parent = jn.at("parent").get<NodeId>();
      n.depth = jn.at("depth").get<std::uint32_t>();
      n.children = jn.at("children").get<std::vector<NodeId>>();
      n.stats.c_total = jn.at("c_total").get<std::uint64_t>();
      n.stats.c_bar = jn.at("c_bar").get<double>();
      n.stats.xi = jn.at("xi").get<double>();
      n.is_dummy = jn.at("is_dummy").get<bool>();
      n.is_emitted = jn.at("is_emitted").get<bool>();
      for (const auto& run : jn.at("mask_rle")) {
        const auto row = run.at(0).get<PatchIndex>();
        const auto start = run.at(1).get<PatchIndex>();
        const auto len = run.at(2).get<PatchIndex>();
        if (row >= h.grid_h || start + len > h.grid_w) throw FormatError("mask run out of range");
        for (PatchIndex k = 0; k < len; ++k) n.members.push_back(row * h.grid_w + start + k);
      }
      if (n.members.size() != jn.at("size").get<std::size_t>()) {
        throw FormatError("node size does not match its mask");
      }
      if (n.id != h.nodes.size()) throw FormatError("node ids must be dense and ordered");
      h.nodes.push_back(std::move(n));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed hierarchy document: ") + e.what());
  }
  return h;
}

}  // namespace claid
