#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "claid/error.hpp"
#include "claid/hier_decomposer.hpp"
#include "claid/synthetic.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace claid;

namespace {

std::vector<PatchIndex> rect_members(std::uint32_t grid_w, const synth::CellRect& r) {
  std::vector<PatchIndex> out;
  for (std::uint32_t y = r.r0; y < r.r1; ++y) {
    for (std::uint32_t x = r.c0; x < r.c1; ++x) out.push_back(y * grid_w + x);
  }
  return out;
}

synth::SynthImage planted(const std::vector<synth::Plant>& plants, std::uint64_t seed = 1) {
  synth::SynthParams p;
  p.grid_h = 12;
  p.grid_w = 16;
  p.dim = 32;
  const synth::World world(p);
  synth::Layout layout;
  layout.grid_h = p.grid_h;
  layout.grid_w = p.grid_w;
  layout.plants = plants;
  return world.render(layout, "planted", seed);
}

void check_invariants(const Hierarchy& h, const DecomposeParams& p) {
  std::set<NodeId> emitted(h.emitted.begin(), h.emitted.end());
  for (const auto& n : h.nodes) {
    if (!n.children.empty()) {
      std::vector<PatchIndex> all;
      for (NodeId c : n.children) {
        const auto& child = h.node(c);
        EXPECT_EQ(child.parent, n.id);
        EXPECT_EQ(child.depth, n.depth + 1);
        all.insert(all.end(), child.members.begin(), child.members.end());
      }
      std::sort(all.begin(), all.end());
      EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end()) << "children overlap";
      EXPECT_EQ(all, n.members) << "children must cover the parent";
    }
    EXPECT_TRUE(std::is_sorted(n.members.begin(), n.members.end()));
    const bool should_emit = n.id != h.root && n.stats.xi > p.tau2 &&
                             n.members.size() >= p.min_region_patches;
    EXPECT_EQ(n.is_emitted, should_emit) << "node " << n.id;
    EXPECT_EQ(emitted.count(n.id) == 1, n.is_emitted);
  }
}

}  // namespace

TEST(GetObjects, TwoDiagonalCells) {
  const std::vector<PatchIndex> m{0, 4};  // (0,0) and (1,1) on a 3x3 grid
  EXPECT_EQ(get_objects(m, 3, 3).size(), 2U);
  EXPECT_EQ(get_objects(m, 3, 3, GridAdjacency::eight).size(), 1U);
}

TEST(GetObjects, SingleRowOfCells) {
  const std::vector<PatchIndex> m{0, 1, 2, 3, 4};
  const auto c = get_objects(m, 1, 5);
  ASSERT_EQ(c.size(), 1U);
  EXPECT_EQ(c[0], m);
}

TEST(GetObjects, LargestFirstThenLowestIndex) {
  // 4x4 grid: {0}, {3}, {12,13,14}
  const std::vector<PatchIndex> m{14, 3, 12, 0, 13};
  const auto c = get_objects(m, 4, 4);
  ASSERT_EQ(c.size(), 3U);
  EXPECT_EQ(c[0], (std::vector<PatchIndex>{12, 13, 14}));
  EXPECT_EQ(c[1], std::vector<PatchIndex>{0});
  EXPECT_EQ(c[2], std::vector<PatchIndex>{3});
}

TEST(GetObjects, NoWrapAcrossRows) {
  // 3 is the end of row 0 and 4 the start of row 1 on a 4-wide grid.
  const std::vector<PatchIndex> m{3, 4};
  EXPECT_EQ(get_objects(m, 2, 4).size(), 2U);
}

TEST(GetObjects, MatchesUnionFindOracle) {
  std::mt19937_64 gen(31);
  for (int t = 0; t < 100; ++t) {
    const std::uint32_t h = 3 + t % 7;
    const std::uint32_t w = 2 + t % 11;
    std::vector<PatchIndex> m;
    std::bernoulli_distribution keep(0.45);
    for (PatchIndex p = 0; p < h * w; ++p) {
      if (keep(gen)) m.push_back(p);
    }
    if (m.empty()) continue;
    std::shuffle(m.begin(), m.end(), gen);
    for (bool eight : {false, true}) {
      EXPECT_EQ(get_objects(m, h, w, eight ? GridAdjacency::eight : GridAdjacency::four),
                oracle::components(m, h, w, eight));
    }
  }
}

TEST(Decompose, UniformGridStaysRootOnly) {
  const auto g = FeatureGrid::from_raw(4, 5, 3, 8, std::vector<float>(60, 1.0F));
  const auto h = decompose(g, {}, "flat");
  ASSERT_EQ(h.nodes.size(), 1U);
  EXPECT_TRUE(h.emitted.empty());
  EXPECT_EQ(h.cut_count, 0U);
  EXPECT_DOUBLE_EQ(h.node(h.root).stats.c_bar, 1.0);
}

TEST(Decompose, TwoPlantedBlobsEmittedWithExactMasks) {
  const synth::CellRect a{1, 1, 5, 6};
  const synth::CellRect b{6, 9, 11, 15};
  const auto img = planted({{0, a, std::nullopt}, {1, b, std::nullopt}});
  DecomposeParams p;
  const auto h = decompose(img.grid, p, img.image_id);
  check_invariants(h, p);
  for (const auto& rect : {a, b}) {
    const auto want = rect_members(16, rect);
    const bool found = std::any_of(h.emitted.begin(), h.emitted.end(),
                                   [&](NodeId id) { return h.node(id).members == want; });
    EXPECT_TRUE(found) << "rect at " << rect.r0 << "," << rect.c0;
  }
}

TEST(Decompose, NestedPlantYieldsCoarseAndFineNodes) {
  const synth::CellRect outer{1, 1, 10, 11};
  const synth::CellRect inner{3, 3, 6, 7};
  const auto img = planted({{0, outer, std::nullopt}, {1, inner, std::size_t{0}}});
  DecomposeParams p;
  const auto h = decompose(img.grid, p, img.image_id);
  check_invariants(h, p);
  const auto outer_members = rect_members(16, outer);
  const auto inner_members = rect_members(16, inner);
  std::optional<NodeId> coarse;
  std::optional<NodeId> fine;
  for (NodeId id : h.emitted) {
    if (h.node(id).members == outer_members) coarse = id;
    if (h.node(id).members == inner_members) fine = id;
  }
  ASSERT_TRUE(coarse.has_value());
  ASSERT_TRUE(fine.has_value());
  // The fine node descends from the coarse one.
  NodeId walk = *fine;
  bool under = false;
  while (h.node(walk).parent) {
    walk = *h.node(walk).parent;
    if (walk == *coarse) under = true;
  }
  EXPECT_TRUE(under);
}

TEST(Decompose, InvariantsOnRandomGrids) {
  for (int t = 0; t < 10; ++t) {
    const auto g = testing_support::random_grid(6, 8, 6, 300 + t);
    DecomposeParams p;
    p.tau1 = 0.9;
    p.ksums.init_mode = t % 2 == 0 ? InitMode::seeded : InitMode::random;
    p.connectivity = t % 3 == 0 ? GridAdjacency::eight : GridAdjacency::four;
    const auto h = decompose(g, p, "r" + std::to_string(t));
    check_invariants(h, p);
    EXPECT_LE(h.nodes.size(), p.max_nodes);
    for (std::size_t i = 0; i < h.nodes.size(); ++i) EXPECT_EQ(h.nodes[i].id, i);
  }
}

TEST(Decompose, NodeStatsMatchOracles) {
  const auto g = testing_support::random_grid(5, 6, 4, 17);
  DecomposeParams p;
  p.tau1 = 0.8;
  const auto h = decompose(g, p, "s");
  const auto hi = oracle::high_energy(g, p.affinity.theta_fraction);
  for (const auto& n : h.nodes) {
    EXPECT_DOUBLE_EQ(n.stats.c_bar, oracle::c_bar(g, n.members, p.affinity.alpha));
    EXPECT_DOUBLE_EQ(n.stats.xi, oracle::xi(n.members, hi));
  }
}

TEST(Decompose, NoDummyFilterEmitsAtLeastAsMany) {
  const auto g = testing_support::random_grid(8, 8, 6, 5);
  DecomposeParams on;
  on.tau1 = 0.9;
  DecomposeParams off = on;
  off.tau2 = -1.0;
  const auto a = decompose(g, on, "d");
  const auto b = decompose(g, off, "d");
  EXPECT_EQ(a.nodes.size(), b.nodes.size());
  EXPECT_GE(b.emitted.size(), a.emitted.size());
  check_invariants(b, off);
}

TEST(Decompose, NodeCapSetsTruncated) {
  const auto g = testing_support::random_grid(8, 8, 6, 6);
  DecomposeParams p;
  p.max_nodes = 5;
  const auto h = decompose(g, p, "cap");
  EXPECT_TRUE(h.truncated);
  EXPECT_LE(h.nodes.size(), 5U);
}

TEST(Decompose, DeterministicPerImageId) {
  const auto g = testing_support::random_grid(8, 8, 6, 7);
  DecomposeParams p;
  p.ksums.init_mode = InitMode::random;
  const auto a = hierarchy_to_json(decompose(g, p, "img"), "img", &p);
  const auto b = hierarchy_to_json(decompose(g, p, "img"), "img", &p);
  EXPECT_EQ(a, b);
}

TEST(Decompose, InvalidParams) {
  const auto g = testing_support::random_grid(2, 2, 2, 1);
  DecomposeParams p;
  p.tau1 = 1.5;
  EXPECT_THROW(decompose(g, p), ValidationError);
  p = {};
  p.max_nodes = 0;
  EXPECT_THROW(decompose(g, p), ValidationError);
}

TEST(NodeBBox, SingleCellAndClamp) {
  RegionNode n;
  n.members = {0};
  EXPECT_EQ(node_bbox(n, 4, 16, 64, 64), (BBox{0, 0, 16, 16}));
  n.members = {3 * 4 + 3};  // bottom-right cell of a 4x4 grid over a 60x60 image
  EXPECT_EQ(node_bbox(n, 4, 16, 60, 60), (BBox{48, 48, 60, 60}));
}

TEST(NodeBBox, MatchesScanOracle) {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 50; ++t) {
    RegionNode n;
    std::uniform_int_distribution<PatchIndex> pick(0, 9 * 7 - 1);
    for (int i = 0; i < 1 + t % 9; ++i) n.members.push_back(pick(gen));
    std::sort(n.members.begin(), n.members.end());
    n.members.erase(std::unique(n.members.begin(), n.members.end()), n.members.end());
    EXPECT_EQ(node_bbox(n, 7, 8, 7 * 8, 9 * 8), oracle::scan_bbox(n.members, 7, 8));
  }
}

TEST(HierarchyJson, RoundTrip) {
  const auto g = testing_support::random_grid(6, 7, 5, 8);
  DecomposeParams p;
  p.tau1 = 0.9;
  const auto h = decompose(g, p, "rt");
  const auto text = hierarchy_to_json(h, "rt", &p);
  std::string id;
  const auto back = hierarchy_from_json(text, &id);
  EXPECT_EQ(id, "rt");
  ASSERT_EQ(back.nodes.size(), h.nodes.size());
  EXPECT_EQ(back.emitted, h.emitted);
  EXPECT_EQ(back.grid_h, h.grid_h);
  EXPECT_EQ(back.cut_count, h.cut_count);
  for (std::size_t i = 0; i < h.nodes.size(); ++i) {
    EXPECT_EQ(back.nodes[i].members, h.nodes[i].members);
    EXPECT_EQ(back.nodes[i].children, h.nodes[i].children);
    EXPECT_EQ(back.nodes[i].parent, h.nodes[i].parent);
    EXPECT_EQ(back.nodes[i].is_dummy, h.nodes[i].is_dummy);
  }
  EXPECT_EQ(hierarchy_to_json(back, "rt", &p), text);
}

TEST(HierarchyJson, MalformedIsFormatError) {
  EXPECT_THROW(hierarchy_from_json("{}"), FormatError);
  EXPECT_THROW(hierarchy_from_json("[1,2"), FormatError);
}
