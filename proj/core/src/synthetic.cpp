#include "claid/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "claid/affinity_graph.hpp"
#include "claid/error.hpp"
#include "claid/rng.hpp"

namespace claid::synth {

namespace {

std::vector<std::vector<double>> orthonormal_set(std::size_t count, std::size_t dim, Rng& rng) {
  if (count > dim) throw ValidationError("synthetic: more prototypes than dimensions");
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double d = 0.0;
      for (std::size_t k = 0; k < dim; ++k) d += v[k] * b[k];
      for (std::size_t k = 0; k < dim; ++k) v[k] -= d * b[k];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-6) continue;
    for (double& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

bool overlaps_with_gap(const CellRect& a, const CellRect& b) {
  // Rects closer than one empty cell count as touching.
  return a.r0 <= b.r1 && b.r0 <= a.r1 && a.c0 <= b.c1 && b.c0 <= a.c1;
}

}  // namespace

std::string instance_query_id(std::uint32_t instance) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "q%02u", instance);
  return buf;
}

World::World(const SynthParams& params) : params_(params) {
  Rng rng(derive_seed(params.seed, 0xfeed));
  feature_protos_ = orthonormal_set(params.instances() + 2, params.dim, rng);
  descriptor_protos_ = orthonormal_set(params.instances() + 2, params.desc_dim, rng);
}

SynthImage World::render(const Layout& layout, const std::string& image_id,
                         std::uint64_t seed) const {
  const SynthParams& p = params_;
  Rng rng(seed);
  const std::uint32_t h = layout.grid_h;
  const std::uint32_t w = layout.grid_w;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const std::uint32_t bg_upper = p.instances();
  const std::uint32_t bg_lower = p.instances() + 1;

  std::vector<std::uint32_t> label(n);
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      label[static_cast<std::size_t>(r) * w + c] = r < layout.background_split_row ? bg_upper : bg_lower;
    }
  }
  for (const Plant& plant : layout.plants) {
    if (plant.rect.r1 > h || plant.rect.c1 > w) throw ValidationError("synthetic: plant outside grid");
    for (std::uint32_t r = plant.rect.r0; r < plant.rect.r1; ++r) {
      for (std::uint32_t c = plant.rect.c0; c < plant.rect.c1; ++c) {
        label[static_cast<std::size_t>(r) * w + c] = plant.instance;
      }
    }
  }

  // Features: prototype + isotropic noise, unit length, then scaled by energy.
  std::vector<float> raw(n * p.dim);
  const double noise = p.feature_noise / std::sqrt(static_cast<double>(p.dim));
  std::vector<double> v(p.dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& proto = feature_protos_[label[i]];
    double sq = 0.0;
    for (std::uint32_t k = 0; k < p.dim; ++k) {
      v[k] = proto[k] + noise * rng.normal();
      sq += v[k] * v[k];
    }
    const bool instance = label[i] < p.instances();
    const double energy = (instance ? p.instance_energy : p.background_energy) *
                          (0.9 + 0.2 * rng.uniform());
    const double scale = energy / std::sqrt(sq);
    for (std::uint32_t k = 0; k < p.dim; ++k) raw[i * p.dim + k] = static_cast<float>(v[k] * scale);
  }

  SynthImage img;
  img.image_id = image_id;
  img.image_w_px = w * p.patch_px;
  img.image_h_px = h * p.patch_px;
  img.grid = FeatureGrid::from_raw(h, w, p.dim, p.patch_px, std::move(raw));

  // Descriptor cells: area-weighted mix of the content prototypes under the cell.
  DescriptorMap& map = img.map;
  map.stride_px = p.stride_px;
  map.dim_d = p.desc_dim;
  map.map_h = (img.image_h_px + p.stride_px - 1) / p.stride_px;
  map.map_w = (img.image_w_px + p.stride_px - 1) / p.stride_px;
  map.data.assign(map.cells() * map.dim_d, 0.0F);
  const double dnoise = p.descriptor_noise / std::sqrt(static_cast<double>(p.desc_dim));
  std::vector<double> acc(p.desc_dim);
  for (std::uint32_t mr = 0; mr < map.map_h; ++mr) {
    for (std::uint32_t mc = 0; mc < map.map_w; ++mc) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const BBox cell{static_cast<float>(mc * p.stride_px), static_cast<float>(mr * p.stride_px),
                      static_cast<float>((mc + 1) * p.stride_px),
                      static_cast<float>((mr + 1) * p.stride_px)};
      const double cell_area = cell.area();
      for (std::uint32_t r = 0; r < h; ++r) {
        for (std::uint32_t c = 0; c < w; ++c) {
          const BBox patch{static_cast<float>(c * p.patch_px), static_cast<float>(r * p.patch_px),
                           static_cast<float>((c + 1) * p.patch_px),
                           static_cast<float>((r + 1) * p.patch_px)};
          const double a = intersection_area(cell, patch);
          if (a <= 0.0) continue;
          const auto& proto = descriptor_protos_[label[static_cast<std::size_t>(r) * w + c]];
          for (std::uint32_t k = 0; k < p.desc_dim; ++k) acc[k] += a / cell_area * proto[k];
        }
      }
      float* out = map.data.data() + (static_cast<std::size_t>(mr) * map.map_w + mc) * map.dim_d;
      for (std::uint32_t k = 0; k < p.desc_dim; ++k) {
        out[k] = static_cast<float>(acc[k] + dnoise * rng.normal());
      }
    }
  }

  for (const Plant& plant : layout.plants) {
    PlantedRegion region;
    region.instance = plant.instance;
    region.parent = plant.parent;
    for (std::uint32_t r = plant.rect.r0; r < plant.rect.r1; ++r) {
      for (std::uint32_t c = plant.rect.c0; c < plant.rect.c1; ++c) {
        region.members.push_back(r * w + c);
      }
    }
    region.bbox = {static_cast<float>(plant.rect.c0 * p.patch_px),
                   static_cast<float>(plant.rect.r0 * p.patch_px),
                   static_cast<float>(plant.rect.c1 * p.patch_px),
                   static_cast<float>(plant.rect.r1 * p.patch_px)};
    img.regions.push_back(std::move(region));
  }
  return img;
}

Layout random_layout(const SynthParams& p, std::uint64_t seed, bool nested) {
  Rng rng(seed);
  Layout layout;
  layout.grid_h = p.grid_h;
  layout.grid_w = p.grid_w;
  const auto split = p.grid_h / 3 + static_cast<std::uint32_t>(rng.below(p.grid_h / 3 + 1));
  layout.background_split_row = p.split_background ? split : 0;

  const std::size_t n = static_cast<std::size_t>(p.grid_h) * p.grid_w;
  const std::size_t budget = std::min(high_energy_count(n, 0.30),
                                      static_cast<std::size_t>(std::lround(p.coverage * n)));
  const auto k = p.min_blobs + static_cast<std::uint32_t>(rng.below(p.max_blobs - p.min_blobs + 1));

  std::vector<std::uint32_t> picked;
  std::size_t used = 0;
  std::vector<CellRect> rects;
  for (std::uint32_t b = 0; b < k; ++b) {
    std::uint32_t rh = 0;
    std::uint32_t rw = 0;
    if (nested && b == 0) {
      rh = 8 + static_cast<std::uint32_t>(rng.below(2));
      rw = 8 + static_cast<std::uint32_t>(rng.below(3));
    } else {
      const std::size_t remaining = budget > used ? budget - used : 0;
      const double target = static_cast<double>(remaining) / static_cast<double>(k - b);
      const double aspect = 0.6 + rng.uniform();
      rh = static_cast<std::uint32_t>(std::max(3.0, std::round(std::sqrt(target * aspect))));
      rw = static_cast<std::uint32_t>(std::max(3.0, std::floor(target / rh)));
      while (used + static_cast<std::size_t>(rh) * rw > budget && (rh > 3 || rw > 3)) {
        if (rw >= rh) --rw; else --rh;
      }
      if (used + static_cast<std::size_t>(rh) * rw > budget) break;
    }
    rh = std::min(rh, p.grid_h - 2);
    rw = std::min(rw, p.grid_w - 2);

    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      CellRect rect;
      rect.r0 = static_cast<std::uint32_t>(rng.below(p.grid_h - rh + 1));
      rect.c0 = static_cast<std::uint32_t>(rng.below(p.grid_w - rw + 1));
      rect.r1 = rect.r0 + rh;
      rect.c1 = rect.c0 + rw;
      const bool clash = std::any_of(rects.begin(), rects.end(), [&](const CellRect& o) {
        return overlaps_with_gap(rect, o);
      });
      if (clash) continue;
      rects.push_back(rect);
      placed = true;
    }
    if (!placed) break;
    used += static_cast<std::size_t>(rh) * rw;

    std::uint32_t instance = 0;
    if (nested && b == 0) {
      instance = static_cast<std::uint32_t>(rng.below(p.logos));
    } else {
      do {
        instance = static_cast<std::uint32_t>(rng.below(p.objects));
      } while (std::find(picked.begin(), picked.end(), instance) != picked.end());
    }
    picked.push_back(instance);
    layout.plants.push_back({instance, rects.back(), std::nullopt});

    if (nested && b == 0) {
      // Logo of 4x4 cells at least two cells inside the object border.
      const CellRect& outer = rects.back();
      CellRect logo;
      logo.r0 = outer.r0 + 2 + static_cast<std::uint32_t>(rng.below(outer.r1 - outer.r0 - 7));
      logo.c0 = outer.c0 + 2 + static_cast<std::uint32_t>(rng.below(outer.c1 - outer.c0 - 7));
      logo.r1 = logo.r0 + 4;
      logo.c1 = logo.c0 + 4;
      layout.plants.push_back({p.objects + instance, logo, std::size_t{0}});
    }
  }
  return layout;
}

SynthCorpus generate_corpus(const SynthParams& params) {
  if (params.logos > params.objects) throw ValidationError("synthetic: more logos than objects");
  if (params.min_blobs < 1 || params.max_blobs < params.min_blobs) {
    throw ValidationError("synthetic: invalid blob count range");
  }
  SynthCorpus corpus;
  corpus.params = params;
  const World world(params);
  const auto nested_period = static_cast<std::uint32_t>(
      params.nested_fraction > 0.0 ? std::max(1L, std::lround(1.0 / params.nested_fraction))
                                   : params.images + 1L);

  for (std::uint32_t i = 0; i < params.images; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "img%03u", i);
    const bool nested = params.logos > 0 && i % nested_period == 0;
    const Layout layout = random_layout(params, derive_seed(params.seed, 1000 + i), nested);
    corpus.images.push_back(world.render(layout, id, derive_seed(params.seed, 5000 + i)));
  }

  for (std::uint32_t q = 0; q < params.instances(); ++q) {
    Rng rng(derive_seed(params.seed, 9000 + q));
    Layout layout;
    layout.grid_h = params.grid_h;
    layout.grid_w = params.grid_w;
    layout.background_split_row = params.split_background ? params.grid_h / 2 : 0;
    const std::uint32_t side = q >= params.objects ? 4 : 6;
    CellRect rect;
    rect.r0 = 1 + static_cast<std::uint32_t>(rng.below(params.grid_h - side - 1));
    rect.c0 = 1 + static_cast<std::uint32_t>(rng.below(params.grid_w - side - 1));
    rect.r1 = rect.r0 + side;
    rect.c1 = rect.c0 + side;
    layout.plants.push_back({q, rect, std::nullopt});
    SynthImage img = world.render(layout, instance_query_id(q), derive_seed(params.seed, 9500 + q));
    SynthQuery query;
    query.query_id = instance_query_id(q);
    query.instance = q;
    query.map = std::move(img.map);
    query.bbox = img.regions.front().bbox;
    query.image_w_px = img.image_w_px;
    query.image_h_px = img.image_h_px;
    corpus.queries.push_back(std::move(query));
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  DatasetManifest manifest;
  for (const auto& img : corpus.images) {
    ManifestEntry e;
    e.image_id = img.image_id;
    e.feature_path = dir / "features" / (img.image_id + ".cft");
    e.descriptor_path = dir / "descriptors" / (img.image_id + ".cdm");
    e.image_w_px = img.image_w_px;
    e.image_h_px = img.image_h_px;
    write_feature_grid(img.grid, e.feature_path);
    write_descriptor_map(img.map, e.descriptor_path);
    for (const auto& region : img.regions) {
      e.ground_truth.push_back({instance_query_id(region.instance), region.bbox, true});
    }
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(manifest, dir / "manifest.json");

  std::vector<QuerySpec> specs;
  for (const auto& q : corpus.queries) {
    QuerySpec s;
    s.query_id = q.query_id;
    s.descriptor_path = dir / "queries" / (q.query_id + ".cdm");
    s.bbox = q.bbox;
    s.image_w_px = q.image_w_px;
    s.image_h_px = q.image_h_px;
    write_descriptor_map(q.map, s.descriptor_path);
    specs.push_back(std::move(s));
  }
  write_queries(specs, dir / "queries.json");
}

}  // namespace claid::synth
