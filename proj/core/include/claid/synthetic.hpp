#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "claid/feature_io.hpp"
#include "claid/geometry.hpp"

namespace claid::synth {

// Planted-instance corpus generator. Every instance owns a prototype
// direction in feature space and another in descriptor space; prototypes
// are mutually orthogonal. Instance patches carry high raw energy, the
// background low energy. One background "stuff" region by default;
// split_background adds a second, orthogonal one below a random row.
struct SynthParams {
  std::uint32_t images = 50;
  std::uint32_t grid_h = 24;
  std::uint32_t grid_w = 32;
  std::uint32_t dim = 64;
  std::uint32_t patch_px = 8;
  std::uint32_t desc_dim = 48;
  std::uint32_t stride_px = 16;
  std::uint32_t objects = 16;  // plain instances
  std::uint32_t logos = 4;     // instances that only appear inside object j < logos
  std::uint32_t min_blobs = 2;
  std::uint32_t max_blobs = 4;
  double nested_fraction = 0.25;
  double coverage = 0.24;      // target fraction of the grid covered by instances
  double feature_noise = 0.2;
  double descriptor_noise = 0.05;
  double instance_energy = 4.0;
  double background_energy = 1.0;
  bool split_background = false;
  std::uint64_t seed = 7;

  [[nodiscard]] std::uint32_t instances() const { return objects + logos; }
};

// Cell rectangle [r0, r1) x [c0, c1) on the patch grid.
struct CellRect {
  std::uint32_t r0 = 0;
  std::uint32_t c0 = 0;
  std::uint32_t r1 = 0;
  std::uint32_t c1 = 0;

  [[nodiscard]] std::uint32_t area() const { return (r1 - r0) * (c1 - c0); }
};

struct Plant {
  std::uint32_t instance = 0;
  CellRect rect;
  std::optional<std::size_t> parent;  // index of the enclosing plant
};

struct Layout {
  std::uint32_t grid_h = 0;
  std::uint32_t grid_w = 0;
  std::uint32_t background_split_row = 0;
  std::vector<Plant> plants;
};

struct PlantedRegion {
  std::uint32_t instance = 0;
  std::vector<PatchIndex> members;  // footprint including nested children
  BBox bbox;
  std::optional<std::size_t> parent;
};

struct SynthImage {
  std::string image_id;
  FeatureGrid grid;
  DescriptorMap map;
  std::uint32_t image_w_px = 0;
  std::uint32_t image_h_px = 0;
  std::vector<PlantedRegion> regions;
};

struct SynthQuery {
  std::string query_id;
  std::uint32_t instance = 0;
  DescriptorMap map;
  BBox bbox;
  std::uint32_t image_w_px = 0;
  std::uint32_t image_h_px = 0;
};

struct SynthCorpus {
  SynthParams params;
  std::vector<SynthImage> images;
  std::vector<SynthQuery> queries;
};

// Prototype directions shared by every image of a corpus.
class World {
 public:
  explicit World(const SynthParams& params);

  [[nodiscard]] const SynthParams& params() const { return params_; }

  // Renders a layout into features and a descriptor map.
  SynthImage render(const Layout& layout, const std::string& image_id,
                    std::uint64_t seed) const;

 private:
  SynthParams params_;
  std::vector<std::vector<double>> feature_protos_;     // instances, then 2 backgrounds
  std::vector<std::vector<double>> descriptor_protos_;  // instances, then 2 backgrounds
};

// Draws a layout with min_blobs..max_blobs spatially separated instances.
Layout random_layout(const SynthParams& params, std::uint64_t seed, bool nested);

// images + one query per instance (query_id "q<instance>").
SynthCorpus generate_corpus(const SynthParams& params);

// Writes features/, descriptors/, queries/, manifest.json and queries.json.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

std::string instance_query_id(std::uint32_t instance);

}  // namespace claid::synth
