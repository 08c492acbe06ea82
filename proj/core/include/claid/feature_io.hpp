#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "claid/geometry.hpp"

namespace claid {

using PatchIndex = std::uint32_t;

inline constexpr std::uint32_t kDtypeF32 = 0;
inline constexpr std::size_t kGridHeaderBytes = 24;

// H x W grid of D-dimensional patch features for one image.
//
// Two views are kept: the raw rows exactly as stored on disk (their L1 norms
// drive the high-energy set) and the L2-normalized rows used for every dot
// product. Zero rows stay zero in the normalized view and are flagged.
class FeatureGrid {
 public:
  FeatureGrid() = default;

  // Takes ownership of raw row-major data and builds the normalized view.
  static FeatureGrid from_raw(std::uint32_t grid_h, std::uint32_t grid_w,
                              std::uint32_t dim, std::uint32_t patch_px,
                              std::vector<float> raw);

  [[nodiscard]] std::uint32_t grid_h() const { return grid_h_; }
  [[nodiscard]] std::uint32_t grid_w() const { return grid_w_; }
  [[nodiscard]] std::uint32_t dim() const { return dim_; }
  [[nodiscard]] std::uint32_t patch_px() const { return patch_px_; }
  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(grid_h_) * grid_w_;
  }

  [[nodiscard]] std::span<const float> raw() const { return raw_; }
  [[nodiscard]] std::span<const float> unit() const { return unit_; }
  [[nodiscard]] std::span<const float> raw_row(PatchIndex i) const {
    return {raw_.data() + static_cast<std::size_t>(i) * dim_, dim_};
  }
  [[nodiscard]] std::span<const float> unit_row(PatchIndex i) const {
    return {unit_.data() + static_cast<std::size_t>(i) * dim_, dim_};
  }

  [[nodiscard]] bool has_degenerate_rows() const { return degenerate_count_ > 0; }
  [[nodiscard]] std::size_t degenerate_count() const { return degenerate_count_; }
  [[nodiscard]] bool is_degenerate(PatchIndex i) const { return degenerate_[i] != 0; }

 private:
  std::uint32_t grid_h_ = 0;
  std::uint32_t grid_w_ = 0;
  std::uint32_t dim_ = 0;
  std::uint32_t patch_px_ = 0;
  std::vector<float> raw_;
  std::vector<float> unit_;
  std::vector<std::uint8_t> degenerate_;
  std::size_t degenerate_count_ = 0;
};

// Row-major grid of dim_d-channel cells, stride_px pixels per cell side.
struct DescriptorMap {
  std::uint32_t map_h = 0;
  std::uint32_t map_w = 0;
  std::uint32_t dim_d = 0;
  std::uint32_t stride_px = 0;
  std::vector<float> data;

  [[nodiscard]] std::size_t cells() const {
    return static_cast<std::size_t>(map_h) * map_w;
  }
  [[nodiscard]] std::span<const float> cell(std::size_t index) const {
    return {data.data() + index * dim_d, dim_d};
  }
  void validate() const;
};

void write_feature_grid(const FeatureGrid& grid, const std::filesystem::path& path);
FeatureGrid read_feature_grid(const std::filesystem::path& path);

void write_descriptor_map(const DescriptorMap& map, const std::filesystem::path& path);
DescriptorMap read_descriptor_map(const std::filesystem::path& path);

// In-memory variants; the file functions are thin wrappers around these.
std::vector<std::uint8_t> encode_feature_grid(const FeatureGrid& grid);
FeatureGrid decode_feature_grid(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_descriptor_map(const DescriptorMap& map);
DescriptorMap decode_descriptor_map(std::span<const std::uint8_t> bytes);

struct GroundTruthItem {
  std::string query_id;
  BBox bbox;
  bool relevant = true;
};

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path feature_path;
  std::filesystem::path descriptor_path;
  std::uint32_t image_w_px = 0;
  std::uint32_t image_h_px = 0;
  std::vector<GroundTruthItem> ground_truth;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  [[nodiscard]] const ManifestEntry* find(const std::string& image_id) const;
};

// Relative paths are resolved against the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& json_text,
                               const std::filesystem::path& base_dir = {});
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// A query instance: a box on a query image's descriptor map.
struct QuerySpec {
  std::string query_id;
  std::filesystem::path descriptor_path;
  BBox bbox;
  std::uint32_t image_w_px = 0;
  std::uint32_t image_h_px = 0;
};

// {"queries": [{query_id, descriptor_path, bbox, image_w_px, image_h_px}]}
std::vector<QuerySpec> read_queries(const std::filesystem::path& path);
void write_queries(const std::vector<QuerySpec>& queries, const std::filesystem::path& path);

// Lists referenced files that do not exist, as "image_id: path" strings.
std::vector<std::string> missing_files(const DatasetManifest& manifest);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace claid
