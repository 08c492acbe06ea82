#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "claid/feature_io.hpp"
#include "claid/geometry.hpp"
#include "claid/region_descriptor.hpp"

namespace claid {

struct IndexRow {
  std::uint32_t image_ordinal = 0;
  std::uint32_t region_id = 0;
  BBox bbox;
};

// Flat, append-only store of unit-norm region descriptors.
class DescriptorIndex {
 public:
  DescriptorIndex() = default;
  explicit DescriptorIndex(std::uint32_t dim_d) : dim_d_(dim_d) {}

  // Registers an image (possibly with no rows) and returns its ordinal.
  std::uint32_t add_image(const std::string& image_id);
  // Appends a row; rejects degenerate vectors and dimension mismatches.
  void add(std::uint32_t image_ordinal, const RegionDescriptor& descriptor);

  [[nodiscard]] std::uint32_t dim() const { return dim_d_; }
  [[nodiscard]] std::size_t row_count() const { return rows_.size(); }
  [[nodiscard]] std::size_t image_count() const { return image_ids_.size(); }
  [[nodiscard]] const std::vector<std::string>& image_ids() const { return image_ids_; }
  [[nodiscard]] const std::vector<IndexRow>& rows() const { return rows_; }
  [[nodiscard]] std::span<const float> vector(std::size_t row) const {
    return {vectors_.data() + row * dim_d_, dim_d_};
  }

  // Writes `path` (.cix) and `path` + ".json" (ordinal -> image_id).
  void save(const std::filesystem::path& path) const;
  static DescriptorIndex load(const std::filesystem::path& path);

  std::vector<std::uint8_t> encode() const;
  static DescriptorIndex decode(std::span<const std::uint8_t> bytes,
                                std::vector<std::string> image_ids);
  std::string sidecar_json() const;

 private:
  std::uint32_t dim_d_ = 0;
  std::vector<std::string> image_ids_;
  std::vector<IndexRow> rows_;
  std::vector<float> vectors_;
};

struct ImageDescriptors {
  std::string image_id;
  std::vector<RegionDescriptor> regions;
};

// Rows in input order; degenerate descriptors are skipped.
DescriptorIndex build_index(std::span<const ImageDescriptors> images);

struct RankedEntry {
  std::string image_id;
  double score = 0.0;
  std::uint32_t best_region_id = 0;
  BBox best_bbox;
};

struct RankedResult {
  std::vector<RankedEntry> entries;
};

// Per-image max cosine, images by score descending then image_id.
// Rows are scored in fixed blocks across `threads` workers and merged in
// block order, so the result does not depend on the thread count.
RankedResult search(const DescriptorIndex& index, std::span<const float> query, std::size_t k,
                    unsigned threads = 1);

// Images in order of first appearance in the fully sorted region list.
RankedResult image_retrieval_rank(const DescriptorIndex& index, std::span<const float> query,
                                  std::size_t k);

// One JSON object per line: {query_id, rank, image_id, score, bbox}.
std::string ranking_json_lines(const std::string& query_id, const RankedResult& result);

}  // namespace claid
