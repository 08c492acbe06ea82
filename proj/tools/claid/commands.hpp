#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "claid/evaluation.hpp"
#include "claid/feature_io.hpp"
#include "claid/region_descriptor.hpp"
#include "claid/search_index.hpp"
#include "run_config.hpp"

namespace claid::app {

namespace fs = std::filesystem;

// Result codes of the command-line tool.
enum ExitCode : int { kOk = 0, kInvalid = 1, kPartial = 2 };

struct ItemError {
  std::string item;
  std::string message;
};

struct DecomposeRow {
  std::string image_id;
  std::size_t patches = 0;
  std::size_t cuts = 0;
  std::size_t nodes = 0;
  std::size_t emitted = 0;
  bool truncated = false;
  double seconds = 0.0;
};

struct DecomposeSummary {
  std::vector<DecomposeRow> rows;  // manifest order, failed images omitted
  std::vector<ItemError> errors;
  [[nodiscard]] std::size_t emitted_total() const;
};

struct DescribeSummary {
  std::size_t images = 0;
  std::size_t regions = 0;
  std::size_t degenerate = 0;
  std::vector<ItemError> errors;
};

struct IndexSummary {
  std::size_t images = 0;
  std::size_t rows = 0;
  std::uint32_t dim_d = 0;
  std::vector<ItemError> errors;
};

struct SearchSummary {
  std::vector<QueryRanking> rankings;
  std::vector<ItemError> errors;
};

struct BenchRow {
  std::string image_id;
  std::size_t patches = 0;
  std::size_t cuts = 0;
  double seconds = 0.0;  // best of the repeats
  double seconds_per_cut = 0.0;
  std::vector<double> runs;
};

struct PipelineSummary {
  DecomposeSummary decompose;
  DescribeSummary describe;
  IndexSummary index;
  SearchSummary search;
  EvalReport report;
  std::size_t features = 0;  // indexed region descriptors
  // Filled when the run compares against the other dummy-filter setting.
  bool compared = false;
  std::size_t features_filtered = 0;
  std::size_t features_unfiltered = 0;
  [[nodiscard]] std::size_t error_count() const;
};

// File name for an image id; characters outside [A-Za-z0-9._-] are %-escaped.
std::string safe_name(const std::string& id);

// Stage files. Hierarchies: <dir>/<image>.json. Regions: <dir>/<image>.json.
void write_regions_file(const std::vector<RegionDescriptor>& regions, const std::string& image_id,
                        const fs::path& path);
std::vector<RegionDescriptor> read_regions_file(const fs::path& path, std::string* image_id = nullptr);

// Rankings as JSON lines, grouped by query in order of first appearance.
std::vector<QueryRanking> read_rankings(const fs::path& path);
void write_rankings(const std::vector<QueryRanking>& rankings, const fs::path& path);

DecomposeSummary cmd_decompose(const DatasetManifest& manifest, const RunConfig& config,
                               const fs::path& hierarchy_dir);
DescribeSummary cmd_describe(const DatasetManifest& manifest, const RunConfig& config,
                             const fs::path& hierarchy_dir, const fs::path& region_dir);
IndexSummary cmd_index(const DatasetManifest& manifest, const fs::path& region_dir,
                       const fs::path& index_path);
SearchSummary cmd_search(const fs::path& index_path, const std::vector<QuerySpec>& queries,
                         const RunConfig& config, const fs::path& rankings_path);
// Region files, when given, feed the recall-vs-IoU curve.
EvalReport cmd_eval(const DatasetManifest& manifest, const std::vector<QueryRanking>& rankings,
                    const RunConfig& config, const fs::path& region_dir = {});
// Runs every stage under work_dir and writes work_dir/report.json. With
// `compare_filter` the emitted-feature count of the opposite dummy-filter
// setting is recounted.
PipelineSummary cmd_pipeline(const DatasetManifest& manifest, const std::vector<QuerySpec>& queries,
                             const RunConfig& config, const fs::path& work_dir,
                             bool compare_filter);
std::vector<BenchRow> cmd_bench(const DatasetManifest& manifest, const RunConfig& config,
                                std::vector<ItemError>* errors = nullptr);

std::string decompose_summary_json(const DecomposeSummary& s, const RunConfig& config);
std::string pipeline_report_json(const PipelineSummary& s, const RunConfig& config);
std::string bench_json(const std::vector<BenchRow>& rows, const RunConfig& config);
std::string bench_table(const std::vector<BenchRow>& rows);

}  // namespace claid::app
