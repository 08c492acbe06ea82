#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "claid/error.hpp"
#include "claid/hier_decomposer.hpp"

namespace claid::app {

using json = nlohmann::json;

namespace {

// Calls fn(i) for i in [0, n) on up to `threads` workers. Callers write
// results into slot i, so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1U, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

json box_json(const BBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

BBox box_from(const json& j) {
  return {j.at(0).get<float>(), j.at(1).get<float>(), j.at(2).get<float>(), j.at(3).get<float>()};
}

json errors_json(const std::vector<ItemError>& errors) {
  json out = json::array();
  for (const auto& e : errors) out.push_back({{"item", e.item}, {"error", e.message}});
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Collects per-slot failures in slot order.
struct SlotErrors {
  explicit SlotErrors(std::size_t n) : slots(n) {}
  std::vector<std::optional<ItemError>> slots;
  void drain_into(std::vector<ItemError>& out) const {
    for (const auto& s : slots) {
      if (s) out.push_back(*s);
    }
  }
};

template <typename Fn>
void guarded(SlotErrors& errors, std::size_t slot, const std::string& item, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    errors.slots[slot] = ItemError{item, e.what()};
  }
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("stage ") + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

std::size_t DecomposeSummary::emitted_total() const {
  std::size_t total = 0;
  for (const auto& r : rows) total += r.emitted;
  return total;
}

std::size_t PipelineSummary::error_count() const {
  return decompose.errors.size() + describe.errors.size() + index.errors.size() +
         search.errors.size();
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (unsigned char ch : id) {
    const bool plain = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                       (ch >= '0' && ch <= '9') || ch == '.' || ch == '_' || ch == '-';
    if (plain) {
      out += static_cast<char>(ch);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", ch);
      out += buf;
    }
  }
  if (out.empty() || out == "." || out == "..") out = "%" + out;
  return out;
}

void write_regions_file(const std::vector<RegionDescriptor>& regions, const std::string& image_id,
                        const fs::path& path) {
  json rows = json::array();
  std::size_t dim = 0;
  for (const auto& r : regions) {
    dim = r.vector.size();
    rows.push_back({{"region_id", r.region_id},
                    {"bbox", box_json(r.bbox)},
                    {"patch_count", r.patch_count},
                    {"degenerate", r.degenerate},
                    {"vector", r.vector}});
  }
  const json doc = {{"format", "claid-regions-1"},
                    {"image_id", image_id},
                    {"dim_d", dim},
                    {"regions", std::move(rows)}};
  write_text(path, doc.dump() + "\n");
}

std::vector<RegionDescriptor> read_regions_file(const fs::path& path, std::string* image_id) {
  const std::string text = read_text(path);
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "claid-regions-1") throw FormatError("unknown regions format");
    const auto id = doc.at("image_id").get<std::string>();
    if (image_id != nullptr) *image_id = id;
    std::vector<RegionDescriptor> out;
    for (const auto& r : doc.at("regions")) {
      RegionDescriptor d;
      d.image_id = id;
      d.region_id = r.at("region_id").get<std::uint32_t>();
      d.bbox = box_from(r.at("bbox"));
      d.patch_count = r.at("patch_count").get<std::size_t>();
      d.degenerate = r.at("degenerate").get<bool>();
      d.vector = r.at("vector").get<std::vector<float>>();
      out.push_back(std::move(d));
    }
    return out;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_rankings(const std::vector<QueryRanking>& rankings, const fs::path& path) {
  std::string text;
  for (const auto& q : rankings) text += ranking_json_lines(q.query_id, q.result);
  write_text(path, text);
}

std::vector<QueryRanking> read_rankings(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<QueryRanking> out;
  std::map<std::string, std::size_t> slot;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto qid = j.at("query_id").get<std::string>();
      auto [it, fresh] = slot.try_emplace(qid, out.size());
      if (fresh) out.push_back({qid, {}});
      RankedEntry e;
      e.image_id = j.at("image_id").get<std::string>();
      e.score = j.at("score").get<double>();
      e.best_region_id = j.value("region_id", 0U);
      e.best_bbox = box_from(j.at("bbox"));
      out[it->second].result.entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

DecomposeSummary cmd_decompose(const DatasetManifest& manifest, const RunConfig& config,
                               const fs::path& hierarchy_dir) {
  config.validate();
  fs::create_directories(hierarchy_dir);
  const auto& entries = manifest.entries;
  std::vector<std::optional<DecomposeRow>> rows(entries.size());
  SlotErrors errors(entries.size());
  parallel_for(entries.size(), config.threads, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    guarded(errors, i, e.image_id, [&] {
      const FeatureGrid grid = read_feature_grid(e.feature_path);
      const auto t0 = std::chrono::steady_clock::now();
      const Hierarchy h = decompose(grid, config.decompose, e.image_id);
      const double secs = seconds_since(t0);
      write_text(hierarchy_dir / (safe_name(e.image_id) + ".json"),
                 hierarchy_to_json(h, e.image_id, &config.decompose));
      rows[i] = DecomposeRow{e.image_id, grid.size(), h.cut_count, h.nodes.size(),
                             h.emitted.size(), h.truncated, secs};
    });
  });
  DecomposeSummary out;
  for (auto& r : rows) {
    if (r) out.rows.push_back(std::move(*r));
  }
  errors.drain_into(out.errors);
  return out;
}

DescribeSummary cmd_describe(const DatasetManifest& manifest, const RunConfig& config,
                             const fs::path& hierarchy_dir, const fs::path& region_dir) {
  config.validate();
  fs::create_directories(region_dir);
  const auto& entries = manifest.entries;
  std::vector<std::size_t> regions(entries.size(), 0);
  std::vector<std::size_t> degenerate(entries.size(), 0);
  std::vector<std::uint8_t> done(entries.size(), 0);
  SlotErrors errors(entries.size());
  parallel_for(entries.size(), config.threads, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    guarded(errors, i, e.image_id, [&] {
      const fs::path hpath = hierarchy_dir / (safe_name(e.image_id) + ".json");
      if (!fs::exists(hpath)) throw IoError("no hierarchy file " + hpath.string());
      const Hierarchy h = hierarchy_from_json(read_text(hpath));
      const DescriptorMap map = read_descriptor_map(e.descriptor_path);
      const auto descs =
          describe_regions(h, map, e.image_id, e.image_w_px, e.image_h_px, config.pool);
      write_regions_file(descs, e.image_id, region_dir / (safe_name(e.image_id) + ".json"));
      regions[i] = descs.size();
      degenerate[i] = static_cast<std::size_t>(
          std::count_if(descs.begin(), descs.end(), [](const auto& d) { return d.degenerate; }));
      done[i] = 1;
    });
  });
  DescribeSummary out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out.images += done[i];
    out.regions += regions[i];
    out.degenerate += degenerate[i];
  }
  errors.drain_into(out.errors);
  return out;
}

IndexSummary cmd_index(const DatasetManifest& manifest, const fs::path& region_dir,
                       const fs::path& index_path) {
  IndexSummary out;
  std::vector<ImageDescriptors> images;
  images.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    ImageDescriptors img;
    img.image_id = e.image_id;
    try {
      img.regions = read_regions_file(region_dir / (safe_name(e.image_id) + ".json"));
    } catch (const Error& err) {
      out.errors.push_back({e.image_id, err.what()});
    }
    images.push_back(std::move(img));
  }
  const DescriptorIndex index = build_index(images);
  if (index_path.has_parent_path()) fs::create_directories(index_path.parent_path());
  index.save(index_path);
  out.images = index.image_count();
  out.rows = index.row_count();
  out.dim_d = index.dim();
  return out;
}

SearchSummary cmd_search(const fs::path& index_path, const std::vector<QuerySpec>& queries,
                         const RunConfig& config, const fs::path& rankings_path) {
  config.validate();
  const DescriptorIndex index = DescriptorIndex::load(index_path);
  const std::size_t k = std::max<std::size_t>(1, config.k == 0 ? index.image_count() : config.k);
  SearchSummary out;
  out.rankings.resize(queries.size());
  SlotErrors errors(queries.size());
  parallel_for(queries.size(), config.threads, [&](std::size_t i) {
    const QuerySpec& q = queries[i];
    out.rankings[i].query_id = q.query_id;
    guarded(errors, i, q.query_id, [&] {
      const DescriptorMap map = read_descriptor_map(q.descriptor_path);
      const RegionDescriptor d = pool_query(map, q.bbox, config.pool);
      if (d.degenerate) throw ValidationError("query descriptor pooled to zero");
      out.rankings[i].result = config.rank_mode == RankMode::search
                                   ? search(index, d.vector, k)
                                   : image_retrieval_rank(index, d.vector, k);
    });
  });
  errors.drain_into(out.errors);
  if (rankings_path.has_parent_path()) fs::create_directories(rankings_path.parent_path());
  write_rankings(out.rankings, rankings_path);
  return out;
}

EvalReport cmd_eval(const DatasetManifest& manifest, const std::vector<QueryRanking>& rankings,
                    const RunConfig& config, const fs::path& region_dir) {
  config.validate();
  const auto truth = ground_truth_from_manifest(manifest);
  EvalReport report = evaluate(rankings, truth);
  if (rankings.empty()) report.notes.push_back("no queries were given");
  if (region_dir.empty()) return report;

  std::vector<std::vector<BBox>> proposals;
  std::vector<std::vector<BBox>> gt;
  std::size_t missing = 0;
  for (const auto& e : manifest.entries) {
    std::vector<BBox> boxes;
    for (const auto& g : e.ground_truth) {
      if (g.relevant && !g.bbox.empty()) boxes.push_back(g.bbox);
    }
    if (boxes.empty()) continue;
    std::vector<BBox> props;
    try {
      for (const auto& r : read_regions_file(region_dir / (safe_name(e.image_id) + ".json"))) {
        props.push_back(r.bbox);
      }
    } catch (const Error&) {
      ++missing;
    }
    proposals.push_back(std::move(props));
    gt.push_back(std::move(boxes));
  }
  report.recall_curve = recall_at_iou(proposals, gt, config.recall_thresholds, config.match);
  if (missing > 0) {
    report.notes.push_back(std::to_string(missing) +
                           " images had no region file; counted with zero proposals");
  }
  return report;
}

PipelineSummary cmd_pipeline(const DatasetManifest& manifest, const std::vector<QuerySpec>& queries,
                             const RunConfig& config, const fs::path& work_dir,
                             bool compare_filter) {
  config.validate();
  const fs::path hier_dir = work_dir / "hierarchies";
  const fs::path region_dir = work_dir / "regions";
  const fs::path index_path = work_dir / "index.cix";
  const fs::path rankings_path = work_dir / "rankings.jsonl";
  PipelineSummary s;
  s.decompose = stage("decompose", [&] { return cmd_decompose(manifest, config, hier_dir); });
  s.describe =
      stage("describe", [&] { return cmd_describe(manifest, config, hier_dir, region_dir); });
  s.index = stage("index", [&] { return cmd_index(manifest, region_dir, index_path); });
  s.features = s.index.rows;
  s.search = stage("search", [&] { return cmd_search(index_path, queries, config, rankings_path); });
  s.report = stage("eval", [&] { return cmd_eval(manifest, s.search.rankings, config, region_dir); });

  if (compare_filter) {
    RunConfig other = config;
    const bool filtered = config.decompose.tau2 >= 0.0;
    other.decompose.tau2 = filtered ? -1.0 : DecomposeParams{}.tau2;
    const DecomposeSummary alt = stage("decompose (comparison)", [&] {
      return cmd_decompose(manifest, other, work_dir / "hierarchies_comparison");
    });
    s.compared = true;
    s.features_filtered = filtered ? s.decompose.emitted_total() : alt.emitted_total();
    s.features_unfiltered = filtered ? alt.emitted_total() : s.decompose.emitted_total();
  }
  write_text(work_dir / "report.json", pipeline_report_json(s, config));
  return s;
}

std::vector<BenchRow> cmd_bench(const DatasetManifest& manifest, const RunConfig& config,
                                std::vector<ItemError>* errors) {
  config.validate();
  std::vector<BenchRow> rows;
  for (const auto& e : manifest.entries) {
    FeatureGrid grid;
    try {
      grid = read_feature_grid(e.feature_path);
    } catch (const Error& err) {
      if (errors != nullptr) errors->push_back({e.image_id, err.what()});
      continue;
    }
    BenchRow row;
    row.image_id = e.image_id;
    row.patches = grid.size();
    for (int r = 0; r < config.bench_repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Hierarchy h = decompose(grid, config.decompose, e.image_id);
      row.runs.push_back(seconds_since(t0));
      row.cuts = h.cut_count;
    }
    row.seconds = *std::min_element(row.runs.begin(), row.runs.end());
    row.seconds_per_cut = row.cuts > 0 ? row.seconds / static_cast<double>(row.cuts) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string decompose_summary_json(const DecomposeSummary& s, const RunConfig& config) {
  json images = json::array();
  double seconds = 0.0;
  std::size_t cuts = 0;
  for (const auto& r : s.rows) {
    images.push_back({{"image_id", r.image_id},
                      {"patches", r.patches},
                      {"cuts", r.cuts},
                      {"nodes", r.nodes},
                      {"emitted", r.emitted},
                      {"truncated", r.truncated},
                      {"seconds", r.seconds}});
    seconds += r.seconds;
    cuts += r.cuts;
  }
  const json doc = {
      {"format", "claid-decompose-summary-1"},
      {"images", std::move(images)},
      {"totals",
       {{"images", s.rows.size()}, {"cuts", cuts}, {"emitted", s.emitted_total()}, {"seconds", seconds}}},
      {"errors", errors_json(s.errors)},
      {"params", json::parse(config.to_json())},
  };
  return doc.dump(2) + "\n";
}

std::string pipeline_report_json(const PipelineSummary& s, const RunConfig& config) {
  json doc = json::parse(report_to_json(s.report, config.to_json()));
  doc["format"] = "claid-pipeline-1";
  doc["stages"] = {
      {"decompose",
       {{"images", s.decompose.rows.size()},
        {"emitted", s.decompose.emitted_total()},
        {"errors", errors_json(s.decompose.errors)}}},
      {"describe",
       {{"images", s.describe.images},
        {"regions", s.describe.regions},
        {"degenerate", s.describe.degenerate},
        {"errors", errors_json(s.describe.errors)}}},
      {"index",
       {{"images", s.index.images}, {"rows", s.index.rows}, {"errors", errors_json(s.index.errors)}}},
      {"search", {{"queries", s.search.rankings.size()}, {"errors", errors_json(s.search.errors)}}},
  };
  doc["features"] = s.features;
  if (s.compared) {
    doc["feature_count_comparison"] = {
        {"dummy_filter_on", s.features_filtered},
        {"dummy_filter_off", s.features_unfiltered},
        {"delta", static_cast<long long>(s.features_unfiltered) -
                      static_cast<long long>(s.features_filtered)}};
  }
  return doc.dump(2) + "\n";
}

std::string bench_json(const std::vector<BenchRow>& rows, const RunConfig& config) {
  json items = json::array();
  for (const auto& r : rows) {
    items.push_back({{"image_id", r.image_id},
                     {"patches", r.patches},
                     {"cuts", r.cuts},
                     {"seconds", r.seconds},
                     {"seconds_per_cut", r.cuts > 0 ? json(r.seconds_per_cut) : json(nullptr)},
                     {"runs", r.runs}});
  }
  const json doc = {{"format", "claid-bench-1"},
                    {"threads", 1},
                    {"images", std::move(items)},
                    {"params", json::parse(config.to_json())}};
  return doc.dump(2) + "\n";
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  char line[200];
  std::snprintf(line, sizeof line, "%-24s %8s %6s %14s %14s\n", "image", "patches", "#cut",
                "TM/image (s)", "TM/cut (s)");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %8zu %6zu %14.4f %14.4f\n", r.image_id.c_str(),
                  r.patches, r.cuts, r.seconds, r.seconds_per_cut);
    os << line;
  }
  return os.str();
}

}  // namespace claid::app
