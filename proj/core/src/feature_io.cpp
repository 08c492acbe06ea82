#include "claid/feature_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"

#include "binary.hpp"
#include "claid/error.hpp"

namespace claid {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kGridMagic = "CFT1";
constexpr std::string_view kMapMagic = "CDM1";

std::size_t checked_count(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  const auto n = static_cast<std::uint64_t>(a) * b * c;
  if (n > (std::uint64_t{1} << 34)) throw FormatError("grid too large");
  return static_cast<std::size_t>(n);
}

BBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw FormatError("bbox must be an array [x0, y0, x1, y1]");
  }
  return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>(), j[3].get<float>()};
}

}  // namespace

FeatureGrid FeatureGrid::from_raw(std::uint32_t grid_h, std::uint32_t grid_w,
                                  std::uint32_t dim, std::uint32_t patch_px,
                                  std::vector<float> raw) {
  if (grid_h == 0 || grid_w == 0 || dim == 0) {
    throw ValidationError("feature grid dimensions must be positive");
  }
  if (raw.size() != checked_count(grid_h, grid_w, dim)) {
    throw LengthError("feature grid data length " + std::to_string(raw.size()) +
                      " does not match " + std::to_string(grid_h) + "x" +
                      std::to_string(grid_w) + "x" + std::to_string(dim));
  }
  FeatureGrid g;
  g.grid_h_ = grid_h;
  g.grid_w_ = grid_w;
  g.dim_ = dim;
  g.patch_px_ = patch_px;
  g.raw_ = std::move(raw);
  g.unit_.resize(g.raw_.size());
  g.degenerate_.assign(g.size(), 0);

  for (std::size_t i = 0; i < g.size(); ++i) {
    const float* src = g.raw_.data() + i * dim;
    float* dst = g.unit_.data() + i * dim;
    double sq = 0.0;
    for (std::uint32_t k = 0; k < dim; ++k) sq += static_cast<double>(src[k]) * src[k];
    const double norm = std::sqrt(sq);
    if (!(norm > 1e-30) || !std::isfinite(norm)) {
      std::fill(dst, dst + dim, 0.0F);
      g.degenerate_[i] = 1;
      ++g.degenerate_count_;
      continue;
    }
    for (std::uint32_t k = 0; k < dim; ++k) {
      dst[k] = static_cast<float>(src[k] / norm);
    }
  }
  return g;
}

void DescriptorMap::validate() const {
  if (map_h == 0 || map_w == 0 || dim_d == 0) {
    throw ValidationError("descriptor map dimensions must be positive");
  }
  if (stride_px == 0) throw ValidationError("descriptor map stride_px must be positive");
  if (data.size() != checked_count(map_h, map_w, dim_d)) {
    throw LengthError("descriptor map data length does not match header");
  }
}

std::vector<std::uint8_t> encode_feature_grid(const FeatureGrid& grid) {
  detail::ByteWriter w(kGridHeaderBytes + grid.raw().size() * 4);
  w.magic(kGridMagic);
  w.u32(grid.grid_h());
  w.u32(grid.grid_w());
  w.u32(grid.dim());
  w.u32(grid.patch_px());
  w.u32(kDtypeF32);
  w.f32s(grid.raw());
  return w.take();
}

FeatureGrid decode_feature_grid(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (!r.magic(kGridMagic)) throw FormatError("bad magic: expected CFT1");
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  const std::uint32_t d = r.u32();
  const std::uint32_t patch_px = r.u32();
  const std::uint32_t dtype = r.u32();
  if (dtype != kDtypeF32) throw FormatError("unsupported dtype code " + std::to_string(dtype));
  if (h == 0 || w == 0 || d == 0) throw FormatError("feature grid header has a zero dimension");
  std::vector<float> raw(checked_count(h, w, d));
  r.f32s(raw);
  if (r.remaining() != 0) {
    throw LengthError("trailing bytes after feature grid payload: " +
                      std::to_string(r.remaining()));
  }
  return FeatureGrid::from_raw(h, w, d, patch_px, std::move(raw));
}

std::vector<std::uint8_t> encode_descriptor_map(const DescriptorMap& map) {
  map.validate();
  detail::ByteWriter w(kGridHeaderBytes + map.data.size() * 4);
  w.magic(kMapMagic);
  w.u32(map.map_h);
  w.u32(map.map_w);
  w.u32(map.dim_d);
  w.u32(map.stride_px);
  w.u32(kDtypeF32);
  w.f32s(map.data);
  return w.take();
}

DescriptorMap decode_descriptor_map(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (!r.magic(kMapMagic)) throw FormatError("bad magic: expected CDM1");
  DescriptorMap m;
  m.map_h = r.u32();
  m.map_w = r.u32();
  m.dim_d = r.u32();
  m.stride_px = r.u32();
  const std::uint32_t dtype = r.u32();
  if (dtype != kDtypeF32) throw FormatError("unsupported dtype code " + std::to_string(dtype));
  if (m.map_h == 0 || m.map_w == 0 || m.dim_d == 0 || m.stride_px == 0) {
    throw FormatError("descriptor map header has a zero field");
  }
  m.data.resize(checked_count(m.map_h, m.map_w, m.dim_d));
  r.f32s(m.data);
  if (r.remaining() != 0) throw LengthError("trailing bytes after descriptor map payload");
  return m;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_feature_grid(const FeatureGrid& grid, const fs::path& path) {
  write_file_bytes(path, encode_feature_grid(grid));
}

FeatureGrid read_feature_grid(const fs::path& path) {
  return decode_feature_grid(read_file_bytes(path));
}

void write_descriptor_map(const DescriptorMap& map, const fs::path& path) {
  write_file_bytes(path, encode_descriptor_map(map));
}

DescriptorMap read_descriptor_map(const fs::path& path) {
  return decode_descriptor_map(read_file_bytes(path));
}

const ManifestEntry* DatasetManifest::find(const std::string& image_id) const {
  for (const auto& e : entries) {
    if (e.image_id == image_id) return &e;
  }
  return nullptr;
}

DatasetManifest parse_manifest(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw FormatError("manifest must be an object with an \"entries\" array");
  }
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return path;
  };

  DatasetManifest manifest;
  std::set<std::string> seen;
  try {
    for (const auto& item : doc["entries"]) {
      ManifestEntry e;
      e.image_id = item.at("image_id").get<std::string>();
      if (!seen.insert(e.image_id).second) {
        throw ValidationError("duplicate image_id in manifest: " + e.image_id);
      }
      e.feature_path = resolve(item.at("feature_path").get<std::string>());
      e.descriptor_path = resolve(item.at("descriptor_path").get<std::string>());
      e.image_w_px = item.at("image_w_px").get<std::uint32_t>();
      e.image_h_px = item.at("image_h_px").get<std::uint32_t>();
      if (item.contains("ground_truth")) {
        for (const auto& gt : item["ground_truth"]) {
          GroundTruthItem g;
          g.query_id = gt.at("query_id").get<std::string>();
          g.bbox = box_from_json(gt.at("bbox"));
          g.relevant = gt.value("relevant", true);
          e.ground_truth.push_back(std::move(g));
        }
      }
      manifest.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest entry: ") + e.what());
  }
  return manifest;
}

DatasetManifest read_manifest(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) {
    return (base.empty() ? p : p.lexically_proximate(base)).generic_string();
  };
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json item = {{"image_id", e.image_id},
                 {"feature_path", rel(e.feature_path)},
                 {"descriptor_path", rel(e.descriptor_path)},
                 {"image_w_px", e.image_w_px},
                 {"image_h_px", e.image_h_px}};
    if (!e.ground_truth.empty()) {
      json gts = json::array();
      for (const auto& g : e.ground_truth) {
        gts.push_back({{"query_id", g.query_id},
                       {"bbox", {g.bbox.x0, g.bbox.y0, g.bbox.x1, g.bbox.y1}},
                       {"relevant", g.relevant}});
      }
      item["ground_truth"] = std::move(gts);
    }
    entries.push_back(std::move(item));
  }
  const std::string text = json{{"entries", std::move(entries)}}.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                   text.size()));
}

std::vector<QuerySpec> read_queries(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  std::vector<QuerySpec> out;
  std::set<std::string> seen;
  try {
    const json doc = json::parse(bytes.begin(), bytes.end());
    for (const auto& item : doc.at("queries")) {
      QuerySpec q;
      q.query_id = item.at("query_id").get<std::string>();
      if (!seen.insert(q.query_id).second) {
        throw ValidationError("duplicate query_id: " + q.query_id);
      }
      q.descriptor_path = item.at("descriptor_path").get<std::string>();
      if (q.descriptor_path.is_relative()) q.descriptor_path = path.parent_path() / q.descriptor_path;
      q.bbox = box_from_json(item.at("bbox"));
      q.image_w_px = item.value("image_w_px", 0U);
      q.image_h_px = item.value("image_h_px", 0U);
      out.push_back(std::move(q));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed query file: ") + e.what());
  }
  return out;
}

void write_queries(const std::vector<QuerySpec>& queries, const fs::path& path) {
  const fs::path base = path.parent_path();
  json items = json::array();
  for (const auto& q : queries) {
    items.push_back(
        {{"query_id", q.query_id},
         {"descriptor_path",
          (base.empty() ? q.descriptor_path : q.descriptor_path.lexically_proximate(base))
              .generic_string()},
         {"bbox", {q.bbox.x0, q.bbox.y0, q.bbox.x1, q.bbox.y1}},
         {"image_w_px", q.image_w_px},
         {"image_h_px", q.image_h_px}});
  }
  const std::string text = json{{"queries", std::move(items)}}.dump(2) + "\n";
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                   text.size()));
}

std::vector<std::string> missing_files(const DatasetManifest& manifest) {
  std::vector<std::string> missing;
  for (const auto& e : manifest.entries) {
    for (const auto* p : {&e.feature_path, &e.descriptor_path}) {
      if (!fs::exists(*p)) missing.push_back(e.image_id + ": " + p->string());
    }
  }
  return missing;
}

}  // namespace claid
