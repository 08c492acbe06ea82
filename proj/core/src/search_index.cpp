#include "claid/search_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "json.hpp"

#include "binary.hpp"
#include "claid/error.hpp"
#include "linalg.hpp"

namespace claid {

using json = nlohmann::json;

namespace {

constexpr std::string_view kIndexMagic = "CIX1";
constexpr std::size_t kBlockRows = 4096;

struct Best {
  double score = -std::numeric_limits<double>::infinity();
  std::size_t row = std::numeric_limits<std::size_t>::max();
  bool set = false;
};

// Higher score wins; equal scores go to the lower region id.
bool improves(const DescriptorIndex& index, double score, std::size_t row, const Best& best) {
  if (!best.set) return true;
  if (score != best.score) return score > best.score;
  return index.rows()[row].region_id < index.rows()[best.row].region_id;
}

void score_block(const DescriptorIndex& index, std::span<const float> query, std::size_t begin,
                 std::size_t end, std::vector<Best>& best) {
  for (std::size_t r = begin; r < end; ++r) {
    const double s = detail::dot_exact(query, index.vector(r));
    Best& b = best[index.rows()[r].image_ordinal];
    if (improves(index, s, r, b)) b = {s, r, true};
  }
}

RankedEntry entry_for(const DescriptorIndex& index, std::size_t row, double score) {
  const IndexRow& r = index.rows()[row];
  return {index.image_ids()[r.image_ordinal], score, r.region_id, r.bbox};
}

}  // namespace

std::uint32_t DescriptorIndex::add_image(const std::string& image_id) {
  image_ids_.push_back(image_id);
  return static_cast<std::uint32_t>(image_ids_.size() - 1);
}

void DescriptorIndex::add(std::uint32_t image_ordinal, const RegionDescriptor& d) {
  expects(image_ordinal < image_ids_.size(), "index: unknown image ordinal");
  expects(!d.degenerate, "index: degenerate descriptors cannot be indexed");
  if (dim_d_ == 0) dim_d_ = static_cast<std::uint32_t>(d.vector.size());
  if (d.vector.size() != dim_d_) {
    throw ValidationError("descriptor dimension " + std::to_string(d.vector.size()) +
                          " does not match index dimension " + std::to_string(dim_d_) +
                          " (image " + image_ids_[image_ordinal] + ")");
  }
  rows_.push_back({image_ordinal, d.region_id, d.bbox});
  vectors_.insert(vectors_.end(), d.vector.begin(), d.vector.end());
}

std::vector<std::uint8_t> DescriptorIndex::encode() const {
  detail::ByteWriter w(12 + rows_.size() * (24 + 4 * static_cast<std::size_t>(dim_d_)));
  w.magic(kIndexMagic);
  w.u32(dim_d_);
  w.u32(static_cast<std::uint32_t>(rows_.size()));
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const IndexRow& r = rows_[i];
    w.u32(r.image_ordinal);
    w.u32(r.region_id);
    w.f32(r.bbox.x0);
    w.f32(r.bbox.y0);
    w.f32(r.bbox.x1);
    w.f32(r.bbox.y1);
    w.f32s(vector(i));
  }
  return w.take();
}

DescriptorIndex DescriptorIndex::decode(std::span<const std::uint8_t> bytes,
                                        std::vector<std::string> image_ids) {
  detail::ByteReader r(bytes);
  if (!r.magic(kIndexMagic)) throw FormatError("bad magic: expected CIX1");
  DescriptorIndex index;
  index.dim_d_ = r.u32();
  const std::uint32_t count = r.u32();
  index.image_ids_ = std::move(image_ids);
  index.rows_.reserve(count);
  index.vectors_.resize(static_cast<std::size_t>(count) * index.dim_d_);
  for (std::uint32_t i = 0; i < count; ++i) {
    IndexRow row;
    row.image_ordinal = r.u32();
    row.region_id = r.u32();
    row.bbox = {r.f32(), r.f32(), r.f32(), r.f32()};
    if (row.image_ordinal >= index.image_ids_.size()) {
      throw FormatError("index row refers to unknown image ordinal " +
                        std::to_string(row.image_ordinal));
    }
    r.f32s(std::span(index.vectors_).subspan(static_cast<std::size_t>(i) * index.dim_d_,
                                             index.dim_d_));
    index.rows_.push_back(row);
  }
  if (r.remaining() != 0) throw LengthError("trailing bytes after index payload");
  return index;
}

std::string DescriptorIndex::sidecar_json() const {
  json doc = {{"format", "claid-index-1"},
              {"dim_d", dim_d_},
              {"row_count", rows_.size()},
              {"image_ids", image_ids_}};
  return doc.dump(1) + "\n";
}

void DescriptorIndex::save(const std::filesystem::path& path) const {
  write_file_bytes(path, encode());
  const std::string side = sidecar_json();
  write_file_bytes(std::filesystem::path(path.string() + ".json"),
                   std::span(reinterpret_cast<const std::uint8_t*>(side.data()), side.size()));
}

DescriptorIndex DescriptorIndex::load(const std::filesystem::path& path) {
  const auto side_bytes = read_file_bytes(std::filesystem::path(path.string() + ".json"));
  std::vector<std::string> ids;
  try {
    const json side = json::parse(side_bytes.begin(), side_bytes.end());
    ids = side.at("image_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed index sidecar: ") + e.what());
  }
  return decode(read_file_bytes(path), std::move(ids));
}

DescriptorIndex build_index(std::span<const ImageDescriptors> images) {
  DescriptorIndex index;
  for (const auto& image : images) {
    const std::uint32_t ordinal = index.add_image(image.image_id);
    for (const auto& d : image.regions) {
      if (d.degenerate) continue;
      index.add(ordinal, d);
    }
  }
  return index;
}

RankedResult search(const DescriptorIndex& index, std::span<const float> query, std::size_t k,
                    unsigned threads) {
  expects(k >= 1, "search: k must be at least 1");
  RankedResult result;
  if (index.row_count() == 0) return result;
  expects(query.size() == index.dim(), "search: query dimension does not match index");

  const std::size_t blocks = (index.row_count() + kBlockRows - 1) / kBlockRows;
  std::vector<std::vector<Best>> partial(blocks, std::vector<Best>(index.image_count()));
  auto run = [&](std::size_t worker, std::size_t workers) {
    for (std::size_t b = worker; b < blocks; b += workers) {
      score_block(index, query, b * kBlockRows,
                  std::min(index.row_count(), (b + 1) * kBlockRows), partial[b]);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, blocks));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run, t, workers);
    for (auto& t : pool) t.join();
  }

  std::vector<Best> best(index.image_count());
  for (const auto& block : partial) {
    for (std::size_t img = 0; img < block.size(); ++img) {
      if (block[img].set && improves(index, block[img].score, block[img].row, best[img])) {
        best[img] = block[img];
      }
    }
  }

  for (std::size_t img = 0; img < best.size(); ++img) {
    if (best[img].set) result.entries.push_back(entry_for(index, best[img].row, best[img].score));
  }
  std::sort(result.entries.begin(), result.entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.image_id < b.image_id;
            });
  if (result.entries.size() > k) result.entries.resize(k);
  return result;
}

RankedResult image_retrieval_rank(const DescriptorIndex& index, std::span<const float> query,
                                  std::size_t k) {
  expects(k >= 1, "image_retrieval_rank: k must be at least 1");
  RankedResult result;
  if (index.row_count() == 0) return result;
  expects(query.size() == index.dim(), "image_retrieval_rank: query dimension mismatch");

  std::vector<double> scores(index.row_count());
  for (std::size_t r = 0; r < scores.size(); ++r) {
    scores[r] = detail::dot_exact(query, index.vector(r));
  }
  std::vector<std::size_t> order(index.row_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& rows = index.rows();
  const auto& ids = index.image_ids();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    const auto& ia = ids[rows[a].image_ordinal];
    const auto& ib = ids[rows[b].image_ordinal];
    if (ia != ib) return ia < ib;
    return rows[a].region_id < rows[b].region_id;
  });

  std::vector<std::uint8_t> seen(index.image_count(), 0);
  for (std::size_t r : order) {
    const std::uint32_t img = rows[r].image_ordinal;
    if (seen[img] != 0) continue;
    seen[img] = 1;
    result.entries.push_back(entry_for(index, r, scores[r]));
    if (result.entries.size() == k) break;
  }
  return result;
}

std::string ranking_json_lines(const std::string& query_id, const RankedResult& result) {
  std::string out;
  for (std::size_t i = 0; i < result.entries.size(); ++i) {
    const auto& e = result.entries[i];
    const json line = {{"query_id", query_id},
                       {"rank", i + 1},
                       {"image_id", e.image_id},
                       {"score", e.score},
                       {"region_id", e.best_region_id},
                       {"bbox", {e.best_bbox.x0, e.best_bbox.y0, e.best_bbox.x1, e.best_bbox.y1}}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace claid
