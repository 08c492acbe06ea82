#include "claid/evaluation.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <sstream>

#include "json.hpp"

#include "claid/error.hpp"

namespace claid {

using json = nlohmann::json;

namespace {

// Kuhn's augmenting paths over the thresholded IoU graph.
std::size_t maximum_matching(const std::vector<std::vector<std::size_t>>& adjacency,
                             std::size_t right_count) {
  std::vector<std::size_t> match_right(right_count, SIZE_MAX);
  std::size_t matched = 0;
  for (std::size_t left = 0; left < adjacency.size(); ++left) {
    std::vector<std::uint8_t> visited(right_count, 0);
    std::function<bool(std::size_t)> augment = [&](std::size_t u) {
      for (std::size_t v : adjacency[u]) {
        if (visited[v] != 0) continue;
        visited[v] = 1;
        if (match_right[v] == SIZE_MAX || augment(match_right[v])) {
          match_right[v] = u;
          return true;
        }
      }
      return false;
    };
    if (augment(left)) ++matched;
  }
  return matched;
}

std::size_t greedy_matching(const std::vector<BBox>& proposals, const std::vector<BBox>& gt,
                            double threshold) {
  struct Pair {
    double iou;
    std::size_t g;
    std::size_t p;
  };
  std::vector<Pair> pairs;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t p = 0; p < proposals.size(); ++p) {
      const double v = iou(proposals[p], gt[g]).value;
      if (v >= threshold && v > 0.0) pairs.push_back({v, g, p});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.g != b.g) return a.g < b.g;
    return a.p < b.p;
  });
  std::vector<std::uint8_t> gt_used(gt.size(), 0);
  std::vector<std::uint8_t> prop_used(proposals.size(), 0);
  std::size_t matched = 0;
  for (const Pair& pr : pairs) {
    if (gt_used[pr.g] != 0 || prop_used[pr.p] != 0) continue;
    gt_used[pr.g] = 1;
    prop_used[pr.p] = 1;
    ++matched;
  }
  return matched;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt3(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

}  // namespace

std::optional<double> average_precision(std::span<const std::string> ranking,
                                        const std::set<std::string>& relevant,
                                        std::optional<std::size_t> cutoff) {
  if (relevant.empty()) return std::nullopt;
  const std::size_t limit = cutoff ? std::min(*cutoff, ranking.size()) : ranking.size();
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < limit; ++i) {
    if (relevant.count(ranking[i]) != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  const std::size_t denom = cutoff ? std::min(relevant.size(), *cutoff) : relevant.size();
  if (denom == 0) return 0.0;
  return sum / static_cast<double>(denom);
}

IouResult iou(const BBox& a, const BBox& b) {
  if (a.empty() || b.empty()) return {0.0, true};
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return {uni > 0.0 ? inter / uni : 0.0, false};
}

LocalizationReport localization_miou(std::span<const QueryRanking> rankings,
                                     const std::map<std::string, QueryGroundTruth>& truth,
                                     double threshold) {
  LocalizationReport rep;
  rep.threshold = threshold;
  double sum = 0.0;
  double sum_passing = 0.0;
  for (const auto& q : rankings) {
    const auto it = truth.find(q.query_id);
    if (it == truth.end()) continue;
    const QueryGroundTruth& gt = it->second;
    for (const auto& e : q.result.entries) {
      if (gt.relevant_image_ids.count(e.image_id) == 0) continue;
      const auto boxes = gt.gt_boxes.find(e.image_id);
      if (boxes == gt.gt_boxes.end() || boxes->second.empty()) {
        ++rep.skipped_missing_gt;
        continue;
      }
      double best = 0.0;
      for (const BBox& b : boxes->second) best = std::max(best, iou(e.best_bbox, b).value);
      sum += best;
      ++rep.pairs;
      if (best >= threshold) {
        ++rep.passing;
        sum_passing += best;
      }
    }
  }
  if (rep.pairs > 0) {
    rep.mean_iou = sum / static_cast<double>(rep.pairs);
    rep.pass_rate = static_cast<double>(rep.passing) / static_cast<double>(rep.pairs);
  }
  if (rep.passing > 0) rep.mean_iou_passing = sum_passing / static_cast<double>(rep.passing);
  return rep;
}

std::vector<std::pair<double, double>> recall_at_iou(std::span<const std::vector<BBox>> proposals,
                                                     std::span<const std::vector<BBox>> gt,
                                                     std::span<const double> thresholds,
                                                     MatchMode mode) {
  expects(proposals.size() == gt.size(), "recall_at_iou: per-image lists differ in length");
  expects(std::is_sorted(thresholds.begin(), thresholds.end()),
          "recall_at_iou: thresholds must be ascending");
  std::size_t total_gt = 0;
  for (const auto& g : gt) total_gt += g.size();

  // IoU tables are computed once per image and reused across thresholds.
  std::vector<std::vector<std::vector<double>>> tables(gt.size());
  for (std::size_t img = 0; img < gt.size(); ++img) {
    tables[img].assign(gt[img].size(), std::vector<double>(proposals[img].size(), 0.0));
    for (std::size_t g = 0; g < gt[img].size(); ++g) {
      for (std::size_t p = 0; p < proposals[img].size(); ++p) {
        tables[img][g][p] = iou(proposals[img][p], gt[img][g]).value;
      }
    }
  }

  std::vector<std::pair<double, double>> curve;
  for (double t : thresholds) {
    std::size_t matched = 0;
    for (std::size_t img = 0; img < gt.size(); ++img) {
      if (mode == MatchMode::greedy) {
        matched += greedy_matching(proposals[img], gt[img], t);
        continue;
      }
      std::vector<std::vector<std::size_t>> adjacency(gt[img].size());
      for (std::size_t g = 0; g < gt[img].size(); ++g) {
        for (std::size_t p = 0; p < proposals[img].size(); ++p) {
          const double v = tables[img][g][p];
          if (v >= t && v > 0.0) adjacency[g].push_back(p);
        }
      }
      matched += maximum_matching(adjacency, proposals[img].size());
    }
    const double recall =
        total_gt == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total_gt);
    curve.emplace_back(t, recall);
  }
  return curve;
}

EvalReport evaluate(std::span<const QueryRanking> rankings,
                    const std::map<std::string, QueryGroundTruth>& truth) {
  EvalReport rep;
  double s50 = 0.0;
  double s100 = 0.0;
  double sall = 0.0;
  for (const auto& q : rankings) {
    QueryEval qe;
    qe.query_id = q.query_id;
    const auto it = truth.find(q.query_id);
    std::vector<std::string> ids;
    ids.reserve(q.result.entries.size());
    for (const auto& e : q.result.entries) ids.push_back(e.image_id);
    if (it == truth.end() || it->second.relevant_image_ids.empty()) {
      ++rep.skipped_queries;
      rep.per_query.push_back(qe);
      continue;
    }
    const auto& rel = it->second.relevant_image_ids;
    qe.scored = true;
    qe.relevant = rel.size();
    qe.ap_50 = *average_precision(ids, rel, 50);
    qe.ap_100 = *average_precision(ids, rel, 100);
    qe.ap_all = *average_precision(ids, rel);
    s50 += qe.ap_50;
    s100 += qe.ap_100;
    sall += qe.ap_all;
    ++rep.scored_queries;
    rep.per_query.push_back(qe);
  }
  if (rep.scored_queries > 0) {
    const auto n = static_cast<double>(rep.scored_queries);
    rep.map_50 = s50 / n;
    rep.map_100 = s100 / n;
    rep.map_all = sall / n;
  } else {
    rep.notes.push_back("no scored queries: mAP values are undefined");
  }
  if (rep.skipped_queries > 0) {
    rep.notes.push_back(std::to_string(rep.skipped_queries) +
                        " queries skipped (no relevant images in ground truth)");
  }
  rep.localization = localization_miou(rankings, truth);
  if (rep.localization.skipped_missing_gt > 0) {
    rep.notes.push_back(std::to_string(rep.localization.skipped_missing_gt) +
                        " relevant retrievals had no ground-truth box");
  }
  return rep;
}

std::map<std::string, QueryGroundTruth> ground_truth_from_manifest(const DatasetManifest& manifest) {
  std::map<std::string, QueryGroundTruth> out;
  for (const auto& e : manifest.entries) {
    for (const auto& g : e.ground_truth) {
      QueryGroundTruth& q = out[g.query_id];
      q.query_id = g.query_id;
      if (!g.relevant) continue;
      q.relevant_image_ids.insert(e.image_id);
      if (!g.bbox.empty()) q.gt_boxes[e.image_id].push_back(g.bbox);
    }
  }
  return out;
}

std::string report_to_json(const EvalReport& r, const std::string& params_json) {
  json per_query = json::array();
  for (const auto& q : r.per_query) {
    json item = {{"query_id", q.query_id}, {"scored", q.scored}};
    if (q.scored) {
      item["ap_50"] = q.ap_50;
      item["ap_100"] = q.ap_100;
      item["ap_all"] = q.ap_all;
      item["relevant"] = q.relevant;
    }
    per_query.push_back(std::move(item));
  }
  json curve = json::array();
  for (const auto& [t, rec] : r.recall_curve) curve.push_back({{"iou", t}, {"recall", rec}});
  const auto& loc = r.localization;
  json doc = {
      {"format", "claid-eval-1"},
      {"ap_convention", "truncated AP denominator = min(|relevant|, cutoff)"},
      {"map_50", opt(r.map_50)},
      {"map_100", opt(r.map_100)},
      {"map_all", opt(r.map_all)},
      {"localization",
       {{"mean_iou", loc.mean_iou},
        {"threshold", loc.threshold},
        {"pass_rate", loc.pass_rate},
        {"mean_iou_passing", loc.mean_iou_passing},
        {"pairs", loc.pairs},
        {"passing", loc.passing},
        {"skipped_missing_gt", loc.skipped_missing_gt}}},
      {"recall_curve", std::move(curve)},
      {"scored_queries", r.scored_queries},
      {"skipped_queries", r.skipped_queries},
      {"notes", r.notes},
      {"per_query", std::move(per_query)},
      {"params", json::parse(params_json)},
  };
  return doc.dump(2) + "\n";
}

std::string report_to_table(const EvalReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %-10s %-10s %-10s %-10s %-10s\n", "mAP-50",
                "mAP-100", "mAP-all", "mIoU", "IoU>=0.5", "queries");
  os << line;
  std::snprintf(line, sizeof line, "%-10s %-10s %-10s %-10.3f %-10.3f %-10zu\n",
                fmt3(r.map_50).c_str(), fmt3(r.map_100).c_str(), fmt3(r.map_all).c_str(),
                r.localization.mean_iou, r.localization.pass_rate, r.scored_queries);
  os << line;
  if (!r.recall_curve.empty()) {
    os << "\nIoU threshold  recall\n";
    for (const auto& [t, rec] : r.recall_curve) {
      std::snprintf(line, sizeof line, "%-14.2f %.3f\n", t, rec);
      os << line;
    }
  }
  for (const auto& n : r.notes) os << "note: " << n << "\n";
  return os.str();
}

}  // namespace claid
