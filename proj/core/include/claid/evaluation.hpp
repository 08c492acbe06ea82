#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "claid/geometry.hpp"
#include "claid/search_index.hpp"

namespace claid {

struct QueryGroundTruth {
  std::string query_id;
  std::set<std::string> relevant_image_ids;
  std::map<std::string, std::vector<BBox>> gt_boxes;  // image_id -> boxes
};

// Mean of precision-at-hit over relevant hits within the cutoff. The
// denominator is min(|relevant|, cutoff) with a cutoff, |relevant| without.
// Returns nullopt when the relevant set is empty.
std::optional<double> average_precision(std::span<const std::string> ranking,
                                        const std::set<std::string>& relevant,
                                        std::optional<std::size_t> cutoff = std::nullopt);

struct IouResult {
  double value = 0.0;
  bool degenerate = false;  // an input box had zero area
};

IouResult iou(const BBox& a, const BBox& b);

struct QueryRanking {
  std::string query_id;
  RankedResult result;
};

struct LocalizationReport {
  double mean_iou = 0.0;           // over every scored pair
  double pass_rate = 0.0;          // fraction of pairs with IoU >= threshold
  double mean_iou_passing = 0.0;   // mean over pairs with IoU >= threshold
  double threshold = 0.5;
  std::size_t pairs = 0;
  std::size_t passing = 0;
  std::size_t skipped_missing_gt = 0;
};

// IoU between the returned best box and the ground-truth box (best of several)
// for every relevant image retrieved in each full ranking.
LocalizationReport localization_miou(std::span<const QueryRanking> rankings,
                                     const std::map<std::string, QueryGroundTruth>& truth,
                                     double threshold = 0.5);

enum class MatchMode { maximum, greedy };

// Fraction of ground-truth boxes matched one-to-one by a proposal with
// IoU >= t, per threshold. Images are given as parallel lists.
std::vector<std::pair<double, double>> recall_at_iou(
    std::span<const std::vector<BBox>> proposals, std::span<const std::vector<BBox>> gt,
    std::span<const double> thresholds, MatchMode mode = MatchMode::maximum);

struct QueryEval {
  std::string query_id;
  bool scored = false;
  double ap_50 = 0.0;
  double ap_100 = 0.0;
  double ap_all = 0.0;
  std::size_t relevant = 0;
};

struct EvalReport {
  std::optional<double> map_50;
  std::optional<double> map_100;
  std::optional<double> map_all;
  LocalizationReport localization;
  std::vector<std::pair<double, double>> recall_curve;
  std::vector<QueryEval> per_query;
  std::size_t scored_queries = 0;
  std::size_t skipped_queries = 0;
  std::vector<std::string> notes;
};

EvalReport evaluate(std::span<const QueryRanking> rankings,
                    const std::map<std::string, QueryGroundTruth>& truth);

// Ground truth per query gathered from manifest entries.
std::map<std::string, QueryGroundTruth> ground_truth_from_manifest(const DatasetManifest& manifest);

std::string report_to_json(const EvalReport& report, const std::string& params_json = "{}");
std::string report_to_table(const EvalReport& report);

}  // namespace claid
