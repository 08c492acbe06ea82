#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "json.hpp"

#include "claid/error.hpp"
#include "claid/evaluation.hpp"
#include "oracles.hpp"

using namespace claid;

namespace {

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("i" + std::to_string(i));
  return out;
}

BBox random_box(std::mt19937_64& gen, float extent = 60.0F) {
  std::uniform_real_distribution<float> pos(0.0F, extent);
  std::uniform_real_distribution<float> size(4.0F, 30.0F);
  const float x = pos(gen);
  const float y = pos(gen);
  return {x, y, x + size(gen), y + size(gen)};
}

QueryRanking ranking_of(const std::string& qid, const std::vector<std::string>& ids,
                        const std::vector<BBox>& boxes = {}) {
  QueryRanking q;
  q.query_id = qid;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    RankedEntry e;
    e.image_id = ids[i];
    e.score = 1.0 - 0.01 * static_cast<double>(i);
    if (i < boxes.size()) e.best_bbox = boxes[i];
    q.result.entries.push_back(e);
  }
  return q;
}

}  // namespace

TEST(AveragePrecision, PerfectRanking) {
  const std::vector<std::string> r{"a", "b", "c", "d"};
  EXPECT_DOUBLE_EQ(*average_precision(r, {"a", "b"}), 1.0);
}

TEST(AveragePrecision, RelevantAtThree) {
  const std::vector<std::string> r{"x", "y", "a"};
  EXPECT_NEAR(*average_precision(r, {"a"}), 1.0 / 3.0, 1e-12);
}

TEST(AveragePrecision, AlternatingHits) {
  const std::vector<std::string> r{"a", "x", "b", "y", "c"};
  EXPECT_NEAR(*average_precision(r, {"a", "b", "c"}), (1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0, 1e-12);
}

TEST(AveragePrecision, MissingRelevantCountsAgainst) {
  const std::vector<std::string> r{"a", "x"};
  EXPECT_NEAR(*average_precision(r, {"a", "b"}), 0.5, 1e-12);
}

TEST(AveragePrecision, EmptyRelevantIsUndefined) {
  const std::vector<std::string> r{"a"};
  EXPECT_FALSE(average_precision(r, {}).has_value());
}

TEST(AveragePrecision, CutoffDenominatorIsMinOfRelevantAndCutoff) {
  auto r = names(10);
  std::set<std::string> rel{"i0", "i1", "i2", "i3", "i4"};
  EXPECT_DOUBLE_EQ(*average_precision(r, rel, 3), 1.0);
  EXPECT_DOUBLE_EQ(*average_precision(r, rel, 10), 1.0);
}

TEST(AveragePrecision, CutoffAtCorpusSizeEqualsUncut) {
  std::mt19937_64 gen(61);
  for (int t = 0; t < 50; ++t) {
    auto r = names(40);
    std::shuffle(r.begin(), r.end(), gen);
    std::set<std::string> rel;
    for (std::size_t i = 0; i < 40; ++i) {
      if (gen() % 4 == 0) rel.insert("i" + std::to_string(i));
    }
    if (rel.empty()) rel.insert("i0");
    EXPECT_NEAR(*average_precision(r, rel, 40), *average_precision(r, rel), 1e-12);
  }
}

TEST(AveragePrecision, MatchesOracle) {
  std::mt19937_64 gen(62);
  for (int t = 0; t < 200; ++t) {
    auto r = names(30);
    std::shuffle(r.begin(), r.end(), gen);
    r.resize(5 + gen() % 25);
    std::set<std::string> rel;
    for (std::size_t i = 0; i < 40; ++i) {
      if (gen() % 5 == 0) rel.insert("i" + std::to_string(i));
    }
    if (rel.empty()) continue;
    for (std::size_t cutoff : {std::size_t{3}, std::size_t{10}, std::size_t{50}}) {
      EXPECT_NEAR(*average_precision(r, rel, cutoff), oracle::average_precision(r, rel, cutoff),
                  1e-12);
    }
    EXPECT_NEAR(*average_precision(r, rel),
                oracle::average_precision(r, rel, std::numeric_limits<std::size_t>::max()), 1e-12);
  }
}

TEST(Iou, Examples) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}).value, 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}).value, 0.0);
  EXPECT_NEAR(iou({0, 0, 10, 10}, {5, 0, 15, 10}).value, 50.0 / 150.0, 1e-12);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {10, 0, 20, 10}).value, 0.0);
  const auto d = iou({0, 0, 0, 10}, {0, 0, 10, 10});
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.value, 0.0);
}

TEST(Iou, SymmetricAndMatchesOracle) {
  std::mt19937_64 gen(63);
  for (int t = 0; t < 500; ++t) {
    const auto a = random_box(gen);
    const auto b = random_box(gen);
    EXPECT_DOUBLE_EQ(iou(a, b).value, iou(b, a).value);
    EXPECT_NEAR(iou(a, b).value, oracle::iou(a, b), 1e-9);
  }
}

TEST(RecallAtIou, ProposalsEqualGroundTruth) {
  std::mt19937_64 gen(64);
  std::vector<std::vector<BBox>> gt(5);
  for (auto& g : gt) {
    for (int i = 0; i < 3; ++i) g.push_back(random_box(gen));
  }
  const std::vector<double> th{0.1, 0.5, 0.9};
  for (const auto& [t, r] : recall_at_iou(gt, gt, th)) EXPECT_DOUBLE_EQ(r, 1.0) << t;
}

TEST(RecallAtIou, NoProposals) {
  const std::vector<std::vector<BBox>> gt{{{0, 0, 5, 5}}};
  const std::vector<std::vector<BBox>> none(1);
  const std::vector<double> th{0.5};
  EXPECT_DOUBLE_EQ(recall_at_iou(none, gt, th)[0].second, 0.0);
}

TEST(RecallAtIou, OneProposalCannotMatchTwoBoxes) {
  const std::vector<std::vector<BBox>> gt{{{0, 0, 10, 10}, {0, 0, 10, 10}}};
  const std::vector<std::vector<BBox>> props{{{0, 0, 10, 10}}};
  const std::vector<double> th{0.5};
  EXPECT_DOUBLE_EQ(recall_at_iou(props, gt, th)[0].second, 0.5);
}

TEST(RecallAtIou, MaximumBeatsGreedyWhenItMust) {
  // Greedy pairs gt0 with p0 (best IoU) and leaves gt1 unmatched.
  const std::vector<std::vector<BBox>> gt{{{0, 0, 10, 10}, {4, 0, 14, 10}}};
  const std::vector<std::vector<BBox>> props{{{2, 0, 12, 10}, {-2, 0, 8, 10}}};
  const std::vector<double> th{0.55};
  EXPECT_DOUBLE_EQ(recall_at_iou(props, gt, th)[0].second, 1.0);
  EXPECT_LE(recall_at_iou(props, gt, th, MatchMode::greedy)[0].second, 1.0);
  EXPECT_EQ(oracle::greedy_matching(props[0], gt[0], 0.55) * 0.5,
            recall_at_iou(props, gt, th, MatchMode::greedy)[0].second);
}

TEST(RecallAtIou, MatchesOraclesAndIsMonotone) {
  std::mt19937_64 gen(65);
  std::vector<double> th;
  for (int i = 1; i <= 9; ++i) th.push_back(0.1 * i);
  for (int t = 0; t < 100; ++t) {
    const std::size_t images = 1 + gen() % 3;
    std::vector<std::vector<BBox>> gt(images);
    std::vector<std::vector<BBox>> props(images);
    std::size_t total = 0;
    for (std::size_t i = 0; i < images; ++i) {
      for (std::size_t j = 0, n = 1 + gen() % 4; j < n; ++j) gt[i].push_back(random_box(gen, 30));
      for (std::size_t j = 0, n = gen() % 6; j < n; ++j) props[i].push_back(random_box(gen, 30));
      total += gt[i].size();
    }
    const auto curve = recall_at_iou(props, gt, th);
    const auto greedy = recall_at_iou(props, gt, th, MatchMode::greedy);
    for (std::size_t k = 0; k < th.size(); ++k) {
      std::size_t best = 0;
      std::size_t gr = 0;
      for (std::size_t i = 0; i < images; ++i) {
        best += oracle::exhaustive_matching(props[i], gt[i], th[k]);
        gr += oracle::greedy_matching(props[i], gt[i], th[k]);
      }
      EXPECT_NEAR(curve[k].second, double(best) / double(total), 1e-12);
      EXPECT_NEAR(greedy[k].second, double(gr) / double(total), 1e-12);
      EXPECT_LE(greedy[k].second, curve[k].second + 1e-12);
      if (k > 0) EXPECT_LE(curve[k].second, curve[k - 1].second);
    }
  }
}

TEST(RecallAtIou, Preconditions) {
  const std::vector<std::vector<BBox>> one(1);
  const std::vector<std::vector<BBox>> two(2);
  const std::vector<double> th{0.5};
  EXPECT_THROW(recall_at_iou(one, two, th), ContractViolation);
  const std::vector<double> desc{0.5, 0.1};
  EXPECT_THROW(recall_at_iou(one, one, desc), ContractViolation);
}

TEST(Localization, MeanOverRelevantRetrievedImages) {
  std::map<std::string, QueryGroundTruth> truth;
  auto& q = truth["q"];
  q.query_id = "q";
  q.relevant_image_ids = {"a", "b"};
  q.gt_boxes["a"] = {{0, 0, 10, 10}};
  q.gt_boxes["b"] = {{0, 0, 10, 10}};
  const std::vector<QueryRanking> rankings{
      ranking_of("q", {"a", "x", "b"}, {{0, 0, 10, 10}, {0, 0, 1, 1}, {5, 0, 15, 10}})};
  const auto rep = localization_miou(rankings, truth);
  EXPECT_EQ(rep.pairs, 2U);
  EXPECT_NEAR(rep.mean_iou, (1.0 + 1.0 / 3.0) / 2.0, 1e-12);
  EXPECT_EQ(rep.passing, 1U);
  EXPECT_DOUBLE_EQ(rep.pass_rate, 0.5);
  EXPECT_DOUBLE_EQ(rep.mean_iou_passing, 1.0);
}

TEST(Evaluate, MapInvariantToQueryOrder) {
  std::map<std::string, QueryGroundTruth> truth;
  truth["q1"].query_id = "q1";
  truth["q1"].relevant_image_ids = {"a"};
  truth["q2"].query_id = "q2";
  truth["q2"].relevant_image_ids = {"b", "c"};
  std::vector<QueryRanking> r{ranking_of("q1", {"b", "a", "c"}), ranking_of("q2", {"b", "a", "c"})};
  const auto a = evaluate(r, truth);
  std::reverse(r.begin(), r.end());
  const auto b = evaluate(r, truth);
  ASSERT_TRUE(a.map_all.has_value());
  EXPECT_DOUBLE_EQ(*a.map_all, *b.map_all);
  EXPECT_NEAR(*a.map_all, (0.5 + (1.0 + 2.0 / 3.0) / 2.0) / 2.0, 1e-12);
  EXPECT_EQ(a.scored_queries, 2U);
}

TEST(Evaluate, QueriesWithoutRelevantAreSkippedAndNoted) {
  std::map<std::string, QueryGroundTruth> truth;
  truth["q"].query_id = "q";
  const std::vector<QueryRanking> r{ranking_of("q", {"a"})};
  const auto rep = evaluate(r, truth);
  EXPECT_FALSE(rep.map_all.has_value());
  EXPECT_EQ(rep.skipped_queries, 1U);
  EXPECT_FALSE(rep.notes.empty());
  EXPECT_TRUE(nlohmann::json::parse(report_to_json(rep))["map_all"].is_null());
}

TEST(Evaluate, GroundTruthFromManifest) {
  DatasetManifest m;
  ManifestEntry e;
  e.image_id = "a";
  e.ground_truth.push_back({"q1", {0, 0, 4, 4}, true});
  e.ground_truth.push_back({"q2", {}, false});
  m.entries.push_back(e);
  const auto truth = ground_truth_from_manifest(m);
  ASSERT_EQ(truth.size(), 2U);
  EXPECT_EQ(truth.at("q1").relevant_image_ids, std::set<std::string>{"a"});
  EXPECT_TRUE(truth.at("q2").relevant_image_ids.empty());
  EXPECT_EQ(truth.at("q1").gt_boxes.at("a").size(), 1U);
}
