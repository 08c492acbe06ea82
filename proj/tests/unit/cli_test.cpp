#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "claid/synthetic.hpp"
#include "commands.hpp"
#include "helpers.hpp"

using namespace claid;
using namespace claid::app;
using testing_support::TempDir;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Corpus {
  TempDir dir{"cli"};
  DatasetManifest manifest;
  std::vector<QuerySpec> queries;
  std::size_t images = 0;

  explicit Corpus(std::uint32_t n = 6) {
    synth::SynthParams p;
    p.images = n;
    p.dim = 32;
    p.objects = 8;
    p.logos = 2;
    const auto c = synth::generate_corpus(p);
    synth::write_corpus(c, dir.path());
    manifest = read_manifest(dir / "manifest.json");
    queries = read_queries(dir / "queries.json");
    images = c.images.size();
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLAID_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file() ? 1 : 0;
  return n;
}

}  // namespace

TEST(SafeName, EscapesUnsafeCharacters) {
  EXPECT_EQ(safe_name("img-01.x_y"), "img-01.x_y");
  EXPECT_EQ(safe_name("a/b c"), "a%2Fb%20c");
  EXPECT_NE(safe_name("a/b"), safe_name("a_b"));
}

TEST(CmdDecompose, OneFilePerImage) {
  Corpus c;
  RunConfig cfg;
  TempDir out("hier");
  const auto s = cmd_decompose(c.manifest, cfg, out.path());
  EXPECT_TRUE(s.errors.empty());
  EXPECT_EQ(s.rows.size(), c.images);
  EXPECT_EQ(count_files(out.path()), c.images);
  EXPECT_GT(s.emitted_total(), 0U);
}

TEST(CmdDecompose, ThreadCountDoesNotChangeOutput) {
  Corpus c;
  RunConfig one;
  RunConfig four;
  four.threads = 4;
  four.decompose.ksums.init_mode = one.decompose.ksums.init_mode = InitMode::random;
  TempDir a("a");
  TempDir b("b");
  cmd_decompose(c.manifest, one, a.path());
  cmd_decompose(c.manifest, four, b.path());
  for (const auto& e : c.manifest.entries) {
    const auto name = safe_name(e.image_id) + ".json";
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << e.image_id;
  }
}

TEST(CmdDecompose, MissingFeatureFileIsPerImageError) {
  Corpus c;
  fs::remove(c.manifest.entries[1].feature_path);
  RunConfig cfg;
  TempDir out("hier");
  const auto s = cmd_decompose(c.manifest, cfg, out.path());
  ASSERT_EQ(s.errors.size(), 1U);
  EXPECT_EQ(s.errors[0].item, c.manifest.entries[1].image_id);
  EXPECT_EQ(s.rows.size(), c.images - 1);
}

TEST(CmdPipeline, EndToEndAndDeterministic) {
  Corpus c;
  RunConfig cfg;
  TempDir w1("w1");
  TempDir w2("w2");
  const auto s1 = cmd_pipeline(c.manifest, c.queries, cfg, w1.path(), true);
  const auto s2 = cmd_pipeline(c.manifest, c.queries, cfg, w2.path(), false);
  EXPECT_EQ(s1.error_count(), 0U);
  ASSERT_TRUE(s1.report.map_all.has_value());
  EXPECT_GT(*s1.report.map_all, 0.9);
  EXPECT_TRUE(s1.compared);
  EXPECT_GE(s1.features_unfiltered, s1.features_filtered);
  EXPECT_EQ(slurp(w1 / "index.cix"), slurp(w2 / "index.cix"));
  EXPECT_EQ(slurp(w1 / "rankings.jsonl"), slurp(w2 / "rankings.jsonl"));
  const auto report = json::parse(slurp(w1 / "report.json"));
  EXPECT_TRUE(report.contains("params"));
  EXPECT_EQ(report["params"]["tau1"], cfg.decompose.tau1);
}

TEST(CmdEval, NoQueriesIsNotedNotFatal) {
  Corpus c(3);
  RunConfig cfg;
  const auto rep = cmd_eval(c.manifest, {}, cfg);
  EXPECT_FALSE(rep.map_all.has_value());
  EXPECT_FALSE(rep.notes.empty());
}

TEST(Rankings, RoundTrip) {
  QueryRanking q;
  q.query_id = "q";
  q.result.entries.push_back({"a", 0.5, 3, {1, 2, 3, 4}});
  q.result.entries.push_back({"b", 0.25, 0, {0, 0, 8, 8}});
  TempDir d("rk");
  write_rankings({q}, d / "r.jsonl");
  const auto back = read_rankings(d / "r.jsonl");
  ASSERT_EQ(back.size(), 1U);
  ASSERT_EQ(back[0].result.entries.size(), 2U);
  EXPECT_EQ(back[0].result.entries[0].best_bbox, (BBox{1, 2, 3, 4}));
  EXPECT_EQ(back[0].result.entries[1].image_id, "b");
}

TEST(CmdBench, PerCutIsTotalOverCuts) {
  Corpus c(2);
  RunConfig cfg;
  cfg.bench_repeats = 2;
  const auto rows = cmd_bench(c.manifest, cfg);
  ASSERT_EQ(rows.size(), 2U);
  for (const auto& r : rows) {
    EXPECT_EQ(r.runs.size(), 2U);
    ASSERT_GT(r.cuts, 0U);
    EXPECT_DOUBLE_EQ(r.seconds_per_cut, r.seconds / static_cast<double>(r.cuts));
  }
}

TEST(Binary, ExitCodes) {
  Corpus c(3);
  const auto m = (c.dir / "manifest.json").string();
  const auto q = (c.dir / "queries.json").string();
  TempDir out("bin");
  EXPECT_EQ(run_cli("pipeline --manifest " + m + " --queries " + q + " --out " +
                    (out / "ok").string()),
            kOk);
  EXPECT_EQ(run_cli("decompose --manifest " + m + " --out " + (out / "h").string() +
                    " --tau1 2.0"),
            kInvalid);
  EXPECT_EQ(run_cli("decompose --manifest " + (out / "missing.json").string() + " --out " +
                    (out / "h").string()),
            kInvalid);
  EXPECT_EQ(run_cli("nonsense"), kInvalid);
  fs::remove(c.manifest.entries[0].feature_path);
  EXPECT_EQ(run_cli("decompose --manifest " + m + " --out " + (out / "h2").string()), kPartial);
  EXPECT_EQ(count_files(out / "h2"), 2U + 1U);  // two hierarchies and summary.json
  EXPECT_FALSE(fs::exists(out / "h2" / (safe_name(c.manifest.entries[0].image_id) + ".json")));
}

TEST(Binary, ConfigFileAndOverride) {
  Corpus c(2);
  TempDir out("cfg");
  {
    std::ofstream f(out / "run.ini");
    f << "tau1=0.9\nmax-nodes=64\n";
  }
  const auto m = (c.dir / "manifest.json").string();
  ASSERT_EQ(run_cli("decompose --config " + (out / "run.ini").string() + " --max-nodes 32" +
                    " --manifest " + m + " --out " + (out / "h").string() + " --summary " +
                    (out / "s.json").string()),
            kOk);
  const auto s = json::parse(slurp(out / "s.json"));
  EXPECT_DOUBLE_EQ(s["params"]["tau1"].get<double>(), 0.9);
  EXPECT_EQ(s["params"]["max_nodes"].get<int>(), 32);
}

TEST(Binary, NoDummyFilterReportsDelta) {
  Corpus c(3);
  const auto m = (c.dir / "manifest.json").string();
  const auto q = (c.dir / "queries.json").string();
  TempDir out("nd");
  ASSERT_EQ(run_cli("pipeline --no-dummy-filter --manifest " + m + " --queries " + q + " --out " +
                    (out / "w").string()),
            kOk);
  const auto rep = json::parse(slurp(out / "w" / "report.json"));
  ASSERT_TRUE(rep.contains("feature_count_comparison"));
  const auto& cmp = rep["feature_count_comparison"];
  EXPECT_GE(cmp["dummy_filter_off"].get<int>(), cmp["dummy_filter_on"].get<int>());
}
