#include "run_config.hpp"

#include <algorithm>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"

#include "claid/error.hpp"

namespace claid::app {

using json = nlohmann::json;

void RunConfig::validate() const {
  decompose.validate();
  if (!(pool.min_cell_overlap > 0.0 && pool.min_cell_overlap <= 1.0)) {
    throw ValidationError("min_cell_overlap must lie in (0, 1]");
  }
  if (threads < 1) throw ValidationError("threads must be at least 1");
  if (bench_repeats < 1) throw ValidationError("bench_repeats must be at least 1");
  if (!std::is_sorted(recall_thresholds.begin(), recall_thresholds.end())) {
    throw ValidationError("recall_thresholds must be ascending");
  }
  for (double t : recall_thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("recall thresholds must lie in [0, 1]");
  }
}

std::string RunConfig::to_json() const {
  json doc = json::parse(decompose_params_json(decompose));
  doc["pool"] = pool.mode == PoolMode::mean ? "mean" : "max";
  doc["min_cell_overlap"] = pool.min_cell_overlap;
  doc["k"] = k;
  doc["rank_mode"] = rank_mode == RankMode::search ? "search" : "image_retrieval";
  doc["match"] = match == MatchMode::maximum ? "maximum" : "greedy";
  doc["recall_thresholds"] = recall_thresholds;
  doc["threads"] = threads;
  doc["bench_repeats"] = bench_repeats;
  doc["dummy_filter"] = decompose.tau2 >= 0.0;
  return doc.dump();
}

void bind_config_options(CLI::App& app, RunConfig& c, bool& no_dummy_filter) {
  app.set_config("--config", "", "key = value parameter file (flags override it)");
  auto& d = c.decompose;
  const std::string g = "Parameters";
  app.add_option("--tau1", d.tau1, "connectivity threshold that stops splitting")
      ->group(g)->capture_default_str();
  app.add_option("--tau2", d.tau2, "dummy-node threshold on the high-energy ratio")
      ->group(g)->capture_default_str();
  app.add_option("--alpha", d.affinity.alpha, "affinity edge threshold")
      ->group(g)->capture_default_str();
  app.add_option("--theta", d.affinity.theta_fraction, "high-energy fraction of patches")
      ->group(g)->capture_default_str();
  app.add_option("--min-region-patches", d.min_region_patches, "smallest emitted region")
      ->group(g)->capture_default_str();
  app.add_option("--min-bisect-size", d.min_bisect_size, "smallest half a split may aim for")
      ->group(g)->capture_default_str();
  app.add_option("--max-nodes", d.max_nodes, "hierarchy size cap per image")
      ->group(g)->capture_default_str();
  app.add_option("--connectivity", d.connectivity, "grid adjacency for region splitting")
      ->group(g)
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, GridAdjacency>{{"4", GridAdjacency::four},
                                               {"8", GridAdjacency::eight}}))
      ->default_str("4");
  app.add_flag("--seeds-follow-prose", d.seeds_follow_prose,
               "swap the roles of the two bisection seeds")
      ->group(g);
  app.add_option("--init", d.ksums.init_mode, "bisection initialization")
      ->group(g)
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, InitMode>{{"seeded", InitMode::seeded},
                                          {"random", InitMode::random}},
          CLI::ignore_case))
      ->default_str("seeded");
  app.add_option("--max-rounds", d.ksums.max_rounds, "k-sums round limit")
      ->group(g)->capture_default_str();
  app.add_option("--seed", d.ksums.rng_seed, "random seed")->group(g)->capture_default_str();
  app.add_flag("--sample-with-replacement", d.ksums.sample_with_replacement,
               "visit points with replacement in each round")
      ->group(g);
  app.add_option("--cost-form", d.ksums.cost_form, "move-cost evaluation")
      ->group(g)
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, CostForm>{{"unit", CostForm::unit_shortcut},
                                          {"general", CostForm::general}},
          CLI::ignore_case))
      ->default_str("unit");
  app.add_flag("--no-dummy-filter", no_dummy_filter, "emit regions regardless of energy ratio")
      ->group(g);
  app.add_option("--pool", c.pool.mode, "descriptor pooling")
      ->group(g)
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, PoolMode>{{"mean", PoolMode::mean}, {"max", PoolMode::max}},
          CLI::ignore_case))
      ->default_str("mean");
  app.add_option("--min-cell-overlap", c.pool.min_cell_overlap,
                 "fraction of a map cell that must lie under a region")
      ->group(g)->capture_default_str();
  app.add_option("-k,--top-k", c.k, "ranking length per query (0 = all images)")
      ->group(g)->capture_default_str();
  app.add_option("--rank-mode", c.rank_mode, "ranking rule")
      ->group(g)
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, RankMode>{{"search", RankMode::search},
                                          {"image", RankMode::image_retrieval}},
          CLI::ignore_case))
      ->default_str("search");
  app.add_option("--match", c.match, "box matching for recall curves")
      ->group(g)
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, MatchMode>{{"maximum", MatchMode::maximum},
                                           {"greedy", MatchMode::greedy}},
          CLI::ignore_case))
      ->default_str("maximum");
  app.add_option("--recall-thresholds", c.recall_thresholds, "IoU thresholds, ascending")
      ->group(g)->delimiter(',');
  app.add_option("--threads", c.threads, "worker threads (1 = reference mode)")
      ->group(g)->capture_default_str();
  app.add_option("--repeats", c.bench_repeats, "bench: timed runs per image")
      ->group(g)->capture_default_str();
}

void finalize_config(RunConfig& config, bool no_dummy_filter) {
  if (no_dummy_filter) config.decompose.tau2 = -1.0;
  config.validate();
}

}  // namespace claid::app
