#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "claid/evaluation.hpp"
#include "claid/hier_decomposer.hpp"
#include "claid/region_descriptor.hpp"

namespace CLI {
class App;
}

namespace claid::app {

enum class RankMode { search, image_retrieval };

// Parameters shared by every subcommand.
struct RunConfig {
  DecomposeParams decompose;
  PoolParams pool;
  std::size_t k = 0;  // 0 keeps every image in the ranking
  RankMode rank_mode = RankMode::search;
  MatchMode match = MatchMode::maximum;
  std::vector<double> recall_thresholds = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  unsigned threads = 1;
  int bench_repeats = 1;

  void validate() const;
  [[nodiscard]] std::string to_json() const;  // fully resolved, compact
};

// Registers the parameter flags and a --config key=value file option on
// `app`. Flags given on the command line override the file.
void bind_config_options(CLI::App& app, RunConfig& config, bool& no_dummy_filter);

// Applies the switches that are not plain field bindings.
void finalize_config(RunConfig& config, bool no_dummy_filter);

}  // namespace claid::app
