#include <cstdio>
#include <iostream>

#include "CLI11.hpp"

#include "claid/error.hpp"
#include "claid/synthetic.hpp"
#include "commands.hpp"

namespace {

using namespace claid;
using namespace claid::app;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void report_errors(const std::vector<ItemError>& errors) {
  for (const auto& e : errors) std::fprintf(stderr, "error: %s: %s\n", e.item.c_str(), e.message.c_str());
}

int finish(const std::vector<ItemError>& errors) {
  report_errors(errors);
  return errors.empty() ? kOk : kPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-agnostic instance region detection and search over patch features"};
  app.require_subcommand(1);
  app.fallthrough();
  RunConfig config;
  bool no_dummy_filter = false;
  bind_config_options(app, config, no_dummy_filter);

  fs::path manifest_path, queries_path, out, hier_dir, region_dir, index_path, rankings_path;
  fs::path summary_path;
  bool compare = false;

  auto* dec = app.add_subcommand("decompose", "decompose every image into a region hierarchy");
  dec->add_option("--manifest", manifest_path, "dataset manifest")->required();
  dec->add_option("--out", out, "directory for hierarchy files")->required();
  dec->add_option("--summary", summary_path, "summary JSON (default <out>/summary.json)");

  auto* des = app.add_subcommand("describe", "pool a descriptor for every emitted region");
  des->add_option("--manifest", manifest_path, "dataset manifest")->required();
  des->add_option("--hierarchies", hier_dir, "directory written by decompose")->required();
  des->add_option("--out", out, "directory for region files")->required();

  auto* idx = app.add_subcommand("index", "build the descriptor index");
  idx->add_option("--manifest", manifest_path, "dataset manifest")->required();
  idx->add_option("--regions", region_dir, "directory written by describe")->required();
  idx->add_option("--out", out, "index file (.cix); a .json sidecar is written next to it")
      ->required();

  auto* sea = app.add_subcommand("search", "rank images for every query");
  sea->add_option("--index", index_path, "index file")->required();
  sea->add_option("--queries", queries_path, "queries.json")->required();
  sea->add_option("--out", out, "rankings as JSON lines")->required();

  auto* eva = app.add_subcommand("eval", "score rankings against the manifest ground truth");
  eva->add_option("--manifest", manifest_path, "dataset manifest with ground truth")->required();
  eva->add_option("--rankings", rankings_path, "rankings written by search")->required();
  eva->add_option("--regions", region_dir, "region files, enables the recall-vs-IoU curve");
  eva->add_option("--out", out, "report JSON");

  auto* pipe = app.add_subcommand("pipeline", "decompose, describe, index, search and eval");
  pipe->add_option("--manifest", manifest_path, "dataset manifest")->required();
  pipe->add_option("--queries", queries_path, "queries.json")->required();
  pipe->add_option("--out", out, "working directory")->required();
  pipe->add_flag("--compare-filter", compare,
                 "also count emitted features under the other dummy-filter setting");

  auto* ben = app.add_subcommand("bench", "single-threaded decomposition timing");
  ben->add_option("--manifest", manifest_path, "dataset manifest")->required();
  ben->add_option("--out", out, "timing JSON");

  synth::SynthParams sp;
  auto* syn = app.add_subcommand("synth", "write a planted-instance synthetic corpus");
  syn->add_option("--out", out, "corpus directory")->required();
  syn->add_option("--images", sp.images)->capture_default_str();
  syn->add_option("--grid-h", sp.grid_h)->capture_default_str();
  syn->add_option("--grid-w", sp.grid_w)->capture_default_str();
  syn->add_option("--dim", sp.dim)->capture_default_str();
  syn->add_option("--patch-px", sp.patch_px)->capture_default_str();
  syn->add_option("--desc-dim", sp.desc_dim)->capture_default_str();
  syn->add_option("--stride-px", sp.stride_px)->capture_default_str();
  syn->add_option("--objects", sp.objects)->capture_default_str();
  syn->add_option("--logos", sp.logos)->capture_default_str();
  syn->add_option("--corpus-seed", sp.seed)->capture_default_str();
  syn->add_flag("--split-background", sp.split_background);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    finalize_config(config, no_dummy_filter);

    if (dec->parsed()) {
      const auto manifest = read_manifest(manifest_path);
      const auto s = cmd_decompose(manifest, config, out);
      write_text(summary_path.empty() ? out / "summary.json" : summary_path,
                 decompose_summary_json(s, config));
      std::printf("%-24s %6s %8s %14s\n", "image", "#cut", "emitted", "TM/image (s)");
      for (const auto& r : s.rows) {
        std::printf("%-24s %6zu %8zu %14.4f\n", r.image_id.c_str(), r.cuts, r.emitted, r.seconds);
      }
      return finish(s.errors);
    }
    if (des->parsed()) {
      const auto manifest = read_manifest(manifest_path);
      const auto s = cmd_describe(manifest, config, hier_dir, out);
      std::printf("images %zu  regions %zu  degenerate %zu\n", s.images, s.regions, s.degenerate);
      return finish(s.errors);
    }
    if (idx->parsed()) {
      const auto manifest = read_manifest(manifest_path);
      const auto s = cmd_index(manifest, region_dir, out);
      std::printf("images %zu  rows %zu  dim %u\n", s.images, s.rows, s.dim_d);
      return finish(s.errors);
    }
    if (sea->parsed()) {
      const auto s = cmd_search(index_path, read_queries(queries_path), config, out);
      std::printf("queries %zu written to %s\n", s.rankings.size(), out.string().c_str());
      return finish(s.errors);
    }
    if (eva->parsed()) {
      const auto manifest = read_manifest(manifest_path);
      const auto report = cmd_eval(manifest, read_rankings(rankings_path), config, region_dir);
      if (!out.empty()) write_text(out, report_to_json(report, config.to_json()));
      std::cout << report_to_table(report);
      return kOk;
    }
    if (pipe->parsed()) {
      const auto manifest = read_manifest(manifest_path);
      const auto queries = read_queries(queries_path);
      const auto s = cmd_pipeline(manifest, queries, config, out, compare || no_dummy_filter);
      std::cout << report_to_table(s.report);
      std::printf("features %zu\n", s.features);
      if (s.compared) {
        std::printf("#Features  dummy filter on %zu  off %zu  delta %+lld\n", s.features_filtered,
                    s.features_unfiltered,
                    static_cast<long long>(s.features_unfiltered) -
                        static_cast<long long>(s.features_filtered));
      }
      report_errors(s.decompose.errors);
      report_errors(s.describe.errors);
      report_errors(s.index.errors);
      report_errors(s.search.errors);
      return s.error_count() == 0 ? kOk : kPartial;
    }
    if (ben->parsed()) {
      const auto manifest = read_manifest(manifest_path);
      std::vector<ItemError> errors;
      const auto rows = cmd_bench(manifest, config, &errors);
      if (!out.empty()) write_text(out, bench_json(rows, config));
      std::cout << bench_table(rows);
      return finish(errors);
    }
    if (syn->parsed()) {
      const auto corpus = synth::generate_corpus(sp);
      synth::write_corpus(corpus, out);
      std::printf("wrote %zu images and %zu queries to %s\n", corpus.images.size(),
                  corpus.queries.size(), out.string().c_str());
      return kOk;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  }
  return kOk;
}
