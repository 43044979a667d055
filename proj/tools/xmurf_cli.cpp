// xmurf command line: simulate -> extract -> cluster -> order/render -> label -> train -> classify.
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "xmurf/pipeline.hpp"

namespace pl = xmurf::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Traffic scenario clustering with unsupervised random forests"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> work_dir;
  app.add_option("--config", config_path, "JSON pipeline config");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  app.add_option("--work-dir", work_dir, "directory for all artifacts");

  std::optional<std::size_t> runs, trees_cluster, trees_train;
  std::optional<std::string> linkage, ranges, input, output;
  std::optional<double> ratio;
  bool olo = false;

  auto* simulate = app.add_subcommand("simulate", "run seeded traffic simulations");
  simulate->add_option("--runs", runs, "number of runs");
  auto* extract = app.add_subcommand("extract", "detect scenarios and write the feature CSV");
  auto* cluster = app.add_subcommand("cluster", "fit xMURF and write the proximity matrix");
  cluster->add_option("-B,--trees", trees_cluster, "number of trees");
  auto* order = app.add_subcommand("order", "seriate the proximity matrix");
  order->add_option("--linkage", linkage, "average | single | complete");
  order->add_flag("--optimal-leaf-order", olo, "minimize adjacent dissimilarity (O(M^3))");
  auto* render = app.add_subcommand("render", "render the seriated matrix as a PPM heatmap");
  render->add_option("--ranges", ranges, "cluster ranges JSON; prints per-block mean similarity");
  auto* label = app.add_subcommand("label", "label scenarios from cluster ranges");
  label->add_option("--ranges", ranges, "cluster ranges JSON");
  auto* train = app.add_subcommand("train", "fit the classifier and its OOB thresholds");
  train->add_option("-B,--trees", trees_train, "number of trees");
  auto* classify = app.add_subcommand("classify", "classify scenarios with withdraw thresholds");
  classify->add_option("--ratio", ratio, "fraction of the class threshold to apply");
  classify->add_option("--input", input, "feature CSV to classify");
  classify->add_option("--output", output, "predictions CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pl::kConfigFailure;
  }

  try {
    pl::PipelineConfig c = config_path.empty() ? pl::PipelineConfig{} : pl::load_config(config_path);
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (work_dir) c.work_dir = *work_dir;
    if (runs) c.sim.runs = *runs;
    if (trees_cluster) c.xmurf.trees = *trees_cluster;
    if (trees_train) c.classify.trees = *trees_train;
    if (linkage) c.ordering.linkage = xmurf::ordering::linkage_kind_from_string(*linkage);
    if (olo) c.ordering.optimal_leaf_order = true;
    if (ratio) c.classify.ratio = *ratio;
    // file paths given on the command line follow the shell's cwd, not the work dir
    if (ranges) c.paths["ranges"] = std::filesystem::absolute(*ranges).string();
    if (input) c.paths["input"] = std::filesystem::absolute(*input).string();
    if (output) c.paths["predictions"] = std::filesystem::absolute(*output).string();
    c.validate();

    if (*simulate) pl::cmd_simulate(c, std::cout);
    else if (*extract) pl::cmd_extract(c, std::cout);
    else if (*cluster) pl::cmd_cluster(c, std::cout);
    else if (*order) pl::cmd_order(c, std::cout);
    else if (*render) pl::cmd_render(c, std::cout);
    else if (*label) pl::cmd_label(c, std::cout);
    else if (*train) pl::cmd_train(c, std::cout);
    else if (*classify) pl::cmd_classify(c, std::cout);
  } catch (const pl::EmptyResultError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pl::kEmptyResult;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pl::kConfigFailure;
  }
  return pl::kOk;
}
