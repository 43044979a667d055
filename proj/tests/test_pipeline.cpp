#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "xmurf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace xmurf;
namespace pl = xmurf::pipeline;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / "xmurf_test_pipeline" / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  // Runs the CLI in the work dir; returns its exit status.
  int run(const std::string& args, const fs::path& work = {}) const {
    const auto w = work.empty() ? dir_ : work;
    const std::string cmd = std::string("\"") + XMURF_CLI_PATH + "\" --work-dir \"" + w.string() + "\" " + args +
                            " > \"" + (dir_ / "cli.log").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path write(const std::string& name, const std::string& text) const {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  // Short simulations keep the suite quick.
  fs::path quick_config(std::size_t runs = 2) const {
    return write("config.json", R"({"seed": 5, "threads": 2, "sim": {"duration": 40, "runs": )" + std::to_string(runs) +
                                     R"(}, "xmurf": {"B": 20}, "classify": {"B": 30}})");
  }

  std::string log() const { return slurp(dir_ / "cli.log"); }

  fs::path dir_;
};

}  // namespace

TEST(Config, JsonKeysAndStageSeeds) {
  const auto c = pl::config_from_json(nlohmann::json::parse(
      R"({"seed": 9, "road": {"lanes": 2}, "xmurf": {"B": 12}, "classify": {"ratio": 0.5, "seed": 77},
          "ordering": {"linkage": "complete"}, "paths": {"heatmap": "img/h.ppm"}})"));
  EXPECT_EQ(c.road.lanes, 2);
  EXPECT_EQ(c.xmurf.trees, 12u);
  EXPECT_EQ(c.classify.ratio, 0.5);
  EXPECT_EQ(c.classify_seed(), 77u);
  EXPECT_EQ(c.sim_seed(), derive_seed(9, "sim"));
  EXPECT_NE(c.sim_seed(), c.xmurf_seed());
  EXPECT_EQ(c.ordering.linkage, ordering::LinkageKind::complete);
  EXPECT_EQ(fs::path(pl::path_of(c, "heatmap")), fs::path(".") / "img/h.ppm");
  EXPECT_THROW(pl::config_from_json(nlohmann::json::parse(R"({"sed": 1})")), ConfigError);
  EXPECT_THROW(pl::config_from_json(nlohmann::json::parse(R"({"sim": {"runz": 1}})")), ConfigError);
  EXPECT_THROW(pl::config_from_json(nlohmann::json::parse(R"({"road": {"lanes": 4}})")), ConfigError);
  EXPECT_THROW(pl::config_from_json(nlohmann::json::parse(R"({"paths": {"nowhere": "x"}})")), ConfigError);
}

TEST_F(Cli, InvalidLaneCountExitsTwo) {
  write("bad.json", R"({"road": {"lanes": 4}})");
  EXPECT_EQ(run("--config \"" + (dir_ / "bad.json").string() + "\" simulate"), pl::kConfigFailure);
  EXPECT_NE(log().find("lane count"), std::string::npos) << log();
  EXPECT_EQ(run("frobnicate"), pl::kConfigFailure);
  EXPECT_EQ(run("classify --ratio -1"), pl::kConfigFailure);
}

TEST_F(Cli, EmptyTraceSetExitsThree) {
  fs::create_directories(dir_ / "traces");
  EXPECT_EQ(run("extract"), pl::kEmptyResult);
}

TEST_F(Cli, SimulateWritesOneTracePerRunAndIsReproducible) {
  const auto cfg = quick_config(3);
  ASSERT_EQ(run("--config \"" + cfg.string() + "\" simulate"), 0) << log();
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(fs::exists(dir_ / "traces" / ("trace_" + std::to_string(k) + ".jsonl")));
  EXPECT_FALSE(fs::exists(dir_ / "traces" / "trace_3.jsonl"));
  const auto first = slurp(dir_ / "traces" / "trace_1.jsonl");
  const auto again = dir_ / "again";
  ASSERT_EQ(run("--config \"" + cfg.string() + "\" simulate", again), 0);
  EXPECT_EQ(slurp(again / "traces" / "trace_1.jsonl"), first);
  ASSERT_EQ(run("--config \"" + cfg.string() + "\" --seed 6 simulate", dir_ / "other"), 0);
  EXPECT_NE(slurp(dir_ / "other" / "traces" / "trace_1.jsonl"), first);
}

TEST_F(Cli, ExtractEmitsFortySevenFeaturesWithUniqueIds) {
  const auto cfg = quick_config(3);
  ASSERT_EQ(run("--config \"" + cfg.string() + "\" simulate"), 0);
  ASSERT_EQ(run("--config \"" + cfg.string() + "\" extract"), 0) << log();
  std::ifstream in(dir_ / "scenarios.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(std::count(header.begin(), header.end(), ',') + 1, 48);
  const auto d = load_dataset((dir_ / "scenarios.csv").string());
  EXPECT_EQ(d.cols(), 47u);
  EXPECT_GT(d.rows(), 0u);
  const auto meta = nlohmann::json::parse(slurp(dir_ / "scenarios.json"));
  ASSERT_EQ(meta.size(), d.rows());
  for (std::size_t i = 0; i < d.rows(); ++i) {
    EXPECT_EQ(meta[i]["id"], d.ids[i]);
    EXPECT_LE(meta[i]["thw_min"].get<double>(), 0.8);
  }
}

TEST_F(Cli, ClusterNeedsTwoScenarios) {
  write("scenarios.csv", "id,a\nonly,1\n");
  EXPECT_EQ(run("cluster"), pl::kConfigFailure);
}

TEST_F(Cli, ClusterRespectsTreesAndSeed) {
  // M = 100 synthetic rows, B = 50
  std::ostringstream csv;
  csv << "id,a,b,c\n";
  for (int i = 0; i < 100; ++i) csv << "s" << i << "," << (i % 7) * 1.5 << "," << (i * 37 % 11) << "," << (i < 50 ? 0 : 5) + 0.01 * i << "\n";
  write("scenarios.csv", csv.str());
  ASSERT_EQ(run("--seed 1 cluster -B 50"), 0) << log();
  const auto forest = forest::load_forest((dir_ / "forest.json").string());
  EXPECT_EQ(forest.trees.size(), 50u);
  const auto p = load_matrix((dir_ / "proximity.bin").string(), MatrixFormat::raw);
  EXPECT_EQ(p.size(), 100u);
  EXPECT_NO_THROW(validate(p));
  EXPECT_EQ(load_matrix((dir_ / "proximity.csv").string(), MatrixFormat::csv), p);
  ASSERT_EQ(run("--seed 2 cluster -B 50"), 0);
  EXPECT_NE(load_matrix((dir_ / "proximity.bin").string(), MatrixFormat::raw).values, p.values);
}

TEST_F(Cli, OrderOnTwoRowsAndHeatmapSize) {
  ProximityMatrix p(std::vector<std::string>{"a", "b"});
  p.values = {1.0, 0.25, 0.25, 1.0};
  save_matrix(p, (dir_ / "proximity.bin").string(), MatrixFormat::raw);
  ASSERT_EQ(run("order"), 0) << log();
  EXPECT_EQ(ordering::load_permutation((dir_ / "permutation.json").string()), (ordering::Permutation{0, 1}));
  const auto img = slurp(dir_ / "heatmap.ppm");
  EXPECT_EQ(img.substr(0, 11), "P6\n2 2\n255\n");
  EXPECT_EQ(img.size(), 11u + 12u);
  ASSERT_EQ(run("order --linkage single --optimal-leaf-order"), 0);
  EXPECT_EQ(run("order --linkage ward"), pl::kConfigFailure);

  // corrupt one cell behind the writer's back
  const double bad[4] = {1.0, 0.25, 0.3, 1.0};
  std::ofstream(dir_ / "proximity.bin", std::ios::binary).write(reinterpret_cast<const char*>(bad), sizeof bad);
  EXPECT_EQ(run("order"), pl::kConfigFailure);
  EXPECT_NE(log().find("symmetry"), std::string::npos) << log();
}

TEST_F(Cli, CommandLineFilePathsFollowTheCallersDirectory) {
  const auto work = dir_ / "out";
  fs::create_directories(work);
  ProximityMatrix p(std::vector<std::string>{"a", "b", "c"});
  p.values = {1.0, 0.8, 0.1, 0.8, 1.0, 0.2, 0.1, 0.2, 1.0};
  save_matrix(p, (work / "proximity.bin").string(), MatrixFormat::raw);
  ASSERT_EQ(run("order", work), 0) << log();
  write("blocks.json", R"([{"start":0,"end":1,"label":"pair"}])");
  const std::string cmd = "cd \"" + dir_.string() + "\" && \"" + XMURF_CLI_PATH +
                          "\" --work-dir out render --ranges blocks.json > cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0) << log();
  EXPECT_NE(log().find("mean_similarity="), std::string::npos) << log();
}

TEST_F(Cli, FullChainThroughClassify) {
  const auto cfg = quick_config(3);
  const std::string c = "--config \"" + cfg.string() + "\" ";
  ASSERT_EQ(run(c + "simulate"), 0);
  ASSERT_EQ(run(c + "extract"), 0);
  ASSERT_EQ(run(c + "cluster"), 0) << log();
  ASSERT_EQ(run(c + "order"), 0) << log();
  const auto perm = ordering::load_permutation((dir_ / "permutation.json").string());
  const std::size_t m = perm.size();
  ASSERT_GE(m, 6u);
  EXPECT_EQ(count_lines(dir_ / "scenarios.csv"), m + 1);

  // overlapping ranges are refused
  write("ranges.json", R"([{"start":0,"end":3,"label":"x"},{"start":3,"end":5,"label":"y"}])");
  EXPECT_EQ(run(c + "label"), pl::kConfigFailure);

  const std::size_t half = m / 2;
  write("ranges.json", "[{\"start\":0,\"end\":" + std::to_string(half - 1) + ",\"label\":\"tight gap\"}," +
                           "{\"start\":" + std::to_string(half) + ",\"end\":" + std::to_string(m - 1) +
                           ",\"label\":\"open road\"}]");
  ASSERT_EQ(run(c + "render"), 0);
  EXPECT_NE(log().find("mean_similarity="), std::string::npos);
  ASSERT_EQ(run(c + "label"), 0) << log();
  const auto labeled = load_labeled_dataset((dir_ / "labeled.csv").string());
  EXPECT_EQ(labeled.rows(), m);
  EXPECT_EQ(labeled.label_set(), (std::vector<std::string>{"open road", "tight gap"}));

  ASSERT_EQ(run(c + "train"), 0) << log();
  std::size_t prev_unassigned = 0;
  for (const char* ratio : {"0", "0.25", "0.5", "0.75", "1.0"}) {
    const std::string out = std::string("pred_") + ratio + ".csv";
    ASSERT_EQ(run(c + "classify --ratio " + ratio + " --output \"" + (dir_ / out).string() + "\""), 0) << log();
    EXPECT_EQ(count_lines(dir_ / out), m + 1);
    const auto text = slurp(dir_ / out);
    std::size_t unassigned = 0;
    for (auto pos = text.find(",UNASSIGNED,"); pos != std::string::npos; pos = text.find(",UNASSIGNED,", pos + 1))
      ++unassigned;
    if (std::string(ratio) == "0") {
      EXPECT_EQ(unassigned, 0u);
    }
    EXPECT_GE(unassigned, prev_unassigned);
    prev_unassigned = unassigned;
  }
}

TEST_F(Cli, LabelWithFullCoverLabelsEveryRow) {
  Dataset d;
  d.feature_names = {"a"};
  for (int i = 0; i < 5; ++i) d.append("s" + std::to_string(i), std::vector<double>{static_cast<double>(i)});
  save_dataset(d, (dir_ / "scenarios.csv").string());
  ordering::save_permutation({4, 3, 2, 1, 0}, d.ids, (dir_ / "permutation.json").string());
  write("ranges.json", R"([{"start":0,"end":4,"label":"all"}])");
  ASSERT_EQ(run("label"), 0) << log();
  const auto l = load_labeled_dataset((dir_ / "labeled.csv").string());
  EXPECT_EQ(l.rows(), 5u);
  EXPECT_EQ(l.label_set(), std::vector<std::string>{"all"});
}
