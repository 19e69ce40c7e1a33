#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "pmd/experiment.hpp"
#include "test_support.hpp"

using namespace pmd;
using pmd::testing::vec;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pmd_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

const char* kSmallConjugate = R"([experiment]
algorithm = pmd
seed = 4

[model]
kind = conjugate_gaussian
prior_mean = 0
prior_var = 1
obs_var = 1

[data]
source = synthetic
n = 20
seed = 3
truth = 1.5

[pmd]
strategy = weighted_kde
batch_size = 5
iterations = 12
m = 60

[diagnostics]
axis1 = -4,5,200
)";

}  // namespace

TEST(DatasetIo, HeaderAndRows) {
  std::istringstream is("x\n1.0\n2.0\n");
  const Dataset d = parse_dataset(is, false);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.feature_dim(), 1u);
  EXPECT_DOUBLE_EQ(d.points(1, 0), 2.0);
}

TEST(DatasetIo, LabelledColumns) {
  std::istringstream is("0.5, -1.0, 1\n2.0,3.0,-1\n");
  const Dataset d = parse_dataset(is, true);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.feature_dim(), 2u);
  EXPECT_DOUBLE_EQ(d.points(1, 2), -1.0);
}

TEST(DatasetIo, Errors) {
  std::istringstream bad("x\n1.0\nabc\n");
  try {
    parse_dataset(bad, false, "data.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("data.csv:3"), std::string::npos) << e.what();
  }
  std::istringstream nan("1.0\nnan\n");
  EXPECT_EQ(kind_of([&] { parse_dataset(nan, false); }), ErrorKind::InvalidData);
  std::istringstream ragged("1.0,2.0\n3.0\n");
  EXPECT_EQ(kind_of([&] { parse_dataset(ragged, false); }), ErrorKind::InvalidData);
  std::istringstream empty("x\n");
  EXPECT_EQ(kind_of([&] { parse_dataset(empty, false); }), ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([] { load_dataset("/nonexistent/data.csv"); }), ErrorKind::Io);
}

TEST(DatasetIo, WriteReadRoundTrip) {
  SyntheticParams sp;
  sp.truth = vec({0.5, -1.0});
  const Dataset d = generate_synthetic("logistic", sp, 3, 50);
  std::stringstream ss;
  write_dataset_csv(ss, d);
  const Dataset back = parse_dataset(ss, true);
  EXPECT_EQ(back.points, d.points);
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticParams sp;
  sp.truth = vec({1.0, -2.0});
  const Dataset a = generate_synthetic("tied_mixture", sp, 7, 200);
  const Dataset b = generate_synthetic("tied_mixture", sp, 7, 200);
  const Dataset c = generate_synthetic("tied_mixture", sp, 8, 200);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, c.points);
}

TEST(Synthetic, MixtureMean) {
  // E[x] = theta1 + (1 - p) theta2 = 1 - 1 = 0; Var = sigma_x^2 + p (1 - p) theta2^2 = 6.25 + 1.
  SyntheticParams sp;
  sp.truth = vec({1.0, -2.0});
  const std::size_t n = 100000;
  const Dataset d = generate_synthetic("tied_mixture", sp, 1, n);
  EXPECT_LT(std::abs(d.points.col(0).mean()), 3.0 * std::sqrt(7.25 / n));
}

TEST(Synthetic, Errors) {
  SyntheticParams sp;
  sp.truth = vec({1.0, -2.0});
  EXPECT_EQ(kind_of([&] { generate_synthetic("tied_mixture", sp, 1, 0); }), ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([&] { generate_synthetic("poisson", sp, 1, 10); }), ErrorKind::InvalidParameter);
  sp.truth = vec({1.0});
  EXPECT_EQ(kind_of([&] { generate_synthetic("tied_mixture", sp, 1, 10); }), ErrorKind::InvalidParameter);
}

TEST(Config, SerializeRoundTrip) {
  const ExperimentConfig c = parse(kSmallConjugate);
  const std::string once = serialize_config(c);
  const std::string twice = serialize_config(parse(once));
  EXPECT_EQ(once, twice);
  const ExperimentConfig back = parse(once);
  EXPECT_EQ(back.seed, 4u);
  EXPECT_EQ(back.pmd.batch_size, 5u);
  EXPECT_EQ(back.data.truth, vec({1.5}));
  ASSERT_EQ(back.diagnostics.grid.size(), 1u);
  EXPECT_EQ(back.diagnostics.grid[0].n, 200u);
}

TEST(Config, ParseErrors) {
  EXPECT_EQ(kind_of([] { parse("[experiment]\nalgorithm = gibbs\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse("[pmd]\nstrategy = nope\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse("[pmd]\nbatch_size = ten\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse("[pmd]\npasses = 1.5x\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse("[diagnostics]\naxis1 = 0,1\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse("not an ini line [\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse_config_file("/nonexistent/config.ini"); }), ErrorKind::Io);
}

TEST(Config, BatchLargerThanDataRejectedBeforeRunning) {
  ExperimentConfig c = parse(kSmallConjugate);
  c.pmd.batch_size = 21;
  const fs::path dir = scratch_dir("reject");
  fs::remove_all(dir);
  EXPECT_EQ(kind_of([&] { run_experiment(c, dir); }), ErrorKind::ConfigMismatch);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Config, PassesResolveToIterations) {
  std::string text = kSmallConjugate;
  text.replace(text.find("m = 60\n"), 7, "m = 60\npasses = 2.5\n");
  ExperimentConfig c = parse(text);
  ASSERT_TRUE(c.pmd_passes.has_value());
  EXPECT_EQ(prepare_experiment(c).config.pmd.iterations, 10u);
  EXPECT_EQ(passes_to_iterations(1.0, 1000, 3), 334u);
}

TEST(Experiment, RerunIsByteIdentical) {
  const ExperimentConfig c = parse(kSmallConjugate);
  const fs::path a = scratch_dir("rerun_a");
  const fs::path b = scratch_dir("rerun_b");
  run_experiment(c, a);
  run_experiment(c, b);
  for (const char* name : {"trace.jsonl", "final_state.csv", "curves.csv", "grid.csv", "summary.json"}) {
    ASSERT_TRUE(fs::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  EXPECT_TRUE(fs::exists(a / "timing.json"));
  for (const auto& entry : fs::directory_iterator(a)) EXPECT_NE(entry.path().extension(), ".tmp");
}

TEST(Experiment, TraceRecordsAreJson) {
  const ExperimentConfig c = parse(kSmallConjugate);
  const fs::path dir = scratch_dir("trace");
  run_experiment(c, dir);
  std::ifstream is(dir / "trace.jsonl");
  std::string line;
  std::size_t last_t = 0, lines = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"t", "gamma", "m", "ess", "data_visited", "tv", "kl", "cross_entropy"})
      EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_FALSE(j.contains("wall_seconds"));
    EXPECT_GT(j["t"].get<std::size_t>(), last_t);
    last_t = j["t"].get<std::size_t>();
    ++lines;
  }
  EXPECT_GT(lines, 0u);
  EXPECT_EQ(last_t, 12u);
}

TEST(Experiment, SgldRunWritesOutputs) {
  ExperimentConfig c = parse(kSmallConjugate);
  c.algorithm = "sgld";
  c.sgld.batch_size = 5;
  c.sgld.iterations = 200;
  c.sgld.burn_in = 50;
  c.sgld.step_a = 0.01;
  const fs::path dir = scratch_dir("sgld");
  const auto result = run_experiment(c, dir);
  EXPECT_EQ(result.summary["algorithm"], "sgld");
  EXPECT_TRUE(result.summary["final"].contains("tv"));
  EXPECT_TRUE(fs::exists(dir / "final_state.csv"));
}

TEST(WriteAtomic, ReplacesContent) {
  const fs::path dir = scratch_dir("atomic");
  const fs::path file = dir / "out.txt";
  write_file_atomic(file, [](std::ostream& os) { os << "first"; });
  write_file_atomic(file, [](std::ostream& os) { os << "second"; });
  EXPECT_EQ(slurp(file), "second");
  EXPECT_FALSE(fs::exists(dir / "out.txt.tmp"));
  EXPECT_EQ(kind_of([&] { write_file_atomic(dir / "missing" / "x.txt", [](std::ostream&) {}); }), ErrorKind::Io);
}

TEST(SummarizeRuns, MedianOverSeeds) {
  const fs::path dir = scratch_dir("summary");
  const double tv[] = {0.3, 0.1, 0.2, 0.9};
  for (int i = 0; i < 4; ++i) {
    fs::create_directories(dir / ("seed_" + std::to_string(i)));
    std::ofstream os(dir / ("seed_" + std::to_string(i)) / "summary.json");
    os << R"({"final": {"tv": )" << tv[i] << R"(, "label": "x"}})";
  }
  const auto s = summarize_runs(dir);
  EXPECT_EQ(s["runs"], 4);
  EXPECT_DOUBLE_EQ(s["median"]["tv"].get<double>(), 0.25);
  EXPECT_FALSE(s["median"].contains("label"));
  EXPECT_EQ(kind_of([&] { summarize_runs(dir / "none"); }), ErrorKind::Io);
}
