#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "dyhsl/checkpoint.hpp"
#include "dyhsl/commands.hpp"
#include "dyhsl/error.hpp"

using namespace dyhsl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

class Commands : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "dyhsl_commands";
    fs::remove_all(root_);
    RunOptions s;
    s.out = root_ / "data";
    s.nodes = 6;
    s.communities = 2;
    s.steps = 160;
    s.seed = 3;
    std::ostringstream log;
    ASSERT_EQ(cmd_synth(s, log), 0);
  }

  static RunOptions small(const std::string& out) {
    RunOptions o;
    o.data = root_ / "data" / "signals.bin";
    o.edges = root_ / "data" / "edges.csv";
    o.out = root_ / out;
    o.seed = 1;
    o.epochs = 2;
    o.batch_size = 16;
    o.lr = 0.01;
    o.d = 4;
    o.hyperedges = 3;
    o.windows = {1, 2};
    o.lp = 1;
    o.ls = 1;
    o.lookback = 4;
    o.horizon = 2;
    return o;
  }

  static fs::path root_;
};

fs::path Commands::root_;

}  // namespace

TEST_F(Commands, SynthWritesAllFiles) {
  for (const char* f : {"signals.bin", "signals.json", "edges.csv", "membership.csv"}) {
    EXPECT_TRUE(fs::exists(root_ / "data" / f)) << f;
  }
  EXPECT_EQ(line_count(root_ / "data" / "membership.csv"), 7u);
  EXPECT_EQ(fs::file_size(root_ / "data" / "signals.bin"), 160u * 6 * 4);
}

TEST_F(Commands, TrainEvalPredictExport) {
  const RunOptions o = small("run");
  std::ostringstream log;
  ASSERT_EQ(cmd_train(o, log), 0);
  for (const char* f : {"history.csv", "model.ckpt", "summary.json"}) EXPECT_TRUE(fs::exists(o.out / f)) << f;
  EXPECT_EQ(line_count(o.out / "history.csv"), 1u + 2 * 2);
  const json summary = json::parse(slurp(o.out / "summary.json"));
  ASSERT_TRUE(summary.contains("test_mae"));

  RunOptions e = o;
  e.checkpoint = o.out / "model.ckpt";
  std::ostringstream eval_log;
  ASSERT_EQ(cmd_eval(e, eval_log), 0);
  const json ev = json::parse(eval_log.str());
  EXPECT_DOUBLE_EQ(ev.at("test_mae").get<double>(), summary.at("test_mae").get<double>());
  EXPECT_TRUE(ev.contains("ha_mae"));

  // 160 steps give 155 windows: 93 train, 31 val, 31 test.
  EXPECT_EQ(ev.at("windows").get<std::size_t>(), 31u);
  e.out = root_ / "pred";
  std::ostringstream pred_log;
  ASSERT_EQ(cmd_predict(e, pred_log), 0);
  EXPECT_EQ(line_count(e.out / "predictions.csv"), 1u + 31 * 2 * 6);

  e.out = root_ / "inc";
  e.window_index = 5;
  std::ostringstream inc_log;
  ASSERT_EQ(cmd_export_incidence(e, inc_log), 0);
  EXPECT_EQ(line_count(e.out / "incidence.csv"), 1u + 4 * 6 * 3);
  e.window_index = 1000;
  EXPECT_THROW(cmd_export_incidence(e, inc_log), ConfigError);
  e.split = "nonsense";
  EXPECT_THROW(cmd_eval(e, inc_log), ConfigError);
}

TEST_F(Commands, TrainingIsReproducible) {
  std::ostringstream log;
  RunOptions a = small("rep_a"), b = small("rep_b");
  ASSERT_EQ(cmd_train(a, log), 0);
  ASSERT_EQ(cmd_train(b, log), 0);
  EXPECT_EQ(slurp(a.out / "summary.json"), slurp(b.out / "summary.json"));
  EXPECT_EQ(slurp(a.out / "history.csv"), slurp(b.out / "history.csv"));
  EXPECT_EQ(slurp(a.out / "model.ckpt"), slurp(b.out / "model.ckpt"));
}

TEST_F(Commands, InvalidConfigurationFailsBeforeReadingData) {
  std::ostringstream log;
  RunOptions o = small("bad");
  o.data = root_ / "does-not-exist.bin";
  o.windows = {1, 3};
  EXPECT_THROW(cmd_train(o, log), ConfigError);
  o.windows = {1, 2};
  o.batch_size = 0;
  EXPECT_THROW(cmd_train(o, log), ConfigError);
  o.batch_size = 4;
  o.d = 0;
  EXPECT_THROW(cmd_train(o, log), ConfigError);
  EXPECT_FALSE(fs::exists(o.out));
}

TEST_F(Commands, ExportOfZeroModelIsAllZero) {
  RunOptions o = small("zero");
  o.epochs = 0;
  std::ostringstream log;
  ASSERT_EQ(cmd_train(o, log), 0);
  Checkpoint ckpt = load_checkpoint(o.out / "model.ckpt");
  ckpt.params = zero_parameters(ckpt.config);
  save_checkpoint(o.out / "zero.ckpt", ckpt);

  RunOptions e = o;
  e.checkpoint = o.out / "zero.ckpt";
  e.out = root_ / "zero_inc";
  ASSERT_EQ(cmd_export_incidence(e, log), 0);
  std::ifstream in(e.out / "incidence.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,node,hyperedge,value");
  std::size_t rows = 0;
  for (; std::getline(in, line); ++rows) EXPECT_EQ(std::stod(line.substr(line.rfind(',') + 1)), 0.0) << line;
  EXPECT_EQ(rows, 4u * 6 * 3);
}

TEST_F(Commands, VerifyPassesAndDetectsCorruption) {
  RunOptions o;
  std::ostringstream good;
  EXPECT_EQ(cmd_verify(o, good), 0) << good.str();
  o.corrupt_grad = true;
  std::ostringstream bad;
  EXPECT_EQ(cmd_verify(o, bad), 1);
  const std::string text = bad.str();
  EXPECT_NE(text.find("FAIL gradient"), std::string::npos) << text;
  EXPECT_NE(text.find("PASS factorization"), std::string::npos) << text;
}
