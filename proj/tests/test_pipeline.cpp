#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dmjc/dmjc.hpp"
#include "test_support.hpp"

using namespace dmjc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dmjc_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::invalid_argument;
}

RunConfig small_config(Method m, std::size_t views) {
  RunConfig c;
  c.method = m;
  c.clusters = 4;
  c.seed = 3;
  for (std::size_t v = 0; v < views; ++v)
    c.views.push_back({"view_" + std::to_string(v + 1) + ".csv", {8, 2}, Normalization::standardize});
  c.pretrain = {20, 64, 1e-3};
  c.joint.max_epochs = 6;
  c.hyper.max_epochs = 6;
  c.kmeans.n_init = 3;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DMJC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Csv, ParsesPlainAndHeaderedInput) {
  EXPECT_EQ(parse_csv_matrix("1,2\n3,4"), (Matrix{{1, 2}, {3, 4}}));
  EXPECT_EQ(parse_csv_matrix("a,b\n1,2\r\n3,4\n"), (Matrix{{1, 2}, {3, 4}}));
}

TEST(Csv, DistinctErrorsForBadInput) {
  EXPECT_EQ(code_of([] { parse_csv_matrix("1,2\n3,4,5"); }), Errc::ragged_rows);
  EXPECT_EQ(code_of([] { parse_csv_matrix("1,2\n3,x"); }), Errc::parse);
  EXPECT_EQ(code_of([] { parse_csv_matrix("1,2\nnan,4"); }), Errc::data_non_finite);
  EXPECT_EQ(code_of([] { load_feature_matrix("/nonexistent/file.csv"); }), Errc::io);
}

TEST(Csv, RoundTripIsExact) {
  Rng rng(1);
  const Matrix m = testkit::random_matrix(7, 3, rng);
  EXPECT_EQ(parse_csv_matrix(format_csv_matrix(m)), m);
}

TEST(Binary, HeaderLayoutIsLittleEndian) {
  const std::string bytes = encode_binary_matrix(Matrix{{1.0, -2.0, 0.5}});
  ASSERT_EQ(bytes.size(), kBinaryHeaderBytes + 3 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "DMJC");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 1);   // rows = 1
  EXPECT_EQ(static_cast<unsigned char>(bytes[14]), 3);  // cols = 3
  float second;
  std::memcpy(&second, bytes.data() + kBinaryHeaderBytes + 4, 4);
  EXPECT_EQ(second, -2.0f);
}

TEST(Binary, FileRoundTripIsBitwiseEqual) {
  Rng rng(2);
  Matrix m = testkit::random_matrix(9, 5, rng);
  for (double& x : m.values()) x = static_cast<float>(x);  // the format stores f32
  const auto dir = fresh_dir("binary");
  write_binary_matrix(dir / "m.bin", m);
  const Matrix back = load_feature_matrix(dir / "m.bin");
  EXPECT_EQ(std::memcmp(back.values().data(), m.values().data(), m.size() * sizeof(double)), 0);
}

TEST(Binary, RejectsBadMagicAndTruncation) {
  std::string bytes = encode_binary_matrix(Matrix{{1.0, 2.0}});
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { decode_binary_matrix(bad); }), Errc::bad_magic);
  EXPECT_EQ(code_of([&] { decode_binary_matrix(bytes.substr(0, bytes.size() - 1)); }), Errc::parse);
}

TEST(Labels, RoundTrip) {
  const std::vector<Label> labels{3, 0, 2, 2, 1};
  EXPECT_EQ(parse_labels(format_labels(labels)), labels);
}

TEST(Config, RoundTripThroughJson) {
  auto c = small_config(Method::dmjc_s, 2);
  c.labels_file = "labels.csv";
  c.lambda = 123.5;
  c.joint.optimizer = OptimizerKind::sgd_momentum;
  const auto back = parse_config_text(config_to_json(c).dump());
  EXPECT_EQ(back, c);
  EXPECT_EQ(config_to_json(back).dump(), config_to_json(c).dump());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(code_of([] { parse_config_text(R"({"clusters":2,"views":[],"colour":1})"); }), Errc::config);
  EXPECT_EQ(code_of([] { parse_config_text(R"({"clusters":2,"views":[]})"); }), Errc::config);
  EXPECT_EQ(code_of([] { parse_config_text("{not json"); }), Errc::config);
  EXPECT_EQ(code_of([] {
              parse_config_text(
                  R"({"clusters":2,"method":"magic","views":[{"feature_file":"a","encoder_dims":[2]}]})");
            }),
            Errc::config);
  EXPECT_EQ(code_of([] { load_config("/nonexistent/config.json"); }), Errc::config);
}

TEST(Synthetic, SingleSeparableViewIsSolvedByKmeans) {
  auto spec = SyntheticSpec::complementary(1, 3, 50);
  Rng rng(4);
  const auto d = make_synthetic(spec, rng);
  const auto km = kmeans(d.views[0], 3, rng);
  EXPECT_EQ(clustering_accuracy(km.labels, d.labels), 1.0);
}

TEST(Synthetic, SingleViewAccuracyIsCappedByMergedPair) {
  double worst_best = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto d = make_synthetic(SyntheticSpec::complementary(3, 4, 150), rng);
    double best = 0.0;
    for (const auto& v : d.views)
      best = std::max(best, clustering_accuracy(kmeans(v, 4, rng).labels, d.labels));
    worst_best = std::max(worst_best, best);
  }
  EXPECT_LE(worst_best, 0.78);
}

TEST(Synthetic, InfeasiblePlanIsRejected) {
  SyntheticSpec s;
  s.views = 2;
  s.clusters = 3;
  s.merges = {{{0, 1}}, {{0, 1}}};
  Rng rng(1);
  EXPECT_EQ(code_of([&] { make_synthetic(s, rng); }), Errc::invalid_argument);
}

TEST(Pipeline, AllViewsKmeansOnCopiedViewsMatchesSingleView) {
  Rng rng(5);
  const auto d = make_synthetic(SyntheticSpec::complementary(1, 4, 40), rng);
  auto c = small_config(Method::s_all_views, 2);
  const auto all = run_on_data(c, {d.views[0], d.views[0]});
  c.method = Method::s_view;
  const auto one = run_on_data(c, {d.views[0], d.views[0]});
  EXPECT_EQ(all.labels, one.labels);
}

TEST(Pipeline, DmjcSWithOneViewReportsLikeDec) {
  Rng rng(6);
  const auto d = make_synthetic(SyntheticSpec::complementary(1, 4, 40), rng);
  auto c = small_config(Method::dec, 1);
  const auto dec = run_on_data(c, {d.views[0]}, d.labels);
  c.method = Method::dmjc_s;
  const auto s = run_on_data(c, {d.views[0]}, d.labels);
  EXPECT_EQ(dec.labels, s.labels);
  EXPECT_EQ(dec.summary.acc, s.summary.acc);
  EXPECT_EQ(dec.summary.epochs_run, s.summary.epochs_run);
  EXPECT_NEAR(dec.summary.final_loss, s.summary.final_loss, 1e-9 * std::max(1.0, dec.summary.final_loss));
}

TEST(Pipeline, ThreeViewHistoriesHaveOneRowPerEpoch) {
  Rng rng(7);
  const auto d = make_synthetic(SyntheticSpec::complementary(3, 4, 40), rng);
  for (auto m : {Method::dmjc_s, Method::dmjc_t}) {
    const auto r = run_on_data(small_config(m, 3), d.views, d.labels);
    ASSERT_EQ(r.history.size(), r.summary.epochs_run);
    for (const auto& e : r.history) {
      EXPECT_EQ(e.view_acc.size(), 3u);
      EXPECT_TRUE(e.fused_acc.has_value());
      EXPECT_EQ(e.view_weights.size(), 3u);
    }
    const std::string csv = format_history_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "epoch,loss,w_1,w_2,w_3,acc_view_1,acc_view_2,acc_view_3,acc_fused");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')),
              r.summary.epochs_run + 1);
  }
}

TEST(Pipeline, StageTaggedErrors) {
  auto c = small_config(Method::dmjc_t, 2);
  try {
    run_on_data(c, {Matrix(10, 3), Matrix(9, 3)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("[load]", 0), 0u) << e.what();
    EXPECT_EQ(exit_code_for(e.code()), 2);
  }
}

TEST(Report, JsonRoundTripAndStableKeys) {
  RunReport r;
  r.summary.method = "dmjc_t";
  r.summary.n_samples = 4;
  r.summary.weights = {0.25, 0.75};
  r.summary.acc = 1.0;
  r.summary.nmi = 1.0;
  r.summary.ari = 1.0;
  r.labels = {0, 1, 0, 1};
  const auto j = summary_to_json(r.summary);
  EXPECT_NE(j.dump().find("\"acc\":1.0"), std::string::npos);
  EXPECT_EQ(summary_from_json(nlohmann::json::parse(j.dump())), r.summary);
  EXPECT_EQ(j.begin().key(), "method");
}

TEST(Report, EmitWritesAllFilesAndOverwrites) {
  Rng rng(8);
  const auto d = make_synthetic(SyntheticSpec::complementary(2, 3, 30), rng);
  auto c = small_config(Method::dmjc_t, 2);
  c.clusters = 3;
  const auto r = run_on_data(c, d.views, d.labels);
  const auto dir = fresh_dir("report");
  emit_report(r, dir);
  emit_report(r, dir);
  EXPECT_EQ(summary_from_json(nlohmann::json::parse(slurp(dir / kMetricsFile))), r.summary);
  EXPECT_EQ(parse_labels(slurp(dir / kLabelsFile)), r.labels);
  EXPECT_EQ(slurp(dir / kHistoryFile), format_history_csv(r));
  for (const auto& entry : fs::directory_iterator(dir))
    EXPECT_NE(entry.path().extension(), ".tmp") << entry.path();
}

TEST(Report, UnwritableDirectoryFails) {
  const auto dir = fresh_dir("unwritable");
  spit(dir / "blocker", "x");
  EXPECT_EQ(code_of([&] { emit_report(RunReport{}, dir / "blocker" / "sub"); }), Errc::io);
}

TEST(Cli, SynthRunEvalAndExitCodes) {
  const auto dir = fresh_dir("cli");
  ASSERT_EQ(run_cli("synth --views 2 --clusters 3 --n 30 --out " + (dir / "data").string() + " --seed 4"), 0);
  ASSERT_TRUE(fs::exists(dir / "data" / "config.json"));
  ASSERT_EQ(run_cli("run --config " + (dir / "data" / "config.json").string() +
                    " --max-epochs 3 --method dmjc_s"),
            0);
  EXPECT_TRUE(fs::exists(dir / "data" / "report" / "metrics.json"));
  EXPECT_EQ(run_cli("eval --pred " + (dir / "data" / "report" / "labels.csv").string() + " --truth " +
                    (dir / "data" / "labels.csv").string()),
            0);

  EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string()), 1);
  spit(dir / "bad_data.json",
       R"({"clusters":2,"views":[{"feature_file":"nope.csv","encoder_dims":[2]}]})");
  EXPECT_EQ(run_cli("run --config " + (dir / "bad_data.json").string()), 2);
  spit(dir / "bad_labels.csv", "0\n1\nx\n");
  EXPECT_EQ(run_cli("eval --pred " + (dir / "bad_labels.csv").string() + " --truth " +
                    (dir / "bad_labels.csv").string()),
            2);
  EXPECT_EQ(run_cli("frobnicate"), 1);
}

TEST(Cli, DivergenceMapsToExitCodeThree) {
  const auto dir = fresh_dir("diverge");
  // Huge features with no normalization and a large learning rate drive the
  // encoder output to overflow.
  Matrix x(20, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    x(i, 0) = (i % 2 ? 1.0 : -1.0) * 1e200;
    x(i, 1) = static_cast<double>(i) * 1e200;
  }
  write_csv_matrix(dir / "x.csv", x);
  spit(dir / "config.json",
       R"({"method":"dec","clusters":2,"views":[{"feature_file":"x.csv","encoder_dims":[4,2],"normalization":"none"}],
           "pretrain":{"epochs":2,"batch_size":8,"lr":10.0},"joint":{"max_epochs":3}})");
  EXPECT_EQ(run_cli("run --config " + (dir / "config.json").string()), 3);
}
