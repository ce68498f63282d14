#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("inis_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Runs the CLI with stdout and stderr captured to files; returns the exit status.
int cli(const std::string& args, const std::string& out_file = "/dev/null", const std::string& err_file = "/dev/null") {
  const std::string cmd = std::string(INIS_CLI_PATH) + " " + args + " >" + out_file + " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inis::SimulatedData simulate(int example, std::uint64_t seed, std::size_t p) {
  inis::SimulationSpec spec;
  spec.example = example;
  spec.seed = seed;
  spec.p = p;
  return inis::generate(spec);
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

}  // namespace

TEST(Csv, SmallFileWithHeader) {
  TempDir dir;
  write_text(dir / "a.csv", "\xEF\xBB\xBFX1, Y\n1.5,2\n-3e2,4\n");
  const inis::Dataset d = inis::read_csv(dir / "a.csv");
  EXPECT_EQ(d.names, (std::vector<std::string>{"X1"}));
  EXPECT_EQ(d.response_name, "Y");
  ASSERT_EQ(d.n(), 2u);
  EXPECT_EQ(d.covariates(1, 0), -300.0);
  EXPECT_EQ(d.response[1], 4.0);
}

TEST(Csv, WriteThenReadIsBitwiseEqual) {
  TempDir dir;
  const auto sim = simulate(3, 1, 50);
  inis::write_csv(sim.train, dir / "train.csv");
  const inis::Dataset back = inis::read_csv(dir / "train.csv");
  EXPECT_EQ(back.covariates, sim.train.covariates);
  EXPECT_EQ(back.response, sim.train.response);
  EXPECT_EQ(back.names, sim.train.names);
}

TEST(Csv, ParseErrorNamesRowAndColumn) {
  TempDir dir;
  std::ostringstream text;
  for (int j = 1; j <= 50; ++j) text << 'X' << j << ',';
  text << "Y\n";
  for (int i = 1; i <= 9; ++i) {
    for (int j = 1; j <= 50; ++j) text << (i == 7 && j == 42 ? "NA" : std::to_string(i * j)) << ',';
    text << i << '\n';
  }
  write_text(dir / "na.csv", text.str());
  try {
    inis::read_csv(dir / "na.csv");
    FAIL() << "expected an error";
  } catch (const inis::Error& e) {
    EXPECT_EQ(e.code(), inis::ErrorCode::InvalidData);
    const std::string what = e.what();
    EXPECT_NE(what.find("row 7"), std::string::npos) << what;
    EXPECT_NE(what.find("\"X42\""), std::string::npos) << what;
  }
}

TEST(Csv, StructuralErrors) {
  TempDir dir;
  write_text(dir / "ragged.csv", "X1,Y\n1,2\n3\n");
  EXPECT_THROW(inis::read_csv(dir / "ragged.csv"), inis::Error);
  write_text(dir / "noy.csv", "X1,X2\n1,2\n");
  EXPECT_THROW(inis::read_csv(dir / "noy.csv"), inis::Error);
  EXPECT_THROW(inis::read_csv(dir / "missing.csv"), inis::Error);
  write_text(dir / "inf.csv", "X1,Y\n1,inf\n");
  EXPECT_THROW(inis::read_csv(dir / "inf.csv"), inis::Error);
}

TEST(Bench, SingleReplicationHasZeroSpread) {
  inis::BenchConfig cfg;
  cfg.spec.example = 3;
  cfg.spec.p = 100;
  cfg.reps = 1;
  cfg.seed = 4;
  cfg.methods = {inis::Method::Nis, inis::Method::Ginis};
  const auto records = inis::run_bench(cfg);
  ASSERT_EQ(records.size(), 2u);
  const auto summary = inis::summarize(records, cfg.methods);
  EXPECT_EQ(*summary[0].median_mms, *records[0].mms);
  EXPECT_EQ(*summary[0].rsd_mms, 0.0);
  EXPECT_FALSE(summary[0].mean_tp.has_value());
  EXPECT_EQ(*summary[1].mean_tp, *records[1].tp);
  EXPECT_EQ(*summary[1].mean_fp, *records[1].fp);
  EXPECT_EQ(*summary[1].median_pe, *records[1].pe);
  EXPECT_EQ(*summary[1].rsd_tp, 0.0);
  EXPECT_EQ(*summary[1].rsd_pe, 0.0);
}

TEST(Bench, RecordsRespectBoundsAndDeterminism) {
  inis::BenchConfig cfg;
  cfg.spec.example = 3;
  cfg.spec.p = 80;
  cfg.reps = 3;
  cfg.seed = 9;
  cfg.methods = {inis::Method::Inis, inis::Method::Sis};
  cfg.threads = 1;
  const auto a = inis::run_bench(cfg);
  cfg.threads = 3;
  const auto b = inis::run_bench(cfg);
  std::ostringstream sa, sb;
  inis::write_replications_csv(sa, a);
  inis::write_replications_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  for (const auto& r : a) {
    ASSERT_TRUE(r.ok) << r.error;
    if (r.tp) {
      EXPECT_LE(*r.tp, 4.0);
      EXPECT_LE(*r.fp, 76.0);
      EXPECT_EQ(*r.tp + *r.fp, *r.size);
    }
  }
  // Replication streams do not depend on the replication count.
  cfg.reps = 2;
  const auto shorter = inis::run_bench(cfg);
  for (std::size_t k = 0; k < shorter.size(); ++k) {
    EXPECT_EQ(shorter[k].seed, a[k].seed);
    EXPECT_EQ(shorter[k].tp, a[k].tp);
    EXPECT_EQ(shorter[k].mms, a[k].mms);
  }
}

TEST(Bench, FailedRunsAreCountedNotAggregated) {
  std::vector<inis::ReplicationRecord> records(3);
  for (std::size_t k = 0; k < 3; ++k) {
    records[k].replication = k;
    records[k].method = inis::Method::Ginis;
    records[k].tp = double(k + 2);
    records[k].fp = 1.0;
    records[k].pe = 1.0 + double(k);
  }
  records[2].ok = false;
  records[2].error = "boom, with a comma";
  const auto s = inis::summarize(records, {inis::Method::Ginis});
  EXPECT_EQ(s[0].replications, 3u);
  EXPECT_EQ(s[0].failures, 1u);
  EXPECT_EQ(*s[0].mean_tp, 2.5);
  EXPECT_EQ(*s[0].median_pe, 1.5);
}

TEST(Bench, ReplicationCsvRoundTripsExactly) {
  std::vector<inis::ReplicationRecord> records(2);
  records[0].replication = 0;
  records[0].seed = 18446744073709551557ull;
  records[0].method = inis::Method::Nis;
  records[0].mms = 17.0;
  records[1].replication = 1;
  records[1].method = inis::Method::Inis;
  records[1].tp = 4.0;
  records[1].fp = 3.0;
  records[1].size = 7.0;
  records[1].pe = 0.1 + 0.2;
  records[1].iterations = 3;
  std::stringstream text;
  inis::write_replications_csv(text, records);
  const auto back = inis::read_replications_csv(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].seed, records[0].seed);
  EXPECT_EQ(back[0].mms, records[0].mms);
  EXPECT_FALSE(back[0].tp.has_value());
  EXPECT_EQ(back[1].pe, records[1].pe);
  EXPECT_EQ(back[1].iterations, 3u);
  std::stringstream again;
  inis::write_replications_csv(again, back);
  std::stringstream first;
  inis::write_replications_csv(first, records);
  EXPECT_EQ(again.str(), first.str());
  std::istringstream bad("replication,seed\n");
  EXPECT_THROW(inis::read_replications_csv(bad), inis::Error);
}

TEST(Bench, ReportTextLayout) {
  inis::BenchReport report;
  report.config.spec.example = 5;
  report.config.reps = 2;
  inis::MethodSummary s;
  s.method = inis::Method::Ginis;
  s.replications = 2;
  s.mean_tp = 4.0;
  s.rsd_tp = 0.0;
  s.mean_fp = 0.5;
  s.rsd_fp = 0.37;
  s.median_pe = 1.164;
  s.rsd_pe = 0.1;
  report.methods.push_back(s);
  std::ostringstream out;
  inis::write_report_text(out, report, false);
  const std::string text = out.str();
  EXPECT_NE(text.find("Example 5, n=400, p=1000"), std::string::npos) << text;
  EXPECT_NE(text.find("g-INIS"), std::string::npos);
  EXPECT_NE(text.find("4.00(0.00)"), std::string::npos);
  EXPECT_NE(text.find("1.16(0.10)"), std::string::npos);
  EXPECT_EQ(text.find("Time"), std::string::npos);
}

TEST(Bench, MethodNames) {
  EXPECT_EQ(inis::parse_method("g-inis"), inis::Method::Ginis);
  EXPECT_EQ(inis::parse_method("sis"), inis::Method::Sis);
  EXPECT_THROW(inis::parse_method("lasso"), inis::Error);
}

TEST(Cli, ScreenTopTenOnExample2FindsTruth) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --example 2 --seed 3 --p 300 --out " + (dir / "sim")), 0);
  EXPECT_EQ(slurp(dir / "sim/truth.txt"), "X1,X2,X3\n");
  ASSERT_EQ(cli("screen --data " + (dir / "sim/train.csv") + " --method nis --top 10 --out " + (dir / "s.csv"),
                dir / "stdout.txt"),
            0);
  const std::string selected = slurp(dir / "stdout.txt");
  for (const char* x : {"X1,", "X2,", "X3"}) EXPECT_NE(selected.find(x), std::string::npos) << selected;
  const auto lines = data_lines(slurp(dir / "s.csv"));
  ASSERT_EQ(lines.size(), 301u);
  EXPECT_EQ(lines[0], "rank,column,name,score,selected");
  int chosen = 0;
  for (std::size_t k = 1; k < lines.size(); ++k) chosen += lines[k].back() == '1' ? 1 : 0;
  EXPECT_EQ(chosen, 10);
}

TEST(Cli, ScreenTopAllListsTotalRanking) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --example 3 --seed 1 --p 20 --n 100 --out " + (dir / "sim")), 0);
  ASSERT_EQ(cli("screen --data " + (dir / "sim/train.csv") + " --top 20", dir / "s.csv"), 0);
  const auto lines = data_lines(slurp(dir / "s.csv"));
  ASSERT_EQ(lines.size(), 21u);
  std::vector<int> columns;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    columns.push_back(std::stoi(lines[k].substr(lines[k].find(',') + 1)));
    EXPECT_EQ(std::stoi(lines[k]), int(k));
  }
  std::sort(columns.begin(), columns.end());
  for (int j = 0; j < 20; ++j) EXPECT_EQ(columns[std::size_t(j)], j + 1);
}

TEST(Cli, ScreenConstantResponseWarnsAndSelectsNothing) {
  TempDir dir;
  std::ostringstream text;
  text << "A,B,Y\n";
  for (int i = 0; i < 30; ++i) text << i << ',' << (i * 7) % 11 << ",2\n";
  write_text(dir / "flat.csv", text.str());
  ASSERT_EQ(cli("screen --method sis --data " + (dir / "flat.csv"), dir / "out.txt", dir / "err.txt"), 0);
  EXPECT_NE(slurp(dir / "err.txt").find("warning"), std::string::npos);
  const auto lines = data_lines(slurp(dir / "out.txt"));
  ASSERT_EQ(lines.size(), 3u);
  for (std::size_t k = 1; k < 3; ++k) EXPECT_EQ(lines[k].substr(lines[k].size() - 4), ",0,0") << lines[k];
  EXPECT_NE(slurp(dir / "out.txt").find("selected=0"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(cli("screen --bogus"), 2);
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("screen --data " + (dir / "nope.csv")), 3);
  write_text(dir / "na.csv", "X1,Y\n1,2\n2,NA\n");
  EXPECT_EQ(cli("screen --data " + (dir / "na.csv"), "/dev/null", dir / "err.txt"), 3);
  const std::string err = slurp(dir / "err.txt");
  EXPECT_NE(err.find("row 2"), std::string::npos) << err;
  EXPECT_NE(err.find("\"Y\""), std::string::npos) << err;
  EXPECT_EQ(cli("simulate --example 1 --params s=25 --out " + (dir / "x")), 2);
  EXPECT_EQ(cli("simulate --example 9 --out " + (dir / "x")), 2);
  ASSERT_EQ(cli("simulate --example 3 --n 60 --p 10 --out " + (dir / "sim")), 0);
  EXPECT_EQ(cli("screen --data " + (dir / "sim/train.csv") + " --top 3 --permute-q 0.5"), 2);
  EXPECT_EQ(cli("inis --data " + (dir / "sim/train.csv") + " --q 2"), 2);
  EXPECT_EQ(cli("verify-bench --dir " + (dir / "empty")), 3);
}

TEST(Cli, NullDataGivesInterceptOnlyModel) {
  TempDir dir;
  std::mt19937_64 rng(5);
  const inis::Matrix x = testing_util::uniform_matrix(200, 50, rng);
  const inis::Vector y = inis::Vector::Constant(200, 0.25);
  inis::write_csv(inis::make_dataset(x, y), dir / "null.csv");
  ASSERT_EQ(cli("inis --data " + (dir / "null.csv") + " --trace-out " + (dir / "trace.txt") + " --model-out " +
                    (dir / "model.txt"),
                dir / "out.txt"),
            0);
  const std::string out = slurp(dir / "out.txt");
  EXPECT_NE(out.find("selected: -\n"), std::string::npos) << out;
  EXPECT_NE(out.find("iterations: 1\n"), std::string::npos) << out;
  std::ifstream model(dir / "model.txt");
  EXPECT_TRUE(inis::read_model(model).empty());
  EXPECT_NE(slurp(dir / "trace.txt").find("stop=empty-first-stage iterations=1"), std::string::npos);
}

TEST(Cli, GreedySelectsTruthOnExample5) {
  TempDir dir;
  int hits = 0;
  for (int seed : {1, 2, 3}) {
    ASSERT_EQ(cli("simulate --example 5 --seed " + std::to_string(seed) + " --out " + (dir / "sim")), 0);
    ASSERT_EQ(cli("ginis --data " + (dir / "sim/train.csv") + " --seed " + std::to_string(seed), dir / "out.txt"), 0);
    const std::string out = slurp(dir / "out.txt");
    const auto line = out.substr(0, out.find('\n'));
    bool all = true;
    for (const char* x : {"X1", "X2", "X3", "X4"}) {
      const std::string s = line + ",";
      all = all && (s.find(std::string(" ") + x + ",") != std::string::npos || s.find(std::string(",") + x + ",") != std::string::npos);
    }
    hits += all ? 1 : 0;
  }
  EXPECT_EQ(hits, 3);
}

TEST(Cli, OutputsAreByteIdenticalAcrossThreadCounts) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --example 3 --seed 8 --p 120 --out " + (dir / "sim")), 0);
  const std::string data = " --data " + (dir / "sim/train.csv") + " --seed 5";
  for (const char* threads : {"1", "3"}) {
    const std::string t(threads);
    ASSERT_EQ(cli("screen --permute-q 0.95" + data + " --threads " + t + " --out " + (dir / ("screen" + t))), 0);
    ASSERT_EQ(cli("inis" + data + " --threads " + t + " --model-out " + (dir / ("model" + t)) + " --trace-out " +
                      (dir / ("trace" + t)),
                  dir / ("stdout" + t)),
              0);
    ASSERT_EQ(cli("bench --example 3 --p 60 --reps 3 --methods nis,sis,ginis --seed 2 --threads " + t + " --out " +
                  (dir / ("bench" + t))),
              0);
  }
  for (const char* f : {"screen", "model", "trace", "stdout", "bench1/replications.csv"}) {
    (void)f;
  }
  EXPECT_EQ(slurp(dir / "screen1"), slurp(dir / "screen3"));
  EXPECT_EQ(slurp(dir / "model1"), slurp(dir / "model3"));
  EXPECT_EQ(slurp(dir / "trace1"), slurp(dir / "trace3"));
  EXPECT_EQ(slurp(dir / "stdout1"), slurp(dir / "stdout3"));
  for (const char* f : {"/replications.csv", "/report.csv", "/report.txt"}) {
    EXPECT_EQ(slurp(dir / ("bench1" + std::string(f))), slurp(dir / ("bench3" + std::string(f)))) << f;
  }
  EXPECT_FALSE(slurp(dir / "model1").empty());
}

TEST(Cli, VerifyBenchDetectsTampering) {
  TempDir dir;
  ASSERT_EQ(cli("bench --example 1 --params s=3 --p 100 --reps 2 --methods nis,sis --seed 1 --out " + (dir / "b")), 0);
  EXPECT_EQ(cli("verify-bench --dir " + (dir / "b")), 0);
  const std::string report = slurp(dir / "b/report.csv");
  EXPECT_EQ(report.substr(0, report.find('\n')), inis::kSummaryHeader);
  std::string changed = report;
  changed[changed.size() - 2] = changed[changed.size() - 2] == '0' ? '1' : '0';
  write_text(dir / "b/report.csv", changed);
  EXPECT_EQ(cli("verify-bench --dir " + (dir / "b")), 1);
}

TEST(Cli, BenchReportsOneReplicationWithZeroSpread) {
  TempDir dir;
  ASSERT_EQ(cli("bench --example 1 --params s=3 --p 100 --reps 1 --methods nis --seed 6 --out " + (dir / "b")), 0);
  const auto lines = data_lines(slurp(dir / "b/report.csv"));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[1], "nis,1,0,NA,NA,NA,NA,NA,NA,3,0");
}

TEST(Cli, PredictMatchesInProcessModel) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --example 3 --seed 2 --p 30 --out " + (dir / "sim")), 0);
  ASSERT_EQ(cli("ginis --data " + (dir / "sim/train.csv") + " --model-out " + (dir / "m.txt")), 0);
  ASSERT_EQ(cli("predict --model " + (dir / "m.txt") + " --data " + (dir / "sim/test.csv") + " --out " + (dir / "p.csv")),
            0);
  std::ifstream model_in(dir / "m.txt");
  const auto model = inis::read_model(model_in);
  const auto test = inis::read_csv(dir / "sim/test.csv");
  const inis::Vector expected = inis::predict(model, test.covariates);
  const auto lines = data_lines(slurp(dir / "p.csv"));
  ASSERT_EQ(lines.size(), std::size_t(expected.size()) + 1);
  for (Eigen::Index i = 0; i < expected.size(); ++i) {
    double v = 0.0;
    ASSERT_TRUE(inis::parse_double(lines[std::size_t(i) + 1], v));
    EXPECT_EQ(v, expected[i]);
  }
}

TEST(Cli, ConfigFileWithFlagPrecedence) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --example 3 --seed 4 --p 25 --n 100 --out " + (dir / "sim")), 0);
  write_text(dir / "cfg.ini", "[screen]\ndata=" + (dir / "sim/train.csv") + "\ntop=3\nmethod=sis\n");
  ASSERT_EQ(cli("--config " + (dir / "cfg.ini") + " screen", dir / "a.txt"), 0);
  EXPECT_NE(slurp(dir / "a.txt").find("method=sis"), std::string::npos);
  EXPECT_NE(slurp(dir / "a.txt").find("selected=3"), std::string::npos);
  ASSERT_EQ(cli("--config " + (dir / "cfg.ini") + " screen --top 5", dir / "b.txt"), 0);
  EXPECT_NE(slurp(dir / "b.txt").find("selected=5"), std::string::npos);
}

TEST(Cli, PlotDirectoryGetsOneCurvePerComponent) {
  TempDir dir;
  ASSERT_EQ(cli("simulate --example 3 --seed 6 --p 30 --out " + (dir / "sim")), 0);
  ASSERT_EQ(cli("ginis --data " + (dir / "sim/train.csv") + " --model-out " + (dir / "m.txt") + " --plot-dir " +
                (dir / "plots")),
            0);
  std::ifstream in(dir / "m.txt");
  const auto model = inis::read_model(in);
  std::size_t svgs = 0;
  for (const auto& e : fs::directory_iterator(dir / "plots")) {
    svgs += e.path().extension() == ".svg" ? 1 : 0;
    EXPECT_EQ(slurp(e.path().string()).rfind("<svg", 0), 0u);
  }
  EXPECT_EQ(svgs, model.components.size());
}
