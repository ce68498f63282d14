// Command-line front end: screening, iterative selection, simulation export,
// benchmark runs and benchmark verification.
//
// Exit codes:
//   0  success
//   1  verify-bench found a mismatch
//   2  invalid flags or flag values
//   3  unreadable or invalid data
//   4  the selection fit did not converge (outputs are still written)
//   5  bench: more than 10% of method runs failed

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "inis/inis.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNoConvergence = 4;
constexpr int kExitBenchFailures = 5;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(const inis::Error& e) {
  switch (e.code()) {
    case inis::ErrorCode::InvalidArgument:
    case inis::ErrorCode::InvalidSpec:
    case inis::ErrorCode::InvalidDimension: return kExitUsage;
    case inis::ErrorCode::NoConvergence: return kExitNoConvergence;
    default: return kExitData;
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw inis::Error(inis::ErrorCode::InvalidData, "cannot write \"" + path + "\"");
  return out;
}

// Writes to `path`, or to stdout when it is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  auto out = open_output(path);
  fn(out);
}

bool has_zero_variance(const inis::Vector& y) {
  return y.size() == 0 || (y.array() == y[0]).all();
}

// Options shared by the screening and selection subcommands.
struct DataOptions {
  std::string data;
  std::string response = "Y";
  int dim = 5;
  int degree = 0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void add_to(CLI::App* app) {
    app->add_option("--data", data, "Input CSV file (header row, numeric cells)")->required();
    app->add_option("--response", response, "Name of the response column")->capture_default_str();
    app->add_option("--dim", dim, "Spline basis functions per covariate")->capture_default_str();
    app->add_option("--degree", degree, "Spline degree (0: min(3, dim-1))")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--threads", threads, "Worker threads (0: all cores)")->capture_default_str();
  }

  int resolved_degree() const { return degree > 0 ? degree : inis::default_degree(dim); }
};

struct ScreenOptions {
  DataOptions data;
  std::string method = "nis";
  std::optional<std::size_t> top;
  std::optional<double> permute_q;
  std::size_t permute_repeats = 1;
  std::string out;
};

int run_screen(const ScreenOptions& o) {
  const inis::Dataset data = inis::read_csv(o.data.data, o.data.response);
  data.validate();
  const std::size_t threads = inis::resolve_threads(o.data.threads);
  const bool nis = o.method == "nis";
  if (o.permute_repeats < 1) throw UsageError("--permute-repeats must be >= 1");
  const bool constant = has_zero_variance(data.response);

  inis::ScreenResult result;
  std::optional<inis::BasisDesign> design;
  if (nis) {
    design = inis::BasisDesign::build(data.covariates, o.data.dim, o.data.resolved_degree(), threads);
    if (design->degenerate_count() > 0) {
      std::cerr << "warning: " << design->degenerate_count()
                << " covariate(s) have too few distinct values or a singular basis and score 0\n";
    }
    result = inis::nis_scores(*design, data.response, threads);
  } else {
    result = inis::sis_scores(data);
  }

  if (constant) {
    std::cerr << "warning: response \"" << data.response_name
              << "\" has zero variance; all scores are 0 and nothing is selected\n";
    result.selected.clear();
    result.threshold.reset();
  } else if (o.top) {
    inis::apply_top_k(result, *o.top);
  } else {
    const double q = o.permute_q.value_or(1.0);
    if (!(q >= 0.0 && q <= 1.0)) throw UsageError("--permute-q must be in [0, 1]");
    double threshold = 0.0;
    for (std::size_t r = 0; r < o.permute_repeats; ++r) {
      const std::uint64_t seed = inis::split_seed(o.data.seed, r);
      threshold += nis ? inis::permutation_threshold(*design, data.response, q, seed, {}, threads)
                       : inis::sis_permutation_threshold(data, q, seed);
    }
    inis::apply_threshold(result, threshold / static_cast<double>(o.permute_repeats));
  }

  std::vector<char> selected(data.p(), 0);
  for (auto j : result.selected) selected[j] = 1;
  emit(o.out, [&](std::ostream& out) {
    out << "# method=" << o.method << " threshold="
        << (result.threshold ? inis::format_double(*result.threshold) : "NA")
        << " selected=" << result.selected.size() << '\n';
    out << "rank,column,name,score,selected\n";
    for (std::size_t k = 0; k < result.ranking.size(); ++k) {
      const std::size_t j = result.ranking[k];
      out << k + 1 << ',' << j + 1 << ',' << data.names[j] << ',' << inis::format_double(result.scores[j])
          << ',' << int(selected[j]) << '\n';
    }
  });
  if (!o.out.empty()) {
    std::vector<std::size_t> sorted(result.selected.begin(), result.selected.end());
    std::sort(sorted.begin(), sorted.end());
    std::cout << "selected: " << inis::format_index_set(sorted, data.names) << '\n';
  }
  return 0;
}

struct SelectOptions {
  DataOptions data;
  bool greedy = false;
  double q = 1.0;
  std::optional<std::size_t> s0;
  std::optional<std::size_t> p0;
  std::size_t folds = 5;
  std::size_t grid = 50;
  std::size_t max_iters = 10;
  std::size_t permute_repeats = 1;
  bool one_se = false;
  bool sample_split = false;
  std::string model_out;
  std::string trace_out;
  std::string plot_dir;
  std::string test;
  bool verbose = false;
};

int run_select(const SelectOptions& o) {
  const inis::Dataset data = inis::read_csv(o.data.data, o.data.response);
  data.validate();
  std::optional<inis::Dataset> test;
  if (!o.test.empty()) {
    test = inis::read_csv(o.test, o.data.response);
    test->validate();
    if (test->names != data.names) throw inis::Error(inis::ErrorCode::InvalidData, "test file columns differ");
  }
  inis::InisConfig cfg;
  cfg.dim = o.data.dim;
  cfg.degree = o.data.degree;
  cfg.q = o.q;
  cfg.s0 = o.s0;
  cfg.p0 = o.p0;
  cfg.max_iters = o.max_iters;
  cfg.n_folds = o.folds;
  cfg.grid_size = o.grid;
  cfg.one_se_rule = o.one_se;
  cfg.sample_splitting = o.sample_split;
  cfg.permutation_repeats = o.permute_repeats;
  cfg.seed = o.data.seed;
  cfg.threads = inis::resolve_threads(o.data.threads);
  if (o.verbose) cfg.diagnostics = &std::cerr;

  const inis::InisResult res = o.greedy ? inis::run_greedy_inis(data, cfg) : inis::run_inis(data, cfg);

  if (!o.model_out.empty()) {
    auto out = open_output(o.model_out);
    inis::write_model(out, res.model);
  }
  if (!o.trace_out.empty()) {
    auto out = open_output(o.trace_out);
    inis::write_trace(out, res.trace, data.names);
  }
  if (!o.plot_dir.empty()) {
    fs::create_directories(o.plot_dir);
    for (const auto& c : res.model.components) {
      auto out = open_output((fs::path(o.plot_dir) / ("component_" + c.name + ".svg")).string());
      inis::write_component_svg(out, c);
    }
  }

  const double rss = (data.response - inis::predict(res.model, data.covariates)).squaredNorm() /
                     static_cast<double>(data.n());
  std::cout << "selected: " << inis::format_index_set(res.model.indices(), data.names) << '\n';
  std::cout << "size: " << res.model.components.size() << '\n';
  std::cout << "training_rss: " << inis::format_double(rss) << '\n';
  if (test) {
    const double pe = (test->response - inis::predict(res.model, test->covariates)).squaredNorm() /
                      static_cast<double>(test->n());
    std::cout << "test_pe: " << inis::format_double(pe) << '\n';
  }
  std::cout << "iterations: " << res.trace.iterations.size() << '\n';
  std::cout << "stop: " << inis::to_string(res.trace.stop) << '\n';
  if (res.trace.stop == inis::StopReason::EmptyFirstStage) {
    std::cerr << "note: no covariate passed the first-stage threshold; intercept-only model\n";
  }
  if (res.trace.nonconverged > 0) {
    std::cerr << "warning: " << res.trace.nonconverged
              << " cross-validation fit(s) stopped at the sweep limit\n";
  }
  if (!res.trace.final_converged) {
    std::cerr << "error: the final penalized fit did not converge; best iterate written\n";
    return kExitNoConvergence;
  }
  return 0;
}

// "s=3,t=1,C2=0.5" style scenario parameters.
void apply_params(inis::SimulationSpec& spec, const std::string& params) {
  std::stringstream ss(params);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--params entry '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    double v = 0.0;
    if (!inis::parse_double(value, v)) throw UsageError("--params " + key + ": bad number '" + value + "'");
    if (key == "s") {
      spec.s = static_cast<int>(v);
    } else if (key == "t") {
      spec.t = static_cast<int>(v);
    } else if (key == "C2" || key == "c2") {
      spec.c_squared = v;
    } else if (key == "C" || key == "c") {
      spec.c_squared = v * v;
    } else {
      throw UsageError("unknown --params key '" + key + "' (use s, t, C2)");
    }
  }
}

struct SpecOptions {
  int example = 3;
  std::string params;
  std::size_t n = 400;
  std::size_t p = 1000;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app, bool with_seed) {
    app->add_option("--example", example, "Simulation design 1..6")->required()->check(CLI::Range(1, 6));
    app->add_option("--params", params, "Design parameters, e.g. s=3 or t=1 or t=0,C2=0.5");
    app->add_option("--n", n, "Training rows")->capture_default_str();
    app->add_option("--p", p, "Covariates")->capture_default_str();
    if (with_seed) app->add_option("--seed", seed, "Random seed")->capture_default_str();
  }

  inis::SimulationSpec spec() const {
    inis::SimulationSpec s;
    s.example = example;
    s.n = n;
    s.p = p;
    s.seed = seed;
    apply_params(s, params);
    s.validate();
    return s;
  }
};

struct SimulateOptions {
  SpecOptions spec;
  std::string out_dir;
};

int run_simulate(const SimulateOptions& o) {
  const inis::SimulatedData d = inis::generate(o.spec.spec());
  fs::create_directories(o.out_dir);
  inis::write_csv(d.train, (fs::path(o.out_dir) / "train.csv").string());
  inis::write_csv(d.test, (fs::path(o.out_dir) / "test.csv").string());
  auto truth = open_output((fs::path(o.out_dir) / "truth.txt").string());
  truth << inis::format_index_set(d.truth, d.train.names) << '\n';
  std::cout << "wrote " << d.train.n() << " training and " << d.test.n() << " test rows to " << o.out_dir
            << '\n';
  return 0;
}

struct BenchOptions {
  SpecOptions spec;
  std::size_t reps = 100;
  std::string methods = "nis,sis";
  std::string out_dir;
  std::size_t threads = 0;
  int dim = 5;
  int degree = 0;
  double q = 1.0;
  std::optional<std::size_t> s0;
  std::optional<std::size_t> p0;
  std::size_t folds = 5;
  std::size_t max_iters = 10;
};

int run_bench_cmd(const BenchOptions& o) {
  inis::BenchConfig cfg;
  cfg.spec = o.spec.spec();
  cfg.reps = o.reps;
  cfg.seed = o.spec.seed;
  cfg.threads = inis::resolve_threads(o.threads);
  cfg.methods.clear();
  std::stringstream ss(o.methods);
  std::string m;
  while (std::getline(ss, m, ',')) {
    if (!m.empty()) cfg.methods.push_back(inis::parse_method(m));
  }
  cfg.inis.dim = o.dim;
  cfg.inis.degree = o.degree;
  cfg.inis.q = o.q;
  cfg.inis.s0 = o.s0;
  cfg.inis.p0 = o.p0;
  cfg.inis.n_folds = o.folds;
  cfg.inis.max_iters = o.max_iters;
  cfg.inis.validate(cfg.spec.n);

  const auto records = inis::run_bench(cfg);
  inis::BenchReport report{cfg, inis::summarize(records, cfg.methods)};

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  {
    auto out = open_output((dir / "replications.csv").string());
    inis::write_replications_csv(out, records);
  }
  {
    auto out = open_output((dir / "report.csv").string());
    inis::write_summary_csv(out, report.methods);
  }
  {
    auto out = open_output((dir / "report.txt").string());
    inis::write_report_text(out, report, false);
  }
  {
    auto out = open_output((dir / "timing.csv").string());
    out << "replication,method,seconds\n";
    for (const auto& r : records) {
      out << r.replication + 1 << ',' << inis::to_string(r.method) << ',' << r.seconds << '\n';
    }
  }
  inis::write_report_text(std::cout, report, true);

  std::size_t failed = 0;
  for (const auto& r : records) {
    if (!r.ok) {
      ++failed;
      std::cerr << "replication " << r.replication + 1 << " " << inis::to_string(r.method)
                << " failed: " << r.error << '\n';
    }
  }
  if (10 * failed > records.size()) {
    std::cerr << "error: " << failed << " of " << records.size() << " runs failed\n";
    return kExitBenchFailures;
  }
  return 0;
}

int run_verify(const std::string& dir) {
  std::ifstream in((fs::path(dir) / "replications.csv").string(), std::ios::binary);
  if (!in) throw inis::Error(inis::ErrorCode::InvalidData, "cannot read replications.csv in \"" + dir + "\"");
  const auto records = inis::read_replications_csv(in);
  const std::string expected = inis::summary_csv_text(inis::summarize(records, inis::methods_in(records)));
  std::ifstream rep((fs::path(dir) / "report.csv").string(), std::ios::binary);
  if (!rep) throw inis::Error(inis::ErrorCode::InvalidData, "cannot read report.csv in \"" + dir + "\"");
  std::stringstream actual;
  actual << rep.rdbuf();
  if (actual.str() != expected) {
    std::cerr << "mismatch: report.csv differs from aggregates recomputed from replications.csv\n";
    std::cerr << "recomputed:\n" << expected;
    return kExitMismatch;
  }
  std::cout << "ok: " << records.size() << " records reproduce report.csv exactly\n";
  return 0;
}

struct PredictOptions {
  std::string model;
  std::string data;
  std::string response = "Y";
  std::string out;
};

int run_predict(const PredictOptions& o) {
  std::ifstream in(o.model, std::ios::binary);
  if (!in) throw inis::Error(inis::ErrorCode::InvalidData, "cannot read \"" + o.model + "\"");
  const inis::AdditiveModel model = inis::read_model(in);
  const inis::NumericTable table = inis::read_table(o.data);
  inis::Matrix x = table.values;
  std::optional<inis::Vector> y;
  for (std::size_t j = 0; j < table.names.size(); ++j) {
    if (table.names[j] != o.response) continue;
    y = table.values.col(static_cast<Eigen::Index>(j));
    inis::Matrix rest(x.rows(), x.cols() - 1);
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (c != static_cast<Eigen::Index>(j)) rest.col(k++) = x.col(c);
    }
    x = std::move(rest);
    break;
  }
  const inis::Vector pred = inis::predict(model, x);
  emit(o.out, [&](std::ostream& out) {
    out << "prediction\n";
    for (Eigen::Index i = 0; i < pred.size(); ++i) out << inis::format_double(pred[i]) << '\n';
  });
  if (y) {
    std::cerr << "mse: " << inis::format_double((*y - pred).squaredNorm() / static_cast<double>(pred.size()))
              << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric independence screening and sparse additive model selection"};
  app.set_config("--config", "", "Read options from a key=value file; flags take precedence");
  app.require_subcommand(1);

  ScreenOptions screen;
  auto* screen_cmd = app.add_subcommand("screen", "Rank covariates by marginal screening score");
  screen.data.add_to(screen_cmd);
  screen_cmd->add_option("--method", screen.method, "nis or sis")
      ->check(CLI::IsMember({"nis", "sis"}))
      ->capture_default_str();
  auto* top = screen_cmd->add_option("--top", screen.top, "Select the K best-ranked covariates");
  auto* pq = screen_cmd->add_option("--permute-q", screen.permute_q,
                                    "Select by the permutation threshold at quantile Q (default 1)");
  top->excludes(pq);
  screen_cmd->add_option("--permute-repeats", screen.permute_repeats,
                         "Average the threshold over this many permutations")
      ->capture_default_str();
  screen_cmd->add_option("--out", screen.out, "Output file (default stdout)");

  auto add_select = [&](SelectOptions& s, const char* name, const char* help, bool greedy) {
    s.greedy = greedy;
    auto* cmd = app.add_subcommand(name, help);
    s.data.add_to(cmd);
    cmd->add_option("--q", s.q, "Permutation quantile")->capture_default_str();
    cmd->add_option("--s0", s.s0, "Stop once the model has this many components (default n/(dim log n))");
    if (greedy) cmd->add_option("--p0", s.p0, "Most covariates recruited per step (default 1)");
    cmd->add_option("--folds", s.folds, "Cross-validation folds")->capture_default_str();
    cmd->add_option("--grid-size", s.grid, "Penalty grid points")->capture_default_str();
    cmd->add_option("--max-iters", s.max_iters, "Iteration cap")->capture_default_str();
    cmd->add_option("--permute-repeats", s.permute_repeats, "Average thresholds over this many permutations")
        ->capture_default_str();
    cmd->add_flag("--one-se", s.one_se, "Use the one-standard-error rule in cross-validation");
    cmd->add_flag("--sample-split", s.sample_split, "Screen on two halves and keep the intersection");
    cmd->add_option("--model-out", s.model_out, "Write the fitted model here");
    cmd->add_option("--trace-out", s.trace_out, "Write the iteration trace here");
    cmd->add_option("--plot-dir", s.plot_dir, "Write one SVG curve per selected component here");
    cmd->add_option("--test", s.test, "Test CSV with the same columns; reports prediction error");
    cmd->add_flag("--verbose", s.verbose, "Print trace lines to stderr as iterations finish");
    return cmd;
  };
  SelectOptions inis_opts, ginis_opts;
  auto* inis_cmd = add_select(inis_opts, "inis", "Iterative screening with penalized selection", false);
  auto* ginis_cmd = add_select(ginis_opts, "ginis", "Greedy iterative screening (p0 recruits per step)", true);

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Export a simulated training/test pair as CSV");
  sim.spec.add_to(sim_cmd, true);
  sim_cmd->add_option("--out", sim.out_dir, "Output directory")->required();

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run seeded replications and aggregate TP/FP/PE/MMS");
  bench.spec.add_to(bench_cmd, true);
  bench_cmd->add_option("--reps", bench.reps, "Replications")->capture_default_str();
  bench_cmd->add_option("--methods", bench.methods, "Comma list of nis, sis, inis, ginis")->capture_default_str();
  bench_cmd->add_option("--out", bench.out_dir, "Output directory")->required();
  bench_cmd->add_option("--threads", bench.threads, "Parallel replications (0: all cores)")->capture_default_str();
  bench_cmd->add_option("--dim", bench.dim, "Spline basis functions per covariate")->capture_default_str();
  bench_cmd->add_option("--degree", bench.degree, "Spline degree (0: min(3, dim-1))")->capture_default_str();
  bench_cmd->add_option("--q", bench.q, "Permutation quantile")->capture_default_str();
  bench_cmd->add_option("--s0", bench.s0, "Model size cap");
  bench_cmd->add_option("--p0", bench.p0, "Recruits per step for ginis (default 1)");
  bench_cmd->add_option("--folds", bench.folds, "Cross-validation folds")->capture_default_str();
  bench_cmd->add_option("--max-iters", bench.max_iters, "Iteration cap")->capture_default_str();

  std::string verify_dir;
  auto* verify_cmd = app.add_subcommand("verify-bench", "Recompute bench aggregates and compare exactly");
  verify_cmd->add_option("--dir", verify_dir, "Directory written by bench")->required();

  PredictOptions pred;
  auto* pred_cmd = app.add_subcommand("predict", "Evaluate a saved model on a CSV file");
  pred_cmd->add_option("--model", pred.model, "Model file")->required();
  pred_cmd->add_option("--data", pred.data, "CSV with the training covariate columns")->required();
  pred_cmd->add_option("--response", pred.response, "Response column to drop if present")->capture_default_str();
  pred_cmd->add_option("--out", pred.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*screen_cmd) return run_screen(screen);
    if (*inis_cmd) return run_select(inis_opts);
    if (*ginis_cmd) return run_select(ginis_opts);
    if (*sim_cmd) return run_simulate(sim);
    if (*bench_cmd) return run_bench_cmd(bench);
    if (*verify_cmd) return run_verify(verify_dir);
    if (*pred_cmd) return run_predict(pred);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const inis::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
