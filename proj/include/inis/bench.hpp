#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "inis/common.hpp"
#include "inis/csv.hpp"
#include "inis/inis_engine.hpp"
#include "inis/model_io.hpp"
#include "inis/parallel.hpp"
#include "inis/screening.hpp"
#include "inis/sim_suite.hpp"

namespace inis {

enum class Method { Nis, Sis, Inis, Ginis };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Nis: return "nis";
    case Method::Sis: return "sis";
    case Method::Inis: return "inis";
    case Method::Ginis: return "ginis";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "nis") return Method::Nis;
  if (s == "sis") return Method::Sis;
  if (s == "inis") return Method::Inis;
  if (s == "ginis" || s == "g-inis") return Method::Ginis;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(s) + "'");
}

inline bool is_screening(Method m) { return m == Method::Nis || m == Method::Sis; }

// One method on one replication. Screening methods report MMS; selection
// methods report TP, FP, model size and test-set prediction error.
struct ReplicationRecord {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  Method method = Method::Nis;
  bool ok = true;
  std::string error;
  std::optional<double> tp, fp, size, pe, mms;
  std::size_t iterations = 0;
  double seconds = 0.0;  // wall clock; kept out of the deterministic files
};

struct MethodSummary {
  Method method = Method::Nis;
  std::size_t replications = 0;
  std::size_t failures = 0;
  std::optional<double> mean_tp, rsd_tp, mean_fp, rsd_fp, median_pe, rsd_pe, median_mms, rsd_mms;
  double mean_seconds = 0.0;
};

struct BenchConfig {
  SimulationSpec spec;
  std::size_t reps = 100;
  std::vector<Method> methods{Method::Nis, Method::Sis};
  std::uint64_t seed = 0;
  InisConfig inis;  // dim/degree also drive NIS
  std::size_t threads = 0;
};

struct BenchReport {
  BenchConfig config;
  std::vector<MethodSummary> methods;
};

inline std::uint64_t replication_seed(std::uint64_t seed, std::size_t rep) { return split_seed(seed, rep); }

// Runs every method on one simulated replication.
inline std::vector<ReplicationRecord> run_replication(const BenchConfig& cfg, std::size_t rep) {
  SimulationSpec spec = cfg.spec;
  spec.seed = replication_seed(cfg.seed, rep);
  std::vector<ReplicationRecord> out;
  std::optional<SimulatedData> data;
  std::string data_error;
  try {
    data = generate(spec);
  } catch (const std::exception& e) {
    data_error = e.what();
  }
  for (Method m : cfg.methods) {
    ReplicationRecord r;
    r.replication = rep;
    r.seed = spec.seed;
    r.method = m;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (!data) throw Error(ErrorCode::InvalidSpec, data_error);
      const IndexSet& truth = data->truth;
      if (is_screening(m)) {
        const ScreenResult s = m == Method::Nis
                                   ? nis_scores(data->train, cfg.inis.dim, cfg.inis.resolved_degree(), 1)
                                   : sis_scores(data->train);
        r.mms = static_cast<double>(minimum_model_size(s, truth));
      } else {
        InisConfig ic = cfg.inis;
        ic.threads = 1;
        ic.diagnostics = nullptr;
        ic.seed = split_seed(spec.seed, 3);
        const InisResult res = m == Method::Inis ? run_inis(data->train, ic) : run_greedy_inis(data->train, ic);
        const IndexSet sel = res.model.indices();
        const double tp = static_cast<double>(set_intersection(sel, truth).size());
        r.tp = tp;
        r.fp = static_cast<double>(sel.size()) - tp;
        r.size = static_cast<double>(sel.size());
        r.pe = (data->test.response - predict(res.model, data->test.covariates)).squaredNorm() /
               static_cast<double>(data->test.n());
        r.iterations = res.trace.iterations.size();
      }
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

// Replications run on a worker pool; records come back in replication order
// regardless of the number of workers.
inline std::vector<ReplicationRecord> run_bench(const BenchConfig& cfg) {
  cfg.spec.validate();
  require(cfg.reps >= 1, ErrorCode::InvalidArgument, "reps must be >= 1");
  require(!cfg.methods.empty(), ErrorCode::InvalidArgument, "no methods given");
  std::vector<std::vector<ReplicationRecord>> per_rep(cfg.reps);
  parallel_for(cfg.reps, cfg.threads, [&](std::size_t rep) { per_rep[rep] = run_replication(cfg, rep); });
  std::vector<ReplicationRecord> out;
  for (auto& v : per_rep) {
    for (auto& r : v) out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

inline std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline std::optional<double> median_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return median(v);
}

inline std::optional<double> rsd_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  if (v.size() == 1) return 0.0;
  return robust_sd(v);
}

}  // namespace detail

inline std::vector<MethodSummary> summarize(const std::vector<ReplicationRecord>& records,
                                            const std::vector<Method>& methods) {
  std::vector<MethodSummary> out;
  for (Method m : methods) {
    MethodSummary s;
    s.method = m;
    std::vector<double> tp, fp, pe, mms;
    double secs = 0.0;
    for (const auto& r : records) {
      if (r.method != m) continue;
      ++s.replications;
      secs += r.seconds;
      if (!r.ok) {
        ++s.failures;
        continue;
      }
      if (r.tp) tp.push_back(*r.tp);
      if (r.fp) fp.push_back(*r.fp);
      if (r.pe) pe.push_back(*r.pe);
      if (r.mms) mms.push_back(*r.mms);
    }
    s.mean_tp = detail::mean_of(tp);
    s.rsd_tp = detail::rsd_of(tp);
    s.mean_fp = detail::mean_of(fp);
    s.rsd_fp = detail::rsd_of(fp);
    s.median_pe = detail::median_of(pe);
    s.rsd_pe = detail::rsd_of(pe);
    s.median_mms = detail::median_of(mms);
    s.rsd_mms = detail::rsd_of(mms);
    s.mean_seconds = s.replications ? secs / static_cast<double>(s.replications) : 0.0;
    out.push_back(s);
  }
  return out;
}

namespace detail {

inline std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

inline std::optional<double> opt_parse(std::string_view s, std::size_t line) {
  if (s == "NA") return std::nullopt;
  double v = 0.0;
  if (!parse_double(s, v)) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

inline std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace detail

inline constexpr const char* kReplicationHeader = "replication,seed,method,status,tp,fp,size,pe,mms,iterations,error";

inline void write_replications_csv(std::ostream& out, const std::vector<ReplicationRecord>& records) {
  out << kReplicationHeader << '\n';
  for (const auto& r : records) {
    out << r.replication + 1 << ',' << r.seed << ',' << to_string(r.method) << ','
        << (r.ok ? "ok" : "failed") << ',' << detail::opt_text(r.tp) << ',' << detail::opt_text(r.fp)
        << ',' << detail::opt_text(r.size) << ',' << detail::opt_text(r.pe) << ','
        << detail::opt_text(r.mms) << ',' << r.iterations << ',' << detail::sanitize(r.error) << '\n';
  }
}

inline std::vector<ReplicationRecord> read_replications_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == kReplicationHeader, ErrorCode::ParseError,
          "replication file header mismatch");
  std::vector<ReplicationRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    require(f.size() == 11, ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 11 fields");
    ReplicationRecord r;
    r.replication = std::stoull(std::string(f[0])) - 1;
    r.seed = std::stoull(std::string(f[1]));
    r.method = parse_method(f[2]);
    r.ok = f[3] == "ok";
    r.tp = detail::opt_parse(f[4], line_no);
    r.fp = detail::opt_parse(f[5], line_no);
    r.size = detail::opt_parse(f[6], line_no);
    r.pe = detail::opt_parse(f[7], line_no);
    r.mms = detail::opt_parse(f[8], line_no);
    r.iterations = std::stoull(std::string(f[9]));
    r.error = std::string(f[10]);
    out.push_back(std::move(r));
  }
  return out;
}

inline constexpr const char* kSummaryHeader =
    "method,replications,failures,mean_tp,rsd_tp,mean_fp,rsd_fp,median_pe,rsd_pe,median_mms,rsd_mms";

// Machine-readable aggregates; exact values, no timing.
inline void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& summaries) {
  using detail::opt_text;
  out << kSummaryHeader << '\n';
  for (const auto& s : summaries) {
    out << to_string(s.method) << ',' << s.replications << ',' << s.failures << ',' << opt_text(s.mean_tp)
        << ',' << opt_text(s.rsd_tp) << ',' << opt_text(s.mean_fp) << ',' << opt_text(s.rsd_fp) << ','
        << opt_text(s.median_pe) << ',' << opt_text(s.rsd_pe) << ',' << opt_text(s.median_mms) << ','
        << opt_text(s.rsd_mms) << '\n';
  }
}

inline std::string describe(const SimulationSpec& spec) {
  std::ostringstream ss;
  ss << "Example " << spec.example;
  if (spec.example == 1) ss << " (s=" << spec.s << ")";
  if (spec.example == 3 || spec.example == 4) ss << " (t=" << spec.t << ")";
  if (spec.example == 6) ss << " (t=" << spec.t << ", C^2=" << format_double(spec.c_squared) << ")";
  ss << ", n=" << spec.n << ", p=" << spec.p;
  return ss.str();
}

// Human-readable table in "mean(RSD)" cells.
inline void write_report_text(std::ostream& out, const BenchReport& report, bool with_time) {
  auto cell = [](const std::optional<double>& v, const std::optional<double>& rsd) {
    if (!v) return std::string("-");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f(%.2f)", *v, rsd ? *rsd : 0.0);
    return std::string(buf);
  };
  const auto& c = report.config;
  out << describe(c.spec) << ", dim=" << c.inis.dim << ", reps=" << c.reps << ", seed=" << c.seed << '\n';
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %-14s %-14s %-14s %-14s%s\n", "Method", "TP", "FP", "PE", "MMS",
                with_time ? " Time" : "");
  out << line;
  for (const auto& s : report.methods) {
    std::string name = to_string(s.method);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
    if (name == "GINIS") name = "g-INIS";
    std::snprintf(line, sizeof(line), "%-8s %-14s %-14s %-14s %-14s", name.c_str(),
                  cell(s.mean_tp, s.rsd_tp).c_str(), cell(s.mean_fp, s.rsd_fp).c_str(),
                  cell(s.median_pe, s.rsd_pe).c_str(), cell(s.median_mms, s.rsd_mms).c_str());
    out << line;
    if (with_time) {
      std::snprintf(line, sizeof(line), " %.2f", s.mean_seconds);
      out << line;
    }
    if (s.failures) out << "  [" << s.failures << " failed]";
    out << '\n';
  }
}

inline std::string summary_csv_text(const std::vector<MethodSummary>& summaries) {
  std::ostringstream ss;
  write_summary_csv(ss, summaries);
  return ss.str();
}

// Methods in first-appearance order of a record list.
inline std::vector<Method> methods_in(const std::vector<ReplicationRecord>& records) {
  std::vector<Method> out;
  for (const auto& r : records) {
    if (std::find(out.begin(), out.end(), r.method) == out.end()) out.push_back(r.method);
  }
  return out;
}

}  // namespace inis
