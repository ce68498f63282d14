#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "inis/additive_selector.hpp"
#include "inis/common.hpp"
#include "inis/dataset.hpp"
#include "inis/marginal_regression.hpp"
#include "inis/model_io.hpp"
#include "inis/rng.hpp"
#include "inis/screening.hpp"

namespace inis {

struct InisConfig {
  int dim = 5;
  int degree = 0;  // 0: default_degree(dim)
  double q = 1.0;
  std::optional<std::size_t> s0;  // default floor(n / (dim log n))
  std::optional<std::size_t> p0;  // set: greedy recruiting cap
  std::size_t max_iters = 10;
  std::size_t n_folds = 5;
  std::size_t grid_size = 50;
  bool one_se_rule = false;
  bool sample_splitting = false;
  std::size_t permutation_repeats = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::ostream* diagnostics = nullptr;  // one trace line per iteration, as it happens

  int resolved_degree() const { return degree > 0 ? degree : default_degree(dim); }

  std::size_t resolved_s0(std::size_t n) const {
    if (s0) return *s0;
    const double nn = static_cast<double>(n);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(nn / (dim * std::log(nn)))));
  }

  void validate(std::size_t n) const {
    require(dim >= 2, ErrorCode::InvalidArgument, "dim must be >= 2");
    require(resolved_degree() >= 1 && resolved_degree() <= dim - 1, ErrorCode::InvalidArgument,
            "degree must be in [1, dim-1]");
    require(q >= 0.0 && q <= 1.0, ErrorCode::InvalidArgument, "q must be in [0,1]");
    require(max_iters >= 1, ErrorCode::InvalidArgument, "max_iters must be >= 1");
    require(permutation_repeats >= 1, ErrorCode::InvalidArgument, "permutation repeats must be >= 1");
    const std::size_t s = resolved_s0(n);
    require(s >= 1 && s * static_cast<std::size_t>(dim) <= n, ErrorCode::InvalidArgument,
            "s0 must satisfy 1 <= s0 <= n/dim");
    if (p0) {
      require(*p0 >= 1 && *p0 <= s, ErrorCode::InvalidArgument, "p0 must satisfy 1 <= p0 <= s0");
    }
    require(n >= 2 * n_folds || n == n_folds, ErrorCode::InvalidArgument, "need n >= 2 * folds");
  }
};

struct InisIteration {
  std::size_t iteration = 0;
  IndexSet candidates;  // recruited by screening at this step
  IndexSet selected;    // kept by the penalized fit
  double threshold = 0.0;
  double rss = 0.0;     // training mean squared residual of the selected model
  bool converged = true;
};

enum class StopReason { EmptyFirstStage, NoRecruitment, Stabilized, ModelSizeReached, MaxIterations };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::EmptyFirstStage: return "empty-first-stage";
    case StopReason::NoRecruitment: return "no-recruitment";
    case StopReason::Stabilized: return "stabilized";
    case StopReason::ModelSizeReached: return "model-size-reached";
    case StopReason::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

struct InisTrace {
  std::vector<InisIteration> iterations;
  StopReason stop = StopReason::MaxIterations;
  std::size_t nonconverged = 0;  // cross-validation grid points without convergence
  bool final_converged = true;
};

struct InisResult {
  AdditiveModel model;
  InisTrace trace;
};

struct ConditionalScores {
  IndexSet candidates;          // complement of the active set
  std::vector<double> scores;   // aligned with candidates
  double active_rss = 0.0;
};

// RSS reduction from adding each non-active covariate to the joint fit on `active`.
inline ConditionalScores conditional_scores(const BasisDesign& design, const Vector& y,
                                            const IndexSet& active, std::size_t threads = 1) {
  const ConditionalScorer scorer(design, y, active);
  const auto all = scorer.scores(nullptr, threads);
  ConditionalScores out;
  out.active_rss = scorer.active_rss();
  for (std::size_t j = 0; j < design.p(); ++j) {
    if (contains(active, j)) continue;
    out.candidates.push_back(j);
    out.scores.push_back(all[j]);
  }
  return out;
}

inline ConditionalScores conditional_scores(const Dataset& data, const IndexSet& active,
                                            const InisConfig& config) {
  data.validate();
  const BasisDesign design =
      BasisDesign::build(data.covariates, config.dim, config.resolved_degree(), config.threads);
  return conditional_scores(design, data.response, active, config.threads);
}

inline std::string format_index_set(const IndexSet& set, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t k = 0; k < set.size(); ++k) {
    if (k > 0) out += ',';
    out += set[k] < names.size() ? names[set[k]] : std::to_string(set[k] + 1);
  }
  return out.empty() ? "-" : out;
}

inline void write_trace_line(std::ostream& out, const InisIteration& it,
                             const std::vector<std::string>& names) {
  out << "iteration=" << it.iteration << " candidates=" << it.candidates.size()
      << " selected=" << it.selected.size() << " threshold=" << format_double(it.threshold)
      << " rss=" << format_double(it.rss) << " converged=" << (it.converged ? 1 : 0)
      << " candidate_set=" << format_index_set(it.candidates, names)
      << " selected_set=" << format_index_set(it.selected, names) << '\n';
}

// Structured trace: a version line, one line per iteration, then a stop line.
inline void write_trace(std::ostream& out, const InisTrace& trace,
                        const std::vector<std::string>& names) {
  out << "# inis-trace 1\n";
  for (const auto& it : trace.iterations) write_trace_line(out, it, names);
  out << "stop=" << to_string(trace.stop) << " iterations=" << trace.iterations.size()
      << " nonconverged=" << trace.nonconverged
      << " final_converged=" << (trace.final_converged ? 1 : 0) << '\n';
}

namespace detail {

// Streams for iteration l. Permutations and folds never share draws.
inline std::uint64_t permutation_seed(std::uint64_t seed, std::size_t l, std::size_t repeat) {
  return split_seed(split_seed(seed, 2 * l), repeat);
}
inline std::uint64_t fold_seed(std::uint64_t seed, std::size_t l) { return split_seed(seed, 2 * l + 1); }
inline std::uint64_t split_halves_seed(std::uint64_t seed) { return split_seed(seed, 1u << 20); }

struct ScreeningView {
  const BasisDesign* design;
  Vector y;
};

// Covariates outside `active` whose real score reaches the permutation
// threshold; with a cap, only the cap best of them.
inline IndexSet recruit(const ScreeningView& view, const IndexSet& active, const InisConfig& cfg,
                        std::size_t l, double& threshold) {
  const ConditionalScorer scorer(*view.design, view.y, active);
  const auto real = scorer.scores(nullptr, cfg.threads);
  threshold = 0.0;
  for (std::size_t r = 0; r < cfg.permutation_repeats; ++r) {
    threshold += permutation_threshold(scorer, cfg.q, permutation_seed(cfg.seed, l, r), cfg.threads);
  }
  threshold /= static_cast<double>(cfg.permutation_repeats);
  std::vector<std::size_t> passing;
  for (std::size_t j = 0; j < real.size(); ++j) {
    if (!contains(active, j) && real[j] > 0.0 && real[j] >= threshold) passing.push_back(j);
  }
  if (cfg.p0 && passing.size() > *cfg.p0) {
    std::stable_sort(passing.begin(), passing.end(),
                     [&](std::size_t a, std::size_t b) { return real[a] > real[b]; });
    passing.resize(*cfg.p0);
  }
  std::sort(passing.begin(), passing.end());
  return passing;
}

inline CandidateMap candidates_from(const BasisDesign& design, const IndexSet& set,
                                    const std::vector<std::string>& names) {
  CandidateMap out;
  for (auto j : set) {
    if (design.degenerate(j)) continue;
    out.emplace(j, Candidate{design.basis(j), design.block(j), j < names.size() ? names[j] : ""});
  }
  return out;
}

inline double training_rss(const AdditiveModel& model, const Dataset& data) {
  return (data.response - predict(model, data.covariates)).squaredNorm() /
         static_cast<double>(data.n());
}

inline InisResult run_iterative(const Dataset& data, const InisConfig& cfg) {
  data.validate();
  cfg.validate(data.n());
  const int degree = cfg.resolved_degree();
  const std::size_t s0 = cfg.resolved_s0(data.n());
  const BasisDesign design = BasisDesign::build(data.covariates, cfg.dim, degree, cfg.threads);
  const ScreeningView full{&design, data.response};

  // Optional sample splitting: screen on two halves and intersect.
  std::vector<BasisDesign> half_designs;
  std::vector<ScreeningView> halves;
  if (cfg.sample_splitting) {
    Rng rng(split_halves_seed(cfg.seed));
    const auto perm = random_permutation(data.n(), rng);
    const std::size_t mid = data.n() / 2;
    std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(mid));
    std::vector<std::size_t> b(perm.begin() + static_cast<std::ptrdiff_t>(mid), perm.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (const auto& rows : {a, b}) {
      const Dataset half = subset_rows(data, rows);
      half_designs.push_back(BasisDesign::build(half.covariates, cfg.dim, degree, cfg.threads));
      halves.push_back(ScreeningView{nullptr, half.response});
    }
    for (std::size_t h = 0; h < 2; ++h) halves[h].design = &half_designs[h];
  }

  InisResult result;
  result.model.intercept = data.response.mean();
  InisTrace& trace = result.trace;
  IndexSet previous;
  double previous_rss = detail::training_rss(result.model, data);

  for (std::size_t l = 1; l <= cfg.max_iters; ++l) {
    InisIteration it;
    it.iteration = l;
    if (cfg.sample_splitting) {
      double t0 = 0.0, t1 = 0.0;
      const IndexSet a0 = recruit(halves[0], previous, cfg, l, t0);
      InisConfig second = cfg;
      second.seed = split_seed(cfg.seed, 7);
      const IndexSet a1 = recruit(halves[1], previous, second, l, t1);
      it.candidates = set_intersection(a0, a1);
      it.threshold = 0.5 * (t0 + t1);
    } else {
      it.candidates = recruit(full, previous, cfg, l, it.threshold);
    }

    if (it.candidates.empty() && (l == 1 || cfg.p0)) {
      it.selected = previous;
      it.rss = previous_rss;
      trace.iterations.push_back(it);
      if (cfg.diagnostics) write_trace_line(*cfg.diagnostics, it, data.names);
      trace.stop = l == 1 ? StopReason::EmptyFirstStage : StopReason::NoRecruitment;
      return result;
    }

    CvOptions cv;
    cv.n_folds = cfg.n_folds;
    cv.grid_size = cfg.grid_size;
    cv.one_se_rule = cfg.one_se_rule;
    cv.seed = fold_seed(cfg.seed, l);
    cv.threads = cfg.threads;
    const CvResult fit =
        cv_select(data.response, candidates_from(design, set_union(previous, it.candidates), data.names), cv);
    trace.nonconverged += fit.nonconverged;
    trace.final_converged = fit.converged;
    result.model = fit.model;
    it.selected = result.model.indices();
    it.rss = detail::training_rss(result.model, data);
    it.converged = fit.converged;
    trace.iterations.push_back(it);
    if (cfg.diagnostics) write_trace_line(*cfg.diagnostics, it, data.names);
    previous_rss = it.rss;

    if (it.selected.size() >= s0) {
      trace.stop = StopReason::ModelSizeReached;
      return result;
    }
    if (it.selected == previous) {
      trace.stop = StopReason::Stabilized;
      return result;
    }
    previous = it.selected;
  }
  trace.stop = StopReason::MaxIterations;
  return result;
}

}  // namespace detail

// Iterative screening and penalized selection with uncapped recruiting.
inline InisResult run_inis(const Dataset& data, InisConfig config) {
  config.p0.reset();
  return detail::run_iterative(data, config);
}

// Greedy variant: at most p0 (default 1) recruits per step; stops as soon as
// no covariate clears the permutation threshold.
inline InisResult run_greedy_inis(const Dataset& data, InisConfig config) {
  if (!config.p0) config.p0 = 1;
  return detail::run_iterative(data, config);
}

}  // namespace inis
