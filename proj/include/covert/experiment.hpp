#pragma once

// Figure sweeps, result persistence and the end-to-end covertness audit.
//
// A run directory holds, per figure id F:
//   F.csv            summary (sweep, K, method, mean/std objective)
//   F_solutions.csv  one row per (point, scenario, method) with chi, gamma/tau
//   F_trace.csv      per-iteration objective (convergence figures only)
//   F_plot.py        matplotlib script reading F.csv
// plus spec.ini (the effective configuration). `audit_run` adds audit.csv.

#include "covert/config.hpp"
#include "covert/covertness.hpp"
#include "covert/detection.hpp"
#include "covert/fast_varying.hpp"
#include "covert/parallel.hpp"
#include "covert/quadrature.hpp"
#include "covert/quasi_static.hpp"
#include "covert/rng.hpp"
#include "covert/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace covert {

struct SummaryRow {
  std::string figure;
  std::string parameter;
  double sweep = 0.0;
  std::size_t K = 0;
  std::string method;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t scenarios = 0;
  std::size_t failures = 0;
};

struct SolutionRow {
  std::string figure;
  std::size_t point = 0;
  double sweep = 0.0;
  std::size_t K = 0;
  std::string method;
  std::size_t scenario = 0;
  std::uint64_t scenario_seed = 0;
  std::string regime;  // quasi_static | fast_varying
  double epsilon = 0.0;
  std::size_t n_d = 0;
  std::size_t L = 1;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> chi;
  std::vector<double> gamma;  // quasi-static only
  double tau = std::numeric_limits<double>::quiet_NaN();
  std::size_t N_t = 0;
  std::vector<double> q_norm;
  std::size_t iterations = 0;
  std::string status = "ok";
};

struct TraceRow {
  std::string method;
  std::size_t scenario = 0;
  std::size_t iteration = 0;
  double objective = 0.0;
  double lambda = std::numeric_limits<double>::quiet_NaN();
};

struct TvBoundRow {
  double chi = 0.0;
  double tv_numeric = 0.0;
  double tv_ci = 0.0;
  double proposed_bound = 0.0;
  double pinsker_bound = 0.0;
  double hellinger_bound = 0.0;
};

struct FigureResult {
  std::string figure;
  std::vector<SummaryRow> summary;
  std::vector<SolutionRow> solutions;
  std::vector<TraceRow> trace;
  std::vector<TvBoundRow> tv_bounds;
};

inline std::size_t figure_number(const std::string& figure) {
  const auto& ids = figure_ids();
  const auto it = std::find(ids.begin(), ids.end(), figure);
  if (it == ids.end()) throw std::invalid_argument("unknown figure id: " + figure);
  return static_cast<std::size_t>(it - ids.begin()) + 2;
}

inline const char* sweep_parameter(const std::string& figure) {
  switch (figure_number(figure)) {
    case 2: return "chi";
    case 3:
    case 6: return "iteration";
    case 4:
    case 8: return "Q_dBm";
    case 5: return "M";
    case 7: return "P_R_dBm";
    default: return "one_minus_epsilon";
  }
}

/// Receiver draws are shared across sweep points (common random numbers), so
/// trends along a sweep are not masked by scenario-to-scenario noise.
inline std::uint64_t scenario_seed(const ExperimentSpec& spec, const std::string& figure, std::size_t scenario) {
  return derive_seed(spec.seed, {figure_number(figure), scenario});
}

namespace detail {

struct RunContext {
  const ExperimentSpec& spec;
  const QuadratureRule& rule;
  ZetaCache& zetas;
  std::size_t jobs;
};

inline std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

inline std::vector<std::string> qs_methods(const ExperimentSpec& spec, std::size_t K) {
  if (spec.qs_method == "both") {
    if (K > spec.poa_max_K) return {"sca"};
    return {"poa", "sca"};
  }
  return {spec.qs_method};
}

inline std::vector<std::string> fv_methods(const ExperimentSpec& spec) {
  if (spec.fv_method == "both") return {"es", "ao"};
  return {spec.fv_method};
}

inline QsSolveResult run_qs_method(const std::string& method, const QuasiStaticParams& p, const ExperimentSpec& spec) {
  if (method == "closed_form") return closed_form_solve(p);
  if (method == "poa") return poa_solve(p, spec.poa_delta, spec.poa_max_iter, spec.poa_max_vertices);
  return sca_solve(p, spec.sca_tol, spec.sca_max_iter);
}

inline SolutionRow qs_row(const std::string& figure, std::size_t point, double sweep, const std::string& method,
                          std::size_t scenario, std::uint64_t seed, const ScenarioInstance& inst,
                          const ExperimentSpec& spec) {
  SolutionRow r;
  r.figure = figure;
  r.point = point;
  r.sweep = sweep;
  r.K = inst.K;
  r.method = method;
  r.scenario = scenario;
  r.scenario_seed = seed;
  r.regime = "quasi_static";
  r.epsilon = spec.qs_epsilon;
  r.n_d = spec.qs_samples;
  r.L = 1;
  r.q_norm = inst.q_norm;
  return r;
}

inline SolutionRow fv_row(const std::string& figure, std::size_t point, double sweep, const std::string& method,
                          std::size_t scenario, std::uint64_t seed, const ScenarioInstance& inst,
                          const FastVaryingParams& p) {
  SolutionRow r;
  r.figure = figure;
  r.point = point;
  r.sweep = sweep;
  r.K = inst.K;
  r.method = method;
  r.scenario = scenario;
  r.scenario_seed = seed;
  r.regime = "fast_varying";
  r.epsilon = p.epsilon;
  r.L = p.L;
  r.q_norm = inst.q_norm;
  return r;
}

inline void fill_qs(SolutionRow& r, const QsSolveResult& s) {
  r.objective = s.objective;
  r.chi = s.chi;
  r.gamma = s.gamma;
  r.iterations = s.iterations;
  if (s.heuristic) r.status = "ok_heuristic";
  else if (!s.converged) r.status = "ok_not_converged";
}

inline void fill_fv(SolutionRow& r, const FvSolveResult& s, const FastVaryingParams& p) {
  r.objective = s.objective;
  r.chi = s.chi;
  r.tau = s.tau;
  r.N_t = s.N_t;
  r.n_d = p.observed_samples(s.N_t);
  r.iterations = s.iterations;
  if (!s.converged) r.status = "ok_not_converged";
  else if (s.zeta_order_violated) r.status = "ok_zeta_order_violated";
}

/// Scenario config at one sweep point.
inline ScenarioConfig point_config(const ExperimentSpec& spec, const std::string& figure, double value, std::size_t K) {
  ScenarioConfig c = spec.scenario;
  c.K = K;
  switch (figure_number(figure)) {
    case 4:
    case 8: c.Q_dBm = {value}; break;
    case 5: c.M = static_cast<std::size_t>(std::llround(value)); break;
    case 7: c.P_R_dBm = value; break;
    default: break;
  }
  c.validate();
  return c;
}

inline FastVaryingParams point_fast_params(const ExperimentSpec& spec, const std::string& figure, double value,
                                           const ScenarioInstance& inst) {
  std::size_t L = spec.L;
  double eps = spec.fv_epsilon;
  if (figure_number(figure) == 9) {
    L = spec.fig9_block_product / spec.N;
    eps = 1.0 - value;
  }
  auto p = derive_fast_varying(inst, spec.N, L, eps);
  p.adversary_observes_pilots = spec.adversary_observes_pilots;
  return p;
}

inline void summarize(FigureResult& fig, const std::vector<double>& grid) {
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::vector<const SolutionRow*>> groups;
  for (const auto& r : fig.solutions) groups[{r.point, r.K, r.method}].push_back(&r);
  for (const auto& [key, rows] : groups) {
    const auto& [point, K, method] = key;
    SummaryRow s;
    s.figure = fig.figure;
    s.parameter = sweep_parameter(fig.figure);
    s.sweep = grid[point];
    s.K = K;
    s.method = method;
    double sum = 0.0, sum_sq = 0.0;
    for (const auto* r : rows) {
      if (!std::isfinite(r->objective)) {
        ++s.failures;
        continue;
      }
      ++s.scenarios;
      sum += r->objective;
      sum_sq += r->objective * r->objective;
    }
    if (s.scenarios > 0) {
      const double n = static_cast<double>(s.scenarios);
      s.mean = sum / n;
      s.stddev = s.scenarios > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * s.mean * s.mean) / (n - 1.0))) : 0.0;
    } else {
      s.mean = std::numeric_limits<double>::quiet_NaN();
      s.stddev = std::numeric_limits<double>::quiet_NaN();
    }
    fig.summary.push_back(s);
  }
}

/// Mean/std of the traces per iteration; shorter traces hold their last value.
inline void summarize_trace(FigureResult& fig) {
  const std::size_t K = fig.solutions.empty() ? 0 : fig.solutions.front().K;
  std::map<std::string, std::set<std::size_t>> iterations;
  std::map<std::pair<std::string, std::size_t>, std::vector<const TraceRow*>> by_scenario;
  for (const auto& t : fig.trace) {
    iterations[t.method].insert(t.iteration);
    by_scenario[{t.method, t.scenario}].push_back(&t);
  }
  for (const auto& [method, its] : iterations) {
    for (std::size_t it : its) {
      std::vector<double> values;
      for (const auto& [key, rows] : by_scenario) {
        if (key.first != method) continue;
        const TraceRow* last = nullptr;
        for (const auto* r : rows)
          if (r->iteration <= it) last = r;
        if (last) values.push_back(last->objective);
      }
      SummaryRow s;
      s.figure = fig.figure;
      s.parameter = "iteration";
      s.sweep = static_cast<double>(it);
      s.K = K;
      s.method = method;
      double sum = 0.0, sum_sq = 0.0;
      for (double v : values) {
        sum += v;
        sum_sq += v * v;
      }
      const double n = static_cast<double>(values.size());
      s.scenarios = values.size();
      s.mean = sum / n;
      s.stddev = values.size() > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * s.mean * s.mean) / (n - 1.0))) : 0.0;
      fig.summary.push_back(s);
    }
  }
}

inline FigureResult run_tv_bounds(const std::string& figure, const RunContext& ctx) {
  FigureResult fig;
  fig.figure = figure;
  const auto grid = ctx.spec.sweep(figure);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double chi = grid[i];
    const std::vector<double> chis{chi, chi};
    const std::vector<BandDistribution> bands{BandDistribution::from_chi(chi, 1.0), BandDistribution::from_chi(chi, 1.0)};
    const auto mc = tv_numeric_product(bands, ctx.spec.tv_samples, derive_seed(ctx.spec.seed, {2, i}), ctx.jobs);
    fig.tv_bounds.push_back(
        {chi, mc.estimate, mc.ci_half_width, tv_upper_bound(chis), pinsker_tv_bound(chis), hellinger_tv_bound(chis)});
  }
  return fig;
}

inline FigureResult run_sca_trace(const std::string& figure, const RunContext& ctx) {
  const auto& spec = ctx.spec;
  FigureResult fig;
  fig.figure = figure;
  std::vector<std::vector<TraceRow>> traces(spec.trace_scenarios);
  std::vector<SolutionRow> rows(spec.trace_scenarios);
  parallel_for(spec.trace_scenarios, ctx.jobs, [&](std::size_t s) {
    const auto seed = scenario_seed(spec, figure, s);
    const auto inst = sample_scenario(point_config(spec, figure, 0.0, spec.fig3_K), seed);
    rows[s] = qs_row(figure, 0, 0.0, "sca", s, seed, inst, spec);
    try {
      const auto r = sca_solve(derive_quasi_static(inst, spec.qs_epsilon), spec.sca_tol, spec.sca_max_iter);
      fill_qs(rows[s], r);
      for (const auto& t : r.trace) traces[s].push_back({"sca", s, t.iteration, t.objective, t.lambda});
    } catch (const std::exception& e) {
      rows[s].status = "error: " + sanitize(e.what());
    }
  });
  for (auto& t : traces) fig.trace.insert(fig.trace.end(), t.begin(), t.end());
  fig.solutions = std::move(rows);
  summarize_trace(fig);
  return fig;
}

inline FigureResult run_ao_trace(const std::string& figure, const RunContext& ctx) {
  const auto& spec = ctx.spec;
  FigureResult fig;
  fig.figure = figure;
  std::vector<std::vector<TraceRow>> traces(spec.trace_scenarios);
  std::vector<SolutionRow> rows(spec.trace_scenarios);
  parallel_for(spec.trace_scenarios, ctx.jobs, [&](std::size_t s) {
    const auto seed = scenario_seed(spec, figure, s);
    const auto inst = sample_scenario(point_config(spec, figure, 0.0, spec.scenario.K), seed);
    const auto p = point_fast_params(spec, figure, 0.0, inst);
    rows[s] = fv_row(figure, 0, 0.0, "ao", s, seed, inst, p);
    try {
      const auto r = ao_solve(p, ctx.zetas, spec.tau0, spec.ao_tol, spec.ao_max_iter);
      fill_fv(rows[s], r, p);
      for (const auto& t : r.trace) traces[s].push_back({"ao", s, t.iteration, t.objective, t.lambda});
    } catch (const std::exception& e) {
      rows[s].status = "error: " + sanitize(e.what());
    }
  });
  for (auto& t : traces) fig.trace.insert(fig.trace.end(), t.begin(), t.end());
  fig.solutions = std::move(rows);
  summarize_trace(fig);
  return fig;
}

/// Sweep figures: every (K, point, scenario) task solves with each method.
inline FigureResult run_sweep(const std::string& figure, const RunContext& ctx) {
  const auto& spec = ctx.spec;
  const std::size_t num = figure_number(figure);
  const bool fast = num >= 7;
  FigureResult fig;
  fig.figure = figure;
  const auto grid = spec.sweep(figure);
  std::vector<std::size_t> Ks;
  if (num == 4) Ks = {spec.fig4_K};
  else if (num == 5) Ks = {spec.fig5_K};
  else if (num == 8) Ks = spec.fig8_K;
  else Ks = {spec.scenario.K};

  const std::size_t S = spec.scenarios_per_point;
  const std::size_t tasks = Ks.size() * grid.size() * S;
  std::vector<std::vector<SolutionRow>> out(tasks);
  parallel_for(tasks, ctx.jobs, [&](std::size_t task) {
    const std::size_t s = task % S;
    const std::size_t point = (task / S) % grid.size();
    const std::size_t K = Ks[task / (S * grid.size())];
    const double value = grid[point];
    const auto seed = scenario_seed(spec, figure, s);
    auto& rows = out[task];
    ScenarioInstance inst;
    try {
      inst = sample_scenario(point_config(spec, figure, value, K), seed);
    } catch (const std::exception& e) {
      SolutionRow r;
      r.figure = figure;
      r.point = point;
      r.sweep = value;
      r.K = K;
      r.method = fast ? spec.fv_method : spec.qs_method;
      r.scenario = s;
      r.scenario_seed = seed;
      r.status = "error: " + sanitize(e.what());
      rows.push_back(r);
      return;
    }
    if (!fast) {
      for (const auto& m : qs_methods(spec, K)) {
        auto r = qs_row(figure, point, value, m, s, seed, inst, spec);
        try {
          fill_qs(r, run_qs_method(m, derive_quasi_static(inst, spec.qs_epsilon), spec));
        } catch (const std::exception& e) {
          r.status = "error: " + sanitize(e.what());
        }
        rows.push_back(std::move(r));
      }
    } else {
      const auto p = point_fast_params(spec, figure, value, inst);
      for (const auto& m : fv_methods(spec)) {
        auto r = fv_row(figure, point, value, m, s, seed, inst, p);
        try {
          if (m == "es") fill_fv(r, es_solve(p, ctx.zetas, 1), p);
          else fill_fv(r, ao_solve(p, ctx.zetas, spec.tau0, spec.ao_tol, spec.ao_max_iter), p);
        } catch (const std::exception& e) {
          r.status = "error: " + sanitize(e.what());
        }
        rows.push_back(std::move(r));
      }
    }
  });
  for (auto& rows : out)
    for (auto& r : rows) fig.solutions.push_back(std::move(r));
  summarize(fig, grid);
  return fig;
}

}  // namespace detail

/// Computes one figure in memory.
inline FigureResult run_figure(const ExperimentSpec& spec, const std::string& figure, ZetaCache& zetas,
                               std::size_t jobs = 1) {
  spec.validate();
  detail::RunContext ctx{spec, zetas.rule(), zetas, jobs};
  switch (figure_number(figure)) {
    case 2: return detail::run_tv_bounds(figure, ctx);
    case 3: return detail::run_sca_trace(figure, ctx);
    case 6: return detail::run_ao_trace(figure, ctx);
    default: return detail::run_sweep(figure, ctx);
  }
}

// ---------------------------------------------------------------------------
// CSV persistence

namespace detail {

inline std::string join_semicolon(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + fmt(v[i]);
  return s;
}

inline std::vector<double> split_semicolon(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s, ';')) out.push_back(parse_double(item, "csv"));
  return out;
}

inline std::string fmt_or_empty(double v) { return std::isfinite(v) ? fmt(v) : std::string(); }

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::string plot_script(const std::string& figure) {
  std::ostringstream o;
  o << "# Plots " << figure << ".csv; run from the run directory.\n"
    << "import pandas as pd\nimport matplotlib.pyplot as plt\n\n"
    << "df = pd.read_csv(\"" << figure << ".csv\")\nfig, ax = plt.subplots()\n";
  if (figure == "fig2_tv_bounds") {
    o << "for col in [\"tv_numeric\", \"proposed_bound\", \"pinsker_bound\", \"hellinger_bound\"]:\n"
      << "    ax.plot(df[\"chi\"], df[col], marker=\"o\", label=col)\n"
      << "ax.set_xlabel(\"chi\")\nax.set_ylabel(\"total variation\")\n";
  } else {
    o << "for (method, K), g in df.groupby([\"method\", \"K\"]):\n"
      << "    ax.errorbar(g[\"sweep\"], g[\"mean_objective\"], yerr=g[\"std_objective\"], marker=\"o\", capsize=3,\n"
      << "                label=f\"{method} K={K}\")\n"
      << "ax.set_xlabel(df[\"parameter\"].iloc[0])\nax.set_ylabel(\"sum rate (nats)\")\n";
  }
  o << "ax.legend()\nax.grid(True)\nfig.savefig(\"" << figure << ".png\", dpi=150)\n";
  return o.str();
}

}  // namespace detail

inline const char* kSolutionHeader =
    "figure,point,sweep,K,method,scenario,scenario_seed,regime,epsilon,n_d,L,objective,objective_bits,chi,gamma,tau,"
    "N_t,q_norm,iterations,status";

inline std::string solutions_csv(const std::vector<SolutionRow>& rows) {
  using detail::fmt;
  using detail::fmt_or_empty;
  std::ostringstream o;
  o << kSolutionHeader << "\n";
  for (const auto& r : rows) {
    o << r.figure << ',' << r.point << ',' << fmt(r.sweep) << ',' << r.K << ',' << r.method << ',' << r.scenario << ','
      << r.scenario_seed << ',' << r.regime << ',' << fmt(r.epsilon) << ',' << r.n_d << ',' << r.L << ','
      << fmt_or_empty(r.objective) << ',' << fmt_or_empty(r.objective / std::log(2.0)) << ','
      << detail::join_semicolon(r.chi) << ',' << detail::join_semicolon(r.gamma) << ',' << fmt_or_empty(r.tau) << ','
      << r.N_t << ',' << detail::join_semicolon(r.q_norm) << ',' << r.iterations << ',' << r.status << "\n";
  }
  return o.str();
}

inline std::vector<SolutionRow> parse_solutions_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSolutionHeader) throw std::runtime_error("solutions csv: bad header");
  std::vector<SolutionRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = detail::split_csv_line(line);
    if (c.size() != 20) throw std::runtime_error("solutions csv: bad row: " + line);
    auto num = [](const std::string& s) {
      return s.empty() ? std::numeric_limits<double>::quiet_NaN() : detail::parse_double(s, "csv");
    };
    SolutionRow r;
    r.figure = c[0];
    r.point = std::stoull(c[1]);
    r.sweep = num(c[2]);
    r.K = std::stoull(c[3]);
    r.method = c[4];
    r.scenario = std::stoull(c[5]);
    r.scenario_seed = std::stoull(c[6]);
    r.regime = c[7];
    r.epsilon = num(c[8]);
    r.n_d = std::stoull(c[9]);
    r.L = std::stoull(c[10]);
    r.objective = num(c[11]);
    r.chi = detail::split_semicolon(c[13]);
    r.gamma = detail::split_semicolon(c[14]);
    r.tau = num(c[15]);
    r.N_t = std::stoull(c[16]);
    r.q_norm = detail::split_semicolon(c[17]);
    r.iterations = std::stoull(c[18]);
    r.status = c[19];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string summary_csv(const FigureResult& fig) {
  using detail::fmt;
  using detail::fmt_or_empty;
  std::ostringstream o;
  if (!fig.tv_bounds.empty()) {
    o << "chi,tv_numeric,tv_ci,proposed_bound,pinsker_bound,hellinger_bound\n";
    for (const auto& r : fig.tv_bounds)
      o << fmt(r.chi) << ',' << fmt(r.tv_numeric) << ',' << fmt(r.tv_ci) << ',' << fmt(r.proposed_bound) << ','
        << fmt(r.pinsker_bound) << ',' << fmt(r.hellinger_bound) << "\n";
    return o.str();
  }
  o << "figure,parameter,sweep,K,method,mean_objective,std_objective,mean_objective_bits,scenarios,failures\n";
  for (const auto& r : fig.summary)
    o << r.figure << ',' << r.parameter << ',' << fmt(r.sweep) << ',' << r.K << ',' << r.method << ','
      << fmt_or_empty(r.mean) << ',' << fmt_or_empty(r.stddev) << ',' << fmt_or_empty(r.mean / std::log(2.0)) << ','
      << r.scenarios << ',' << r.failures << "\n";
  return o.str();
}

inline std::string trace_csv(const FigureResult& fig) {
  using detail::fmt;
  std::ostringstream o;
  o << "method,scenario,iteration,objective,lambda\n";
  for (const auto& t : fig.trace)
    o << t.method << ',' << t.scenario << ',' << t.iteration << ',' << fmt(t.objective) << ','
      << detail::fmt_or_empty(t.lambda) << "\n";
  return o.str();
}

/// Writes the figure's files into `dir` and returns their paths.
inline std::vector<std::filesystem::path> write_figure(const FigureResult& fig, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  auto put = [&](const std::string& name, const std::string& text) {
    detail::write_file(dir / name, text);
    files.push_back(dir / name);
  };
  put(fig.figure + ".csv", summary_csv(fig));
  if (!fig.solutions.empty()) put(fig.figure + "_solutions.csv", solutions_csv(fig.solutions));
  if (!fig.trace.empty()) put(fig.figure + "_trace.csv", trace_csv(fig));
  put(fig.figure + "_plot.py", detail::plot_script(fig.figure));
  return files;
}

/// Runs every configured figure and writes the run directory.
inline std::vector<std::filesystem::path> run_experiment(const ExperimentSpec& spec, std::size_t jobs = 1,
                                                         std::ostream* log = nullptr) {
  spec.validate();
  const std::filesystem::path dir = spec.output_dir;
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  detail::write_file(dir / "spec.ini", write_spec(spec));
  files.push_back(dir / "spec.ini");
  ZetaCache zetas(laguerre_rule(spec.quad_order));
  for (const auto& figure : spec.figures) {
    if (log) *log << "running " << figure << std::endl;
    const auto fig = run_figure(spec, figure, zetas, jobs);
    std::size_t failed = 0;
    for (const auto& r : fig.solutions)
      if (r.status.rfind("error", 0) == 0) ++failed;
    if (log && failed) *log << "  " << failed << " solver failures recorded in " << figure << "_solutions.csv\n";
    const auto written = write_figure(fig, dir);
    files.insert(files.end(), written.begin(), written.end());
  }
  return files;
}

// ---------------------------------------------------------------------------
// Audit

struct AuditRow {
  SolutionRow solution;
  AuditReport report;
};

/// Monte-Carlo check of one stored solution.
inline AuditReport audit_solution(const SolutionRow& r, std::size_t trials, std::uint64_t seed,
                                  const QuadratureRule& rule = default_rule(), std::size_t jobs = 1) {
  if (r.chi.size() != r.q_norm.size() || r.chi.empty()) throw std::invalid_argument("audit: malformed solution row");
  std::vector<BandDistribution> bands;
  for (std::size_t k = 0; k < r.chi.size(); ++k) {
    auto b = BandDistribution::from_chi(r.chi[k], r.q_norm[k]);
    b.require_covert();
    bands.push_back(b);
  }
  return covertness_audit(bands, r.n_d, r.L, r.epsilon, trials, seed, rule, jobs);
}

inline const char* kAuditHeader =
    "figure,point,sweep,K,method,scenario,chi_hash,n_d,L,epsilon,p_fa,p_md,sum_error,ci_half_width,bound,slack,pass";

/// Replays every solution in a run directory through the detection oracle and
/// writes audit.csv. Rows whose solve failed are skipped.
inline std::vector<AuditRow> audit_run(const std::filesystem::path& dir, std::size_t jobs = 1,
                                       std::optional<std::size_t> trials_override = std::nullopt,
                                       std::ostream* log = nullptr) {
  const auto spec_path = dir / "spec.ini";
  if (!std::filesystem::exists(spec_path)) throw std::runtime_error("not a run directory (no spec.ini): " + dir.string());
  const auto spec = load_spec(spec_path.string());
  const std::size_t trials = trials_override.value_or(spec.trials);
  const auto& rule = laguerre_rule(spec.quad_order);

  std::vector<SolutionRow> rows;
  for (const auto& figure : figure_ids()) {
    const auto path = dir / (figure + "_solutions.csv");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path);
    for (auto& r : parse_solutions_csv(in))
      if (r.status.rfind("ok", 0) == 0) rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error("no solver outputs found in " + dir.string());

  std::vector<AuditRow> out;
  std::ostringstream o;
  o << kAuditHeader << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto seed = derive_seed(spec.seed, {100 + figure_number(r.figure), i});
    const auto report = audit_solution(r, trials, seed, rule, jobs);
    if (log && !report.pass) *log << "audit FAIL: " << r.figure << " point " << r.point << " scenario " << r.scenario << " " << r.method << "\n";
    using detail::fmt;
    o << r.figure << ',' << r.point << ',' << fmt(r.sweep) << ',' << r.K << ',' << r.method << ',' << r.scenario << ','
      << chi_hash(r.chi) << ',' << r.n_d << ',' << r.L << ',' << fmt(r.epsilon) << ',' << fmt(report.estimate.p_fa)
      << ',' << fmt(report.estimate.p_md) << ',' << fmt(report.estimate.sum_error) << ','
      << fmt(report.estimate.ci_half_width) << ',' << fmt(report.bound) << ',' << fmt(report.slack) << ','
      << (report.pass ? "true" : "false") << "\n";
    out.push_back({r, report});
  }
  detail::write_file(dir / "audit.csv", o.str());
  return out;
}

// ---------------------------------------------------------------------------
// Defaults table

struct DefaultEntry {
  std::string name;
  std::string value;
  std::string unit;
};

inline std::vector<DefaultEntry> default_table() {
  const ExperimentSpec s;
  const auto& c = s.scenario;
  using detail::fmt;
  return {
      {"d_A", fmt(c.d_A), "m"},
      {"d_J", fmt(c.d_J), "m"},
      {"d_R", fmt(c.d_R), "m"},
      {"r_c", fmt(c.r_c), "m"},
      {"path_loss_exponent", fmt(c.path_loss_exponent), ""},
      {"noise_A", fmt(c.noise_A_dBm.front()), "dBm"},
      {"noise_R", fmt(c.noise_R_dBm.front()), "dBm"},
      {"noise_T", fmt(c.noise_T_dBm), "dBm"},
      {"P_R", fmt(c.P_R_dBm), "dBm"},
      {"Q", fmt(c.Q_dBm.front()), "dBm"},
      {"M", std::to_string(c.M), "antennas"},
      {"quasi-static epsilon", fmt(s.qs_epsilon), ""},
      {"fast-varying N", std::to_string(s.N), "symbols"},
      {"fast-varying L", std::to_string(s.L), "blocks"},
      {"fast-varying epsilon", fmt(s.fv_epsilon), ""},
      {"fast-varying K", std::to_string(c.K), "bands"},
      {"AO tau0", fmt(s.tau0), ""},
      {"quad_order", std::to_string(s.quad_order), "nodes"},
      {"scenarios_per_point", std::to_string(s.scenarios_per_point), ""},
      {"detection trials", std::to_string(s.trials), ""},
  };
}

inline void list_defaults(std::ostream& out) {
  std::size_t w = 0;
  for (const auto& e : default_table()) w = std::max(w, e.name.size());
  for (const auto& e : default_table())
    out << std::left << std::setw(static_cast<int>(w) + 2) << e.name << e.value << (e.unit.empty() ? "" : " ")
        << e.unit << "\n";
}

}  // namespace covert
