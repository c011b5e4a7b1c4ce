#pragma once

// INI-style experiment configuration. One flat section per module:
//
//   [scenario]      geometry, powers, noise, antennas
//   [covertness]    quad_order
//   [quasi_static]  epsilon, method, poa_delta, ...
//   [fast_varying]  N, L, epsilon, method, tau0, ...
//   [detection]     trials, qs_samples, tv_samples
//   [experiment]    figures, scenarios_per_point, seed, output_dir
//   [sweep]         <figure_id> = comma-separated grid (optional override)
//
// Per-band scenario keys accept one value or K comma-separated values.

#include "covert/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace covert {

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig2_tv_bounds",     "fig3_sca_convergence", "fig4_rate_vs_Q",
                                            "fig5_rate_vs_M",     "fig6_ao_convergence",  "fig7_rate_vs_PR",
                                            "fig8_rate_vs_Q_fast", "fig9_rate_vs_eps"};
  return ids;
}

inline bool is_figure_id(const std::string& id) {
  const auto& ids = figure_ids();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

/// Default sweep grid of each figure (empty for the convergence traces).
inline std::vector<double> default_sweep(const std::string& figure) {
  if (figure == "fig2_tv_bounds") {
    std::vector<double> g;
    for (int i = 1; i <= 18; ++i) g.push_back(0.05 * i);
    return g;
  }
  if (figure == "fig4_rate_vs_Q") return {15, 20, 25, 30, 35};
  if (figure == "fig5_rate_vs_M") return {5, 10, 20, 40};
  if (figure == "fig7_rate_vs_PR") return {-5, 0, 5, 10, 15};
  if (figure == "fig8_rate_vs_Q_fast") return {15, 20, 25, 30, 35, 40, 45};
  if (figure == "fig9_rate_vs_eps") return {0.9, 0.92, 0.94, 0.96, 0.98, 0.99};
  if (figure == "fig3_sca_convergence" || figure == "fig6_ao_convergence") return {0};
  throw std::invalid_argument("unknown figure id: " + figure);
}

struct ExperimentSpec {
  ScenarioConfig scenario;
  std::size_t quad_order = 128;

  double qs_epsilon = 0.005;
  std::string qs_method = "both";  // closed_form | poa | sca | both
  double poa_delta = 1e-2;
  std::size_t poa_max_iter = 100000;
  std::size_t poa_max_vertices = 100000;
  /// With method = both, POA is skipped above this many bands.
  std::size_t poa_max_K = 3;
  double sca_tol = 1e-6;
  std::size_t sca_max_iter = 100;

  std::size_t N = 100;
  std::size_t L = 100;
  double fv_epsilon = 0.05;
  std::string fv_method = "both";  // es | ao | both
  double tau0 = 0.5;
  double ao_tol = 1e-4;
  std::size_t ao_max_iter = 50;
  bool adversary_observes_pilots = false;

  std::size_t trials = 100000;
  std::size_t qs_samples = 500;     // adversary samples per block in the quasi-static audit
  std::size_t tv_samples = 1000000;

  std::vector<std::string> figures = figure_ids();
  std::map<std::string, std::vector<double>> sweeps;
  std::size_t scenarios_per_point = 20;
  std::size_t trace_scenarios = 4;
  std::size_t fig3_K = 3;
  std::size_t fig4_K = 3;
  std::size_t fig5_K = 4;
  std::vector<std::size_t> fig8_K{2, 3, 4};
  std::size_t fig9_block_product = 1500;
  std::uint64_t seed = 1;
  std::string output_dir = "run";

  std::vector<double> sweep(const std::string& figure) const {
    if (auto it = sweeps.find(figure); it != sweeps.end()) return it->second;
    return default_sweep(figure);
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("ExperimentSpec: " + what); };
    scenario.validate();
    if (quad_order < 4) fail("quad_order must be >= 4");
    if (!(qs_epsilon > 0.0 && qs_epsilon < 1.0)) fail("quasi_static.epsilon must be in (0,1)");
    if (!(fv_epsilon > 0.0 && fv_epsilon < 1.0)) fail("fast_varying.epsilon must be in (0,1)");
    if (qs_method != "closed_form" && qs_method != "poa" && qs_method != "sca" && qs_method != "both")
      fail("quasi_static.method must be closed_form, poa, sca or both");
    if (fv_method != "es" && fv_method != "ao" && fv_method != "both") fail("fast_varying.method must be es, ao or both");
    if (!(poa_delta > 0.0)) fail("poa_delta must be > 0");
    if (!(sca_tol > 0.0) || !(ao_tol > 0.0)) fail("tolerances must be > 0");
    if (N < 2) fail("N must be >= 2");
    if (L < 1) fail("L must be >= 1");
    if (!(tau0 > 0.0 && tau0 < 1.0)) fail("tau0 must be in (0,1)");
    if (trials < 1000) fail("detection.trials must be >= 1000");
    if (qs_samples < 1) fail("qs_samples must be >= 1");
    if (tv_samples < 1) fail("tv_samples must be >= 1");
    if (figures.empty()) fail("no figures selected");
    for (const auto& f : figures)
      if (!is_figure_id(f)) fail("unknown figure id: " + f);
    for (const auto& [f, grid] : sweeps) {
      if (!is_figure_id(f)) fail("sweep for unknown figure: " + f);
      if (grid.empty()) fail("empty sweep for " + f);
    }
    if (scenarios_per_point < 1) fail("scenarios_per_point must be >= 1");
    if (trace_scenarios < 1) fail("trace_scenarios must be >= 1");
    if (fig3_K < 1 || fig4_K < 1 || fig5_K < 1 || fig8_K.empty()) fail("figure K must be >= 1");
    if (fig9_block_product % N != 0) fail("fig9_block_product must be a multiple of N");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + ": not a number: " + s);
  }
  if (used != s.size()) throw std::invalid_argument("config: " + key + ": not a number: " + s);
  return v;
}

inline std::vector<double> parse_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_double(item, key));
  return out;
}

inline Point parse_point(const std::string& s, const std::string& key) {
  const auto v = parse_doubles(s, key);
  if (v.size() != 2) throw std::invalid_argument("config: " + key + " must be x, y");
  return {v[0], v[1]};
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config: " + key + ": expected a boolean: " + s);
}

inline std::size_t parse_count(const std::string& s, const std::string& key) {
  const double v = parse_double(s, key);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e15) throw std::invalid_argument("config: " + key + ": expected a count: " + s);
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Parses INI text. Unknown sections or keys are errors, so typos surface.
inline ExperimentSpec parse_spec(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  ExperimentSpec s;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw std::invalid_argument("config: key outside a section: " + section);
    for (const auto& [key, node] : body) {
      const std::string v = detail::trim(node.data());
      const std::string name = section + "." + key;
      using namespace detail;
      auto unknown = [&] { throw std::invalid_argument("config: unknown key " + name); };
      if (section == "scenario") {
        auto& c = s.scenario;
        if (key == "K") c.K = parse_count(v, name);
        else if (key == "M") c.M = parse_count(v, name);
        else if (key == "d_A") c.d_A = parse_double(v, name);
        else if (key == "d_J") c.d_J = parse_double(v, name);
        else if (key == "d_R") c.d_R = parse_double(v, name);
        else if (key == "r_c") c.r_c = parse_double(v, name);
        else if (key == "path_loss_exponent") c.path_loss_exponent = parse_double(v, name);
        else if (key == "P_R_dBm") c.P_R_dBm = parse_double(v, name);
        else if (key == "Q_dBm") c.Q_dBm = parse_doubles(v, name);
        else if (key == "noise_A_dBm") c.noise_A_dBm = parse_doubles(v, name);
        else if (key == "noise_R_dBm") c.noise_R_dBm = parse_doubles(v, name);
        else if (key == "noise_T_dBm") c.noise_T_dBm = parse_double(v, name);
        else if (key == "P_dBm") c.P_dBm = parse_doubles(v, name);
        else if (key == "pos_T") c.pos_T = parse_point(v, name);
        else if (key == "pos_A") c.pos_A = parse_point(v, name);
        else if (key == "pos_J") c.pos_J = parse_point(v, name);
        else unknown();
      } else if (section == "covertness") {
        if (key == "quad_order") s.quad_order = parse_count(v, name);
        else unknown();
      } else if (section == "quasi_static") {
        if (key == "epsilon") s.qs_epsilon = parse_double(v, name);
        else if (key == "method") s.qs_method = v;
        else if (key == "poa_delta") s.poa_delta = parse_double(v, name);
        else if (key == "poa_max_iter") s.poa_max_iter = parse_count(v, name);
        else if (key == "poa_max_vertices") s.poa_max_vertices = parse_count(v, name);
        else if (key == "poa_max_K") s.poa_max_K = parse_count(v, name);
        else if (key == "sca_tol") s.sca_tol = parse_double(v, name);
        else if (key == "sca_max_iter") s.sca_max_iter = parse_count(v, name);
        else unknown();
      } else if (section == "fast_varying") {
        if (key == "N") s.N = parse_count(v, name);
        else if (key == "L") s.L = parse_count(v, name);
        else if (key == "epsilon") s.fv_epsilon = parse_double(v, name);
        else if (key == "method") s.fv_method = v;
        else if (key == "tau0") s.tau0 = parse_double(v, name);
        else if (key == "tol") s.ao_tol = parse_double(v, name);
        else if (key == "max_iter") s.ao_max_iter = parse_count(v, name);
        else if (key == "adversary_observes_pilots") s.adversary_observes_pilots = parse_bool(v, name);
        else unknown();
      } else if (section == "detection") {
        if (key == "trials") s.trials = parse_count(v, name);
        else if (key == "qs_samples") s.qs_samples = parse_count(v, name);
        else if (key == "tv_samples") s.tv_samples = parse_count(v, name);
        else unknown();
      } else if (section == "experiment") {
        if (key == "figures") s.figures = split_list(v);
        else if (key == "scenarios_per_point") s.scenarios_per_point = parse_count(v, name);
        else if (key == "trace_scenarios") s.trace_scenarios = parse_count(v, name);
        else if (key == "seed") s.seed = static_cast<std::uint64_t>(std::stoull(v));
        else if (key == "output_dir") s.output_dir = v;
        else if (key == "fig3_K") s.fig3_K = parse_count(v, name);
        else if (key == "fig4_K") s.fig4_K = parse_count(v, name);
        else if (key == "fig5_K") s.fig5_K = parse_count(v, name);
        else if (key == "fig8_K") {
          s.fig8_K.clear();
          for (double k : parse_doubles(v, name)) s.fig8_K.push_back(parse_count(fmt(k), name));
        } else if (key == "fig9_block_product") s.fig9_block_product = parse_count(v, name);
        else unknown();
      } else if (section == "sweep") {
        s.sweeps[key] = parse_doubles(v, name);
      } else {
        throw std::invalid_argument("config: unknown section [" + section + "]");
      }
    }
  }
  s.scenario.seed = s.seed;
  return s;
}

inline ExperimentSpec parse_spec_string(const std::string& text) {
  std::istringstream in(text);
  return parse_spec(in);
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_spec(in);
}

/// Full INI rendering of a spec; parse_spec(write_spec(s)) reproduces s.
inline std::string write_spec(const ExperimentSpec& s) {
  using detail::fmt;
  using detail::join;
  std::ostringstream o;
  const auto& c = s.scenario;
  o << "[scenario]\n"
    << "K = " << c.K << "\nM = " << c.M << "\nd_A = " << fmt(c.d_A) << "\nd_J = " << fmt(c.d_J)
    << "\nd_R = " << fmt(c.d_R) << "\nr_c = " << fmt(c.r_c) << "\npath_loss_exponent = " << fmt(c.path_loss_exponent)
    << "\nP_R_dBm = " << fmt(c.P_R_dBm) << "\nQ_dBm = " << join(c.Q_dBm) << "\nnoise_A_dBm = " << join(c.noise_A_dBm)
    << "\nnoise_R_dBm = " << join(c.noise_R_dBm) << "\nnoise_T_dBm = " << fmt(c.noise_T_dBm) << "\n";
  if (!c.P_dBm.empty()) o << "P_dBm = " << join(c.P_dBm) << "\n";
  if (c.pos_T) o << "pos_T = " << fmt(c.pos_T->x) << ", " << fmt(c.pos_T->y) << "\n";
  if (c.pos_A) o << "pos_A = " << fmt(c.pos_A->x) << ", " << fmt(c.pos_A->y) << "\n";
  if (c.pos_J) o << "pos_J = " << fmt(c.pos_J->x) << ", " << fmt(c.pos_J->y) << "\n";
  o << "\n[covertness]\nquad_order = " << s.quad_order << "\n";
  o << "\n[quasi_static]\nepsilon = " << fmt(s.qs_epsilon) << "\nmethod = " << s.qs_method
    << "\npoa_delta = " << fmt(s.poa_delta) << "\npoa_max_iter = " << s.poa_max_iter
    << "\npoa_max_vertices = " << s.poa_max_vertices << "\npoa_max_K = " << s.poa_max_K << "\nsca_tol = " << fmt(s.sca_tol)
    << "\nsca_max_iter = " << s.sca_max_iter << "\n";
  o << "\n[fast_varying]\nN = " << s.N << "\nL = " << s.L << "\nepsilon = " << fmt(s.fv_epsilon)
    << "\nmethod = " << s.fv_method << "\ntau0 = " << fmt(s.tau0) << "\ntol = " << fmt(s.ao_tol)
    << "\nmax_iter = " << s.ao_max_iter
    << "\nadversary_observes_pilots = " << (s.adversary_observes_pilots ? "true" : "false") << "\n";
  o << "\n[detection]\ntrials = " << s.trials << "\nqs_samples = " << s.qs_samples << "\ntv_samples = " << s.tv_samples
    << "\n";
  o << "\n[experiment]\nfigures = ";
  for (std::size_t i = 0; i < s.figures.size(); ++i) o << (i ? ", " : "") << s.figures[i];
  o << "\nscenarios_per_point = " << s.scenarios_per_point << "\ntrace_scenarios = " << s.trace_scenarios
    << "\nseed = " << s.seed << "\noutput_dir = " << s.output_dir << "\nfig3_K = " << s.fig3_K
    << "\nfig4_K = " << s.fig4_K << "\nfig5_K = " << s.fig5_K << "\nfig8_K = ";
  for (std::size_t i = 0; i < s.fig8_K.size(); ++i) o << (i ? ", " : "") << s.fig8_K[i];
  o << "\nfig9_block_product = " << s.fig9_block_product << "\n";
  if (!s.sweeps.empty()) {
    o << "\n[sweep]\n";
    for (const auto& [f, grid] : s.sweeps) o << f << " = " << join(grid) << "\n";
  }
  return o.str();
}

}  // namespace covert
