#pragma once

// Quasi-static channels: maximize the sum of effective rates subject to the
// TV covertness budget sum eta(chi_k) <= eps. Single-receiver closed form,
// polyblock outer approximation (global), and successive convex
// approximation (local).

#include "covert/covertness.hpp"
#include "covert/scenario.hpp"
#include "covert/trace.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covert {

enum class QsMethod { closed_form, poa, sca };

inline const char* to_string(QsMethod m) {
  switch (m) {
    case QsMethod::closed_form: return "closed_form";
    case QsMethod::poa: return "poa";
    case QsMethod::sca: return "sca";
  }
  return "?";
}

struct QsSolveResult {
  std::vector<double> chi;
  std::vector<double> gamma;
  std::vector<double> rates;
  double objective = 0.0;
  QsMethod method = QsMethod::closed_form;
  std::vector<TracePoint> trace;
  double constraint_slack = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
  /// Set when the POA vertex cap forced evictions.
  bool heuristic = false;
};

/// (1 - B e^{-A chi/gamma}) ln(1 + gamma) when the bracket is positive, else 0.
inline double effective_rate(double chi, double gamma, double A, double B) {
  if (!(gamma > 0.0) || !(chi > 0.0)) return 0.0;
  const double outage = B * std::exp(-A * chi / gamma);
  if (outage >= 1.0) return 0.0;
  return (1.0 - outage) * std::log1p(gamma);
}

inline double sum_effective_rate(std::span<const double> chi, std::span<const double> gamma,
                                 const QuasiStaticParams& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < chi.size(); ++k) s += effective_rate(chi[k], gamma[k], p.A[k], p.B[k]);
  return s;
}

/// Rate-maximizing SINR threshold of one receiver at a fixed chi. With
/// kappa = 1/gamma and a = A chi, the optimum is the sign change of
/// ln B + log1p(a kappa (1+kappa) ln(1 + 1/kappa)) - a kappa on [ln B / a, inf).
inline double single_receiver_gamma(double A, double B, double chi) {
  if (!(A > 0.0) || !std::isfinite(A)) throw std::invalid_argument("single_receiver_gamma: A must be > 0");
  if (!(B > 1.0) || !std::isfinite(B)) throw std::invalid_argument("single_receiver_gamma: B must be > 1");
  if (!(chi > 0.0 && chi < 1.0)) throw std::invalid_argument("single_receiver_gamma: chi must lie in (0, 1)");
  const double a = A * chi;
  const double ln_b = std::log(B);
  auto h = [&](double kappa) { return ln_b + std::log1p(a * kappa * (1.0 + kappa) * std::log1p(1.0 / kappa)) - a * kappa; };
  double lo = ln_b / a;
  double hi = 2.0 * lo;
  for (int i = 0; h(hi) >= 0.0; ++i) {
    if (i == 200) throw std::runtime_error("single_receiver_gamma: bracket expansion failed");
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) > 0.0 ? lo : hi) = mid;
  }
  return 2.0 / (lo + hi);
}

/// Best effective rate of receiver k at a fixed chi.
inline double single_receiver_rate(double A, double B, double chi) {
  if (chi == 0.0) return 0.0;
  return effective_rate(chi, single_receiver_gamma(A, B, chi), A, B);
}

namespace detail {

inline QsSolveResult finish_qs(std::vector<double> chi, std::vector<double> gamma, const QuasiStaticParams& p,
                               QsMethod method) {
  QsSolveResult r;
  r.chi = std::move(chi);
  r.gamma = std::move(gamma);
  r.rates.resize(r.chi.size());
  for (std::size_t k = 0; k < r.chi.size(); ++k) r.rates[k] = std::log1p(r.gamma[k]);
  r.objective = sum_effective_rate(r.chi, r.gamma, p);
  r.constraint_slack = p.epsilon - tv_upper_bound(r.chi);
  r.method = method;
  return r;
}

inline std::vector<double> optimal_gammas(std::span<const double> chi, const QuasiStaticParams& p) {
  std::vector<double> g(chi.size(), 0.0);
  for (std::size_t k = 0; k < chi.size(); ++k)
    if (chi[k] > 0.0) g[k] = single_receiver_gamma(p.A[k], p.B[k], chi[k]);
  return g;
}

}  // namespace detail

/// K = 1: full budget chi = eta^{-1}(eps) and the matching gamma.
inline QsSolveResult closed_form_solve(const QuasiStaticParams& params) {
  params.validate();
  if (params.K() != 1) throw std::invalid_argument("closed_form_solve: requires K = 1");
  std::vector<double> chi{solve_chi_star(params.epsilon)};
  auto r = detail::finish_qs(chi, detail::optimal_gammas(chi, params), params, QsMethod::closed_form);
  r.trace.push_back({0, r.objective, r.objective, std::numeric_limits<double>::quiet_NaN()});
  return r;
}

// ---------------------------------------------------------------------------
// Polyblock outer approximation

struct PolyblockVertex {
  std::vector<double> x;
  std::vector<double> phi;    // per-coordinate best rate
  std::vector<double> lower;  // improving feasible points below x also lie above this
  double value = 0.0;         // sum of phi, an upper bound on the objective below x
};

struct Polyblock {
  std::vector<PolyblockVertex> vertices;
  std::vector<double> best_point;
  double best_value = 0.0;
  std::size_t iteration = 0;
};

/// Largest t in [0, 1] with sum eta(from_k + t (x_k - from_k)) <= eps, by
/// bisection to 1e-10. `from` must be feasible.
inline double poa_projection(std::span<const double> x, std::span<const double> from, double epsilon) {
  auto excess = [&](double t) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += eta(from[k] + t * (x[k] - from[k]));
    return s - epsilon;
  };
  if (excess(1.0) <= 0.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) <= 0.0 ? lo : hi) = mid;
  }
  return lo;
}

/// Maximizes sum_k phi_k(chi_k) over {chi in [0, chi*]^K : sum eta(chi_k) <= eps}.
/// Stops once the best vertex bound is within delta of the best feasible value.
inline QsSolveResult poa_solve(const QuasiStaticParams& params, double delta = 1e-5, std::size_t max_iter = 100000,
                               std::size_t max_vertices = 100000) {
  params.validate();
  if (!(delta > 0.0)) throw std::invalid_argument("poa_solve: delta must be > 0");
  const std::size_t K = params.K();
  auto phi = [&](std::size_t k, double c) { return single_receiver_rate(params.A[k], params.B[k], c); };

  const double chi_star = solve_chi_star(params.epsilon);
  Polyblock pb;
  PolyblockVertex start;
  start.x.assign(K, chi_star);
  start.phi.resize(K);
  for (std::size_t k = 0; k < K; ++k) start.phi[k] = phi(k, chi_star);
  start.value = std::accumulate(start.phi.begin(), start.phi.end(), 0.0);
  start.lower.assign(K, 0.0);
  pb.vertices.push_back(start);
  pb.best_point.assign(K, 0.0);
  pb.best_value = 0.0;

  // Shrinks a vertex to the smallest box that still holds every feasible
  // point beating the incumbent: coordinate i needs phi_i(y_i) above the
  // incumbent minus the other coordinates' best case (lower bound l_i), and
  // then y_i <= eta^{-1}(eps - sum_{j != i} eta(l_j)). Returns false when the
  // box is empty.
  auto reduce = [&](PolyblockVertex& w) {
    std::vector<double> lower = w.lower;
    for (std::size_t i = 0; i < K; ++i) {
      const double need = pb.best_value - (w.value - w.phi[i]);
      if (need <= 0.0) continue;
      if (need >= w.phi[i]) return false;
      double lo = 0.0, hi = w.x[i];
      for (int it = 0; it < 40 && hi - lo > 1e-9 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (phi(i, mid) < need ? lo : hi) = mid;
      }
      lower[i] = std::max(lo, lower[i]);
    }
    double used = 0.0;
    for (std::size_t i = 0; i < K; ++i) used += eta(lower[i]);
    for (std::size_t i = 0; i < K; ++i) {
      const double room = params.epsilon - (used - eta(lower[i]));
      if (!(room > 0.0)) return false;
      const double cap = solve_chi_star(std::min(room, 1.0 - 1e-12)) + 1e-14;
      if (cap < w.x[i]) {
        if (cap < lower[i]) return false;
        w.value -= w.phi[i];
        w.x[i] = cap;
        w.phi[i] = phi(i, cap);
        w.value += w.phi[i];
      }
    }
    w.lower = std::move(lower);
    return w.value > pb.best_value + delta;
  };

  QsSolveResult result;
  bool converged = false;
  bool evicted = false;
  std::vector<TracePoint> trace;
  for (pb.iteration = 0; pb.iteration < max_iter; ++pb.iteration) {
    if (pb.vertices.empty()) {
      converged = true;
      break;
    }
    std::size_t sel = 0;
    for (std::size_t i = 1; i < pb.vertices.size(); ++i)
      if (pb.vertices[i].value > pb.vertices[sel].value) sel = i;
    const PolyblockVertex v = pb.vertices[sel];
    trace.push_back({pb.iteration, pb.best_value, v.value, std::numeric_limits<double>::quiet_NaN()});
    if (v.value - pb.best_value <= delta) {
      converged = true;
      break;
    }

    // Any point on the upper boundary of the feasible set cuts the polyblock;
    // projecting from the vertex's lower corner keeps the cut inside the
    // region that can still beat the incumbent.
    const double rho = poa_projection(v.x, v.lower, params.epsilon);
    std::vector<double> xf(K), phi_f(K);
    for (std::size_t k = 0; k < K; ++k) {
      xf[k] = v.lower[k] + rho * (v.x[k] - v.lower[k]);
      phi_f[k] = phi(k, xf[k]);
    }
    const double hf = std::accumulate(phi_f.begin(), phi_f.end(), 0.0);
    if (hf > pb.best_value) {
      pb.best_value = hf;
      pb.best_point = xf;
    }

    pb.vertices.erase(pb.vertices.begin() + static_cast<std::ptrdiff_t>(sel));
    if (rho < 1.0) {
      for (std::size_t i = 0; i < K; ++i) {
        if (!(xf[i] < v.x[i])) continue;
        PolyblockVertex nv = v;
        nv.x[i] = xf[i];
        nv.phi[i] = phi_f[i];
        nv.value = v.value - v.phi[i] + phi_f[i];
        if (nv.value <= pb.best_value + delta || !reduce(nv)) continue;
        bool dominated = false;
        for (const auto& w : pb.vertices) {
          bool ge = true;
          for (std::size_t k = 0; k < K && ge; ++k) ge = w.x[k] >= nv.x[k];
          if (ge) {
            dominated = true;
            break;
          }
        }
        if (!dominated) pb.vertices.push_back(std::move(nv));
      }
    }
    std::erase_if(pb.vertices, [&](const PolyblockVertex& w) { return w.value <= pb.best_value + delta; });
    if (pb.vertices.size() > max_vertices) {
      evicted = true;
      std::stable_sort(pb.vertices.begin(), pb.vertices.end(),
                       [](const PolyblockVertex& a, const PolyblockVertex& b) { return a.value > b.value; });
      pb.vertices.resize(max_vertices);
    }
  }

  result = detail::finish_qs(pb.best_point, detail::optimal_gammas(pb.best_point, params), params, QsMethod::poa);
  result.trace = std::move(trace);
  result.iterations = pb.iteration;
  result.converged = converged;
  result.heuristic = evicted;
  return result;
}

// ---------------------------------------------------------------------------
// Successive convex approximation

/// Iterate of the SCA method: chi = t * gamma, alpha and beta are the
/// outage-free probability and rate slacks.
struct ScaState {
  std::vector<double> t, gamma, alpha, beta;
  std::size_t iteration = 0;
  double objective = 0.0;
};

namespace detail {

inline double sca_alpha_cap(double t, double A, double B) { return -std::expm1(std::log(B) - A * t); }

/// min over alpha in [0, a], beta in [0, b] of (alpha - beta)^2 - 2 rho (alpha + beta).
/// The minimizer lies on the upper face alpha = a or beta = b.
inline std::pair<double, double> sca_box_argmin(double a, double b, double rho) {
  auto f = [&](double x, double y) { return (x - y) * (x - y) - 2.0 * rho * (x + y); };
  const double b1 = std::clamp(a + rho, 0.0, b);
  const double a2 = std::clamp(b + rho, 0.0, a);
  return f(a, b1) <= f(a2, b) ? std::pair{a, b1} : std::pair{a2, b};
}

struct ScaBand {
  double A, B, c, rho;
  double t_min;
};

struct ScaPoint {
  double t, gamma, alpha, beta;
};

/// Minimizes (alpha-beta)^2 - 2 rho (alpha+beta) + lambda/2 (c t^2 + gamma^2/c)
/// for one band, with alpha, beta eliminated in closed form and nested Brent
/// searches over gamma and t.
inline ScaPoint sca_band_argmin(const ScaBand& band, double lambda) {
  constexpr int kBits = std::numeric_limits<double>::digits / 2;
  const double drop = band.rho * band.rho + 4.0 * band.rho;  // bounds how far the box term can fall
  const double t_hi = std::sqrt(band.t_min * band.t_min + 2.0 * drop / (lambda * band.c)) * 1.01 + 1e-300;
  const double g_hi = std::sqrt(2.0 * drop * band.c / lambda) * 1.01 + 1e-300;
  auto box_value = [&](double t, double g) {
    const auto [al, be] = sca_box_argmin(std::max(0.0, sca_alpha_cap(t, band.A, band.B)), std::log1p(g), band.rho);
    return (al - be) * (al - be) - 2.0 * band.rho * (al + be);
  };
  auto inner = [&](double t) {
    auto f = [&](double g) { return box_value(t, g) + 0.5 * lambda * g * g / band.c; };
    return boost::math::tools::brent_find_minima(f, 0.0, g_hi, kBits);
  };
  auto outer = [&](double t) { return inner(t).second + 0.5 * lambda * band.c * t * t; };
  double t = boost::math::tools::brent_find_minima(outer, band.t_min, t_hi, kBits).first;
  double g = inner(t).first;

  // Brent only locates the minimum to about sqrt(machine epsilon). When both
  // slacks sit at their caps (|a - b| <= rho) the objective is smooth, so
  // polish with Newton steps on the analytic gradient.
  auto smooth = [&](double tt, double gg) {
    const double a = sca_alpha_cap(tt, band.A, band.B);
    return tt > band.t_min && gg > 0.0 && a > 0.0 && std::abs(a - std::log1p(gg)) <= band.rho;
  };
  auto grad = [&](double tt, double gg, double* hess) {
    const double a = sca_alpha_cap(tt, band.A, band.B), b = std::log1p(gg);
    const double da = band.A * (1.0 - a), db = 1.0 / (1.0 + gg);
    const double ft = (2.0 * (a - b) - 2.0 * band.rho) * da + lambda * band.c * tt;
    const double fg = (-2.0 * (a - b) - 2.0 * band.rho) * db + lambda * gg / band.c;
    if (hess) {
      hess[0] = 2.0 * da * da - (2.0 * (a - b) - 2.0 * band.rho) * band.A * da + lambda * band.c;
      hess[1] = -2.0 * da * db;
      hess[2] = 2.0 * db * db + (2.0 * (a - b) + 2.0 * band.rho) * db * db + lambda / band.c;
    }
    return std::pair{ft, fg};
  };
  if (smooth(t, g)) {
    for (int it = 0; it < 8; ++it) {
      double h[3];
      const auto [ft, fg] = grad(t, g, h);
      const double det = h[0] * h[2] - h[1] * h[1];
      if (!(h[0] > 0.0 && det > 0.0)) break;
      const double nt = t - (h[2] * ft - h[1] * fg) / det;
      const double ng = g - (h[0] * fg - h[1] * ft) / det;
      if (!smooth(nt, ng)) break;
      const auto [nft, nfg] = grad(nt, ng, nullptr);
      if (std::hypot(nft * t, nfg * g) >= std::hypot(ft * t, fg * g)) break;
      t = nt;
      g = ng;
    }
  }
  const auto [al, be] = sca_box_argmin(std::max(0.0, sca_alpha_cap(t, band.A, band.B)), std::log1p(g), band.rho);
  return {t, g, al, be};
}

}  // namespace detail

/// Solves the convex surrogate around `state`: the bilinear budget
/// t^T gamma <= eps is replaced by its tangent upper bound
/// sum 1/2 (c_k t_k^2 + gamma_k^2 / c_k) <= eps with c_k = gamma_k / t_k.
/// The coupling constraint is handled by bisection on its multiplier.
inline ScaState sca_subproblem(const ScaState& state, const QuasiStaticParams& params, double* lambda_out = nullptr) {
  const std::size_t K = params.K();
  std::vector<detail::ScaBand> bands(K);
  std::vector<bool> active(K, false);
  for (std::size_t k = 0; k < K; ++k) {
    if (!(state.t[k] > 0.0) || !(state.gamma[k] > 1e-300)) continue;
    active[k] = true;
    bands[k] = {params.A[k], params.B[k], state.gamma[k] / state.t[k], state.alpha[k] + state.beta[k],
                std::log(params.B[k]) / params.A[k]};
  }
  auto solve_at = [&](double lambda, std::vector<detail::ScaPoint>& pts) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (!active[k]) {
        pts[k] = {0.0, 0.0, 0.0, 0.0};
        continue;
      }
      pts[k] = detail::sca_band_argmin(bands[k], lambda);
      s += 0.5 * (bands[k].c * pts[k].t * pts[k].t + pts[k].gamma * pts[k].gamma / bands[k].c);
    }
    return s;
  };

  std::vector<detail::ScaPoint> hi_pts(K), lo_pts(K);
  double hi = 1.0;
  for (int i = 0; solve_at(hi, hi_pts) > params.epsilon; ++i) {
    if (i == 60) throw std::runtime_error("sca_subproblem: multiplier bracket expansion failed");
    hi *= 2.0;
  }
  double lo = hi;
  bool inactive = false;
  for (;;) {
    lo *= 0.5;
    if (lo < 1e-30) {
      inactive = true;
      break;
    }
    if (solve_at(lo, lo_pts) > params.epsilon) break;
    hi = lo;
    hi_pts = lo_pts;
  }
  if (!inactive) {
    for (int i = 0; i < 200 && hi / lo - 1.0 > 1e-13; ++i) {
      const double mid = std::sqrt(lo * hi);
      if (solve_at(mid, lo_pts) > params.epsilon) {
        lo = mid;
      } else {
        hi = mid;
        hi_pts = lo_pts;
      }
    }
  }
  if (lambda_out) *lambda_out = inactive ? 0.0 : hi;

  ScaState next;
  next.iteration = state.iteration + 1;
  next.t.resize(K);
  next.gamma.resize(K);
  next.alpha.resize(K);
  next.beta.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    next.t[k] = hi_pts[k].t;
    next.gamma[k] = hi_pts[k].gamma;
    // Raising alpha, beta to their caps keeps feasibility and the tangent point.
    next.alpha[k] = active[k] ? std::max(0.0, detail::sca_alpha_cap(next.t[k], params.A[k], params.B[k])) : 0.0;
    next.beta[k] = std::log1p(next.gamma[k]);
  }
  next.objective = 0.0;
  for (std::size_t k = 0; k < K; ++k) next.objective += next.alpha[k] * next.beta[k];
  return next;
}

/// Feasible start: every chi_k at eta^{-1}(eps / (2K)), gamma from the
/// single-receiver optimum, t = chi / gamma.
inline ScaState sca_initial_state(const QuasiStaticParams& params) {
  params.validate();
  const std::size_t K = params.K();
  double chi0 = solve_chi_star(params.epsilon / (2.0 * static_cast<double>(K)));
  // The surrogate budget is sum chi <= eps; shrink if eta^{-1} overshoots it.
  if (static_cast<double>(K) * chi0 > params.epsilon) chi0 = 0.5 * params.epsilon / static_cast<double>(K);
  ScaState s;
  for (std::size_t k = 0; k < K; ++k) {
    const double g = single_receiver_gamma(params.A[k], params.B[k], chi0);
    s.t.push_back(chi0 / g);
    s.gamma.push_back(g);
    s.alpha.push_back(std::max(0.0, detail::sca_alpha_cap(chi0 / g, params.A[k], params.B[k])));
    s.beta.push_back(std::log1p(g));
  }
  for (std::size_t k = 0; k < K; ++k) s.objective += s.alpha[k] * s.beta[k];
  return s;
}

inline QsSolveResult sca_solve(const QuasiStaticParams& params, const ScaState& init, double tol = 1e-6,
                               std::size_t max_iter = 100) {
  params.validate();
  const std::size_t K = params.K();
  if (init.t.size() != K || init.gamma.size() != K || init.alpha.size() != K || init.beta.size() != K)
    throw std::invalid_argument("sca_solve: initial state has wrong size");
  double used = 0.0;
  for (std::size_t k = 0; k < K; ++k) used += init.t[k] * init.gamma[k];
  if (used > params.epsilon * (1.0 + 1e-12)) throw std::invalid_argument("sca_solve: initial state is infeasible");

  ScaState state = init;
  std::vector<TracePoint> trace{{0, state.objective, std::numeric_limits<double>::quiet_NaN(),
                                 std::numeric_limits<double>::quiet_NaN()}};
  bool converged = false;
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    double lambda = 0.0;
    ScaState next = sca_subproblem(state, params, &lambda);
    if (next.objective < state.objective) {
      // Subproblem solved only to Brent precision; a numerical decrease means we are at the fixed point.
      converged = true;
      break;
    }
    const double change = (next.objective - state.objective) / std::max(std::abs(next.objective), 1e-300);
    state = std::move(next);
    trace.push_back({state.iteration, state.objective, std::numeric_limits<double>::quiet_NaN(), lambda});
    if (change < tol) {
      converged = true;
      ++it;
      break;
    }
  }
  std::vector<double> chi(K);
  for (std::size_t k = 0; k < K; ++k) chi[k] = state.t[k] * state.gamma[k];
  auto r = detail::finish_qs(chi, state.gamma, params, QsMethod::sca);
  if (r.constraint_slack < -1e-9) throw std::runtime_error("sca_solve: returned point violates the budget");
  r.trace = std::move(trace);
  r.iterations = it;
  r.converged = converged;
  return r;
}

inline QsSolveResult sca_solve(const QuasiStaticParams& params, double tol = 1e-6, std::size_t max_iter = 100) {
  return sca_solve(params, sca_initial_state(params), tol, max_iter);
}

}  // namespace covert
