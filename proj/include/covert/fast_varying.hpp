#pragma once

// Fast-varying channels: maximize the training-aware ergodic sum rate over
// the pilot fraction tau and the per-band power ratios chi, subject to the
// quadratic KL budget sum zeta_k chi_k^2 / 2 <= 2 eps^2 / L.

#include "covert/covertness.hpp"
#include "covert/parallel.hpp"
#include "covert/quadrature.hpp"
#include "covert/scenario.hpp"
#include "covert/trace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covert {

enum class FvMethod { es, ao };

inline const char* to_string(FvMethod m) { return m == FvMethod::es ? "es" : "ao"; }

struct FvSolveResult {
  std::vector<double> chi;
  double tau = 0.0;
  std::size_t N_t = 0;
  double objective = 0.0;
  double lambda = 0.0;
  FvMethod method = FvMethod::es;
  std::vector<TracePoint> trace;
  std::vector<double> zeta;     // zeta_k at the returned tau
  double budget = 0.0;          // 2 eps^2 / L
  double budget_used = 0.0;     // sum zeta_k chi_k^2 / 2
  std::size_t iterations = 0;
  bool converged = true;
  /// AO only: zeta(q, N) < zeta(q, N - N_t) for some band at the returned point.
  bool zeta_order_violated = false;
};

/// (1 - tau) sum ln(1 + SNR_k) with
/// SNR_k = chi tau G_k / (tau chi E_k + chi mu_tilde_k + tau F1_k + F2_k).
inline double ergodic_sum_rate(std::span<const double> chis, double tau, const FastVaryingParams& p) {
  if (chis.size() != p.K()) throw std::invalid_argument("ergodic_sum_rate: chi vector must have K entries");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("ergodic_sum_rate: tau must lie in (0, 1)");
  double s = 0.0;
  for (std::size_t k = 0; k < chis.size(); ++k) {
    const double c = chis[k];
    if (c < 0.0) throw std::invalid_argument("ergodic_sum_rate: chi must be >= 0");
    if (c == 0.0) continue;
    const double snr = c * tau * p.Gk[k] / (tau * c * p.Ek[k] + c * p.mu_tilde[k] + tau * p.F1[k] + p.F2[k]);
    s += std::log1p(snr);
  }
  return (1.0 - tau) * s;
}

inline double budget_used(std::span<const double> chis, std::span<const double> zetas) {
  double s = 0.0;
  for (std::size_t k = 0; k < chis.size(); ++k) s += 0.5 * zetas[k] * chis[k] * chis[k];
  return s;
}

/// Thread-safe memo of zeta(q, n), keyed by the bit pattern of q.
class ZetaCache {
 public:
  explicit ZetaCache(const QuadratureRule& rule = default_rule()) : rule_(&rule) {}

  double operator()(double q, std::size_t n) {
    const auto key = std::pair{std::bit_cast<std::uint64_t>(q), n};
    {
      std::lock_guard lock(mutex_);
      if (auto it = values_.find(key); it != values_.end()) return it->second;
    }
    const double z = zeta(q, n, *rule_);
    std::lock_guard lock(mutex_);
    values_.emplace(key, z);
    return z;
  }

  const QuadratureRule& rule() const { return *rule_; }

 private:
  const QuadratureRule* rule_;
  std::mutex mutex_;
  std::map<std::pair<std::uint64_t, std::size_t>, double> values_;
};

struct ChiAllocation {
  std::vector<double> chi;
  double lambda = 0.0;
};

namespace detail {

/// Unique nonnegative root of chi ((G+E) chi + F)(E chi + F) = rhs.
inline double stationary_chi(double G, double E, double F, double rhs) {
  if (!(rhs > 0.0)) return 0.0;
  auto lhs = [&](double c) { return c * ((G + E) * c + F) * (E * c + F); };
  double lo = 0.0;
  double hi = rhs / (F * F);  // lhs(c) >= c F^2
  for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (lhs(mid) < rhs ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Fixed-tau power allocation: each chi_k solves the stationarity cubic for a
/// common multiplier lambda, and lambda is bisected (in log scale) until the
/// budget is met with equality.
inline ChiAllocation chi_given_tau(double tau, const FastVaryingParams& p, std::span<const double> zetas,
                                   double budget) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("chi_given_tau: tau must lie in (0, 1)");
  if (!(budget > 0.0)) throw std::invalid_argument("chi_given_tau: budget must be > 0");
  const std::size_t K = p.K();
  if (zetas.size() != K) throw std::invalid_argument("chi_given_tau: need one zeta per band");
  for (double z : zetas)
    if (!(z > 0.0)) throw std::invalid_argument("chi_given_tau: zeta values must be > 0");

  std::vector<double> Gt(K), Et(K), Ft(K);
  for (std::size_t k = 0; k < K; ++k) {
    Gt[k] = tau * p.Gk[k];
    Et[k] = tau * p.Ek[k] + p.mu_tilde[k];
    Ft[k] = tau * p.F1[k] + p.F2[k];
  }
  std::vector<double> chi(K);
  auto used_at = [&](double lambda) {
    for (std::size_t k = 0; k < K; ++k)
      chi[k] = detail::stationary_chi(Gt[k], Et[k], Ft[k], (1.0 - tau) * Gt[k] * Ft[k] / (lambda * zetas[k]));
    return budget_used(chi, zetas);
  };

  double lo = 1e-12, hi = 1.0;
  for (int i = 0; used_at(hi) > budget; ++i) {
    if (i == 60) throw std::runtime_error("chi_given_tau: multiplier bracket expansion failed");
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; used_at(lo) < budget; ++i) {
    if (i == 2000) throw std::runtime_error("chi_given_tau: multiplier bracket expansion failed");
    hi = lo;
    lo *= 0.5;
  }
  double lambda = hi;
  for (int i = 0; i < 400; ++i) {
    lambda = std::sqrt(lo * hi);
    if (lambda <= lo || lambda >= hi) break;
    const double used = used_at(lambda);
    if (std::abs(used - budget) <= 1e-13 * budget) break;
    (used > budget ? lo : hi) = lambda;
  }
  used_at(lambda);
  return {chi, lambda};
}

/// d/dtau of the ergodic rate at fixed chi.
inline double ergodic_rate_derivative(std::span<const double> chis, double tau, const FastVaryingParams& p) {
  double log_sum = 0.0, slope = 0.0;
  for (std::size_t k = 0; k < chis.size(); ++k) {
    const double c = chis[k];
    if (c == 0.0) continue;
    const double G = c * p.Gk[k];
    const double E = c * p.Ek[k] + p.F1[k];
    const double F = c * p.mu_tilde[k] + p.F2[k];
    const double den = tau * E + F;
    log_sum += std::log1p(tau * G / den);
    slope += G * F / (den * (tau * (G + E) + F));
  }
  return -log_sum + (1.0 - tau) * slope;
}

/// Maximizer over tau in (0, 1) of the ergodic rate at fixed chi; the rate
/// is concave in tau, so its derivative is bisected.
inline double tau_given_chi(std::span<const double> chis, const FastVaryingParams& p) {
  if (chis.size() != p.K()) throw std::invalid_argument("tau_given_chi: chi vector must have K entries");
  if (std::none_of(chis.begin(), chis.end(), [](double c) { return c > 0.0; }))
    throw std::invalid_argument("tau_given_chi: chi must not be all zero");
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ergodic_rate_derivative(chis, mid, p) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

inline std::vector<double> zetas_for(const FastVaryingParams& p, std::size_t n, ZetaCache& cache) {
  std::vector<double> z(p.K());
  for (std::size_t k = 0; k < p.K(); ++k) z[k] = cache(p.q_norm[k], n);
  return z;
}

inline void finish_fv(FvSolveResult& r, const FastVaryingParams& p) {
  r.objective = ergodic_sum_rate(r.chi, r.tau, p);
  r.budget = p.budget();
  r.budget_used = budget_used(r.chi, r.zeta);
}

}  // namespace detail

/// Exhaustive search over N_t = 1..N-1; each candidate uses the zeta values
/// of the samples the adversary observes at that pilot length.
inline FvSolveResult es_solve(const FastVaryingParams& p, ZetaCache& cache, std::size_t jobs = 1) {
  p.validate();
  const std::size_t candidates = p.N - 1;
  std::vector<FvSolveResult> per(candidates);
  // zeta is the expensive part; fill the cache in parallel first.
  parallel_for(candidates * p.K(), jobs, [&](std::size_t i) {
    cache(p.q_norm[i % p.K()], p.observed_samples(i / p.K() + 1));
  });
  parallel_for(candidates, jobs, [&](std::size_t i) {
    FvSolveResult& r = per[i];
    r.N_t = i + 1;
    r.tau = static_cast<double>(r.N_t) / static_cast<double>(p.N);
    r.zeta = detail::zetas_for(p, p.observed_samples(r.N_t), cache);
    auto alloc = chi_given_tau(r.tau, p, r.zeta, p.budget());
    r.chi = std::move(alloc.chi);
    r.lambda = alloc.lambda;
    detail::finish_fv(r, p);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates; ++i)
    if (per[i].objective > per[best].objective) best = i;
  FvSolveResult out = per[best];
  out.method = FvMethod::es;
  for (const auto& r : per) out.trace.push_back({r.N_t, r.objective, std::numeric_limits<double>::quiet_NaN(), r.lambda});
  out.iterations = candidates;
  out.converged = true;
  return out;
}

inline FvSolveResult es_solve(const FastVaryingParams& p, std::size_t jobs = 1) {
  ZetaCache cache;
  return es_solve(p, cache, jobs);
}

/// Nearest grid point of tau * N in [1, N-1], ties toward more pilots.
inline std::size_t round_pilots(double tau, std::size_t N) {
  const double x = tau * static_cast<double>(N);
  auto n = static_cast<long long>(std::floor(x + 0.5));
  n = std::clamp<long long>(n, 1, static_cast<long long>(N) - 1);
  return static_cast<std::size_t>(n);
}

/// Alternating optimization: with the tau-independent budget built from
/// zeta(q_k, N), alternate chi_given_tau and tau_given_chi until the rate
/// settles, round tau onto the pilot grid, then re-solve chi with the zeta
/// values of the actual pilot length.
inline FvSolveResult ao_solve(const FastVaryingParams& p, ZetaCache& cache, double tau0 = 0.5, double tol = 1e-4,
                              std::size_t max_iter = 50) {
  p.validate();
  if (!(tau0 > 0.0 && tau0 < 1.0)) throw std::invalid_argument("ao_solve: tau0 must lie in (0, 1)");
  const auto zeta_full = detail::zetas_for(p, p.N, cache);
  const double budget = p.budget();

  FvSolveResult out;
  out.method = FvMethod::ao;
  double tau = tau0;
  double prev = -std::numeric_limits<double>::infinity();
  std::vector<double> chi;
  bool converged = false;
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    auto alloc = chi_given_tau(tau, p, zeta_full, budget);
    chi = std::move(alloc.chi);
    tau = tau_given_chi(chi, p);
    const double value = ergodic_sum_rate(chi, tau, p);
    out.trace.push_back({it + 1, value, std::numeric_limits<double>::quiet_NaN(), alloc.lambda});
    if (std::isfinite(prev) && std::abs(value - prev) <= tol * std::abs(value)) {
      converged = true;
      ++it;
      break;
    }
    prev = value;
  }

  out.N_t = round_pilots(tau, p.N);
  out.tau = static_cast<double>(out.N_t) / static_cast<double>(p.N);
  out.zeta = detail::zetas_for(p, p.observed_samples(out.N_t), cache);
  for (std::size_t k = 0; k < p.K(); ++k)
    if (zeta_full[k] < out.zeta[k]) out.zeta_order_violated = true;
  auto refined = chi_given_tau(out.tau, p, out.zeta, budget);
  out.chi = std::move(refined.chi);
  out.lambda = refined.lambda;
  detail::finish_fv(out, p);
  out.iterations = it;
  out.converged = converged;
  return out;
}

inline FvSolveResult ao_solve(const FastVaryingParams& p, double tau0 = 0.5, double tol = 1e-4,
                              std::size_t max_iter = 50) {
  ZetaCache cache;
  return ao_solve(p, cache, tau0, tol, max_iter);
}

}  // namespace covert
