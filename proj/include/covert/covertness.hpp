#pragma once

// Covertness metrics: the per-band energy densities seen by the adversary,
// total-variation identities and bounds, and the finite-sample KL divergence
// with its small-signal curvature coefficient.

#include "covert/parallel.hpp"
#include "covert/quadrature.hpp"
#include "covert/rng.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace covert {

/// Normalized signal and jamming powers of one band at the adversary.
struct BandDistribution {
  double p_norm = 0.0;
  double q_norm = 1.0;
  double chi = 0.0;

  static BandDistribution from_powers(double p, double q) {
    if (!(q > 0.0)) throw std::invalid_argument("BandDistribution: q must be > 0");
    if (!(p >= 0.0)) throw std::invalid_argument("BandDistribution: p must be >= 0");
    return {p, q, p / q};
  }
  static BandDistribution from_chi(double chi, double q) { return from_powers(chi * q, q); }

  /// Throws unless the band is usable as a covertness variable (chi in [0,1)).
  void require_covert() const {
    if (!(chi >= 0.0 && chi < 1.0))
      throw std::domain_error("BandDistribution: chi must lie in [0, 1)");
  }
};

// ---------------------------------------------------------------------------
// Closed-form TV quantities

/// eta(x) = x^{1/(1-x)}, evaluated as exp(ln x / (1 - x)).
inline double eta(double x) {
  if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("eta: argument must lie in [0, 1)");
  if (x == 0.0) return 0.0;
  return std::exp(std::log(x) / (1.0 - x));
}

/// Single-band TV distance between the signal-present and signal-absent
/// energy laws. Same function as eta.
inline double tv_closed_form_k1(double chi) { return eta(chi); }

inline double tv_upper_bound(std::span<const double> chis) {
  double s = 0.0;
  for (double c : chis) s += eta(c);
  return s;
}

/// Inverse of eta on (0, 1) by bisection on [1e-15, 1 - 1e-12]. For eps at or
/// above the supremum e^{-1} the upper bracket end is returned.
inline double solve_chi_star(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("solve_chi_star: epsilon must lie in (0, 1)");
  double lo = 1e-15;
  double hi = 1.0 - 1e-12;
  if (eta(hi) <= epsilon) return hi;
  if (eta(lo) >= epsilon) return lo;
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (eta(mid) < epsilon ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Energy densities and numeric TV

/// Density of the received power with the transmitter on.
inline double pdf_U(double x, const BandDistribution& band, double noise) {
  const double y = x - noise;
  if (y < 0.0) return 0.0;
  const double q = band.q_norm * noise;
  const double p = band.p_norm * noise;
  if (p == 0.0) return std::exp(-y / q) / q;
  if (p == q) return y / (q * q) * std::exp(-y / q);
  return -std::exp(-y / q) * std::expm1(-y * (q - p) / (p * q)) / (q - p);
}

/// Density of the received power with the transmitter off.
inline double pdf_V(double x, const BandDistribution& band, double noise) {
  const double y = x - noise;
  if (y < 0.0) return 0.0;
  const double q = band.q_norm * noise;
  return std::exp(-y / q) / q;
}

/// 0.5 * integral |f_U - f_V| by adaptive quadrature, split at the density
/// crossing point.
inline double tv_numeric_k1(const BandDistribution& band, double noise) {
  band.require_covert();
  if (!(noise > 0.0)) throw std::invalid_argument("tv_numeric_k1: noise must be > 0");
  if (band.p_norm == 0.0) return 0.0;
  const double qhat = band.q_norm * noise;
  // Work in y = (x - noise) / qhat so the integrand has unit scale.
  auto diff = [&](double y) { return qhat * (pdf_U(noise + qhat * y, band, noise) - pdf_V(noise + qhat * y, band, noise)); };
  auto absdiff = [&](double y) { return std::abs(diff(y)); };

  // f_U < f_V near the support edge and f_U > f_V in the tail.
  double hi = 1.0;
  while (diff(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw std::runtime_error("tv_numeric_k1: density crossing not bracketed");
  }
  boost::math::tools::eps_tolerance<double> tol(50);
  auto [a, b] = boost::math::tools::bisect(diff, 0.0, hi, tol);
  const double crossing = 0.5 * (a + b);

  double err_left = 0.0;
  const double left = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      absdiff, 0.0, crossing, 15, 1e-13, &err_left);
  boost::math::quadrature::exp_sinh<double> tail;
  double err_right = 0.0;
  const double right = tail.integrate(absdiff, crossing, std::numeric_limits<double>::infinity(), 1e-13, &err_right);
  const double abs_err = 0.5 * (err_left * std::max(left, 1e-300) + err_right * std::max(right, 1e-300));
  if (!(abs_err <= 1e-8) || !std::isfinite(left + right)) {
    std::ostringstream msg;
    msg << "tv_numeric_k1: quadrature did not converge (chi=" << band.chi << ", error estimate " << abs_err << ")";
    throw std::runtime_error(msg.str());
  }
  return 0.5 * (left + right);
}

struct MonteCarloEstimate {
  double estimate = 0.0;
  double ci_half_width = 0.0;
  std::size_t samples = 0;
};

/// Monte-Carlo TV between the K-band products, sampling from the
/// signal-absent law. Work is split into a fixed number of shards with their
/// own streams, so the result does not depend on `jobs`.
inline MonteCarloEstimate tv_numeric_product(std::span<const BandDistribution> bands, std::size_t samples,
                                             std::uint64_t seed, std::size_t jobs = 1) {
  if (bands.empty()) throw std::invalid_argument("tv_numeric_product: need at least one band");
  if (samples < 2) throw std::invalid_argument("tv_numeric_product: need at least two samples");
  std::vector<double> slope;  // (1 - chi) / chi, the exponent of the ratio
  std::vector<double> scale;  // 1 / (1 - chi)
  for (const auto& b : bands) {
    b.require_covert();
    if (b.chi == 0.0) continue;
    slope.push_back((1.0 - b.chi) / b.chi);
    scale.push_back(1.0 / (1.0 - b.chi));
  }
  if (slope.empty()) return {0.0, 0.0, samples};

  constexpr std::size_t kShards = 64;
  std::vector<double> sum(kShards, 0.0), sum_sq(kShards, 0.0);
  parallel_for(kShards, jobs, [&](std::size_t shard) {
    const std::size_t begin = samples * shard / kShards;
    const std::size_t end = samples * (shard + 1) / kShards;
    auto rng = make_stream(seed, {shard});
    std::exponential_distribution<double> exp1(1.0);
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      double ratio = 1.0;
      for (std::size_t k = 0; k < slope.size(); ++k) ratio *= -std::expm1(-slope[k] * exp1(rng)) * scale[k];
      const double d = std::abs(ratio - 1.0);
      s += d;
      s2 += d * d;
    }
    sum[shard] = s;
    sum_sq[shard] = s2;
  });
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < kShards; ++i) {
    s += sum[i];
    s2 += sum_sq[i];
  }
  const double n = static_cast<double>(samples);
  const double mean = s / n;
  const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
  return {0.5 * mean, 0.5 * 1.96 * std::sqrt(var / n), samples};
}

/// KL divergence from the signal-absent to the signal-present energy law of
/// the K bands (infinite-sample densities): ln(1-chi) + digamma(1/(1-chi)) + gamma_E per band.
inline double kl_limit(std::span<const double> chis) {
  constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
  double total = 0.0;
  for (double c : chis) {
    if (!(c >= 0.0 && c < 1.0)) throw std::domain_error("kl_limit: chi must lie in [0, 1)");
    if (c == 0.0) continue;
    total += std::log1p(-c) + boost::math::digamma(1.0 / (1.0 - c)) + kEulerGamma;
  }
  return total;
}

/// Pinsker bound sqrt(D / 2) on the K-band TV.
inline double pinsker_tv_bound(std::span<const double> chis) { return std::sqrt(0.5 * kl_limit(chis)); }

/// Bhattacharyya coefficient integral sqrt(f_U f_V) of one band.
inline double bhattacharyya_k1(double chi) {
  if (!(chi >= 0.0 && chi < 1.0)) throw std::domain_error("bhattacharyya_k1: chi must lie in [0, 1)");
  if (chi == 0.0) return 1.0;
  const double slope = (1.0 - chi) / chi;
  const double scale = 1.0 / (1.0 - chi);
  auto f = [&](double y) { return std::exp(-y) * std::sqrt(-std::expm1(-slope * y) * scale); };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-12);
}

/// Hellinger-based TV bound sqrt(1 - BC^2) with BC the product of the
/// per-band coefficients.
inline double hellinger_tv_bound(std::span<const double> chis) {
  double bc = 1.0;
  for (double c : chis) bc *= bhattacharyya_k1(c);
  return std::sqrt(std::max(0.0, 1.0 - bc * bc));
}

// ---------------------------------------------------------------------------
// Finite-sample quantities

/// ln Phi(x, z) with Phi(x, z) = int_0^inf e^{-v} (1+xv)^{-n} e^{-z/(1+xv)} dv.
/// Gauss-Laguerre of the given order is checked against half the order; if
/// the two disagree by more than 1e-8 the integrand is too peaked for the
/// rule and a mode-centred panel quadrature is used instead.
inline double ln_phi(double x, double z, std::size_t n, const QuadratureRule& rule) {
  if (n < 1) throw std::invalid_argument("ln_phi: n must be >= 1");
  if (!(x >= 0.0) || !(z >= 0.0) || !std::isfinite(x) || !std::isfinite(z))
    throw std::invalid_argument("ln_phi: x and z must be finite and >= 0");
  if (x == 0.0) return -z;
  const double nd = static_cast<double>(n);
  auto inner = [&](double v) {
    const double w = 1.0 + x * v;
    return -nd * std::log(w) - z / w;
  };
  auto gauss = [&](const QuadratureRule& r) {
    LogSumExp acc;
    const auto nodes = r.nodes();
    const auto lw = r.log_weights();
    for (std::size_t i = 0; i < nodes.size(); ++i) acc.add(lw[i] + inner(nodes[i]));
    return acc.value();
  };
  const double fine = gauss(rule);
  const double coarse = gauss(laguerre_rule(std::max<std::size_t>(2, rule.order() / 2), rule.alpha()));
  if (std::isfinite(fine) && std::abs(fine - coarse) <= 1e-8) return fine;

  auto g = [&](double v) { return -v + inner(v); };
  const double s = std::sqrt(nd * nd * x * x + 4.0 * z * x);
  const double w_star = 2.0 * z * x / (nd * x + s);
  double mode = 0.0;
  double scale = 1.0;
  if (w_star > 1.0) {
    mode = (w_star - 1.0) / x;
    const double curvature = x * (nd * x + 2.0 * w_star) / (w_star * w_star);
    scale = std::min(1.0, 1.0 / std::sqrt(curvature));
  } else {
    const double slope = -1.0 - nd * x + z * x;
    const double curv = x * x * (nd - 2.0 * z);
    scale = 1.0 / std::max({1.0, std::abs(slope), std::sqrt(std::abs(curv))});
  }
  scale = std::max(scale, 1e-12 * (1.0 + mode));
  const double value = log_unimodal_integral(g, mode, scale);
  if (!std::isfinite(value)) throw std::runtime_error("ln_phi: non-finite result");
  return value;
}

inline double ln_phi(double x, double z, std::size_t n) { return ln_phi(x, z, n, default_rule()); }

inline double phi(double x, double z, std::size_t n, const QuadratureRule& rule) {
  return std::exp(ln_phi(x, z, n, rule));
}

/// Per-band log-likelihood ratio ln Psi(p, q, z) of the normalized block
/// energy z, given the two ln Phi values.
inline double ln_psi_from(double p, double q, double ln_phi_p, double ln_phi_q) {
  if (p == 0.0) return 0.0;
  const double u = p / (q - p) * -std::expm1(ln_phi_p - ln_phi_q);
  if (!(u > -1.0)) throw std::domain_error("ln_psi: likelihood ratio is not positive");
  return std::log1p(u);
}

inline double ln_psi(double p, double q, double z, std::size_t n, const QuadratureRule& rule) {
  if (!(p >= 0.0 && p < q)) throw std::domain_error("ln_psi: requires 0 <= p < q");
  if (p == 0.0) return 0.0;
  return ln_psi_from(p, q, ln_phi(p, z, n, rule), ln_phi(q, z, n, rule));
}

namespace detail {

/// Log of the integral of exp(log_f(t)) over the real line, walking panels of
/// fixed width outward from `center` until the integrand is negligible.
template <class LogFn>
double log_walk_integral(LogFn&& log_f, double center, double width, double cutoff = 40.0) {
  constexpr std::size_t kMaxPanels = 100000;
  LogSumExp acc;
  for (int dir : {+1, -1}) {
    double t = center;
    for (std::size_t i = 0;; ++i) {
      if (i == kMaxPanels) throw std::runtime_error("log_walk_integral: integrand did not decay");
      const double next = t + dir * width;
      acc.add(dir > 0 ? log_panel_integral(log_f, t, next) : log_panel_integral(log_f, next, t));
      t = next;
      const double total = acc.value();
      if (std::isfinite(total) && log_f(t) < total - cutoff) break;
    }
  }
  return acc.value();
}

/// u - log1p(u), accurate for small |u|.
inline double kl_kernel(double u) {
  if (std::abs(u) < 1e-4) return u * u * (0.5 - u * (1.0 / 3.0 - 0.25 * u));
  return u - std::log1p(u);
}

/// ln(z^n / (n-1)!) at z = e^t: the Gamma factor of the energy density times
/// the Jacobian of z = e^t.
inline double log_gamma_jacobian(double t, std::size_t n) {
  return static_cast<double>(n) * t - std::lgamma(static_cast<double>(n));
}

inline double energy_walk_center(double q, std::size_t n) {
  return std::log(static_cast<double>(n)) + std::log1p(q * 0.6931471805599453);
}

inline double energy_walk_width(std::size_t n) {
  return std::min(0.1, 0.5 / std::sqrt(static_cast<double>(n)));
}

}  // namespace detail

/// KL divergence D(f0 || f1) between the signal-absent and signal-present
/// laws of the normalized energy of n samples. Computed as E_f0[u - log1p(u)]
/// with Psi = 1 + u; E_f0[u] = 0 exactly, and this form is nonnegative
/// term by term. The outer integral runs over t = ln z with composite
/// Gauss-Legendre panels.
inline double kl_divergence(double p, double q, std::size_t n, const QuadratureRule& rule) {
  if (n < 1) throw std::invalid_argument("kl_divergence: n must be >= 1");
  if (!(q > 0.0)) throw std::invalid_argument("kl_divergence: q must be > 0");
  if (!(p >= 0.0 && p < q)) throw std::domain_error("kl_divergence: requires 0 <= p < q");
  if (p == 0.0) return 0.0;
  const double ratio = p / (q - p);
  auto log_f = [&](double t) {
    const double z = std::exp(t);
    const double lq = ln_phi(q, z, n, rule);
    const double u = ratio * -std::expm1(ln_phi(p, z, n, rule) - lq);
    const double h = detail::kl_kernel(u);
    if (!(h > 0.0)) return -std::numeric_limits<double>::infinity();
    return detail::log_gamma_jacobian(t, n) + lq + std::log(h);
  };
  return std::exp(detail::log_walk_integral(log_f, detail::energy_walk_center(q, n), detail::energy_walk_width(n)));
}

inline double kl_divergence(double p, double q, std::size_t n) { return kl_divergence(p, q, n, default_rule()); }

/// Curvature coefficient: D(p, q, n) ~ zeta(q, n) p^2 / (2 q^2) as p -> 0.
/// Evaluated as E_f0[(1 - e^{-z}/Phi(q, z))^2], which equals
/// E_{Gamma(n,1)}[e^{-z}/Phi(q, z)] - 1 without the cancellation.
inline double zeta(double q, std::size_t n, const QuadratureRule& rule) {
  if (n < 1) throw std::invalid_argument("zeta: n must be >= 1");
  if (!(q > 0.0) || !std::isfinite(q)) throw std::invalid_argument("zeta: q must be > 0");
  auto log_f = [&](double t) {
    const double z = std::exp(t);
    const double lq = ln_phi(q, z, n, rule);
    const double d = std::abs(std::expm1(-z - lq));
    if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
    return detail::log_gamma_jacobian(t, n) + lq + 2.0 * std::log(d);
  };
  const double value =
      std::exp(detail::log_walk_integral(log_f, detail::energy_walk_center(q, n), detail::energy_walk_width(n)));
  if (!std::isfinite(value)) throw std::runtime_error("zeta: non-finite result");
  return value;
}

inline double zeta(double q, std::size_t n) { return zeta(q, n, default_rule()); }

/// zeta through generalized Gauss-Laguerre with weight z^{n-1} e^{-z}/(n-1)!.
/// Kept as an independent route for cross-checks.
inline double zeta_laguerre(double q, std::size_t n, std::size_t order = kDefaultQuadOrder) {
  if (n < 1) throw std::invalid_argument("zeta_laguerre: n must be >= 1");
  const auto& outer = laguerre_rule(order, static_cast<double>(n) - 1.0);
  const auto& inner = laguerre_rule(order);
  double s = 0.0;
  for (std::size_t i = 0; i < outer.order(); ++i) {
    const double z = outer.nodes()[i];
    s += outer.weights()[i] * std::exp(-z - ln_phi(q, z, n, inner));
  }
  return s - 1.0;
}

/// sqrt(L/2 * sum D_k); the covertness requirement is pinsker_budget <= eps.
inline double pinsker_budget(std::span<const double> kls, std::size_t L) {
  if (L < 1) throw std::invalid_argument("pinsker_budget: L must be >= 1");
  double s = 0.0;
  for (double d : kls) {
    if (!(d >= 0.0)) throw std::invalid_argument("pinsker_budget: divergences must be >= 0");
    s += d;
  }
  return std::sqrt(0.5 * static_cast<double>(L) * s);
}

}  // namespace covert
