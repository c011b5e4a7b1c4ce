#pragma once

// Network geometry, channel draws, and the dimensionless constants consumed by
// the quasi-static and fast-varying solvers. All powers are linear milliwatts
// once a config has been ingested; dBm only appears on ScenarioConfig.

#include "covert/rng.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace covert {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

inline double dbm_to_mw(double dbm) noexcept { return std::pow(10.0, dbm / 10.0); }

/// Geometry, powers and noise levels of one experiment. Per-band vectors hold
/// either one value (broadcast to every band) or exactly K values.
struct ScenarioConfig {
  std::size_t K = 4;
  std::size_t M = 20;
  double d_A = 150.0;
  double d_J = 250.0;
  double d_R = 150.0;
  double r_c = 30.0;
  double path_loss_exponent = 4.0;
  double P_R_dBm = 5.0;
  std::vector<double> Q_dBm{25.0};
  std::vector<double> noise_A_dBm{-80.0};
  std::vector<double> noise_R_dBm{-80.0};
  double noise_T_dBm = -80.0;
  /// Optional per-band transmit powers; empty means the transmitter is off.
  std::vector<double> P_dBm;
  /// Explicit placements override the default x-axis layout.
  std::optional<Point> pos_T;
  std::optional<Point> pos_A;
  std::optional<Point> pos_J;
  std::uint64_t seed = 1;

  static double band_value(const std::vector<double>& v, std::size_t k) {
    return v.size() == 1 ? v.front() : v.at(k);
  }

  Point transmitter() const { return pos_T.value_or(Point{0.0, 0.0}); }
  Point adversary() const { return pos_A.value_or(Point{-d_A, 0.0}); }
  Point jammer() const { return pos_J.value_or(Point{-d_J, 0.0}); }
  Point receiver_center() const { return Point{d_R, 0.0}; }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("ScenarioConfig: " + what); };
    if (K < 1) fail("K must be >= 1");
    if (M < 1) fail("M must be >= 1");
    if (!(d_A > 0.0) || !(d_J > 0.0) || !(d_R > 0.0)) fail("distances must be > 0");
    if (!(r_c >= 0.0) || !(r_c < d_R)) fail("r_c must satisfy 0 <= r_c < d_R");
    if (!(path_loss_exponent > 0.0) || !std::isfinite(path_loss_exponent))
      fail("path_loss_exponent must be positive");
    auto check_band = [&](const std::vector<double>& v, const char* name, bool allow_empty) {
      if (v.empty() && allow_empty) return;
      if (v.size() != 1 && v.size() != K) fail(std::string(name) + " must have 1 or K entries");
      for (double d : v)
        if (!std::isfinite(d)) fail(std::string(name) + " must be finite");
    };
    check_band(Q_dBm, "Q_dBm", false);
    check_band(noise_A_dBm, "noise_A_dBm", false);
    check_band(noise_R_dBm, "noise_R_dBm", false);
    check_band(P_dBm, "P_dBm", true);
    if (!std::isfinite(P_R_dBm) || !std::isfinite(noise_T_dBm)) fail("dBm values must be finite");
  }
};

/// One random draw of receiver positions and channel gains plus every
/// derived per-band constant.
struct ScenarioInstance {
  std::size_t K = 0;
  std::size_t M = 0;
  Point pos_T, pos_A, pos_J;
  std::vector<Point> pos_R;

  double S_AT = 0.0;  // transmitter -> adversary
  double S_AJ = 0.0;  // jammer -> adversary
  std::vector<double> S_RT;  // receiver k -> transmitter
  std::vector<double> S_RJ;  // receiver k -> jammer

  std::vector<double> h_norm_sq;

  double P_R = 0.0;
  double noise_T = 0.0;
  std::vector<double> P;        // transmit power per band
  std::vector<double> Q;        // jamming power per band
  std::vector<double> noise_A;  // adversary noise per band
  std::vector<double> noise_R;  // receiver noise per band

  std::vector<double> p_hat;   // P_k S_AT
  std::vector<double> q_hat;   // Q_k S_AJ
  std::vector<double> p_norm;  // p_hat / noise_A
  std::vector<double> q_norm;  // q_hat / noise_A
  std::vector<double> mu;      // noise_T / (P_R S_RT)
};

/// ||a - b||^(-exponent).
inline double path_loss(Point a, Point b, double exponent) {
  const double d = distance(a, b);
  if (!(d > 0.0)) throw std::domain_error("path_loss: coincident positions");
  return std::pow(d, -exponent);
}

namespace detail {

inline void fill_derived(ScenarioInstance& s, double exponent) {
  const std::size_t K = s.K;
  s.S_AT = path_loss(s.pos_A, s.pos_T, exponent);
  s.S_AJ = path_loss(s.pos_A, s.pos_J, exponent);
  s.S_RT.resize(K);
  s.S_RJ.resize(K);
  s.p_hat.resize(K);
  s.q_hat.resize(K);
  s.p_norm.resize(K);
  s.q_norm.resize(K);
  s.mu.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    s.S_RT[k] = path_loss(s.pos_R[k], s.pos_T, exponent);
    s.S_RJ[k] = path_loss(s.pos_R[k], s.pos_J, exponent);
    s.p_hat[k] = s.P[k] * s.S_AT;
    s.q_hat[k] = s.Q[k] * s.S_AJ;
    s.p_norm[k] = s.p_hat[k] / s.noise_A[k];
    s.q_norm[k] = s.q_hat[k] / s.noise_A[k];
    s.mu[k] = s.noise_T / (s.P_R * s.S_RT[k]);
  }
}

}  // namespace detail

/// Receivers are uniform in the disc of radius r_c around (d_R, 0); ||h_k||^2
/// is Gamma(M, 1), drawn as a sum of M unit exponentials. Positions and each
/// receiver's channel use separate streams, so changing M leaves positions
/// untouched and nests the channel draws.
inline ScenarioInstance sample_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  ScenarioInstance s;
  s.K = config.K;
  s.M = config.M;
  s.pos_T = config.transmitter();
  s.pos_A = config.adversary();
  s.pos_J = config.jammer();

  auto placement = make_stream(seed, {0});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Point center = config.receiver_center();
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  s.pos_R.resize(config.K);
  for (auto& p : s.pos_R) {
    const double r = config.r_c * std::sqrt(unit(placement));
    const double theta = kTwoPi * unit(placement);
    p = Point{center.x + r * std::cos(theta), center.y + r * std::sin(theta)};
  }

  s.h_norm_sq.resize(config.K);
  for (std::size_t k = 0; k < config.K; ++k) {
    auto channel = make_stream(seed, {1, k});
    std::exponential_distribution<double> exp1(1.0);
    double sum = 0.0;
    for (std::size_t m = 0; m < config.M; ++m) sum += exp1(channel);
    s.h_norm_sq[k] = sum;
  }

  s.P_R = dbm_to_mw(config.P_R_dBm);
  s.noise_T = dbm_to_mw(config.noise_T_dBm);
  s.P.resize(config.K);
  s.Q.resize(config.K);
  s.noise_A.resize(config.K);
  s.noise_R.resize(config.K);
  for (std::size_t k = 0; k < config.K; ++k) {
    s.P[k] = config.P_dBm.empty() ? 0.0 : dbm_to_mw(ScenarioConfig::band_value(config.P_dBm, k));
    s.Q[k] = dbm_to_mw(ScenarioConfig::band_value(config.Q_dBm, k));
    s.noise_A[k] = dbm_to_mw(ScenarioConfig::band_value(config.noise_A_dBm, k));
    s.noise_R[k] = dbm_to_mw(ScenarioConfig::band_value(config.noise_R_dBm, k));
  }
  detail::fill_derived(s, config.path_loss_exponent);
  return s;
}

/// Constants of the quasi-static effective-rate problem.
struct QuasiStaticParams {
  std::vector<double> A;  // (S_RT S_AJ)/(S_RJ S_AT) ||h||^2
  std::vector<double> B;  // exp(noise_R / (Q S_RJ))
  double epsilon = 0.0;

  std::size_t K() const noexcept { return A.size(); }

  void validate() const {
    if (A.empty() || A.size() != B.size()) throw std::invalid_argument("QuasiStaticParams: size mismatch");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("QuasiStaticParams: epsilon must be in (0,1)");
    for (std::size_t k = 0; k < A.size(); ++k) {
      if (!(A[k] > 0.0) || !std::isfinite(A[k])) throw std::invalid_argument("QuasiStaticParams: A_k must be > 0");
      if (!(B[k] > 1.0) || !std::isfinite(B[k])) throw std::invalid_argument("QuasiStaticParams: B_k must be > 1");
    }
  }
};

inline QuasiStaticParams derive_quasi_static(const ScenarioInstance& s, double epsilon) {
  QuasiStaticParams p;
  p.epsilon = epsilon;
  p.A.resize(s.K);
  p.B.resize(s.K);
  for (std::size_t k = 0; k < s.K; ++k) {
    p.A[k] = (s.S_RT[k] * s.S_AJ) / (s.S_RJ[k] * s.S_AT) * s.h_norm_sq[k];
    p.B[k] = std::exp(s.noise_R[k] / (s.Q[k] * s.S_RJ[k]));
  }
  return p;
}

/// G = Gamma(M+1/2)^2 / Gamma(M)^2 via log-gamma.
inline double beamforming_gain(std::size_t M) {
  const double m = static_cast<double>(M);
  return std::exp(2.0 * (std::lgamma(m + 0.5) - std::lgamma(m)));
}

struct BeamformingStats {
  double mean_sq = 0.0;   // |E{h^H b}|^2
  double variance = 0.0;  // Var{h^H b}
};

/// Statistics of the effective MRT channel after MMSE estimation with N_t
/// pilot symbols.
inline BeamformingStats beamforming_stats(std::size_t M, double N_t, double mu) {
  if (!(N_t >= 1.0)) throw std::invalid_argument("beamforming_stats: N_t must be >= 1");
  if (!(mu > 0.0)) throw std::invalid_argument("beamforming_stats: mu must be > 0");
  const double G = beamforming_gain(M);
  const double E = static_cast<double>(M) - G;
  const double est = N_t / (N_t + mu);
  return {est * G, est * E + mu / (N_t + mu)};
}

/// Constants of the fast-varying ergodic-rate problem. The SNR of band k at
/// pilot fraction tau is chi tau G_k / (tau chi E_k + chi mu_tilde_k + tau F1_k + F2_k).
struct FastVaryingParams {
  std::size_t N = 0;
  std::size_t L = 1;
  double G_const = 0.0;
  double E_const = 0.0;
  std::vector<double> Gk, Ek, mu_tilde, F1, F2;
  std::vector<double> q_norm;
  double epsilon = 0.0;
  /// When set, the adversary's per-block sample count is N instead of N - N_t.
  bool adversary_observes_pilots = false;

  std::size_t K() const noexcept { return Gk.size(); }

  /// Samples the adversary sees per block for a given pilot length.
  std::size_t observed_samples(std::size_t pilot_symbols) const noexcept {
    return adversary_observes_pilots ? N : N - pilot_symbols;
  }

  /// Right-hand side of the covertness budget, 2 eps^2 / L.
  double budget() const noexcept { return 2.0 * epsilon * epsilon / static_cast<double>(L); }

  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("FastVaryingParams: " + what); };
    if (N < 2) fail("N must be >= 2");
    if (L < 1) fail("L must be >= 1");
    if (Gk.empty()) fail("K must be >= 1");
    const std::size_t K = Gk.size();
    if (Ek.size() != K || mu_tilde.size() != K || F1.size() != K || F2.size() != K || q_norm.size() != K)
      fail("vector size mismatch");
    if (!(epsilon > 0.0 && epsilon < 1.0)) fail("epsilon must be in (0,1)");
    for (std::size_t k = 0; k < K; ++k) {
      if (!(Gk[k] > 0.0) || !(Ek[k] > 0.0) || !(F1[k] > 0.0) || !(q_norm[k] > 0.0))
        fail("constants must be > 0");
      if (mu_tilde[k] < 0.0 || F2[k] < 0.0) fail("constants must be >= 0");
    }
  }
};

inline FastVaryingParams derive_fast_varying(const ScenarioInstance& s, std::size_t N, std::size_t L,
                                             double epsilon) {
  if (N < 2) throw std::invalid_argument("derive_fast_varying: N must be >= 2");
  if (L < 1) throw std::invalid_argument("derive_fast_varying: L must be >= 1");
  FastVaryingParams f;
  f.N = N;
  f.L = L;
  f.epsilon = epsilon;
  f.G_const = beamforming_gain(s.M);
  f.E_const = static_cast<double>(s.M) - f.G_const;
  const double n = static_cast<double>(N);
  for (std::size_t k = 0; k < s.K; ++k) {
    const double jam_ratio = s.Q[k] * s.S_AJ / s.S_AT;
    const double interference = (s.Q[k] * s.S_RJ[k] + s.noise_R[k]) / s.S_RT[k];
    f.Gk.push_back(jam_ratio * n * f.G_const);
    f.Ek.push_back(jam_ratio * n * f.E_const);
    f.mu_tilde.push_back(jam_ratio * s.mu[k]);
    f.F1.push_back(n * interference);
    f.F2.push_back(s.mu[k] * interference);
    f.q_norm.push_back(s.q_norm[k]);
  }
  return f;
}

}  // namespace covert
