#pragma once

// Monte-Carlo adversary: draws per-band, per-block received energies under
// both hypotheses and runs the likelihood-ratio or energy detector.

#include "covert/covertness.hpp"
#include "covert/parallel.hpp"
#include "covert/quadrature.hpp"
#include "covert/rng.hpp"
#include "covert/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace covert {

enum class DetectorKind { lrt, energy };

inline const char* to_string(DetectorKind k) { return k == DetectorKind::lrt ? "lrt" : "energy"; }

struct DetectionEstimate {
  double p_fa = 0.0;
  double p_md = 0.0;
  double sum_error = 0.0;
  double ci_half_width = 0.0;
  std::size_t trials = 0;
  DetectorKind detector_kind = DetectorKind::lrt;
};

/// Bands at the adversary for a given chi vector on a scenario.
inline std::vector<BandDistribution> bands_for(const ScenarioInstance& s, std::span<const double> chis) {
  if (chis.size() != s.K) throw std::invalid_argument("bands_for: chi vector must have K entries");
  std::vector<BandDistribution> bands;
  for (std::size_t k = 0; k < s.K; ++k) {
    auto b = BandDistribution::from_chi(chis[k], s.q_norm[k]);
    b.require_covert();
    bands.push_back(b);
  }
  return bands;
}

/// ln Psi(p, q, z) for one band at fixed n, tabulated on a uniform grid in
/// ln z and interpolated with 4-point Lagrange; arguments off the grid are
/// evaluated directly.
class LnPsiTable {
 public:
  LnPsiTable(const BandDistribution& band, std::size_t n, const QuadratureRule& rule, std::size_t points = 2048)
      : p_(band.p_norm), q_(band.q_norm), n_(n), rule_(&rule) {
    if (!(p_ >= 0.0 && p_ < q_)) throw std::domain_error("LnPsiTable: requires 0 <= p < q");
    if (p_ == 0.0 || points < 8) return;
    const double nd = static_cast<double>(n);
    const double spread = 10.0 / std::sqrt(nd) + 1.0;
    lo_ = std::log(nd) - spread;
    hi_ = std::log(nd) + std::log1p(40.0 * q_) + spread;
    step_ = (hi_ - lo_) / static_cast<double>(points - 1);
    values_.resize(points);
    for (std::size_t i = 0; i < points; ++i) values_[i] = direct(std::exp(lo_ + step_ * static_cast<double>(i)));
  }

  double direct(double z) const {
    if (p_ == 0.0) return 0.0;
    return ln_psi_from(p_, q_, ln_phi(p_, z, n_, *rule_), ln_phi(q_, z, n_, *rule_));
  }

  double operator()(double z) const {
    if (p_ == 0.0) return 0.0;
    if (values_.empty() || !(z > 0.0)) return direct(z);
    const double pos = (std::log(z) - lo_) / step_;
    const auto last = static_cast<double>(values_.size() - 1);
    if (pos < 1.0 || pos > last - 2.0) return direct(z);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    const double y0 = values_[i - 1], y1 = values_[i], y2 = values_[i + 1], y3 = values_[i + 2];
    // Lagrange weights on nodes -1, 0, 1, 2.
    const double w0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
    const double w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    const double w2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
    const double w3 = (f + 1.0) * f * (f - 1.0) / 6.0;
    return w0 * y0 + w1 * y1 + w2 * y2 + w3 * y3;
  }

 private:
  double p_, q_;
  std::size_t n_;
  const QuadratureRule* rule_;
  double lo_ = 0.0, hi_ = 0.0, step_ = 1.0;
  std::vector<double> values_;
};

/// Log-likelihood ratio of one observation: the sum of ln Psi over bands and
/// blocks. `energies` is row-major (block, band) with the normalized energies.
inline double lrt_statistic(std::span<const double> energies, std::span<const BandDistribution> bands, std::size_t n,
                            const QuadratureRule& rule) {
  if (bands.empty() || energies.size() % bands.size() != 0)
    throw std::invalid_argument("lrt_statistic: energies must hold one value per (block, band)");
  double s = 0.0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const auto& b = bands[i % bands.size()];
    s += ln_psi(b.p_norm, b.q_norm, energies[i], n, rule);
  }
  return s;
}

/// Detector statistics of all trials under each hypothesis.
struct DetectionSamples {
  std::vector<double> h0;
  std::vector<double> h1;
};

/// Draws `trials` observations under each hypothesis and returns the chosen
/// detector's statistic for each. Given the band power, the block energy is
/// Gamma(n, power) distributed, so it is drawn directly.
inline DetectionSamples detection_statistics(std::span<const BandDistribution> bands, std::size_t n, std::size_t L,
                                             std::size_t trials, std::uint64_t seed, DetectorKind kind,
                                             const QuadratureRule& rule, std::size_t jobs = 1) {
  if (bands.empty()) throw std::invalid_argument("detection_statistics: need at least one band");
  if (n < 1 || L < 1 || trials < 1) throw std::invalid_argument("detection_statistics: n, L, trials must be >= 1");
  for (const auto& b : bands) b.require_covert();

  std::vector<LnPsiTable> tables;
  if (kind == DetectorKind::lrt)
    for (const auto& b : bands) tables.emplace_back(b, n, rule);

  DetectionSamples out;
  out.h0.resize(trials);
  out.h1.resize(trials);
  constexpr std::size_t kShards = 64;
  const double nd = static_cast<double>(n);
  parallel_for(kShards, jobs, [&](std::size_t shard) {
    const std::size_t begin = trials * shard / kShards;
    const std::size_t end = trials * (shard + 1) / kShards;
    auto rng = make_stream(seed, {shard});
    std::exponential_distribution<double> exp1(1.0);
    std::gamma_distribution<double> energy(nd, 1.0);
    for (std::size_t t = begin; t < end; ++t) {
      for (int hyp = 0; hyp < 2; ++hyp) {
        double stat = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
          for (std::size_t k = 0; k < bands.size(); ++k) {
            double power = 1.0 + bands[k].q_norm * exp1(rng);
            if (hyp == 1) power += bands[k].p_norm * exp1(rng);
            const double z = power * energy(rng);
            stat += kind == DetectorKind::lrt ? tables[k](z) : z;
          }
        }
        (hyp == 0 ? out.h0 : out.h1)[t] = stat;
      }
    }
  });
  return out;
}

struct ThresholdChoice {
  double threshold = 0.0;
  std::size_t false_alarms = 0;
  std::size_t misses = 0;
};

/// Decision rule "H1 iff statistic > threshold"; returns the threshold that
/// minimizes false alarms + misses on the given samples.
inline ThresholdChoice min_sum_error_threshold(std::span<const double> h0, std::span<const double> h1) {
  struct Tagged {
    double value;
    bool alt;
  };
  std::vector<Tagged> pooled;
  pooled.reserve(h0.size() + h1.size());
  for (double v : h0) pooled.push_back({v, false});
  for (double v : h1) pooled.push_back({v, true});
  std::sort(pooled.begin(), pooled.end(), [](const Tagged& a, const Tagged& b) { return a.value < b.value; });

  // Threshold below everything: every H0 sample is a false alarm.
  std::size_t fa = h0.size(), md = 0;
  ThresholdChoice best{-std::numeric_limits<double>::infinity(), fa, md};
  for (std::size_t i = 0; i < pooled.size();) {
    const double v = pooled[i].value;
    for (; i < pooled.size() && pooled[i].value == v; ++i) {
      if (pooled[i].alt)
        ++md;
      else
        --fa;
    }
    if (fa + md < best.false_alarms + best.misses) best = {v, fa, md};
  }
  return best;
}

inline DetectionEstimate make_estimate(std::size_t false_alarms, std::size_t misses, std::size_t trials,
                                       DetectorKind kind) {
  const double T = static_cast<double>(trials);
  DetectionEstimate e;
  e.p_fa = static_cast<double>(false_alarms) / T;
  e.p_md = static_cast<double>(misses) / T;
  e.sum_error = e.p_fa + e.p_md;
  // Variance uses (x+1)/(T+2) so the half-width stays positive at 0 or T counts.
  const double a = (static_cast<double>(false_alarms) + 1.0) / (T + 2.0);
  const double b = (static_cast<double>(misses) + 1.0) / (T + 2.0);
  e.ci_half_width = 1.96 * std::sqrt(a * (1.0 - a) / T + b * (1.0 - b) / T);
  e.trials = trials;
  e.detector_kind = kind;
  return e;
}

/// Empirical P_FA + P_MD of the detector at its min-sum-error threshold:
/// likelihood ratio 1 for the LRT, the empirical optimum for the energy detector.
inline DetectionEstimate simulate_detection(std::span<const BandDistribution> bands, std::size_t n, std::size_t L,
                                            std::size_t trials, std::uint64_t seed, DetectorKind kind,
                                            const QuadratureRule& rule, std::size_t jobs = 1) {
  const auto samples = detection_statistics(bands, n, L, trials, seed, kind, rule, jobs);
  std::size_t fa = 0, md = 0;
  if (kind == DetectorKind::lrt) {
    for (double v : samples.h0) fa += v > 0.0 ? 1 : 0;
    for (double v : samples.h1) md += v > 0.0 ? 0 : 1;
  } else {
    const auto choice = min_sum_error_threshold(samples.h0, samples.h1);
    fa = choice.false_alarms;
    md = choice.misses;
  }
  return make_estimate(fa, md, trials, kind);
}

inline DetectionEstimate simulate_detection(const ScenarioInstance& instance, std::span<const double> chis,
                                            std::size_t n, std::size_t L, std::size_t trials, std::uint64_t seed,
                                            DetectorKind kind, const QuadratureRule& rule = default_rule(),
                                            std::size_t jobs = 1) {
  const auto bands = bands_for(instance, chis);
  return simulate_detection(bands, n, L, trials, seed, kind, rule, jobs);
}

struct AuditReport {
  DetectionEstimate estimate;
  double bound = 0.0;  // 1 - eps
  double slack = 0.0;  // 3 CI half-widths
  bool pass = false;
};

/// Checks P_FA + P_MD >= 1 - eps for the likelihood-ratio detector, allowing
/// three CI half-widths of Monte-Carlo slack.
inline AuditReport covertness_audit(std::span<const BandDistribution> bands, std::size_t n, std::size_t L,
                                    double epsilon, std::size_t trials, std::uint64_t seed,
                                    const QuadratureRule& rule = default_rule(), std::size_t jobs = 1) {
  AuditReport r;
  r.estimate = simulate_detection(bands, n, L, trials, seed, DetectorKind::lrt, rule, jobs);
  r.bound = 1.0 - epsilon;
  r.slack = 3.0 * r.estimate.ci_half_width;
  r.pass = r.estimate.sum_error >= r.bound - r.slack;
  return r;
}

inline AuditReport covertness_audit(const ScenarioInstance& instance, std::span<const double> chis, std::size_t n,
                                    std::size_t L, double epsilon, std::size_t trials, std::uint64_t seed,
                                    const QuadratureRule& rule = default_rule(), std::size_t jobs = 1) {
  const auto bands = bands_for(instance, chis);
  return covertness_audit(bands, n, L, epsilon, trials, seed, rule, jobs);
}

/// FNV-1a hash of the bit patterns of a chi vector, as 16 hex digits.
inline std::string chi_hash(std::span<const double> chis) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double c : chis) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof c);
    std::memcpy(&bits, &c, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

}  // namespace covert
