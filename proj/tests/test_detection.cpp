#include "covert/detection.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

using namespace covert;
using Catch::Approx;

namespace {

std::vector<BandDistribution> bands_of(std::initializer_list<double> chis, double q = 316.0) {
  std::vector<BandDistribution> out;
  for (double c : chis) out.push_back(BandDistribution::from_chi(c, q));
  return out;
}

// Empirical sum error of "H1 iff statistic > t" on stored samples.
double sum_error_at(const DetectionSamples& s, double t) {
  std::size_t fa = 0, md = 0;
  for (double v : s.h0) fa += v > t ? 1 : 0;
  for (double v : s.h1) md += v > t ? 0 : 1;
  return static_cast<double>(fa + md) / static_cast<double>(s.h0.size());
}

}  // namespace

TEST_CASE("lrt statistic vanishes without a transmitter", "[detection]") {
  const auto bands = bands_of({0.0, 0.0});
  const std::vector<double> z{10.0, 400.0, 3000.0, 1.0};
  CHECK(lrt_statistic(z, bands, 100, default_rule()) == 0.0);
  CHECK_THROWS_AS(lrt_statistic(std::vector<double>{1.0, 2.0, 3.0}, bands, 100, default_rule()), std::invalid_argument);
}

TEST_CASE("lrt statistic approaches ln(q/(q-p)) for large energies", "[detection]") {
  for (double chi : {0.2, 0.5, 0.9}) {
    const double q = 5.0, p = chi * q;
    const auto bands = bands_of({chi}, q);
    const double z = 1e6;
    CHECK(lrt_statistic(std::vector<double>{z}, bands, 10, default_rule()) ==
          Approx(std::log(q / (q - p))).margin(1e-6));
  }
}

TEST_CASE("lrt statistic is nondecreasing in each energy", "[detection][property]") {
  for (double chi : {0.1, 0.6}) {
    for (std::size_t n : {10u, 100u}) {
      const auto bands = bands_of({chi}, 50.0);
      double prev = -std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 200; ++i) {
        const double z = static_cast<double>(n) * std::exp(-1.0 + 0.05 * i);
        const double s = lrt_statistic(std::vector<double>{z}, bands, n, default_rule());
        CHECK(s >= prev - 1e-12);
        prev = s;
      }
    }
  }
}

TEST_CASE("tabulated ln Psi matches direct evaluation", "[detection]") {
  const auto band = BandDistribution::from_chi(0.7, 316.0);
  const LnPsiTable table(band, 200, default_rule());
  for (int i = 0; i < 60; ++i) {
    const double z = 200.0 * std::exp(-0.5 + 0.15 * i);
    CHECK(table(z) == Approx(table.direct(z)).margin(1e-7));
  }
}

TEST_CASE("identical hypotheses give unit sum error", "[detection]") {
  const auto bands = bands_of({0.0, 0.0});
  for (auto kind : {DetectorKind::lrt, DetectorKind::energy}) {
    const auto e = simulate_detection(bands, 50, 2, 20000, 3, kind, default_rule());
    CHECK(std::abs(e.sum_error - 1.0) <= 3.0 * e.ci_half_width);
    CHECK(e.ci_half_width > 0.0);
    CHECK(e.detector_kind == kind);
    CHECK(e.trials == 20000);
  }
}

TEST_CASE("single band at large N_d reaches the closed-form TV", "[detection]") {
  const auto bands = bands_of({0.9});
  const auto e = simulate_detection(bands, 500, 1, 100000, 11, DetectorKind::lrt, default_rule());
  CHECK(std::abs(e.sum_error - (1.0 - std::pow(0.9, 10.0))) <= 3.0 * e.ci_half_width);
  CHECK(e.p_fa >= 0.0);
  CHECK(e.p_md <= 1.0);
  CHECK(e.sum_error == Approx(e.p_fa + e.p_md));
}

TEST_CASE("likelihood-ratio detector is at least as good as the energy detector", "[detection]") {
  const auto bands = bands_of({0.2, 0.7});
  const auto lrt = simulate_detection(bands, 100, 1, 50000, 5, DetectorKind::lrt, default_rule());
  const auto energy = simulate_detection(bands, 100, 1, 50000, 5, DetectorKind::energy, default_rule());
  CHECK(lrt.sum_error <= energy.sum_error + 2.0 * lrt.ci_half_width);
}

TEST_CASE("threshold one is the empirical optimum of the LRT", "[detection][property]") {
  const auto bands = bands_of({0.4, 0.6});
  const auto samples = detection_statistics(bands, 100, 2, 50000, 8, DetectorKind::lrt, default_rule());
  const double at_one = sum_error_at(samples, 0.0);
  double best = 2.0;
  for (int i = -40; i <= 40; ++i) best = std::min(best, sum_error_at(samples, 0.05 * i));
  const auto sorted = min_sum_error_threshold(samples.h0, samples.h1);
  const double global = static_cast<double>(sorted.false_alarms + sorted.misses) / 50000.0;
  CHECK(global <= best + 1e-15);
  // The CI half-width is largest near p = 1/2; use that as the slack.
  const double ci = 1.96 * std::sqrt(0.5 / 50000.0);
  CHECK(at_one <= global + 2.0 * ci);
}

TEST_CASE("sort-based threshold minimizes the empirical sum error", "[detection]") {
  const std::vector<double> h0{0.1, 0.2, 0.3, 0.9};
  const std::vector<double> h1{0.25, 0.8, 1.0, 1.1};
  const auto t = min_sum_error_threshold(h0, h1);
  CHECK(t.false_alarms + t.misses == 2);
  DetectionSamples s{h0, h1};
  CHECK(sum_error_at(s, t.threshold) * 4.0 == Approx(2.0));
  for (double x = -1.0; x <= 2.0; x += 0.01) CHECK(sum_error_at(s, x) * 4.0 >= 2.0 - 1e-12);
}

TEST_CASE("more blocks help the adversary", "[detection][property]") {
  const auto bands = bands_of({0.3, 0.5});
  double prev = 2.0, prev_ci = 0.0;
  for (std::size_t L : {1u, 4u, 16u}) {
    const auto e = simulate_detection(bands, 50, L, 20000, 21, DetectorKind::lrt, default_rule());
    CHECK(e.sum_error <= prev + 2.0 * std::max(e.ci_half_width, prev_ci));
    prev = e.sum_error;
    prev_ci = e.ci_half_width;
  }
}

TEST_CASE("detection advantage grows toward the TV limit with N_d", "[detection][property]") {
  const auto bands = bands_of({0.5});
  double prev_adv = -1.0, prev_ci = 0.0;
  for (std::size_t n : {10u, 50u, 250u}) {
    const auto e = simulate_detection(bands, n, 1, 50000, 31, DetectorKind::lrt, default_rule());
    const double adv = 1.0 - e.sum_error;
    CHECK(adv >= prev_adv - 2.0 * std::max(e.ci_half_width, prev_ci));
    CHECK(adv <= eta(0.5) + 3.0 * e.ci_half_width);
    prev_adv = adv;
    prev_ci = e.ci_half_width;
  }
}

TEST_CASE("sum error respects the eta-sum bound", "[detection][property]") {
  for (auto chis : {std::vector<double>{0.1, 0.2}, std::vector<double>{0.5, 0.05, 0.3}}) {
    std::vector<BandDistribution> bands;
    for (double c : chis) bands.push_back(BandDistribution::from_chi(c, 100.0));
    const auto e = simulate_detection(bands, 200, 1, 20000, 41, DetectorKind::lrt, default_rule());
    CHECK(e.sum_error >= 1.0 - tv_upper_bound(chis) - 3.0 * e.ci_half_width);
  }
}

TEST_CASE("results do not depend on the thread count", "[detection]") {
  const auto bands = bands_of({0.3, 0.6});
  const auto a = simulate_detection(bands, 40, 2, 5000, 9, DetectorKind::lrt, default_rule(), 1);
  const auto b = simulate_detection(bands, 40, 2, 5000, 9, DetectorKind::lrt, default_rule(), 3);
  CHECK(a.p_fa == b.p_fa);
  CHECK(a.p_md == b.p_md);
}

TEST_CASE("covertness audit", "[detection]") {
  SECTION("a vacuous budget always passes") {
    const auto r = covertness_audit(bands_of({0.9, 0.9}), 100, 1, 1.0 - 1e-9, 10000, 2);
    CHECK(r.pass);
    CHECK(r.bound == Approx(1e-9).margin(1e-15));
  }
  SECTION("chi at the eta-sum budget passes") {
    const double c = solve_chi_star(0.025);
    const auto r = covertness_audit(bands_of({c, c}), 500, 1, 0.05, 50000, 3);
    CHECK(r.pass);
    CHECK(r.slack == Approx(3.0 * r.estimate.ci_half_width));
  }
  SECTION("a tenfold budget violation fails") {
    const double c = solve_chi_star(10.0 * 0.005 / 2.0);
    const auto r = covertness_audit(bands_of({c, c}), 500, 4, 0.005, 100000, 4);
    CHECK_FALSE(r.pass);
  }
  SECTION("scenario overload") {
    ScenarioConfig cfg;
    cfg.K = 2;
    const auto s = sample_scenario(cfg, 7);
    const std::vector<double> chis{0.001, 0.002};
    const auto r = covertness_audit(s, chis, 100, 1, 0.05, 10000, 5);
    CHECK(r.pass);
    CHECK_THROWS(covertness_audit(s, std::vector<double>{0.1}, 100, 1, 0.05, 10000, 5));
    CHECK_THROWS(covertness_audit(s, std::vector<double>{0.1, 1.0}, 100, 1, 0.05, 10000, 5));
  }
}

TEST_CASE("chi hash is stable and sensitive", "[detection]") {
  const std::vector<double> a{0.1, 0.2};
  const std::vector<double> b{0.2, 0.1};
  CHECK(chi_hash(a) == chi_hash(std::vector<double>{0.1, 0.2}));
  CHECK(chi_hash(a) != chi_hash(b));
  CHECK(chi_hash(a).size() == 16);
  CHECK(chi_hash(std::vector<double>{}) == "cbf29ce484222325");
}
