#include "covert/covertness.hpp"
#include "covert/quadrature.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/tools/roots.hpp>
#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

using namespace covert;
using Catch::Approx;

namespace {

// Reference values from 25-digit mpmath quadrature of the defining integrals.
constexpr double kLnPhi_05_3_5 = -3.700625305851724400;
constexpr double kLnPhi_2_40_10 = -24.98216979223016149;
constexpr double kLnPhi_10_800_50 = -190.7130883708180971;
constexpr double kLnPhi_316_2000_90 = -373.1405950295776607;
constexpr double kZeta_1_10 = 1.788794550839419539;
constexpr double kZeta_1_50 = 5.233466334579054930;
constexpr double kZeta_5_50 = 27.52801782353022025;
constexpr double kKl_02_1_10 = 0.02575495676528997557;
constexpr double kKl_0005_5_50 = 1.351480756375234139e-5;

double integrate_inf(const std::function<double(double)>& f, double a) {
  boost::math::quadrature::exp_sinh<double> tail;
  return tail.integrate([&](double x) { return f(x); }, a, std::numeric_limits<double>::infinity(), 1e-12);
}

}  // namespace

TEST_CASE("eta reference values", "[covertness]") {
  CHECK(eta(0.0) == 0.0);
  CHECK(eta(0.5) == Approx(0.25).epsilon(1e-15));
  CHECK(eta(0.9) == Approx(std::pow(0.9, 10.0)).epsilon(1e-14));
  CHECK(eta(1.0 - 1e-8) == Approx(std::exp(-1.0)).margin(1e-6));
  CHECK_THROWS_AS(eta(1.0), std::domain_error);
  CHECK_THROWS_AS(eta(-0.1), std::domain_error);
  CHECK(tv_closed_form_k1(0.5) == 0.25);
}

TEST_CASE("eta is increasing, concave and below the identity", "[covertness][property]") {
  const int n = 1000;
  const double h = 1.0 / (n + 1);
  for (int i = 1; i < n; ++i) {
    const double x = i * h;
    CHECK(eta(x) <= x);
    CHECK(eta(x + h) > eta(x));
    if (i > 1) CHECK(eta(x + h) - 2.0 * eta(x) + eta(x - h) <= 1e-15);
  }
}

TEST_CASE("tv_upper_bound sums eta", "[covertness]") {
  CHECK(tv_upper_bound(std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(tv_upper_bound(std::vector<double>{0.5, 0.5}) == Approx(0.5).epsilon(1e-15));
  CHECK_THROWS(tv_upper_bound(std::vector<double>{0.5, 1.2}));
}

TEST_CASE("solve_chi_star inverts eta", "[covertness]") {
  CHECK(solve_chi_star(0.25) == Approx(0.5).epsilon(1e-12));
  CHECK(solve_chi_star(std::exp(-1.0) - 1e-9) > 0.99);
  const double c = solve_chi_star(0.005);
  CHECK(eta(c) == Approx(0.005).margin(1e-10));
  // Independent bracketing root finder.
  boost::math::tools::eps_tolerance<double> tol(52);
  auto [a, b] = boost::math::tools::bisect([](double x) { return eta(x) - 0.005; }, 1e-6, 0.5, tol);
  CHECK(c == Approx(0.5 * (a + b)).epsilon(1e-12));
  CHECK(c == Approx(0.00513798293128505).epsilon(1e-12));
  CHECK_THROWS_AS(solve_chi_star(0.0), std::domain_error);
  CHECK_THROWS_AS(solve_chi_star(1.0), std::domain_error);
}

TEST_CASE("energy densities", "[covertness]") {
  const double noise = 1e-8;
  const auto band = BandDistribution::from_chi(0.4, 30.0);
  const double qhat = 30.0 * noise;
  CHECK(pdf_U(noise, band, noise) == 0.0);
  CHECK(pdf_V(noise, band, noise) == Approx(1.0 / qhat).epsilon(1e-15));
  CHECK(pdf_U(0.5 * noise, band, noise) == 0.0);

  auto scaled = [&](auto pdf) {
    return [&, pdf](double y) { return qhat * pdf(noise + qhat * y, band, noise); };
  };
  CHECK(integrate_inf(scaled(pdf_U), 0.0) == Approx(1.0).margin(1e-8));
  CHECK(integrate_inf(scaled(pdf_V), 0.0) == Approx(1.0).margin(1e-10));
  const double mean_y = integrate_inf([&](double y) { return y * qhat * pdf_V(noise + qhat * y, band, noise); }, 0.0);
  CHECK(noise + qhat * mean_y == Approx(noise + qhat).epsilon(1e-9));
}

TEST_CASE("pdf_U equal-power branch is the limit of the general branch", "[covertness]") {
  const double noise = 2.0;
  const auto equal = BandDistribution::from_powers(3.0, 3.0);
  for (double y : {0.1, 1.0, 4.0, 9.0, 20.0}) {
    const double ref = pdf_U(noise + y, equal, noise);
    for (double s : {1.0 - 1e-6, 1.0 + 1e-6}) {
      const auto near = BandDistribution::from_powers(3.0 * s, 3.0);
      CHECK(pdf_U(noise + y, near, noise) == Approx(ref).epsilon(1e-5));
    }
  }
}

TEST_CASE("numeric single-band TV matches the closed form", "[covertness]") {
  CHECK(tv_numeric_k1(BandDistribution::from_chi(0.0, 5.0), 1e-8) == 0.0);
  for (int i = 1; i <= 9; ++i) {
    const double chi = 0.1 * i;
    CHECK(tv_numeric_k1(BandDistribution::from_chi(chi, 316.0), 1e-8) == Approx(eta(chi)).margin(1e-6));
  }
  CHECK(tv_numeric_k1(BandDistribution::from_chi(0.5, 1.0), 1.0) == Approx(0.25).margin(1e-6));
  CHECK(tv_numeric_k1(BandDistribution::from_chi(0.9, 1.0), 1.0) == Approx(0.348678).margin(1e-6));
}

TEST_CASE("Monte-Carlo TV agrees with the closed form for one band", "[covertness]") {
  for (int i = 1; i <= 9; ++i) {
    const double chi = 0.1 * i;
    const std::vector<BandDistribution> bands{BandDistribution::from_chi(chi, 1.0)};
    const auto mc = tv_numeric_product(bands, 200000, 17 + i);
    CHECK(std::abs(mc.estimate - eta(chi)) <= 3.0 * mc.ci_half_width);
    CHECK(mc.ci_half_width > 0.0);
  }
  const std::vector<BandDistribution> off{BandDistribution::from_chi(0.0, 1.0), BandDistribution::from_chi(0.0, 2.0)};
  CHECK(tv_numeric_product(off, 1000, 1).estimate == 0.0);
}

TEST_CASE("Monte-Carlo TV is independent of the thread count", "[covertness]") {
  const std::vector<BandDistribution> bands{BandDistribution::from_chi(0.3, 1.0), BandDistribution::from_chi(0.6, 1.0)};
  const auto one = tv_numeric_product(bands, 50000, 5, 1);
  const auto four = tv_numeric_product(bands, 50000, 5, 4);
  CHECK(one.estimate == four.estimate);
  CHECK(one.ci_half_width == four.ci_half_width);
}

TEST_CASE("product TV stays below the eta-sum bound", "[covertness][property]") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.01, 0.9);
  const std::vector<BandDistribution> pair{BandDistribution::from_chi(0.4, 1.0), BandDistribution::from_chi(0.4, 1.0)};
  CHECK(tv_numeric_product(pair, 200000, 3).estimate <= 2.0 * eta(0.4));
  const std::vector<BandDistribution> uneven{BandDistribution::from_chi(0.2, 1.0), BandDistribution::from_chi(0.3, 1.0)};
  const auto mc = tv_numeric_product(uneven, 200000, 4);
  CHECK(mc.estimate <= eta(0.2) + eta(0.3) + 3.0 * mc.ci_half_width);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t K = 2 + trial % 2;
    std::vector<double> chis;
    std::vector<BandDistribution> bands;
    for (std::size_t k = 0; k < K; ++k) {
      chis.push_back(u(rng));
      bands.push_back(BandDistribution::from_chi(chis.back(), 1.0));
    }
    const auto est = tv_numeric_product(bands, 50000, 100 + trial);
    CHECK(est.estimate <= tv_upper_bound(chis) + 3.0 * est.ci_half_width);
  }
}

TEST_CASE("limit KL matches direct integration", "[covertness]") {
  for (double chi : {0.05, 0.3, 0.7}) {
    const auto band = BandDistribution::from_chi(chi, 1.0);
    const double kl = integrate_inf(
        [&](double y) {
          const double v = pdf_V(1.0 + y, band, 1.0);
          const double u = pdf_U(1.0 + y, band, 1.0);
          return v > 0.0 && u > 0.0 ? v * std::log(v / u) : 0.0;
        },
        0.0);
    CHECK(kl_limit(std::vector<double>{chi}) == Approx(kl).epsilon(1e-7));
  }
  CHECK(kl_limit(std::vector<double>{0.0, 0.0}) == 0.0);
}

TEST_CASE("Pinsker bound dominates the single-band TV", "[covertness][property]") {
  for (int i = 1; i < 20; ++i) {
    const double chi = 0.05 * i;
    CHECK(pinsker_tv_bound(std::vector<double>{chi}) >= eta(chi));
  }
}

TEST_CASE("Bhattacharyya coefficient matches direct integration", "[covertness]") {
  for (double chi : {0.1, 0.5, 0.85}) {
    const auto band = BandDistribution::from_chi(chi, 1.0);
    const double bc = integrate_inf(
        [&](double y) { return std::sqrt(pdf_U(1.0 + y, band, 1.0) * pdf_V(1.0 + y, band, 1.0)); }, 0.0);
    CHECK(bhattacharyya_k1(chi) == Approx(bc).epsilon(1e-9));
    CHECK(hellinger_tv_bound(std::vector<double>{chi}) >= eta(chi));
  }
  CHECK(bhattacharyya_k1(0.0) == 1.0);
}

TEST_CASE("Laguerre rule is normalized", "[covertness][quadrature]") {
  for (std::size_t order : {8u, 64u, 128u}) {
    const auto& r = laguerre_rule(order);
    double s = 0.0;
    for (double w : r.weights()) {
      CHECK(w > 0.0);
      s += w;
    }
    CHECK(s == Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("Phi special cases", "[covertness]") {
  for (double z : {0.0, 0.3, 5.0, 40.0}) CHECK(phi(0.0, z, 7, default_rule()) == Approx(std::exp(-z)).epsilon(1e-15));
  // Phi(1, 0, 1) = e E_1(1).
  CHECK(phi(1.0, 0.0, 1, default_rule()) == Approx(std::exp(1.0) * boost::math::expint(1, 1.0)).epsilon(1e-10));
  CHECK(phi(1.0, 0.0, 1, default_rule()) == Approx(0.596347).epsilon(1e-6));
}

TEST_CASE("ln Phi matches high-precision references", "[covertness]") {
  CHECK(ln_phi(0.5, 3.0, 5) == Approx(kLnPhi_05_3_5).epsilon(1e-10));
  CHECK(ln_phi(2.0, 40.0, 10) == Approx(kLnPhi_2_40_10).epsilon(1e-10));
  CHECK(ln_phi(10.0, 800.0, 50) == Approx(kLnPhi_10_800_50).epsilon(1e-10));
  CHECK(ln_phi(316.0, 2000.0, 90) == Approx(kLnPhi_316_2000_90).epsilon(1e-10));
}

TEST_CASE("ln Phi agrees with adaptive quadrature", "[covertness]") {
  for (double x : {0.1, 1.0, 30.0}) {
    for (double z : {0.5, 20.0, 300.0}) {
      for (std::size_t n : {1u, 10u, 60u}) {
        const double lead = -z;  // log-integrand at v = 0
        const double ref = integrate_inf(
            [&](double v) {
              const double w = 1.0 + x * v;
              return std::exp(-v - static_cast<double>(n) * std::log(w) - z / w - lead);
            },
            0.0);
        CHECK(ln_phi(x, z, n) == Approx(std::log(ref) + lead).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("Phi is strictly decreasing in z", "[covertness][property]") {
  for (double x : {0.5, 5.0, 300.0}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double z = 0.0; z < 2000.0; z = 1.5 * z + 0.5) {
      const double v = ln_phi(x, z, 20);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("ln Psi limits", "[covertness]") {
  CHECK(ln_psi(0.0, 3.0, 10.0, 5, default_rule()) == 0.0);
  // Large z: the Phi ratio vanishes and Psi tends to q / (q - p).
  CHECK(ln_psi(1.0, 3.0, 1e5, 5, default_rule()) == Approx(std::log(3.0 / 2.0)).epsilon(1e-8));
  CHECK_THROWS_AS(ln_psi(3.0, 3.0, 1.0, 5, default_rule()), std::domain_error);
}

TEST_CASE("KL divergence reference values", "[covertness]") {
  CHECK(kl_divergence(0.0, 1.0, 10) == 0.0);
  CHECK(kl_divergence(0.2, 1.0, 10) == Approx(kKl_02_1_10).epsilon(1e-8));
  CHECK(kl_divergence(0.005, 5.0, 50) == Approx(kKl_0005_5_50).epsilon(1e-8));
  CHECK_THROWS_AS(kl_divergence(2.0, 1.0, 10), std::domain_error);
}

TEST_CASE("KL divergence is positive and increasing in p", "[covertness][property]") {
  for (double q : {1.0, 10.0, 316.0}) {
    double prev = 0.0;
    for (double r = 0.01; r < 0.95; r += 0.08) {
      const double d = kl_divergence(r * q, q, 30);
      CHECK(d > prev);
      prev = d;
    }
  }
}

TEST_CASE("zeta reference values", "[covertness]") {
  CHECK(zeta(1e-6, 10) < 1e-4);
  CHECK(zeta(1.0, 10) == Approx(kZeta_1_10).epsilon(1e-8));
  CHECK(zeta(1.0, 50) == Approx(kZeta_1_50).epsilon(1e-6));
  CHECK(zeta(5.0, 50) == Approx(kZeta_5_50).epsilon(1e-8));
  // Generalized Laguerre route, accurate while the energy law stays near its weight.
  CHECK(zeta_laguerre(1.0, 10) == Approx(kZeta_1_10).epsilon(1e-6));
}

TEST_CASE("zeta is increasing in q", "[covertness][property]") {
  for (std::size_t n : {5u, 50u}) {
    double prev = 0.0;
    for (double q = 0.01; q < 2000.0; q *= 3.0) {
      const double z = zeta(q, n);
      CHECK(z > prev);
      prev = z;
    }
  }
}

TEST_CASE("quadratic approximation bounds the divergence for small p", "[covertness][property]") {
  for (double q : {0.5, 5.0, 50.0}) {
    for (std::size_t n : {5u, 40u}) {
      const double z = zeta(q, n);
      for (double r : {1e-3, 1e-2, 0.05, 0.1}) {
        const double p = r * q;
        CHECK(z * p * p / (2.0 * q * q) >= kl_divergence(p, q, n));
      }
    }
  }
  const double p = 1e-3;
  const double ratio = kl_divergence(p, 1.0, 10) / (zeta(1.0, 10) * p * p / 2.0);
  CHECK(ratio >= 0.99);
  CHECK(ratio <= 1.0);
}

TEST_CASE("pinsker_budget algebra", "[covertness]") {
  CHECK(pinsker_budget(std::vector<double>{0.0, 0.0}, 7) == 0.0);
  const double eps = 0.05;
  const std::size_t L = 100;
  CHECK(pinsker_budget(std::vector<double>{2.0 * eps * eps / L}, L) == Approx(eps).epsilon(1e-14));
  const std::vector<double> d{1e-4, 3e-4};
  CHECK(pinsker_budget(d, 40) == Approx(2.0 * pinsker_budget(d, 10)).epsilon(1e-14));
  CHECK_THROWS(pinsker_budget(std::vector<double>{-1.0}, 1));
}
