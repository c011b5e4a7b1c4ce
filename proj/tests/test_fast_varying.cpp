#include "covert/fast_varying.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace covert;
using Catch::Approx;

namespace {

FastVaryingParams unit_params(std::size_t K = 1) {
  FastVaryingParams p;
  p.N = 10;
  p.L = 1;
  p.epsilon = 0.05;
  p.G_const = 1.0;
  p.E_const = 1.0;
  p.Gk.assign(K, 1.0);
  p.Ek.assign(K, 1.0);
  p.mu_tilde.assign(K, 1.0);
  p.F1.assign(K, 1.0);
  p.F2.assign(K, 1.0);
  p.q_norm.assign(K, 1.0);
  return p;
}

FastVaryingParams scenario_params(std::size_t K, std::uint64_t seed, std::size_t N = 100, std::size_t L = 100,
                                  double eps = 0.05, double Q_dBm = 25.0) {
  ScenarioConfig cfg;
  cfg.K = K;
  cfg.Q_dBm = {Q_dBm};
  return derive_fast_varying(sample_scenario(cfg, seed), N, L, eps);
}

// Projected gradient ascent on the fixed-tau problem in the scaled variables
// y_k = sqrt(zeta_k / 2) chi_k, where the budget is the ball |y|^2 <= budget.
double projected_gradient_optimum(double tau, const FastVaryingParams& p, const std::vector<double>& zetas,
                                  double budget) {
  const std::size_t K = p.K();
  std::vector<double> scale(K), y(K, std::sqrt(budget / static_cast<double>(K)));
  for (std::size_t k = 0; k < K; ++k) scale[k] = std::sqrt(2.0 / zetas[k]);
  auto chi_of = [&](const std::vector<double>& v) {
    std::vector<double> c(K);
    for (std::size_t k = 0; k < K; ++k) c[k] = std::max(0.0, v[k]) * scale[k];
    return c;
  };
  auto project = [&](std::vector<double>& v) {
    for (double& x : v) x = std::max(0.0, x);
    const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (n * n > budget)
      for (double& x : v) x *= std::sqrt(budget) / n;
  };
  auto value = [&](const std::vector<double>& v) { return ergodic_sum_rate(chi_of(v), tau, p); };
  double step = std::sqrt(budget);
  double f = value(y);
  for (int it = 0; it < 20000 && step > 1e-18; ++it) {
    std::vector<double> g(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double h = 1e-7 * std::max(y[k], 1e-12);
      auto up = y, dn = y;
      up[k] += h;
      dn[k] = std::max(0.0, dn[k] - h);
      g[k] = (value(up) - value(dn)) / (up[k] - dn[k]);
    }
    const double gn = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    auto trial = y;
    for (std::size_t k = 0; k < K; ++k) trial[k] += step * g[k] / gn;
    project(trial);
    const double ft = value(trial);
    if (ft > f) {
      y = trial;
      f = ft;
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  return f;
}

void check_result(const FvSolveResult& r, const FastVaryingParams& p) {
  CHECK(r.N_t >= 1);
  CHECK(r.N_t <= p.N - 1);
  CHECK(r.tau * static_cast<double>(p.N) == Approx(static_cast<double>(r.N_t)).margin(1e-12));
  CHECK(r.budget == Approx(p.budget()).epsilon(1e-15));
  CHECK(budget_used(r.chi, r.zeta) <= p.budget() * (1.0 + 1e-12));
  CHECK(r.objective == Approx(ergodic_sum_rate(r.chi, r.tau, p)).margin(1e-9));
  ZetaCache fresh;
  for (std::size_t k = 0; k < p.K(); ++k)
    CHECK(r.zeta[k] == Approx(fresh(p.q_norm[k], p.observed_samples(r.N_t))).epsilon(1e-14));
}

}  // namespace

TEST_CASE("ergodic sum rate reference values", "[fast_varying]") {
  const auto p = unit_params();
  CHECK(ergodic_sum_rate(std::vector<double>{1.0}, 0.5, p) == Approx(0.5 * std::log(7.0 / 6.0)).epsilon(1e-14));
  CHECK(ergodic_sum_rate(std::vector<double>{0.0}, 0.5, p) == 0.0);
  CHECK(ergodic_sum_rate(std::vector<double>{1.0}, 1e-8, p) < 1e-6);
  CHECK(ergodic_sum_rate(std::vector<double>{1.0}, 1.0 - 1e-8, p) < 1e-6);
  CHECK_THROWS(ergodic_sum_rate(std::vector<double>{1.0}, 0.0, p));
  CHECK_THROWS(ergodic_sum_rate(std::vector<double>{-1.0}, 0.5, p));
  CHECK_THROWS(ergodic_sum_rate(std::vector<double>{1.0, 1.0}, 0.5, p));
}

TEST_CASE("stationary chi solves its cubic", "[fast_varying]") {
  for (double rhs : {1e-9, 1e-3, 1.0, 1e4}) {
    const double G = 3.0, E = 0.5, F = 2.0;
    const double c = detail::stationary_chi(G, E, F, rhs);
    CHECK(c * ((G + E) * c + F) * (E * c + F) == Approx(rhs).epsilon(1e-12));
  }
  CHECK(detail::stationary_chi(1.0, 1.0, 1.0, 0.0) == 0.0);
  CHECK(detail::stationary_chi(1.0, 1.0, 1.0, 1e-300) < 1e-299);
}

TEST_CASE("chi_given_tau meets the budget with equality", "[fast_varying]") {
  const auto p = scenario_params(4, 3);
  ZetaCache cache;
  for (double tau : {0.05, 0.3, 0.7}) {
    std::vector<double> z;
    for (double q : p.q_norm) z.push_back(cache(q, p.N));
    const auto a = chi_given_tau(tau, p, z, p.budget());
    CHECK(std::abs(budget_used(a.chi, z) - p.budget()) <= 1e-10 * p.budget());
    CHECK(a.lambda > 0.0);
    for (double c : a.chi) CHECK(c > 0.0);
  }
}

TEST_CASE("chi_given_tau matches a projected-gradient solver", "[fast_varying]") {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto p = scenario_params(3, seed);
    ZetaCache cache;
    std::vector<double> z;
    for (double q : p.q_norm) z.push_back(cache(q, p.N - 20));
    for (double tau : {0.1, 0.4}) {
      const auto a = chi_given_tau(tau, p, z, p.budget());
      const double ours = ergodic_sum_rate(a.chi, tau, p);
      const double oracle = projected_gradient_optimum(tau, p, z, p.budget());
      CHECK(ours >= oracle - 1e-6);
      CHECK(ours == Approx(oracle).margin(1e-6));
    }
  }
}

TEST_CASE("chi shrinks componentwise as the multiplier grows", "[fast_varying][property]") {
  const auto p = scenario_params(4, 5);
  const std::vector<double> z(4, 1.0);
  const auto wide = chi_given_tau(0.2, p, z, 1e-4);
  const auto narrow = chi_given_tau(0.2, p, z, 1e-5);
  CHECK(narrow.lambda > wide.lambda);
  for (std::size_t k = 0; k < 4; ++k) CHECK(narrow.chi[k] < wide.chi[k]);
}

TEST_CASE("budget scales with the square of epsilon", "[fast_varying][property]") {
  auto p = scenario_params(2, 4, 20, 10);
  ZetaCache cache;
  const auto full = es_solve(p, cache);
  p.epsilon *= 0.5;
  const auto half = es_solve(p, cache);
  CHECK(half.budget == Approx(0.25 * full.budget).epsilon(1e-14));
  CHECK(full.budget_used == Approx(full.budget).epsilon(1e-10));
  CHECK(half.budget_used == Approx(half.budget).epsilon(1e-10));
  CHECK(half.objective < full.objective);
}

TEST_CASE("tau_given_chi maximizes the rate over tau", "[fast_varying]") {
  for (std::uint64_t seed : {1u, 7u}) {
    const auto p = scenario_params(3, seed);
    const std::vector<double> chi{1e-3, 5e-4, 2e-3};
    const double t = tau_given_chi(chi, p);
    CHECK(std::abs(ergodic_rate_derivative(chi, t, p)) <= 1e-8);
    const double best = ergodic_sum_rate(chi, t, p);
    for (int i = 1; i <= 1000; ++i) CHECK(best >= ergodic_sum_rate(chi, i / 1001.0, p) - 1e-15);
  }
  const auto p = scenario_params(2, 1);
  CHECK_THROWS(tau_given_chi(std::vector<double>{0.0, 0.0}, p));
  CHECK_THROWS(tau_given_chi(std::vector<double>{1.0}, p));
}

TEST_CASE("rate derivative matches finite differences", "[fast_varying]") {
  const auto p = scenario_params(2, 2);
  const std::vector<double> chi{1e-3, 2e-3};
  for (double tau : {0.05, 0.2, 0.5, 0.9}) {
    const double h = 1e-6;
    const double fd = (ergodic_sum_rate(chi, tau + h, p) - ergodic_sum_rate(chi, tau - h, p)) / (2.0 * h);
    CHECK(ergodic_rate_derivative(chi, tau, p) == Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("rate is concave in tau", "[fast_varying][property]") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = scenario_params(3, seed);
    const std::vector<double> chi{2e-3, 1e-4, 7e-4};
    const double h = 1e-3;
    for (int i = 2; i < 998; ++i) {
      const double tau = i * h;
      const double second = ergodic_sum_rate(chi, tau + h, p) - 2.0 * ergodic_sum_rate(chi, tau, p) +
                            ergodic_sum_rate(chi, tau - h, p);
      CHECK(second <= 1e-13);
    }
  }
}

TEST_CASE("exhaustive search with two symbols has one candidate", "[fast_varying]") {
  auto p = scenario_params(2, 1, 2, 10);
  const auto r = es_solve(p);
  CHECK(r.N_t == 1);
  CHECK(r.tau == 0.5);
  CHECK(r.trace.size() == 1);
  check_result(r, p);
}

TEST_CASE("exhaustive search matches a brute-force grid", "[fast_varying]") {
  auto p = scenario_params(1, 2, 10, 10);
  ZetaCache cache;
  const auto r = es_solve(p, cache);
  check_result(r, p);
  // 9 pilot lengths x 1111 power levels covering each candidate's budget.
  double best = 0.0;
  for (std::size_t nt = 1; nt < 10; ++nt) {
    const double tau = nt / 10.0;
    const double z = cache(p.q_norm[0], p.observed_samples(nt));
    const double cap = std::sqrt(2.0 * p.budget() / z);
    for (int i = 0; i <= 1110; ++i) {
      const double c = cap * i / 1110.0;
      best = std::max(best, ergodic_sum_rate(std::vector<double>{c}, tau, p));
    }
  }
  CHECK(r.objective >= best - 1e-12);
  CHECK(r.objective == Approx(best).epsilon(1e-9));
}

TEST_CASE("ES and AO on the default scenario", "[fast_varying]") {
  const auto p = scenario_params(4, 1);
  ZetaCache cache;
  const auto es = es_solve(p, cache);
  check_result(es, p);
  CHECK(es.trace.size() == p.N - 1);

  const auto ao = ao_solve(p, cache);
  check_result(ao, p);
  CHECK(ao.converged);
  CHECK(es.objective >= ao.objective - 1e-9);
  CHECK(ao.objective >= 0.99 * es.objective);
  for (std::size_t i = 1; i < ao.trace.size(); ++i) CHECK(ao.trace[i].objective >= ao.trace[i - 1].objective * (1.0 - 1e-12));

  SECTION("multi-start stability") {
    for (double tau0 : {0.25, 0.75}) {
      const auto other = ao_solve(p, cache, tau0);
      CHECK(other.objective == Approx(ao.objective).epsilon(1e-4));
    }
  }
  SECTION("ES over permuted bands") {
    std::vector<std::size_t> perm{2, 0, 3, 1};
    FastVaryingParams q = p;
    for (std::size_t k = 0; k < 4; ++k) {
      q.Gk[k] = p.Gk[perm[k]];
      q.Ek[k] = p.Ek[perm[k]];
      q.mu_tilde[k] = p.mu_tilde[perm[k]];
      q.F1[k] = p.F1[perm[k]];
      q.F2[k] = p.F2[perm[k]];
      q.q_norm[k] = p.q_norm[perm[k]];
    }
    const auto permuted = es_solve(q, cache);
    CHECK(permuted.objective == Approx(es.objective).epsilon(1e-12));
    CHECK(permuted.N_t == es.N_t);
    for (std::size_t k = 0; k < 4; ++k) CHECK(permuted.chi[k] == Approx(es.chi[perm[k]]).epsilon(1e-9));
  }
}

TEST_CASE("AO rounding and argument checks", "[fast_varying]") {
  CHECK(round_pilots(0.5, 10) == 5);
  CHECK(round_pilots(0.55, 10) == 6);
  CHECK(round_pilots(0.001, 10) == 1);
  CHECK(round_pilots(0.999, 10) == 9);
  const auto p = scenario_params(2, 1, 20, 10);
  CHECK_THROWS(ao_solve(p, 0.0));
  CHECK_THROWS(ao_solve(p, 1.0));
  auto bad = p;
  bad.N = 1;
  CHECK_THROWS(es_solve(bad));
}

TEST_CASE("observing pilots changes only the zeta sample count", "[fast_varying]") {
  auto p = scenario_params(2, 3, 20, 10);
  p.adversary_observes_pilots = true;
  ZetaCache cache;
  const auto r = es_solve(p, cache);
  check_result(r, p);
  CHECK(r.zeta[0] == Approx(cache(p.q_norm[0], 20)).epsilon(1e-15));
}

TEST_CASE("more jamming power is not always better", "[fast_varying][property]") {
  ZetaCache cache;
  std::vector<double> rates;
  for (double q : {15.0, 25.0, 45.0}) rates.push_back(es_solve(scenario_params(4, 1, 100, 100, 0.05, q), cache).objective);
  INFO("rates " << rates[0] << " " << rates[1] << " " << rates[2]);
  CHECK_FALSE((rates[0] <= rates[1] && rates[1] <= rates[2]));
}
