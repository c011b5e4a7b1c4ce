#pragma once

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covert {

/// Gauss–Laguerre rule for the normalized weight x^alpha e^{-x} / Gamma(alpha+1)
/// on [0, inf). Weights sum to one.
class QuadratureRule {
 public:
  QuadratureRule() = default;

  /// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix of the
  /// generalized Laguerre recurrence, weights the squared first components.
  static QuadratureRule gauss_laguerre(std::size_t order, double alpha = 0.0) {
    if (order < 2) throw std::invalid_argument("gauss_laguerre: order must be >= 2");
    if (!(alpha > -1.0)) throw std::invalid_argument("gauss_laguerre: alpha must be > -1");
    const auto m = static_cast<Eigen::Index>(order);
    Eigen::VectorXd diag(m), sub(m - 1);
    for (Eigen::Index i = 0; i < m; ++i) diag(i) = 2.0 * static_cast<double>(i) + alpha + 1.0;
    for (Eigen::Index i = 1; i < m; ++i) {
      const double di = static_cast<double>(i);
      sub(i - 1) = std::sqrt(di * (di + alpha));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("gauss_laguerre: eigen decomposition failed");

    QuadratureRule rule;
    rule.alpha_ = alpha;
    rule.nodes_.resize(order);
    rule.weights_.resize(order);
    rule.log_weights_.resize(order);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v0 = solver.eigenvectors()(0, i);
      rule.nodes_[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
      rule.weights_[static_cast<std::size_t>(i)] = v0 * v0;
      rule.log_weights_[static_cast<std::size_t>(i)] =
          v0 == 0.0 ? -std::numeric_limits<double>::infinity() : 2.0 * std::log(std::abs(v0));
    }
    return rule;
  }

  std::size_t order() const noexcept { return nodes_.size(); }
  double alpha() const noexcept { return alpha_; }
  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> log_weights() const noexcept { return log_weights_; }

 private:
  double alpha_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
};

/// Process-wide cache of Laguerre rules keyed by (order, alpha). Returned
/// references stay valid for the lifetime of the program.
inline const QuadratureRule& laguerre_rule(std::size_t order, double alpha = 0.0) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, double>, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{order, alpha}];
  if (!slot) slot = std::make_unique<QuadratureRule>(QuadratureRule::gauss_laguerre(order, alpha));
  return *slot;
}

inline constexpr std::size_t kDefaultQuadOrder = 128;

inline const QuadratureRule& default_rule() { return laguerre_rule(kDefaultQuadOrder); }

/// Accumulates log-domain terms without overflow.
class LogSumExp {
 public:
  void add(double log_term) noexcept {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term <= max_) {
      sum_ += std::exp(log_term - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
      max_ = log_term;
    }
  }
  double value() const noexcept {
    return sum_ == 0.0 ? -std::numeric_limits<double>::infinity() : max_ + std::log(sum_);
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

namespace detail {

/// 10-point Gauss–Legendre nodes/weights on [-1, 1].
struct Legendre10 {
  std::array<double, 10> x{};
  std::array<double, 10> w{};
  Legendre10() {
    using G = boost::math::quadrature::gauss<double, 10>;
    const auto& a = G::abscissa();
    const auto& wt = G::weights();
    for (std::size_t i = 0; i < 5; ++i) {
      x[i] = -a[i];
      w[i] = wt[i];
      x[9 - i] = a[i];
      w[9 - i] = wt[i];
    }
  }
};

inline const Legendre10& legendre10() {
  static const Legendre10 rule;
  return rule;
}

}  // namespace detail

/// log of the integral of exp(f) over [a, b] with one 10-point Legendre panel.
template <class LogFn>
double log_panel_integral(LogFn&& log_f, double a, double b) {
  const auto& gl = detail::legendre10();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  LogSumExp acc;
  for (std::size_t i = 0; i < 10; ++i) acc.add(std::log(gl.w[i] * half) + log_f(mid + half * gl.x[i]));
  return acc.value();
}

/// Integral of f over [a, b] with `panels` equal 10-point Legendre panels.
template <class Fn>
double composite_legendre(Fn&& f, double a, double b, std::size_t panels) {
  const auto& gl = detail::legendre10();
  const double width = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + width * static_cast<double>(p);
    const double mid = lo + 0.5 * width;
    double s = 0.0;
    for (std::size_t i = 0; i < 10; ++i) s += gl.w[i] * f(mid + 0.5 * width * gl.x[i]);
    total += 0.5 * width * s;
  }
  return total;
}

/// Log of the integral over [0, inf) of exp(g), where g is unimodal with its
/// maximum at `mode` and `scale` is the width of the peak. Panels grow
/// geometrically away from the mode and stop once the integrand has dropped
/// below exp(-cutoff) relative to the peak.
template <class LogFn>
double log_unimodal_integral(LogFn&& g, double mode, double scale, double cutoff = 46.0) {
  constexpr double kGrowth = 1.25;
  constexpr std::size_t kMaxPanels = 2000;
  const double peak = g(mode);
  if (!std::isfinite(peak)) throw std::runtime_error("log_unimodal_integral: non-finite peak");
  LogSumExp acc;

  double width = scale;
  double left = mode;
  for (std::size_t i = 0; i < kMaxPanels && left > 0.0; ++i) {
    const double next = std::max(0.0, left - width);
    acc.add(log_panel_integral(g, next, left));
    left = next;
    if (g(left) - peak < -cutoff) break;
    width *= kGrowth;
  }

  width = scale;
  double right = mode;
  std::size_t i = 0;
  for (; i < kMaxPanels; ++i) {
    const double next = right + width;
    acc.add(log_panel_integral(g, right, next));
    right = next;
    if (g(right) - peak < -cutoff) break;
    width *= kGrowth;
  }
  if (i == kMaxPanels) throw std::runtime_error("log_unimodal_integral: tail did not decay");
  return acc.value();
}

}  // namespace covert
