#pragma once

// Random variate generation.
//
// Every sampler takes the engine explicitly. Distribution objects are built
// per draw so no hidden state survives between calls; an engine snapshot is
// therefore enough to resume a stream exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "tensorank/error.hpp"

namespace tensorank {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based sub-seed: stream `index` of root seed `root`.
/// Sub-seeds are mix64(root ^ mix64(index + 1)); streams never share state.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return mix64(root ^ mix64(index + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform on the open interval (0, 1).
inline double uniform01(Rng& rng) {
  while (true) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

inline double normal(Rng& rng, double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  return dist(rng);
}

/// log of a Gamma(shape, 1) variate. Shapes below 1 use the
/// G(a) = G(a+1) * U^(1/a) identity, evaluated in log space so tiny shapes
/// (1/d^2 arm concentrations) never underflow to an exact zero.
inline double log_gamma_variate(Rng& rng, double shape) {
  require(shape > 0.0 && std::isfinite(shape), ErrorKind::numeric, "gamma shape must be positive");
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    double g = dist(rng);
    return std::log(g);
  }
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  double g = dist(rng);
  return std::log(g) + std::log(uniform01(rng)) / shape;
}

/// Gamma with shape/rate parametrization.
inline double gamma_rate(Rng& rng, double shape, double rate) {
  require(rate > 0.0 && std::isfinite(rate), ErrorKind::numeric, "gamma rate must be positive");
  return std::exp(log_gamma_variate(rng, shape)) / rate;
}

inline double beta_variate(Rng& rng, double a, double b) {
  double la = log_gamma_variate(rng, a);
  double lb = log_gamma_variate(rng, b);
  double mx = std::max(la, lb);
  double x = std::exp(la - mx) / (std::exp(la - mx) + std::exp(lb - mx));
  // Keep strictly inside (0,1): the stick updates take log(1 - x).
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return std::clamp(x, lo, hi);
}

/// Dirichlet draw; components are floored at the smallest normal double so
/// the result is strictly positive.
inline void dirichlet(Rng& rng, std::span<const double> alpha, std::span<double> out) {
  const std::size_t n = alpha.size();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) {
    out[c] = log_gamma_variate(rng, alpha[c]);
    mx = std::max(mx, out[c]);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    out[c] = std::exp(out[c] - mx);
    total += out[c];
  }
  double floor_total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    out[c] = std::max(out[c] / total, std::numeric_limits<double>::min());
    floor_total += out[c];
  }
  for (std::size_t c = 0; c < n; ++c) out[c] /= floor_total;
}

inline std::vector<double> dirichlet(Rng& rng, std::span<const double> alpha) {
  std::vector<double> out(alpha.size());
  dirichlet(rng, alpha, out);
  return out;
}

/// Categorical draw from unnormalized log weights (max-subtracted).
inline int categorical_log(Rng& rng, std::span<const double> logw) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logw) mx = std::max(mx, v);
  require(std::isfinite(mx), ErrorKind::numeric, "categorical draw with no positive weight");
  double total = 0.0;
  for (double v : logw) total += std::exp(v - mx);
  double u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    acc += std::exp(logw[i] - mx);
    if (u < acc) return static_cast<int>(i);
  }
  for (std::size_t i = logw.size(); i-- > 0;)
    if (std::isfinite(logw[i])) return static_cast<int>(i);
  return 0;
}

/// Categorical draw from nonnegative weights.
inline int categorical(Rng& rng, std::span<const double> w) {
  double total = 0.0;
  for (double v : w) total += v;
  require(total > 0.0, ErrorKind::numeric, "categorical draw with zero total weight");
  double u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<int>(i);
  }
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0.0) return static_cast<int>(i);
  return 0;
}

/// Truncated stick-breaking weights; the last fraction is treated as 1 so
/// the weights form an exact simplex.
inline std::vector<double> stick_weights(std::span<const double> fractions) {
  std::vector<double> w(fractions.size());
  double remaining = 1.0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    double f = (i + 1 == fractions.size()) ? 1.0 : fractions[i];
    w[i] = remaining * f;
    remaining *= (1.0 - f);
  }
  return w;
}

}  // namespace tensorank
