#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "qcount/rng.hpp"

namespace qcount {

/// A coin with a known bias, for exact distribution analysis.
struct ExactCoin {
  std::uint64_t flips;
  double bias;

  void validate() const {
    if (flips == 0) throw std::invalid_argument("ExactCoin: flip count must be >= 1");
    if (!(bias >= 0.0) || !(bias <= 1.0)) throw std::invalid_argument("ExactCoin: bias outside [0, 1]");
  }
};

namespace detail {

// Tail of the Stirling series for log k!, i.e. log k! - (k+1/2)log(k+1)
// + (k+1) - log sqrt(2 pi). Table for small k, asymptotic series otherwise.
inline double stirling_tail(double k) {
  static const double kTable[] = {
      0.0810614667953272,  0.0413406959554092,  0.0276779256849983, 0.02079067210376509,
      0.0166446911898211,  0.0138761288230707,  0.0118967099458917, 0.0104112652619720,
      0.00925546218271273, 0.00833056343336287};
  if (k <= 9.0) return kTable[static_cast<int>(k)];
  const double kp1sq = (k + 1.0) * (k + 1.0);
  return (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / 1260.0 / kp1sq) / kp1sq) / (k + 1.0);
}

// Sequential CDF inversion; intended for n*p <= 10 where the expected
// iteration count is small.
inline std::uint64_t binomial_inversion(rng::Xoshiro256pp& gen, std::uint64_t n, double p) {
  const double q = 1.0 - p;
  const double ratio = p / q;
  double pmf = std::exp(static_cast<double>(n) * std::log1p(-p));  // (1-p)^n
  double u = gen.next_double();
  std::uint64_t k = 0;
  while (u > pmf && k < n) {
    u -= pmf;
    ++k;
    pmf *= ratio * static_cast<double>(n - k + 1) / static_cast<double>(k);
  }
  return k;
}

// Transformed rejection with squeeze (Hormann's BTRS); O(1) expected time,
// valid for n*p >= 10 and p <= 1/2.
inline std::uint64_t binomial_btrs(rng::Xoshiro256pp& gen, std::uint64_t n, double p) {
  const double nd = static_cast<double>(n);
  const double stddev = std::sqrt(nd * p * (1.0 - p));
  const double b = 1.15 + 2.53 * stddev;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = nd * p + 0.5;
  const double v_r = 0.92 - 4.2 / b;
  const double r = p / (1.0 - p);
  const double alpha = (2.83 + 5.1 / b) * stddev;
  const double m = std::floor((nd + 1.0) * p);

  for (;;) {
    const double u = gen.next_double() - 0.5;
    double v = gen.next_double();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + c);
    if (kf < 0.0 || kf > nd) continue;
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
    v = std::log(v * alpha / (a / (us * us) + b));
    const double upper =
        (m + 0.5) * std::log((m + 1.0) / (r * (nd - m + 1.0))) +
        (nd + 1.0) * std::log((nd - m + 1.0) / (nd - kf + 1.0)) +
        (kf + 0.5) * std::log(r * (nd - kf + 1.0) / (kf + 1.0)) +
        stirling_tail(m) + stirling_tail(nd - m) - stirling_tail(kf) - stirling_tail(nd - kf);
    if (v <= upper) return static_cast<std::uint64_t>(kf);
  }
}

}  // namespace detail

/// One draw from Bin(n, p) in O(1) expected time regardless of n.
inline std::uint64_t binomial_sample(rng::Xoshiro256pp& gen, std::uint64_t n, double p) {
  if (!(p >= 0.0) || !(p <= 1.0)) throw std::invalid_argument("binomial_sample: p outside [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - binomial_sample(gen, n, 1.0 - p);
  if (static_cast<double>(n) * p < 10.0) return detail::binomial_inversion(gen, n, p);
  return detail::binomial_btrs(gen, n, p);
}

/// P[Bin(t, p)/t > threshold], summed exactly in extended precision. The
/// decaying side of the distribution is accumulated term by term from an
/// lgamma-anchored boundary mass, so the absolute error stays below 1e-12
/// even for t ~ 10^6.
inline double binomial_tail_above(const ExactCoin& coin, double threshold) {
  coin.validate();
  if (!(threshold >= 0.0) || !(threshold <= 1.0)) {
    throw std::invalid_argument("binomial_tail_above: threshold outside [0, 1]");
  }
  const std::uint64_t t = coin.flips;
  const long double p = coin.bias;
  const long double q = 1.0L - p;

  // Smallest k with k/t > threshold.
  const long double bound = static_cast<long double>(threshold) * static_cast<long double>(t);
  std::uint64_t k0 = static_cast<std::uint64_t>(floorl(bound)) + 1;
  if (static_cast<long double>(k0) <= bound) ++k0;  // guard against floor rounding
  if (k0 > t) return 0.0;
  if (k0 == 0) return 1.0;
  if (p == 0.0L) return 0.0;          // all mass at 0 < k0
  if (p == 1.0L) return k0 <= t ? 1.0 : 0.0;

  const auto log_pmf = [&](std::uint64_t k) -> long double {
    return lgammal(static_cast<long double>(t) + 1.0L) - lgammal(static_cast<long double>(k) + 1.0L) -
           lgammal(static_cast<long double>(t - k) + 1.0L) + static_cast<long double>(k) * logl(p) +
           static_cast<long double>(t - k) * logl(q);
  };

  const std::uint64_t mode = static_cast<std::uint64_t>(floorl((static_cast<long double>(t) + 1.0L) * p));
  if (k0 > mode) {
    // Upper tail decays with growing k: sum upward from k0.
    long double term = expl(log_pmf(k0));
    long double acc = term;
    for (std::uint64_t k = k0; k < t; ++k) {
      term *= (static_cast<long double>(t - k) / static_cast<long double>(k + 1)) * (p / q);
      acc += term;
      if (term < acc * 1e-25L) break;
    }
    return static_cast<double>(acc);
  }
  // Threshold below the mode: sum the complement P[X <= k0-1] downward.
  const std::uint64_t khi = k0 - 1;
  long double term = expl(log_pmf(khi));
  long double acc = term;
  for (std::uint64_t k = khi; k > 0; --k) {
    term *= (static_cast<long double>(k) / static_cast<long double>(t - k + 1)) * (q / p);
    acc += term;
    if (term < acc * 1e-25L) break;
  }
  return static_cast<double>(1.0L - acc);
}

}  // namespace qcount
