#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcount/errors.hpp"

namespace qcount {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kHalfPi = std::numbers::pi / 2.0;

/// Largest odd integer not exceeding r. Defined for r >= 1 only.
inline std::int64_t floor_odd(double r) {
  if (!(r >= 1.0)) {
    throw std::invalid_argument("floor_odd: rotation must be >= 1, got " + std::to_string(r));
  }
  auto k = static_cast<std::int64_t>(std::floor(r));
  if (k % 2 == 0) --k;
  return k;
}

/// True iff a and b agree within multiplicative factor 1+eta in either
/// direction, i.e. 1/(1+eta) <= a/b <= 1+eta. Symmetric in a and b.
inline bool approx_within(double a, double b, double eta) {
  if (!(a > 0.0) || !(b > 0.0) || !(eta > 0.0)) {
    throw std::invalid_argument("approx_within: arguments must be positive");
  }
  const double lo = a < b ? a : b;
  const double hi = a < b ? b : a;
  return hi <= lo * (1.0 + eta);
}

/// Multiplicative tolerance eta for the relation checked by approx_within.
struct ApproxFactor {
  double eta;

  explicit ApproxFactor(double e) : eta(e) {
    if (!(eta > 0.0)) throw std::invalid_argument("ApproxFactor: eta must be > 0");
  }
  bool relates(double a, double b) const { return approx_within(a, b, eta); }
};

/// Grover angle arcsin(sqrt(K/N)) of an instance with N domain points and K
/// marked ones.
inline double angle_from_count(std::uint64_t domain_size, std::int64_t marked_count) {
  if (domain_size == 0) throw std::invalid_argument("angle_from_count: domain size must be positive");
  if (marked_count < 0 || static_cast<std::uint64_t>(marked_count) > domain_size) {
    throw std::invalid_argument("angle_from_count: marked count outside [0, N]");
  }
  return std::asin(std::sqrt(static_cast<double>(marked_count) / static_cast<double>(domain_size)));
}

/// Hidden (N, K) pair under test. The angle is always derived from (N, K),
/// never stored separately.
class OracleInstance {
 public:
  OracleInstance(std::uint64_t domain_size, std::uint64_t marked_count)
      : domain_size_(domain_size), marked_count_(marked_count) {
    if (domain_size_ == 0) throw std::invalid_argument("OracleInstance: domain size must be positive");
    if (marked_count_ > domain_size_) {
      throw std::invalid_argument("OracleInstance: marked count exceeds domain size");
    }
  }

  std::uint64_t domain_size() const { return domain_size_; }
  std::uint64_t marked_count() const { return marked_count_; }
  double theta_star() const {
    return angle_from_count(domain_size_, static_cast<std::int64_t>(marked_count_));
  }

 private:
  std::uint64_t domain_size_;
  std::uint64_t marked_count_;
};

/// Bias sin^2(floor_odd(r) * thetaStar) of the coin obtained by running
/// floor_odd(r) Grover rotations and measuring.
inline double coin_bias(double r, double theta_star) {
  if (!(theta_star >= 0.0) || !(theta_star <= kHalfPi)) {
    throw std::invalid_argument("coin_bias: angle outside [0, pi/2]");
  }
  const double s = std::sin(static_cast<double>(floor_odd(r)) * theta_star);
  return s * s;
}

/// Nearest integer with ties rounded half away from zero.
inline std::int64_t nearest_int_half_away(double x) { return std::llround(x); }

struct CountFromAngle {
  double kappa;          // N * sin^2(theta), the real-valued count
  std::int64_t k_round;  // nearest integer to kappa
};

/// Inverts an angle estimate back to a count: kappa = N sin^2(theta) and its
/// nearest integer.
inline CountFromAngle count_from_angle(std::uint64_t domain_size, double theta) {
  if (domain_size == 0) throw std::invalid_argument("count_from_angle: domain size must be positive");
  if (!(theta >= 0.0) || !(theta <= kHalfPi)) {
    throw std::invalid_argument("count_from_angle: angle outside [0, pi/2]");
  }
  const double s = std::sin(theta);
  const double kappa = static_cast<double>(domain_size) * s * s;
  return {kappa, nearest_int_half_away(kappa)};
}

/// Ratio of the Grover angles of two real-valued counts, normalized to >= 1.
/// Returns the factor 1+eta' with arcsin(sqrt(kprime/N)) / arcsin(sqrt(k/N))
/// equal to (1+eta')^(+-1).
inline double arcsin_factor(double k, double kprime, double domain_size) {
  if (!(domain_size > 0.0)) throw std::invalid_argument("arcsin_factor: domain size must be positive");
  if (!(k > 0.0) || !(kprime > 0.0) || k > domain_size || kprime > domain_size) {
    throw std::invalid_argument("arcsin_factor: counts must lie in (0, N]");
  }
  const double num = std::asin(std::sqrt(kprime / domain_size));
  const double den = std::asin(std::sqrt(k / domain_size));
  const double ratio = num / den;
  return ratio >= 1.0 ? ratio : 1.0 / ratio;
}

/// Fixed plan of Grover-iteration coins: flip the coin of rotation
/// entries[i].rotation exactly entries[i].flips times. The optional labels
/// tag what each entry serves; when present there is one label per entry.
struct GroverSchedule {
  struct Entry {
    double rotation;      // real r >= 1
    std::uint64_t flips;  // t >= 1

    bool operator==(const Entry&) const = default;
  };

  std::vector<Entry> entries;
  std::vector<std::string> labels;

  void validate() const {
    for (const Entry& e : entries) {
      if (!(e.rotation >= 1.0)) throw std::invalid_argument("GroverSchedule: rotation must be >= 1");
      if (e.flips == 0) throw std::invalid_argument("GroverSchedule: flip count must be >= 1");
    }
    if (!labels.empty() && labels.size() != entries.size()) {
      throw std::invalid_argument("GroverSchedule: label count does not match entry count");
    }
  }

  std::size_t size() const { return entries.size(); }
};

/// Measured results of performing a schedule, one row per entry in order.
struct ScheduleOutcome {
  struct EntryOutcome {
    std::uint64_t successes;
    std::uint64_t flips;

    /// Empirical mean successes/flips; the underlying integers are the
    /// exact rational.
    double p_hat() const { return static_cast<double>(successes) / static_cast<double>(flips); }

    bool operator==(const EntryOutcome&) const = default;
  };

  std::vector<EntryOutcome> per_entry;
};

/// Query accounting for a schedule: the exact charge
/// sum_i t_i * (floor_odd(r_i) - 1) / 2 plus the coarse upper bound
/// (1/2) sum_i r_i t_i. The final measurement of each coin is free.
struct QueryCost {
  std::uint64_t exact_queries = 0;
  double upper_bound = 0.0;
};

/// Queries charged for one flip of the coin of rotation r.
inline std::uint64_t queries_per_flip(double rotation) {
  return static_cast<std::uint64_t>((floor_odd(rotation) - 1) / 2);
}

inline QueryCost query_cost(const GroverSchedule& schedule) {
  schedule.validate();
  QueryCost cost;
  for (const auto& e : schedule.entries) {
    const std::uint64_t per_flip = queries_per_flip(e.rotation);
    std::uint64_t entry_cost = 0;
    if (__builtin_mul_overflow(per_flip, e.flips, &entry_cost) ||
        __builtin_add_overflow(cost.exact_queries, entry_cost, &cost.exact_queries)) {
      throw ResourceLimitError("query_cost: exact query count overflows 64 bits");
    }
    cost.upper_bound += 0.5 * e.rotation * static_cast<double>(e.flips);
  }
  return cost;
}

}  // namespace qcount
