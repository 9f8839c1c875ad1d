#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "qcount/core.hpp"
#include "qcount/errors.hpp"

namespace qcount::stage1 {

/// Constants of the coarse estimator. The geometric ratio and decision
/// threshold carry the correctness argument and are never scaled; the
/// practical factor thins only the flip counts.
struct Config {
  double ratio = 12.0 / 11.0;
  double flip_constant = 1e5;
  double delta = 0.1;              // failure budget; the stage consumes delta/2
  double threshold = 1.0 / 3.0;
  double output_coefficient = 5.0 / 8.0;
  double practical_factor = 1.0;

  void validate() const {
    if (!(ratio > 1.0)) throw std::invalid_argument("stage1: ratio must exceed 1");
    if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("stage1: delta outside (0, 1)");
    if (!(threshold > 0.0) || !(threshold < 1.0)) throw std::invalid_argument("stage1: threshold outside (0, 1)");
    if (!(practical_factor > 0.0) || !(practical_factor <= 1.0)) {
      throw std::invalid_argument("stage1: practical factor outside (0, 1]");
    }
  }
};

/// Geometric rotation ladder (ratio^0, ..., ratio^m) with m minimal such
/// that ratio^m >= sqrt(N), every entry flipped ceil(pf * 1e5 * ln(120/delta))
/// times. Pure function of (N, cfg).
inline GroverSchedule build_schedule(std::uint64_t domain_size, const Config& cfg) {
  cfg.validate();
  if (domain_size < 2) throw std::invalid_argument("stage1: domain size must be >= 2");

  const double target = std::sqrt(static_cast<double>(domain_size));
  const auto flips = static_cast<std::uint64_t>(
      std::ceil(cfg.practical_factor * cfg.flip_constant * std::log(120.0 / cfg.delta)));

  GroverSchedule schedule;
  double rotation = 1.0;
  std::size_t exponent = 0;
  for (;;) {
    schedule.entries.push_back({rotation, flips});
    schedule.labels.push_back("s1:" + std::to_string(exponent));
    if (rotation >= target) break;
    rotation *= cfg.ratio;
    ++exponent;
  }
  return schedule;
}

/// Number of ladder steps (the exponent m) of the schedule for this domain
/// size; exposed for schedule-shape checks.
inline std::size_t ladder_exponent(std::uint64_t domain_size, const Config& cfg) {
  return build_schedule(domain_size, cfg).size() - 1;
}

/// True when every entry of a coarse-stage outcome came up all-tails, the
/// signature of an instance with no marked points.
inline bool all_zero(const ScheduleOutcome& outcome) {
  for (const auto& e : outcome.per_entry) {
    if (e.successes != 0) return false;
  }
  return true;
}

/// Reads the coarse estimate off a performed ladder: with t the minimal
/// index whose empirical mean reaches the threshold, the estimate is
/// (5/8) * (11/12)^t. Indices align with the rotation exponents, so entry 0
/// is rotation ratio^0. Throws NoThresholdCrossed when no index qualifies.
inline double extract_estimate(const ScheduleOutcome& outcome, const Config& cfg) {
  cfg.validate();
  for (std::size_t t = 0; t < outcome.per_entry.size(); ++t) {
    const auto& e = outcome.per_entry[t];
    // Exact rational comparison successes/flips >= threshold.
    if (static_cast<long double>(e.successes) >=
        static_cast<long double>(cfg.threshold) * static_cast<long double>(e.flips)) {
      return cfg.output_coefficient * std::pow(1.0 / cfg.ratio, static_cast<double>(t));
    }
  }
  throw NoThresholdCrossed("stage1: no empirical mean reached " + std::to_string(cfg.threshold));
}

}  // namespace qcount::stage1
