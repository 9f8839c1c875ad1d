#pragma once

#include <cstdint>
#include <utility>

#include "qcount/binomial.hpp"
#include "qcount/core.hpp"
#include "qcount/rng.hpp"

namespace qcount {

class SimulatedOracle;

/// One logical execution of a schedule against the oracle. The full query
/// cost is charged when the performance is opened; individual entry outcomes
/// are materialized on demand. Because every entry draws from its own child
/// stream keyed by (seed, performance, global entry index), the outcome of an
/// entry is identical whether it is sampled eagerly, lazily, or never
/// alongside its neighbors.
class SchedulePerformance {
 public:
  /// Samples the outcome of a contiguous slice of the performed schedule.
  /// entry_offset is the global index of the slice's first entry within the
  /// performed schedule.
  ScheduleOutcome sample_slice(const GroverSchedule& slice, std::uint64_t entry_offset);

 private:
  friend class SimulatedOracle;
  SchedulePerformance(SimulatedOracle* oracle, std::uint64_t id) : oracle_(oracle), id_(id) {}

  SimulatedOracle* oracle_;
  std::uint64_t id_;
};

/// Samples schedule outcomes for a hidden instance and keeps the exact query
/// account. Single-owner mutable state: move it between threads, do not share
/// it. The hidden instance is never exposed; estimation code sees only the
/// domain size and sampled outcomes.
class SimulatedOracle {
 public:
  SimulatedOracle(OracleInstance instance, std::uint64_t seed)
      : instance_(instance), seed_(seed) {}

  std::uint64_t domain_size() const { return instance_.domain_size(); }
  std::uint64_t queries_used() const { return queries_used_; }
  void reset_query_counter() { queries_used_ = 0; }

  /// Performs the whole schedule: charges its exact query cost and samples
  /// Bin(t_i, p(r_i)) for every entry.
  ScheduleOutcome perform_schedule(const GroverSchedule& schedule) {
    SchedulePerformance perf = begin_performance(query_cost(schedule));
    return perf.sample_slice(schedule, 0);
  }

  /// Opens a deferred performance: the given total cost is charged now and
  /// outcome slices may be sampled later (in any order). The caller is
  /// responsible for passing the query cost of the full schedule the
  /// performance stands for.
  SchedulePerformance begin_performance(const QueryCost& total_cost) {
    queries_used_ += total_cost.exact_queries;
    return SchedulePerformance(this, performances_++);
  }

 private:
  friend class SchedulePerformance;

  OracleInstance instance_;
  std::uint64_t seed_;
  std::uint64_t queries_used_ = 0;
  std::uint64_t performances_ = 0;
};

inline ScheduleOutcome SchedulePerformance::sample_slice(const GroverSchedule& slice,
                                                         std::uint64_t entry_offset) {
  slice.validate();
  const double theta = oracle_->instance_.theta_star();
  ScheduleOutcome out;
  out.per_entry.reserve(slice.entries.size());
  for (std::size_t i = 0; i < slice.entries.size(); ++i) {
    const auto& e = slice.entries[i];
    rng::Xoshiro256pp gen = rng::entry_stream(oracle_->seed_, id_, entry_offset + i);
    const double bias = coin_bias(e.rotation, theta);
    out.per_entry.push_back({binomial_sample(gen, e.flips, bias), e.flips});
  }
  return out;
}

}  // namespace qcount
