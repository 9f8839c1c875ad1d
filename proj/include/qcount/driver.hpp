#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <cstring>

#include "qcount/core.hpp"
#include "qcount/errors.hpp"
#include "qcount/oracle.hpp"
#include "qcount/rng.hpp"
#include "qcount/stage1.hpp"
#include "qcount/stage2.hpp"

namespace qcount::driver {

enum class Mode { Rigorous, Practical };

inline const char* mode_name(Mode m) { return m == Mode::Rigorous ? "rigorous" : "practical"; }

inline Mode mode_from_name(const std::string& s) {
  if (s == "rigorous") return Mode::Rigorous;
  if (s == "practical") return Mode::Practical;
  throw std::invalid_argument("unknown mode: " + s);
}

/// Shipped defaults. Rigorous mode keeps the analysed constants and pads the
/// domain by 2^40 so the angle grid's cap provably covers every instance
/// angle; practical mode pads by 8 with a matching cap and thins flip counts
/// by a factor found with the calibration harness.
namespace defaults {
inline constexpr double kFlipScaleA = 14000.0;
// From the calibration harness on {eps 0.5/0.25/0.1, K 1..256} validation
// cells at delta = 0.2: failure crosses delta/2 near 0.009; shipped with the
// procedure's 2x margin.
inline constexpr double kPracticalFlipFactor = 0.02;
inline constexpr std::uint64_t kRigorousPadFactor = 1ull << 40;
inline constexpr std::uint64_t kPracticalPadFactor = 8;
inline double rigorous_grid_cap() { return 1.1 * std::asin(std::pow(2.0, -20.0)); }
inline double practical_grid_cap() { return 1.1 * std::asin(std::sqrt(1.0 / 8.0)); }
}  // namespace defaults

/// Top-level configuration. Zero-valued fields resolve to mode defaults.
struct DriverConfig {
  double eps = 0.5;
  double delta = 0.2;
  Mode mode = Mode::Practical;
  double theta_grid_ratio = 1.001;
  std::uint64_t pad_factor = 0;   // 0 -> mode default
  double grid_cap = 0.0;          // 0 -> mode default
  double flip_scale_a = 0.0;      // 0 -> 14000
  double practical_factor = 0.0;  // 0 -> mode default
  std::uint64_t entry_ceiling = 1ull << 33;

  DriverConfig resolved() const {
    DriverConfig r = *this;
    if (r.pad_factor == 0) {
      r.pad_factor = r.mode == Mode::Rigorous ? defaults::kRigorousPadFactor : defaults::kPracticalPadFactor;
    }
    if (r.grid_cap == 0.0) {
      r.grid_cap = r.mode == Mode::Rigorous ? defaults::rigorous_grid_cap() : defaults::practical_grid_cap();
    }
    if (r.flip_scale_a == 0.0) r.flip_scale_a = defaults::kFlipScaleA;
    if (r.practical_factor == 0.0) {
      r.practical_factor = r.mode == Mode::Rigorous ? 1.0 : defaults::kPracticalFlipFactor;
    }
    r.validate();
    return r;
  }

  void validate() const {
    if (!(eps > 0.0) || !(eps <= 1.0)) throw std::invalid_argument("driver: eps outside (0, 1]");
    if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("driver: delta outside (0, 1)");
    if (!(theta_grid_ratio > 1.0)) throw std::invalid_argument("driver: grid ratio must exceed 1");
    if (pad_factor != 0 && (pad_factor & (pad_factor - 1)) != 0) {
      throw std::invalid_argument("driver: pad factor must be a power of two");
    }
    if (!(practical_factor >= 0.0) || practical_factor > 1.0) {
      throw std::invalid_argument("driver: practical factor outside (0, 1]");
    }
  }
};

/// Estimate produced by one driver run, with full query accounting.
struct CountEstimate {
  double theta_est = 0.0;
  double kappa = 0.0;
  std::int64_t k_hat = 0;
  std::uint64_t queries_exact = 0;
  double queries_bound = 0.0;
  bool failure_flag = false;
  std::vector<std::uint64_t> round_queries_exact;  // one entry per round
};

/// Padded domain size N' = padFactor * N. Padding appends unmarked points
/// only, so the count being estimated is unchanged while every instance
/// angle falls under the grid cap.
inline std::uint64_t pad_instance(std::uint64_t domain_size, const DriverConfig& cfg) {
  const DriverConfig r = cfg.resolved();
  if (domain_size == 0) throw std::invalid_argument("pad_instance: domain size must be positive");
  std::uint64_t padded = 0;
  if (__builtin_mul_overflow(domain_size, r.pad_factor, &padded) || padded > (1ull << 62)) {
    throw std::invalid_argument("pad_instance: padded domain size overflows");
  }
  return padded;
}

/// Anchor angles theta'_k = arcsin(sqrt(1/N')) * ratio^k, ending at the first
/// value at or above the grid cap (that value included).
inline std::vector<double> theta_grid(std::uint64_t n_padded, const DriverConfig& cfg) {
  const DriverConfig r = cfg.resolved();
  const double base = std::asin(std::sqrt(1.0 / static_cast<double>(n_padded)));
  if (!(r.grid_cap > base)) {
    throw std::invalid_argument("theta_grid: grid cap must exceed arcsin(sqrt(1/N'))");
  }
  std::vector<double> grid{base};
  while (grid.back() < r.grid_cap) grid.push_back(grid.back() * r.theta_grid_ratio);
  return grid;
}

/// The fixed quantum plan of one driver run, kept in compressed form: the
/// coarse-stage ladder plus, for every anchor angle, the parameters of its
/// fine schedule and the slice of global entry indices it occupies. Entry
/// streams and totals are derived deterministically from this; nothing here
/// depends on any oracle response.
struct MasterPlan {
  std::uint64_t n_padded = 0;
  DriverConfig cfg;  // resolved
  stage1::Config stage1_cfg;
  GroverSchedule stage1_schedule;

  struct Iteration {
    double theta_prime;
    double eps_prime;
    double delta_prime;
    std::uint64_t entry_offset;
    std::uint64_t entry_count;
  };
  std::vector<Iteration> iterations;

  std::uint64_t total_entries = 0;
  QueryCost total_cost;
  std::uint64_t content_digest = 0;  // over the (rotation, flips) stream

  stage2::FineParams fine_params(std::size_t k) const {
    const Iteration& it = iterations[k];
    return {it.theta_prime, it.eps_prime, it.delta_prime, cfg.flip_scale_a, cfg.practical_factor};
  }
};

inline stage1::Config stage1_config(const DriverConfig& resolved) {
  stage1::Config c;
  c.delta = resolved.delta;
  c.practical_factor = resolved.practical_factor;
  return c;
}

/// Precision target for the fine stage at anchor theta': the requested eps,
/// floored at 1/(2 N' sin^2 theta') below which integer counts cannot differ.
inline double eps_prime_for(std::uint64_t n_padded, double theta_prime, double eps) {
  const double s = std::sin(theta_prime);
  const double floor_eps = 1.0 / (2.0 * static_cast<double>(n_padded) * s * s);
  return std::min(1.0, std::max(eps, floor_eps));
}

namespace detail {
inline void digest_entry(std::uint64_t& h, double rotation, std::uint64_t flips) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &rotation, sizeof bits);
  h = rng::mix64(h ^ bits);
  h = rng::mix64(h ^ flips);
}
}  // namespace detail

inline MasterPlan build_master_plan(std::uint64_t n_padded, const DriverConfig& cfg) {
  MasterPlan plan;
  plan.n_padded = n_padded;
  plan.cfg = cfg.resolved();
  plan.stage1_cfg = stage1_config(plan.cfg);
  plan.stage1_schedule = stage1::build_schedule(n_padded, plan.stage1_cfg);

  const QueryCost s1_cost = query_cost(plan.stage1_schedule);
  plan.total_cost = s1_cost;
  plan.total_entries = plan.stage1_schedule.size();
  plan.content_digest = rng::mix64(n_padded);
  for (const auto& e : plan.stage1_schedule.entries) {
    detail::digest_entry(plan.content_digest, e.rotation, e.flips);
  }

  for (double theta_prime : theta_grid(n_padded, plan.cfg)) {
    MasterPlan::Iteration it;
    it.theta_prime = theta_prime;
    it.eps_prime = eps_prime_for(n_padded, theta_prime, plan.cfg.eps);
    it.delta_prime = plan.cfg.delta / 2.0;
    it.entry_offset = plan.total_entries;

    const stage2::FineParams fp{theta_prime, it.eps_prime, it.delta_prime, plan.cfg.flip_scale_a,
                                plan.cfg.practical_factor};
    const stage2::RotationGrid grid = stage2::build_rotation_grid(fp);
    std::uint64_t entries = 0;
    std::uint64_t exact = 0;
    double bound = 0.0;
    std::uint64_t digest = plan.content_digest;
    stage2::for_each_fine_entry(grid, fp, [&](std::size_t, std::size_t, double s, std::uint64_t t) {
      ++entries;
      exact += static_cast<std::uint64_t>((floor_odd(s) - 1) / 2) * t;
      bound += 0.5 * s * static_cast<double>(t);
      detail::digest_entry(digest, s, t);
    });
    plan.content_digest = digest;
    it.entry_count = entries;
    plan.total_entries += entries;
    plan.total_cost.exact_queries += exact;
    plan.total_cost.upper_bound += bound;
    plan.iterations.push_back(it);

    if (plan.total_entries > plan.cfg.entry_ceiling) {
      throw ResourceLimitError("master schedule exceeds entry ceiling: " +
                               std::to_string(plan.total_entries) + " > " +
                               std::to_string(plan.cfg.entry_ceiling));
    }
  }
  return plan;
}

/// Streams every entry of the master schedule in order: f(rotation, flips).
template <typename F>
inline void for_each_master_entry(const MasterPlan& plan, F&& f) {
  for (const auto& e : plan.stage1_schedule.entries) f(e.rotation, e.flips);
  for (std::size_t k = 0; k < plan.iterations.size(); ++k) {
    const stage2::FineParams fp = plan.fine_params(k);
    const stage2::RotationGrid grid = stage2::build_rotation_grid(fp);
    stage2::for_each_fine_entry(grid, fp,
                                [&](std::size_t, std::size_t, double s, std::uint64_t t) { f(s, t); });
  }
}

/// Digest of the canonical (rotation, flips) stream, computed while the plan
/// is built; two master schedules are bitwise identical exactly when sizes,
/// costs, and digests agree.
inline std::uint64_t schedule_digest(const MasterPlan& plan) { return plan.content_digest; }

/// Materializes the concatenated master schedule. Intended for tests and
/// small configurations; the driver itself works from the plan.
inline GroverSchedule build_master_schedule(std::uint64_t n_padded, const DriverConfig& cfg) {
  const MasterPlan plan = build_master_plan(n_padded, cfg);
  GroverSchedule all = plan.stage1_schedule;
  all.entries.reserve(plan.total_entries);
  all.labels.reserve(plan.total_entries);
  for (std::size_t k = 0; k < plan.iterations.size(); ++k) {
    const stage2::FineParams fp = plan.fine_params(k);
    const stage2::RotationGrid grid = stage2::build_rotation_grid(fp);
    stage2::for_each_fine_entry(grid, fp, [&](std::size_t i, std::size_t j, double s, std::uint64_t t) {
      all.entries.push_back({s, t});
      all.labels.push_back("t" + std::to_string(k) + ":" + std::to_string(i) + "," + std::to_string(j));
    });
  }
  return all;
}

/// Grid iteration whose anchor is geometrically closest to the coarse
/// estimate; ties resolve to the smaller anchor.
inline std::size_t select_closest_iteration(const MasterPlan& plan, double theta_tilde) {
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < plan.iterations.size(); ++k) {
    const double dist = std::fabs(std::log(plan.iterations[k].theta_prime / theta_tilde));
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

namespace detail {

inline CountEstimate finish_estimate(std::uint64_t n_padded, double theta_est, bool failed,
                                     const QueryCost& cost, std::vector<std::uint64_t> rounds) {
  const CountFromAngle conv = count_from_angle(n_padded, theta_est);
  CountEstimate est;
  est.theta_est = theta_est;
  est.kappa = conv.kappa;
  est.k_hat = conv.k_round;
  est.queries_exact = cost.exact_queries;
  est.queries_bound = cost.upper_bound;
  est.failure_flag = failed;
  est.round_queries_exact = std::move(rounds);
  return est;
}

}  // namespace detail

/// Runs the single-round algorithm: one fixed master schedule performed
/// against the oracle, then classical post-processing. The coarse estimate
/// picks the anchor iteration whose tournament output becomes the answer, so
/// only that iteration's coin slice is ever read; per-entry outcome streams
/// make this identical to materializing every slice.
inline CountEstimate run_nonadaptive(SimulatedOracle& oracle, const MasterPlan& plan) {
  if (oracle.domain_size() != plan.n_padded) {
    throw std::invalid_argument("run_nonadaptive: oracle domain size does not match plan");
  }
  SchedulePerformance perf = oracle.begin_performance(plan.total_cost);
  const ScheduleOutcome coarse = perf.sample_slice(plan.stage1_schedule, 0);

  double theta_tilde = 0.0;
  try {
    theta_tilde = stage1::extract_estimate(coarse, plan.stage1_cfg);
  } catch (const NoThresholdCrossed&) {
    // All-tails at every rotation is the signature of zero marked points and
    // reported as a clean zero; anything else is a coarse-stage failure.
    const bool zero_signature = stage1::all_zero(coarse);
    return detail::finish_estimate(plan.n_padded, 0.0, !zero_signature, plan.total_cost,
                                   {plan.total_cost.exact_queries});
  }

  const std::size_t sel = select_closest_iteration(plan, theta_tilde);
  const stage2::FineParams fp = plan.fine_params(sel);
  const stage2::RotationGrid grid = stage2::build_rotation_grid(fp);
  const stage2::FineSchedule fine = stage2::build_fine_schedule(grid, fp);
  if (fine.schedule.size() != plan.iterations[sel].entry_count) {
    throw std::logic_error("run_nonadaptive: rebuilt slice does not match the plan's entry count");
  }
  const ScheduleOutcome outcome = perf.sample_slice(fine.schedule, plan.iterations[sel].entry_offset);
  const stage2::CoinTable coins = stage2::CoinTable::from_outcome(grid, outcome);
  const stage2::NodeGrid nodes = stage2::build_node_grid(fp);
  const stage2::TournamentResult t = stage2::run_tournament(nodes, coins, grid, fp.eps_prime);

  return detail::finish_estimate(plan.n_padded, t.theta_est, t.failed, plan.total_cost,
                                 {plan.total_cost.exact_queries});
}

inline CountEstimate run_nonadaptive(SimulatedOracle& oracle, const DriverConfig& cfg) {
  const MasterPlan plan = build_master_plan(oracle.domain_size(), cfg);
  return run_nonadaptive(oracle, plan);
}

/// Two rounds of nonadaptivity: the coarse ladder alone, then a single fine
/// schedule anchored at the coarse estimate. Queries are reported per round.
inline CountEstimate run_two_round(SimulatedOracle& oracle, const DriverConfig& cfg) {
  const DriverConfig r = cfg.resolved();
  const std::uint64_t n_padded = oracle.domain_size();
  const stage1::Config s1_cfg = stage1_config(r);
  const GroverSchedule s1 = stage1::build_schedule(n_padded, s1_cfg);
  const QueryCost c1 = query_cost(s1);
  const ScheduleOutcome coarse = oracle.perform_schedule(s1);

  double theta_tilde = 0.0;
  try {
    theta_tilde = stage1::extract_estimate(coarse, s1_cfg);
  } catch (const NoThresholdCrossed&) {
    const bool zero_signature = stage1::all_zero(coarse);
    return detail::finish_estimate(n_padded, 0.0, !zero_signature, c1, {c1.exact_queries});
  }

  const stage2::FineParams fp{theta_tilde, eps_prime_for(n_padded, theta_tilde, r.eps), r.delta / 2.0,
                              r.flip_scale_a, r.practical_factor};
  const stage2::FineEstimate fine = stage2::estimate_fine(oracle, fp);

  QueryCost total;
  total.exact_queries = c1.exact_queries + fine.queries_exact;
  total.upper_bound = c1.upper_bound + fine.queries_bound;
  return detail::finish_estimate(n_padded, fine.theta_est, fine.failed, total,
                                 {c1.exact_queries, fine.queries_exact});
}

}  // namespace qcount::driver
