#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "qcount/csv.hpp"
#include "qcount/driver.hpp"
#include "qcount/errors.hpp"
#include "qcount/oracle.hpp"

namespace qcount::harness {

enum class Algorithm { Nonadaptive, TwoRound, ClassicalBaseline };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Nonadaptive: return "nonadaptive";
    case Algorithm::TwoRound: return "two-round";
    default: return "classical-baseline";
  }
}

inline Algorithm algorithm_from_name(const std::string& s) {
  if (s == "nonadaptive") return Algorithm::Nonadaptive;
  if (s == "two-round") return Algorithm::TwoRound;
  if (s == "baseline" || s == "classical-baseline") return Algorithm::ClassicalBaseline;
  throw std::invalid_argument("unknown algorithm: " + s);
}

struct InstanceSpec {
  std::uint64_t n;
  std::uint64_t k;
};

/// One experiment: every (instance, eps) cell is run `trials` times with
/// per-trial seeds baseSeed + trialId (trial ids are global and sequential,
/// so the derivation is injective within a run).
struct ExperimentConfig {
  std::vector<InstanceSpec> instances;
  std::vector<double> eps_list;
  double delta = 0.2;
  driver::Mode mode = driver::Mode::Practical;
  Algorithm algorithm = Algorithm::Nonadaptive;
  std::uint64_t trials = 100;
  std::uint64_t base_seed = 1;
  std::uint64_t pad_factor = 0;      // 0 -> mode default
  double flip_scale_a = 0.0;         // 0 -> default
  double practical_factor = 0.0;     // 0 -> mode default
  std::string out_path;              // empty -> no CSV written
  unsigned threads = 1;

  void validate() const {
    if (instances.empty()) throw std::invalid_argument("experiment: no instances");
    if (eps_list.empty()) throw std::invalid_argument("experiment: no eps values");
    if (trials == 0) throw std::invalid_argument("experiment: trials must be >= 1");
    if (threads == 0) throw std::invalid_argument("experiment: threads must be >= 1");
  }

  driver::DriverConfig driver_config(double eps) const {
    driver::DriverConfig cfg;
    cfg.eps = eps;
    cfg.delta = delta;
    cfg.mode = mode;
    cfg.pad_factor = pad_factor;
    cfg.flip_scale_a = flip_scale_a;
    cfg.practical_factor = practical_factor;
    return cfg.resolved();
  }
};

/// Success once zeros are involved: a zero estimate only matches a zero
/// truth; otherwise the multiplicative relation decides.
inline bool estimate_success(std::int64_t k_hat, std::uint64_t k, double eps) {
  if (k_hat <= 0 || k == 0) return static_cast<std::uint64_t>(k_hat) == k && k_hat >= 0;
  return approx_within(static_cast<double>(k_hat), static_cast<double>(k), eps);
}

/// Estimates the count classically: flip zero-rotation coins (bias K/N) until
/// ceil(3 ln(2/delta) / eps^2) successes arrive, then scale up the empirical
/// mean. Every classical sample costs one query of f, so the reported query
/// figures equal the flip count (the Grover accounting charges nothing for
/// rotation-1 coins).
inline driver::CountEstimate classical_baseline(SimulatedOracle& oracle, double eps, double delta) {
  if (!(eps > 0.0) || !(eps <= 1.0)) throw std::invalid_argument("baseline: eps outside (0, 1]");
  if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("baseline: delta outside (0, 1)");

  const auto target = static_cast<std::uint64_t>(std::ceil(3.0 * std::log(2.0 / delta) / (eps * eps)));
  const std::uint64_t flips_cap = 1ull << 40;

  std::uint64_t successes = 0;
  std::uint64_t flips = 0;
  std::uint64_t batch = 8192;
  while (successes < target && flips < flips_cap) {
    GroverSchedule probe;
    probe.entries.push_back({1.0, batch});
    const ScheduleOutcome out = oracle.perform_schedule(probe);
    successes += out.per_entry[0].successes;
    flips += batch;
    if (batch < (1ull << 22)) batch *= 2;
  }

  const double p_hat = static_cast<double>(successes) / static_cast<double>(flips);
  const double theta_est = std::asin(std::sqrt(std::min(1.0, p_hat)));
  const CountFromAngle conv = count_from_angle(oracle.domain_size(), theta_est);

  driver::CountEstimate est;
  est.theta_est = theta_est;
  est.kappa = conv.kappa;
  est.k_hat = conv.k_round;
  est.queries_exact = flips;
  est.queries_bound = static_cast<double>(flips);
  est.failure_flag = successes < target;
  est.round_queries_exact = {flips};
  return est;
}

struct CellSummary {
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  double eps = 0.0;
  std::uint64_t trials = 0;
  double success_rate = 0.0;
  double mean_queries_exact = 0.0;
};

struct TrialsResult {
  std::vector<TrialRecord> records;
  std::vector<CellSummary> cells;
};

namespace detail {

inline TrialRecord run_one_trial(const ExperimentConfig& cfg, const InstanceSpec& inst, double eps,
                                 const driver::DriverConfig& dcfg, const driver::MasterPlan* plan,
                                 std::uint64_t trial_id) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = cfg.base_seed + trial_id;
  const std::uint64_t n_padded = driver::pad_instance(inst.n, dcfg);
  SimulatedOracle oracle(OracleInstance(n_padded, inst.k), seed);

  driver::CountEstimate est;
  switch (cfg.algorithm) {
    case Algorithm::Nonadaptive:
      est = plan ? driver::run_nonadaptive(oracle, *plan) : driver::run_nonadaptive(oracle, dcfg);
      break;
    case Algorithm::TwoRound:
      est = driver::run_two_round(oracle, dcfg);
      break;
    case Algorithm::ClassicalBaseline:
      est = classical_baseline(oracle, eps, cfg.delta);
      break;
  }

  TrialRecord r;
  r.trial_id = trial_id;
  r.n = inst.n;
  r.k = inst.k;
  r.eps = eps;
  r.delta = cfg.delta;
  r.mode = driver::mode_name(cfg.mode);
  r.algorithm = algorithm_name(cfg.algorithm);
  r.k_hat = est.k_hat;
  r.theta_est = est.theta_est;
  r.queries_exact = est.queries_exact;
  r.queries_bound = est.queries_bound;
  r.success = estimate_success(est.k_hat, inst.k, eps);
  r.failure_flag = est.failure_flag;
  r.seed = seed;
  r.wall_millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace detail

/// Runs every cell of the experiment. Trials are independent (one oracle
/// each) and may run on several threads; records land in trialId order
/// regardless of completion order and are appended to the CSV cell by cell.
inline TrialsResult run_trials(const ExperimentConfig& cfg) {
  cfg.validate();

  std::ofstream out;
  if (!cfg.out_path.empty()) {
    out.open(cfg.out_path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw IoError("cannot open results file: " + cfg.out_path);
    out << kTrialCsvHeader << '\n';
  }

  TrialsResult result;
  result.records.reserve(cfg.instances.size() * cfg.eps_list.size() * cfg.trials);
  std::uint64_t trial_id = 0;

  for (const InstanceSpec& inst : cfg.instances) {
    for (double eps : cfg.eps_list) {
      const driver::DriverConfig dcfg = cfg.driver_config(eps);

      // The nonadaptive plan is a pure function of the cell, so build it
      // once and share it across the cell's trials.
      driver::MasterPlan plan;
      const driver::MasterPlan* plan_ptr = nullptr;
      if (cfg.algorithm == Algorithm::Nonadaptive) {
        plan = driver::build_master_plan(driver::pad_instance(inst.n, dcfg), dcfg);
        plan_ptr = &plan;
      }

      std::vector<TrialRecord> cell_records(cfg.trials);
      const std::uint64_t first_id = trial_id;
      if (cfg.threads <= 1) {
        for (std::uint64_t t = 0; t < cfg.trials; ++t) {
          cell_records[t] = detail::run_one_trial(cfg, inst, eps, dcfg, plan_ptr, first_id + t);
        }
      } else {
        std::vector<std::thread> workers;
        const unsigned w = cfg.threads;
        for (unsigned wi = 0; wi < w; ++wi) {
          workers.emplace_back([&, wi] {
            for (std::uint64_t t = wi; t < cfg.trials; t += w) {
              cell_records[t] = detail::run_one_trial(cfg, inst, eps, dcfg, plan_ptr, first_id + t);
            }
          });
        }
        for (auto& th : workers) th.join();
      }
      trial_id += cfg.trials;

      CellSummary summary{inst.n, inst.k, eps, cfg.trials, 0.0, 0.0};
      for (const TrialRecord& r : cell_records) {
        summary.success_rate += r.success ? 1.0 : 0.0;
        summary.mean_queries_exact += static_cast<double>(r.queries_exact);
        if (out.is_open()) out << to_csv_row(r) << '\n';
        result.records.push_back(r);
      }
      summary.success_rate /= static_cast<double>(cfg.trials);
      summary.mean_queries_exact /= static_cast<double>(cfg.trials);
      result.cells.push_back(summary);
      if (out.is_open()) out.flush();
    }
  }
  if (out.is_open() && !out) throw IoError("write failed: " + cfg.out_path);
  return result;
}

/// Query-scaling sweep over (N, eps) cells: pure schedule accounting, no
/// sampling. ratio = queriesExact / (sqrt(N'/eps) * ln(1/delta)).
struct ScalingConfig {
  std::vector<std::uint64_t> n_list;
  std::vector<double> eps_list;
  double delta = 0.2;
  driver::Mode mode = driver::Mode::Practical;
  std::uint64_t pad_factor = 0;
  double flip_scale_a = 0.0;
  double practical_factor = 0.0;
  std::string out_path;
};

struct ScalingRow {
  std::uint64_t n = 0;
  double eps = 0.0;
  std::uint64_t queries_exact = 0;
  double sqrt_n_over_eps = 0.0;
  double ratio = 0.0;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
};

inline constexpr const char* kScalingCsvHeader = "n,eps,queriesExact,sqrtNOverEps,ratio";

inline ScalingResult scaling_sweep(const ScalingConfig& cfg) {
  if (cfg.n_list.empty() || cfg.eps_list.size() < 3) {
    throw std::invalid_argument("scaling: need at least one N and three eps values");
  }
  ScalingResult result;
  for (std::uint64_t n : cfg.n_list) {
    for (double eps : cfg.eps_list) {
      driver::DriverConfig dcfg;
      dcfg.eps = eps;
      dcfg.delta = cfg.delta;
      dcfg.mode = cfg.mode;
      dcfg.pad_factor = cfg.pad_factor;
      dcfg.flip_scale_a = cfg.flip_scale_a;
      dcfg.practical_factor = cfg.practical_factor;
      dcfg = dcfg.resolved();

      const std::uint64_t n_padded = driver::pad_instance(n, dcfg);
      const driver::MasterPlan plan = driver::build_master_plan(n_padded, dcfg);

      ScalingRow row;
      row.n = n;
      row.eps = eps;
      row.queries_exact = plan.total_cost.exact_queries;
      row.sqrt_n_over_eps = std::sqrt(static_cast<double>(n_padded) / eps);
      row.ratio = static_cast<double>(row.queries_exact) / (row.sqrt_n_over_eps * std::log(1.0 / cfg.delta));
      result.rows.push_back(row);
    }
  }
  result.min_ratio = result.rows.front().ratio;
  result.max_ratio = result.rows.front().ratio;
  for (const ScalingRow& r : result.rows) {
    result.min_ratio = std::min(result.min_ratio, r.ratio);
    result.max_ratio = std::max(result.max_ratio, r.ratio);
  }

  if (!cfg.out_path.empty()) {
    std::ofstream out(cfg.out_path, std::ios::binary);
    if (!out) throw IoError("cannot open scaling file: " + cfg.out_path);
    out << kScalingCsvHeader << '\n';
    for (const ScalingRow& r : result.rows) {
      out << r.n << ',' << format_double(r.eps) << ',' << r.queries_exact << ','
          << format_double(r.sqrt_n_over_eps) << ',' << format_double(r.ratio) << '\n';
    }
    if (!out) throw IoError("write failed: " + cfg.out_path);
  }
  return result;
}

/// Calibration of the practical flip-count thinning: walk practicalFactor
/// downward until the measured end-to-end failure rate crosses delta/2 on a
/// validation grid, then recommend the last safe setting doubled. The flip
/// scale A is held at its configured value.
struct CalibrationCell {
  std::uint64_t n;
  std::uint64_t k;
  double eps;
};

struct CalibrationConfig {
  std::vector<CalibrationCell> cells;
  double delta = 0.2;
  std::uint64_t trials_per_eval = 60;
  std::uint64_t base_seed = 1;
  double flip_scale_a = driver::defaults::kFlipScaleA;
  double lowest_factor = 1e-4;
  int max_evals = 10;
  std::uint64_t pad_factor = 0;
  driver::Mode mode = driver::Mode::Practical;
};

struct CalibrationRow {
  double practical_factor = 0.0;
  double worst_failure = 0.0;
  bool safe = false;
};

struct CalibrationResult {
  double flip_scale_a = 0.0;
  double practical_factor = 0.0;
  std::vector<CalibrationRow> table;
};

inline constexpr const char* kCalibrationCsvHeader = "practicalFactor,worstFailure,safe";

inline CalibrationResult calibrate_constants(const CalibrationConfig& cfg) {
  if (cfg.cells.empty()) throw std::invalid_argument("calibrate: no validation cells");

  int eval_index = 0;
  const auto eval_failure = [&](double pf) {
    ++eval_index;
    double worst = 0.0;
    for (std::size_t ci = 0; ci < cfg.cells.size(); ++ci) {
      const CalibrationCell& c = cfg.cells[ci];
      ExperimentConfig e;
      e.instances = {{c.n, c.k}};
      e.eps_list = {c.eps};
      e.delta = cfg.delta;
      e.mode = cfg.mode;
      e.algorithm = Algorithm::Nonadaptive;
      e.trials = cfg.trials_per_eval;
      e.base_seed = rng::mix64(cfg.base_seed ^
                               (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(eval_index)) ^
                               rng::mix64(ci));
      e.pad_factor = cfg.pad_factor;
      e.flip_scale_a = cfg.flip_scale_a;
      e.practical_factor = pf;
      const TrialsResult r = run_trials(e);
      for (const CellSummary& cell : r.cells) worst = std::max(worst, 1.0 - cell.success_rate);
    }
    return worst;
  };

  CalibrationResult result;
  result.flip_scale_a = cfg.flip_scale_a;
  const double threshold = cfg.delta / 2.0;

  double safe_pf = 0.0;
  double unsafe_pf = 0.0;
  double pf = 1.0;
  for (int i = 0; i < cfg.max_evals; ++i) {
    const double failure = eval_failure(pf);
    const bool safe = failure <= threshold;
    result.table.push_back({pf, failure, safe});
    if (safe) {
      safe_pf = pf;
      if (unsafe_pf > 0.0) {
        pf = std::sqrt(pf * unsafe_pf);  // bisect in log space
      } else if (pf <= cfg.lowest_factor) {
        break;
      } else {
        pf = std::max(cfg.lowest_factor, pf / 4.0);
      }
    } else {
      unsafe_pf = pf;
      if (safe_pf == 0.0) break;  // even the full budget fails
      pf = std::sqrt(pf * safe_pf);
    }
    if (safe_pf > 0.0 && unsafe_pf > 0.0 && safe_pf / unsafe_pf < 1.3) break;
  }

  result.practical_factor = safe_pf > 0.0 ? std::min(1.0, 2.0 * safe_pf) : 1.0;
  return result;
}

}  // namespace qcount::harness
