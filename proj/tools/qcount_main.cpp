// Command-line front end: estimate single instances, dump nonadaptive
// schedules, and run the Monte Carlo / scaling / calibration experiments.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qcount/qcount.hpp"

namespace {

using nlohmann::json;
using namespace qcount;

struct CommonFlags {
  double eps = 0.5;
  double delta = 0.2;
  std::string mode = "practical";
  std::uint64_t pad_factor = 0;
  double a_const = 0.0;
  double practical_factor = 0.0;

  void attach(CLI::App* app, bool with_eps = true) {
    if (with_eps) app->add_option("--eps", eps, "Target approximation factor 1+eps");
    app->add_option("--delta", delta, "Failure probability budget");
    app->add_option("--mode", mode, "Constant set: rigorous or practical")
        ->check(CLI::IsMember({"rigorous", "practical"}));
    app->add_option("--pad-factor", pad_factor, "Domain padding factor (power of two; 0 = mode default)");
    app->add_option("--a-const", a_const, "Fine-stage flip-count scale A (0 = default)");
    app->add_option("--practical-factor", practical_factor, "Flip-count thinning factor (0 = mode default)");
  }

  driver::DriverConfig driver_config() const {
    driver::DriverConfig cfg;
    cfg.eps = eps;
    cfg.delta = delta;
    cfg.mode = driver::mode_from_name(mode);
    cfg.pad_factor = pad_factor;
    cfg.flip_scale_a = a_const;
    cfg.practical_factor = practical_factor;
    return cfg.resolved();
  }
};

std::string digest_hex(std::uint64_t digest) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, digest);
  return buf;
}

json estimate_to_json(const driver::CountEstimate& est) {
  return json{{"thetaEst", est.theta_est},
              {"kappa", est.kappa},
              {"kHat", est.k_hat},
              {"queriesExact", est.queries_exact},
              {"queriesBound", est.queries_bound},
              {"failureFlag", est.failure_flag},
              {"roundQueriesExact", est.round_queries_exact}};
}

int cmd_estimate(std::uint64_t n, std::uint64_t k, const CommonFlags& flags, std::uint64_t seed,
                 const std::string& algorithm) {
  const driver::DriverConfig cfg = flags.driver_config();
  const std::uint64_t n_padded = driver::pad_instance(n, cfg);
  SimulatedOracle oracle(OracleInstance(n_padded, k), seed);

  driver::CountEstimate est;
  switch (harness::algorithm_from_name(algorithm)) {
    case harness::Algorithm::Nonadaptive: est = driver::run_nonadaptive(oracle, cfg); break;
    case harness::Algorithm::TwoRound: est = driver::run_two_round(oracle, cfg); break;
    case harness::Algorithm::ClassicalBaseline: est = harness::classical_baseline(oracle, flags.eps, flags.delta); break;
  }

  json out = estimate_to_json(est);
  out["n"] = n;
  out["k"] = k;
  out["nPadded"] = n_padded;
  out["eps"] = flags.eps;
  out["delta"] = flags.delta;
  out["mode"] = flags.mode;
  out["algorithm"] = algorithm;
  out["seed"] = seed;
  out["success"] = harness::estimate_success(est.k_hat, k, flags.eps);
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_schedule(std::uint64_t n, const CommonFlags& flags, bool full, const std::string& out_path) {
  const driver::DriverConfig cfg = flags.driver_config();
  const std::uint64_t n_padded = driver::pad_instance(n, cfg);
  const driver::MasterPlan plan = driver::build_master_plan(n_padded, cfg);

  json out{{"n", n},
           {"nPadded", n_padded},
           {"eps", flags.eps},
           {"delta", flags.delta},
           {"mode", flags.mode},
           {"padFactor", cfg.pad_factor},
           {"stage1Entries", plan.stage1_schedule.size()},
           {"gridIterations", plan.iterations.size()},
           {"totalEntries", plan.total_entries},
           {"queriesExact", plan.total_cost.exact_queries},
           {"queriesBound", plan.total_cost.upper_bound},
           {"digest", digest_hex(driver::schedule_digest(plan))}};
  std::cout << out.dump(2) << '\n';

  if (full) {
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary);
      if (!file) throw IoError("cannot open schedule dump file: " + out_path);
      os = &file;
    }
    *os << "index,rotation,flips\n";
    std::uint64_t index = 0;
    char line[96];
    driver::for_each_master_entry(plan, [&](double rotation, std::uint64_t flips) {
      std::snprintf(line, sizeof line, "%" PRIu64 ",%.17g,%" PRIu64 "\n", index++, rotation, flips);
      *os << line;
    });
    if (!*os) throw IoError("schedule dump write failed");
  }
  return 0;
}

harness::ExperimentConfig trials_config_from_json(const json& j) {
  harness::ExperimentConfig cfg;
  for (const auto& inst : j.at("instances")) {
    cfg.instances.push_back({inst.at("n").get<std::uint64_t>(), inst.at("k").get<std::uint64_t>()});
  }
  cfg.eps_list = j.at("eps").get<std::vector<double>>();
  cfg.delta = j.value("delta", cfg.delta);
  cfg.mode = driver::mode_from_name(j.value("mode", "practical"));
  cfg.algorithm = harness::algorithm_from_name(j.value("algorithm", "nonadaptive"));
  cfg.trials = j.value("trials", cfg.trials);
  cfg.base_seed = j.value("baseSeed", cfg.base_seed);
  cfg.pad_factor = j.value("padFactor", cfg.pad_factor);
  cfg.flip_scale_a = j.value("aConst", cfg.flip_scale_a);
  cfg.practical_factor = j.value("practicalFactor", cfg.practical_factor);
  cfg.out_path = j.value("out", cfg.out_path);
  cfg.threads = j.value("threads", cfg.threads);
  return cfg;
}

json trials_config_to_json(const harness::ExperimentConfig& cfg) {
  json instances = json::array();
  for (const auto& inst : cfg.instances) instances.push_back({{"n", inst.n}, {"k", inst.k}});
  return json{{"instances", instances},
              {"eps", cfg.eps_list},
              {"delta", cfg.delta},
              {"mode", driver::mode_name(cfg.mode)},
              {"algorithm", harness::algorithm_name(cfg.algorithm)},
              {"trials", cfg.trials},
              {"baseSeed", cfg.base_seed},
              {"padFactor", cfg.pad_factor},
              {"aConst", cfg.flip_scale_a},
              {"practicalFactor", cfg.practical_factor},
              {"threads", cfg.threads},
              {"out", cfg.out_path}};
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

int cmd_trials(harness::ExperimentConfig cfg) {
  const harness::TrialsResult result = harness::run_trials(cfg);

  if (!cfg.out_path.empty()) {
    // Echo the effective configuration next to the results for auditability.
    std::ofstream echo(cfg.out_path + ".config.json", std::ios::binary);
    if (!echo) throw IoError("cannot write config echo next to: " + cfg.out_path);
    echo << trials_config_to_json(cfg).dump(2) << '\n';
  }

  json cells = json::array();
  for (const auto& c : result.cells) {
    cells.push_back({{"n", c.n},
                     {"k", c.k},
                     {"eps", c.eps},
                     {"trials", c.trials},
                     {"successRate", c.success_rate},
                     {"meanQueriesExact", c.mean_queries_exact}});
  }
  std::cout << json{{"records", result.records.size()}, {"cells", cells}}.dump(2) << '\n';
  return 0;
}

int cmd_scaling(const harness::ScalingConfig& cfg) {
  const harness::ScalingResult result = harness::scaling_sweep(cfg);
  json rows = json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"n", r.n},
                    {"eps", r.eps},
                    {"queriesExact", r.queries_exact},
                    {"sqrtNOverEps", r.sqrt_n_over_eps},
                    {"ratio", r.ratio}});
  }
  std::cout << json{{"rows", rows}, {"minRatio", result.min_ratio}, {"maxRatio", result.max_ratio}}.dump(2)
            << '\n';
  return 0;
}

int cmd_calibrate(const harness::CalibrationConfig& cfg, const std::string& out_path) {
  const harness::CalibrationResult result = harness::calibrate_constants(cfg);

  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot open calibration table file: " + out_path);
    out << harness::kCalibrationCsvHeader << '\n';
    for (const auto& row : result.table) {
      out << harness::format_double(row.practical_factor) << ',' << harness::format_double(row.worst_failure)
          << ',' << (row.safe ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("write failed: " + out_path);
  }

  json table = json::array();
  for (const auto& row : result.table) {
    table.push_back(
        {{"practicalFactor", row.practical_factor}, {"worstFailure", row.worst_failure}, {"safe", row.safe}});
  }
  std::cout << json{{"aConst", result.flip_scale_a},
                    {"practicalFactor", result.practical_factor},
                    {"table", table}}
                   .dump(2)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate counting with nonadaptive Grover iterations: simulator and experiment harness"};
  app.require_subcommand(1);

  // estimate
  auto* est = app.add_subcommand("estimate", "Run one instance and print the count estimate as JSON");
  std::uint64_t n = 0, k = 0, seed = 1;
  std::string algorithm = "nonadaptive";
  CommonFlags est_flags;
  est->add_option("--n", n, "Domain size")->required();
  est->add_option("--k", k, "Marked count")->required();
  est->add_option("--seed", seed, "Oracle seed");
  est->add_option("--algorithm", algorithm, "nonadaptive, two-round, or baseline")
      ->check(CLI::IsMember({"nonadaptive", "two-round", "baseline", "classical-baseline"}));
  est_flags.attach(est);

  // schedule
  auto* sched = app.add_subcommand(
      "schedule", "Dump the fixed master schedule and its query cost without touching an oracle");
  std::uint64_t sched_n = 0, sched_k = 0;
  bool sched_full = false;
  std::string sched_out;
  CommonFlags sched_flags;
  sched->add_option("--n", sched_n, "Domain size")->required();
  sched->add_option("--k", sched_k, "Marked count (accepted and ignored: the schedule cannot depend on it)");
  sched->add_flag("--full", sched_full, "Also stream every entry as CSV");
  sched->add_option("--out", sched_out, "File for the full entry stream (default stdout)");
  sched_flags.attach(sched);

  // trials
  auto* trials = app.add_subcommand("trials", "Monte Carlo success-rate study; streams a results CSV");
  std::string trials_config_path;
  std::uint64_t tr_n = 0, tr_k = 0, tr_trials = 0, tr_seed = 0;
  unsigned tr_threads = 0;
  std::string tr_out, tr_algorithm;
  CommonFlags tr_flags;
  trials->add_option("--config", trials_config_path, "Experiment config JSON");
  trials->add_option("--n", tr_n, "Single-instance override: domain size");
  trials->add_option("--k", tr_k, "Single-instance override: marked count");
  trials->add_option("--trials", tr_trials, "Trials per cell");
  trials->add_option("--seed", tr_seed, "Base seed");
  trials->add_option("--threads", tr_threads, "Worker threads");
  trials->add_option("--out", tr_out, "Results CSV path");
  trials->add_option("--algorithm", tr_algorithm, "nonadaptive, two-round, or baseline");
  tr_flags.attach(trials);  // --eps here overrides the config's list with one value

  // scaling
  auto* scaling = app.add_subcommand("scaling", "Query-cost scaling sweep (schedule accounting only)");
  std::string scaling_config_path, sc_out;
  std::vector<std::uint64_t> sc_n;
  std::vector<double> sc_eps;
  CommonFlags sc_flags;
  scaling->add_option("--config", scaling_config_path, "Sweep config JSON");
  scaling->add_option("--n", sc_n, "Domain sizes (repeatable)");
  scaling->add_option("--eps", sc_eps, "Eps values (repeatable, need >= 3)");
  scaling->add_option("--out", sc_out, "Sweep CSV path");
  sc_flags.attach(scaling, /*with_eps=*/false);

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Search the practical flip-count factor against a failure budget");
  std::string cal_config_path, cal_out;
  cal->add_option("--config", cal_config_path, "Calibration config JSON")->required();
  cal->add_option("--out", cal_out, "Calibration table CSV path");

  try {
    app.parse(argc, argv);

    if (est->parsed()) return cmd_estimate(n, k, est_flags, seed, algorithm);

    if (sched->parsed()) return cmd_schedule(sched_n, sched_flags, sched_full, sched_out);

    if (trials->parsed()) {
      harness::ExperimentConfig cfg;
      if (!trials_config_path.empty()) cfg = trials_config_from_json(load_json_file(trials_config_path));
      if (trials->count("--n") != 0 || trials->count("--k") != 0) {
        const std::uint64_t nn =
            trials->count("--n") != 0 ? tr_n : (cfg.instances.empty() ? 0 : cfg.instances[0].n);
        const std::uint64_t kk =
            trials->count("--k") != 0 ? tr_k : (cfg.instances.empty() ? 0 : cfg.instances[0].k);
        cfg.instances = {{nn, kk}};
      }
      if (trials->count("--eps") != 0) cfg.eps_list = {tr_flags.eps};
      if (trials->count("--delta") != 0) cfg.delta = tr_flags.delta;
      if (trials->count("--mode") != 0) cfg.mode = driver::mode_from_name(tr_flags.mode);
      if (trials->count("--pad-factor") != 0) cfg.pad_factor = tr_flags.pad_factor;
      if (trials->count("--a-const") != 0) cfg.flip_scale_a = tr_flags.a_const;
      if (trials->count("--practical-factor") != 0) cfg.practical_factor = tr_flags.practical_factor;
      if (tr_trials != 0) cfg.trials = tr_trials;
      if (tr_seed != 0) cfg.base_seed = tr_seed;
      if (tr_threads != 0) cfg.threads = tr_threads;
      if (!tr_out.empty()) cfg.out_path = tr_out;
      if (!tr_algorithm.empty()) cfg.algorithm = harness::algorithm_from_name(tr_algorithm);
      return cmd_trials(cfg);
    }

    if (scaling->parsed()) {
      harness::ScalingConfig cfg;
      if (!scaling_config_path.empty()) {
        const json j = load_json_file(scaling_config_path);
        cfg.n_list = j.at("nList").get<std::vector<std::uint64_t>>();
        cfg.eps_list = j.at("epsList").get<std::vector<double>>();
        cfg.delta = j.value("delta", cfg.delta);
        cfg.mode = driver::mode_from_name(j.value("mode", "practical"));
        cfg.pad_factor = j.value("padFactor", cfg.pad_factor);
        cfg.flip_scale_a = j.value("aConst", cfg.flip_scale_a);
        cfg.practical_factor = j.value("practicalFactor", cfg.practical_factor);
        cfg.out_path = j.value("out", cfg.out_path);
      }
      if (!sc_n.empty()) cfg.n_list = sc_n;
      if (!sc_eps.empty()) cfg.eps_list = sc_eps;
      if (scaling->count("--delta") != 0) cfg.delta = sc_flags.delta;
      if (scaling->count("--mode") != 0) cfg.mode = driver::mode_from_name(sc_flags.mode);
      if (scaling->count("--pad-factor") != 0) cfg.pad_factor = sc_flags.pad_factor;
      if (scaling->count("--a-const") != 0) cfg.flip_scale_a = sc_flags.a_const;
      if (scaling->count("--practical-factor") != 0) cfg.practical_factor = sc_flags.practical_factor;
      if (!sc_out.empty()) cfg.out_path = sc_out;
      return cmd_scaling(cfg);
    }

    if (cal->parsed()) {
      const json j = load_json_file(cal_config_path);
      harness::CalibrationConfig cfg;
      for (const auto& cell : j.at("cells")) {
        cfg.cells.push_back({cell.at("n").get<std::uint64_t>(), cell.at("k").get<std::uint64_t>(),
                             cell.at("eps").get<double>()});
      }
      cfg.delta = j.value("delta", cfg.delta);
      cfg.trials_per_eval = j.value("trialsPerEval", cfg.trials_per_eval);
      cfg.base_seed = j.value("baseSeed", cfg.base_seed);
      cfg.flip_scale_a = j.value("aConst", cfg.flip_scale_a);
      cfg.lowest_factor = j.value("lowestFactor", cfg.lowest_factor);
      cfg.max_evals = j.value("maxEvals", cfg.max_evals);
      cfg.pad_factor = j.value("padFactor", cfg.pad_factor);
      cfg.mode = driver::mode_from_name(j.value("mode", "practical"));
      return cmd_calibrate(cfg, cal_out);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are an invalid config
  } catch (const ResourceLimitError& e) {
    std::cerr << "resource limit: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
