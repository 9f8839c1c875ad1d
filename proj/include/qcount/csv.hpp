#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "qcount/errors.hpp"

namespace qcount::harness {

/// One Monte Carlo run. The record is self-contained: success is computable
/// from the stored fields alone.
struct TrialRecord {
  std::uint64_t trial_id = 0;
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  double eps = 0.0;
  double delta = 0.0;
  std::string mode;
  std::string algorithm;
  std::int64_t k_hat = 0;
  double theta_est = 0.0;
  std::uint64_t queries_exact = 0;
  double queries_bound = 0.0;
  bool success = false;
  bool failure_flag = false;
  std::uint64_t seed = 0;
  std::int64_t wall_millis = 0;

  bool operator==(const TrialRecord&) const = default;
};

/// Results schema v1: fixed column order, mandatory header, UTF-8, LF line
/// endings, floats at 17 significant digits so rows round-trip bit-exactly.
inline constexpr int kTrialCsvVersion = 1;
inline constexpr const char* kTrialCsvHeader =
    "trialId,n,k,eps,delta,mode,algorithm,kHat,thetaEst,queriesExact,queriesBound,success,"
    "failureFlag,seed,wallMillis";

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string to_csv_row(const TrialRecord& r) {
  std::string row;
  row.reserve(160);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%" PRIu64, r.trial_id);
  row += buf;
  std::snprintf(buf, sizeof buf, ",%" PRIu64 ",%" PRIu64, r.n, r.k);
  row += buf;
  row += ',';
  row += format_double(r.eps);
  row += ',';
  row += format_double(r.delta);
  row += ',';
  row += r.mode;
  row += ',';
  row += r.algorithm;
  std::snprintf(buf, sizeof buf, ",%" PRId64, r.k_hat);
  row += buf;
  row += ',';
  row += format_double(r.theta_est);
  std::snprintf(buf, sizeof buf, ",%" PRIu64, r.queries_exact);
  row += buf;
  row += ',';
  row += format_double(r.queries_bound);
  row += r.success ? ",1" : ",0";
  row += r.failure_flag ? ",1" : ",0";
  std::snprintf(buf, sizeof buf, ",%" PRIu64, r.seed);
  row += buf;
  std::snprintf(buf, sizeof buf, ",%" PRId64, r.wall_millis);
  row += buf;
  return row;
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}
}  // namespace detail

inline TrialRecord parse_trial_row(const std::string& line) {
  const auto f = detail::split_csv(line);
  if (f.size() != 15) throw IoError("trial CSV row has " + std::to_string(f.size()) + " fields: " + line);
  TrialRecord r;
  r.trial_id = std::strtoull(f[0].c_str(), nullptr, 10);
  r.n = std::strtoull(f[1].c_str(), nullptr, 10);
  r.k = std::strtoull(f[2].c_str(), nullptr, 10);
  r.eps = std::strtod(f[3].c_str(), nullptr);
  r.delta = std::strtod(f[4].c_str(), nullptr);
  r.mode = f[5];
  r.algorithm = f[6];
  r.k_hat = std::strtoll(f[7].c_str(), nullptr, 10);
  r.theta_est = std::strtod(f[8].c_str(), nullptr);
  r.queries_exact = std::strtoull(f[9].c_str(), nullptr, 10);
  r.queries_bound = std::strtod(f[10].c_str(), nullptr);
  r.success = f[11] == "1";
  r.failure_flag = f[12] == "1";
  r.seed = std::strtoull(f[13].c_str(), nullptr, 10);
  r.wall_millis = std::strtoll(f[14].c_str(), nullptr, 10);
  return r;
}

}  // namespace qcount::harness
