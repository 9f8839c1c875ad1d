#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qcount/oracle.hpp"
#include "qcount/stage1.hpp"

using namespace qcount;

namespace {

// Independent minimality oracle: smallest m with (12/11)^m >= sqrt(N),
// evaluated directly through pow.
std::size_t minimal_exponent(std::uint64_t n) {
  const double target = std::sqrt(static_cast<double>(n));
  std::size_t m = 0;
  while (std::pow(12.0 / 11.0, static_cast<double>(m)) < target) ++m;
  return m;
}

ScheduleOutcome outcome_from_phats(const std::vector<double>& phats, std::uint64_t flips) {
  ScheduleOutcome out;
  for (double p : phats) {
    out.per_entry.push_back({static_cast<std::uint64_t>(std::llround(p * static_cast<double>(flips))), flips});
  }
  return out;
}

}  // namespace

TEST_CASE("ladder length is minimal against sqrt(N)") {
  stage1::Config cfg;
  cfg.delta = 0.1;

  CHECK(stage1::ladder_exponent(1ull << 20, cfg) == 80);
  CHECK(stage1::ladder_exponent(2, cfg) == 4);

  std::mt19937_64 gen(3);
  for (int i = 0; i < 50; ++i) {
    const std::uint64_t n = std::uniform_int_distribution<std::uint64_t>(2, 1ull << 48)(gen);
    const GroverSchedule s = stage1::build_schedule(n, cfg);
    REQUIRE(s.size() - 1 == minimal_exponent(n));
    const double target = std::sqrt(static_cast<double>(n));
    REQUIRE(s.entries.back().rotation >= target);
    if (s.size() >= 2) REQUIRE(s.entries[s.size() - 2].rotation < target);
  }
}

TEST_CASE("ladder length never shrinks when the domain grows") {
  stage1::Config cfg;
  cfg.delta = 0.25;
  std::mt19937_64 gen(5);
  for (int i = 0; i < 40; ++i) {
    const std::uint64_t n = std::uniform_int_distribution<std::uint64_t>(2, 1ull << 50)(gen);
    REQUIRE(stage1::ladder_exponent(4 * n, cfg) >= stage1::ladder_exponent(n, cfg));
  }
}

TEST_CASE("flip counts follow ceil of the budget formula") {
  stage1::Config cfg;
  cfg.delta = 0.1;
  const GroverSchedule s = stage1::build_schedule(1 << 16, cfg);
  const auto expected = static_cast<std::uint64_t>(std::ceil(1e5 * std::log(120.0 / 0.1)));
  CHECK(expected == 709008);
  for (const auto& e : s.entries) REQUIRE(e.flips == expected);

  stage1::Config thinned = cfg;
  thinned.practical_factor = 0.01;
  const GroverSchedule st = stage1::build_schedule(1 << 16, thinned);
  CHECK(st.entries[0].flips == static_cast<std::uint64_t>(std::ceil(0.01 * 1e5 * std::log(1200.0))));
  CHECK(st.size() == s.size());  // thinning never changes the geometry

  stage1::Config bad = cfg;
  bad.delta = 0.0;
  CHECK_THROWS_AS(stage1::build_schedule(1 << 16, bad), std::invalid_argument);
  CHECK_THROWS_AS(stage1::build_schedule(1, cfg), std::invalid_argument);
}

TEST_CASE("extraction picks the first threshold crossing") {
  stage1::Config cfg;
  cfg.delta = 0.1;
  const ScheduleOutcome out = outcome_from_phats({0.1, 0.2, 0.5, 0.9}, 10);
  const double estimate = stage1::extract_estimate(out, cfg);
  CHECK(estimate == Catch::Approx(0.625 * std::pow(11.0 / 12.0, 2)).epsilon(1e-12));
  CHECK(estimate == Catch::Approx(0.52517).epsilon(1e-4));

  CHECK_THROWS_AS(stage1::extract_estimate(outcome_from_phats({0.1, 0.2, 0.3}, 10), cfg),
                  NoThresholdCrossed);

  // Repeated extraction of the same outcome is bit-identical.
  CHECK(stage1::extract_estimate(out, cfg) == estimate);
}

TEST_CASE("threshold comparison is exact on the rational boundary") {
  stage1::Config cfg;
  cfg.delta = 0.1;
  ScheduleOutcome out;
  out.per_entry = {{0, 9}, {3, 9}};  // 3/9 is exactly one third
  CHECK(stage1::extract_estimate(out, cfg) == Catch::Approx(0.625 * (11.0 / 12.0)).epsilon(1e-12));

  ScheduleOutcome below;
  below.per_entry = {{2, 9}};  // 2/9 < 1/3
  CHECK_THROWS_AS(stage1::extract_estimate(below, cfg), NoThresholdCrossed);
}

TEST_CASE("all-zero outcomes are recognized") {
  ScheduleOutcome zeros;
  zeros.per_entry = {{0, 5}, {0, 9}};
  CHECK(stage1::all_zero(zeros));
  zeros.per_entry.push_back({1, 4});
  CHECK_FALSE(stage1::all_zero(zeros));
}

TEST_CASE("coarse estimates land within factor 1.1 of the instance angle") {
  const std::uint64_t n = 1ull << 23;  // a 2^20 instance padded by 8
  const std::uint64_t k = 64;
  stage1::Config cfg;
  cfg.delta = 0.1;
  const GroverSchedule schedule = stage1::build_schedule(n, cfg);
  const double theta_star = OracleInstance(n, k).theta_star();

  int hits = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    SimulatedOracle oracle(OracleInstance(n, k), 9000 + static_cast<std::uint64_t>(t));
    const ScheduleOutcome out = oracle.perform_schedule(schedule);
    try {
      if (approx_within(stage1::extract_estimate(out, cfg), theta_star, 0.1)) ++hits;
    } catch (const NoThresholdCrossed&) {
    }
  }
  CHECK(hits >= 450);  // >= 90% of trials
}
