#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "qcount/oracle.hpp"
#include "qcount/stage2.hpp"

using namespace qcount;
using namespace qcount::stage2;

namespace {

FineParams params(double theta, double eps, double delta, double a = 14000.0, double pf = 1.0) {
  return FineParams{theta, eps, delta, a, pf};
}

// Draws a pair satisfying the distinguisher's preconditions: both angles
// within factor 1.11 of theta', beyond the void threshold, theta0 < theta1.
struct PairSample {
  double theta0;
  double theta1;
};

PairSample sample_valid_pair(std::mt19937_64& gen, double theta_prime, double eps_prime) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lo = theta_prime / 1.11;
  const double hi = theta_prime * 1.11;
  const double min_gap = std::log1p(eps_prime / 6.1) * 1.0001;
  for (;;) {
    const double l0 = std::log(lo) + unit(gen) * (std::log(hi) - std::log(lo) - min_gap);
    const double span = std::log(hi) - l0;
    const double l1 = l0 + min_gap + unit(gen) * (span - min_gap);
    const PairSample p{std::exp(l0), std::exp(l1)};
    if (p.theta0 >= lo && p.theta1 <= hi && !approx_within(p.theta0, p.theta1, eps_prime / 6.1)) {
      return p;
    }
  }
}

}  // namespace

TEST_CASE("rotation ladder length and offsets match their defining formulas") {
  const FineParams p = params(1e-3, 0.5, 0.05);
  const RotationGrid grid = build_rotation_grid(p);

  // Independent evaluation of the minimal ladder length.
  const double bound = 1.2 * kPi / (p.theta_prime * p.eps_prime);
  CHECK(bound == Catch::Approx(7539.822).epsilon(1e-6));
  std::size_t l = 0;
  while (std::pow(1.01, static_cast<double>(l)) < bound) ++l;
  CHECK(l == 898);
  CHECK(grid.splits() == l + 1);

  CHECK(grid.u.front() == 1.0);
  CHECK(grid.u[l - 1] < bound);
  CHECK(grid.u[l] >= bound);

  CHECK(grid.offsets() == 39);  // C = 37 plus the zero and first offsets
  CHECK(grid.a_offset[0] == 0.0);
  CHECK(grid.a_offset[1] == Catch::Approx(654.4984694978735).epsilon(1e-12));
  for (std::size_t j = 2; j < grid.offsets(); ++j) {
    REQUIRE(grid.a_offset[j] == grid.a_offset[j - 1] * 1.01);  // construction-exact
  }
  for (std::size_t i = 1; i < grid.splits(); ++i) {
    REQUIRE(grid.u[i] == grid.u[i - 1] * 1.01);
  }
  for (std::size_t j = 0; j < grid.offsets(); ++j) {
    REQUIRE(grid.s(0, j) >= 1.0);
    REQUIRE(grid.s(l, j) >= 1.0);
  }
}

TEST_CASE("degenerate parameters hit the ladder resource ceiling") {
  CHECK_THROWS_AS(build_rotation_grid(params(1e-308, 1e-10 / 1e298, 0.1)), ResourceLimitError);
  CHECK_THROWS_AS(build_rotation_grid(params(-1.0, 0.5, 0.1)), std::invalid_argument);
  CHECK_THROWS_AS(build_rotation_grid(params(1e-3, 1.5, 0.1)), std::invalid_argument);
}

TEST_CASE("fine schedule flip counts follow the ceil formula") {
  const FineParams p = params(1e-3, 0.5, 0.05, 1e4);
  const RotationGrid grid = build_rotation_grid(p);
  const FineSchedule fine = build_fine_schedule(grid, p);

  CHECK(fine.schedule.size() == grid.cells());
  CHECK(fine.clamped_entries == 0);

  const auto expected0 = static_cast<std::uint64_t>(std::ceil(1e4 * std::log2(40000.0)));
  CHECK(expected0 == 152878);
  for (std::size_t j = 0; j < grid.offsets(); ++j) {
    REQUIRE(fine.schedule.entries[j].flips == expected0);
    REQUIRE(fine.schedule.entries[j].rotation == grid.s(0, j));
  }

  // Flip counts shrink as the ladder grows: long rotations get fewer flips.
  for (std::size_t i = 1; i < grid.splits(); ++i) {
    REQUIRE(fine.schedule.entries[i * grid.offsets()].flips <=
            fine.schedule.entries[(i - 1) * grid.offsets()].flips);
  }

  // Pure function of its inputs.
  const FineSchedule again = build_fine_schedule(grid, p);
  CHECK(again.schedule.entries == fine.schedule.entries);

  const QueryCost cost = query_cost(fine.schedule);
  CHECK(static_cast<double>(cost.exact_queries) <= cost.upper_bound);
}

TEST_CASE("degenerate configs clamp flips to one with a warning count") {
  const FineParams p = params(0.5, 1.0, 1.0, 10.0);
  const RotationGrid grid = build_rotation_grid(p);
  const FineSchedule fine = build_fine_schedule(grid, p);
  CHECK(fine.clamped_entries > 0);
  for (const auto& e : fine.schedule.entries) REQUIRE(e.flips >= 1);
}

TEST_CASE("halving the target factor roughly doubles the schedule cost") {
  // At small theta' the offset rows (cost ~ 1/theta', eps-independent)
  // carry a large share and flatten the growth; 0.01 keeps the ladder part
  // dominant enough for the factor-2 shape to show.
  double prev = 0.0;
  for (double eps : {0.5, 0.25, 0.125}) {
    const FineParams p = params(0.01, eps, 0.05, 1e4);
    const RotationGrid grid = build_rotation_grid(p);
    const QueryCost cost = query_cost(build_fine_schedule(grid, p).schedule);
    const double exact = static_cast<double>(cost.exact_queries);
    if (prev != 0.0) {
      const double growth = exact / prev;
      REQUIRE(growth >= 1.5);
      REQUIRE(growth <= 3.0);
    }
    prev = exact;
  }
}

TEST_CASE("split index stretches gaps to pi/8") {
  const FineParams p = params(1e-3, 0.5, 0.05);
  const RotationGrid grid = build_rotation_grid(p);

  const std::size_t i = split_index(0.001, grid);
  CHECK(i == 600);
  CHECK(grid.u[i] * 0.001 == Catch::Approx(0.3916).epsilon(1e-3));
  CHECK(approx_within(grid.u[i] * 0.001, kPi / 8.0, 0.01));

  CHECK(split_index(kPi / 8.0, grid) == 0);
  CHECK_THROWS_AS(split_index(kPi / 8.0 * 1.02, grid), PreconditionViolation);
  CHECK_THROWS_AS(split_index(0.0, grid), std::invalid_argument);
}

TEST_CASE("quadrants of scaled angles") {
  CHECK(quadrant(0.1) == 0);
  CHECK(quadrant(kPi) == 2);
  CHECK(quadrant(2.0 * kPi + 0.1) == 0);
  CHECK(quadrant(1.5 * kPi) == 3);
  CHECK(quadrant(0.0) == 0);
  CHECK_THROWS_AS(quadrant(-0.5), std::invalid_argument);
}

TEST_CASE("refined cells satisfy both separation and quadrant conditions") {
  const FineParams p = params(1e-3, 0.5, 0.05);
  const RotationGrid grid = build_rotation_grid(p);

  const CellRef cell = refine_pair(0.00095, 0.00105, grid);
  CHECK(cell.j == 0);  // the bare ladder step already shares a quadrant here
  const double s = grid.s(cell.i, cell.j);
  CHECK(approx_within(s * 0.0001, kPi / 8.0, 0.5));
  CHECK(quadrant(s * 0.00095) == quadrant(s * 0.00105));

  CHECK_THROWS_AS(refine_pair(0.00105, 0.00095, grid), std::invalid_argument);
}

TEST_CASE("random valid pairs always find a qualifying cell") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> log_theta(std::log(1e-6), std::log(1e-2));
  std::uniform_real_distribution<double> eps_dist(0.05, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const double theta_prime = std::exp(log_theta(gen));
    const double eps_prime = eps_dist(gen);
    const FineParams p = params(theta_prime, eps_prime, 0.1);
    const RotationGrid grid = build_rotation_grid(p);
    const PairSample pair = sample_valid_pair(gen, theta_prime, eps_prime);
    const double eta = pair.theta1 - pair.theta0;

    const std::size_t i = split_index(eta, grid);
    REQUIRE(approx_within(grid.u[i] * eta, kPi / 8.0, 0.01));

    const CellRef cell = refine_pair(pair.theta0, pair.theta1, grid);
    const double s = grid.s(cell.i, cell.j);
    REQUIRE(approx_within(s * eta, kPi / 8.0, 0.5));
    REQUIRE(quadrant(s * pair.theta0) == quadrant(s * pair.theta1));
  }
}

TEST_CASE("threshold rule classifies by orientation") {
  CHECK(classify_against_threshold(0.2, 0.3, 0.4) == MatchResult::RejectFirst);
  CHECK(classify_against_threshold(0.2, 0.3, 0.24) == MatchResult::RejectSecond);
  CHECK(classify_against_threshold(0.3, 0.2, 0.4) == MatchResult::RejectSecond);
  CHECK(classify_against_threshold(0.3, 0.2, 0.1) == MatchResult::RejectFirst);
}

TEST_CASE("close pairs are void without consulting coins") {
  const FineParams p = params(1e-3, 0.5, 0.05);
  const RotationGrid grid = build_rotation_grid(p);
  const CoinTable empty{};  // never touched for a void pair
  CHECK(distinguish(1e-3, 1e-3 * (1.0 + 0.5 / 6.1), empty, grid, 0.5) == MatchResult::Void);
}

TEST_CASE("the distinguisher rejects the far side on sampled coins") {
  const std::uint64_t n = 1ull << 22;
  const std::uint64_t k = 64;  // theta* ~ 3.9e-3
  const double theta_star = OracleInstance(n, k).theta_star();
  const FineParams p = params(theta_star, 0.5, 0.1, 14000.0, 0.2);
  const RotationGrid grid = build_rotation_grid(p);
  const FineSchedule fine = build_fine_schedule(grid, p);

  int wrong = 0;
  const int trials = 60;
  for (int t = 0; t < trials; ++t) {
    SimulatedOracle oracle(OracleInstance(n, k), 400 + static_cast<std::uint64_t>(t));
    const CoinTable coins = CoinTable::from_outcome(grid, oracle.perform_schedule(fine.schedule));
    // theta0 is the truth; theta1 sits 10% above, well past the void band.
    const MatchResult r = distinguish(theta_star, theta_star * 1.10, coins, grid, p.eps_prime);
    if (r != MatchResult::RejectSecond) ++wrong;
  }
  CHECK(wrong <= 2);
}

TEST_CASE("node grid spans the 1.11 band with bye padding to a power of two") {
  const FineParams p = params(1e-3, 0.1, 0.05);
  const NodeGrid grid = build_node_grid(p);

  CHECK(grid.half_span == 1044);
  CHECK(grid.real_count() == 2089);
  CHECK(grid.nodes.size() == 4096);

  std::size_t byes = 0;
  for (const auto& node : grid.nodes) byes += node.is_bye ? 1 : 0;
  CHECK(byes == 2007);

  // Center node carries theta' itself; real angles strictly increase.
  CHECK(grid.nodes[static_cast<std::size_t>(grid.half_span)].angle == 1e-3);
  CHECK(grid.nodes[static_cast<std::size_t>(grid.half_span)].index == 0);
  for (std::size_t i = 1; i < grid.real_count(); ++i) {
    REQUIRE(grid.nodes[i].angle > grid.nodes[i - 1].angle);
  }
  for (std::size_t i = grid.real_count(); i < grid.nodes.size(); ++i) {
    REQUIRE(grid.nodes[i].is_bye);
  }

  const double step = 1.0 + 0.001 * p.eps_prime;
  CHECK(std::pow(step, static_cast<double>(grid.half_span)) >= 1.11);
  CHECK(std::pow(step, static_cast<double>(grid.half_span - 1)) < 1.11);
}

TEST_CASE("whenever theta' is close, some node is very close") {
  std::mt19937_64 gen(29);
  std::uniform_real_distribution<double> band(std::log(1.0 / 1.11), std::log(1.11));
  for (double eps_prime : {1.0, 0.5, 0.1}) {
    const FineParams p = params(2e-4, eps_prime, 0.05);
    const NodeGrid grid = build_node_grid(p);
    for (int t = 0; t < 300; ++t) {
      const double theta_star = p.theta_prime * std::exp(band(gen));
      bool covered = false;
      for (const auto& node : grid.nodes) {
        if (!node.is_bye && approx_within(node.angle, theta_star, 0.001 * eps_prime)) {
          covered = true;
          break;
        }
      }
      REQUIRE(covered);
    }
  }
}

namespace {

NodeGrid tiny_grid(const std::vector<double>& angles) {
  NodeGrid grid;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    grid.nodes.push_back({static_cast<std::int64_t>(i), angles[i], false});
  }
  grid.half_span = static_cast<std::int64_t>(angles.size() / 2);
  return grid;
}

MatchResult perfect_compare(double lo, double hi, double theta_star, double eps_prime) {
  if (approx_within(lo, hi, eps_prime / 6.1)) return MatchResult::Void;
  const double d_lo = std::fabs(std::log(lo / theta_star));
  const double d_hi = std::fabs(std::log(hi / theta_star));
  return d_lo > d_hi ? MatchResult::RejectFirst : MatchResult::RejectSecond;
}

}  // namespace

TEST_CASE("round pairing matches position k against position n/2+k") {
  const NodeGrid grid = tiny_grid({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0});
  std::vector<std::pair<double, double>> first_round;
  const double theta_star = 3.0;
  const auto result = run_tournament_with(grid, [&](double lo, double hi) {
    if (first_round.size() < 4) first_round.emplace_back(lo, hi);
    return perfect_compare(lo, hi, theta_star, 1e-6);  // never void at these gaps
  });
  REQUIRE(first_round.size() == 4);
  CHECK(first_round[0] == std::make_pair(1.0, 5.0));
  CHECK(first_round[1] == std::make_pair(2.0, 6.0));
  CHECK(first_round[2] == std::make_pair(3.0, 7.0));
  CHECK(first_round[3] == std::make_pair(4.0, 8.0));

  CHECK(result.theta_est == 3.0);
  CHECK_FALSE(result.failed);
  CHECK(result.phase1_matches == 7);  // a full bracket plays n-1 match-ups
}

TEST_CASE("an all-void bracket returns the lowest-index node without failing") {
  const NodeGrid grid = tiny_grid({1.0, 1.0001, 1.0002, 1.0003});
  const auto result = run_tournament_with(grid, [&](double, double) { return MatchResult::Void; });
  CHECK(result.theta_est == 1.0);
  CHECK_FALSE(result.failed);
  CHECK(result.phase2_entrants == 4);
}

TEST_CASE("a void stops the round and carries the right entrants forward") {
  // Eight nodes; the first round pair (2.0, 6.0) comes back void. Entrants:
  // the already-decided winner of (1.0, 5.0), both void members, and every
  // not-yet-played node of the round.
  const NodeGrid grid = tiny_grid({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0});
  bool voided = false;
  const auto result = run_tournament_with(grid, [&](double lo, double hi) {
    if (lo == 2.0 && hi == 6.0) voided = true;
    if (voided) return MatchResult::Void;  // stop signal, then an idle phase 2
    return MatchResult::RejectFirst;       // (1.0, 5.0) -> 5.0 advances
  });
  CHECK(result.phase2_entrants == 7);  // 5.0, then 2.0 and 6.0, then 3,7,4,8
  CHECK(result.theta_est == 2.0);      // lowest index among the entrants
  CHECK_FALSE(result.failed);
}

TEST_CASE("byes lose automatically and are never compared") {
  const FineParams p = params(1e-3, 1.0, 0.05);
  const NodeGrid grid = build_node_grid(p);
  REQUIRE(grid.nodes.size() > grid.real_count());

  const double theta_star = 1e-3;
  const auto result = run_tournament_with(grid, [&](double lo, double hi) {
    REQUIRE(std::isfinite(lo));
    REQUIRE(std::isfinite(hi));
    return perfect_compare(lo, hi, theta_star, p.eps_prime);
  });
  CHECK(std::isfinite(result.theta_est));
  CHECK_FALSE(result.failed);
}

TEST_CASE("when every entrant is rejected the lowest index returns flagged") {
  const NodeGrid grid = tiny_grid({1.0, 2.0, 3.0, 4.0});
  const auto result = run_tournament_with(grid, [&](double lo, double hi) {
    if (lo == 1.0 && hi == 3.0) return MatchResult::Void;  // stops phase 1 immediately
    // Phase 2 ring: every node loses somewhere.
    if (lo == 1.0 && hi == 2.0) return MatchResult::RejectFirst;
    if (lo == 2.0 && hi == 3.0) return MatchResult::RejectFirst;
    if (lo == 3.0 && hi == 4.0) return MatchResult::RejectFirst;
    if (lo == 1.0 && hi == 4.0) return MatchResult::RejectSecond;
    return MatchResult::Void;
  });
  CHECK(result.failed);
  CHECK(result.theta_est == 1.0);
}

TEST_CASE("a perfect comparator drives the winner next to theta*") {
  std::mt19937_64 gen(37);
  std::uniform_real_distribution<double> band(std::log(1.0 / 1.11), std::log(1.11));
  for (double eps_prime : {0.5, 0.1}) {
    const FineParams p = params(1e-3, eps_prime, 0.05);
    const NodeGrid grid = build_node_grid(p);
    const double tolerance = (1.0 + 0.001 * eps_prime) * (1.0 + eps_prime / 6.1) - 1.0;
    for (int t = 0; t < 100; ++t) {
      const double theta_star = p.theta_prime * std::exp(band(gen));
      const auto result = run_tournament_with(
          grid, [&](double lo, double hi) { return perfect_compare(lo, hi, theta_star, eps_prime); });
      REQUIRE_FALSE(result.failed);
      REQUIRE(approx_within(result.theta_est, theta_star, tolerance));
    }
  }
}

TEST_CASE("tournament comparison counts stay within the structural budgets") {
  for (double eps_prime : {1.0, 0.5, 0.25, 0.1}) {
    const FineParams p = params(5e-4, eps_prime, 0.05);
    const NodeGrid grid = build_node_grid(p);
    const double theta_star = 5e-4 * 1.02;
    const auto result = run_tournament_with(
        grid, [&](double lo, double hi) { return perfect_compare(lo, hi, theta_star, eps_prime); });
    REQUIRE(result.phase1_matches <= grid.nodes.size() - 1);
    // Phase-2 entrants: the void span bound plus the stopped round's nodes.
    REQUIRE(result.phase2_entrants <= 12200 + grid.nodes.size());
    const double budget = (1.0 / eps_prime) * std::log2(1.0 / eps_prime + 2.0);
    REQUIRE(static_cast<double>(result.comparisons) <= 600000.0 + 40000.0 * budget);
  }
}

TEST_CASE("coin tables reject mismatched outcomes") {
  const FineParams p = params(1e-3, 0.5, 0.05);
  const RotationGrid grid = build_rotation_grid(p);
  ScheduleOutcome wrong;
  wrong.per_entry = {{1, 2}};
  CHECK_THROWS_AS(CoinTable::from_outcome(grid, wrong), std::invalid_argument);
}

TEST_CASE("the fine schedule is a pure function of parameters, not the oracle") {
  const FineParams p = params(3e-3, 0.5, 0.1, 14000.0, 0.2);
  const RotationGrid grid = build_rotation_grid(p);
  const FineSchedule a = build_fine_schedule(grid, p);
  const FineSchedule b = build_fine_schedule(build_rotation_grid(p), p);
  CHECK(a.schedule.entries == b.schedule.entries);
}

TEST_CASE("fine estimation hits the target factor at its stated rate") {
  const std::uint64_t n = 1ull << 20;
  const std::uint64_t k = 1000;
  const double theta_star = OracleInstance(n, k).theta_star();
  const FineParams p = params(theta_star, 0.5, 0.1, 14000.0, 0.2);

  int hits = 0;
  const int trials = 150;
  std::uint64_t queries = 0;
  for (int t = 0; t < trials; ++t) {
    SimulatedOracle oracle(OracleInstance(n, k), 7100 + static_cast<std::uint64_t>(t));
    const FineEstimate est = estimate_fine(oracle, p);
    queries = est.queries_exact;
    REQUIRE(static_cast<double>(est.queries_exact) <= est.queries_bound);
    if (!est.failed && approx_within(est.theta_est, theta_star, p.eps_prime / 6.0)) ++hits;
  }
  // Guarantee is 1 - delta' = 0.9; leave slack for sampling noise.
  CHECK(hits >= static_cast<int>(0.85 * trials));
  CHECK(queries > 0);
}
