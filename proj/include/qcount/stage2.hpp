#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qcount/core.hpp"
#include "qcount/errors.hpp"
#include "qcount/oracle.hpp"

namespace qcount::stage2 {

/// Parameters of one fine-estimation instance: the anchor angle theta', the
/// target factor eps', the failure budget delta', and the flip-count scale A
/// (thinned by the practical factor).
struct FineParams {
  double theta_prime;
  double eps_prime;
  double delta_prime;
  double flip_scale_a = 14000.0;
  double practical_factor = 1.0;

  void validate() const {
    if (!(theta_prime > 0.0) || !(theta_prime < kHalfPi)) {
      throw std::invalid_argument("stage2: theta' outside (0, pi/2)");
    }
    if (!(eps_prime > 0.0) || !(eps_prime <= 1.0)) throw std::invalid_argument("stage2: eps' outside (0, 1]");
    if (!(delta_prime > 0.0) || !(delta_prime <= 1.0)) throw std::invalid_argument("stage2: delta' outside (0, 1]");
    if (!(flip_scale_a > 0.0)) throw std::invalid_argument("stage2: flip scale must be positive");
    if (!(practical_factor > 0.0) || !(practical_factor <= 1.0)) {
      throw std::invalid_argument("stage2: practical factor outside (0, 1]");
    }
  }
};

/// Rotation cells s(i, j) = u_i + a_j. The u ladder grows by factor 1.01 up
/// to just past 1.2*pi/(theta' eps'); the offsets start at 0, jump to
/// pi/(4.8 theta') and then grow by exactly factor 1.01 for C+1 more steps.
/// The offset column count C+2 is the same for every theta'.
struct RotationGrid {
  std::vector<double> u;
  std::vector<double> a_offset;

  double s(std::size_t i, std::size_t j) const { return u[i] + a_offset[j]; }
  std::size_t splits() const { return u.size(); }          // L + 1
  std::size_t offsets() const { return a_offset.size(); }  // C + 2
  std::size_t cells() const { return splits() * offsets(); }
};

inline constexpr std::size_t kMaxSplitSteps = 1u << 20;

inline RotationGrid build_rotation_grid(const FineParams& params) {
  params.validate();
  const double bound = 1.2 * kPi / (params.theta_prime * params.eps_prime);
  const double steps_estimate = std::ceil(std::log(bound) / std::log(1.01));
  if (!std::isfinite(steps_estimate) || steps_estimate > static_cast<double>(kMaxSplitSteps)) {
    throw ResourceLimitError("stage2: rotation ladder needs L = " + std::to_string(steps_estimate) +
                             " steps, above the ceiling of " + std::to_string(kMaxSplitSteps));
  }

  RotationGrid grid;
  grid.u.reserve(static_cast<std::size_t>(steps_estimate) + 2);
  grid.u.push_back(1.0);
  while (grid.u.back() < bound) grid.u.push_back(grid.u.back() * 1.01);

  const int c = static_cast<int>(std::ceil(2.0 * std::log(1.2) / std::log(1.01)));
  grid.a_offset.reserve(static_cast<std::size_t>(c) + 2);
  grid.a_offset.push_back(0.0);
  grid.a_offset.push_back(kPi / (4.8 * params.theta_prime));
  for (int j = 0; j < c; ++j) grid.a_offset.push_back(grid.a_offset.back() * 1.01);
  return grid;
}

/// Flip count for all cells of split i: ceil(pf * A * log2(1/(delta' theta'
/// eps' u_i))). Degenerate configurations that would make the logarithm
/// non-positive are clamped to a floor of one flip; the bool reports the
/// clamp.
inline std::pair<std::uint64_t, bool> flips_for_split(const FineParams& params, double u_i) {
  const double x = params.delta_prime * params.theta_prime * params.eps_prime * u_i;
  const double raw = params.practical_factor * params.flip_scale_a * std::log2(1.0 / x);
  if (!std::isfinite(raw) || !(raw > 0.0)) return {1, true};
  return {static_cast<std::uint64_t>(std::ceil(raw)), false};
}

/// Streams the fine schedule's entries in row-major (i, j) order without
/// materializing them: f(i, j, rotation, flips).
template <typename F>
inline void for_each_fine_entry(const RotationGrid& grid, const FineParams& params, F&& f) {
  for (std::size_t i = 0; i < grid.splits(); ++i) {
    const auto [flips, clamped] = flips_for_split(params, grid.u[i]);
    (void)clamped;
    for (std::size_t j = 0; j < grid.offsets(); ++j) {
      f(i, j, grid.u[i] + grid.a_offset[j], flips);
    }
  }
}

struct FineSchedule {
  GroverSchedule schedule;
  std::size_t clamped_entries = 0;  // cells that hit the one-flip floor
};

inline FineSchedule build_fine_schedule(const RotationGrid& grid, const FineParams& params) {
  params.validate();
  FineSchedule out;
  out.schedule.entries.reserve(grid.cells());
  out.schedule.labels.reserve(grid.cells());
  for (std::size_t i = 0; i < grid.splits(); ++i) {
    const auto [flips, clamped] = flips_for_split(params, grid.u[i]);
    for (std::size_t j = 0; j < grid.offsets(); ++j) {
      out.schedule.entries.push_back({grid.u[i] + grid.a_offset[j], flips});
      out.schedule.labels.push_back("g:" + std::to_string(i) + "," + std::to_string(j));
      if (clamped) ++out.clamped_entries;
    }
  }
  return out;
}

/// Index of the u ladder step that stretches a gap eta to roughly pi/8:
/// u_i * eta within factor 1.01 of pi/8. floor(log_1.01(pi/(8 eta))) works
/// whenever the pair satisfies the distinguisher's preconditions.
inline std::size_t split_index(double eta, const RotationGrid& grid) {
  if (!(eta > 0.0)) throw std::invalid_argument("split_index: gap must be positive");
  const double target = kPi / 8.0;
  const double raw = std::floor(std::log(target / eta) / std::log(1.01));
  const auto last = static_cast<double>(grid.splits() - 1);
  for (double cand : {raw, raw - 1.0, raw + 1.0}) {
    if (cand < 0.0 || cand > last) continue;
    const auto i = static_cast<std::size_t>(cand);
    if (approx_within(grid.u[i] * eta, target, 0.01)) return i;
  }
  throw PreconditionViolation("split_index: no ladder step stretches gap " + std::to_string(eta) +
                              " to pi/8 (computed index " + std::to_string(raw) + ")");
}

/// Which of the four intervals [0,pi/2), [pi/2,pi), [pi,3pi/2), [3pi/2,2pi)
/// the angle occupies modulo 2pi.
inline int quadrant(double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("quadrant: angle must be non-negative");
  const double m = std::fmod(x, 2.0 * kPi);
  const int q = static_cast<int>(m / kHalfPi);
  return q > 3 ? 3 : q;
}

struct CellRef {
  std::size_t i;
  std::size_t j;

  bool operator==(const CellRef&) const = default;
};

/// Picks the rotation cell used to compare two candidate angles: offset j is
/// 0 when the bare ladder step already places both scaled angles in one
/// quadrant, else the smallest j that restores same-quadrant while keeping
/// the scaled gap within factor 1.5 of pi/8. Both conditions are checked
/// directly against the candidate cell.
inline CellRef refine_pair(double theta0, double theta1, const RotationGrid& grid) {
  if (!(theta0 > 0.0) || !(theta0 < theta1)) {
    throw std::invalid_argument("refine_pair: need 0 < theta0 < theta1");
  }
  const double eta = theta1 - theta0;
  const std::size_t i = split_index(eta, grid);
  for (std::size_t j = 0; j < grid.offsets(); ++j) {
    const double s = grid.s(i, j);
    if (!approx_within(s * eta, kPi / 8.0, 0.5)) continue;
    if (quadrant(s * theta0) != quadrant(s * theta1)) continue;
    return {i, j};
  }
  throw NoQualifyingCell("refine_pair: no offset places both angles in one quadrant at split " +
                         std::to_string(i));
}

/// Empirical means of the fine schedule's coins, addressed by rotation cell.
struct CoinTable {
  struct Cell {
    double p_hat;
    std::uint64_t flips;
    double rotation;
  };

  std::size_t cols = 0;
  std::vector<Cell> cells;

  const Cell& at(std::size_t i, std::size_t j) const { return cells[i * cols + j]; }

  static CoinTable from_outcome(const RotationGrid& grid, const ScheduleOutcome& outcome) {
    if (outcome.per_entry.size() != grid.cells()) {
      throw std::invalid_argument("CoinTable: outcome size does not match grid");
    }
    CoinTable table;
    table.cols = grid.offsets();
    table.cells.reserve(outcome.per_entry.size());
    for (std::size_t i = 0; i < grid.splits(); ++i) {
      for (std::size_t j = 0; j < grid.offsets(); ++j) {
        const auto& e = outcome.per_entry[i * grid.offsets() + j];
        table.cells.push_back({e.p_hat(), e.flips, grid.s(i, j)});
      }
    }
    return table;
  }
};

enum class MatchResult { RejectFirst, RejectSecond, Void };

/// Midpoint threshold rule: with q' = (q0+q1)/2, a high empirical mean
/// rejects the side whose predicted bias is low.
inline MatchResult classify_against_threshold(double q0, double q1, double p_hat) {
  const double q_threshold = 0.5 * (q0 + q1);
  if (q0 <= q1) return p_hat > q_threshold ? MatchResult::RejectFirst : MatchResult::RejectSecond;
  return p_hat > q_threshold ? MatchResult::RejectSecond : MatchResult::RejectFirst;
}

/// Decides between two candidate angles from the shared coin table. Pairs
/// within factor 1+eps'/6.1 are too close to decide and come back Void.
/// The predicted biases are evaluated at the odd-floored rotation that was
/// physically flipped, sin^2(floor_odd(s) * theta_b).
inline MatchResult distinguish(double theta0, double theta1, const CoinTable& coins,
                               const RotationGrid& grid, double eps_prime) {
  if (approx_within(theta0, theta1, eps_prime / 6.1)) return MatchResult::Void;
  const CellRef cell = refine_pair(theta0, theta1, grid);
  const auto rotation = static_cast<double>(floor_odd(grid.s(cell.i, cell.j)));
  const double s0 = std::sin(rotation * theta0);
  const double s1 = std::sin(rotation * theta1);
  return classify_against_threshold(s0 * s0, s1 * s1, coins.at(cell.i, cell.j).p_hat);
}

/// Candidate angles theta' (1+.001 eps')^i for i in [-V, V], V minimal with
/// (1+.001 eps')^V >= 1.11, padded with dummy byes to a power of two. Byes
/// sort after every real node and automatically lose every match-up.
struct NodeGrid {
  struct Node {
    std::int64_t index;
    double angle;
    bool is_bye;
    bool alive = true;
  };

  std::vector<Node> nodes;  // ascending by angle, byes last
  std::int64_t half_span = 0;  // V

  std::size_t real_count() const { return static_cast<std::size_t>(2 * half_span + 1); }
};

inline NodeGrid build_node_grid(const FineParams& params) {
  params.validate();
  const double step = 1.0 + 0.001 * params.eps_prime;

  std::int64_t v = 0;
  for (double reach = 1.0; reach < 1.11; reach *= step) ++v;

  NodeGrid grid;
  grid.half_span = v;
  grid.nodes.reserve(static_cast<std::size_t>(2 * v + 1));

  std::vector<double> below(static_cast<std::size_t>(v));
  double down = params.theta_prime;
  for (std::int64_t i = 0; i < v; ++i) {
    down /= step;
    below[static_cast<std::size_t>(i)] = down;
  }
  for (std::int64_t i = v; i >= 1; --i) {
    grid.nodes.push_back({-i, below[static_cast<std::size_t>(i - 1)], false});
  }
  double up = params.theta_prime;
  grid.nodes.push_back({0, up, false});
  for (std::int64_t i = 1; i <= v; ++i) {
    up *= step;
    grid.nodes.push_back({i, up, false});
  }

  std::size_t bracket = 1;
  while (bracket < grid.nodes.size()) bracket <<= 1;
  std::int64_t bye_index = v + 1;
  while (grid.nodes.size() < bracket) {
    grid.nodes.push_back({bye_index++, std::numeric_limits<double>::infinity(), true});
  }
  return grid;
}

struct TournamentResult {
  double theta_est = 0.0;
  bool failed = false;
  std::size_t phase1_matches = 0;    // comparator-decided phase-1 pairs
  std::size_t phase2_entrants = 0;
  std::size_t comparisons = 0;       // total comparator invocations
};

/// Two-phase elimination bracket over the node grid; the comparator decides
/// real-versus-real pairs (byes lose automatically and never produce Void).
///
/// Phase 1 repeats rounds: nodes sorted ascending, position k plays position
/// n/2+k, losers drop out. The first Void stops the phase mid-round; the
/// second phase then reruns every unordered pair of the stopped round's
/// survivors (winners so far, both void members, and all still-unplayed
/// nodes), rejections included even for already-rejected members. The winner
/// is the lowest-index entrant never rejected in phase 2; when nothing
/// survives, the lowest-index entrant is returned with the failure flag set.
template <typename Comparator>
inline TournamentResult run_tournament_with(const NodeGrid& grid, Comparator&& compare) {
  TournamentResult result;
  std::vector<NodeGrid::Node> alive = grid.nodes;

  const auto by_angle = [](const NodeGrid::Node& a, const NodeGrid::Node& b) {
    if (a.angle != b.angle) return a.angle < b.angle;
    return a.index < b.index;
  };

  bool voided = false;
  std::vector<NodeGrid::Node> entrants;
  while (alive.size() > 1 && !voided) {
    const std::size_t half = alive.size() / 2;
    std::vector<NodeGrid::Node> winners;
    winners.reserve(half);
    for (std::size_t k = 0; k < half; ++k) {
      NodeGrid::Node& lo = alive[k];
      NodeGrid::Node& hi = alive[k + half];
      if (lo.is_bye || hi.is_bye) {
        // A bye never reaches this point on both sides of a pair.
        winners.push_back(lo.is_bye ? hi : lo);
        (lo.is_bye ? lo : hi).alive = false;
        continue;
      }
      const MatchResult r = compare(lo.angle, hi.angle);
      ++result.comparisons;
      if (r == MatchResult::Void) {
        entrants = winners;
        entrants.push_back(lo);
        entrants.push_back(hi);
        for (std::size_t kk = k + 1; kk < half; ++kk) {
          entrants.push_back(alive[kk]);
          entrants.push_back(alive[kk + half]);
        }
        voided = true;
        break;
      }
      ++result.phase1_matches;
      if (r == MatchResult::RejectFirst) {
        lo.alive = false;
        winners.push_back(hi);
      } else {
        hi.alive = false;
        winners.push_back(lo);
      }
    }
    if (!voided) {
      std::sort(winners.begin(), winners.end(), by_angle);
      alive = std::move(winners);
    }
  }

  if (!voided) {
    result.theta_est = alive.front().angle;
    return result;
  }

  std::sort(entrants.begin(), entrants.end(), by_angle);
  result.phase2_entrants = entrants.size();
  std::vector<bool> rejected(entrants.size(), false);
  for (std::size_t x = 0; x < entrants.size(); ++x) {
    for (std::size_t y = x + 1; y < entrants.size(); ++y) {
      if (entrants[x].is_bye || entrants[y].is_bye) {
        if (entrants[x].is_bye) rejected[x] = true;
        if (entrants[y].is_bye) rejected[y] = true;
        continue;
      }
      const MatchResult r = compare(entrants[x].angle, entrants[y].angle);
      ++result.comparisons;
      if (r == MatchResult::RejectFirst) rejected[x] = true;
      if (r == MatchResult::RejectSecond) rejected[y] = true;
    }
  }

  for (std::size_t x = 0; x < entrants.size(); ++x) {
    if (!entrants[x].is_bye && !rejected[x]) {
      result.theta_est = entrants[x].angle;
      return result;
    }
  }
  for (const auto& e : entrants) {
    if (!e.is_bye) {
      result.theta_est = e.angle;
      result.failed = true;
      return result;
    }
  }
  // Unreachable: a void pair always contributes two real nodes.
  result.failed = true;
  return result;
}

inline TournamentResult run_tournament(const NodeGrid& nodes, const CoinTable& coins,
                                       const RotationGrid& grid, double eps_prime) {
  return run_tournament_with(nodes, [&](double lo, double hi) {
    return distinguish(lo, hi, coins, grid, eps_prime);
  });
}

struct FineEstimate {
  double theta_est = 0.0;
  bool failed = false;
  std::uint64_t queries_exact = 0;
  double queries_bound = 0.0;
};

/// Full fine-estimation pass: the performed schedule is a pure function of
/// the parameters, never of oracle responses.
inline FineEstimate estimate_fine(SimulatedOracle& oracle, const FineParams& params) {
  const RotationGrid grid = build_rotation_grid(params);
  const FineSchedule fine = build_fine_schedule(grid, params);
  const QueryCost cost = query_cost(fine.schedule);
  const ScheduleOutcome outcome = oracle.perform_schedule(fine.schedule);
  const CoinTable coins = CoinTable::from_outcome(grid, outcome);
  const NodeGrid nodes = build_node_grid(params);
  const TournamentResult t = run_tournament(nodes, coins, grid, params.eps_prime);
  return {t.theta_est, t.failed, cost.exact_queries, cost.upper_bound};
}

}  // namespace qcount::stage2
