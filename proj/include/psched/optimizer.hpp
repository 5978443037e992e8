#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "psched/risk.hpp"

namespace psched {

struct SwarmConfig {
  int population = 60;
  int iterations = 150;
  double omega = 0.729;
  double c1 = 1.494;
  double c2 = 1.494;
  double c3 = 0.2;  // v_max = c3 * (ub - lb)
  int neighborhood = 5;  // ring
  double lower = -5.0;  // broadcast to every dimension unless lower_bounds is set
  double upper = 5.0;
  std::vector<double> lower_bounds;
  std::vector<double> upper_bounds;
  double alpha = 0.05;  // space-reduction rate
  double temperature = 1e6;
  int sa_every = 10;  // 0 disables
  int ssr_every = 25;  // 0 disables
  double sa_step_scale = 0.05;
  bool per_dimension_random = false;  // r1, r2 per coordinate instead of per particle
  bool metropolis = false;  // conventional acceptance instead of the printed rule
  bool strict_reduction = false;  // lb' = lb + alpha (lb - best), as printed
  int workers = 1;
  std::uint64_t seed = 0;

  void validate(std::size_t dim) const;
};

nlohmann::json to_json(const SwarmConfig& config);
/// Applies `key=value` overrides by field name; ConfigError on unknown keys.
void apply_override(SwarmConfig& config, const std::string& key, const std::string& value);

/// What an objective reports for one candidate. `summary` feeds the
/// training history and is optional.
struct CandidateScore {
  double objective = -std::numeric_limits<double>::infinity();
  std::optional<RiskSummary> summary;
};

/// objective(theta, seed). Must be a pure function of its arguments.
using ObjectiveFn = std::function<CandidateScore(std::span<const double>, std::uint64_t)>;

struct HistoryRow {
  int iteration = 0;
  double best_objective = 0.0;
  std::optional<RiskSummary> best_summary;
};

struct SwarmState {
  std::vector<std::vector<double>> positions;
  std::vector<std::vector<double>> velocities;
  std::vector<double> scores;  // of the current positions
  std::vector<std::vector<double>> personal_best;
  std::vector<double> personal_best_score;
  std::vector<CandidateScore> personal_best_detail;
  std::vector<double> global_best;
  double global_best_score = -std::numeric_limits<double>::infinity();
  CandidateScore global_best_detail;
  std::vector<double> lb;
  std::vector<double> ub;
  std::vector<double> vmax;
  int iteration = 0;
  std::vector<HistoryRow> history;
  std::mt19937_64 rng;
  long evaluations = 0;
  long failed_evaluations = 0;

  std::size_t dim() const { return lb.size(); }
  std::size_t size() const { return positions.size(); }
};

/// Positions uniform in the box, velocities (2a - 1)(ub - lb) clamped to
/// +-v_max. Nothing is evaluated.
SwarmState init_population(const SwarmConfig& config, std::size_t dim);

/// Index of the best personal best in particle i's ring neighborhood.
std::size_t neighborhood_best(const SwarmState& state, std::size_t i, int neighborhood);

/// Velocity/position update of one particle with the given random factors;
/// r1 and r2 hold one value (shared by all coordinates) or one per coordinate.
void move_particle(std::span<double> position, std::span<double> velocity, std::span<const double> personal_best,
                   std::span<const double> local_best, std::span<const double> r1, std::span<const double> r2,
                   const SwarmConfig& config, std::span<const double> vmax, std::span<const double> lb,
                   std::span<const double> ub);

/// Acceptance of a proposal that changes the objective by `delta` (positive
/// is better), given a uniform draw z. The printed rule accepts a worse
/// proposal when z >= exp(delta / T); Metropolis accepts when z < exp(delta / T).
bool sa_accept(double delta, double z, double temperature, bool metropolis);

/// One velocity/position update of every particle.
void pso_step(SwarmState& state, const SwarmConfig& config);

/// Perturbs every particle, evaluates the proposals and accepts per the
/// configured rule. Personal and global bests see the extra evaluations.
void sa_step(SwarmState& state, const SwarmConfig& config, const ObjectiveFn& objective);

/// Contracts the box toward the global best; re-clamps positions and velocities.
void reduce_space(SwarmState& state, const SwarmConfig& config);

/// Evaluates positions (concurrently) and refreshes every best. Seeds derive
/// from (config.seed, iteration, particle, phase).
void evaluate_population(SwarmState& state, const SwarmConfig& config, const ObjectiveFn& objective);

struct OptimizeResult {
  std::vector<double> best;
  double best_score = 0.0;
  CandidateScore best_detail;
  std::vector<HistoryRow> history;
  long evaluations = 0;
  long failed_evaluations = 0;
};

/// Called after each iteration with the state; may write checkpoints.
using IterationCallback = std::function<void(const SwarmState&)>;

/// Full search. history[0] covers the initial population, history[k] the
/// k-th iteration. With `resume`, continues from that state.
OptimizeResult optimize(const SwarmConfig& config, std::size_t dim, const ObjectiveFn& objective,
                        SwarmState* resume = nullptr, const IterationCallback& on_iteration = {});

/// CSV with columns iteration,best_J,mean,std,var_beta,cvar_beta,f_lb.
void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& history);

nlohmann::json checkpoint_to_json(const SwarmState& state);
SwarmState checkpoint_from_json(const nlohmann::json& doc);

}  // namespace psched
