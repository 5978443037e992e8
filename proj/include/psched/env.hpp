#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "psched/instance.hpp"

namespace psched {

/// Parameters of the uncertain plant. Processing times are discrete uniform
/// around the expected value; due dates are Poisson in days.
struct UncertaintyConfig {
  bool processing_uncertain = false;
  bool due_uncertain = false;
  int c = 1;                          // half-width of the processing-time uniform, periods
  int k_pt = 0;                       // widening of that half-width under misspecification
  int k_dd = 0;                       // due-date rate perturbation amplitude, days
  int due_confirm_lead_periods = 6;  // true due date revealed this long before the expected one

  void validate() const;
};

/// One joint realization of every uncertain quantity, fixed before an episode.
struct Scenario {
  int num_tasks = 0;
  int num_units = 0;
  bool processing_uncertain = false;
  bool due_uncertain = false;
  /// Realized batch durations, periods; [task-1][unit-1] -> one entry per batch.
  /// Empty for ineligible pairs.
  std::vector<std::vector<int>> batch_periods;
  std::vector<int> confirmed_due_periods;  // [task-1]
  std::vector<int> confirm_at_period;      // [task-1]

  const std::vector<int>& batches(int task, int unit) const {
    return batch_periods[static_cast<std::size_t>(task - 1) * static_cast<std::size_t>(num_units) +
                         static_cast<std::size_t>(unit - 1)];
  }
};

/// Scenario with every uncertain quantity at its expected value.
Scenario nominal_scenario(const ProblemInstance& instance);

/// Draws a scenario. With `misspecify`, the processing half-width becomes
/// c + k_pt and each due-date rate is shifted by k_dd * U(-1, 1) days.
Scenario sample_scenario(const ProblemInstance& instance, const UncertaintyConfig& config, bool misspecify,
                         std::mt19937_64& rng);

nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& doc);

/// A campaign: NB batches of one task processed back to back in one unit.
struct CampaignRecord {
  int task = 0;
  int unit = 0;
  int start_period = 0;   // period of the scheduling decision
  int setup_periods = 0;  // cleaning / release wait folded in before the first batch
  std::vector<int> batch_completion_periods;  // true completion period of every batch
  int batches_done = 0;
  bool aborted = false;  // preempted (only reachable with preemption enabled)

  int batches_planned() const { return static_cast<int>(batch_completion_periods.size()); }
  bool complete() const { return !aborted && batches_done == batches_planned(); }
  int end_period() const { return batch_completion_periods.back(); }
};

struct UnitStatus {
  int active_campaign = -1;  // index into PlantState::campaigns, -1 when free
  int last_task = 0;         // most recently completed task, 0 if none
  int last_finish_period = 0;

  bool busy() const { return active_campaign >= 0; }
};

/// Observable state vector plus the hidden bookkeeping needed to advance it.
struct PlantState {
  std::vector<double> inventory;     // kg, [task-1]
  std::vector<int> last_control;     // [unit-1], 1..N+1
  std::vector<int> countdown;        // periods left in the unit's campaign (observed estimate)
  std::vector<int> due_countdown;    // periods until due, frozen once the task finishes
  int t = 0;

  std::vector<char> finished;        // [task-1]
  std::vector<int> finish_period;    // [task-1], valid when finished
  int num_finished = 0;
  std::vector<UnitStatus> units;
  std::vector<CampaignRecord> campaigns;
  bool done = false;

  int num_tasks() const { return static_cast<int>(inventory.size()); }
  int num_units() const { return static_cast<int>(units.size()); }
  bool all_finished() const { return num_finished == num_tasks(); }
  int active_task(int unit) const;

  /// [I_1..I_N, w_1..w_nu, delta_1..delta_nu, rho_1..rho_N, t].
  std::vector<double> observation() const;
  void observation(std::span<double> out) const;
};

/// Linear terminal-reward weights, applied block-wise to the state vector.
struct RewardWeights {
  double inventory = 0.0;
  double last_control = 0.0;
  double countdown = 0.0;
  double due = 1.0;
  double time = -1.0;
};

struct EnvOptions {
  RewardWeights reward;
  /// Lets a busy unit switch task, discarding the running campaign. Unreachable
  /// under masking; rejected with StateError when off.
  bool allow_preemption = false;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

PlantState initial_state(const ProblemInstance& instance, const Scenario& scenario);

/// Setup delay, periods, for starting `task` on the free `unit` at state.t.
int setup_time(const PlantState& state, const ProblemInstance& instance, int task, int unit);

/// Advances one period. `control` holds one code in 1..N+1 per unit.
StepResult step(PlantState& state, std::span<const int> control, const Scenario& scenario,
                const ProblemInstance& instance, const EnvOptions& options = {});

/// d^T x for the configured weights.
double terminal_reward(const PlantState& state, const RewardWeights& weights);

struct EpisodeOutcome {
  int makespan = 0;
  std::vector<int> tardiness;  // periods, [task-1]
};

/// StateError if the episode has not terminated.
EpisodeOutcome makespan_and_tardiness(const PlantState& final_state);

}  // namespace psched
