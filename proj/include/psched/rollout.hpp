#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "psched/env.hpp"
#include "psched/feasibility.hpp"
#include "psched/instance.hpp"
#include "psched/policy.hpp"

namespace psched {

/// One campaign as it appears on a Gantt chart.
struct ScheduleEvent {
  int unit = 0;
  int task = 0;
  int start_period = 0;
  int setup_periods = 0;
  std::vector<int> batch_completion_periods;  // planned, including any beyond the episode end
  int batches_done = 0;
  bool completed = false;
  bool aborted = false;

  int processing_start() const { return start_period + setup_periods; }
  int end_period() const { return batch_completion_periods.back(); }
};

struct EpisodeResult {
  double raw_return = 0.0;
  double penalized_return = 0.0;
  double total_penalty = 0.0;
  bool violated = false;
  int makespan = 0;
  std::vector<int> tardiness;
  std::vector<ScheduleEvent> schedule_events;
  std::vector<std::vector<int>> controls;  // filled only when requested
};

struct RolloutOptions {
  PenaltyConfig penalty;
  EnvOptions env;
  /// Debug switch: without the mask every unit may pick any eligible,
  /// unfinished task each period and preemption is enabled.
  bool mask = true;
  bool record_controls = false;
  /// JSON-lines trajectory, one record per period.
  std::ostream* trace = nullptr;
};

EpisodeResult run_episode(const Policy& policy, const ProblemInstance& instance, const Scenario& scenario,
                          const RolloutOptions& options = {});

/// The feasible lists the unmasked debug mode offers.
FeasibleSets unmasked_sets(const PlantState& state, const ProblemInstance& instance);

std::vector<ScheduleEvent> schedule_events(const PlantState& state);

struct ReturnSamples {
  std::vector<double> z_phi;
  std::vector<double> z;
  std::vector<char> success;  // 1 when the episode had no penalized violation
  std::vector<std::uint64_t> seeds;
  std::vector<EpisodeResult> episodes;  // only with EvaluationOptions::keep_episodes

  std::size_t size() const { return z.size(); }
  int successes() const;
};

struct EvaluationOptions {
  int workers = 1;
  bool misspecify = false;
  bool keep_episodes = false;
  RolloutOptions rollout;
};

/// n episodes, scenario k drawn from a stream seeded by (base_seed, k). A
/// plant with no uncertainty uses the nominal scenario for every sample.
/// Results are ordered by sample index and independent of `workers`.
ReturnSamples evaluate_policy(const Policy& policy, const ProblemInstance& instance, const UncertaintyConfig& uncertainty,
                              int n, std::uint64_t base_seed, const EvaluationOptions& options = {});

/// Scenario used for sample `index` of an evaluation seeded with base_seed.
Scenario scenario_for_sample(const ProblemInstance& instance, const UncertaintyConfig& uncertainty, bool misspecify,
                             std::uint64_t base_seed, std::size_t index);

}  // namespace psched
