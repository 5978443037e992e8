#include "psched/rollout.hpp"

#include <random>

#include <json.hpp>

#include "psched/common.hpp"

namespace psched {

using nlohmann::json;

FeasibleSets unmasked_sets(const PlantState& state, const ProblemInstance& instance) {
  FeasibleSets sets;
  sets.per_unit.resize(static_cast<std::size_t>(instance.num_units()));
  for (int l = 1; l <= instance.num_units(); ++l) {
    auto& list = sets.per_unit[static_cast<std::size_t>(l - 1)];
    for (int i : instance.eligible_tasks(l)) {
      if (!state.finished[static_cast<std::size_t>(i - 1)]) list.push_back(i);
    }
    list.push_back(instance.idle_code());
  }
  return sets;
}

std::vector<ScheduleEvent> schedule_events(const PlantState& state) {
  std::vector<ScheduleEvent> events;
  events.reserve(state.campaigns.size());
  for (const CampaignRecord& c : state.campaigns) {
    ScheduleEvent e;
    e.unit = c.unit;
    e.task = c.task;
    e.start_period = c.start_period;
    e.setup_periods = c.setup_periods;
    e.batch_completion_periods = c.batch_completion_periods;
    e.batches_done = c.batches_done;
    e.completed = c.complete();
    e.aborted = c.aborted;
    events.push_back(std::move(e));
  }
  return events;
}

EpisodeResult run_episode(const Policy& policy, const ProblemInstance& instance, const Scenario& scenario,
                          const RolloutOptions& options) {
  check_compatible(policy.spec(), instance);
  EnvOptions env = options.env;
  if (!options.mask) env.allow_preemption = true;

  PlantState state = initial_state(instance, scenario);
  HiddenState hidden = policy.initial_hidden();
  const auto nu = static_cast<std::size_t>(instance.num_units());
  std::vector<double> features(static_cast<std::size_t>(instance.state_dim()));
  std::vector<double> latent(nu);
  std::vector<int> control(nu);
  FeasibleSets sets;

  EpisodeResult result;
  while (!state.done) {
    if (options.mask) {
      feasible_sets(state, instance, sets);
    } else {
      sets = unmasked_sets(state, instance);
    }
    normalize_state(state, instance, features, policy.spec().normalize_inputs);
    policy.forward(features, hidden, latent);
    round_to_control(latent, sets, control);
    const double penalty = double_allocation_penalty(control, instance.num_tasks(), options.penalty);
    result.total_penalty += penalty;
    if (penalty > 0.0) result.violated = true;

    const std::size_t campaigns_before = state.campaigns.size();
    const int finished_before = state.num_finished;
    const int t = state.t;
    const StepResult sr = step(state, control, scenario, instance, env);
    result.raw_return += sr.reward;
    if (options.record_controls) result.controls.push_back(control);

    if (options.trace != nullptr) {
      json started = json::array();
      for (std::size_t k = campaigns_before; k < state.campaigns.size(); ++k) {
        const CampaignRecord& c = state.campaigns[k];
        started.push_back({{"unit", c.unit}, {"task", c.task}, {"setup", c.setup_periods}});
      }
      json finished = json::array();
      if (state.num_finished != finished_before) {
        for (int i = 0; i < instance.num_tasks(); ++i) {
          if (state.finished[static_cast<std::size_t>(i)] && state.finish_period[static_cast<std::size_t>(i)] == state.t) {
            finished.push_back(i + 1);
          }
        }
      }
      json rec{{"t", t},
               {"control", control},
               {"latent", latent},
               {"penalty", penalty},
               {"reward", sr.reward},
               {"state", state.observation()},
               {"started", std::move(started)},
               {"finished", std::move(finished)},
               {"done", sr.done}};
      *options.trace << rec.dump() << '\n';
    }
  }
  result.penalized_return = result.raw_return - result.total_penalty;
  const EpisodeOutcome outcome = makespan_and_tardiness(state);
  result.makespan = outcome.makespan;
  result.tardiness = outcome.tardiness;
  result.schedule_events = schedule_events(state);
  return result;
}

int ReturnSamples::successes() const {
  int s = 0;
  for (char c : success) s += c != 0;
  return s;
}

Scenario scenario_for_sample(const ProblemInstance& instance, const UncertaintyConfig& uncertainty, bool misspecify,
                             std::uint64_t base_seed, std::size_t index) {
  if (!uncertainty.processing_uncertain && !uncertainty.due_uncertain) return nominal_scenario(instance);
  std::mt19937_64 rng(derive_seed(base_seed, {static_cast<std::uint64_t>(index)}));
  return sample_scenario(instance, uncertainty, misspecify, rng);
}

ReturnSamples evaluate_policy(const Policy& policy, const ProblemInstance& instance, const UncertaintyConfig& uncertainty,
                              int n, std::uint64_t base_seed, const EvaluationOptions& options) {
  if (n < 1) throw ConfigError("need at least one evaluation sample");
  uncertainty.validate();
  check_compatible(policy.spec(), instance);
  const auto count = static_cast<std::size_t>(n);
  ReturnSamples out;
  out.z_phi.resize(count);
  out.z.resize(count);
  out.success.resize(count);
  out.seeds.resize(count);
  if (options.keep_episodes) out.episodes.resize(count);
  RolloutOptions rollout = options.rollout;
  rollout.trace = nullptr;  // a shared stream cannot take concurrent episodes
  parallel_for(count, options.workers, [&](std::size_t k) {
    const Scenario sc = scenario_for_sample(instance, uncertainty, options.misspecify, base_seed, k);
    EpisodeResult r = run_episode(policy, instance, sc, rollout);
    out.z_phi[k] = r.penalized_return;
    out.z[k] = r.raw_return;
    out.success[k] = r.violated ? 0 : 1;
    out.seeds[k] = derive_seed(base_seed, {static_cast<std::uint64_t>(k)});
    if (options.keep_episodes) out.episodes[k] = std::move(r);
  });
  return out;
}

}  // namespace psched
