#include "psched/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "psched/common.hpp"

namespace psched {

using nlohmann::json;

void UncertaintyConfig::validate() const {
  if (c < 0) throw ConfigError("uncertainty half-width c must be >= 0");
  if (k_pt < 0 || k_dd < 0) throw ConfigError("misspecification constants must be >= 0");
  if (due_confirm_lead_periods < 0) throw ConfigError("due-date confirmation lead must be >= 0");
}

namespace {

std::size_t cell_index(int task, int unit, int num_units) {
  return static_cast<std::size_t>(task - 1) * static_cast<std::size_t>(num_units) + static_cast<std::size_t>(unit - 1);
}

Scenario empty_scenario(const ProblemInstance& instance) {
  Scenario s;
  s.num_tasks = instance.num_tasks();
  s.num_units = instance.num_units();
  s.batch_periods.assign(static_cast<std::size_t>(s.num_tasks) * static_cast<std::size_t>(s.num_units), {});
  s.confirmed_due_periods.assign(static_cast<std::size_t>(s.num_tasks), 0);
  s.confirm_at_period.assign(static_cast<std::size_t>(s.num_tasks), 0);
  return s;
}

}  // namespace

Scenario nominal_scenario(const ProblemInstance& instance) {
  Scenario s = empty_scenario(instance);
  for (int i = 1; i <= s.num_tasks; ++i) {
    for (int l : instance.eligible_units(i)) {
      s.batch_periods[cell_index(i, l, s.num_units)].assign(
          static_cast<std::size_t>(instance.batches_required(i, l)), instance.proc_periods(i, l));
    }
    s.confirmed_due_periods[static_cast<std::size_t>(i - 1)] = instance.due_periods(i);
  }
  return s;
}

Scenario sample_scenario(const ProblemInstance& instance, const UncertaintyConfig& config, bool misspecify,
                         std::mt19937_64& rng) {
  config.validate();
  Scenario s = nominal_scenario(instance);
  s.processing_uncertain = config.processing_uncertain;
  s.due_uncertain = config.due_uncertain;

  if (config.processing_uncertain) {
    const int half = config.c + (misspecify ? config.k_pt : 0);
    for (int i = 1; i <= s.num_tasks; ++i) {
      for (int l : instance.eligible_units(i)) {
        const int expected = instance.proc_periods(i, l);
        std::uniform_int_distribution<int> duration(std::max(1, expected - half), expected + half);
        for (int& p : s.batch_periods[cell_index(i, l, s.num_units)]) p = duration(rng);
      }
    }
  }

  if (config.due_uncertain) {
    const double dt = instance.dt_days();
    std::uniform_real_distribution<double> shift(-1.0, 1.0);
    for (int i = 1; i <= s.num_tasks; ++i) {
      double rate = instance.task(i).due_date_days;
      if (misspecify) {
        rate += config.k_dd * shift(rng);
        if (rate <= 0.0) {
          std::ostringstream os;
          os << "misspecified due-date rate " << rate << " for T" << i << " clamped to 1 day";
          warn(os.str());
          rate = 1.0;
        }
      }
      std::poisson_distribution<int> due_days(rate);
      const int days = due_days(rng);
      const auto idx = static_cast<std::size_t>(i - 1);
      s.confirmed_due_periods[idx] = static_cast<int>(std::lround(days / dt));
      s.confirm_at_period[idx] = std::max(0, instance.due_periods(i) - config.due_confirm_lead_periods);
    }
  }
  return s;
}

json scenario_to_json(const Scenario& scenario) {
  json batches = json::array();
  for (int i = 1; i <= scenario.num_tasks; ++i) {
    for (int l = 1; l <= scenario.num_units; ++l) {
      const auto& b = scenario.batches(i, l);
      if (!b.empty()) batches.push_back({{"task", i}, {"unit", l}, {"periods", b}});
    }
  }
  return {{"schema_version", 1},
          {"num_tasks", scenario.num_tasks},
          {"num_units", scenario.num_units},
          {"processing_uncertain", scenario.processing_uncertain},
          {"due_uncertain", scenario.due_uncertain},
          {"batch_periods", std::move(batches)},
          {"confirmed_due_periods", scenario.confirmed_due_periods},
          {"confirm_at_period", scenario.confirm_at_period}};
}

Scenario scenario_from_json(const json& doc) {
  try {
    Scenario s;
    s.num_tasks = doc.at("num_tasks").get<int>();
    s.num_units = doc.at("num_units").get<int>();
    if (s.num_tasks < 1 || s.num_units < 1) throw ParseError("scenario: non-positive dimensions");
    s.processing_uncertain = doc.at("processing_uncertain").get<bool>();
    s.due_uncertain = doc.at("due_uncertain").get<bool>();
    s.batch_periods.assign(static_cast<std::size_t>(s.num_tasks) * static_cast<std::size_t>(s.num_units), {});
    for (const json& e : doc.at("batch_periods")) {
      const int i = e.at("task").get<int>();
      const int l = e.at("unit").get<int>();
      if (i < 1 || i > s.num_tasks || l < 1 || l > s.num_units) throw ParseError("scenario: cell out of range");
      s.batch_periods[cell_index(i, l, s.num_units)] = e.at("periods").get<std::vector<int>>();
    }
    s.confirmed_due_periods = doc.at("confirmed_due_periods").get<std::vector<int>>();
    s.confirm_at_period = doc.at("confirm_at_period").get<std::vector<int>>();
    if (s.confirmed_due_periods.size() != static_cast<std::size_t>(s.num_tasks) ||
        s.confirm_at_period.size() != static_cast<std::size_t>(s.num_tasks)) {
      throw ParseError("scenario: due-date arrays do not match num_tasks");
    }
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

int PlantState::active_task(int unit) const {
  const UnitStatus& u = units[static_cast<std::size_t>(unit - 1)];
  return u.busy() ? campaigns[static_cast<std::size_t>(u.active_campaign)].task : 0;
}

std::vector<double> PlantState::observation() const {
  std::vector<double> x(static_cast<std::size_t>(2 * num_tasks() + 2 * num_units() + 1));
  observation(x);
  return x;
}

void PlantState::observation(std::span<double> out) const {
  const std::size_t n = inventory.size();
  const std::size_t nu = units.size();
  if (out.size() != 2 * n + 2 * nu + 1) throw StateError("observation buffer has the wrong size");
  std::size_t k = 0;
  for (double v : inventory) out[k++] = v;
  for (int v : last_control) out[k++] = v;
  for (int v : countdown) out[k++] = v;
  for (int v : due_countdown) out[k++] = v;
  out[k] = t;
}

PlantState initial_state(const ProblemInstance& instance, const Scenario& scenario) {
  const int n = instance.num_tasks();
  const int nu = instance.num_units();
  if (scenario.num_tasks != n || scenario.num_units != nu) {
    throw StateError("scenario dimensions do not match the instance");
  }
  PlantState s;
  s.inventory.assign(static_cast<std::size_t>(n), 0.0);
  s.last_control.assign(static_cast<std::size_t>(nu), instance.idle_code());
  s.countdown.resize(static_cast<std::size_t>(nu));
  for (int l = 1; l <= nu; ++l) s.countdown[static_cast<std::size_t>(l - 1)] = instance.unit_release_periods(l);
  s.due_countdown.resize(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const auto idx = static_cast<std::size_t>(i - 1);
    s.due_countdown[idx] = instance.due_periods(i);
    if (scenario.due_uncertain && scenario.confirm_at_period[idx] == 0) {
      s.due_countdown[idx] = scenario.confirmed_due_periods[idx];
    }
  }
  s.finished.assign(static_cast<std::size_t>(n), 0);
  s.finish_period.assign(static_cast<std::size_t>(n), -1);
  s.units.assign(static_cast<std::size_t>(nu), UnitStatus{});
  return s;
}

int setup_time(const PlantState& state, const ProblemInstance& instance, int task, int unit) {
  if (!instance.eligible(task, unit)) {
    throw EligibilityError("T" + std::to_string(task) + " is not eligible on unit " + std::to_string(unit));
  }
  const UnitStatus& u = state.units[static_cast<std::size_t>(unit - 1)];
  if (u.busy()) throw StateError("setup_time requires an idle unit");
  const int t = state.t;
  const int release_wait = std::max({0, instance.task_release_periods(task) - t, instance.unit_release_periods(unit) - t});
  if (u.last_task == 0) return release_wait;
  const int cleaning_wait = instance.cleaning_periods(u.last_task, task, unit) + u.last_finish_period - t;
  return std::max(release_wait, cleaning_wait);
}

double terminal_reward(const PlantState& state, const RewardWeights& w) {
  double r = 0.0;
  for (double v : state.inventory) r += w.inventory * v;
  for (int v : state.last_control) r += w.last_control * v;
  for (int v : state.countdown) r += w.countdown * v;
  for (int v : state.due_countdown) r += w.due * v;
  return r + w.time * state.t;
}

StepResult step(PlantState& state, std::span<const int> control, const Scenario& scenario,
                const ProblemInstance& instance, const EnvOptions& options) {
  const int n = instance.num_tasks();
  const int nu = instance.num_units();
  const int idle = instance.idle_code();
  if (state.done) throw StateError("step called on a terminated episode");
  if (state.t >= instance.horizon()) throw StateError("step called at the end of the horizon");
  if (control.size() != static_cast<std::size_t>(nu)) throw StateError("control vector has the wrong length");
  for (int code : control) {
    if (code < 1 || code > idle) throw StateError("control code " + std::to_string(code) + " out of range");
  }

  const int t = state.t;

  // Campaign starts (and, if enabled, preemption of running campaigns).
  for (int l = 1; l <= nu; ++l) {
    const auto li = static_cast<std::size_t>(l - 1);
    const int code = control[li];
    UnitStatus& unit = state.units[li];
    if (unit.busy()) {
      CampaignRecord& running = state.campaigns[static_cast<std::size_t>(unit.active_campaign)];
      if (code == running.task) continue;
      if (!options.allow_preemption) {
        throw StateError("unit " + std::to_string(l) + " is busy with T" + std::to_string(running.task) +
                         " and cannot take control " + std::to_string(code));
      }
      if (code == idle) continue;
      // The campaign indicator is cleared retroactively: its output never happened.
      running.aborted = true;
      state.inventory[static_cast<std::size_t>(running.task - 1)] -=
          running.batches_done * instance.batch_size(running.task, l);
      unit.active_campaign = -1;
    }
    if (code == idle) continue;
    if (state.finished[static_cast<std::size_t>(code - 1)]) {
      throw StateError("T" + std::to_string(code) + " is already finished");
    }
    const int setup = setup_time(state, instance, code, l);
    CampaignRecord rec;
    rec.task = code;
    rec.unit = l;
    rec.start_period = t;
    rec.setup_periods = setup;
    const std::vector<int>& durations = scenario.batches(code, l);
    rec.batch_completion_periods.reserve(durations.size());
    int clock = t + setup;
    for (int p : durations) {
      clock += p;
      rec.batch_completion_periods.push_back(clock);
    }
    state.countdown[li] = setup + instance.batches_required(code, l) * instance.proc_periods(code, l);
    unit.active_campaign = static_cast<int>(state.campaigns.size());
    state.campaigns.push_back(std::move(rec));
  }

  const int next = t + 1;
  // Batch completions.
  for (int l = 1; l <= nu; ++l) {
    const auto li = static_cast<std::size_t>(l - 1);
    state.countdown[li] -= 1;
    UnitStatus& unit = state.units[li];
    if (!unit.busy()) continue;
    CampaignRecord& c = state.campaigns[static_cast<std::size_t>(unit.active_campaign)];
    const int planned = c.batches_planned();
    bool progressed = false;
    while (c.batches_done < planned && c.batch_completion_periods[static_cast<std::size_t>(c.batches_done)] <= next) {
      state.inventory[static_cast<std::size_t>(c.task - 1)] += instance.batch_size(c.task, l);
      ++c.batches_done;
      progressed = true;
    }
    if (progressed) {
      // Unfinished batches are still only known by their expected duration.
      state.countdown[li] = (planned - c.batches_done) * instance.proc_periods(c.task, l);
    }
    if (c.batches_done == planned) {
      const auto ti = static_cast<std::size_t>(c.task - 1);
      if (!state.finished[ti]) {
        state.finished[ti] = 1;
        state.finish_period[ti] = next;
        ++state.num_finished;
      }
      unit.last_task = c.task;
      unit.last_finish_period = next;
      unit.active_campaign = -1;
    }
  }

  for (int l = 0; l < nu; ++l) state.last_control[static_cast<std::size_t>(l)] = control[static_cast<std::size_t>(l)];

  for (int i = 0; i < n; ++i) {
    const auto ti = static_cast<std::size_t>(i);
    int& rho = state.due_countdown[ti];
    if (state.finished[ti] && state.finish_period[ti] < next) {
      rho = std::min(0, rho);
    } else if (state.finished[ti]) {
      rho = std::min(0, rho - 1);
    } else {
      rho -= 1;
      if (scenario.due_uncertain && scenario.confirm_at_period[ti] == next) {
        rho = scenario.confirmed_due_periods[ti] - next;
      }
    }
  }

  state.t = next;
  StepResult result;
  result.done = next >= instance.horizon() || state.all_finished();
  state.done = result.done;
  if (result.done) result.reward = terminal_reward(state, options.reward);
  return result;
}

EpisodeOutcome makespan_and_tardiness(const PlantState& final_state) {
  if (!final_state.done) throw StateError("episode has not terminated");
  EpisodeOutcome out;
  out.makespan = final_state.t;
  out.tardiness.reserve(final_state.due_countdown.size());
  for (int rho : final_state.due_countdown) out.tardiness.push_back(std::max(0, -rho));
  return out;
}

}  // namespace psched
