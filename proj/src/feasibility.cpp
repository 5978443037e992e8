#include "psched/feasibility.hpp"

#include <algorithm>
#include <cmath>

#include "psched/common.hpp"

namespace psched {

bool FeasibleSets::contains(int l, int code) const {
  const auto& list = unit(l);
  return std::binary_search(list.begin(), list.end(), code);
}

FeasibleSets feasible_sets(const PlantState& state, const ProblemInstance& instance) {
  FeasibleSets out;
  feasible_sets(state, instance, out);
  return out;
}

void feasible_sets(const PlantState& state, const ProblemInstance& instance, FeasibleSets& out) {
  const int nu = instance.num_units();
  out.per_unit.resize(static_cast<std::size_t>(nu));
  for (int l = 1; l <= nu; ++l) {
    auto& list = out.per_unit[static_cast<std::size_t>(l - 1)];
    list.clear();
    const UnitStatus& u = state.units[static_cast<std::size_t>(l - 1)];
    if (u.busy()) {
      list.push_back(state.campaigns[static_cast<std::size_t>(u.active_campaign)].task);
      continue;
    }
    for (int i : instance.eligible_tasks(l)) {
      if (state.finished[static_cast<std::size_t>(i - 1)]) continue;
      if (u.last_task != 0 && !instance.is_successor(u.last_task, i)) continue;
      list.push_back(i);
    }
    list.push_back(instance.idle_code());
  }
}

int latent_to_index(double latent, std::size_t size) {
  if (size == 0) throw StateError("empty feasible list");
  const double clamped = std::clamp(latent, 0.0, 6.0);
  const double scaled = clamped * static_cast<double>(size - 1) / 6.0;
  const auto idx = static_cast<long>(std::round(scaled));
  return static_cast<int>(std::clamp<long>(idx, 0, static_cast<long>(size - 1)));
}

void round_to_control(std::span<const double> latent, const FeasibleSets& sets, std::span<int> control) {
  if (latent.size() != sets.per_unit.size() || control.size() != sets.per_unit.size()) {
    throw StateError("latent, feasible sets and control differ in length");
  }
  for (std::size_t l = 0; l < latent.size(); ++l) {
    const auto& list = sets.per_unit[l];
    control[l] = list[static_cast<std::size_t>(latent_to_index(latent[l], list.size()))];
  }
}

std::vector<int> round_to_control(std::span<const double> latent, const FeasibleSets& sets) {
  std::vector<int> control(latent.size());
  round_to_control(latent, sets, control);
  return control;
}

void PenaltyConfig::validate() const {
  if (!(kappa_g >= 0.0)) throw ConfigError("kappa_g must be >= 0");
  if (norm != 1 && norm != 2) throw ConfigError("penalty norm must be 1 or 2");
}

double double_allocation_penalty(std::span<const int> control, int num_tasks, const PenaltyConfig& config) {
  double acc = 0.0;
  for (std::size_t a = 0; a < control.size(); ++a) {
    const int task = control[a];
    if (task < 1 || task > num_tasks) continue;
    bool counted_before = false;
    for (std::size_t b = 0; b < a; ++b) counted_before = counted_before || control[b] == task;
    if (counted_before) continue;
    int uses = 1;
    for (std::size_t b = a + 1; b < control.size(); ++b) uses += control[b] == task;
    const double excess = uses - 1;
    acc += config.norm == 1 ? excess : excess * excess;
  }
  if (acc == 0.0) return 0.0;
  return config.kappa_g * (config.norm == 1 ? acc : std::sqrt(acc));
}

}  // namespace psched
