#pragma once

#include <span>
#include <vector>

#include "psched/env.hpp"
#include "psched/instance.hpp"

namespace psched {

/// Admissible control codes per unit for the current period, ascending.
/// A busy unit admits only its running task; a free unit always admits idle.
struct FeasibleSets {
  std::vector<std::vector<int>> per_unit;

  const std::vector<int>& unit(int l) const { return per_unit[static_cast<std::size_t>(l - 1)]; }
  bool contains(int l, int code) const;
};

FeasibleSets feasible_sets(const PlantState& state, const ProblemInstance& instance);
/// Allocation-free variant; reuses the buffers in `out`.
void feasible_sets(const PlantState& state, const ProblemInstance& instance, FeasibleSets& out);

/// Latent in [0, 6] per unit -> entry nint(latent * (K - 1) / 6) of the unit's
/// list (ties away from zero). Latents outside [0, 6] are clamped.
std::vector<int> round_to_control(std::span<const double> latent, const FeasibleSets& sets);
void round_to_control(std::span<const double> latent, const FeasibleSets& sets, std::span<int> control);

/// Index into a list of length `size` selected by one latent coordinate.
int latent_to_index(double latent, std::size_t size);

struct PenaltyConfig {
  double kappa_g = 250.0;
  int norm = 2;  // 1 or 2

  void validate() const;
};

/// kappa_g * || [g]^+ ||_p with g_i = (#units whose control is task i) - 1.
/// The idle code never counts.
double double_allocation_penalty(std::span<const int> control, int num_tasks, const PenaltyConfig& config);

}  // namespace psched
