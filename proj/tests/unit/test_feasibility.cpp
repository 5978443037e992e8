#include <doctest.h>

#include <cmath>
#include <random>

#include "psched/common.hpp"
#include "psched/env.hpp"
#include "psched/feasibility.hpp"
#include "psched/instance.hpp"

using namespace psched;

namespace {
PlantState fresh(const ProblemInstance& inst) { return initial_state(inst, nominal_scenario(inst)); }
}  // namespace

TEST_CASE("feasible sets at the start of instance1") {
  const ProblemInstance inst = builtin_instance("instance1");
  const FeasibleSets sets = feasible_sets(fresh(inst), inst);
  CHECK(sets.unit(1) == std::vector<int>{1, 3, 6, 9});
  CHECK(sets.unit(2) == std::vector<int>{4, 5, 6, 9});
  CHECK(sets.unit(3) == std::vector<int>{2, 3, 7, 9});
  CHECK(sets.unit(4) == std::vector<int>{5, 7, 8, 9});
  CHECK(sets.contains(1, 6));
  CHECK_FALSE(sets.contains(1, 2));
}

TEST_CASE("successor restriction after a finished task") {
  const ProblemInstance inst = builtin_instance("instance1");
  const Scenario sc = nominal_scenario(inst);
  PlantState s = fresh(inst);
  std::vector<int> u{1, 9, 9, 9};
  for (int k = 0; k < 28; ++k) step(s, u, sc, inst);
  REQUIRE(s.finished[0]);
  CHECK(s.finish_period[0] == 28);
  CHECK(feasible_sets(s, inst).unit(1) == std::vector<int>{6, 9});
}

TEST_CASE("busy unit is locked to its task") {
  const ProblemInstance inst = builtin_instance("instance1");
  const Scenario sc = nominal_scenario(inst);
  PlantState s = fresh(inst);
  step(s, std::vector<int>{9, 4, 9, 9}, sc, inst);
  CHECK(feasible_sets(s, inst).unit(2) == std::vector<int>{4});
}

TEST_CASE("finished tasks leave every list") {
  const ProblemInstance inst = builtin_instance("instance1");
  const Scenario sc = nominal_scenario(inst);
  PlantState s = fresh(inst);
  std::vector<int> u{9, 9, 9, 5};
  while (!s.finished[4]) step(s, u, sc, inst);
  const FeasibleSets sets = feasible_sets(s, inst);
  CHECK(sets.unit(2) == std::vector<int>{4, 6, 9});
  for (int l = 1; l <= 4; ++l) CHECK_FALSE(sets.contains(l, 5));
}

TEST_CASE("latent rounding") {
  FeasibleSets sets;
  sets.per_unit = {{1, 3, 6, 9}};
  CHECK(round_to_control(std::vector<double>{0.0}, sets) == std::vector<int>{1});
  CHECK(round_to_control(std::vector<double>{6.0}, sets) == std::vector<int>{9});
  CHECK(round_to_control(std::vector<double>{3.0}, sets) == std::vector<int>{6});  // 1.5 rounds away from zero
  CHECK(round_to_control(std::vector<double>{2.99}, sets) == std::vector<int>{3});
  CHECK(round_to_control(std::vector<double>{-1.0}, sets) == std::vector<int>{1});
  CHECK(round_to_control(std::vector<double>{7.5}, sets) == std::vector<int>{9});
  CHECK_THROWS_AS(round_to_control(std::vector<double>{1.0, 2.0}, sets), StateError);
  CHECK_THROWS_AS(latent_to_index(1.0, 0), StateError);
  CHECK(latent_to_index(5.0, 1) == 0);
}

TEST_CASE("rounding is surjective and monotone") {
  for (std::size_t k = 1; k <= 17; ++k) {
    std::vector<int> hits(k, 0);
    for (std::size_t j = 0; j < k; ++j) {
      const double latent = k == 1 ? 0.0 : 6.0 * static_cast<double>(j) / static_cast<double>(k - 1);
      ++hits[static_cast<std::size_t>(latent_to_index(latent, k))];
    }
    for (int h : hits) CHECK(h >= 1);
    int prev = 0;
    for (int step = 0; step <= 6000; ++step) {
      const int idx = latent_to_index(step / 1000.0, k);
      CHECK(idx >= prev);
      prev = idx;
    }
  }
}

TEST_CASE("double allocation penalty") {
  PenaltyConfig cfg;
  CHECK(double_allocation_penalty(std::vector<int>{1, 3, 9, 9}, 8, cfg) == 0.0);
  CHECK(double_allocation_penalty(std::vector<int>{5, 5, 9, 9}, 8, cfg) == 250.0);
  CHECK(double_allocation_penalty(std::vector<int>{5, 5, 7, 7}, 8, cfg) == doctest::Approx(250.0 * std::sqrt(2.0)));
  CHECK(double_allocation_penalty(std::vector<int>{5, 5, 5, 9}, 8, cfg) == 500.0);
  cfg.norm = 1;
  CHECK(double_allocation_penalty(std::vector<int>{5, 5, 7, 7}, 8, cfg) == 500.0);
  cfg.norm = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.kappa_g = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("penalty is zero exactly when no real task repeats") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> code(1, 9);
  PenaltyConfig cfg;
  for (int rep = 0; rep < 2000; ++rep) {
    std::vector<int> u(4);
    for (int& v : u) v = code(rng);
    bool dup = false;
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = a + 1; b < 4; ++b) dup = dup || (u[a] == u[b] && u[a] <= 8);
    CHECK((double_allocation_penalty(u, 8, cfg) > 0.0) == dup);
  }
}
