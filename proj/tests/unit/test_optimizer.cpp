#include <doctest.h>

#include <cmath>
#include <sstream>

#include "psched/common.hpp"
#include "psched/optimizer.hpp"

using namespace psched;

namespace {

CandidateScore sphere(std::span<const double> x, std::uint64_t) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return {-s, std::nullopt};
}

SwarmConfig small_config(std::uint64_t seed) {
  SwarmConfig c;
  c.population = 20;
  c.iterations = 50;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("population initialization") {
  SwarmConfig c;
  c.c3 = 0.5;
  c.seed = 9;
  const SwarmState a = init_population(c, 6);
  for (double v : a.vmax) CHECK(v == 5.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t d = 0; d < 6; ++d) {
      CHECK(a.positions[i][d] >= -5.0);
      CHECK(a.positions[i][d] <= 5.0);
      CHECK(std::fabs(a.velocities[i][d]) <= 5.0);
    }
  }
  const SwarmState b = init_population(c, 6);
  CHECK(a.positions == b.positions);
  CHECK(a.velocities == b.velocities);

  SwarmConfig flat;
  flat.lower = 1.0;
  flat.upper = 1.0;
  CHECK_THROWS_AS(init_population(flat, 3), ConfigError);
  SwarmConfig tiny_pop;
  tiny_pop.population = 0;
  CHECK_THROWS_AS(init_population(tiny_pop, 3), ConfigError);
}

TEST_CASE("velocity and position update") {
  SwarmConfig c;
  c.omega = 0.5;
  c.c1 = 1.0;
  c.c2 = 1.0;
  std::vector<double> pos{0.0}, vel{1.0};
  const std::vector<double> best{2.0}, r{0.5}, vmax{100.0}, lb{-10.0}, ub{10.0};
  move_particle(pos, vel, best, best, r, r, c, vmax, lb, ub);
  CHECK(vel[0] == doctest::Approx(2.5));
  CHECK(pos[0] == doctest::Approx(2.5));

  // Fixed point: nothing to pull toward and no momentum.
  std::vector<double> p2{1.25, -3.0}, v2{0.0, 0.0};
  const std::vector<double> same = p2, r2{0.7};
  const std::vector<double> vm2{1.0, 1.0}, lb2{-5.0, -5.0}, ub2{5.0, 5.0};
  move_particle(p2, v2, same, same, r2, r2, c, vm2, lb2, ub2);
  CHECK(p2 == same);
  CHECK(v2 == std::vector<double>{0.0, 0.0});

  // Clamp to v_max exactly.
  std::vector<double> p3{0.0}, v3{0.0};
  const std::vector<double> far{9.0}, one{1.0}, vm3{0.75};
  move_particle(p3, v3, far, far, one, one, c, vm3, lb, ub);
  CHECK(v3[0] == 0.75);
  CHECK(p3[0] == 0.75);
}

TEST_CASE("annealing acceptance rule") {
  CHECK(sa_accept(1.0, 0.0, 1e6, false));
  CHECK(sa_accept(1.0, 0.999, 1e6, false));
  CHECK(sa_accept(1.0, 0.999, 1.0, true));
  // Worsening by one unit at T = 1e6: accepted only for z >= exp(-1e-6).
  const double threshold = std::exp(-1e-6);
  CHECK_FALSE(sa_accept(-1.0, 0.5, 1e6, false));
  CHECK_FALSE(sa_accept(-1.0, threshold - 1e-9, 1e6, false));
  CHECK(sa_accept(-1.0, threshold, 1e6, false));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int accepted = 0;
  const int trials = 2000000;
  for (int k = 0; k < trials; ++k) accepted += sa_accept(-1.0, u(rng), 1e6, false);
  CHECK(accepted <= 20);  // expectation is about 2
  // Conventional rule at the same temperature accepts almost everything.
  CHECK(sa_accept(-1.0, 0.5, 1e6, true));
  CHECK_FALSE(sa_accept(-10.0, 0.5, 1.0, true));
}

TEST_CASE("zero annealing step leaves the swarm unchanged") {
  SwarmConfig c = small_config(4);
  c.sa_step_scale = 0.0;
  SwarmState st = init_population(c, 3);
  evaluate_population(st, c, sphere);
  const auto positions = st.positions;
  const auto scores = st.scores;
  const auto gbest = st.global_best;
  const auto rng_before = st.rng;
  sa_step(st, c, sphere);
  CHECK(st.positions == positions);
  CHECK(st.scores == scores);
  CHECK(st.global_best == gbest);
  CHECK(st.rng != rng_before);
}

TEST_CASE("space reduction") {
  SwarmConfig c;
  c.alpha = 0.1;
  SwarmState st = init_population(c, 2);
  st.global_best = {0.0, 0.0};
  st.global_best_score = 0.0;
  reduce_space(st, c);
  CHECK(st.lb[0] == doctest::Approx(-4.5));
  CHECK(st.ub[0] == doctest::Approx(4.5));

  SwarmConfig none;
  none.alpha = 0.0;
  SwarmState s2 = init_population(none, 2);
  s2.global_best = {1.0, 2.0};
  s2.global_best_score = -1.0;
  reduce_space(s2, none);
  CHECK(s2.lb == std::vector<double>{-5.0, -5.0});
  CHECK(s2.ub == std::vector<double>{5.0, 5.0});

  SwarmConfig c3;
  c3.alpha = 0.2;
  SwarmState s3 = init_population(c3, 3);
  s3.global_best = {3.7, -4.9, 0.2};
  s3.global_best_score = -1.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto lb = s3.lb, ub = s3.ub;
    reduce_space(s3, c3);
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(s3.lb[d] >= lb[d]);
      CHECK(s3.ub[d] <= ub[d]);
      CHECK(s3.lb[d] <= s3.global_best[d]);
      CHECK(s3.ub[d] >= s3.global_best[d]);
      for (std::size_t i = 0; i < s3.size(); ++i) {
        CHECK(s3.positions[i][d] >= s3.lb[d]);
        CHECK(s3.positions[i][d] <= s3.ub[d]);
      }
    }
  }
  CHECK(s3.ub[0] - s3.lb[0] < 1e-6);
}

TEST_CASE("sphere benchmark, monotone history and bounds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const OptimizeResult r = optimize(small_config(seed), 2, sphere);
    CHECK(r.best_score >= -1e-2);
    CHECK(r.history.size() == 51);
    for (std::size_t k = 1; k < r.history.size(); ++k)
      CHECK(r.history[k].best_objective >= r.history[k - 1].best_objective);
    for (double v : r.best) CHECK(std::fabs(v) <= 5.0);
  }
}

TEST_CASE("no iterations returns the best initial particle") {
  SwarmConfig c = small_config(3);
  c.iterations = 0;
  const OptimizeResult r = optimize(c, 4, sphere);
  SwarmState st = init_population(c, 4);
  double best = -INFINITY;
  for (const auto& p : st.positions) best = std::max(best, sphere(p, 0).objective);
  CHECK(r.best_score == best);
  CHECK(r.history.size() == 1);
}

TEST_CASE("results do not depend on the worker count") {
  auto noisy = [](std::span<const double> x, std::uint64_t seed) {
    CandidateScore s = sphere(x, seed);
    s.objective -= static_cast<double>(seed % 1000) * 1e-6;
    return s;
  };
  SwarmConfig a = small_config(11);
  a.iterations = 30;
  SwarmConfig b = a;
  b.workers = 4;
  const OptimizeResult ra = optimize(a, 5, noisy);
  const OptimizeResult rb = optimize(b, 5, noisy);
  CHECK(ra.best == rb.best);
  CHECK(ra.best_score == rb.best_score);
  REQUIRE(ra.history.size() == rb.history.size());
  for (std::size_t k = 0; k < ra.history.size(); ++k) CHECK(ra.history[k].best_objective == rb.history[k].best_objective);
}

TEST_CASE("checkpoint resume reproduces an uninterrupted run") {
  SwarmConfig full = small_config(21);
  full.iterations = 40;
  const OptimizeResult straight = optimize(full, 3, sphere);

  SwarmConfig first = full;
  first.iterations = 17;
  nlohmann::json saved;
  optimize(first, 3, sphere, nullptr, [&](const SwarmState& st) { saved = checkpoint_to_json(st); });
  SwarmState restored = checkpoint_from_json(nlohmann::json::parse(saved.dump()));
  CHECK(restored.iteration == 17);
  const OptimizeResult resumed = optimize(full, 3, sphere, &restored);
  CHECK(resumed.best == straight.best);
  CHECK(resumed.best_score == straight.best_score);
  CHECK(resumed.history.size() == straight.history.size());
}

TEST_CASE("failing candidates score minus infinity and the search continues") {
  int calls = 0;
  auto flaky = [&](std::span<const double> x, std::uint64_t seed) -> CandidateScore {
    if (x[0] > 2.0) throw StateError("boom");
    if (x[0] < -2.0) return {std::nan(""), std::nullopt};
    ++calls;
    return sphere(x, seed);
  };
  set_warnings_enabled(false);
  const OptimizeResult r = optimize(small_config(2), 2, flaky);
  set_warnings_enabled(true);
  CHECK(std::isfinite(r.best_score));
  CHECK(r.failed_evaluations > 0);
  CHECK(r.best[0] >= -2.0);
  CHECK(r.best[0] <= 2.0);
}

TEST_CASE("history CSV and overrides") {
  std::vector<HistoryRow> rows(2);
  rows[0].best_objective = -3.5;
  rows[1].iteration = 1;
  rows[1].best_objective = -2.0;
  std::ostringstream out;
  write_history_csv(out, rows);
  const std::string text = out.str();
  CHECK(text.rfind("iteration,best_J,mean,std,var_beta,cvar_beta,f_lb\n", 0) == 0);
  CHECK(text.find("\n1,-2") != std::string::npos);

  SwarmConfig c;
  apply_override(c, "omega", "0.9");
  apply_override(c, "pop", "12");
  apply_override(c, "metropolis", "true");
  CHECK(c.omega == 0.9);
  CHECK(c.population == 12);
  CHECK(c.metropolis);
  CHECK_THROWS_AS(apply_override(c, "gamma", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "omega", "fast"), ConfigError);
}
