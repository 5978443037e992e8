#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "psched/common.hpp"
#include "psched/harness.hpp"

using namespace psched;
namespace fs = std::filesystem;

namespace {

struct Row {
  const char* id;
  bool processing, due, release;
};

// processing / due / release factors of the study design, transcribed by hand.
const Row kDesign[] = {
    {"1", false, false, false}, {"2", false, false, true}, {"3", false, true, false}, {"4", false, true, true},
    {"5", true, false, false},  {"6", true, false, true},  {"7", true, true, false},  {"8", true, true, true},
};

// Start tags minus end tags, ignoring self-closing tags and the prolog.
int tag_balance(const std::string& xml) {
  int depth = 0;
  for (std::size_t i = 0; i < xml.size(); ++i) {
    if (xml[i] != '<') continue;
    const std::size_t close = xml.find('>', i);
    REQUIRE(close != std::string::npos);
    if (xml[i + 1] == '?') {
    } else if (xml[i + 1] == '/') {
      --depth;
    } else if (xml[close - 1] != '/') {
      ++depth;
    }
    CHECK(depth >= 0);
    i = close;
  }
  return depth;
}

SwarmConfig quick_swarm() {
  SwarmConfig s;
  s.population = 8;
  s.iterations = 3;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("experiment table") {
  for (const Row& r : kDesign) {
    const ExperimentConfig e = experiment_config(std::string("E") + r.id);
    CHECK(e.processing_uncertain == r.processing);
    CHECK(e.due_uncertain == r.due);
    CHECK(e.finite_release == r.release);
    CHECK(e.objective.kind == ObjectiveKind::MeanPenalized);
    CHECK(e.train_samples == ((r.processing || r.due) ? 50 : 1));
    CHECK(e.validation_samples == 500);
    if (r.id[0] >= '3') {
      const ExperimentConfig d = experiment_config(std::string("D") + r.id);
      CHECK(d.processing_uncertain == r.processing);
      CHECK(d.due_uncertain == r.due);
      CHECK(d.finite_release == r.release);
      CHECK(d.objective.kind == ObjectiveKind::CVaRPenalized);
      CHECK(d.objective.beta == 0.2);
      CHECK(d.train_samples == 50);
    }
  }
  const int misspec[8][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 0}, {2, 1}, {2, 2}};
  for (int k = 0; k < 8; ++k) {
    const ExperimentConfig m = experiment_config("M" + std::to_string(k + 1));
    CHECK(m.misspecify);
    CHECK(m.trained_on == "E8");
    CHECK(m.k_pt == misspec[k][0]);
    CHECK(m.k_dd == misspec[k][1]);
    CHECK(m.validation_uncertainty().k_pt == misspec[k][0]);
    CHECK(m.training_uncertainty().k_pt == 0);
  }
  CHECK(experiment_ids().size() == 22);
  CHECK_THROWS_AS(experiment_config("D1"), LookupError);
  CHECK_THROWS_AS(experiment_config("E9"), LookupError);
  CHECK_THROWS_AS(experiment_config("X3"), LookupError);
}

TEST_CASE("invalid factor combinations are configuration errors") {
  ExperimentConfig d = experiment_config("D8");
  d.processing_uncertain = d.due_uncertain = false;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  ExperimentConfig e = experiment_config("E1");
  CHECK(apply_experiment_override(e, "objective", "cvar"));
  CHECK_THROWS_AS(e.validate(), ConfigError);
  CHECK_THROWS_AS(train_policy(e, 1, TrainingOptions{quick_swarm()}), ConfigError);
  CHECK_THROWS_AS(train_policy(experiment_config("M6"), 1, TrainingOptions{quick_swarm()}), ConfigError);
  ExperimentConfig s = experiment_config("E8");
  CHECK(apply_experiment_override(s, "samples", "7"));
  CHECK(s.train_samples == 7);
  CHECK_FALSE(apply_experiment_override(s, "omega", "0.9"));
  CHECK_THROWS_AS(apply_experiment_override(s, "samples", "many"), ConfigError);
}

TEST_CASE("release factor strips release times") {
  const ProblemInstance with = experiment_instance(experiment_config("E2"));
  const ProblemInstance without = experiment_instance(experiment_config("E1"));
  int released = 0;
  for (int t = 1; t <= with.num_tasks(); ++t) {
    released += with.task_release_periods(t) > 0;
    CHECK(without.task_release_periods(t) == 0);
  }
  CHECK(released > 0);
  CHECK_THROWS_AS(resolve_instance("instance9"), LookupError);
}

TEST_CASE("deterministic training and validation") {
  const ExperimentConfig e1 = experiment_config("E1");
  TrainingOptions opts{quick_swarm()};
  const TrainingResult a = train_policy(e1, 5, opts);
  opts.workers = 3;
  const TrainingResult b = train_policy(e1, 5, opts);
  CHECK(a.policy.theta() == b.policy.theta());
  CHECK(a.search.best_score == b.search.best_score);

  const ValidationReport r = validate_policy(a.policy, e1, 500, validation_seed(5));
  CHECK(r.summary.std == 0.0);
  CHECK(r.summary.n_samples == 500);
  for (double z : r.raw_returns) CHECK(z == r.raw_returns[0]);
  if (r.summary.successes == 500) CHECK(r.summary.f_lb == doctest::Approx(0.99989741867).epsilon(1e-9));
  CHECK(r.episodes_with_hard_violations == 0);
  const ValidationReport again = validate_policy(a.policy, e1, 500, validation_seed(5), {4, {}});
  CHECK(to_json(again).dump() == to_json(r).dump());
  CHECK(validation_seed(5) != 5);
}

TEST_CASE("stochastic validation is seeded and respects the mask") {
  const ExperimentConfig e8 = experiment_config("E8");
  const Policy p = train_policy(e8, 2, TrainingOptions{quick_swarm()}).policy;
  const ValidationReport a = validate_policy(p, e8, 100, 77);
  const ValidationReport b = validate_policy(p, e8, 100, 77, {3, {}});
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.episodes_with_hard_violations == 0);
  CHECK(a.summary.cvar_beta <= a.summary.mean);
  const ValidationReport m = validate_policy(p, experiment_config("M8"), 100, 77);
  CHECK(m.raw_returns != a.raw_returns);
  const ExperimentConfig other = experiment_config("E1", "instance2");
  CHECK_THROWS_AS(validate_policy(p, other, 10, 1), ConfigError);
}

TEST_CASE("Gantt chart") {
  const ProblemInstance inst = builtin_instance("instance2");
  ScheduleEvent t1;
  t1.unit = 1;
  t1.task = 1;
  for (int k = 1; k <= 7; ++k) t1.batch_completion_periods.push_back(4 * k);
  t1.batches_done = 7;
  t1.completed = true;
  EpisodeResult ep;
  ep.makespan = 28;
  ep.schedule_events = {t1};
  const std::string svg = export_gantt(ep, inst);
  CHECK(svg.find(R"(data-task="1" data-start-day="0.00" data-end-day="14.00")") != std::string::npos);
  CHECK(svg.find(">T1</text>") != std::string::npos);
  CHECK(svg.find("time (days)") != std::string::npos);
  CHECK(tag_balance(svg) == 0);

  EpisodeResult idle;
  idle.makespan = 200;
  const std::string empty = export_gantt(idle, inst);
  const std::regex lane(R"(class="lane")");
  CHECK(std::distance(std::sregex_iterator(empty.begin(), empty.end(), lane), std::sregex_iterator()) == 4);
  CHECK(empty.find(R"(class="campaign")") == std::string::npos);
  CHECK(tag_balance(empty) == 0);

  ScheduleEvent with_setup = t1;
  with_setup.setup_periods = 3;
  for (int& c : with_setup.batch_completion_periods) c += 3;
  ep.schedule_events = {with_setup};
  ep.makespan = 31;
  const std::string hatched = export_gantt(ep, inst);
  CHECK(hatched.find(R"(class="setup")") != std::string::npos);
  CHECK(hatched.find("data-start-day=\"1.50\"") != std::string::npos);
}

TEST_CASE("decision latency") {
  const ProblemInstance inst = builtin_instance("instance2");
  const NetworkSpec spec = network_for(inst);
  const Policy p(spec, std::vector<double>(param_count(spec), 0.1));
  CHECK_THROWS_AS(measure_decision_latency(p, inst, 0), ConfigError);
  const LatencyStats s = measure_decision_latency(p, inst, 2000);
  CHECK(s.n == 2000);
  CHECK(s.p50_us <= s.p95_us);
  CHECK(s.p95_us <= s.max_us);
  CHECK(s.mean_us > 0.0);
  CHECK_THROWS_AS(measure_decision_latency(p, builtin_instance("instance1"), 10), ConfigError);
}

TEST_CASE("experiment run writes every artifact") {
  const fs::path dir = fs::temp_directory_path() / "psched_harness_test";
  fs::remove_all(dir);
  ExperimentConfig e2 = experiment_config("E2");
  e2.validation_samples = 20;
  const ExperimentResult r = run_experiment(e2, 3, TrainingOptions{quick_swarm()}, dir.string());
  for (const char* f : {"policy.json", "training.csv", "metrics.json", "gantt.svg"}) CHECK(fs::exists(dir / f));
  const nlohmann::json metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
  CHECK(metrics["validation"].contains("raw"));
  CHECK(metrics["command"] == "train");
  const std::string csv = slurp(dir / "training.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4);
  const PolicyDocument doc = load_policy((dir / "policy.json").string());
  CHECK(doc.policy.theta() == r.training.policy.theta());
  CHECK(doc.metadata["experiment"]["id"] == "E2");
  fs::remove_all(dir);
}

TEST_CASE("experiment records round trip") {
  for (const std::string& id : experiment_ids()) {
    ExperimentConfig c = experiment_config(id, "instance2");
    c.penalty.kappa_g = 125.5;
    const ExperimentConfig back = experiment_from_json(nlohmann::json::parse(to_json(c).dump()));
    CHECK(to_json(back) == to_json(c));
  }
  CHECK_THROWS_AS(experiment_from_json(nlohmann::json{{"id", "E1"}}), ParseError);
}
