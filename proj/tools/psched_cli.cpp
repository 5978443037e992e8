// Command-line front end. Exit codes: 0 success, 2 configuration error,
// 3 invalid input data, 1 anything else.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "psched/common.hpp"
#include "psched/harness.hpp"

using namespace psched;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitValidation = 3;

struct Overrides {
  std::vector<std::string> items;

  void apply(ExperimentConfig& exp, SwarmConfig* swarm) const {
    for (const std::string& kv : items) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + kv + "' is not key=value");
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      if (apply_experiment_override(exp, key, value)) continue;
      if (swarm == nullptr) throw ConfigError("unknown setting '" + key + "'");
      apply_override(*swarm, key, value);
    }
  }
};

std::string instance_from_metadata(const json& meta, const std::string& fallback) {
  if (meta.contains("experiment") && meta["experiment"].contains("instance")) {
    return meta["experiment"]["instance"].get<std::string>();
  }
  return fallback;
}

ExperimentConfig experiment_or_custom(const std::string& id, const std::string& instance) {
  if (id.empty()) {
    ExperimentConfig c;
    c.instance = instance;
    c.finite_release = true;
    return c;
  }
  return experiment_config(id, instance);
}

// An explicit --experiment wins; otherwise the policy's own training
// experiment, with the instance replaced when one was given.
ExperimentConfig experiment_for_policy(const std::string& id, const std::string& instance_opt, const json& meta,
                                       const std::string& fallback_instance) {
  const std::string instance = instance_opt.empty() ? instance_from_metadata(meta, fallback_instance) : instance_opt;
  if (id.empty() && meta.contains("experiment")) {
    ExperimentConfig c = experiment_from_json(meta["experiment"]);
    c.instance = instance;
    return c;
  }
  return experiment_or_custom(id, instance);
}

int run_train(const std::string& experiment, const std::string& instance, std::uint64_t seed, const std::string& out,
              int pop, int iters, int samples, double beta, int mc, int workers, bool crn,
              const std::string& checkpoint, const std::string& resume, const Overrides& ov) {
  ExperimentConfig exp = experiment_config(experiment, instance);
  TrainingOptions opts;
  opts.swarm.population = pop;
  opts.swarm.iterations = iters;
  if (samples > 0) exp.train_samples = samples;
  if (beta > 0.0) exp.objective.beta = beta;
  if (mc > 0) exp.validation_samples = mc;
  ov.apply(exp, &opts.swarm);
  opts.workers = workers;
  opts.common_random_numbers = crn;
  opts.checkpoint_path = checkpoint;
  opts.resume_path = resume;
  const ExperimentResult r = run_experiment(exp, seed, opts, out);
  std::cout << "best objective " << r.training.search.best_score << "; validation mean " << r.validation.summary.mean
            << ", cvar " << r.validation.summary.cvar_beta << ", F_LB " << r.validation.summary.f_lb << "\n"
            << "wrote " << out << "/{policy.json,training.csv,metrics.json,gantt.svg}\n";
  return 0;
}

int run_validate(const std::string& policy_path, const std::string& experiment, const std::string& instance_opt,
                 int mc, std::uint64_t seed, const std::string& out, int workers, int latency_steps, const Overrides& ov) {
  const PolicyDocument doc = load_policy(policy_path);
  ExperimentConfig exp = experiment_for_policy(experiment, instance_opt, doc.metadata, "instance1");
  ov.apply(exp, nullptr);
  if (mc > 0) exp.validation_samples = mc;
  ValidationOptions vopts;
  vopts.workers = workers;
  const ValidationReport report = validate_policy(doc.policy, exp, exp.validation_samples, seed, vopts);

  std::filesystem::create_directories(out);
  json metrics{{"command", "validate"},
               {"experiment", to_json(exp)},
               {"seed", seed},
               {"policy_metadata", doc.metadata},
               {"validation", to_json(report)}};
  write_text_file(out + "/metrics.json", metrics.dump(2) + "\n");

  std::ostringstream csv;
  csv << std::setprecision(17) << "episode,raw_return,penalized_return,success,makespan\n";
  for (std::size_t k = 0; k < report.raw_returns.size(); ++k) {
    csv << k << ',' << report.raw_returns[k] << ',' << report.penalized_returns[k] << ','
        << static_cast<int>(report.success[k]) << ',' << report.makespans[k] << '\n';
  }
  write_text_file(out + "/episodes.csv", csv.str());
  const ProblemInstance inst = experiment_instance(exp);
  write_text_file(out + "/gantt.svg", export_gantt(report.first_episode, inst));
  if (latency_steps > 0) {
    const LatencyStats lat = measure_decision_latency(doc.policy, inst, latency_steps, seed);
    write_text_file(out + "/timing.json", json{{"decision_latency", to_json(lat)}}.dump(2) + "\n");
  }
  const RiskSummary& s = report.summary;
  std::cout << "mean " << s.mean << ", std " << s.std << ", VaR " << s.var_beta << ", CVaR " << s.cvar_beta
            << ", F_SA " << s.f_sa << ", F_LB " << s.f_lb << "; hard schedule violations in "
            << report.episodes_with_hard_violations << " episodes\n";
  return 0;
}

int run_rollout(const std::string& policy_path, const std::string& instance_opt, const std::string& experiment,
                std::uint64_t seed, const std::string& gantt, const std::string& trace, const std::string& scenario_in,
                const std::string& scenario_out, const std::string& metrics_out, bool no_mask) {
  const PolicyDocument doc = load_policy(policy_path);
  const ExperimentConfig exp = experiment_for_policy(experiment, instance_opt, doc.metadata, "instance1");
  exp.validate();
  const ProblemInstance inst = experiment_instance(exp);
  Scenario sc;
  if (!scenario_in.empty()) {
    std::ifstream in(scenario_in);
    if (!in) throw ConfigError("cannot open scenario " + scenario_in);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ParseError(scenario_in + ": " + e.what());
    }
    sc = scenario_from_json(j);
  } else {
    sc = scenario_for_sample(inst, exp.validation_uncertainty(), exp.misspecify, derive_seed(seed, {0x726f6cULL}), 0);
  }
  if (!scenario_out.empty()) write_text_file(scenario_out, scenario_to_json(sc).dump(2) + "\n");

  RolloutOptions ropts;
  ropts.penalty = exp.penalty;
  ropts.mask = !no_mask;
  std::ofstream trace_stream;
  if (!trace.empty()) {
    const std::filesystem::path p(trace);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    trace_stream.open(trace);
    if (!trace_stream) throw ConfigError("cannot write " + trace);
    ropts.trace = &trace_stream;
  }
  const EpisodeResult r = run_episode(doc.policy, inst, sc, ropts);
  const ScheduleAudit audit = audit_schedule(r.schedule_events, inst, r.makespan);
  json violations = json::array();
  for (const Violation& v : audit.violations) violations.push_back({{"kind", to_string(v.kind)}, {"detail", v.detail}});
  json events = json::array();
  for (const ScheduleEvent& e : r.schedule_events) {
    events.push_back({{"unit", e.unit},
                      {"task", e.task},
                      {"start_period", e.start_period},
                      {"setup_periods", e.setup_periods},
                      {"batch_completion_periods", e.batch_completion_periods},
                      {"completed", e.completed}});
  }
  const json metrics{{"command", "rollout"},
                     {"experiment", to_json(exp)},
                     {"seed", seed},
                     {"raw_return", r.raw_return},
                     {"penalized_return", r.penalized_return},
                     {"total_penalty", r.total_penalty},
                     {"violated", r.violated},
                     {"makespan", r.makespan},
                     {"tardiness", r.tardiness},
                     {"schedule", events},
                     {"schedule_violations", violations}};
  if (!gantt.empty()) write_text_file(gantt, export_gantt(r, inst));
  if (!metrics_out.empty()) write_text_file(metrics_out, metrics.dump(2) + "\n");
  std::cout << "return " << r.raw_return << " (penalized " << r.penalized_return << "), makespan " << r.makespan
            << " periods, " << audit.violations.size() << " schedule violations\n";
  return 0;
}

int run_latency(const std::string& policy_path, const std::string& instance_opt, int steps, std::uint64_t seed,
                const std::string& out) {
  const PolicyDocument doc = load_policy(policy_path);
  const std::string instance = instance_opt.empty() ? instance_from_metadata(doc.metadata, "instance2") : instance_opt;
  const ProblemInstance inst = resolve_instance(instance);
  const LatencyStats s = measure_decision_latency(doc.policy, inst, steps, seed);
  const json j{{"instance", inst.name()}, {"decision_latency", to_json(s)}};
  if (!out.empty()) write_text_file(out, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_instance_validate(const std::string& path) {
  const ProblemInstance inst = load_instance_file(path);
  for (const auto& w : inst.warnings()) std::cerr << "warning: " << w << "\n";
  std::cout << inst.name() << ": " << inst.num_tasks() << " tasks, " << inst.num_units() << " units, horizon "
            << inst.horizon() << " periods of " << inst.dt_days() << " days; valid\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-policy production scheduling under uncertainty"};
  app.require_subcommand(1);

  std::string experiment = "E1", instance = "instance1", out = "out", checkpoint, resume;
  std::uint64_t seed = 0;
  int pop = 60, iters = 150, samples = 0, mc = 0, workers = 1;
  double beta = 0.0;
  bool crn = false;
  Overrides ov;
  auto* train = app.add_subcommand("train", "train a policy for one experiment");
  train->add_option("--experiment", experiment, "E1..E8 or D3..D8")->capture_default_str();
  train->add_option("--instance", instance, "builtin name or instance file")->capture_default_str();
  train->add_option("--seed", seed)->capture_default_str();
  train->add_option("--out", out, "output directory")->capture_default_str();
  train->add_option("--pop", pop, "population size")->capture_default_str();
  train->add_option("--iters", iters, "iterations")->capture_default_str();
  train->add_option("--samples", samples, "training samples per candidate (default 50 uncertain, 1 deterministic)");
  train->add_option("--beta", beta, "CVaR level for D experiments");
  train->add_option("--mc", mc, "validation episodes (default 500)");
  train->add_option("--workers", workers, "threads")->capture_default_str();
  train->add_flag("--crn", crn, "evaluate every candidate on the same scenarios");
  train->add_option("--checkpoint", checkpoint, "swarm checkpoint written every iteration");
  train->add_option("--resume", resume, "continue from a checkpoint");
  train->add_option("--override", ov.items, "key=value, repeatable");

  std::string policy_path, v_experiment, v_instance, v_out = "out";
  std::uint64_t v_seed = 0;
  int v_mc = 0, v_workers = 1, v_latency = 0;
  Overrides v_ov;
  auto* validate = app.add_subcommand("validate", "Monte-Carlo validation of a trained policy");
  validate->add_option("--policy", policy_path)->required();
  validate->add_option("--experiment", v_experiment, "E*, D* or M*; default: deterministic plant");
  validate->add_option("--instance", v_instance, "defaults to the instance the policy was trained on");
  validate->add_option("--mc", v_mc, "episodes (default 500)");
  validate->add_option("--seed", v_seed)->capture_default_str();
  validate->add_option("--out", v_out)->capture_default_str();
  validate->add_option("--workers", v_workers)->capture_default_str();
  validate->add_option("--latency-steps", v_latency, "also time this many decisions into timing.json");
  validate->add_option("--override", v_ov.items, "key=value, repeatable");

  std::string r_policy, r_instance, r_experiment, gantt, trace, scenario_in, scenario_out, r_metrics;
  std::uint64_t r_seed = 0;
  bool no_mask = false;
  auto* rollout = app.add_subcommand("rollout", "run one episode and render it");
  rollout->add_option("--policy", r_policy)->required();
  rollout->add_option("--instance", r_instance);
  rollout->add_option("--experiment", r_experiment, "plant factors; default deterministic with releases");
  rollout->add_option("--seed", r_seed)->capture_default_str();
  rollout->add_option("--gantt", gantt, "SVG output");
  rollout->add_option("--trace", trace, "JSON-lines trajectory output");
  rollout->add_option("--scenario", scenario_in, "replay a saved scenario");
  rollout->add_option("--save-scenario", scenario_out, "write the scenario used");
  rollout->add_option("--metrics", r_metrics, "episode summary JSON");
  rollout->add_flag("--no-mask", no_mask, "debug: drop the feasibility mask");

  std::string l_policy, l_instance, l_out;
  int steps = 10000;
  std::uint64_t l_seed = 0;
  auto* latency = app.add_subcommand("latency", "time per-decision inference");
  latency->add_option("--policy", l_policy)->required();
  latency->add_option("--instance", l_instance);
  latency->add_option("--steps", steps)->capture_default_str();
  latency->add_option("--seed", l_seed)->capture_default_str();
  latency->add_option("--out", l_out, "JSON output file");

  std::string instance_file;
  auto* inst_cmd = app.add_subcommand("instance", "instance utilities");
  inst_cmd->require_subcommand(1);
  auto* inst_validate = inst_cmd->add_subcommand("validate", "check an instance file");
  inst_validate->add_option("file", instance_file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) {
      return run_train(experiment, instance, seed, out, pop, iters, samples, beta, mc, workers, crn, checkpoint, resume,
                       ov);
    }
    if (*validate) return run_validate(policy_path, v_experiment, v_instance, v_mc, v_seed, v_out, v_workers, v_latency, v_ov);
    if (*rollout) {
      return run_rollout(r_policy, r_instance, r_experiment, r_seed, gantt, trace, scenario_in, scenario_out, r_metrics,
                         no_mask);
    }
    if (*latency) return run_latency(l_policy, l_instance, steps, l_seed, l_out);
    if (*inst_validate) return run_instance_validate(instance_file);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const LookupError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
