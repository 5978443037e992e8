// Python bindings. Structured results cross the boundary as JSON text and
// are decoded by the package's __init__.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "psched/common.hpp"
#include "psched/harness.hpp"
#include "psched/risk.hpp"

namespace py = pybind11;
using namespace psched;
using nlohmann::json;

namespace {

ProblemInstance instance_for(const std::string& name_or_path) { return resolve_instance(name_or_path); }

json episode_json(const EpisodeResult& r) {
  json events = json::array();
  for (const ScheduleEvent& e : r.schedule_events) {
    events.push_back({{"unit", e.unit},
                      {"task", e.task},
                      {"start_period", e.start_period},
                      {"setup_periods", e.setup_periods},
                      {"batch_completion_periods", e.batch_completion_periods},
                      {"completed", e.completed}});
  }
  return {{"raw_return", r.raw_return},    {"penalized_return", r.penalized_return},
          {"total_penalty", r.total_penalty}, {"violated", r.violated},
          {"makespan", r.makespan},        {"tardiness", r.tardiness},
          {"schedule", events}};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Scheduling environment, policy search and risk estimates";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<LookupError>(m, "LookupError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<EligibilityError>(m, "EligibilityError", base.ptr());

  m.def("instance_summary", [](const std::string& name) {
    const ProblemInstance inst = instance_for(name);
    return json{{"name", inst.name()},
                {"num_tasks", inst.num_tasks()},
                {"num_units", inst.num_units()},
                {"state_dim", inst.state_dim()},
                {"horizon", inst.horizon()},
                {"param_count", param_count(network_for(inst))},
                {"warnings", inst.warnings()}}
        .dump();
  });
  m.def("instance_json", [](const std::string& name) { return to_json(instance_for(name).data()).dump(); });
  m.def("experiment_ids", &experiment_ids);
  m.def("experiment_json", [](const std::string& id, const std::string& instance) {
    return to_json(experiment_config(id, instance)).dump();
  });

  m.def("var_estimate", [](const std::vector<double>& z, double beta) { return var_estimate(z, beta); });
  m.def("cvar_estimate", [](const std::vector<double>& z, double beta) { return cvar_estimate(z, beta); });
  m.def("clopper_pearson_lb", &clopper_pearson_lb, py::arg("successes"), py::arg("n"), py::arg("upsilon") = 0.05);

  m.def(
      "forward",
      [](const std::string& instance, const std::vector<double>& theta, const std::vector<std::vector<double>>& inputs) {
        const Policy p(network_for(instance_for(instance)), theta);
        HiddenState h = p.initial_hidden();
        std::vector<std::vector<double>> out;
        for (const auto& x : inputs) out.push_back(p.forward(x, h));
        return out;
      },
      py::arg("instance"), py::arg("theta"), py::arg("inputs"));

  m.def(
      "rollout",
      [](const std::string& policy_json, const std::string& instance, const std::string& experiment,
         std::uint64_t seed) {
        const PolicyDocument doc = policy_from_json(json::parse(policy_json));
        const ExperimentConfig cfg = experiment_config(experiment, instance);
        const ProblemInstance inst = experiment_instance(cfg);
        const Scenario sc = scenario_for_sample(inst, cfg.validation_uncertainty(), cfg.misspecify, seed, 0);
        RolloutOptions opts;
        opts.penalty = cfg.penalty;
        const EpisodeResult r = run_episode(doc.policy, inst, sc, opts);
        json out = episode_json(r);
        out["gantt_svg"] = export_gantt(r, inst);
        return out.dump();
      },
      py::arg("policy_json"), py::arg("instance"), py::arg("experiment"), py::arg("seed") = 0);

  m.def(
      "train",
      [](const std::string& experiment, const std::string& instance, std::uint64_t seed,
         const std::vector<std::pair<std::string, std::string>>& overrides, int workers) {
        ExperimentConfig cfg = experiment_config(experiment, instance);
        TrainingOptions opts;
        opts.workers = workers;
        for (const auto& [k, v] : overrides) {
          if (!apply_experiment_override(cfg, k, v)) apply_override(opts.swarm, k, v);
        }
        std::optional<TrainingResult> r;
        {
          py::gil_scoped_release release;
          r.emplace(train_policy(cfg, seed, opts));
        }
        json history = json::array();
        for (const HistoryRow& row : r->search.history) history.push_back(row.best_objective);
        return json{{"best_objective", r->search.best_score},
                    {"history", history},
                    {"policy", policy_to_json(r->policy, {{"experiment", to_json(cfg)}, {"seed", seed}})}}
            .dump();
      },
      py::arg("experiment"), py::arg("instance") = "instance1", py::arg("seed") = 0,
      py::arg("overrides") = std::vector<std::pair<std::string, std::string>>{}, py::arg("workers") = 1);

  m.def(
      "validate",
      [](const std::string& policy_json, const std::string& experiment, const std::string& instance, int n_mc,
         std::uint64_t seed, int workers) {
        const PolicyDocument doc = policy_from_json(json::parse(policy_json));
        const ExperimentConfig cfg = experiment_config(experiment, instance);
        ValidationOptions opts;
        opts.workers = workers;
        ValidationReport r;
        {
          py::gil_scoped_release release;
          r = validate_policy(doc.policy, cfg, n_mc, seed, opts);
        }
        return to_json(r).dump();
      },
      py::arg("policy_json"), py::arg("experiment"), py::arg("instance") = "instance1", py::arg("n_mc") = 500,
      py::arg("seed") = 0, py::arg("workers") = 1);

  m.def(
      "latency",
      [](const std::string& policy_json, const std::string& instance, int steps) {
        const PolicyDocument doc = policy_from_json(json::parse(policy_json));
        return to_json(measure_decision_latency(doc.policy, instance_for(instance), steps)).dump();
      },
      py::arg("policy_json"), py::arg("instance"), py::arg("steps") = 1000);
}
