#include "psched/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "psched/common.hpp"

namespace psched {

using nlohmann::json;

UncertaintyConfig ExperimentConfig::training_uncertainty() const {
  UncertaintyConfig u;
  u.processing_uncertain = processing_uncertain;
  u.due_uncertain = due_uncertain;
  u.c = c;
  u.due_confirm_lead_periods = due_confirm_lead_periods;
  return u;
}

UncertaintyConfig ExperimentConfig::validation_uncertainty() const {
  UncertaintyConfig u = training_uncertainty();
  if (misspecify) {
    u.k_pt = k_pt;
    u.k_dd = k_dd;
  }
  return u;
}

void ExperimentConfig::validate() const {
  objective.validate();
  penalty.validate();
  training_uncertainty().validate();
  validation_uncertainty().validate();
  if (objective.kind == ObjectiveKind::CVaRPenalized && !uncertain()) {
    throw ConfigError("experiment " + id + ": a CVaR objective needs at least one uncertain factor");
  }
  if (misspecify && !uncertain()) throw ConfigError("experiment " + id + ": misspecification needs an uncertain plant");
  if (train_samples < 1) throw ConfigError("training samples must be >= 1");
  if (validation_samples < 1) throw ConfigError("validation samples must be >= 1");
  if (!(report_beta > 0.0 && report_beta <= 1.0)) throw ConfigError("report beta must lie in (0, 1]");
  if (!(upsilon > 0.0 && upsilon < 1.0)) throw ConfigError("upsilon must lie in (0, 1)");
}

namespace {

struct Factors {
  bool processing, due, release;
};

// Full factorial over (processing, due date, release), in table order.
constexpr Factors kFactorial[8] = {
    {false, false, false}, {false, false, true}, {false, true, false}, {false, true, true},
    {true, false, false},  {true, false, true},  {true, true, false},  {true, true, true},
};

constexpr int kMisspec[8][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 0}, {2, 1}, {2, 2}};

}  // namespace

ExperimentConfig experiment_config(std::string_view id, std::string_view instance) {
  ExperimentConfig c;
  c.id = std::string(id);
  c.instance = std::string(instance);
  if (id.size() != 2 || id[1] < '1' || id[1] > '8') throw LookupError("unknown experiment '" + std::string(id) + "'");
  const int row = id[1] - '1';
  const char kind = id[0];
  if (kind == 'E') {
    const Factors f = kFactorial[row];
    c.processing_uncertain = f.processing;
    c.due_uncertain = f.due;
    c.finite_release = f.release;
  } else if (kind == 'D' && row >= 2) {
    const Factors f = kFactorial[row];
    c.processing_uncertain = f.processing;
    c.due_uncertain = f.due;
    c.finite_release = f.release;
    c.objective.kind = ObjectiveKind::CVaRPenalized;
    c.objective.beta = 0.2;
  } else if (kind == 'M') {
    c.processing_uncertain = c.due_uncertain = c.finite_release = true;
    c.misspecify = true;
    c.k_pt = kMisspec[row][0];
    c.k_dd = kMisspec[row][1];
    c.trained_on = "E8";
  } else {
    throw LookupError("unknown experiment '" + std::string(id) + "'");
  }
  c.train_samples = c.uncertain() ? 50 : 1;
  c.validation_samples = 500;
  return c;
}

std::vector<std::string> experiment_ids() {
  std::vector<std::string> ids;
  for (int k = 1; k <= 8; ++k) ids.push_back("E" + std::to_string(k));
  for (int k = 3; k <= 8; ++k) ids.push_back("D" + std::to_string(k));
  for (int k = 1; k <= 8; ++k) ids.push_back("M" + std::to_string(k));
  return ids;
}

json to_json(const ExperimentConfig& c) {
  return json{{"id", c.id},
              {"instance", c.instance},
              {"processing_uncertain", c.processing_uncertain},
              {"due_uncertain", c.due_uncertain},
              {"finite_release", c.finite_release},
              {"objective", to_string(c.objective.kind)},
              {"objective_beta", c.objective.beta},
              {"misspecify", c.misspecify},
              {"k_pt", c.k_pt},
              {"k_dd", c.k_dd},
              {"trained_on", c.trained_on},
              {"train_samples", c.train_samples},
              {"validation_samples", c.validation_samples},
              {"c", c.c},
              {"due_confirm_lead_periods", c.due_confirm_lead_periods},
              {"report_beta", c.report_beta},
              {"upsilon", c.upsilon},
              {"kappa_g", c.penalty.kappa_g},
              {"penalty_norm", c.penalty.norm}};
}

ExperimentConfig experiment_from_json(const json& j) {
  try {
    ExperimentConfig c;
    c.id = j.at("id").get<std::string>();
    c.instance = j.at("instance").get<std::string>();
    c.processing_uncertain = j.at("processing_uncertain").get<bool>();
    c.due_uncertain = j.at("due_uncertain").get<bool>();
    c.finite_release = j.at("finite_release").get<bool>();
    const std::string kind = j.at("objective").get<std::string>();
    if (kind == to_string(ObjectiveKind::MeanPenalized)) {
      c.objective.kind = ObjectiveKind::MeanPenalized;
    } else if (kind == to_string(ObjectiveKind::CVaRPenalized)) {
      c.objective.kind = ObjectiveKind::CVaRPenalized;
    } else {
      throw ParseError("unknown objective '" + kind + "'");
    }
    c.objective.beta = j.at("objective_beta").get<double>();
    c.misspecify = j.at("misspecify").get<bool>();
    c.k_pt = j.at("k_pt").get<int>();
    c.k_dd = j.at("k_dd").get<int>();
    c.trained_on = j.at("trained_on").get<std::string>();
    c.train_samples = j.at("train_samples").get<int>();
    c.validation_samples = j.at("validation_samples").get<int>();
    c.c = j.at("c").get<int>();
    c.due_confirm_lead_periods = j.at("due_confirm_lead_periods").get<int>();
    c.report_beta = j.at("report_beta").get<double>();
    c.upsilon = j.at("upsilon").get<double>();
    c.penalty.kappa_g = j.at("kappa_g").get<double>();
    c.penalty.norm = j.at("penalty_norm").get<int>();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment record: ") + e.what());
  }
}

bool apply_experiment_override(ExperimentConfig& c, const std::string& key, const std::string& value) {
  auto num = [&]() {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("override " + key + ": '" + value + "' is not a number");
    }
  };
  auto integer = [&]() {
    const double v = num();
    if (v != std::floor(v)) throw ConfigError("override " + key + ": '" + value + "' is not an integer");
    return static_cast<int>(v);
  };
  auto flag = [&]() {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw ConfigError("override " + key + ": '" + value + "' is not a boolean");
  };
  if (key == "samples" || key == "train_samples") c.train_samples = integer();
  else if (key == "mc" || key == "validation_samples") c.validation_samples = integer();
  else if (key == "c") c.c = integer();
  else if (key == "k_pt") c.k_pt = integer();
  else if (key == "k_dd") c.k_dd = integer();
  else if (key == "lead" || key == "due_confirm_lead_periods") c.due_confirm_lead_periods = integer();
  else if (key == "beta") c.objective.beta = num();
  else if (key == "report_beta") c.report_beta = num();
  else if (key == "upsilon") c.upsilon = num();
  else if (key == "kappa_g") c.penalty.kappa_g = num();
  else if (key == "penalty_norm") c.penalty.norm = integer();
  else if (key == "processing_uncertain") c.processing_uncertain = flag();
  else if (key == "due_uncertain") c.due_uncertain = flag();
  else if (key == "finite_release") c.finite_release = flag();
  else if (key == "objective") {
    if (value == "mean") c.objective.kind = ObjectiveKind::MeanPenalized;
    else if (value == "cvar") c.objective.kind = ObjectiveKind::CVaRPenalized;
    else throw ConfigError("override objective: expected 'mean' or 'cvar'");
  } else {
    return false;
  }
  return true;
}

ProblemInstance resolve_instance(const std::string& name_or_path) {
  for (const auto& name : builtin_instance_names()) {
    if (name == name_or_path) return builtin_instance(name);
  }
  if (std::filesystem::exists(name_or_path)) return load_instance_file(name_or_path);
  throw LookupError("'" + name_or_path + "' is neither a builtin instance nor a readable file");
}

ProblemInstance experiment_instance(const ExperimentConfig& config) {
  ProblemInstance inst = resolve_instance(config.instance);
  return config.finite_release ? inst : inst.without_release_times();
}

std::uint64_t validation_seed(std::uint64_t seed) { return derive_seed(seed, {0x76616c6964ULL}); }

ValidationReport validate_policy(const Policy& policy, const ExperimentConfig& config, int n_mc, std::uint64_t seed,
                                 const ValidationOptions& options) {
  config.validate();
  if (n_mc < 1) throw ConfigError("need at least one validation episode");
  const ProblemInstance inst = experiment_instance(config);
  check_compatible(policy.spec(), inst);
  EvaluationOptions eval;
  eval.workers = options.workers;
  eval.misspecify = config.misspecify;
  eval.keep_episodes = true;
  eval.rollout = options.rollout;
  eval.rollout.penalty = config.penalty;
  ReturnSamples samples = evaluate_policy(policy, inst, config.validation_uncertainty(), n_mc, validation_seed(seed), eval);

  ValidationReport report;
  report.summary = summarize(samples.z, samples.success, config.report_beta, config.upsilon);
  report.penalized_summary = summarize(samples.z_phi, samples.success, config.report_beta, config.upsilon);
  report.violation_counts.assign(static_cast<std::size_t>(ViolationKind::DoubleAllocation) + 1, 0);
  for (const EpisodeResult& ep : samples.episodes) {
    const ScheduleAudit audit = audit_schedule(ep.schedule_events, inst, ep.makespan);
    for (const Violation& v : audit.violations) ++report.violation_counts[static_cast<std::size_t>(v.kind)];
    if (audit.hard_count() > 0) ++report.episodes_with_hard_violations;
    report.makespans.push_back(ep.makespan);
  }
  report.raw_returns = samples.z;
  report.penalized_returns = samples.z_phi;
  report.success = samples.success;
  report.first_episode = samples.episodes.front();
  report.final_period_first = report.first_episode.makespan;
  return report;
}

json to_json(const ValidationReport& r) {
  json counts = json::object();
  for (std::size_t k = 0; k < r.violation_counts.size(); ++k) {
    counts[to_string(static_cast<ViolationKind>(k))] = r.violation_counts[k];
  }
  return json{{"raw", to_json(r.summary)},
              {"penalized", to_json(r.penalized_summary)},
              {"schedule_violations", counts},
              {"episodes_with_hard_violations", r.episodes_with_hard_violations}};
}

CandidateScore score_candidate(std::span<const double> theta, const NetworkSpec& spec, const ProblemInstance& instance,
                               const ExperimentConfig& config, std::uint64_t seed, int workers) {
  const Policy policy(spec, std::vector<double>(theta.begin(), theta.end()));
  EvaluationOptions eval;
  eval.workers = workers;
  eval.rollout.penalty = config.penalty;
  const ReturnSamples s = evaluate_policy(policy, instance, config.training_uncertainty(), config.train_samples, seed, eval);
  CandidateScore out;
  out.objective = objective(s.z_phi, config.objective);
  out.summary = summarize(s.z, s.success, config.report_beta, config.upsilon);
  return out;
}

TrainingResult train_policy(const ExperimentConfig& config, std::uint64_t seed, const TrainingOptions& options) {
  config.validate();
  if (config.misspecify) {
    throw ConfigError("experiment " + config.id + " reuses the " + config.trained_on +
                      " policy; run validate with that policy instead of training");
  }
  const ProblemInstance inst = experiment_instance(config);
  const NetworkSpec spec = network_for(inst);
  SwarmConfig swarm = options.swarm;
  swarm.seed = seed;
  swarm.workers = options.workers;
  const std::uint64_t crn_seed = derive_seed(seed, {0x63726eULL});
  // Parallelism goes to the swarm; each candidate evaluates its samples inline.
  ObjectiveFn fn = [&](std::span<const double> theta, std::uint64_t s) {
    return score_candidate(theta, spec, inst, config, options.common_random_numbers ? crn_seed : s, 1);
  };
  IterationCallback cb;
  if (!options.checkpoint_path.empty()) {
    cb = [&](const SwarmState& st) { write_text_file(options.checkpoint_path, checkpoint_to_json(st).dump()); };
  }
  OptimizeResult search;
  if (!options.resume_path.empty()) {
    std::ifstream in(options.resume_path);
    if (!in) throw ConfigError("cannot open checkpoint " + options.resume_path);
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ParseError(options.resume_path + ": " + e.what());
    }
    SwarmState st = checkpoint_from_json(doc);
    search = optimize(swarm, param_count(spec), fn, &st, cb);
  } else {
    search = optimize(swarm, param_count(spec), fn, nullptr, cb);
  }
  return TrainingResult{Policy(spec, search.best), std::move(search)};
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed for " + path);
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, const TrainingOptions& options,
                                const std::string& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  TrainingResult training = train_policy(config, seed, options);
  ValidationOptions vopts;
  vopts.workers = options.workers;
  ValidationReport validation = validate_policy(training.policy, config, config.validation_samples, seed, vopts);

  SwarmConfig swarm = options.swarm;
  swarm.seed = seed;
  const json meta{{"experiment", to_json(config)},
                  {"optimizer", to_json(swarm)},
                  {"seed", seed},
                  {"common_random_numbers", options.common_random_numbers}};
  save_policy(out_dir + "/policy.json", training.policy, meta);

  std::ostringstream csv;
  write_history_csv(csv, training.search.history);
  write_text_file(out_dir + "/training.csv", csv.str());

  const ProblemInstance inst = experiment_instance(config);
  write_text_file(out_dir + "/gantt.svg", export_gantt(validation.first_episode, inst));

  json metrics = meta;
  metrics["command"] = "train";
  metrics["training"] = {{"best_objective", training.search.best_score},
                         {"evaluations", training.search.evaluations},
                         {"failed_evaluations", training.search.failed_evaluations}};
  if (training.search.best_detail.summary) metrics["training"]["best_summary"] = to_json(*training.search.best_detail.summary);
  metrics["validation"] = to_json(validation);
  write_text_file(out_dir + "/metrics.json", metrics.dump(2) + "\n");
  return ExperimentResult{std::move(training), std::move(validation)};
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string task_color(int task, int n) {
  const int hue = static_cast<int>(std::lround(360.0 * (task - 1) / std::max(1, n)));
  return "hsl(" + std::to_string(hue) + ",55%,62%)";
}

}  // namespace

std::string export_gantt(const EpisodeResult& episode, const ProblemInstance& instance) {
  const double dt = instance.dt_days();
  const int nu = instance.num_units();
  int last_period = std::max(1, episode.makespan);
  for (const ScheduleEvent& e : episode.schedule_events) {
    last_period = std::max(last_period, e.completed ? e.end_period() : episode.makespan);
  }
  const double span_days = last_period * dt;
  const double left = 70.0, right = 20.0, top = 30.0, lane_h = 36.0, bar_h = 24.0, plot_w = 800.0;
  const double height = top + nu * lane_h + 40.0;
  const double width = left + plot_w + right;
  auto x_of = [&](int period) { return left + plot_w * (period * dt) / span_days; };

  std::ostringstream svg;
  svg << R"(<?xml version="1.0" encoding="UTF-8"?>)" << '\n';
  svg << R"(<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width=")" << fmt(width) << R"(" height=")"
      << fmt(height) << R"(" viewBox="0 0 )" << fmt(width) << ' ' << fmt(height) << R"(">)" << '\n';
  svg << R"s(<defs><pattern id="setup" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">)s"
      << R"(<rect width="6" height="6" fill="#eeeeee"/><line x1="0" y1="0" x2="0" y2="6" stroke="#888888" stroke-width="2"/>)"
      << "</pattern></defs>\n";
  svg << R"(<rect x="0" y="0" width=")" << fmt(width) << R"(" height=")" << fmt(height) << R"(" fill="white"/>)" << '\n';
  svg << R"(<text x=")" << fmt(left) << R"(" y="18" font-family="sans-serif" font-size="13">)" << xml_escape(instance.name())
      << " schedule, makespan " << fmt(episode.makespan * dt) << " days</text>\n";
  for (int l = 1; l <= nu; ++l) {
    const double y = top + (l - 1) * lane_h;
    svg << R"(<g class="lane" data-unit=")" << l << R"(">)";
    svg << R"(<rect x=")" << fmt(left) << R"(" y=")" << fmt(y) << R"(" width=")" << fmt(plot_w) << R"(" height=")"
        << fmt(lane_h) << R"(" fill=")" << (l % 2 ? "#fafafa" : "#f0f0f0") << R"("/>)";
    svg << R"(<text x="8" y=")" << fmt(y + lane_h / 2 + 4) << R"(" font-family="sans-serif" font-size="12">Unit )" << l
        << "</text></g>\n";
  }
  for (const ScheduleEvent& e : episode.schedule_events) {
    const double y = top + (e.unit - 1) * lane_h + (lane_h - bar_h) / 2;
    const int begin = e.processing_start();
    const int end = e.completed ? e.end_period() : std::max(begin, episode.makespan);
    if (e.setup_periods > 0) {
      const double w = std::max(0.5, x_of(begin) - x_of(e.start_period));
      svg << R"(<rect class="setup" x=")" << fmt(x_of(e.start_period)) << R"(" y=")" << fmt(y) << R"(" width=")"
          << fmt(w) << R"(" height=")" << fmt(bar_h) << R"s(" fill="url(#setup)" stroke="#666666" stroke-width="0.5"/>)s"
          << '\n';
    }
    const double w = std::max(0.5, x_of(end) - x_of(begin));
    svg << R"(<rect class="campaign" data-task=")" << e.task << R"(" data-start-day=")" << fmt(begin * dt)
        << R"(" data-end-day=")" << fmt(end * dt) << R"(" x=")" << fmt(x_of(begin)) << R"(" y=")" << fmt(y)
        << R"(" width=")" << fmt(w) << R"(" height=")" << fmt(bar_h) << R"(" fill=")"
        << task_color(e.task, instance.num_tasks()) << R"(" stroke="#333333" stroke-width="0.8")"
        << (e.completed ? "" : R"( stroke-dasharray="3,2")") << "/>\n";
    svg << R"(<text x=")" << fmt(x_of(begin) + w / 2) << R"(" y=")" << fmt(y + bar_h / 2 + 4)
        << R"(" text-anchor="middle" font-family="sans-serif" font-size="11">T)" << e.task << "</text>\n";
  }
  const double axis_y = top + nu * lane_h;
  svg << R"(<line x1=")" << fmt(left) << R"(" y1=")" << fmt(axis_y) << R"(" x2=")" << fmt(left + plot_w) << R"(" y2=")"
      << fmt(axis_y) << R"(" stroke="black"/>)" << '\n';
  const double tick = span_days <= 20 ? 1.0 : (span_days <= 60 ? 5.0 : 10.0);
  for (double d = 0.0; d <= span_days + 1e-9; d += tick) {
    const double x = left + plot_w * d / span_days;
    svg << R"(<line x1=")" << fmt(x) << R"(" y1=")" << fmt(axis_y) << R"(" x2=")" << fmt(x) << R"(" y2=")"
        << fmt(axis_y + 5) << R"(" stroke="black"/>)";
    svg << R"(<text x=")" << fmt(x) << R"(" y=")" << fmt(axis_y + 18)
        << R"(" text-anchor="middle" font-family="sans-serif" font-size="10">)" << fmt(d) << "</text>\n";
  }
  svg << R"(<text x=")" << fmt(left + plot_w / 2) << R"(" y=")" << fmt(axis_y + 34)
      << R"(" text-anchor="middle" font-family="sans-serif" font-size="11">time (days)</text>)" << '\n';
  svg << "</svg>\n";
  return svg.str();
}

LatencyStats measure_decision_latency(const Policy& policy, const ProblemInstance& instance, int n_steps,
                                      std::uint64_t seed) {
  if (n_steps < 1) throw ConfigError("latency measurement needs at least one step");
  check_compatible(policy.spec(), instance);
  UncertaintyConfig unc;
  unc.processing_uncertain = unc.due_uncertain = true;
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(n_steps));
  std::vector<double> features(static_cast<std::size_t>(instance.state_dim()));
  std::vector<double> latent(static_cast<std::size_t>(instance.num_units()));
  std::vector<int> control(static_cast<std::size_t>(instance.num_units()));
  FeasibleSets sets;
  bool warm = false;
  for (std::uint64_t episode = 0; samples.size() < static_cast<std::size_t>(n_steps); ++episode) {
    const Scenario sc = scenario_for_sample(instance, unc, false, seed, episode);
    PlantState state = initial_state(instance, sc);
    HiddenState hidden = policy.initial_hidden();
    while (!state.done && samples.size() < static_cast<std::size_t>(n_steps)) {
      const auto t0 = std::chrono::steady_clock::now();
      feasible_sets(state, instance, sets);
      normalize_state(state, instance, features, policy.spec().normalize_inputs);
      policy.forward(features, hidden, latent);
      round_to_control(latent, sets, control);
      const auto t1 = std::chrono::steady_clock::now();
      if (warm) samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
      // Duplicate picks are legal for the plant; only the penalty sees them.
      step(state, control, sc, instance);
    }
    warm = true;
  }
  LatencyStats s;
  s.n = static_cast<int>(samples.size());
  s.mean_us = std::accumulate(samples.begin(), samples.end(), 0.0) / s.n;
  double sq = 0.0;
  for (double v : samples) sq += (v - s.mean_us) * (v - s.mean_us);
  s.std_us = std::sqrt(sq / s.n);
  std::sort(samples.begin(), samples.end());
  auto pct = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * s.n)) - 1;
    return samples[std::min(idx, samples.size() - 1)];
  };
  s.p50_us = pct(0.50);
  s.p95_us = pct(0.95);
  s.max_us = samples.back();
  return s;
}

json to_json(const LatencyStats& s) {
  return json{{"n", s.n},           {"mean_us", s.mean_us}, {"std_us", s.std_us},
              {"p50_us", s.p50_us}, {"p95_us", s.p95_us},   {"max_us", s.max_us}};
}

}  // namespace psched
